//! Whitespace-separated reference profiles with a user-supplied column map.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{io_err, CliError, Result};

/// Profile quantities understood by the comparison tools. `Y` is the
/// distance from the wall in outer units (`0` at the wall, `1` at the
/// centreline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantity {
    Y,
    YPlus,
    UPlus,
    UvPlus,
    UrmsPlus,
    VrmsPlus,
    WrmsPlus,
}

impl Quantity {
    pub const ALL: [Quantity; 7] = [
        Quantity::Y,
        Quantity::YPlus,
        Quantity::UPlus,
        Quantity::UvPlus,
        Quantity::UrmsPlus,
        Quantity::VrmsPlus,
        Quantity::WrmsPlus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Y => "y",
            Quantity::YPlus => "yplus",
            Quantity::UPlus => "uplus",
            Quantity::UvPlus => "uvplus",
            Quantity::UrmsPlus => "urmsplus",
            Quantity::VrmsPlus => "vrmsplus",
            Quantity::WrmsPlus => "wrmsplus",
        }
    }

    pub fn is_abscissa(&self) -> bool {
        matches!(self, Quantity::Y | Quantity::YPlus)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let key: String = s.chars().filter(|c| *c != '_' && *c != '+').collect::<String>().to_lowercase();
        let key = match key.as_str() {
            "u" => "uplus",
            other => other,
        };
        Quantity::ALL.into_iter().find(|q| q.name() == key).ok_or_else(|| {
            let names: Vec<_> = Quantity::ALL.iter().map(|q| q.name()).collect();
            format!("unknown quantity `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// `quantity:column` pairs, columns counted from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub entries: Vec<(Quantity, usize)>,
}

impl FromStr for ColumnMap {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let mut entries: Vec<(Quantity, usize)> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, col) = part
                .split_once(':')
                .ok_or_else(|| CliError::Mapping(format!("`{part}` is not of the form name:column")))?;
            let q: Quantity = name.trim().parse().map_err(CliError::Mapping)?;
            let col: usize = col
                .trim()
                .parse()
                .ok()
                .filter(|c| *c >= 1)
                .ok_or_else(|| CliError::Mapping(format!("`{col}` is not a column number (1-based)")))?;
            if entries.iter().any(|(e, _)| *e == q) {
                return Err(CliError::Mapping(format!("`{q}` mapped twice")));
            }
            entries.push((q, col));
        }
        if !entries.iter().any(|(q, _)| q.is_abscissa()) {
            return Err(CliError::Mapping("no `y` or `yplus` column mapped".into()));
        }
        if !entries.iter().any(|(q, _)| !q.is_abscissa()) {
            return Err(CliError::Mapping("no profile quantity mapped".into()));
        }
        Ok(Self { entries })
    }
}

/// Named columns sharing one strictly increasing abscissa ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProfile {
    pub label: String,
    pub columns: BTreeMap<Quantity, Vec<f64>>,
}

impl ReferenceProfile {
    pub fn len(&self) -> usize {
        self.columns.values().next().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, q: Quantity) -> Option<&[f64]> {
        self.columns.get(&q).map(Vec::as_slice)
    }

    /// Preferred abscissa: `yplus` if present, else `y`.
    pub fn abscissa(&self) -> Option<(Quantity, &[f64])> {
        [Quantity::YPlus, Quantity::Y].into_iter().find_map(|q| self.get(q).map(|v| (q, v)))
    }

    /// Checks monotonicity of every abscissa column, flipping a decreasing
    /// profile so all abscissae increase.
    pub fn normalize_order(&mut self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(CliError::EmptyProfile(self.label.clone()));
        }
        let Some((_, x)) = self.abscissa() else {
            return Err(CliError::Mapping("profile has no abscissa".into()));
        };
        if n >= 2 && x[1] < x[0] {
            self.columns.values_mut().for_each(|c| c.reverse());
        }
        for q in [Quantity::YPlus, Quantity::Y] {
            if let Some(x) = self.get(q) {
                if let Some(row) = (1..n).find(|&i| x[i] <= x[i - 1]) {
                    return Err(CliError::NotMonotone { file: self.label.clone(), row: row + 1 });
                }
            }
        }
        Ok(())
    }
}

/// Parses reference text. `label` names the source in errors.
pub fn parse_reference(text: &str, map: &ColumnMap, label: &str) -> Result<ReferenceProfile> {
    let mut expected: Option<usize> = None;
    let mut columns: BTreeMap<Quantity, Vec<f64>> =
        map.entries.iter().map(|(q, _)| (*q, Vec::new())).collect();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('%') || content.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for (c, token) in content.split_whitespace().enumerate() {
            let value = token.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::ParseNumber {
                    file: label.to_string(),
                    line,
                    column: c + 1,
                    token: token.to_string(),
                }
            })?;
            row.push(value);
        }
        match expected {
            None => {
                if let Some((q, col)) = map.entries.iter().find(|(_, col)| *col > row.len()) {
                    return Err(CliError::Mapping(format!(
                        "`{q}` mapped to column {col} but {label} has {} columns",
                        row.len()
                    )));
                }
                expected = Some(row.len());
            }
            Some(n) if n != row.len() => {
                return Err(CliError::ColumnCount { file: label.to_string(), line, expected: n, found: row.len() });
            }
            Some(_) => {}
        }
        for (q, col) in &map.entries {
            columns.get_mut(q).unwrap().push(row[col - 1]);
        }
    }
    let mut profile = ReferenceProfile { label: label.to_string(), columns };
    profile.normalize_order()?;
    Ok(profile)
}

pub fn load_reference(path: &Path, map: &ColumnMap) -> Result<ReferenceProfile> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_reference(&text, map, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(s: &str) -> ColumnMap {
        s.parse().unwrap()
    }

    #[test]
    fn two_point_profile() {
        let p = parse_reference("0.0 0.0\n1.0 18.2\n", &map("y:1,Uplus:2"), "t").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.get(Quantity::UPlus).unwrap(), &[0.0, 18.2]);
        assert_eq!(p.abscissa().unwrap().0, Quantity::Y);
    }

    #[test]
    fn comments_only_is_empty() {
        let err = parse_reference("% header\n# more\n\n", &map("y:1,Uplus:2"), "t").unwrap_err();
        assert!(matches!(err, CliError::EmptyProfile(_)));
    }

    #[test]
    fn column_count_mismatch_cites_line() {
        let text = "% a\n% b\n1 2 3\n2 3 4\n3 4 5\n4 5 6\n5 6\n";
        match parse_reference(text, &map("yplus:1,uplus:2"), "t").unwrap_err() {
            CliError::ColumnCount { line, expected, found, .. } => {
                assert_eq!((line, expected, found), (7, 3, 2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_cell_cites_line_and_column() {
        for bad in ["abc", "nan", "inf"] {
            let text = format!("1 2\n2 {bad}\n");
            match parse_reference(&text, &map("y:1,uplus:2"), "t").unwrap_err() {
                CliError::ParseNumber { line, column, .. } => assert_eq!((line, column), (2, 2)),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn mapping_errors() {
        assert!("uplus:2".parse::<ColumnMap>().is_err());
        assert!("y:1".parse::<ColumnMap>().is_err());
        assert!("y:0,uplus:1".parse::<ColumnMap>().is_err());
        assert!("y:1,y:2,uplus:3".parse::<ColumnMap>().is_err());
        assert!("y:1,speed:2".parse::<ColumnMap>().is_err());
        let err = parse_reference("1 2\n", &map("y:1,uplus:3"), "t").unwrap_err();
        assert!(matches!(err, CliError::Mapping(_)));
    }

    #[test]
    fn decreasing_profile_is_flipped_and_duplicates_rejected() {
        let p = parse_reference("2 20\n1 10\n0 0\n", &map("yplus:1,uplus:2"), "t").unwrap();
        assert_eq!(p.get(Quantity::YPlus).unwrap(), &[0.0, 1.0, 2.0]);
        assert_eq!(p.get(Quantity::UPlus).unwrap(), &[0.0, 10.0, 20.0]);
        let err = parse_reference("0 0\n1 1\n1 2\n", &map("yplus:1,uplus:2"), "t").unwrap_err();
        assert!(matches!(err, CliError::NotMonotone { row: 3, .. }));
    }

    #[test]
    fn quantity_names_are_forgiving() {
        assert_eq!("U+".parse::<Quantity>().unwrap(), Quantity::UPlus);
        assert_eq!("y_plus".parse::<Quantity>().unwrap(), Quantity::YPlus);
        assert_eq!("uv_plus".parse::<Quantity>().unwrap(), Quantity::UvPlus);
    }
}
