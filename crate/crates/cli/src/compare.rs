//! Run-versus-reference profile comparison.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{io_err, CliError, Result};
use crate::reference::{Quantity, ReferenceProfile};

/// Reads a run's `profiles.csv` (or the directory holding it). The outer
/// coordinate is converted to wall distance so it matches reference `y`.
pub fn load_run_profile(path: &Path) -> Result<ReferenceProfile> {
    let file = if path.is_dir() { path.join("profiles.csv") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(io_err(&file))?;
    parse_run_csv(&text, &file.display().to_string())
}

pub fn parse_run_csv(text: &str, label: &str) -> Result<ReferenceProfile> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(CliError::EmptyProfile(label.to_string()));
    };
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let slots: Vec<Option<Quantity>> = names.iter().map(|n| n.parse().ok()).collect();
    let mut columns: BTreeMap<Quantity, Vec<f64>> =
        slots.iter().flatten().map(|q| (*q, Vec::new())).collect();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(CliError::ColumnCount {
                file: label.to_string(),
                line: i + 1,
                expected: names.len(),
                found: cells.len(),
            });
        }
        for (c, (cell, slot)) in cells.iter().zip(&slots).enumerate() {
            let Some(q) = slot else { continue };
            let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::ParseNumber { file: label.to_string(), line: i + 1, column: c + 1, token: cell.to_string() }
            })?;
            let v = if *q == Quantity::Y { 1.0 - v.abs() } else { v };
            columns.get_mut(q).unwrap().push(v);
        }
    }
    let mut p = ReferenceProfile { label: label.to_string(), columns };
    p.normalize_order()?;
    Ok(p)
}

/// Linear interpolation of `(x, f)` at `at`; `x` strictly increasing and
/// `at` inside its range.
pub fn interpolate(x: &[f64], f: &[f64], at: f64) -> f64 {
    let n = x.len();
    if n == 1 {
        return f[0];
    }
    let i = x.partition_point(|v| *v <= at).clamp(1, n - 1);
    let (x0, x1) = (x[i - 1], x[i]);
    let s = (at - x0) / (x1 - x0);
    f[i - 1] + s * (f[i] - f[i - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub quantity: Quantity,
    pub abscissa: Quantity,
    /// `(x, run, reference)` at the run's points inside the overlap.
    pub points: Vec<(f64, f64, f64)>,
    pub rel_l2: f64,
    pub rel_linf: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Interpolates the reference onto the run's abscissa (wall units when
/// both carry them) and reports relative L2 and L∞ differences, both
/// normalised by the reference.
pub fn compare_profiles(
    run: &ReferenceProfile,
    reference: &ReferenceProfile,
    quantity: Quantity,
    range: Option<(f64, f64)>,
) -> Result<Comparison> {
    if quantity.is_abscissa() {
        return Err(CliError::Mapping(format!("`{quantity}` is an abscissa, not a profile quantity")));
    }
    let abscissa = [Quantity::YPlus, Quantity::Y]
        .into_iter()
        .find(|q| run.get(*q).is_some() && reference.get(*q).is_some())
        .ok_or_else(|| CliError::Mapping("run and reference share no abscissa (y or yplus)".into()))?;
    let missing = |p: &ReferenceProfile| CliError::Mapping(format!("{} has no `{quantity}` column", p.label));
    let run_f = run.get(quantity).ok_or_else(|| missing(run))?;
    let ref_f = reference.get(quantity).ok_or_else(|| missing(reference))?;
    let xr = run.get(abscissa).unwrap();
    let xf = reference.get(abscissa).unwrap();
    let (run_lo, run_hi) = (xr[0], xr[xr.len() - 1]);
    let (ref_lo, ref_hi) = (xf[0], xf[xf.len() - 1]);
    let (mut lo, mut hi) = (run_lo.max(ref_lo), run_hi.min(ref_hi));
    if let Some((a, b)) = range {
        lo = lo.max(a);
        hi = hi.min(b);
    }
    let points: Vec<(f64, f64, f64)> = xr
        .iter()
        .zip(run_f)
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .map(|(x, r)| (*x, *r, interpolate(xf, ref_f, *x)))
        .collect();
    if points.is_empty() {
        return Err(CliError::NoOverlap { run_lo, run_hi, ref_lo, ref_hi });
    }
    let (mut d2, mut f2, mut dmax, mut fmax) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (_, r, f) in &points {
        let d = r - f;
        d2 += d * d;
        f2 += f * f;
        dmax = dmax.max(d.abs());
        fmax = fmax.max(f.abs());
    }
    Ok(Comparison {
        quantity,
        abscissa,
        points,
        rel_l2: ratio(d2.sqrt(), f2.sqrt()),
        rel_linf: ratio(dmax, fmax),
    })
}

impl Comparison {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let q = self.quantity;
        writeln!(out, "{},run_{q},reference_{q},difference", self.abscissa)?;
        for (x, r, f) in &self.points {
            writeln!(out, "{x:e},{r:e},{f:e},{:e}", r - f)?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(io_err(path))?;
        std::fs::write(path, buf).map_err(io_err(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::parse_reference;

    fn profile(x: &[f64], f: &[f64]) -> ReferenceProfile {
        let columns = BTreeMap::from([(Quantity::YPlus, x.to_vec()), (Quantity::UPlus, f.to_vec())]);
        ReferenceProfile { label: "p".into(), columns }
    }

    #[test]
    fn self_comparison_is_zero() {
        let p = profile(&[0.0, 1.0, 5.0, 30.0], &[0.0, 1.0, 4.5, 13.0]);
        let c = compare_profiles(&p, &p, Quantity::UPlus, None).unwrap();
        assert_eq!((c.rel_l2, c.rel_linf), (0.0, 0.0));
    }

    #[test]
    fn scaled_copy_gives_ten_percent() {
        let x = [0.0, 1.0, 5.0, 30.0, 100.0];
        let f = [0.0, 1.0, 4.5, 13.0, 17.5];
        let scaled: Vec<f64> = f.iter().map(|v| 1.1 * v).collect();
        let c = compare_profiles(&profile(&x, &scaled), &profile(&x, &f), Quantity::UPlus, None).unwrap();
        assert!((c.rel_linf - 0.1).abs() < 1e-12, "{}", c.rel_linf);
        assert!((c.rel_l2 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn piecewise_linear_reference_is_reproduced() {
        let knots = [0.0, 2.0, 10.0, 40.0];
        let line = |x: f64| {
            if x <= 10.0 {
                1.5 * x
            } else {
                15.0 + 0.2 * (x - 10.0)
            }
        };
        let reference = profile(&knots, &knots.map(line));
        let xr = [0.3, 1.7, 2.0, 6.1, 10.0, 23.4, 39.9];
        let run = profile(&xr, &xr.map(line));
        let c = compare_profiles(&run, &reference, Quantity::UPlus, None).unwrap();
        assert!(c.rel_linf < 1e-14 && c.rel_l2 < 1e-14);
        assert_eq!(c.points.len(), xr.len());
    }

    #[test]
    fn disjoint_ranges_fail() {
        let a = profile(&[0.0, 1.0], &[0.0, 1.0]);
        let b = profile(&[2.0, 3.0], &[0.0, 1.0]);
        assert!(matches!(
            compare_profiles(&a, &b, Quantity::UPlus, None),
            Err(CliError::NoOverlap { .. })
        ));
        assert!(compare_profiles(&a, &a, Quantity::UPlus, Some((5.0, 6.0))).is_err());
    }

    #[test]
    fn range_restricts_points_and_csv_has_header() {
        let p = profile(&[0.0, 5.0, 50.0, 150.0, 180.0], &[0.0, 5.0, 14.0, 18.0, 18.2]);
        let c = compare_profiles(&p, &p, Quantity::UPlus, Some((5.0, 150.0))).unwrap();
        assert_eq!(c.points.len(), 3);
        let mut out = Vec::new();
        c.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("yplus,run_uplus,reference_uplus,difference\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn run_csv_is_read_by_header() {
        let csv = "y,y_plus,U_plus,uv_plus,urms_plus,vrms_plus,wrms_plus,total_shear\n\
                   -1e0,0e0,0e0,0e0,0e0,0e0,0e0,1e0\n\
                   -5e-1,9e1,1.5e1,-5e-1,1e0,7e-1,8e-1,5e-1\n\
                   0e0,1.8e2,1.8e1,0e0,8e-1,6e-1,6e-1,0e0\n";
        let run = parse_run_csv(csv, "run").unwrap();
        assert_eq!(run.get(Quantity::Y).unwrap(), &[0.0, 0.5, 1.0]);
        let reference = parse_reference("0 0\n1 18\n", &"y:1,uplus:2".parse().unwrap(), "ref").unwrap();
        let c = compare_profiles(&run, &reference, Quantity::UPlus, None).unwrap();
        assert_eq!(c.abscissa, Quantity::Y);
        assert!((c.points[1].2 - 9.0).abs() < 1e-12);
    }
}
