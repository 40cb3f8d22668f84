//! `key = value` run configuration with dotted section prefixes.
//!
//! Precedence, lowest first: built-in defaults (or a preset), the config
//! file, command-line settings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use rles_core::{GridConfig, RunConfig, SgsConfig, SgsModel};

use crate::error::{io_err, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Re180,
    Re395,
}

impl Preset {
    pub fn config(&self) -> RunConfig {
        match self {
            Preset::Re180 => RunConfig::re180(),
            Preset::Re395 => RunConfig::re395(),
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "re180" => Ok(Preset::Re180),
            "re395" => Ok(Preset::Re395),
            other => Err(format!("unknown preset `{other}` (expected re180 or re395)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Float,
    Count,
    Bool,
    Model,
}

impl Kind {
    fn describe(&self) -> &'static str {
        match self {
            Kind::Float => "a number",
            Kind::Count => "a non-negative integer",
            Kind::Bool => "true or false",
            Kind::Model => "one of none|smagorinsky|gradient|rles",
        }
    }
}

/// Every recognised key with its value type and whether a value must be
/// supplied when no preset is used.
const KEYS: [(&str, Kind, bool); 20] = [
    ("run.dt", Kind::Float, true),
    ("run.n_steps", Kind::Count, true),
    ("run.transient_steps", Kind::Count, false),
    ("run.u_m", Kind::Float, true),
    ("run.re", Kind::Float, true),
    ("run.stabilizer_alpha", Kind::Float, false),
    ("run.seed", Kind::Count, false),
    ("run.perturbation", Kind::Float, false),
    ("run.checkpoint_every", Kind::Count, false),
    ("run.dealias", Kind::Bool, false),
    ("run.constant_flux", Kind::Bool, false),
    ("grid.lx", Kind::Float, true),
    ("grid.lz", Kind::Float, true),
    ("grid.nx", Kind::Count, true),
    ("grid.ny", Kind::Count, true),
    ("grid.nz", Kind::Count, true),
    ("grid.stretch_beta", Kind::Float, false),
    ("sgs.model", Kind::Model, false),
    ("sgs.cs", Kind::Float, false),
    ("sgs.gamma", Kind::Float, false),
];

fn key_spec(key: &str) -> Option<(&'static str, Kind, bool)> {
    KEYS.iter().copied().find(|k| k.0 == key)
}

pub fn valid_keys() -> Vec<&'static str> {
    KEYS.iter().map(|k| k.0).collect()
}

/// One `key = value` assignment; `line` is `None` for command-line input.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub line: Option<usize>,
}

impl Setting {
    pub fn flag(key: &str, value: impl ToString) -> Self {
        Self { key: key.to_string(), value: value.to_string(), line: None }
    }
}

fn check_key(key: &str, line: Option<usize>) -> Result<()> {
    if key_spec(key).is_none() {
        return Err(CliError::UnknownKey {
            key: key.to_string(),
            line,
            valid: valid_keys().join(", "),
        });
    }
    Ok(())
}

pub fn parse_config_text(text: &str) -> Result<Vec<Setting>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(CliError::Syntax { line, message: format!("expected `key = value`, got `{content}`") });
        };
        let key = key.trim();
        check_key(key, Some(line))?;
        out.push(Setting { key: key.to_string(), value: value.trim().to_string(), line: Some(line) });
    }
    Ok(out)
}

/// Parses `key=value` given on the command line.
pub fn parse_override(arg: &str) -> Result<Setting> {
    let Some((key, value)) = arg.split_once('=') else {
        return Err(CliError::Syntax { line: 0, message: format!("expected key=value, got `{arg}`") });
    };
    let key = key.trim();
    check_key(key, None)?;
    Ok(Setting::flag(key, value.trim()))
}

fn base_values(preset: Option<Preset>) -> BTreeMap<&'static str, (String, Option<usize>)> {
    let mut map = BTreeMap::new();
    let source = match preset {
        Some(p) => render_pairs(&p.config()),
        None => {
            let d = RunConfig::re180();
            let mut pairs = render_pairs(&d);
            pairs.retain(|(k, _)| !key_spec(k).map(|s| s.2).unwrap_or(false));
            pairs.iter_mut().for_each(|(k, v)| match *k {
                "run.transient_steps" | "run.checkpoint_every" => *v = "0".into(),
                _ => {}
            });
            pairs
        }
    };
    for (k, v) in source {
        map.insert(k, (v, None));
    }
    map
}

struct Values(BTreeMap<&'static str, (String, Option<usize>)>);

impl Values {
    fn raw(&self, key: &'static str) -> Result<(&str, Option<usize>)> {
        self.0.get(key).map(|(v, l)| (v.as_str(), *l)).ok_or(CliError::MissingKey(key))
    }

    fn parse<T: FromStr>(&self, key: &'static str, kind: Kind) -> Result<T> {
        let (v, line) = self.raw(key)?;
        v.parse::<T>().map_err(|_| CliError::BadValue {
            key: key.to_string(),
            line,
            expected: kind.describe(),
            value: v.to_string(),
        })
    }

    fn float(&self, key: &'static str) -> Result<f64> {
        let x: f64 = self.parse(key, Kind::Float)?;
        if x.is_nan() {
            let (v, line) = self.raw(key)?;
            return Err(CliError::BadValue { key: key.into(), line, expected: Kind::Float.describe(), value: v.into() });
        }
        Ok(x)
    }

    fn count(&self, key: &'static str) -> Result<u64> {
        self.parse(key, Kind::Count)
    }

    fn size(&self, key: &'static str) -> Result<usize> {
        self.parse(key, Kind::Count)
    }

    fn flag(&self, key: &'static str) -> Result<bool> {
        self.parse(key, Kind::Bool)
    }

    fn model(&self, key: &'static str) -> Result<SgsModel> {
        let (v, line) = self.raw(key)?;
        v.parse().map_err(|_| CliError::BadValue {
            key: key.to_string(),
            line,
            expected: Kind::Model.describe(),
            value: v.to_string(),
        })
    }
}

/// Builds a validated configuration from a preset and ordered settings
/// (later settings win).
pub fn resolve(preset: Option<Preset>, settings: &[Setting]) -> Result<RunConfig> {
    let mut map = base_values(preset);
    for s in settings {
        let (key, _, _) = key_spec(&s.key).ok_or_else(|| CliError::UnknownKey {
            key: s.key.clone(),
            line: s.line,
            valid: valid_keys().join(", "),
        })?;
        map.insert(key, (s.value.clone(), s.line));
    }
    let v = Values(map);
    let cfg = RunConfig {
        grid: GridConfig {
            lx: v.float("grid.lx")?,
            lz: v.float("grid.lz")?,
            nx: v.size("grid.nx")?,
            ny: v.size("grid.ny")?,
            nz: v.size("grid.nz")?,
            stretch_beta: v.float("grid.stretch_beta")?,
        },
        dt: v.float("run.dt")?,
        n_steps: v.count("run.n_steps")?,
        transient_steps: v.count("run.transient_steps")?,
        u_m: v.float("run.u_m")?,
        re: v.float("run.re")?,
        stabilizer_alpha: v.float("run.stabilizer_alpha")?,
        seed: v.count("run.seed")?,
        perturbation: v.float("run.perturbation")?,
        sgs: SgsConfig {
            model: v.model("sgs.model")?,
            cs: v.float("sgs.cs")?,
            gamma: v.float("sgs.gamma")?,
        },
        checkpoint_every: v.count("run.checkpoint_every")?,
        dealias: v.flag("run.dealias")?,
        constant_flux: v.flag("run.constant_flux")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads an optional file, then applies command-line settings.
pub fn load(path: Option<&Path>, preset: Option<Preset>, overrides: &[Setting]) -> Result<RunConfig> {
    let mut settings = match path {
        Some(p) => parse_config_text(&std::fs::read_to_string(p).map_err(io_err(p))?)?,
        None => Vec::new(),
    };
    settings.extend_from_slice(overrides);
    resolve(preset, &settings)
}

fn render_pairs(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    vec![
        ("run.dt", cfg.dt.to_string()),
        ("run.n_steps", cfg.n_steps.to_string()),
        ("run.transient_steps", cfg.transient_steps.to_string()),
        ("run.u_m", cfg.u_m.to_string()),
        ("run.re", cfg.re.to_string()),
        ("run.stabilizer_alpha", cfg.stabilizer_alpha.to_string()),
        ("run.seed", cfg.seed.to_string()),
        ("run.perturbation", cfg.perturbation.to_string()),
        ("run.checkpoint_every", cfg.checkpoint_every.to_string()),
        ("run.dealias", cfg.dealias.to_string()),
        ("run.constant_flux", cfg.constant_flux.to_string()),
        ("grid.lx", cfg.grid.lx.to_string()),
        ("grid.lz", cfg.grid.lz.to_string()),
        ("grid.nx", cfg.grid.nx.to_string()),
        ("grid.ny", cfg.grid.ny.to_string()),
        ("grid.nz", cfg.grid.nz.to_string()),
        ("grid.stretch_beta", cfg.grid.stretch_beta.to_string()),
        ("sgs.model", cfg.sgs.model.to_string()),
        ("sgs.cs", cfg.sgs.cs.to_string()),
        ("sgs.gamma", cfg.sgs.gamma.to_string()),
    ]
}

/// Every key with its resolved value, as `(key, value)` pairs.
pub fn resolved_pairs(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    render_pairs(cfg)
}

/// Complete resolved configuration; parsing it back yields `cfg` exactly.
pub fn render(cfg: &RunConfig) -> String {
    let mut s = String::from("# resolved configuration\n");
    for (k, v) in render_pairs(cfg) {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn digest(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const MINIMAL: &str = "\
# small channel
run.dt = 0.001
run.n_steps = 20
run.u_m = 1.0
run.re = 100
grid.lx = 6.283185307179586
grid.lz = 3.141592653589793
grid.nx = 16
grid.ny = 17
grid.nz = 16
sgs.model = gradient   # trailing comment
";

    #[test]
    fn minimal_file_resolves_with_defaults() {
        let cfg = resolve(None, &parse_config_text(MINIMAL).unwrap()).unwrap();
        assert_eq!(cfg.sgs.model, SgsModel::Gradient);
        assert_eq!(cfg.grid.ny, 17);
        assert_eq!(cfg.transient_steps, 0);
        assert_eq!(cfg.sgs.gamma, 6.0);
        assert!(cfg.dealias && cfg.constant_flux);
    }

    #[test]
    fn flag_beats_file() {
        let mut s = parse_config_text(MINIMAL).unwrap();
        s.push(Setting::flag("sgs.model", "rles"));
        assert_eq!(resolve(None, &s).unwrap().sgs.model, SgsModel::Rles);
    }

    #[test]
    fn missing_dt_is_named() {
        let text = MINIMAL.replace("run.dt = 0.001\n", "");
        match resolve(None, &parse_config_text(&text).unwrap()) {
            Err(CliError::MissingKey(k)) => assert_eq!(k, "run.dt"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let err = parse_config_text("run.dtt = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("run.dtt") && msg.contains("run.dt,") && msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn type_mismatch_reports_line() {
        let text = MINIMAL.replace("grid.nx = 16", "grid.nx = sixteen");
        match resolve(None, &parse_config_text(&text).unwrap()) {
            Err(CliError::BadValue { key, line, .. }) => {
                assert_eq!(key, "grid.nx");
                assert_eq!(line, Some(8));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn re180_preset_matches_tables() {
        let cfg = resolve(Some(Preset::Re180), &[]).unwrap();
        assert_eq!(cfg.grid.lx, 4.0 * PI);
        assert_eq!(cfg.grid.lz, 4.0 * PI / 3.0);
        assert_eq!((cfg.grid.nx, cfg.grid.ny, cfg.grid.nz), (36, 37, 36));
        assert_eq!(cfg.u_m, 15.63);
        assert_eq!(cfg.dt, 0.0002);
        let cfg = resolve(Some(Preset::Re395), &[]).unwrap();
        assert_eq!((cfg.grid.nx, cfg.grid.ny, cfg.grid.nz), (72, 55, 54));
        assert_eq!((cfg.u_m, cfg.dt), (17.54, 0.00025));
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = resolve(Some(Preset::Re180), &[]).unwrap();
        cfg.sgs.model = SgsModel::Smagorinsky;
        cfg.re = f64::INFINITY;
        let text = render(&cfg);
        assert_eq!(resolve(None, &parse_config_text(&text).unwrap()).unwrap(), cfg);
        assert_eq!(digest(&text), digest(&render(&cfg)));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let text = format!("{MINIMAL}run.stabilizer_alpha = 0.2\n");
        assert!(matches!(
            resolve(None, &parse_config_text(&text).unwrap()),
            Err(CliError::Core(rles_core::Error::Config { field: "run.stabilizer_alpha", .. }))
        ));
        assert!(parse_config_text("just words\n").is_err());
        assert!(parse_override("sgs.model=rles").is_ok());
        assert!(parse_override("bogus=1").is_err());
    }
}
