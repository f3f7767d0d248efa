//! Flat `key = value` run descriptors validated against a per-command schema.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    UnknownCommand(String),
    UnknownKey { command: &'static str, key: String, allowed: Vec<&'static str> },
    BadValue { key: String, value: String, expected: &'static str },
    Syntax { line: usize, text: String },
    MissingValue(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownCommand(c) => write!(f, "unknown command `{c}`; expected one of {}", Command::ALL.iter().map(|c| c.name()).collect::<Vec<_>>().join(", ")),
            ConfigError::UnknownKey { command, key, allowed } => write!(f, "unknown key `{key}` for `{command}`; allowed keys: {}", allowed.join(", ")),
            ConfigError::BadValue { key, value, expected } => write!(f, "key `{key}`: cannot read `{value}` as {expected}"),
            ConfigError::Syntax { line, text } => write!(f, "line {line}: expected `key = value`, got `{text}`"),
            ConfigError::MissingValue(k) => write!(f, "flag `--{k}` needs a value"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    WeakType,
    Sparsity,
    DominationY,
    DominationZ,
    ApSweep,
    DoobSweep,
    SparseWeighted,
    Extrapolate,
    Riesz,
    DimSweep,
}

/// `(key, default, description)`.
type Schema = &'static [(&'static str, &'static str, &'static str)];

const COMMON: Schema = &[("seed", "1", "master seed"), ("out", "", "output directory (default: out/<command>)")];

impl Command {
    pub const ALL: [Command; 10] = [
        Command::WeakType,
        Command::Sparsity,
        Command::DominationY,
        Command::DominationZ,
        Command::ApSweep,
        Command::DoobSweep,
        Command::SparseWeighted,
        Command::Extrapolate,
        Command::Riesz,
        Command::DimSweep,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::WeakType => "weakType",
            Command::Sparsity => "sparsity",
            Command::DominationY => "dominationY",
            Command::DominationZ => "dominationZ",
            Command::ApSweep => "apSweep",
            Command::DoobSweep => "doobSweep",
            Command::SparseWeighted => "sparseWeighted",
            Command::Extrapolate => "extrapolate",
            Command::Riesz => "riesz",
            Command::DimSweep => "dimSweep",
        }
    }

    pub fn schema(&self) -> Schema {
        match self {
            Command::WeakType => &[
                ("engine", "mc", "mc"),
                ("paths", "100000", "paths per batch"),
                ("t_max", "1", "horizon"),
                ("dt", "0.01", "step"),
                ("a", "0", "drift parameter of A"),
                ("jumps", "false", "multiplicative jumps"),
                ("jump_rate", "3", "jump intensity"),
                ("lambdas", "0.5,1,2,4,8", "levels"),
            ],
            Command::Sparsity => &[
                ("engine", "tree", "tree | mc"),
                ("tree_file", "", "tree description (level parent probability per line)"),
                ("trials", "1000", "random trees (tree engine without tree_file)"),
                ("max_depth", "6", "maximal random tree depth"),
                ("paths", "10000", "paths (mc engine)"),
                ("t_max", "1", "horizon"),
                ("dt", "0.01", "step"),
                ("jump_rate", "3", "jump intensity"),
                ("bins", "8", "cells per axis of the binned check"),
            ],
            Command::DominationY => &[
                ("engine", "tree", "tree | mc"),
                ("trials", "1000", "random trees"),
                ("max_depth", "6", "maximal random tree depth"),
                ("paths", "10000", "paths (mc engine)"),
                ("t_max", "1", "horizon"),
                ("dt", "0.01", "step"),
                ("jump_rate", "3", "jump intensity"),
                ("constant", "8", "domination constant"),
            ],
            Command::DominationZ => &[
                ("engine", "mc", "mc"),
                ("paths", "10000", "paths"),
                ("t_max", "1", "horizon"),
                ("dt", "0.01", "step"),
                ("a", "0", "drift parameter of A"),
                ("jumps", "false", "multiplicative jumps"),
                ("jump_rate", "3", "jump intensity"),
                ("constant", "", "domination constant (default 4, or 8 with jumps)"),
                ("telescoping_tol", "1e-10", "relative residual of the level sum"),
            ],
            Command::ApSweep => &[("engine", "tree", "tree"), ("trials", "200", "random trees"), ("max_depth", "4", "maximal depth"), ("p", "1.5,2,3", "exponents")],
            Command::DoobSweep => &[("engine", "tree", "tree"), ("trials", "1000", "random triples"), ("max_depth", "6", "maximal depth"), ("p", "1.5,2,3", "exponents")],
            Command::SparseWeighted => &[("engine", "tree", "tree"), ("trials", "1000", "random triples"), ("max_depth", "6", "maximal depth")],
            Command::Extrapolate => &[("r", "2", "known exponent"), ("p", "4", "target exponent"), ("b", "1", "characteristic bound"), ("base", "sparse", "sparse (N_r(A) = 8A) or linear:C (N_r(A) = C A)")],
            Command::Riesz => &[
                ("geometry", "torus", "torus | gauss | bessel"),
                ("n", "1", "dimension"),
                ("alpha", "1", "Bessel parameter"),
                ("f", "cos", "test function modes, e.g. cos+0.5*sin2 or he2"),
                ("y0", "8", "starting height"),
                ("dt", "0.001", "fine step"),
                ("t_max", "1e12", "censoring time"),
                ("paths", "1000000", "paths"),
                ("bins", "64", "bins of the first coordinate"),
                ("layered", "true", "layered stepping"),
                ("bridge", "true", "bridge hitting correction"),
                ("doubling", "false", "also run at twice the height"),
                ("tol", "", "relative L2 tolerance (default 0.1 torus, 0.15 gauss)"),
                ("p", "2", "exponent of the reported norm"),
            ],
            Command::DimSweep => &[
                ("family", "torus", "torus (cos x1) | gauss (He_k(x1))"),
                ("k", "", "mode (default 1 torus, 2 gauss)"),
                ("dims", "1,2,4,8", "dimensions"),
                ("p", "2", "exponent"),
                ("y0", "8", "starting height"),
                ("dt", "0.001", "fine step"),
                ("t_max", "1e12", "censoring time"),
                ("paths", "100000", "paths per dimension"),
                ("bins", "64", "bins of the first coordinate"),
            ],
        }
    }
}

impl FromStr for Command {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL.iter().find(|c| c.name().eq_ignore_ascii_case(s)).copied().ok_or_else(|| ConfigError::UnknownCommand(s.to_string()))
    }
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}

/// A validated run descriptor with every key resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Builds from config-file text (optional) overlaid with `--key value` flags.
    pub fn new(command: Command, file_text: Option<&str>, flags: &[String]) -> Result<Self, ConfigError> {
        let mut given = BTreeMap::new();
        if let Some(text) = file_text {
            for (i, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
                given.insert(normalize(k), v.trim().to_string());
            }
        }
        let mut it = flags.iter();
        while let Some(flag) = it.next() {
            if let Some((k, v)) = flag.split_once('=') {
                given.insert(normalize(k), v.to_string());
            } else {
                let v = it.next().ok_or_else(|| ConfigError::MissingValue(normalize(flag)))?;
                given.insert(normalize(flag), v.clone());
            }
        }
        let schema: Vec<_> = command.schema().iter().chain(COMMON).collect();
        let mut values = BTreeMap::new();
        for (k, v) in given {
            if !schema.iter().any(|(s, _, _)| *s == k) {
                return Err(ConfigError::UnknownKey { command: command.name(), key: k, allowed: schema.iter().map(|(s, _, _)| *s).collect() });
            }
            values.insert(k, v);
        }
        for (k, d, _) in &schema {
            values.entry(k.to_string()).or_insert_with(|| d.to_string());
        }
        if values["out"].is_empty() {
            values.insert("out".into(), format!("out/{}", command.name()));
        }
        Ok(RunConfig { command, values })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key `{key}` is not in the schema of `{}`", self.command.name()))
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.raw(key).is_empty()
    }

    fn typed<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<T, ConfigError> {
        let v = self.raw(key);
        v.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: v.into(), expected })
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.typed(key, "a number")
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.raw(key);
        // accept 1e6-style counts
        v.parse::<usize>().or_else(|_| match v.parse::<f64>() {
            Ok(f) if f >= 0.0 && f.fract() == 0.0 && f < 1e18 => Ok(f as usize),
            _ => Err(ConfigError::BadValue { key: key.into(), value: v.into(), expected: "a nonnegative integer" }),
        })
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.typed(key, "an unsigned integer")
    }

    pub fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self.raw(key).to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            v => Err(ConfigError::BadValue { key: key.into(), value: v.into(), expected: "true or false" }),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.raw(key)
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: self.raw(key).into(), expected: "a comma-separated list of numbers" }))
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        self.raw(key)
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: self.raw(key).into(), expected: "a comma-separated list of integers" }))
            .collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out"))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Usage text listing every key of the command.
    pub fn usage(command: Command) -> String {
        let mut s = format!("sparsedom run {} [--config FILE] [--key value]...\n", command.name());
        for (k, d, h) in command.schema().iter().chain(COMMON) {
            s.push_str(&format!("  --{k:<16} {h} [default: {d}]\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::new(Command::WeakType, Some("paths = 10\n# comment\njumps=true"), &flags(&["--seed", "7", "--t-max=2"])).unwrap();
        assert_eq!(c.usize("paths").unwrap(), 10);
        assert!(c.bool("jumps").unwrap());
        assert_eq!(c.u64("seed").unwrap(), 7);
        assert_eq!(c.f64("t_max").unwrap(), 2.0);
        assert_eq!(c.f64_list("lambdas").unwrap(), vec![0.5, 1.0, 2.0, 4.0, 8.0]);
        assert_eq!(c.raw("out"), "out/weakType");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::new(Command::Riesz, None, &flags(&["--pathz", "3"])).unwrap_err();
        assert!(e.to_string().contains("`pathz`"));
        assert!(matches!(RunConfig::new(Command::Riesz, Some("nonsense"), &[]), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(RunConfig::new(Command::Riesz, None, &flags(&["--paths"])), Err(ConfigError::MissingValue(_))));
    }

    #[test]
    fn scientific_counts() {
        let c = RunConfig::new(Command::Riesz, None, &flags(&["--paths", "1e6"])).unwrap();
        assert_eq!(c.usize("paths").unwrap(), 1_000_000);
        let c = RunConfig::new(Command::Riesz, None, &flags(&["--paths", "1.5"])).unwrap();
        assert!(c.usize("paths").is_err());
    }

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("bogus".parse::<Command>().is_err());
    }
}
