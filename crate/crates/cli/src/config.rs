//! Run configuration: `key = value` files overlaid by command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("missing command (set --cmd or `cmd` in the config file)")]
    MissingCommand,
    #[error("levels must be a non-empty ascending list of positive integers")]
    Levels,
    #[error("boundary preset `{bc}` cannot be used with `{cmd}`")]
    Incompatible { cmd: Command, bc: BcPreset },
}

pub const KEYS: [&str; 14] = [
    "cmd",
    "mesh",
    "levels",
    "k",
    "re",
    "nu",
    "lambda",
    "bc",
    "tol",
    "max_iter",
    "out",
    "seed",
    "parallel_levels",
    "samples",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Convergence,
    Robustness,
    Pressflux,
    Properties,
    Constants,
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "convergence" => Command::Convergence,
            "robustness" => Command::Robustness,
            "pressflux" => Command::Pressflux,
            "properties" => Command::Properties,
            "constants" => Command::Constants,
            _ => return Err("expected convergence, robustness, pressflux, properties or constants".into()),
        })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Convergence => "convergence",
            Command::Robustness => "robustness",
            Command::Pressflux => "pressflux",
            Command::Properties => "properties",
            Command::Constants => "constants",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeshSource {
    Cubic,
    Tet,
    /// A single mesh in the polyhedral text format; levels are ignored.
    File(PathBuf),
}

impl FromStr for MeshSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cubic" => Ok(MeshSource::Cubic),
            "tet" => Ok(MeshSource::Tet),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(MeshSource::File(PathBuf::from(p))),
                _ => Err("expected cubic, tet or file:<path>".into()),
            },
        }
    }
}

impl MeshSource {
    pub fn family(&self) -> &'static str {
        match self {
            MeshSource::Cubic => "cubic",
            MeshSource::Tet => "tet",
            MeshSource::File(_) => "file",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcPreset {
    Natural,
    Essential,
    Pressflux,
}

impl FromStr for BcPreset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "natural" => BcPreset::Natural,
            "essential" => BcPreset::Essential,
            "pressflux" => BcPreset::Pressflux,
            _ => return Err("expected natural, essential or pressflux".into()),
        })
    }
}

impl fmt::Display for BcPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BcPreset::Natural => "natural",
            BcPreset::Essential => "essential",
            BcPreset::Pressflux => "pressflux",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub mesh: MeshSource,
    pub levels: Vec<usize>,
    pub k: usize,
    pub nu: f64,
    pub lambda: f64,
    pub bc: BcPreset,
    pub tol: f64,
    pub max_iter: usize,
    pub out: PathBuf,
    pub seed: u64,
    pub parallel_levels: bool,
    /// Random samples for the property suite and the Sobolev bound.
    pub samples: usize,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text)
}

fn value<T: FromStr>(entries: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    match entries.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|e: T::Err| ConfigError::Value {
            key: key.into(),
            value: v.clone(),
            reason: e.to_string(),
        }),
    }
}

fn positive(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(ConfigError::Value {
            key: key.into(),
            value: x.to_string(),
            reason: "must be finite and positive".into(),
        })
    }
}

pub fn parse_levels(s: &str) -> Result<Vec<usize>, ConfigError> {
    let levels = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| ConfigError::Levels))
        .collect::<Result<Vec<_>, _>>()?;
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::Levels);
    }
    Ok(levels)
}

impl RunConfig {
    /// Builds a validated configuration from merged entries. `nu` takes
    /// precedence over `re` when both are present.
    pub fn from_entries(entries: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let command: Command = entries
            .get("cmd")
            .ok_or(ConfigError::MissingCommand)?
            .parse()
            .map_err(|reason| ConfigError::Value {
                key: "cmd".into(),
                value: entries["cmd"].clone(),
                reason,
            })?;
        let levels = match entries.get("levels") {
            Some(s) => parse_levels(s)?,
            None => vec![2, 4],
        };
        let default_bc = if command == Command::Pressflux {
            BcPreset::Pressflux
        } else {
            BcPreset::Natural
        };
        let bc = value(entries, "bc", default_bc)?;
        let compatible = match command {
            Command::Convergence | Command::Robustness => bc != BcPreset::Pressflux,
            Command::Pressflux => bc == BcPreset::Pressflux,
            Command::Properties | Command::Constants => true,
        };
        if !compatible {
            return Err(ConfigError::Incompatible { cmd: command, bc });
        }
        let nu = match entries.get("nu") {
            Some(_) => positive("nu", value(entries, "nu", 1.0)?)?,
            None => 1.0 / positive("re", value(entries, "re", 1.0)?)?,
        };
        let parallel_levels = match entries.get("parallel_levels").map(String::as_str) {
            None | Some("false") | Some("0") => false,
            Some("true") | Some("1") | Some("") => true,
            Some(v) => {
                return Err(ConfigError::Value {
                    key: "parallel_levels".into(),
                    value: v.into(),
                    reason: "expected true or false".into(),
                })
            }
        };
        Ok(RunConfig {
            command,
            mesh: value(entries, "mesh", MeshSource::Cubic)?,
            levels,
            k: value(entries, "k", 0)?,
            nu,
            lambda: value(entries, "lambda", 1.0)?,
            bc,
            tol: positive("tol", value(entries, "tol", 1e-9)?)?,
            max_iter: value(entries, "max_iter", 50)?,
            out: value(entries, "out", PathBuf::from("sddr-out"))?,
            seed: value(entries, "seed", 2024)?,
            parallel_levels,
            samples: value(entries, "samples", 100)?,
        })
    }
}
