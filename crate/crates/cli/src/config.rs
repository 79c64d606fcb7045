//! Experiment configuration: TOML layering, overrides and key checking.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};
use uavnoma::baselines::GridSpec;
use uavnoma::{PowerSupply, SystemParams};

use crate::experiments::Experiment;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed TOML: {0}")]
    Parse(String),
    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("override `{0}` is not of the form key=value")]
    BadOverride(String),
    #[error("unknown experiment `{0}`; expected one of {1}")]
    UnknownExperiment(String, String),
    #[error("no experiment given (set `experiment` or pass --experiment)")]
    NoExperiment,
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn default_seeds() -> u64 {
    10
}

fn default_heatmap() -> usize {
    21
}

fn default_es_grid() -> GridSpec {
    GridSpec {
        alpha: 21,
        power: 21,
        tau: 11,
        xy: 11,
    }
}

/// Fully resolved run description; its TOML form is hashed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: String,
    /// Number of drops, seeds `first_seed..first_seed + seeds`.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub first_seed: u64,
    /// Axis values; the experiment's own list when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Schemes to run; the experiment's own list when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<String>>,
    /// Side of the position grid of the heatmap experiment.
    #[serde(default = "default_heatmap")]
    pub heatmap_points: usize,
    #[serde(default = "default_es_grid")]
    pub es_grid: GridSpec,
    #[serde(default)]
    pub params: SystemParams,
}

impl Config {
    pub fn seed_list(&self) -> Vec<u64> {
        (self.first_seed..self.first_seed + self.seeds).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Hex SHA-256 of [`Config::to_toml`].
    pub fn sha256(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        finish(table)
    }
}

/// Command-line layer on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Layers {
    pub experiment: Option<String>,
    pub seeds: Option<u64>,
    /// `key=value` pairs; keys are dotted paths, bare parameter names go under `params`.
    pub overrides: Vec<String>,
}

/// Experiment preset, then the file, then the flags.
pub fn load(path: Option<&Path>, layers: &Layers) -> Result<Config, ConfigError> {
    let file: Table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.display().to_string(),
                source,
            })?;
            text.parse()
                .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?
        }
        None => Table::new(),
    };
    let mut user = file;
    if let Some(name) = &layers.experiment {
        user.insert("experiment".into(), Value::String(name.clone()));
    }
    if let Some(k) = layers.seeds {
        let k = i64::try_from(k).map_err(|_| ConfigError::Invalid(format!("seed count {k} is too large")))?;
        user.insert("seeds".into(), Value::Integer(k));
    }
    for o in &layers.overrides {
        apply_override(&mut user, o)?;
    }
    let name = match user.get("experiment") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => {
            return Err(ConfigError::Invalid(format!(
                "`experiment` must be a string, got {other}"
            )))
        }
        None => return Err(ConfigError::NoExperiment),
    };
    let experiment = Experiment::from_name(&name)?;
    let mut table = defaults();
    merge(&mut table, experiment.preset());
    merge(&mut table, user);
    finish(table)
}

/// The default configuration as a table, so partial nested tables such as
/// `params.area` keep their other fields.
fn defaults() -> Table {
    let cfg = Config {
        experiment: String::new(),
        seeds: default_seeds(),
        first_seed: 0,
        values: None,
        schemes: None,
        heatmap_points: default_heatmap(),
        es_grid: default_es_grid(),
        params: SystemParams::default(),
    };
    Table::try_from(&cfg).expect("config serializes to a table")
}

fn finish(table: Table) -> Result<Config, ConfigError> {
    let unknown = unknown_keys(&table);
    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    let cfg: Config = table
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    Experiment::from_name(&cfg.experiment)?;
    cfg.params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if cfg.seeds == 0 {
        return Err(ConfigError::Invalid("at least one seed is needed".into()));
    }
    Ok(cfg)
}

/// Recursive merge; values of `top` win.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn apply_override(table: &mut Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::BadOverride(spec.to_string()));
    }
    let mut path: Vec<&str> = key.split('.').collect();
    if !schema().contains_key(path[0]) {
        path.insert(0, "params");
    }
    let value = parse_value(raw.trim());
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = table;
    for p in parents {
        let entry = node.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = match entry {
            Value::Table(t) => t,
            _ => return Err(ConfigError::BadOverride(format!("{spec}: `{p}` is not a table"))),
        };
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Every key a configuration may carry: a configuration with all optional
/// fields set, plus the fields of each power-supply variant.
fn schema() -> Table {
    let params = SystemParams {
        p_antenna: Some(1.0),
        uav_power_cap: Some(1.0),
        pair_power_cap: Some(1.0),
        supply: PowerSupply::Battery { p_t: 1.0 },
        ..SystemParams::default()
    };
    let full = Config {
        experiment: String::new(),
        seeds: 1,
        first_seed: 0,
        values: Some(Vec::new()),
        schemes: Some(Vec::new()),
        heatmap_points: 1,
        es_grid: default_es_grid(),
        params,
    };
    Table::try_from(&full).expect("config serializes to a table")
}

/// Every dotted key of `table` that no configuration struct declares.
pub fn unknown_keys(table: &Table) -> Vec<String> {
    let mut out = Vec::new();
    walk(table, &schema(), "", &mut out);
    out
}

fn walk(table: &Table, known: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match (known.get(k), v) {
            (None, _) => out.push(path),
            (Some(Value::Table(kt)), Value::Table(t)) => walk(t, kt, &path, out),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Table {
        text.parse().unwrap()
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let t = table("experiment = 'fig4_beacon_power'\nbogus = 1\n[params]\npairs = 2\nbeam = 3\n[params.rotor]\np0 = 1\nspin = 2\n");
        assert_eq!(unknown_keys(&t), vec!["bogus", "params.beam", "params.rotor.spin"]);
        match finish(t) {
            Err(ConfigError::UnknownKeys(k)) => assert_eq!(k.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn optional_parameters_are_known() {
        let t = table("experiment = 'fig4_beacon_power'\n[params]\np_antenna = 5.0\nuav_power_cap = 3.0\n[params.supply]\nkind = 'battery'\np_t = 2.0\n");
        assert!(unknown_keys(&t).is_empty());
        let cfg = finish(t).unwrap();
        assert_eq!(cfg.params.p_antenna, Some(5.0));
    }

    #[test]
    fn overrides_reach_nested_parameters() {
        let layers = Layers {
            experiment: Some("fig6_user_power".into()),
            seeds: Some(3),
            overrides: vec![
                "p_beacon=20".into(),
                "rotor.p0=0.5".into(),
                "params.steering=elevation".into(),
                "first_seed=7".into(),
                "area.x_max=40".into(),
            ],
        };
        let cfg = load(None, &layers).unwrap();
        assert_eq!(cfg.params.p_beacon, 20.0);
        assert_eq!(cfg.params.rotor.p0, 0.5);
        assert_eq!(cfg.params.steering, uavnoma::Steering::Elevation);
        assert_eq!(cfg.seed_list(), vec![7, 8, 9]);
        assert_eq!(cfg.params.area.x_max, 40.0);
        assert_eq!(cfg.params.area.x_min, uavnoma::Area::default().x_min);
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        let layers = |o: &str| Layers {
            experiment: Some("fig4_beacon_power".into()),
            seeds: None,
            overrides: vec![o.into()],
        };
        assert!(matches!(
            load(None, &layers("novalue")),
            Err(ConfigError::BadOverride(_))
        ));
        assert!(matches!(
            load(None, &layers("typo=1")),
            Err(ConfigError::UnknownKeys(_))
        ));
        assert!(matches!(load(None, &layers("pairs=0")), Err(ConfigError::Invalid(_))));
        let none = Layers::default();
        assert!(matches!(load(None, &none), Err(ConfigError::NoExperiment)));
        let wrong = Layers {
            experiment: Some("fig99".into()),
            ..Layers::default()
        };
        assert!(matches!(load(None, &wrong), Err(ConfigError::UnknownExperiment(..))));
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = load(
            None,
            &Layers {
                experiment: Some("fig5_uav_power".into()),
                ..Layers::default()
            },
        )
        .unwrap();
        let back = Config::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.sha256(), cfg.sha256());
        assert_eq!(cfg.sha256().len(), 64);
    }
}
