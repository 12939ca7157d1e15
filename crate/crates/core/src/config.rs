//! Flat key/value configuration in TOML syntax.
//!
//! Scenario keys live at the top level; codebook keys under `dris.` and sweep
//! keys under `experiment.`. Either dotted keys (`dris.n_h = 32`) or tables
//! (`[dris]`) work. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::dris::DrisProfile;
use crate::error::{Error, Result};
use crate::experiments::{SweepKind, SweepSpec};
use crate::scene::{ScenarioConfig, SymbolPower, Vec3};

/// Every accepted key with its unit or value domain.
pub const KEYS: &[(&str, &str)] = &[
    ("n_tx", "count, BS antennas N"),
    ("n_users", "count, users K"),
    ("frame_len", "count, frame length L"),
    ("p0_dbm", "dBm, total transmit power"),
    ("kappa", "[0, 1], communication/sensing trade-off weight"),
    ("bandwidth_hz", "Hz, noise bandwidth"),
    ("carrier_hz", "Hz, carrier frequency"),
    ("array_spacing", "wavelengths, antenna and element spacing"),
    ("bs_position", "m, [x, y, z]"),
    ("dris_position", "m, [x, y, z]"),
    ("user_region_center", "m, [x, y, z]"),
    ("user_region_radius", "m"),
    ("target_angle_deg", "deg, target direction from broadside"),
    ("target_range_m", "m, target distance from the BS"),
    ("echo_snr_db", "dB, echo SNR of the direct path"),
    ("chi", "linear, target reflection coefficient"),
    ("symbol_power", "\"matched\" | \"unit\""),
    ("normalize_tradeoff", "bool, gain-normalize the trade-off solve"),
    ("music_grid_step_deg", "deg, MUSIC search grid step"),
    ("sensing_redraws", "count, DRIS redraws per echo frame"),
    ("master_seed", "integer"),
    ("dris.n_h", "count, horizontal elements"),
    ("dris.n_v", "count, vertical elements"),
    ("dris.bits", "bits of phase resolution"),
    ("dris.phases", "rad, list of 2^bits phases"),
    ("dris.amplitudes", "linear in [0, 1], one per phase"),
    ("dris.probs", "probabilities, one per phase, sum 1"),
    (
        "experiment.kind",
        "sumrate_vs_power | sumrate_vs_nd | music_comparison | verify_prop1 | verify_thm1",
    ),
    (
        "experiment.sweep_values",
        "dBm (power sweeps) or element count (others), strictly increasing",
    ),
    ("experiment.trials_per_point", "count (samples for verify_prop1)"),
    ("experiment.output_path", "path of the CSV"),
];

/// Sweep settings; unset fields fall back to the kind's defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentSection {
    pub kind: Option<SweepKind>,
    pub sweep_values: Option<Vec<f64>>,
    pub trials_per_point: Option<usize>,
    pub output_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub dris: DrisProfile,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            dris: DrisProfile::reference(),
            experiment: ExperimentSection::default(),
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(key, format!("expected a number, got {v}"))),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::config(key, format!("expected a non-negative integer, got {v}"))),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::config(key, format!("expected true or false, got {v}")))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::config(key, format!("expected a string, got {v}")))
}

fn as_list(key: &str, v: &Value) -> Result<Vec<f64>> {
    match v {
        Value::Array(a) => a.iter().map(|x| as_f64(key, x)).collect(),
        _ => Err(Error::config(key, format!("expected a list of numbers, got {v}"))),
    }
}

fn as_vec3(key: &str, v: &Value) -> Result<Vec3> {
    let l = as_list(key, v)?;
    l.try_into()
        .map_err(|_| Error::config(key, "expected exactly three coordinates"))
}

impl RunConfig {
    /// Sets one dotted key.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let s = &mut self.scenario;
        let d = &mut self.dris;
        let e = &mut self.experiment;
        match key {
            "n_tx" => s.n_tx = as_usize(key, v)?,
            "n_users" => s.n_users = as_usize(key, v)?,
            "frame_len" => s.frame_len = as_usize(key, v)?,
            "p0_dbm" => s.p0_dbm = as_f64(key, v)?,
            "kappa" => s.kappa = as_f64(key, v)?,
            "bandwidth_hz" => s.bandwidth_hz = as_f64(key, v)?,
            "carrier_hz" => s.carrier_hz = as_f64(key, v)?,
            "array_spacing" => s.array_spacing = as_f64(key, v)?,
            "bs_position" => s.bs_position = as_vec3(key, v)?,
            "dris_position" => s.dris_position = as_vec3(key, v)?,
            "user_region_center" => s.user_region_center = as_vec3(key, v)?,
            "user_region_radius" => s.user_region_radius = as_f64(key, v)?,
            "target_angle_deg" => s.target_angle_deg = as_f64(key, v)?,
            "target_range_m" => s.target_range_m = as_f64(key, v)?,
            "echo_snr_db" => s.echo_snr_db = as_f64(key, v)?,
            "chi" => s.chi = as_f64(key, v)?,
            "symbol_power" => {
                s.symbol_power = as_str(key, v)?
                    .parse::<SymbolPower>()
                    .map_err(|err| Error::config(key, err.to_string()))?
            }
            "normalize_tradeoff" => s.normalize_tradeoff = as_bool(key, v)?,
            "music_grid_step_deg" => s.music_grid_step_deg = as_f64(key, v)?,
            "sensing_redraws" => s.sensing_redraws = as_usize(key, v)?,
            "master_seed" => match v {
                Value::Integer(i) if *i >= 0 => s.master_seed = *i as u64,
                _ => return Err(Error::config(key, format!("expected a non-negative integer, got {v}"))),
            },
            "dris.n_h" => d.n_h = as_usize(key, v)?,
            "dris.n_v" => d.n_v = as_usize(key, v)?,
            "dris.bits" => d.bits = u32::try_from(as_usize(key, v)?).map_err(|_| Error::config(key, "too large"))?,
            "dris.phases" => d.phases = as_list(key, v)?,
            "dris.amplitudes" => d.amplitudes = as_list(key, v)?,
            "dris.probs" => d.probs = as_list(key, v)?,
            "experiment.kind" => e.kind = Some(as_str(key, v)?.parse()?),
            "experiment.sweep_values" => e.sweep_values = Some(as_list(key, v)?),
            "experiment.trials_per_point" => e.trials_per_point = Some(as_usize(key, v)?),
            "experiment.output_path" => e.output_path = Some(PathBuf::from(as_str(key, v)?)),
            _ => return Err(Error::config(key, "unknown configuration key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.dris.validate()
    }

    /// Sweep spec for `kind`, falling back to the experiment section and then
    /// to the kind's defaults.
    pub fn sweep_spec(&self, kind: Option<SweepKind>) -> Result<SweepSpec> {
        let kind = kind
            .or(self.experiment.kind)
            .ok_or_else(|| Error::config("experiment.kind", "no sweep kind given"))?;
        Ok(SweepSpec {
            kind,
            sweep_values: self
                .experiment
                .sweep_values
                .clone()
                .unwrap_or_else(|| kind.default_values()),
            trials_per_point: self
                .experiment
                .trials_per_point
                .unwrap_or_else(|| kind.default_trials()),
            config: self.scenario.clone(),
            dris: self.dris.clone(),
            output_path: self.experiment.output_path.clone(),
        })
    }
}

fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            _ => out.push((key, v.clone())),
        }
    }
}

/// Parses configuration text on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
    let mut pairs = Vec::new();
    flatten("", &table, &mut pairs);
    let mut cfg = RunConfig::default();
    for (k, v) in &pairs {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Splits `key=value`; the value is read as a TOML value, or as a bare
/// string when that fails.
pub fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::config(raw, "override must look like key=value"))?;
    let key = key.trim().to_string();
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((key, parsed))
}

/// Applies overrides in order; later ones win.
pub fn apply_overrides(cfg: &mut RunConfig, overrides: &[String]) -> Result<()> {
    for raw in overrides {
        let (k, v) = parse_override(raw)?;
        cfg.set(&k, &v)?;
    }
    Ok(())
}
