//! Run configuration: strict JSON ingestion and per-mode validation.
//!
//! A config is a flat JSON object. Every key must be known and used by the
//! selected mode; anything else is rejected so a typo never turns into a
//! silently ignored setting. Errors name the offending field path.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::params::{ModelParams, DEFAULT_ALPHA1, DEFAULT_ALPHA2};
use crate::quantum::{MomentumGrid, DEFAULT_EDGE_LIMIT};
use crate::transport::{log_space, GridPolicy, SweepConfig};

/// Sweep axes default to this log-spaced range for both K and k_p.
pub const SWEEP_DEFAULT_RANGE: (f64, f64) = (0.1, 10.0);
pub const SWEEP_DEFAULT_RESOLUTION: usize = 32;
pub const SWEEP_DEFAULT_KICKS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Classical,
    Poincare,
    Lyapunov,
    Quantum,
    Sweep,
    Entanglement,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Classical => "classical",
            Mode::Poincare => "poincare",
            Mode::Lyapunov => "lyapunov",
            Mode::Quantum => "quantum",
            Mode::Sweep => "sweep",
            Mode::Entanglement => "entanglement",
        }
    }

    fn parse(s: &str) -> Option<Mode> {
        Some(match s {
            "classical" => Mode::Classical,
            "poincare" => Mode::Poincare,
            "lyapunov" => Mode::Lyapunov,
            "quantum" => Mode::Quantum,
            "sweep" => Mode::Sweep,
            "entanglement" | "entangle" => Mode::Entanglement,
            _ => return None,
        })
    }

    /// Keys accepted besides `mode`, `n_kicks`, `output_dir` and, outside
    /// sweep mode, the parameter keys.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Mode::Classical => &["seed", "record_every", "ensemble", "bins"],
            Mode::Poincare => &["seed", "trajectories"],
            Mode::Lyapunov => &["seed", "samples", "renorm_every", "Ks_values"],
            Mode::Quantum => &["record_every", "grid", "edge_limit", "snapshot"],
            Mode::Sweep => &[
                "alpha1",
                "alpha2",
                "record_every",
                "grid",
                "auto_grid",
                "edge_limit",
                "K_values",
                "kp_values",
                "K_range",
                "kp_range",
                "resolution",
            ],
            Mode::Entanglement => &["record_every", "grid", "edge_limit"],
        }
    }

    fn accepts(self, key: &str) -> bool {
        const COMMON: [&str; 3] = ["mode", "n_kicks", "output_dir"];
        const PARAMS: [&str; 6] = ["K", "k_p", "alpha1", "alpha2", "T", "hbar"];
        COMMON.contains(&key) || (self != Mode::Sweep && PARAMS.contains(&key)) || self.keys().contains(&key)
    }
}

/// Mode-specific settings.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeSettings {
    Classical {
        ensemble: usize,
        bins: usize,
        seed: u64,
        record_every: u64,
    },
    Poincare {
        trajectories: usize,
        seed: u64,
    },
    Lyapunov {
        samples: usize,
        renorm_every: u64,
        seed: u64,
        /// Kₛ values to scan at fixed k_p; `None` runs the single (K, k_p).
        ks_values: Option<Vec<f64>>,
    },
    Quantum {
        grid: MomentumGrid,
        record_every: u64,
        edge_limit: f64,
        snapshot: bool,
    },
    Sweep(SweepConfig),
    Entanglement {
        grid: MomentumGrid,
        record_every: u64,
        edge_limit: f64,
    },
}

/// Fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// Absent only in sweep mode, where (K, k_p) vary per cell.
    pub params: Option<ModelParams>,
    pub n_kicks: u64,
    pub output_dir: PathBuf,
    pub settings: ModeSettings,
}

impl RunConfig {
    /// Normalized JSON echo with every default filled in.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("mode".into(), self.mode.name().into());
        m.insert("n_kicks".into(), self.n_kicks.into());
        m.insert("output_dir".into(), self.output_dir.display().to_string().into());
        if let Some(p) = &self.params {
            if let Ok(Value::Object(pm)) = serde_json::to_value(p) {
                m.extend(pm);
            }
        }
        let grid = |g: &MomentumGrid| json!([g.n1, g.n2]);
        let extra = match &self.settings {
            ModeSettings::Classical {
                ensemble,
                bins,
                seed,
                record_every,
            } => json!({"ensemble": ensemble, "bins": bins, "seed": seed, "record_every": record_every}),
            ModeSettings::Poincare { trajectories, seed } => json!({"trajectories": trajectories, "seed": seed}),
            ModeSettings::Lyapunov {
                samples,
                renorm_every,
                seed,
                ks_values,
            } => {
                let mut v = json!({"samples": samples, "renorm_every": renorm_every, "seed": seed});
                if let Some(ks) = ks_values {
                    v["Ks_values"] = json!(ks);
                }
                v
            }
            ModeSettings::Quantum {
                grid: g,
                record_every,
                edge_limit,
                snapshot,
            } => json!({
                "grid": grid(g), "record_every": record_every, "edge_limit": edge_limit, "snapshot": snapshot
            }),
            ModeSettings::Sweep(s) => {
                let mut v = json!({
                    "K_values": s.k_values,
                    "kp_values": s.kp_values,
                    "record_every": s.record_every,
                    "edge_limit": s.edge_limit,
                    "alpha1": s.alpha1,
                    "alpha2": s.alpha2,
                });
                match s.grid {
                    GridPolicy::Fixed(g) => v["grid"] = grid(&g),
                    GridPolicy::Auto { min, max } => v["auto_grid"] = json!([min, max]),
                }
                v
            }
            ModeSettings::Entanglement {
                grid: g,
                record_every,
                edge_limit,
            } => json!({"grid": grid(g), "record_every": record_every, "edge_limit": edge_limit}),
        };
        if let Value::Object(e) = extra {
            m.extend(e);
        }
        Value::Object(m)
    }
}

fn cfg_err(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn as_f64(path: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| cfg_err(path, format!("expected a number, got {}", type_name(v))))
}

fn as_u64(path: &str, v: &Value) -> Result<u64> {
    if let Some(n) = v.as_u64() {
        return Ok(n);
    }
    match v.as_f64() {
        Some(x) if x >= 0.0 && x.fract() == 0.0 && x <= 9.007_199_254_740_992e15 => Ok(x as u64),
        Some(x) => Err(cfg_err(path, format!("expected a non-negative integer, got {x}"))),
        None => Err(cfg_err(
            path,
            format!("expected a non-negative integer, got {}", type_name(v)),
        )),
    }
}

fn as_f64_list(path: &str, v: &Value) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| cfg_err(path, format!("expected an array, got {}", type_name(v))))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| as_f64(&format!("{path}[{i}]"), x))
        .collect()
}

fn as_pair(path: &str, v: &Value) -> Result<(f64, f64)> {
    match as_f64_list(path, v)?.as_slice() {
        &[a, b] => Ok((a, b)),
        other => Err(cfg_err(path, format!("expected 2 numbers, got {}", other.len()))),
    }
}

struct Fields<'a> {
    map: &'a Map<String, Value>,
}

impl Fields<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| as_f64(key, v))
    }

    fn f64_req(&self, key: &str) -> Result<f64> {
        let v = self.get(key).ok_or_else(|| cfg_err(key, "missing required field"))?;
        as_f64(key, v)
    }

    fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        self.get(key).map(|v| as_u64(key, v)).transpose()
    }

    fn u64_req(&self, key: &str) -> Result<u64> {
        self.u64_opt(key)?.ok_or_else(|| cfg_err(key, "missing required field"))
    }

    fn positive(&self, key: &str, default: Option<u64>) -> Result<u64> {
        let n = match default {
            Some(d) => self.u64_opt(key)?.unwrap_or(d),
            None => self.u64_req(key)?,
        };
        if n == 0 {
            return Err(cfg_err(key, "must be >= 1"));
        }
        Ok(n)
    }

    fn usize_positive(&self, key: &str, default: Option<u64>) -> Result<usize> {
        let n = self.positive(key, default)?;
        usize::try_from(n).map_err(|_| cfg_err(key, "too large"))
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Bool(b)) => Ok(*b),
            Some(v) => Err(cfg_err(key, format!("expected a boolean, got {}", type_name(v)))),
        }
    }

    fn grid(&self) -> Result<MomentumGrid> {
        let v = self
            .get("grid")
            .ok_or_else(|| cfg_err("grid", "missing required field"))?;
        let (n1, n2) = match v {
            Value::Array(a) if a.len() == 2 => (as_u64("grid[0]", &a[0])?, as_u64("grid[1]", &a[1])?),
            Value::Array(a) => return Err(cfg_err("grid", format!("expected [n1, n2], got {} entries", a.len()))),
            _ => {
                let n = as_u64("grid", v)?;
                (n, n)
            }
        };
        MomentumGrid::new(n1 as usize, n2 as usize).map_err(|e| cfg_err("grid", e.to_string()))
    }

    /// `grid` for a fixed grid or `auto_grid: [min, max]`, not both.
    fn grid_policy(&self) -> Result<GridPolicy> {
        match (self.get("grid"), self.get("auto_grid")) {
            (Some(_), Some(_)) => Err(cfg_err("auto_grid", "give either `grid` or `auto_grid`, not both")),
            (None, Some(v)) => {
                let (lo, hi) = as_pair("auto_grid", v)?;
                let (lo, hi) = (as_u64("auto_grid[0]", &json!(lo))?, as_u64("auto_grid[1]", &json!(hi))?);
                for (i, n) in [lo, hi].into_iter().enumerate() {
                    if !(n >= 8 && n.is_power_of_two()) {
                        return Err(cfg_err(
                            format!("auto_grid[{i}]"),
                            format!("must be a power of two >= 8, got {n}"),
                        ));
                    }
                }
                if lo > hi {
                    return Err(cfg_err("auto_grid", format!("min {lo} exceeds max {hi}")));
                }
                Ok(GridPolicy::Auto {
                    min: lo as usize,
                    max: hi as usize,
                })
            }
            _ => self.grid().map(GridPolicy::Fixed),
        }
    }

    fn edge_limit(&self) -> Result<f64> {
        let e = self.f64_or("edge_limit", DEFAULT_EDGE_LIMIT)?;
        if !(e > 0.0 && e < 1.0) {
            return Err(cfg_err("edge_limit", format!("must lie in (0, 1), got {e}")));
        }
        Ok(e)
    }

    fn params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.f64_req("K")?,
            self.f64_req("k_p")?,
            self.f64_or("alpha1", DEFAULT_ALPHA1)?,
            self.f64_or("alpha2", DEFAULT_ALPHA2)?,
            self.f64_or("T", 1.0)?,
            self.f64_or("hbar", 1.0)?,
        )
        .map_err(|e| match e {
            Error::InvalidParam { field, reason } => cfg_err(field, reason),
            other => other,
        })
    }

    /// Axis values from an explicit list or a log-spaced range, defaulting
    /// to [`SWEEP_DEFAULT_RANGE`].
    fn axis(&self, values_key: &str, range_key: &str) -> Result<Vec<f64>> {
        match (self.get(values_key), self.get(range_key)) {
            (Some(_), Some(_)) => Err(cfg_err(
                range_key,
                format!("give either `{values_key}` or `{range_key}`, not both"),
            )),
            (Some(v), None) => {
                let vals = as_f64_list(values_key, v)?;
                if vals.is_empty() {
                    return Err(cfg_err(values_key, "must not be empty"));
                }
                for (i, &x) in vals.iter().enumerate() {
                    if !(x >= 0.0 && x.is_finite()) {
                        return Err(cfg_err(format!("{values_key}[{i}]"), format!("must be >= 0, got {x}")));
                    }
                }
                Ok(vals)
            }
            (None, range) => {
                let (lo, hi) = match range {
                    Some(v) => as_pair(range_key, v)?,
                    None => SWEEP_DEFAULT_RANGE,
                };
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(cfg_err(range_key, format!("need 0 < lo <= hi, got [{lo}, {hi}]")));
                }
                let res = self.usize_positive("resolution", Some(SWEEP_DEFAULT_RESOLUTION as u64))?;
                if res < 2 {
                    return Err(cfg_err("resolution", "need at least 2 points per axis"));
                }
                Ok(log_space(lo, hi, res))
            }
        }
    }
}

/// Validate a merged JSON object into a [`RunConfig`]. `mode` must be
/// present (the CLI supplies it from the subcommand).
pub fn parse_value(value: &Value) -> Result<RunConfig> {
    let map = value
        .as_object()
        .ok_or_else(|| cfg_err("$", format!("expected a JSON object, got {}", type_name(value))))?;
    let mode_v = map
        .get("mode")
        .ok_or_else(|| cfg_err("mode", "missing required field"))?;
    let mode_s = mode_v
        .as_str()
        .ok_or_else(|| cfg_err("mode", format!("expected a string, got {}", type_name(mode_v))))?;
    let mode = Mode::parse(mode_s).ok_or_else(|| {
        cfg_err(
            "mode",
            format!("unknown mode `{mode_s}` (classical, poincare, lyapunov, quantum, sweep, entanglement)"),
        )
    })?;

    let mut unknown: Vec<String> = map.keys().filter(|k| !mode.accepts(k)).cloned().collect();
    if !unknown.is_empty() {
        unknown.sort();
        return Err(Error::UnknownKeys(unknown));
    }

    let f = Fields { map };
    let n_kicks = f.positive("n_kicks", (mode == Mode::Sweep).then_some(SWEEP_DEFAULT_KICKS))?;
    let output_dir = match f.get("output_dir") {
        None => PathBuf::from(format!("{}_out", mode.name())),
        Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
        Some(v) => {
            return Err(cfg_err(
                "output_dir",
                format!("expected a non-empty string, got {}", type_name(v)),
            ))
        }
    };
    let default_record = (n_kicks / 500).max(1);

    let (params, settings) = match mode {
        Mode::Classical => (
            Some(f.params()?),
            ModeSettings::Classical {
                ensemble: f.usize_positive("ensemble", None)?,
                bins: {
                    let b = f.usize_positive("bins", Some(crate::classical::DEFAULT_HISTOGRAM_BINS as u64))?;
                    if b < 2 {
                        return Err(cfg_err("bins", "must be >= 2"));
                    }
                    b
                },
                seed: f.u64_opt("seed")?.unwrap_or(0),
                record_every: f.positive("record_every", Some(1))?,
            },
        ),
        Mode::Poincare => (
            Some(f.params()?),
            ModeSettings::Poincare {
                trajectories: f.usize_positive("trajectories", Some(10))?,
                seed: f.u64_opt("seed")?.unwrap_or(0),
            },
        ),
        Mode::Lyapunov => {
            let params = f.params()?;
            let ks_values = match f.get("Ks_values") {
                None => None,
                Some(v) => {
                    let vals = as_f64_list("Ks_values", v)?;
                    if vals.is_empty() {
                        return Err(cfg_err("Ks_values", "must not be empty"));
                    }
                    if params.k_p() <= 0.0 {
                        return Err(cfg_err("k_p", "must be > 0 when scanning `Ks_values`"));
                    }
                    for (i, &x) in vals.iter().enumerate() {
                        if !(x >= 0.0 && x.is_finite()) {
                            return Err(cfg_err(format!("Ks_values[{i}]"), format!("must be >= 0, got {x}")));
                        }
                    }
                    Some(vals)
                }
            };
            (
                Some(params),
                ModeSettings::Lyapunov {
                    samples: f.usize_positive("samples", Some(crate::lyapunov::DEFAULT_SAMPLES as u64))?,
                    renorm_every: f.positive("renorm_every", Some(crate::lyapunov::DEFAULT_RENORM_EVERY))?,
                    seed: f.u64_opt("seed")?.unwrap_or(0),
                    ks_values,
                },
            )
        }
        Mode::Quantum => (
            Some(f.params()?),
            ModeSettings::Quantum {
                grid: f.grid()?,
                record_every: f.positive("record_every", Some(default_record))?,
                edge_limit: f.edge_limit()?,
                snapshot: f.bool_or("snapshot", false)?,
            },
        ),
        Mode::Sweep => {
            if f.get("resolution").is_some() && f.get("K_values").is_some() && f.get("kp_values").is_some() {
                return Err(cfg_err(
                    "resolution",
                    "unused when both axes are given as explicit values",
                ));
            }
            let alpha1 = f.f64_or("alpha1", DEFAULT_ALPHA1)?;
            let alpha2 = f.f64_or("alpha2", DEFAULT_ALPHA2)?;
            // Validate the winding numbers up front rather than per cell.
            ModelParams::new(1.0, 1.0, alpha1, alpha2, 1.0, 1.0).map_err(|e| match e {
                Error::InvalidParam { field, reason } => cfg_err(field, reason),
                other => other,
            })?;
            (
                None,
                ModeSettings::Sweep(SweepConfig {
                    k_values: f.axis("K_values", "K_range")?,
                    kp_values: f.axis("kp_values", "kp_range")?,
                    n_kicks,
                    record_every: f.positive("record_every", Some(default_record))?,
                    grid: f.grid_policy()?,
                    edge_limit: f.edge_limit()?,
                    alpha1,
                    alpha2,
                }),
            )
        }
        Mode::Entanglement => (
            Some(f.params()?),
            ModeSettings::Entanglement {
                grid: f.grid()?,
                record_every: f.positive("record_every", Some(default_record))?,
                edge_limit: f.edge_limit()?,
            },
        ),
    };

    Ok(RunConfig {
        mode,
        params,
        n_kicks,
        output_dir,
        settings,
    })
}

/// Read a JSON config file into an object without validating it.
pub fn read_config_file(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(v) => Err(cfg_err("$", format!("expected a JSON object, got {}", type_name(&v)))),
        Err(e) => Err(cfg_err("$", format!("{} is not valid JSON: {e}", path.display()))),
    }
}

pub fn parse_str(text: &str) -> Result<RunConfig> {
    let v: Value = serde_json::from_str(text).map_err(|e| cfg_err("$", format!("invalid JSON: {e}")))?;
    parse_value(&v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn path_of(e: Error) -> String {
        match e {
            Error::Config { path, .. } => path,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_classical() {
        let c = parse_str(r#"{"K":0.6,"k_p":2,"mode":"classical","n_kicks":10000,"ensemble":10000,"seed":1}"#).unwrap();
        assert_eq!(c.mode, Mode::Classical);
        assert_eq!(c.params.unwrap().ks(), 1.2);
        assert_eq!(
            c.settings,
            ModeSettings::Classical {
                ensemble: 10000,
                bins: 201,
                seed: 1,
                record_every: 1
            }
        );
    }

    #[test]
    fn negative_k_names_field() {
        let e = parse_value(&json!({"K":-1,"k_p":2,"mode":"classical","n_kicks":10,"ensemble":10})).unwrap_err();
        assert_eq!(path_of(e), "K");
    }

    #[test]
    fn quantum_without_grid() {
        let e = parse_value(&json!({"K":0.6,"k_p":2,"mode":"quantum","n_kicks":10})).unwrap_err();
        assert_eq!(path_of(e), "grid");
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let e = parse_value(&json!({
            "K":0.6,"k_p":2,"mode":"quantum","n_kicks":10,"grid":64,"ensmble":3,"seed":1
        }))
        .unwrap_err();
        match e {
            Error::UnknownKeys(k) => assert_eq!(k, vec!["ensmble".to_string(), "seed".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_mismatch_names_path() {
        let e = parse_value(&json!({"K":"big","k_p":2,"mode":"poincare","n_kicks":10})).unwrap_err();
        assert_eq!(path_of(e), "K");
        let e = parse_value(&json!({"K":1,"k_p":2,"mode":"quantum","n_kicks":10,"grid":[64,"x"]})).unwrap_err();
        assert_eq!(path_of(e), "grid[1]");
        let e = parse_value(&json!({
            "mode":"sweep","n_kicks":10,"grid":64,"K_values":[1, -2],"kp_values":[1]
        }))
        .unwrap_err();
        assert_eq!(path_of(e), "K_values[1]");
        let e = parse_value(&json!({"K":1,"k_p":2,"mode":"poincare","n_kicks":2.5})).unwrap_err();
        assert_eq!(path_of(e), "n_kicks");
    }

    #[test]
    fn sweep_from_ranges() {
        let c = parse_value(&json!({
            "mode":"sweep","n_kicks":100,"grid":[64,128],"K_range":[0.1,10],"kp_range":[1,100],"resolution":4
        }))
        .unwrap();
        let ModeSettings::Sweep(s) = c.settings else { panic!() };
        assert_eq!(s.k_values.len(), 4);
        assert!((s.kp_values[3] - 100.0).abs() < 1e-9);
        assert_eq!(s.grid, GridPolicy::Fixed(MomentumGrid::new(64, 128).unwrap()));
        assert!(c.params.is_none());
    }

    #[test]
    fn sweep_defaults() {
        let c = parse_value(&json!({"mode":"sweep","grid":128})).unwrap();
        assert_eq!(c.n_kicks, SWEEP_DEFAULT_KICKS);
        let ModeSettings::Sweep(s) = c.settings else { panic!() };
        assert_eq!((s.k_values.len(), s.kp_values.len()), (32, 32));
        assert!((s.k_values[0] - 0.1).abs() < 1e-15 && (s.kp_values[31] - 10.0).abs() < 1e-12);
        let e = parse_value(&json!({
            "mode":"sweep","grid":64,"K_values":[1],"kp_values":[1],"resolution":3
        }))
        .unwrap_err();
        assert_eq!(path_of(e), "resolution");
    }

    #[test]
    fn sweep_rejects_both_forms() {
        let e = parse_value(&json!({
            "mode":"sweep","n_kicks":100,"grid":64,"K_values":[1],"K_range":[1,2],"kp_values":[1]
        }))
        .unwrap_err();
        assert_eq!(path_of(e), "K_range");
    }

    #[test]
    fn entangle_alias_and_defaults() {
        let c = parse_value(&json!({"K":7.5,"k_p":7.5,"mode":"entangle","n_kicks":500,"grid":256})).unwrap();
        assert_eq!(c.mode, Mode::Entanglement);
        assert_eq!(c.output_dir, PathBuf::from("entanglement_out"));
        assert!(matches!(c.settings, ModeSettings::Entanglement { record_every: 1, .. }));
    }

    #[test]
    fn echo_round_trips() {
        let p = json!({"K":2,"k_p":2});
        for extra in [
            json!({"mode":"lyapunov","Ks_values":[10,20]}),
            json!({"mode":"classical","ensemble":5}),
            json!({"mode":"poincare"}),
            json!({"mode":"quantum","grid":[64,32],"snapshot":true}),
            json!({"mode":"entanglement","grid":64}),
        ] {
            let mut v = p.clone();
            v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
            v["n_kicks"] = json!(50);
            let c = parse_value(&v).unwrap();
            assert_eq!(c, parse_value(&c.to_json()).unwrap());
        }
        for g in [json!({"grid": 64}), json!({"auto_grid": [64, 512]})] {
            let mut v = json!({"mode":"sweep","n_kicks":100,"K_range":[0.1,10],"kp_values":[1,2],"resolution":3});
            v.as_object_mut().unwrap().extend(g.as_object().unwrap().clone());
            let c = parse_value(&v).unwrap();
            assert_eq!(c, parse_value(&c.to_json()).unwrap());
        }
        let e = parse_value(&json!({"mode":"sweep","auto_grid":[64, 100]})).unwrap_err();
        assert_eq!(path_of(e), "auto_grid[1]");
    }
}
