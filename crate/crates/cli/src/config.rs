//! Experiment configuration: one JSON file plus `--set key=value` overrides.
//!
//! All times (`h`, `t_end`, `delta_t`, update times, ...) are in units of
//! `1/delta`, i.e. after rescaling to `delta = 1`.

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use nimfa::dynamics::{steady_state_report, default_tolerance, SteadyMode};
use nimfa::graphs::erdos_renyi;
use nimfa::temporal::{constant_interval_network, TemporalNetwork};
use nimfa::transition::{combined_upper_bound_sequence, lower_bound_decay, CombinedVariant};
use nimfa::{Graph, GraphModel, GraphSpec, RngSeed};

use crate::CliError;

/// Independent random streams derived from the master seed.
pub mod stream {
    pub const SEQUENCE: u64 = 1;
    pub const MARKOV: u64 = 2;
    pub const ENSEMBLE: u64 = 3;
    pub const MIXED_STARTS: u64 = 4;
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Subcommand this file is meant for; checked when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// A sequence of graphs for a temporal network.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSpec {
    List { graphs: Vec<GraphSpec> },
    /// `count` ER graphs with `p ~ Unif[p_min, p_max]`, drawn from the master seed.
    ErRange { n: usize, p_min: f64, p_max: f64, count: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(default = "default_models")]
    pub models: Vec<GraphModel>,
    #[serde(default = "default_n")]
    pub n: usize,
    pub count: usize,
}

fn default_models() -> Vec<GraphModel> {
    vec![GraphModel::Er]
}

fn default_n() -> usize {
    50
}

/// Inter-update time: a number, or one of the analytic rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaT {
    Fixed(f64),
    Rule(DeltaRule),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// Combined upper bound of the sequence (growth branch above threshold).
    THat,
    /// Largest decay lower bound over the sequence.
    LD,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Effective rate `beta/delta`; excludes `beta` and `delta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default = "d_r")]
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_star: Option<f64>,
    #[serde(default = "d_h")]
    pub h: f64,
    #[serde(default = "d_t_max")]
    pub t_max: f64,
    #[serde(default = "d_t_star_max")]
    pub t_star_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<DeltaT>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_times: Option<Vec<f64>>,
    /// Uniform initial state `y0 u`.
    #[serde(default = "d_y0")]
    pub y0: f64,
    #[serde(default = "d_runs")]
    pub runs: usize,
    #[serde(default = "d_grid_step")]
    pub grid_step: f64,
    /// Write every node's probability into trajectory CSVs.
    #[serde(default = "d_true")]
    pub states: bool,
    #[serde(default = "d_true")]
    pub cross_check: bool,
    /// Random mixed starts per sweep decile; 0 disables the spot-check.
    #[serde(default)]
    pub mixed_starts: usize,
    #[serde(default = "d_bin_width")]
    pub bin_width: f64,
    /// `tau` values of `verify` in units of `1/(N-1)`.
    #[serde(default = "d_tau_multipliers")]
    pub tau_multipliers: Vec<f64>,
    /// Horizon of the projection checks in `verify`.
    #[serde(default = "d_projection_t_end")]
    pub projection_t_end: f64,
}

fn d_r() -> f64 {
    1e-4
}
fn d_h() -> f64 {
    0.01
}
fn d_t_max() -> f64 {
    1e4
}
fn d_t_star_max() -> f64 {
    1e5
}
fn d_y0() -> f64 {
    1.0
}
fn d_runs() -> usize {
    200
}
fn d_grid_step() -> f64 {
    0.1
}
fn d_true() -> bool {
    true
}
fn d_bin_width() -> f64 {
    0.05
}
fn d_tau_multipliers() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 5.0]
}
fn d_projection_t_end() -> f64 {
    200.0
}

impl Default for Params {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("all fields have defaults")
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn positive(field: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(field, format!("must be positive and finite, got {x}")))
    }
}

impl Params {
    /// `(tau, delta)`: the rescaled rate and the time scale.
    pub fn rates(&self) -> Result<(f64, f64), CliError> {
        match (self.tau, self.beta, self.delta) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                Err(invalid("params.tau", "give either tau or beta/delta, not both"))
            }
            (Some(tau), None, None) => Ok((positive("params.tau", tau)?, 1.0)),
            (None, beta, delta) => {
                let beta = beta.unwrap_or(0.1);
                let delta = positive("params.delta", delta.unwrap_or(1.0))?;
                if !(beta >= 0.0 && beta.is_finite()) {
                    return Err(invalid("params.beta", format!("must be non-negative, got {beta}")));
                }
                Ok((beta / delta, delta))
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.rates()?;
        positive("params.h", self.h)?;
        positive("params.t_max", self.t_max)?;
        positive("params.t_star_max", self.t_star_max)?;
        positive("params.grid_step", self.grid_step)?;
        positive("params.bin_width", self.bin_width)?;
        positive("params.projection_t_end", self.projection_t_end)?;
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(invalid("params.r", format!("must lie in (0, 1), got {}", self.r)));
        }
        if let Some(rs) = self.r_star {
            positive("params.r_star", rs)?;
        }
        if let Some(t) = self.t_end {
            positive("params.t_end", t)?;
        }
        if let Some(DeltaT::Fixed(dt)) = self.delta_t {
            positive("params.delta_t", dt)?;
        }
        if !(0.0..=1.0).contains(&self.y0) {
            return Err(invalid("params.y0", format!("must lie in [0, 1], got {}", self.y0)));
        }
        if self.runs == 0 {
            return Err(invalid("params.runs", "must be at least 1"));
        }
        if let Some(m) = self.tau_multipliers.iter().find(|m| !(**m > 0.0)) {
            return Err(invalid("params.tau_multipliers", format!("must be positive, got {m}")));
        }
        Ok(())
    }
}

/// Parses the config text, applies overrides and deserializes with
/// field-path diagnostics.
pub fn load(text: Option<(&str, &str)>, sets: &[String]) -> Result<ExperimentConfig, CliError> {
    let Some((name, text)) = text else {
        let mut value = Value::Object(Default::default());
        apply_overrides(&mut value, sets)?;
        return from_value(value);
    };
    if sets.is_empty() {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let inner = e.inner();
            CliError::Config(format!("{name}:{}:{}: {}: {}", inner.line(), inner.column(), e.path(), inner))
        })?;
        de.end().map_err(|e| CliError::Config(format!("{name}: {e}")))?;
        return Ok(cfg);
    }
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
    apply_overrides(&mut value, sets)?;
    from_value(value)
}

fn from_value(value: Value) -> Result<ExperimentConfig, CliError> {
    serde_path_to_error::deserialize(value)
        .map_err(|e| CliError::Config(format!("{}: {}", e.path(), e.inner())))
}

/// Applies `a.b.c=value` overrides. The value is parsed as JSON and taken as
/// a string when that fails.
pub fn apply_overrides(root: &mut Value, sets: &[String]) -> Result<(), CliError> {
    for set in sets {
        let (key, raw) = set
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {set:?}")))?;
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(CliError::Usage(format!("--set: malformed key {key:?}")));
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut *root;
        let parts: Vec<&str> = key.split('.').collect();
        for (depth, part) in parts.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| {
                CliError::Usage(format!("--set {key}: {} is not an object", parts[..depth].join(".")))
            })?;
            if depth + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            node = obj
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

impl SequenceSpec {
    pub fn build(&self, master: u64) -> Result<Vec<Graph>, CliError> {
        let graphs = match self {
            SequenceSpec::List { graphs } => {
                if graphs.is_empty() {
                    return Err(invalid("sequence.graphs", "must not be empty"));
                }
                graphs.iter().map(GraphSpec::build).collect::<Result<Vec<_>, _>>()?
            }
            &SequenceSpec::ErRange { n, p_min, p_max, count } => {
                if !(0.0 <= p_min && p_min <= p_max && p_max <= 1.0) {
                    return Err(invalid("sequence", format!("need 0 <= p_min <= p_max <= 1, got [{p_min}, {p_max}]")));
                }
                if count == 0 {
                    return Err(invalid("sequence.count", "must be at least 1"));
                }
                let mut rng = RngSeed(master).derive(stream::SEQUENCE).rng();
                (0..count)
                    .map(|_| {
                        let p = rng.gen_range(p_min..=p_max);
                        erdos_renyi(n, p, RngSeed(rng.gen()))
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
        };
        Ok(graphs)
    }
}

impl ExperimentConfig {
    pub fn graph(&self) -> Result<Graph, CliError> {
        let spec = self.graph.as_ref().ok_or_else(|| invalid("graph", "required"))?;
        Ok(spec.build()?)
    }

    /// Temporal network from `sequence` and either `update_times` or
    /// `delta_t`. Returns the network and the inter-update time used (if constant).
    pub fn temporal(&self, tau: f64) -> Result<(TemporalNetwork, Option<f64>), CliError> {
        let seq = self.sequence.as_ref().ok_or_else(|| invalid("sequence", "required"))?;
        let graphs = seq.build(self.seed)?;
        let p = &self.params;
        match (&p.update_times, p.delta_t) {
            (Some(_), Some(_)) => Err(invalid("params.update_times", "give either update_times or delta_t")),
            (Some(times), None) => Ok((TemporalNetwork::new(graphs, times.clone())?, None)),
            (None, Some(dt)) => {
                let dt = match dt {
                    DeltaT::Fixed(dt) => dt,
                    DeltaT::Rule(DeltaRule::THat) => {
                        combined_upper_bound_sequence(&graphs, tau, p.r, CombinedVariant::GrowthOnly)?
                    }
                    DeltaT::Rule(DeltaRule::LD) => {
                        let mut worst = 0.0f64;
                        for g in &graphs {
                            let y = steady_state_report(g, tau, SteadyMode::FixedPoint, default_tolerance())?.y;
                            worst = worst.max(lower_bound_decay(y, p.r)?);
                        }
                        worst
                    }
                };
                if !(dt > 0.0) {
                    return Err(invalid("params.delta_t", format!("resolved to {dt}, must be positive")));
                }
                Ok((constant_interval_network(graphs, dt)?, Some(dt)))
            }
            (None, None) => Err(invalid("params.delta_t", "required for a sequence (or give update_times)")),
        }
    }
}
