//! NIMFA on a sequence of graphs that switch at given update times, and the
//! quenched prediction that replaces each interval by a static run started
//! from the previous graph's steady state.

use crate::dynamics::{
    default_tolerance, prevalence, steady_state_report, validate_state, EpidemicParams, Rk4Stepper,
    SteadyMode, Trajectory,
};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::scalar::Scalar;

/// Graphs `G_1..G_M` on a common node set; `G_m` is active on `[t_{m-1}, t_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalNetwork {
    graphs: Vec<Graph>,
    update_times: Vec<f64>,
}

impl TemporalNetwork {
    pub fn new(graphs: Vec<Graph>, update_times: Vec<f64>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::param("graphs", "need at least one graph"));
        }
        if update_times.len() != graphs.len() + 1 {
            return Err(Error::param(
                "update_times",
                format!(
                    "need {} times for {} graphs, got {}",
                    graphs.len() + 1,
                    graphs.len(),
                    update_times.len()
                ),
            ));
        }
        let n = graphs[0].n();
        if let Some(g) = graphs.iter().find(|g| g.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.n(),
            });
        }
        if !(update_times[0] >= 0.0) || update_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::param(
                "update_times",
                "times must be finite and start at t_0 >= 0",
            ));
        }
        if update_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("update_times", "must be strictly increasing"));
        }
        Ok(TemporalNetwork {
            graphs,
            update_times,
        })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn update_times(&self) -> &[f64] {
        &self.update_times
    }

    /// Number of intervals `M`.
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn n(&self) -> usize {
        self.graphs[0].n()
    }

    /// Update times snapped to the nearest multiple of `h`.
    pub fn snap(&self, h: f64) -> Result<SnappedTimes> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::param("h", format!("step must be positive, got {h}")));
        }
        let steps: Vec<usize> = self
            .update_times
            .iter()
            .map(|&t| (t / h).round() as usize)
            .collect();
        if let Some(m) = steps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "h",
                format!("interval {} collapses to zero steps at h = {h}", m + 1),
            ));
        }
        let max_error = self
            .update_times
            .iter()
            .zip(&steps)
            .map(|(&t, &k)| (t - k as f64 * h).abs())
            .fold(0.0, f64::max);
        Ok(SnappedTimes { steps, max_error })
    }
}

/// Update times as step indices on the integration grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SnappedTimes {
    /// `t_m ≈ steps[m] * h`.
    pub steps: Vec<usize>,
    /// Largest `|t_m - steps[m] h|`, at most `h/2`.
    pub max_error: f64,
}

/// `t_m = m * delta_t`.
pub fn constant_interval_network(graphs: Vec<Graph>, delta_t: f64) -> Result<TemporalNetwork> {
    if !(delta_t > 0.0) || !delta_t.is_finite() {
        return Err(Error::param(
            "delta_t",
            format!("must be positive, got {delta_t}"),
        ));
    }
    let times = (0..=graphs.len()).map(|m| m as f64 * delta_t).collect();
    TemporalNetwork::new(graphs, times)
}

/// Integrates across all intervals, calling `visit(interval, t, state)` at
/// every grid sample, starting with the initial state. `interval` is the
/// 0-based index of the graph that produced the sample (0 for the start).
/// The state at an update time is handed on unchanged to the next graph.
/// Returns the snapped grid and the largest clamp applied.
pub fn run_temporal<S: Scalar>(
    tn: &TemporalNetwork,
    params: &EpidemicParams<S>,
    v0: &[S],
    h: S,
    mut visit: impl FnMut(usize, S, &[S]),
) -> Result<(SnappedTimes, S)> {
    validate_state(&tn.graphs[0], v0)?;
    let snapped = tn.snap(h.as_f64())?;
    let mut stepper = Rk4Stepper::new(&tn.graphs[0], params, v0, h)?
        .with_start_time(S::from_usize_lossy(snapped.steps[0]) * h);
    visit(0, stepper.t(), stepper.state());
    for (m, g) in tn.graphs.iter().enumerate() {
        stepper.set_graph(g)?;
        for _ in snapped.steps[m]..snapped.steps[m + 1] {
            stepper.step()?;
            visit(m, stepper.t(), stepper.state());
        }
    }
    Ok((snapped, stepper.max_clamp()))
}

/// Full temporal trajectory plus the grid positions of the update times.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalRun<S> {
    pub trajectory: Trajectory<S>,
    /// Sample index of each update time `t_0..t_M`.
    pub boundaries: Vec<usize>,
    pub snapping_error: f64,
}

pub fn integrate_temporal<S: Scalar>(
    tn: &TemporalNetwork,
    params: &EpidemicParams<S>,
    v0: &[S],
    h: S,
) -> Result<TemporalRun<S>> {
    let snapped = tn.snap(h.as_f64())?;
    let samples = snapped.steps[tn.len()] - snapped.steps[0] + 1;
    Trajectory::<S>::check_size(samples, tn.n())?;
    let mut traj = Trajectory::with_capacity(samples);
    let (snapped, clamp) = run_temporal(tn, params, v0, h, |_, t, v| traj.push(t, v))?;
    traj.max_clamp = clamp;
    let k0 = snapped.steps[0];
    Ok(TemporalRun {
        trajectory: traj,
        boundaries: snapped.steps.iter().map(|&k| k - k0).collect(),
        snapping_error: snapped.max_error,
    })
}

/// Quenched prediction for one interval `m >= 2` (stored 0-based as `m - 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalPrediction<S> {
    /// 0-based graph index of the interval.
    pub interval: usize,
    /// Range of actual-trajectory samples covered, both ends included.
    pub first_sample: usize,
    pub last_sample: usize,
    /// Predicted prevalence on those samples.
    pub predicted: Vec<S>,
    /// `|y_pred - y_actual|` on those samples.
    pub abs_error: Vec<S>,
    /// The previous graph's steady prevalence was below `r`, so the
    /// prediction started from `r u` instead of `V∞`.
    pub die_out_floor: bool,
}

impl<S: Scalar> IntervalPrediction<S> {
    pub fn max_error(&self) -> S {
        self.abs_error.iter().fold(S::zero(), |m, &e| m.max(e))
    }

    pub fn end_error(&self) -> S {
        *self.abs_error.last().expect("interval has samples")
    }
}

/// Actual temporal prevalence against the quenched prediction. Only
/// prevalence series are kept, so long intervals stay cheap in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionReport<S> {
    pub times: Vec<S>,
    pub actual: Vec<S>,
    /// One entry per interval from the second on.
    pub intervals: Vec<IntervalPrediction<S>>,
    pub snapping_error: f64,
}

impl<S: Scalar> PredictionReport<S> {
    /// Largest error over every predicted interval.
    pub fn max_error(&self) -> S {
        self.intervals
            .iter()
            .fold(S::zero(), |m, p| m.max(p.max_error()))
    }

    /// Rows `(t, y_actual, y_pred, abs_err)` with one row per grid time. An
    /// update time belongs to the interval that starts there; the first
    /// interval has no prediction and reports NaN.
    pub fn rows(&self) -> Vec<(S, S, S, S)> {
        let mut pred = vec![S::nan(); self.times.len()];
        let mut err = vec![S::nan(); self.times.len()];
        for p in &self.intervals {
            for (k, (&y, &e)) in p.predicted.iter().zip(&p.abs_error).enumerate() {
                let idx = p.first_sample + k;
                if idx == p.last_sample && idx + 1 < self.times.len() {
                    break;
                }
                pred[idx] = y;
                err[idx] = e;
            }
        }
        (0..self.times.len())
            .map(|k| (self.times[k], self.actual[k], pred[k], err[k]))
            .collect()
    }
}

/// Predicts interval `m >= 2` by a static run on `G_m` from `V∞(G_{m-1})`, or
/// from `r u` when `y∞(G_{m-1}) < r`, and compares with the actual temporal
/// trajectory started from `v0`.
pub fn quenched_predict<S: Scalar>(
    tn: &TemporalNetwork,
    params: &EpidemicParams<S>,
    v0: &[S],
    r: S,
    h: S,
) -> Result<PredictionReport<S>> {
    if tn.len() < 2 {
        return Err(Error::param(
            "graphs",
            "quenched prediction needs at least two graphs",
        ));
    }
    if !(r > S::zero() && r < S::one()) {
        return Err(Error::param("r", format!("must lie in (0, 1), got {r}")));
    }
    let snapped = tn.snap(h.as_f64())?;
    // times, actual, and one prediction with its error per sample
    Trajectory::<S>::check_size(snapped.steps[tn.len()] - snapped.steps[0] + 1, 2)?;
    let mut times = Vec::new();
    let mut actual = Vec::new();
    let (snapped, _) = run_temporal(tn, params, v0, h, |_, t, v| {
        times.push(t);
        actual.push(prevalence(v));
    })?;
    let k0 = snapped.steps[0];
    let mut intervals = Vec::with_capacity(tn.len() - 1);
    for m in 1..tn.len() {
        let prev = steady_state_report(
            &tn.graphs[m - 1],
            params.tau,
            SteadyMode::FixedPoint,
            default_tolerance(),
        )?;
        let die_out_floor = prev.y < r;
        let start = if die_out_floor {
            vec![r; tn.n()]
        } else {
            prev.v
        };
        let first = snapped.steps[m] - k0;
        let last = snapped.steps[m + 1] - k0;
        let mut stepper = Rk4Stepper::new(&tn.graphs[m], params, &start, h)?;
        let mut predicted = Vec::with_capacity(last - first + 1);
        predicted.push(stepper.prevalence());
        for _ in first..last {
            stepper.step()?;
            predicted.push(stepper.prevalence());
        }
        let abs_error = predicted
            .iter()
            .zip(&actual[first..=last])
            .map(|(&p, &a)| (p - a).abs())
            .collect();
        intervals.push(IntervalPrediction {
            interval: m,
            first_sample: first,
            last_sample: last,
            predicted,
            abs_error,
            die_out_floor,
        });
    }
    Ok(PredictionReport {
        times,
        actual,
        intervals,
        snapping_error: snapped.max_error,
    })
}
