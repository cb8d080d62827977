//! Upper-transition time: measurement, analytic bounds, per-graph reports.

pub mod bounds;
mod measure;

use serde::{Deserialize, Serialize};

use crate::dynamics::{EpidemicParams, Rk4Stepper};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::scalar::Scalar;

pub use bounds::{
    bound_decay_conjecture, bound_decay_exponential, bound_decay_exponential_r0, bound_growth,
    bound_growth_first_form, bound_growth_from, bound_intersection, combined_bound_connected,
    combined_upper_bound, combined_upper_bound_sequence, lemma1_epsilon, lower_bound_decay,
    lower_bound_growth, CombinedVariant,
};
pub use measure::{derivative_convergence_time, measure_t_bar, StartMode, StaticProblem, TBar};

/// Analytic bounds for one graph. Bounds outside their domain are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds<S> {
    pub u_d_conjecture: S,
    /// Only for `R0 < 1`.
    pub u_d_exponential: Option<S>,
    /// Largest growth bound over supercritical components.
    pub u_g_growth: Option<S>,
    pub t_hat_combined: S,
    /// Only for `R0 > 1`.
    pub l_g: Option<S>,
    pub l_d: S,
}

impl<S: Scalar> Bounds<S> {
    /// Decay bound in force at this `R0`: exponential up to the intersection
    /// point, `(1-r)/r` beyond it.
    pub fn u_d(&self, r0: S, r: S) -> S {
        match self.u_d_exponential {
            Some(e) if bound_intersection(r).map_or(false, |x| r0 <= x) => e,
            _ => self.u_d_conjecture,
        }
    }

    pub fn compute(g: &Graph, tau: S, r0: S, y_inf: S, r: S) -> Result<Self> {
        let mut u_g: Option<S> = None;
        for comp in g.connected_components() {
            let lambda = crate::graphs::spectral::<S>(&comp.graph).lambda1;
            let r0c = tau * lambda;
            if r0c > S::one() {
                let b = bound_growth_from(r0c, tau, comp.graph.max_degree(), r)?;
                u_g = Some(u_g.map_or(b, |m: S| m.max(b)));
            }
        }
        Ok(Bounds {
            u_d_conjecture: bound_decay_conjecture(r)?,
            u_d_exponential: bound_decay_exponential_r0(r0, r).ok(),
            u_g_growth: u_g,
            t_hat_combined: combined_upper_bound(g, tau, r, CombinedVariant::Standard)?,
            l_g: lower_bound_growth(r0, y_inf, r).ok(),
            l_d: lower_bound_decay(y_inf, r)?,
        })
    }
}

/// Settings for [`transition_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig<S> {
    pub r: S,
    /// Threshold for the derivative convergence time; skipped when `None`.
    pub r_star: Option<S>,
    pub h: S,
    pub t_max: S,
    /// Horizon for the derivative convergence time.
    pub t_star_max: S,
    /// Compare `y∞` with the prevalence reached at `t = 1e4`.
    pub cross_check: bool,
}

impl<S: Scalar> Default for ReportConfig<S> {
    fn default() -> Self {
        ReportConfig {
            r: S::lit(1e-4),
            r_star: None,
            h: S::lit(0.01),
            t_max: S::lit(1e4),
            t_star_max: S::lit(1e5),
            cross_check: true,
        }
    }
}

/// Measured transition times and bounds for one graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport<S> {
    pub graph_id: String,
    pub seed: Option<u64>,
    pub r: S,
    /// Integration step; measured times are resolved to one step.
    pub h: S,
    pub r0: S,
    pub y_inf: S,
    pub t_bar_decay: S,
    pub t_bar_growth: S,
    pub t_star: Option<S>,
    pub bounds: Bounds<S>,
    pub flags: Vec<String>,
}

impl<S: Scalar> TransitionReport<S> {
    /// `max` over the two extremal starts.
    pub fn t_bar(&self) -> S {
        self.t_bar_decay.max(self.t_bar_growth)
    }
}

/// Measures both extremal starts, optionally `t*`, and evaluates every bound.
pub fn transition_report<S: Scalar>(
    g: &Graph,
    tau: S,
    cfg: &ReportConfig<S>,
    graph_id: impl Into<String>,
    seed: Option<u64>,
) -> Result<TransitionReport<S>> {
    let problem = StaticProblem::new(g, tau)?;
    transition_report_for(&problem, cfg, graph_id, seed)
}

pub fn transition_report_for<S: Scalar>(
    problem: &StaticProblem<'_, S>,
    cfg: &ReportConfig<S>,
    graph_id: impl Into<String>,
    seed: Option<u64>,
) -> Result<TransitionReport<S>> {
    let mut flags = Vec::new();
    let (r0, y_inf) = (problem.r0(), problem.y_inf());
    if !problem.has_certificate() {
        flags.push("no_certificate".to_string());
    }
    if cfg.cross_check {
        let y_long = problem.long_run_prevalence(cfg.h)?;
        if (y_long - y_inf).abs() > S::lit(1e-6) {
            flags.push("y_inf_long_run_mismatch".to_string());
        }
    }
    let decay = problem.t_bar(cfg.r, StartMode::Decay, cfg.h, cfg.t_max)?;
    let growth = problem.t_bar(cfg.r, StartMode::Growth, cfg.h, cfg.t_max)?;
    if growth.degenerate {
        flags.push("growth_start_within_r".to_string());
    }
    let t_star = match cfg.r_star {
        Some(rs) => {
            let u = vec![S::one(); problem.graph.n()];
            Some(problem.t_star(&u, &[rs], cfg.h, cfg.t_star_max)?[0])
        }
        None => None,
    };
    let bounds = Bounds::compute(problem.graph, problem.tau, r0, y_inf, cfg.r)?;
    let mut report = TransitionReport {
        graph_id: graph_id.into(),
        seed,
        r: cfg.r,
        h: cfg.h,
        r0,
        y_inf,
        t_bar_decay: decay.t_bar,
        t_bar_growth: growth.t_bar,
        t_star,
        bounds,
        flags,
    };
    for v in check_bound_ordering(&report) {
        report.flags.push(format!("violation:{}", v.relation));
    }
    Ok(report)
}

/// A bound that failed to hold for a measured transition time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingViolation<S> {
    pub relation: &'static str,
    pub lhs: S,
    pub rhs: S,
    /// The relation rests on the unproven envelope `|y - y∞| <= 1/(1+t)`.
    pub conjectural: bool,
}

/// Checks `L_D <= T̄_decay`, `L_G <= T̄_growth` (supercritical) and
/// `max(T̄_decay, T̄_growth) <= T̂`.
///
/// A measured `T̄` is the grid time after the last sample outside the band,
/// so it can exceed the continuous-time value by up to one step `h`; the
/// upper bound is compared with that allowance. The lower bounds need none.
pub fn check_bound_ordering<S: Scalar>(rep: &TransitionReport<S>) -> Vec<OrderingViolation<S>> {
    let mut out = Vec::new();
    let b = &rep.bounds;
    if b.l_d > rep.t_bar_decay {
        out.push(OrderingViolation {
            relation: "L_D<=t_bar_decay",
            lhs: b.l_d,
            rhs: rep.t_bar_decay,
            conjectural: false,
        });
    }
    if let Some(lg) = b.l_g {
        if lg > rep.t_bar_growth {
            out.push(OrderingViolation {
                relation: "L_G<=t_bar_growth",
                lhs: lg,
                rhs: rep.t_bar_growth,
                conjectural: false,
            });
        }
    }
    if rep.t_bar() > b.t_hat_combined + rep.h {
        // Below the intersection point the bound is the proven exponential
        // one; above it the decay branch leans on the (1-r)/r envelope.
        let proven = bound_intersection(rep.r).map_or(false, |x| rep.r0 <= x);
        out.push(OrderingViolation {
            relation: "max_t_bar<=T_hat",
            lhs: rep.t_bar(),
            rhs: b.t_hat_combined,
            conjectural: !proven,
        });
    }
    out
}

/// Spread of transition times among graphs with similar `R0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSpread {
    pub r0_low: f64,
    pub count: usize,
    pub mean: f64,
    /// `max - min` within the bin.
    pub range: f64,
    /// Range above 20% of the bin mean.
    pub flagged: bool,
}

/// Groups `(R0, T̄)` pairs into bins of the given width and reports the
/// within-bin range of `T̄`. Bins with fewer than two graphs are skipped.
pub fn r0_bin_spread(points: &[(f64, f64)], width: f64) -> Vec<BinSpread> {
    let mut bins: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
    for &(r0, t) in points {
        if r0.is_finite() && t.is_finite() {
            bins.entry((r0 / width).floor() as i64).or_default().push(t);
        }
    }
    bins.into_iter()
        .filter(|(_, ts)| ts.len() >= 2)
        .map(|(k, ts)| {
            let mean = ts.iter().sum::<f64>() / ts.len() as f64;
            let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            BinSpread {
                r0_low: k as f64 * width,
                count: ts.len(),
                mean,
                range: hi - lo,
                flagged: hi - lo > 0.2 * mean,
            }
        })
        .collect()
}

/// Integrates from `eps u` up to `t_delay` and reports whether every sample
/// stays more than `r` away from `y∞`. Returns `(eps, holds)`.
pub fn verify_lemma1<S: Scalar>(g: &Graph, tau: S, r: S, t_delay: S, h: S) -> Result<(S, bool)> {
    let problem = StaticProblem::new(g, tau)?;
    if !(problem.r0() > S::one()) {
        return Err(Error::Domain(format!(
            "slow-start construction needs R0 > 1, got {}",
            problem.r0()
        )));
    }
    let y_inf = problem.y_inf();
    let eps = lemma1_epsilon(y_inf, tau, g.n(), r, t_delay)?;
    let params = EpidemicParams::rescaled(tau)?;
    let mut st = Rk4Stepper::new(g, &params, &vec![eps; g.n()], h)?;
    let steps = crate::dynamics::steps_for(t_delay, h)?;
    let mut holds = (st.prevalence() - y_inf).abs() > r;
    for _ in 0..steps {
        st.step()?;
        holds &= (st.prevalence() - y_inf).abs() > r;
    }
    Ok((eps, holds))
}
