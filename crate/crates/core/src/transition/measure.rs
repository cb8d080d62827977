//! Numerical measurement of the upper-transition time and the derivative
//! convergence time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    default_tolerance, prevalence, steady_state_report, ConvergenceCertificate, EpidemicParams,
    Rk4Stepper, SteadyMode, SteadyState,
};
use crate::error::{Error, Result};
use crate::graphs::{Graph, RngSeed};
use crate::scalar::Scalar;

/// How often (in steps) the convergence certificate is consulted.
const CERTIFY_EVERY: usize = 50;
/// The certified band must undercut `r` by this relative margin, which
/// absorbs the integrator's deviation from the exact flow.
const CERTIFY_MARGIN: f64 = 1e-3;
const LONG_RUN_T_END: f64 = 1e4;

/// Initial state of a transition-time measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode<S> {
    /// All nodes infected, `V(0) = u`.
    Decay,
    /// `V(0) = r u`.
    Growth,
    /// `V(0) = y0 u`.
    Uniform(S),
}

/// One measured transition time.
#[derive(Clone, Debug, PartialEq)]
pub struct TBar<S> {
    pub t_bar: S,
    /// Growth start with `r >= y∞`: the start is already within tolerance.
    pub degenerate: bool,
    /// Time at which the rest of the trajectory was certified to stay within
    /// `r`; `None` if the run went all the way to `t_max`.
    pub certified_at: Option<S>,
}

/// A graph at a fixed effective infection rate, with its steady state and
/// convergence certificate computed once and reused across measurements.
pub struct StaticProblem<'g, S> {
    pub graph: &'g Graph,
    pub tau: S,
    pub steady: SteadyState<S>,
    params: EpidemicParams<S>,
    certificate: Option<ConvergenceCertificate<S>>,
}

impl<'g, S: Scalar> StaticProblem<'g, S> {
    pub fn new(graph: &'g Graph, tau: S) -> Result<Self> {
        let steady = steady_state_report(graph, tau, SteadyMode::FixedPoint, default_tolerance())?;
        let certificate = ConvergenceCertificate::new(graph, tau, &steady.v);
        Ok(StaticProblem {
            graph,
            tau,
            params: EpidemicParams::rescaled(tau)?,
            steady,
            certificate,
        })
    }

    pub fn r0(&self) -> S {
        self.steady.r0
    }

    pub fn y_inf(&self) -> S {
        self.steady.y
    }

    pub fn params(&self) -> &EpidemicParams<S> {
        &self.params
    }

    pub fn has_certificate(&self) -> bool {
        self.certificate.is_some()
    }

    /// Prevalence at `t = 1e4` from `u`, the long-run approximation of `y∞`.
    /// Stops early once the state is stationary to `1e-14` per unit time.
    pub fn long_run_prevalence(&self, h: S) -> Result<S> {
        let steps = crate::dynamics::steps_for(S::lit(LONG_RUN_T_END), h)?;
        let stationary = h * S::lit(1e-14).max(S::lit(4.0) * S::epsilon());
        let mut st = Rk4Stepper::new(self.graph, &self.params, &vec![S::one(); self.graph.n()], h)?;
        for _ in 0..steps {
            st.step()?;
            if st.last_change() <= stationary {
                break;
            }
        }
        Ok(st.prevalence())
    }

    pub fn start_state(&self, mode: StartMode<S>, r: S) -> Result<Vec<S>> {
        let level = match mode {
            StartMode::Decay => S::one(),
            StartMode::Growth => r,
            StartMode::Uniform(y0) => {
                if !(y0 >= S::zero() && y0 <= S::one()) {
                    return Err(Error::param("y0", format!("must lie in [0, 1], got {y0}")));
                }
                y0
            }
        };
        Ok(vec![level; self.graph.n()])
    }

    /// Upper-transition time for one start mode.
    pub fn t_bar(&self, r: S, mode: StartMode<S>, h: S, t_max: S) -> Result<TBar<S>> {
        if !(r > S::zero() && r < S::one()) {
            return Err(Error::param("r", format!("must lie in (0, 1), got {r}")));
        }
        if matches!(mode, StartMode::Growth) && r >= self.y_inf() {
            return Ok(TBar {
                t_bar: S::zero(),
                degenerate: true,
                certified_at: None,
            });
        }
        let v0 = self.start_state(mode, r)?;
        self.t_bar_from(&v0, r, h, t_max)
    }

    /// Last-entry time into the band `|y - y∞| <= r` for the run from `v0`:
    /// the first grid time after which no sample up to `t_max` leaves it.
    pub fn t_bar_from(&self, v0: &[S], r: S, h: S, t_max: S) -> Result<TBar<S>> {
        let steps = crate::dynamics::steps_for(t_max, h)?;
        let y_inf = self.y_inf();
        let target = r * (S::one() - S::lit(CERTIFY_MARGIN));
        let mut st = Rk4Stepper::new(self.graph, &self.params, v0, h)?;
        let mut last_outside = ((prevalence(v0) - y_inf).abs() > r).then_some(0usize);
        let mut certified_at = None;
        for k in 1..=steps {
            st.step()?;
            let y = st.prevalence();
            if (y - y_inf).abs() > r {
                last_outside = Some(k);
                continue;
            }
            if k % CERTIFY_EVERY == 0 {
                if let Some(b) = self.certificate.as_ref().and_then(|c| c.band(st.state())) {
                    if b <= target {
                        certified_at = Some(st.t());
                        break;
                    }
                }
            }
        }
        if certified_at.is_none() {
            let gap = (st.prevalence() - y_inf).abs();
            if gap > r {
                return Err(Error::NonConvergence {
                    what: "prevalence within r of the steady state by t_max",
                    residual: gap.as_f64(),
                });
            }
        }
        Ok(TBar {
            t_bar: last_outside.map_or(S::zero(), |k| S::from_usize_lossy(k + 1) * h),
            degenerate: false,
            certified_at,
        })
    }

    /// Derivative convergence times for several thresholds in one run: for
    /// each `r*`, the first grid time `t` with `max_i |v_i(t+h) - v_i(t)| <= h r*`.
    pub fn t_star(&self, v0: &[S], r_stars: &[S], h: S, t_max: S) -> Result<Vec<S>> {
        if let Some(bad) = r_stars.iter().find(|&&x| !(x > S::zero())) {
            return Err(Error::param(
                "r_star",
                format!("must be positive, got {bad}"),
            ));
        }
        let steps = crate::dynamics::steps_for(t_max, h)?;
        let mut out: Vec<Option<S>> = vec![None; r_stars.len()];
        let mut st = Rk4Stepper::new(self.graph, &self.params, v0, h)?;
        for _ in 0..steps {
            let t = st.t();
            st.step()?;
            let change = st.last_change();
            for (slot, &rs) in out.iter_mut().zip(r_stars) {
                if slot.is_none() && change <= h * rs {
                    *slot = Some(t);
                }
            }
            if out.iter().all(Option::is_some) {
                break;
            }
        }
        out.into_iter()
            .map(|x| {
                x.ok_or(Error::NonConvergence {
                    what: "derivative convergence time within t_max",
                    residual: st.last_change().as_f64(),
                })
            })
            .collect()
    }

    /// Integrates `count` random mixed starts with entries uniform in `[r, 1]`
    /// and returns the largest transition time among them.
    pub fn mixed_start_max_t_bar(
        &self,
        r: S,
        h: S,
        t_max: S,
        count: usize,
        seed: RngSeed,
    ) -> Result<S> {
        let mut rng = seed.rng();
        let mut worst = S::zero();
        for _ in 0..count {
            let v0: Vec<S> = (0..self.graph.n())
                .map(|_| S::lit(rng.gen_range(r.as_f64()..=1.0)))
                .collect();
            worst = worst.max(self.t_bar_from(&v0, r, h, t_max)?.t_bar);
        }
        Ok(worst)
    }
}

/// Transition time of `g` at `tau` for one start mode.
pub fn measure_t_bar<S: Scalar>(
    g: &Graph,
    tau: S,
    r: S,
    mode: StartMode<S>,
    h: S,
    t_max: S,
) -> Result<TBar<S>> {
    StaticProblem::new(g, tau)?.t_bar(r, mode, h, t_max)
}

/// Derivative convergence time of `g` at `tau` from `v0`.
pub fn derivative_convergence_time<S: Scalar>(
    g: &Graph,
    tau: S,
    r_star: S,
    h: S,
    v0: &[S],
    t_max: S,
) -> Result<S> {
    Ok(StaticProblem::new(g, tau)?.t_star(v0, &[r_star], h, t_max)?[0])
}
