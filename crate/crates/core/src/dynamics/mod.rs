//! NIMFA SIS dynamics on a static graph.
//!
//! Node `i` is infected with probability `v_i` and evolves as
//! `dv_i/dt = -delta v_i + beta (1 - v_i) sum_j a_ij v_j`.

mod integrate;
mod sandwich;
mod steady;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::scalar::{mean, Scalar};

pub use integrate::{integrate, steps_for, Rk4Stepper};
pub use sandwich::ConvergenceCertificate;
pub use steady::{default_tolerance, steady_state, steady_state_report, SteadyMode, SteadyState};

/// Per-link infection rate `beta` and curing rate `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams<S> {
    pub beta: S,
    pub delta: S,
    /// `beta / delta`.
    pub tau: S,
}

impl<S: Scalar> EpidemicParams<S> {
    pub fn new(beta: S, delta: S) -> Result<Self> {
        if !(beta >= S::zero()) || !beta.is_finite() {
            return Err(Error::param(
                "beta",
                format!("must be finite and >= 0, got {beta}"),
            ));
        }
        if !(delta > S::zero()) || !delta.is_finite() {
            return Err(Error::param(
                "delta",
                format!("must be finite and > 0, got {delta}"),
            ));
        }
        Ok(EpidemicParams {
            beta,
            delta,
            tau: beta / delta,
        })
    }

    /// Unit curing rate, time measured in units of `1/delta`.
    pub fn rescaled(tau: S) -> Result<Self> {
        Self::new(tau, S::one())
    }

    /// Returns `(tau, 1)` and the time scale factor `delta`: a time `t` of the
    /// rescaled system corresponds to `t / delta` in the original units.
    pub fn rescale(&self) -> (Self, S) {
        (
            EpidemicParams {
                beta: self.tau,
                delta: S::one(),
                tau: self.tau,
            },
            self.delta,
        )
    }
}

/// `y = (1/N) sum_i v_i`.
pub fn prevalence<S: Scalar>(v: &[S]) -> S {
    mean(v)
}

/// Checks that `v` is a state of `g`: right length, entries in `[0, 1]`.
pub fn validate_state<S: Scalar>(g: &Graph, v: &[S]) -> Result<()> {
    if v.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: v.len(),
        });
    }
    if let Some((i, x)) = v
        .iter()
        .enumerate()
        .find(|(_, &x)| !(x >= S::zero() && x <= S::one()))
    {
        return Err(Error::param(
            "v0",
            format!("entry {i} = {x} outside [0, 1]"),
        ));
    }
    Ok(())
}

/// Time derivative of the NIMFA system at `v`.
pub fn nimfa_derivative<S: Scalar>(
    g: &Graph,
    params: &EpidemicParams<S>,
    v: &[S],
) -> Result<Vec<S>> {
    if v.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: v.len(),
        });
    }
    let mut av = vec![S::zero(); g.n()];
    let mut out = vec![S::zero(); g.n()];
    derivative_into(g, params.beta, params.delta, v, &mut av, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn derivative_into<S: Scalar>(
    g: &Graph,
    beta: S,
    delta: S,
    v: &[S],
    av: &mut [S],
    out: &mut [S],
) {
    g.mul_adjacency(v, av);
    for ((o, &x), &s) in out.iter_mut().zip(v).zip(av.iter()) {
        *o = -delta * x + beta * (S::one() - x) * s;
    }
}

/// Largest number of values a stored trajectory may hold (2 GiB of `f64`).
pub const MAX_STORED_VALUES: usize = 1 << 28;

/// Sampled solution: `states[k]` at `times[k]`, `prevalence[k] = mean(states[k])`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<S>,
    pub states: Vec<Vec<S>>,
    pub prevalence: Vec<S>,
    /// Largest amount any entry was clamped back into `[0, 1]`.
    pub max_clamp: S,
}

impl<S: Scalar> Trajectory<S> {
    /// Rejects trajectories that would store more than [`MAX_STORED_VALUES`]
    /// numbers for `samples` samples of `n` nodes.
    pub(crate) fn check_size(samples: usize, n: usize) -> Result<()> {
        let values = samples.saturating_mul(n.saturating_add(2));
        if values > MAX_STORED_VALUES {
            return Err(Error::param(
                "t_end",
                format!(
                    "{samples} samples of {n} nodes exceed the limit of {MAX_STORED_VALUES} stored values; \
                     shorten the horizon or enlarge h"
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn with_capacity(cap: usize) -> Self {
        Trajectory {
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
            prevalence: Vec::with_capacity(cap),
            max_clamp: S::zero(),
        }
    }

    pub(crate) fn push(&mut self, t: S, v: &[S]) {
        self.times.push(t);
        self.prevalence.push(prevalence(v));
        self.states.push(v.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[S] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Clamping stayed at rounding level throughout.
    pub fn is_valid(&self) -> bool {
        self.max_clamp <= integrate::clamp_valid_threshold::<S>()
    }
}

/// First ordering violation found by [`monotone_coupling_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingViolation<S> {
    pub t: S,
    pub node: usize,
    /// `low_i(t) - high_i(t)`, positive.
    pub excess: S,
}

/// Outcome of [`monotone_coupling_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingWitness<S> {
    pub holds: bool,
    pub samples: usize,
    pub first_violation: Option<CouplingViolation<S>>,
}

/// Integrates from two ordered starts and checks that the order persists at
/// every sample, up to `1e-9`.
pub fn monotone_coupling_check<S: Scalar>(
    g: &Graph,
    params: &EpidemicParams<S>,
    v0_low: &[S],
    v0_high: &[S],
    t_end: S,
    h: S,
) -> Result<CouplingWitness<S>> {
    if v0_low.iter().zip(v0_high).any(|(l, u)| l > u) {
        return Err(Error::param("v0_low", "must be entrywise <= v0_high"));
    }
    let tol = S::lit(1e-9);
    let mut low = Rk4Stepper::new(g, params, v0_low, h)?;
    let mut high = Rk4Stepper::new(g, params, v0_high, h)?;
    let steps = steps_for(t_end, h)?;
    let mut samples = 0;
    for k in 0..=steps {
        if k > 0 {
            low.step()?;
            high.step()?;
        }
        samples += 1;
        let worst = low
            .state()
            .iter()
            .zip(high.state())
            .map(|(&l, &u)| l - u)
            .enumerate()
            .fold(
                (0, S::neg_infinity()),
                |a, (i, d)| if d > a.1 { (i, d) } else { a },
            );
        if worst.1 > tol {
            return Ok(CouplingWitness {
                holds: false,
                samples,
                first_violation: Some(CouplingViolation {
                    t: low.t(),
                    node: worst.0,
                    excess: worst.1,
                }),
            });
        }
    }
    Ok(CouplingWitness {
        holds: true,
        samples,
        first_violation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{erdos_renyi, named_graph, NamedGraph, RngSeed};

    #[test]
    fn derivative_examples() {
        let k2 = named_graph(NamedGraph::Complete, 2).unwrap();
        let p = EpidemicParams::new(1.0, 1.0).unwrap();
        assert_eq!(
            nimfa_derivative(&k2, &p, &[0.0, 0.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            nimfa_derivative(&k2, &p, &[1.0, 1.0]).unwrap(),
            vec![-1.0, -1.0]
        );
        assert!(nimfa_derivative(&k2, &p, &[1.0]).is_err());
    }

    #[test]
    fn prevalence_examples() {
        assert_eq!(prevalence(&[1.0; 7]), 1.0);
        assert_eq!(prevalence(&[0.0; 7]), 0.0);
        assert!((prevalence(&[0.2f64, 0.4, 0.6]) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rescale_examples() {
        let (r, scale) = EpidemicParams::new(0.2, 2.0).unwrap().rescale();
        assert_eq!((r.beta, r.delta, scale), (0.1, 1.0, 2.0));
        let p = EpidemicParams::new(0.1, 1.0).unwrap();
        assert_eq!(p.rescale().0, p);
        assert!(EpidemicParams::new(0.1, 0.0).is_err());
        assert!(EpidemicParams::new(-0.1, 1.0).is_err());
    }

    #[test]
    fn coupling_examples() {
        let g = erdos_renyi(30, 0.2, RngSeed(4)).unwrap();
        let p = EpidemicParams::rescaled(0.15).unwrap();
        let u = vec![1.0; 30];
        let low = vec![0.1; 30];
        let w = monotone_coupling_check(&g, &p, &low, &u, 20.0, 0.01).unwrap();
        assert!(w.holds);
        assert_eq!(w.samples, 2001);
        assert!(
            monotone_coupling_check(&g, &p, &u, &u, 5.0, 0.01)
                .unwrap()
                .holds
        );
        let zero = vec![0.0; 30];
        assert!(
            monotone_coupling_check(&g, &p, &zero, &low, 5.0, 0.01)
                .unwrap()
                .holds
        );
        assert!(monotone_coupling_check(&g, &p, &u, &low, 5.0, 0.01).is_err());
    }
}
