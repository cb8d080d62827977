use serde::{Deserialize, Serialize};

use super::{derivative_into, EpidemicParams, Rk4Stepper};
use crate::error::{Error, Result};
use crate::graphs::{spectral, Graph};
use crate::linalg::DenseMatrix;
use crate::scalar::{max_abs_diff, Scalar};

/// Components with `R0` up to `1 + THRESHOLD_SLACK` count as subcritical, so
/// graphs placed exactly at the threshold are not tipped over by round-off in
/// `lambda1`.
pub(crate) const THRESHOLD_SLACK: f64 = 1e-9;

const MAX_FIXED_POINT_ITERATIONS: usize = 200_000;
const NEWTON_EVERY: usize = 500;
const MAX_NEWTON_STEPS: usize = 40;
const LONG_RUN_T_END: f64 = 1e4;
const LONG_RUN_H: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMode {
    /// Iterate `v_i <- tau s_i / (1 + tau s_i)` from the all-infected state.
    FixedPoint,
    /// Final state of an integration from the all-infected state to `t = 1e4`.
    LongIntegration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState<S> {
    pub v: Vec<S>,
    pub y: S,
    pub r0: S,
    pub mode: SteadyMode,
    /// Fixed-point sweeps, or integration steps.
    pub iterations: usize,
    /// `‖f(v)‖∞` of the NIMFA vector field at the returned state.
    pub residual: S,
}

/// `1e-12`, or a few ulps for types too coarse to reach it.
pub fn default_tolerance<S: Scalar>() -> S {
    S::lit(1e-12).max(S::lit(64.0) * S::epsilon())
}

/// Steady state `V∞` of the rescaled system (`delta = 1`); the zero vector when `R0 <= 1`.
pub fn steady_state<S: Scalar>(g: &Graph, tau: S, mode: SteadyMode, tol: S) -> Result<Vec<S>> {
    steady_state_report(g, tau, mode, tol).map(|s| s.v)
}

pub fn steady_state_report<S: Scalar>(
    g: &Graph,
    tau: S,
    mode: SteadyMode,
    tol: S,
) -> Result<SteadyState<S>> {
    if !(tau >= S::zero()) || !tau.is_finite() {
        return Err(Error::param(
            "tau",
            format!("must be finite and >= 0, got {tau}"),
        ));
    }
    if !(tol > S::zero()) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    let n = g.n();
    let r0 = tau * spectral::<S>(g).lambda1;
    let mut v = vec![S::zero(); n];
    let mut iterations = 0;
    if r0 > S::one() + S::lit(THRESHOLD_SLACK) {
        match mode {
            SteadyMode::FixedPoint => {
                for comp in g.connected_components() {
                    if comp.graph.links() == 0 {
                        continue;
                    }
                    let lambda = spectral::<S>(&comp.graph).lambda1;
                    if tau * lambda <= S::one() + S::lit(THRESHOLD_SLACK) {
                        continue;
                    }
                    let (local, its) = fixed_point(&comp.graph, tau, tol)?;
                    iterations += its;
                    for (k, &node) in comp.nodes.iter().enumerate() {
                        v[node] = local[k];
                    }
                }
            }
            SteadyMode::LongIntegration => {
                let (state, steps) = long_integration(g, tau)?;
                v = state;
                iterations = steps;
            }
        }
    }
    let mut av = vec![S::zero(); n];
    let mut f = vec![S::zero(); n];
    derivative_into(g, tau, S::one(), &v, &mut av, &mut f);
    let residual = f.iter().fold(S::zero(), |m, x| m.max(x.abs()));
    Ok(SteadyState {
        y: super::prevalence(&v),
        v,
        r0,
        mode,
        iterations,
        residual,
    })
}

/// Fixed-point map on a connected supercritical graph, polished with Newton
/// steps when the map contracts slowly (close to the threshold).
fn fixed_point<S: Scalar>(g: &Graph, tau: S, tol: S) -> Result<(Vec<S>, usize)> {
    let n = g.n();
    let mut v = vec![S::one(); n];
    let mut next = vec![S::zero(); n];
    let mut s = vec![S::zero(); n];
    let mut change = S::infinity();
    for it in 1..=MAX_FIXED_POINT_ITERATIONS {
        apply_map(g, tau, &v, &mut s, &mut next);
        change = max_abs_diff(&v, &next);
        std::mem::swap(&mut v, &mut next);
        if change < tol {
            return Ok((v, it));
        }
        if it % NEWTON_EVERY == 0 {
            if let Some(w) = newton(g, tau, &v, tol) {
                apply_map(g, tau, &w, &mut s, &mut next);
                let c = max_abs_diff(&w, &next);
                if c < tol {
                    return Ok((next, it + 1));
                }
            }
        }
    }
    Err(Error::NonConvergence {
        what: "steady-state fixed point",
        residual: change.as_f64(),
    })
}

fn apply_map<S: Scalar>(g: &Graph, tau: S, v: &[S], s: &mut [S], out: &mut [S]) {
    g.mul_adjacency(v, s);
    for (o, &si) in out.iter_mut().zip(s.iter()) {
        let ts = tau * si;
        *o = ts / (S::one() + ts);
    }
}

/// Newton's method on `G(v) = v - tau s / (1 + tau s)`. Returns `None` if an
/// iterate leaves `(0, 1]` or the Jacobian is singular.
fn newton<S: Scalar>(g: &Graph, tau: S, start: &[S], tol: S) -> Option<Vec<S>> {
    let n = g.n();
    let mut v = start.to_vec();
    let mut s = vec![S::zero(); n];
    let mut phi = vec![S::zero(); n];
    for _ in 0..MAX_NEWTON_STEPS {
        apply_map(g, tau, &v, &mut s, &mut phi);
        let mut jac = DenseMatrix::zeros(n);
        let mut rhs = vec![S::zero(); n];
        for i in 0..n {
            let denom = S::one() + tau * s[i];
            let scale = tau / (denom * denom);
            jac.set(i, i, S::one());
            for &j in g.neighbors(i) {
                jac.set(i, j, -scale);
            }
            rhs[i] = phi[i] - v[i];
        }
        let d = jac.solve(&rhs)?;
        let mut size = S::zero();
        for (vi, di) in v.iter_mut().zip(&d) {
            *vi += *di;
            size = size.max(di.abs());
        }
        if v.iter().any(|&x| !(x > S::zero() && x <= S::one())) {
            return None;
        }
        if size < tol * S::lit(1e-2) {
            return Some(v);
        }
    }
    Some(v)
}

/// Integrates from `u` towards `t = 1e4`, stopping early once the state moves
/// less than `1e-14` per unit time (the remaining drift is then far below any
/// tolerance used downstream).
fn long_integration<S: Scalar>(g: &Graph, tau: S) -> Result<(Vec<S>, usize)> {
    let params = EpidemicParams::rescaled(tau)?;
    let h = S::lit(LONG_RUN_H);
    let steps = super::steps_for(S::lit(LONG_RUN_T_END), h)?;
    let stationary = h * S::lit(1e-14).max(S::lit(4.0) * S::epsilon());
    let mut stepper = Rk4Stepper::new(g, &params, &vec![S::one(); g.n()], h)?;
    for _ in 0..steps {
        stepper.step()?;
        if stepper.last_change() <= stationary {
            break;
        }
    }
    let k = stepper.steps();
    Ok((stepper.into_state(), k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{erdos_renyi, named_graph, NamedGraph, RngSeed};

    #[test]
    fn complete_graph_steady_state() {
        let g = named_graph(NamedGraph::Complete, 50).unwrap();
        for mode in [SteadyMode::FixedPoint, SteadyMode::LongIntegration] {
            let s = steady_state_report(&g, 0.1f64, mode, 1e-12).unwrap();
            assert!((s.y - (1.0 - 1.0 / 4.9)).abs() < 1e-8, "{mode:?}: {}", s.y);
            assert!(s.v.iter().all(|&x| (x - (1.0 - 1.0 / 4.9)).abs() < 1e-8));
        }
    }

    #[test]
    fn subcritical_is_exact_zero() {
        let g = erdos_renyi(40, 0.2, RngSeed(2)).unwrap();
        let lambda = spectral::<f64>(&g).lambda1;
        let v = steady_state(&g, 0.9 / lambda, SteadyMode::FixedPoint, 1e-12).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        // Exactly at threshold on a cycle.
        let c = named_graph(NamedGraph::Cycle, 50).unwrap();
        assert!(steady_state(&c, 0.5, SteadyMode::FixedPoint, 1e-12)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn star_respects_degree_bound() {
        let g = named_graph(NamedGraph::Star, 50).unwrap();
        let s = steady_state_report(&g, 0.5, SteadyMode::FixedPoint, 1e-12).unwrap();
        assert!(s.residual < 1e-11);
        for i in 0..50 {
            let d = g.degree(i) as f64;
            assert!(s.v[i] <= 1.0 - 1.0 / (1.0 + 0.5 * d) + 1e-12);
        }
    }

    #[test]
    fn near_threshold_converges() {
        let g = erdos_renyi(50, 0.1, RngSeed(8)).unwrap();
        let lambda = spectral::<f64>(&g).lambda1;
        for r0 in [1.001, 1.0001, 1.00001] {
            let s = steady_state_report(&g, r0 / lambda, SteadyMode::FixedPoint, 1e-12).unwrap();
            assert!(s.residual < 1e-11, "R0 {r0}: residual {}", s.residual);
            assert!(s.y > 0.0);
        }
    }

    #[test]
    fn disconnected_mixes_components() {
        // K_10 supercritical, K_2 subcritical at tau = 0.5.
        let g = named_graph(NamedGraph::Complete, 2)
            .unwrap()
            .disjoint_union(&named_graph(NamedGraph::Complete, 10).unwrap());
        let v = steady_state(&g, 0.5f64, SteadyMode::FixedPoint, 1e-12).unwrap();
        assert_eq!(&v[..2], &[0.0, 0.0]);
        assert!(v[2..]
            .iter()
            .all(|&x| (x - (1.0 - 1.0 / 4.5)).abs() < 1e-10));
    }
}
