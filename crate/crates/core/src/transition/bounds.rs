//! Closed-form upper and lower bounds on the upper-transition time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{spectral, Graph};
use crate::scalar::Scalar;

fn check_r<S: Scalar>(r: S) -> Result<()> {
    if r > S::zero() && r < S::one() {
        Ok(())
    } else {
        Err(Error::param("r", format!("must lie in (0, 1), got {r}")))
    }
}

/// `(1 - r) / r`: time for the threshold-case prevalence `1/(1+t)` to reach `r`.
pub fn bound_decay_conjecture<S: Scalar>(r: S) -> Result<S> {
    check_r(r)?;
    Ok((S::one() - r) / r)
}

/// `ln(1/r) / (1 - R0)` for a subcritical `R0`.
pub fn bound_decay_exponential_r0<S: Scalar>(r0: S, r: S) -> Result<S> {
    if !(r > S::zero() && r <= S::one()) {
        return Err(Error::param("r", format!("must lie in (0, 1], got {r}")));
    }
    if !(r0 < S::one()) || r0 < S::zero() {
        return Err(Error::Domain(format!(
            "exponential decay bound needs 0 <= R0 < 1, got {r0}"
        )));
    }
    Ok((S::one() / r).ln() / (S::one() - r0))
}

pub fn bound_decay_exponential<S: Scalar>(g: &Graph, tau: S, r: S) -> Result<S> {
    bound_decay_exponential_r0(tau * spectral::<S>(g).lambda1, r)
}

/// `R0` at which the exponential and the `(1-r)/r` decay bounds coincide.
pub fn bound_intersection<S: Scalar>(r: S) -> Result<S> {
    check_r(r)?;
    Ok(S::one() - r / (S::one() - r) * (S::one() / r).ln())
}

/// Growth bound from the largest-degree estimate of the steady state:
/// `2/(R0-1) ln(tau d_max / (r (tau d_max + 1)) - 1)`, or 0 when the
/// logarithm's argument is at most 1 (the steady state is then within `r` of
/// the initial state `r u` at the most infected node).
pub fn bound_growth_from<S: Scalar>(r0: S, tau: S, d_max: usize, r: S) -> Result<S> {
    check_r(r)?;
    if !(r0 > S::one()) {
        return Err(Error::Domain(format!(
            "growth bound needs R0 > 1, got {r0}"
        )));
    }
    let td = tau * S::from_usize_lossy(d_max);
    let arg = td / (r * (td + S::one())) - S::one();
    if !(arg > S::one()) {
        return Ok(S::zero());
    }
    Ok(S::lit(2.0) / (r0 - S::one()) * arg.ln())
}

/// The growth bound before the steady state is replaced by its degree
/// estimate: `2/(R0-1) ln((v_max - r)/r)` with `v_max` the largest steady-state
/// entry; 0 when `v_max <= 2r`.
pub fn bound_growth_first_form<S: Scalar>(r0: S, v_inf_max: S, r: S) -> Result<S> {
    check_r(r)?;
    if !(r0 > S::one()) {
        return Err(Error::Domain(format!(
            "growth bound needs R0 > 1, got {r0}"
        )));
    }
    let arg = (v_inf_max - r) / r;
    if !(arg > S::one()) {
        return Ok(S::zero());
    }
    Ok(S::lit(2.0) / (r0 - S::one()) * arg.ln())
}

/// Growth bound of a connected supercritical graph.
pub fn bound_growth<S: Scalar>(g: &Graph, tau: S, r: S) -> Result<S> {
    if !g.is_connected() {
        return Err(Error::Domain(
            "growth bound needs a connected graph; use the combined bound".into(),
        ));
    }
    let r0 = tau * spectral::<S>(g).lambda1;
    bound_growth_from(r0, tau, g.max_degree(), r)
}

/// Branch used for supercritical components in [`combined_upper_bound`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinedVariant {
    /// `max((1-r)/r, growth bound)`: covers decay from `u` as well as growth.
    #[default]
    Standard,
    /// Growth bound alone, for sequences where every interval starts from a
    /// previous steady state or the die-out floor.
    GrowthOnly,
}

/// Combined bound of one connected graph with reproduction number `r0`.
pub fn combined_bound_connected<S: Scalar>(
    r0: S,
    tau: S,
    d_max: usize,
    r: S,
    variant: CombinedVariant,
) -> Result<S> {
    let conj = bound_decay_conjecture(r)?;
    if r0 <= bound_intersection(r)? {
        bound_decay_exponential_r0(r0, r)
    } else if r0 <= S::one() {
        Ok(conj)
    } else {
        let growth = bound_growth_from(r0, tau, d_max, r)?;
        Ok(match variant {
            CombinedVariant::Standard => conj.max(growth),
            CombinedVariant::GrowthOnly => growth,
        })
    }
}

/// Maximum of the per-component combined bounds.
pub fn combined_upper_bound<S: Scalar>(
    g: &Graph,
    tau: S,
    r: S,
    variant: CombinedVariant,
) -> Result<S> {
    check_r(r)?;
    let mut best = S::zero();
    for comp in g.connected_components() {
        let lambda = spectral::<S>(&comp.graph).lambda1;
        let b = combined_bound_connected(tau * lambda, tau, comp.graph.max_degree(), r, variant)?;
        best = best.max(b);
    }
    Ok(best)
}

/// Combined bound of a graph sequence: the maximum over its graphs.
pub fn combined_upper_bound_sequence<S: Scalar>(
    graphs: &[Graph],
    tau: S,
    r: S,
    variant: CombinedVariant,
) -> Result<S> {
    graphs.iter().try_fold(S::zero(), |m, g| {
        Ok(m.max(combined_upper_bound(g, tau, r, variant)?))
    })
}

/// Lower bound for growth from `r u`: `ln((y∞ - r)/r) / (R0 - 1)`, 0 if `y∞ <= 2r`.
pub fn lower_bound_growth<S: Scalar>(r0: S, y_inf: S, r: S) -> Result<S> {
    check_r(r)?;
    if !(r0 > S::one()) {
        return Err(Error::Domain(format!(
            "growth lower bound needs R0 > 1, got {r0}"
        )));
    }
    let arg = (y_inf - r) / r;
    if !(arg > S::one()) {
        return Ok(S::zero());
    }
    Ok(arg.ln() / (r0 - S::one()))
}

/// Lower bound for decay from `u`: `ln(1/(y∞ + r))`, floored at 0.
pub fn lower_bound_decay<S: Scalar>(y_inf: S, r: S) -> Result<S> {
    check_r(r)?;
    Ok((S::one() / (y_inf + r)).ln().max(S::zero()))
}

/// Initial level `e` such that the run from `e u` stays more than `r` away
/// from `y∞` for a time `t_delay`: `e = (y∞ - r) exp(-(tau N - 1) t_delay)`.
pub fn lemma1_epsilon<S: Scalar>(y_inf: S, tau: S, n: usize, r: S, t_delay: S) -> Result<S> {
    if !(r < y_inf) {
        return Err(Error::Domain(format!(
            "need r < y_inf, got r = {r}, y_inf = {y_inf}"
        )));
    }
    if !(t_delay >= S::zero()) {
        return Err(Error::param("T", format!("must be >= 0, got {t_delay}")));
    }
    let rate = tau * S::from_usize_lossy(n) - S::one();
    Ok((y_inf - r) * (-rate * t_delay).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{named_graph, NamedGraph};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn decay_bounds() {
        assert!(close(bound_decay_conjecture(1e-4).unwrap(), 9999.0, 1e-9));
        assert_eq!(bound_decay_conjecture(0.5).unwrap(), 1.0);
        assert!(bound_decay_conjecture(1.0 - 1e-12).unwrap() < 1e-11);
        assert!(bound_decay_conjecture(0.0).is_err());
        assert!(close(
            bound_decay_exponential_r0(0.5, 1e-4).unwrap(),
            18.420_680_743_952_367,
            1e-9
        ));
        assert!(close(
            bound_decay_exponential_r0(0.0, 1e-4).unwrap(),
            9.210_340_371_976_184,
            1e-9
        ));
        assert_eq!(bound_decay_exponential_r0(0.3, 1.0).unwrap(), 0.0);
        assert!(bound_decay_exponential_r0(1.0, 1e-4).is_err());
    }

    #[test]
    fn intersection() {
        let x = bound_intersection(1e-4).unwrap();
        assert!(close(x, 0.999_078_873_850_187_5, 1e-12), "{x}");
        assert!(close(x, 0.999_078_9, 1e-7));
        assert!(1.0 - bound_intersection(1e-12).unwrap() < 1e-10);
        for r in [1e-1, 1e-2, 1e-3, 1e-4, 1e-6] {
            let x = bound_intersection(r).unwrap();
            let a = bound_decay_exponential_r0(x, r).unwrap();
            let b = bound_decay_conjecture(r).unwrap();
            assert!(close(a, b, 1e-9 * b.max(1.0)), "r {r}: {a} vs {b}");
        }
    }

    #[test]
    fn growth_bound_value() {
        let v = bound_growth_from(2.0, 0.1, 49, 1e-4).unwrap();
        let expect = 2.0 * (4.9f64 / (1e-4 * 5.9) - 1.0).ln();
        assert!(close(v, expect, 1e-12));
        assert!(close(v, 18.049, 1e-3));
        // tau d / (tau d + 1) <= 2r: nothing to grow.
        assert_eq!(bound_growth_from(1.5, 1e-4, 1, 1e-4).unwrap(), 0.0);
        assert!(bound_growth_from(1.0, 0.1, 49, 1e-4).is_err());
        let split = named_graph(NamedGraph::Complete, 3)
            .unwrap()
            .disjoint_union(&named_graph(NamedGraph::Complete, 3).unwrap());
        assert!(bound_growth(&split, 2.0, 1e-4).is_err());
    }

    #[test]
    fn combined_bound_branches() {
        let e = crate::graphs::Graph::empty(5).unwrap();
        let v = combined_upper_bound(&e, 0.3, 1e-4, CombinedVariant::Standard).unwrap();
        assert!(close(v, 9.210_340_371_976_184, 1e-9));
        // K_5 (lambda 4) and K_3 (lambda 2) at tau = 0.1: both subcritical.
        let g = named_graph(NamedGraph::Complete, 5)
            .unwrap()
            .disjoint_union(&named_graph(NamedGraph::Complete, 3).unwrap());
        let v = combined_upper_bound(&g, 0.1, 1e-4, CombinedVariant::Standard).unwrap();
        let expect = bound_decay_exponential_r0(0.4f64, 1e-4)
            .unwrap()
            .max(bound_decay_exponential_r0(0.2, 1e-4).unwrap());
        assert!(close(v, expect, 1e-9));
        let k = named_graph(NamedGraph::Complete, 50).unwrap();
        let std = combined_upper_bound(&k, 0.1, 1e-4, CombinedVariant::Standard).unwrap();
        let growth = combined_upper_bound(&k, 0.1, 1e-4, CombinedVariant::GrowthOnly).unwrap();
        assert!(close(std, 9999.0, 1e-9));
        assert!(close(
            growth,
            2.0 / 3.9 * (4.9f64 / (1e-4 * 5.9) - 1.0).ln(),
            1e-9
        ));
    }

    #[test]
    fn lower_bounds() {
        let lg = lower_bound_growth(2.0, 0.5, 1e-4).unwrap();
        assert!(close(lg, 4999f64.ln(), 1e-12));
        assert!(close(lg, 8.5170, 1e-4));
        assert!(close(
            lower_bound_growth(2.0, 2e-4, 1e-4).unwrap(),
            0.0,
            1e-12
        ));
        assert!(lower_bound_growth(1.0, 0.5, 1e-4).is_err());
        assert!(close(
            lower_bound_decay(0.0, 1e-4).unwrap(),
            9.210_340_371_976_184,
            1e-9
        ));
        assert_eq!(lower_bound_decay(0.99995, 1e-4).unwrap(), 0.0);
    }

    #[test]
    fn lemma1_algebra() {
        let y = 1.0 - 1.0 / 4.9;
        assert!(close(
            lemma1_epsilon(y, 0.1, 50, 1e-4, 0.0).unwrap(),
            y - 1e-4,
            1e-15
        ));
        let t = 0.3;
        let a = lemma1_epsilon(y, 0.1, 50, 1e-4, t).unwrap();
        let b = lemma1_epsilon(y, 0.1, 50, 1e-4, 2.0 * t).unwrap();
        assert!(close(b / a, (-4.0f64 * t).exp(), 1e-14));
        assert!(lemma1_epsilon(1e-5, 0.1, 50, 1e-4, 1.0).is_err());
    }
}
