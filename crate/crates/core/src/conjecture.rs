//! Checks of the decay envelope `|y(t) - y∞| <= 1/(1+t)` from `V(0) = u` and
//! of the eigenvector-projection inequalities behind it, with reproducible
//! counterexample bundles for any failure.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::Rk4Stepper;
use crate::error::{Error, Result};
use crate::graphs::{spectral, Graph};
use crate::scalar::{dot, Scalar};
use crate::transition::StaticProblem;

/// Residual allowance for discretisation error.
pub const SLACK: f64 = 1e-9;

/// Outcome of [`check_decay_envelope`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheckResult<S> {
    pub graph_id: String,
    /// `tau` in units of `1/(N-1)`.
    pub tau_multiplier: S,
    /// Upper estimate of `max_t (|y(t) - y∞| - 1/(1+t))`.
    pub max_excess: S,
    pub argmax_t: S,
    pub pass: bool,
}

/// Integrates from `u` and tracks `|y(t) - y∞| - 1/(1+t)` on `[0, t_end]`.
///
/// Once the convergence certificate bounds every later deviation by
/// `1/(1+t_end)` the run stops; the reported maximum then also covers the
/// skipped samples.
pub fn check_decay_envelope<S: Scalar>(
    g: &Graph,
    tau: S,
    h: S,
    t_end: S,
    graph_id: impl Into<String>,
) -> Result<DecayCheckResult<S>> {
    let problem = StaticProblem::new(g, tau)?;
    let y_inf = problem.y_inf();
    let steps = crate::dynamics::steps_for(t_end, h)?;
    let env_end = S::one() / (S::one() + t_end);
    let mut st = Rk4Stepper::new(g, problem.params(), &vec![S::one(); g.n()], h)?;
    let mut max_excess = S::neg_infinity();
    let mut argmax_t = S::zero();
    let cert = crate::dynamics::ConvergenceCertificate::new(g, tau, &problem.steady.v);
    for k in 0..=steps {
        if k > 0 {
            st.step()?;
        }
        let t = st.t();
        let excess = (st.prevalence() - y_inf).abs() - S::one() / (S::one() + t);
        if excess > max_excess {
            max_excess = excess;
            argmax_t = t;
        }
        if k % 50 == 0 {
            if let Some(b) = cert.as_ref().and_then(|c| c.band(st.state())) {
                if b <= env_end {
                    if b - env_end > max_excess {
                        max_excess = b - env_end;
                        argmax_t = t;
                    }
                    break;
                }
            }
        }
    }
    let n1 = S::from_usize_lossy(g.n().max(2) - 1);
    Ok(DecayCheckResult {
        graph_id: graph_id.into(),
        tau_multiplier: tau * n1,
        max_excess,
        argmax_t,
        pass: max_excess <= S::lit(SLACK),
    })
}

/// `(t, |y(t) - y∞| - 1/(1+t))` on every sample, for counterexample files.
pub fn decay_envelope_series<S: Scalar>(g: &Graph, tau: S, h: S, t_end: S) -> Result<Vec<(S, S)>> {
    let problem = StaticProblem::new(g, tau)?;
    let y_inf = problem.y_inf();
    let steps = crate::dynamics::steps_for(t_end, h)?;
    let mut st = Rk4Stepper::new(g, problem.params(), &vec![S::one(); g.n()], h)?;
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        if k > 0 {
            st.step()?;
        }
        let t = st.t();
        out.push((
            t,
            (st.prevalence() - y_inf).abs() - S::one() / (S::one() + t),
        ));
    }
    Ok(out)
}

/// Largest residuals of the projection inequalities, with
/// `c(t) = x1ᵀV(t)` and `ξ(t) = V(t) - c(t) x1`. Each must be `<= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResiduals<S> {
    /// `c(t) - c(0)/(1+t)`.
    pub coefficient: S,
    /// `‖ξ(t)‖ - ‖ξ(0)‖/(1+t)`.
    pub orthogonal: S,
    /// `max(N y(t) - m(t), m(t) - N/(1+t)) / N` with
    /// `m(t) = c(0)c(t) + ‖ξ(0)‖‖ξ(t)‖`, i.e. in prevalence units.
    pub chain: S,
    /// `max_t ‖ξ(t)‖`, zero for regular graphs.
    pub max_xi_norm: S,
    pub c0: S,
    pub xi0_norm: S,
}

impl<S: Scalar> ProjectionResiduals<S> {
    pub fn pass(&self) -> bool {
        let slack = S::lit(SLACK);
        self.coefficient <= slack && self.orthogonal <= slack && self.chain <= slack
    }
}

/// Per-sample projection quantities `(t, c(t), ‖ξ(t)‖, N y(t))` on a connected graph.
fn projection_samples<S: Scalar>(
    g: &Graph,
    tau: S,
    h: S,
    t_end: S,
    mut visit: impl FnMut(S, S, S, S),
) -> Result<()> {
    if !g.is_connected() {
        return Err(Error::Domain(
            "projection checks need a connected graph".into(),
        ));
    }
    let x1 = spectral::<S>(g).x1;
    let params = crate::dynamics::EpidemicParams::rescaled(tau)?;
    let steps = crate::dynamics::steps_for(t_end, h)?;
    let mut st = Rk4Stepper::new(g, &params, &vec![S::one(); g.n()], h)?;
    for k in 0..=steps {
        if k > 0 {
            st.step()?;
        }
        let v = st.state();
        let c = dot(&x1, v);
        let xi = v
            .iter()
            .zip(&x1)
            .map(|(&vi, &xi)| (vi - c * xi) * (vi - c * xi))
            .sum::<S>()
            .sqrt();
        let ny = v.iter().copied().sum::<S>();
        visit(st.t(), c, xi, ny);
    }
    Ok(())
}

pub fn check_projection_inequalities<S: Scalar>(
    g: &Graph,
    tau: S,
    h: S,
    t_end: S,
) -> Result<ProjectionResiduals<S>> {
    let n = S::from_usize_lossy(g.n());
    let mut first: Option<(S, S)> = None;
    let neg = S::neg_infinity();
    let mut out = ProjectionResiduals {
        coefficient: neg,
        orthogonal: neg,
        chain: neg,
        max_xi_norm: S::zero(),
        c0: S::zero(),
        xi0_norm: S::zero(),
    };
    projection_samples(g, tau, h, t_end, |t, c, xi, ny| {
        let (c0, xi0) = *first.get_or_insert((c, xi));
        let decay = S::one() / (S::one() + t);
        let mid = c0 * c + xi0 * xi;
        out.coefficient = out.coefficient.max(c - c0 * decay);
        out.orthogonal = out.orthogonal.max(xi - xi0 * decay);
        out.chain = out.chain.max((ny - mid).max(mid - n * decay) / n);
        out.max_xi_norm = out.max_xi_norm.max(xi);
    })?;
    let (c0, xi0) = first.expect("at least one sample");
    out.c0 = c0;
    out.xi0_norm = xi0;
    Ok(out)
}

/// `(t, coefficient, orthogonal, chain)` residuals on every sample.
pub fn projection_series<S: Scalar>(g: &Graph, tau: S, h: S, t_end: S) -> Result<Vec<[S; 4]>> {
    let n = S::from_usize_lossy(g.n());
    let mut first: Option<(S, S)> = None;
    let mut rows = Vec::new();
    projection_samples(g, tau, h, t_end, |t, c, xi, ny| {
        let (c0, xi0) = *first.get_or_insert((c, xi));
        let decay = S::one() / (S::one() + t);
        let mid = c0 * c + xi0 * xi;
        rows.push([
            t,
            c - c0 * decay,
            xi - xi0 * decay,
            (ny - mid).max(mid - n * decay) / n,
        ]);
    })?;
    Ok(rows)
}

/// Everything needed to rerun a failed check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Counterexample {
    pub check: String,
    pub graph_id: String,
    pub seed: Option<u64>,
    pub tau: f64,
    pub h: f64,
    pub t_end: f64,
    pub max_residual: f64,
}

/// Writes `edges.txt`, `params.json` and `residuals.csv` into
/// `root/<check>-<graph_id>` and returns that directory.
pub fn write_counterexample(
    root: &Path,
    g: &Graph,
    cx: &Counterexample,
    header: &[&str],
    rows: &[Vec<f64>],
) -> Result<PathBuf> {
    let safe: String = format!("{}-{}", cx.check, cx.graph_id)
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    let dir = root.join(safe);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("edges.txt"), g.to_edge_list())?;
    std::fs::write(dir.join("params.json"), serde_json::to_string_pretty(cx)?)?;
    let header: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    let mut csv =
        crate::io::FloatCsv::new(std::fs::File::create(dir.join("residuals.csv"))?, &header)?;
    for row in rows {
        csv.row(row.iter().copied())?;
    }
    csv.finish()?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{erdos_renyi, named_graph, NamedGraph, RngSeed};

    #[test]
    fn complete_graph_threshold_is_equality_case() {
        let g = named_graph(NamedGraph::Complete, 50).unwrap();
        let r = check_decay_envelope(&g, 1.0f64 / 49.0, 0.01, 200.0, "k50").unwrap();
        assert!(r.max_excess.abs() < 1e-6, "{}", r.max_excess);
    }

    #[test]
    fn envelope_holds_on_examples() {
        let tc = 1.0 / 49.0;
        let er = erdos_renyi(50, 0.3, RngSeed(1)).unwrap();
        assert!(
            check_decay_envelope(&er, 5.0 * tc, 0.01, 1e4, "er")
                .unwrap()
                .pass
        );
        let star = named_graph(NamedGraph::Star, 50).unwrap();
        assert!(
            check_decay_envelope(&star, 2.0 * tc, 0.01, 1e4, "star")
                .unwrap()
                .pass
        );
    }

    #[test]
    fn cycle_at_threshold_stays_on_principal_direction() {
        let g = named_graph(NamedGraph::Cycle, 50).unwrap();
        let p = check_projection_inequalities(&g, 0.5f64, 0.01, 100.0).unwrap();
        assert!(p.max_xi_norm < 1e-10);
        assert!(p.pass(), "{p:?}");
        let mut worst = 0.0f64;
        projection_samples(&g, 0.5, 0.01, 100.0, |t, c, _, _| {
            worst = worst.max((c - 50f64.sqrt() / (1.0 + t)).abs());
        })
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn initial_split_is_orthogonal() {
        let g = erdos_renyi(30, 0.3, RngSeed(2)).unwrap();
        assert!(g.is_connected());
        let p = check_projection_inequalities(&g, 1.0f64 / 29.0, 0.01, 1.0).unwrap();
        assert!((p.xi0_norm.powi(2) - (30.0 - p.c0 * p.c0)).abs() < 1e-10);
        let split = g.disjoint_union(&g);
        assert!(check_projection_inequalities(&split, 0.1, 0.01, 1.0).is_err());
    }

    #[test]
    fn bundle_layout() {
        let dir = tempfile::tempdir().unwrap();
        let g = named_graph(NamedGraph::Path, 3).unwrap();
        let cx = Counterexample {
            check: "envelope".into(),
            graph_id: "p/3".into(),
            seed: Some(1),
            tau: 0.5,
            h: 0.01,
            t_end: 1.0,
            max_residual: 1e-3,
        };
        let out = write_counterexample(dir.path(), &g, &cx, &["t", "excess"], &[vec![0.0, -1.0]])
            .unwrap();
        assert!(out.ends_with("envelope-p_3"));
        let edges = std::fs::read_to_string(out.join("edges.txt")).unwrap();
        assert_eq!(Graph::parse_edge_list(&edges).unwrap(), g);
        let back: Counterexample =
            serde_json::from_str(&std::fs::read_to_string(out.join("params.json")).unwrap())
                .unwrap();
        assert_eq!(back.graph_id, "p/3");
        assert!(std::fs::read_to_string(out.join("residuals.csv"))
            .unwrap()
            .starts_with("t,excess\n"));
    }
}
