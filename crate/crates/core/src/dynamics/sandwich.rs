use crate::graphs::Graph;
use crate::linalg::DenseMatrix;
use crate::scalar::{mean, Scalar};

/// Certificate that a trajectory will never again leave a band around `y∞`.
///
/// The NIMFA vector field `f` is cooperative, so a stationary supersolution
/// (`f(U) <= 0`) lying above the current state bounds the whole future
/// trajectory from above, and a stationary subsolution (`f(L) >= 0`) below it
/// bounds it from below. We use `U = min(V∞ + e w, 1)` and
/// `L = max(V∞ - e w, 0)` with a positive direction `w` satisfying `J w <= 0`
/// (`J` the Jacobian at `V∞`). Because `f` is quadratic,
/// `f_i(V∞ ± e w) = res_i ± e (Jw)_i - e² q_i` with `q_i = tau w_i (Aw)_i`,
/// which decides exactly which `e` qualify.
///
/// The bound holds for the exact flow; callers keep a margin for the
/// integrator's discretisation error.
#[derive(Clone, Debug)]
pub struct ConvergenceCertificate<S> {
    v_inf: Vec<S>,
    y_inf: S,
    w: Vec<S>,
    q: Vec<S>,
    jw: Vec<S>,
    res: Vec<S>,
    floor_up: S,
    floor_low: S,
}

impl<S: Scalar> ConvergenceCertificate<S> {
    /// Builds the certificate for `V∞` of the rescaled system; `None` if no
    /// admissible direction is found (for instance `V∞` is not a stable state).
    pub fn new(g: &Graph, tau: S, v_inf: &[S]) -> Option<Self> {
        let n = g.n();
        let mut av_inf = vec![S::zero(); n];
        g.mul_adjacency(v_inf, &mut av_inf);

        let mut w = vec![S::zero(); n];
        for comp in g.connected_components() {
            let local = if comp.nodes.iter().any(|&i| v_inf[i] > S::zero()) {
                let m = comp.nodes.len();
                let mut neg_j = DenseMatrix::zeros(m);
                for (a, &i) in comp.nodes.iter().enumerate() {
                    neg_j.set(a, a, S::one() + tau * av_inf[i]);
                    for b in 0..m {
                        if comp.graph.has_link(a, b) {
                            neg_j.set(a, b, -tau * (S::one() - v_inf[i]));
                        }
                    }
                }
                neg_j.solve(&vec![S::one(); m])?
            } else if comp.graph.links() == 0 {
                vec![S::one(); comp.nodes.len()]
            } else {
                crate::graphs::spectral::connected::<S>(&comp.graph).x1
            };
            for (a, &i) in comp.nodes.iter().enumerate() {
                w[i] = local[a];
            }
        }
        if w.iter().any(|&x| !(x > S::zero()) || !x.is_finite()) {
            return None;
        }

        let mut aw = vec![S::zero(); n];
        g.mul_adjacency(&w, &mut aw);
        let mut q = vec![S::zero(); n];
        let mut jw = vec![S::zero(); n];
        let mut res = vec![S::zero(); n];
        let mut floor_up = S::zero();
        let mut floor_low = S::zero();
        let two = S::lit(2.0);
        let four = S::lit(4.0);
        for i in 0..n {
            q[i] = tau * w[i] * aw[i];
            jw[i] = -(S::one() + tau * av_inf[i]) * w[i] + tau * (S::one() - v_inf[i]) * aw[i];
            res[i] = -v_inf[i] + tau * (S::one() - v_inf[i]) * av_inf[i];
            // Smallest e >= 0 with q e² - jw e - res >= 0.
            let floor = if q[i] > S::zero() {
                let disc = jw[i] * jw[i] + four * q[i] * res[i];
                if disc < S::zero() {
                    S::zero()
                } else {
                    ((jw[i] + disc.sqrt()) / (two * q[i])).max(S::zero())
                }
            } else if jw[i] < S::zero() {
                (res[i] / -jw[i]).max(S::zero())
            } else if res[i] <= S::zero() && jw[i] == S::zero() {
                S::zero()
            } else {
                return None;
            };
            floor_up = floor_up.max(floor);
            // Smallest e >= 0 with res - e jw - e² q >= 0, needed when round-off
            // leaves res slightly negative.
            if v_inf[i] > S::zero() && res[i] < S::zero() {
                let disc = jw[i] * jw[i] + four * q[i] * res[i];
                if disc < S::zero() || jw[i] >= S::zero() {
                    return None;
                }
                let root = if q[i] > S::zero() {
                    (-jw[i] - disc.sqrt()) / (two * q[i])
                } else {
                    res[i] / jw[i]
                };
                // Doubled so the check in `band` is not decided by round-off at the root.
                floor_low = floor_low.max(two * root);
            }
        }
        Some(ConvergenceCertificate {
            y_inf: mean(v_inf),
            v_inf: v_inf.to_vec(),
            w,
            q,
            jw,
            res,
            floor_up,
            floor_low,
        })
    }

    pub fn y_inf(&self) -> S {
        self.y_inf
    }

    /// A bound `B` with `|y(s) - y∞| <= B` for every `s` at or after the time
    /// the trajectory is in state `v`; `None` if no bound can be certified yet.
    pub fn band(&self, v: &[S]) -> Option<S> {
        let mut e_plus = S::zero();
        let mut e_minus = S::zero();
        for ((&x, &vi), &wi) in v.iter().zip(&self.v_inf).zip(&self.w) {
            e_plus = e_plus.max((x - vi) / wi);
            e_minus = e_minus.max((vi - x) / wi);
        }
        let e_up = e_plus.max(self.floor_up);
        let e_low = e_minus.max(self.floor_low);
        let mut upper = S::zero();
        let mut lower = S::zero();
        for i in 0..v.len() {
            upper += (self.v_inf[i] + e_up * self.w[i]).min(S::one());
            let l = self.v_inf[i] - e_low * self.w[i];
            if l > S::zero() {
                // The lower piece is active here and must be a subsolution.
                let f = self.res[i] - e_low * self.jw[i] - e_low * e_low * self.q[i];
                if f < S::zero() {
                    return None;
                }
                lower += l;
            }
        }
        let nn = S::from_usize_lossy(v.len());
        Some(
            (upper / nn - self.y_inf)
                .max(self.y_inf - lower / nn)
                .max(S::zero()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{steady_state, EpidemicParams, Rk4Stepper, SteadyMode};
    use crate::graphs::{erdos_renyi, named_graph, NamedGraph, RngSeed};

    /// Once a band is certified, every later sample must lie inside it.
    fn check_future(g: &Graph, tau: f64, v0: &[f64], check_at: usize, t_total: usize) {
        let v_inf = steady_state(g, tau, SteadyMode::FixedPoint, 1e-12).unwrap();
        let cert = ConvergenceCertificate::new(g, tau, &v_inf).expect("certificate");
        let p = EpidemicParams::rescaled(tau).unwrap();
        let mut st = Rk4Stepper::new(g, &p, v0, 0.01).unwrap();
        let mut band = None;
        for k in 0..t_total {
            if k >= check_at && band.is_none() {
                band = cert.band(st.state());
            }
            if let Some(b) = band {
                assert!(
                    (st.prevalence() - cert.y_inf()).abs() <= b + 1e-10,
                    "step {k}"
                );
            }
            st.step().unwrap();
        }
        assert!(band.is_some());
    }

    #[test]
    fn band_contains_future_supercritical() {
        let g = erdos_renyi(40, 0.15, RngSeed(11)).unwrap();
        check_future(&g, 0.3, &vec![1.0; 40], 300, 3000);
        check_future(&g, 0.3, &vec![1e-3; 40], 500, 4000);
    }

    #[test]
    fn band_contains_future_subcritical_and_threshold() {
        let g = erdos_renyi(40, 0.15, RngSeed(11)).unwrap();
        check_future(&g, 0.05, &vec![1.0; 40], 100, 2000);
        let k = named_graph(NamedGraph::Complete, 30).unwrap();
        check_future(&k, 1.0 / 29.0, &vec![1.0; 30], 200, 3000);
    }

    #[test]
    fn band_shrinks_to_zero_at_steady_state() {
        let g = named_graph(NamedGraph::Complete, 20).unwrap();
        let v = steady_state(&g, 0.2, SteadyMode::FixedPoint, 1e-12).unwrap();
        let cert = ConvergenceCertificate::new(&g, 0.2, &v).unwrap();
        assert!(cert.band(&v).unwrap() < 1e-12);
    }
}
