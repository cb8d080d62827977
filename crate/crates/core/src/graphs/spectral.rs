use super::{Component, Graph};
use crate::scalar::{dot, norm2, Scalar};

const MAX_ITERATIONS: usize = 100_000;
const STAGNATION_WINDOW: usize = 10_000;

/// Largest adjacency eigenvalue and its non-negative unit eigenvector.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData<S> {
    pub lambda1: S,
    pub x1: Vec<S>,
    /// Set for graphs without links, where `x1` is the uniform vector by convention.
    pub degenerate: bool,
    /// `‖A·x1 − lambda1·x1‖₂` at exit.
    pub residual: S,
    pub iterations: usize,
    pub converged: bool,
}

impl<S: Scalar> SpectralData<S> {
    /// Stopping threshold on the eigen-residual.
    pub fn tolerance(lambda1: S) -> S {
        let tol = S::lit(1e-12).max(S::lit(1e3) * S::epsilon());
        tol * lambda1.max(S::one())
    }
}

/// Spectral data of `g`. For disconnected graphs `lambda1` is the maximum over
/// components and `x1` lives on the first component attaining it.
pub fn spectral<S: Scalar>(g: &Graph) -> SpectralData<S> {
    if g.links() == 0 {
        return uniform(g.n(), S::zero(), true);
    }
    if g.is_connected() {
        return connected(g);
    }
    let mut best: Option<(Component, SpectralData<S>)> = None;
    for comp in g.connected_components() {
        let sd = connected::<S>(&comp.graph);
        if best.as_ref().map_or(true, |(_, b)| sd.lambda1 > b.lambda1) {
            best = Some((comp, sd));
        }
    }
    let (comp, sd) = best.expect("graph has at least one component");
    let mut x1 = vec![S::zero(); g.n()];
    for (local, &global) in comp.nodes.iter().enumerate() {
        x1[global] = sd.x1[local];
    }
    SpectralData { x1, ..sd }
}

fn uniform<S: Scalar>(n: usize, lambda1: S, degenerate: bool) -> SpectralData<S> {
    let x = S::one() / S::from_usize_lossy(n).sqrt();
    SpectralData {
        lambda1,
        x1: vec![x; n],
        degenerate,
        residual: S::zero(),
        iterations: 0,
        converged: true,
    }
}

/// Power iteration on `A + I` for a connected graph. The shift makes the
/// Perron root strictly dominant even for bipartite graphs, where plain power
/// iteration would oscillate between `±lambda1`.
pub(crate) fn connected<S: Scalar>(g: &Graph) -> SpectralData<S> {
    let n = g.n();
    if g.is_regular() {
        return uniform(n, S::from_usize_lossy(g.degree(0)), g.links() == 0);
    }
    let mut x = vec![S::one(); n];
    x[0] += S::lit(1e-3);
    normalise(&mut x);
    let mut ax = vec![S::zero(); n];
    let mut lambda = S::zero();
    let mut residual = S::infinity();
    let mut best_in_window = S::infinity();
    let mut restarts = 0;
    for it in 1..=MAX_ITERATIONS {
        g.mul_adjacency(&x, &mut ax);
        lambda = dot(&x, &ax);
        residual = ax
            .iter()
            .zip(&x)
            .map(|(&a, &b)| (a - lambda * b) * (a - lambda * b))
            .sum::<S>()
            .sqrt();
        if residual <= SpectralData::<S>::tolerance(lambda) {
            return SpectralData {
                lambda1: lambda,
                x1: x,
                degenerate: false,
                residual,
                iterations: it,
                converged: true,
            };
        }
        if it % STAGNATION_WINDOW == 0 {
            if residual > best_in_window * S::lit(0.5) {
                // No progress over a whole window: restart from a perturbed copy.
                restarts += 1;
                x[restarts % n] += S::lit(1e-3);
            }
            best_in_window = residual;
        }
        for (xi, &a) in x.iter_mut().zip(&ax) {
            *xi += a;
        }
        normalise(&mut x);
    }
    SpectralData {
        lambda1: lambda,
        x1: x,
        degenerate: false,
        residual,
        iterations: MAX_ITERATIONS,
        converged: false,
    }
}

fn normalise<S: Scalar>(x: &mut [S]) {
    let norm = norm2(x);
    for v in x.iter_mut() {
        *v /= norm;
    }
}
