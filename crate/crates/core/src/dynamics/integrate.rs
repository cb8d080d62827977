use super::{derivative_into, validate_state, EpidemicParams, Trajectory};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::scalar::Scalar;

/// Clamps larger than this abort the run.
pub(crate) fn clamp_abort_threshold<S: Scalar>() -> S {
    S::lit(1e-9).max(S::lit(8.0) * S::epsilon())
}

/// Clamps up to this size are rounding noise.
pub(crate) fn clamp_valid_threshold<S: Scalar>() -> S {
    S::lit(1e-12).max(S::lit(2.0) * S::epsilon())
}

/// Number of steps of size `h` covering `[0, t_end]`. A `t_end` within
/// `1e-6` steps of a grid point lands on it; otherwise the count rounds up.
pub fn steps_for<S: Scalar>(t_end: S, h: S) -> Result<usize> {
    if !(h > S::zero()) || !h.is_finite() {
        return Err(Error::param("h", format!("step must be positive, got {h}")));
    }
    if !(t_end >= S::zero()) || !t_end.is_finite() {
        return Err(Error::param(
            "t_end",
            format!("must be finite and >= 0, got {t_end}"),
        ));
    }
    let q = (t_end / h).as_f64();
    let r = q.round();
    let steps = if (q - r).abs() <= 1e-6 { r } else { q.ceil() };
    Ok(steps as usize)
}

/// Classic fixed-step fourth-order Runge–Kutta for the NIMFA system.
///
/// After each step the state is clamped to `[0, 1]`; the largest clamp is
/// recorded and anything above `1e-9` is treated as a failure. Sample times are
/// `t0 + k h` so long runs accumulate no drift in `t`.
pub struct Rk4Stepper<'g, S> {
    graph: &'g Graph,
    beta: S,
    delta: S,
    h: S,
    t0: S,
    k: usize,
    v: Vec<S>,
    k1: Vec<S>,
    k2: Vec<S>,
    k3: Vec<S>,
    k4: Vec<S>,
    tmp: Vec<S>,
    av: Vec<S>,
    max_clamp: S,
    last_change: S,
}

impl<'g, S: Scalar> Rk4Stepper<'g, S> {
    pub fn new(graph: &'g Graph, params: &EpidemicParams<S>, v0: &[S], h: S) -> Result<Self> {
        validate_state(graph, v0)?;
        if !(h > S::zero()) || !h.is_finite() {
            return Err(Error::param("h", format!("step must be positive, got {h}")));
        }
        let n = graph.n();
        Ok(Rk4Stepper {
            graph,
            beta: params.beta,
            delta: params.delta,
            h,
            t0: S::zero(),
            k: 0,
            v: v0.to_vec(),
            k1: vec![S::zero(); n],
            k2: vec![S::zero(); n],
            k3: vec![S::zero(); n],
            k4: vec![S::zero(); n],
            tmp: vec![S::zero(); n],
            av: vec![S::zero(); n],
            max_clamp: S::zero(),
            last_change: S::zero(),
        })
    }

    pub fn with_start_time(mut self, t0: S) -> Self {
        self.t0 = t0;
        self
    }

    /// Switches the vector field to another graph on the same nodes; the state
    /// and clock carry over unchanged.
    pub fn set_graph(&mut self, graph: &'g Graph) -> Result<()> {
        if graph.n() != self.graph.n() {
            return Err(Error::DimensionMismatch {
                expected: self.graph.n(),
                found: graph.n(),
            });
        }
        self.graph = graph;
        Ok(())
    }

    #[inline]
    pub fn t(&self) -> S {
        self.t0 + S::from_usize_lossy(self.k) * self.h
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn h(&self) -> S {
        self.h
    }

    #[inline]
    pub fn state(&self) -> &[S] {
        &self.v
    }

    pub fn prevalence(&self) -> S {
        super::prevalence(&self.v)
    }

    pub fn max_clamp(&self) -> S {
        self.max_clamp
    }

    /// `max_i |v_i(t) - v_i(t - h)|` over the most recent step.
    pub fn last_change(&self) -> S {
        self.last_change
    }

    pub fn step(&mut self) -> Result<()> {
        let (g, b, d, h) = (self.graph, self.beta, self.delta, self.h);
        let half = h * S::lit(0.5);
        derivative_into(g, b, d, &self.v, &mut self.av, &mut self.k1);
        axpy(&mut self.tmp, &self.v, half, &self.k1);
        derivative_into(g, b, d, &self.tmp, &mut self.av, &mut self.k2);
        axpy(&mut self.tmp, &self.v, half, &self.k2);
        derivative_into(g, b, d, &self.tmp, &mut self.av, &mut self.k3);
        axpy(&mut self.tmp, &self.v, h, &self.k3);
        derivative_into(g, b, d, &self.tmp, &mut self.av, &mut self.k4);

        self.k += 1;
        let sixth = h / S::lit(6.0);
        let two = S::lit(2.0);
        let mut clamp = S::zero();
        let mut change = S::zero();
        for i in 0..self.v.len() {
            let old = self.v[i];
            let mut x =
                old + sixth * (self.k1[i] + two * self.k2[i] + two * self.k3[i] + self.k4[i]);
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    t: self.t().as_f64(),
                });
            }
            if x < S::zero() {
                clamp = clamp.max(-x);
                x = S::zero();
            } else if x > S::one() {
                clamp = clamp.max(x - S::one());
                x = S::one();
            }
            change = change.max((x - old).abs());
            self.v[i] = x;
        }
        self.last_change = change;
        self.max_clamp = self.max_clamp.max(clamp);
        if clamp > clamp_abort_threshold::<S>() {
            return Err(Error::ClampViolation {
                t: self.t().as_f64(),
                magnitude: clamp.as_f64(),
            });
        }
        Ok(())
    }

    pub fn into_state(self) -> Vec<S> {
        self.v
    }
}

#[inline]
fn axpy<S: Scalar>(out: &mut [S], x: &[S], a: S, y: &[S]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Integrates from `v0` over `[0, t_end]`, sampling every step.
pub fn integrate<S: Scalar>(
    g: &Graph,
    params: &EpidemicParams<S>,
    v0: &[S],
    t_end: S,
    h: S,
) -> Result<Trajectory<S>> {
    let steps = steps_for(t_end, h)?;
    let mut stepper = Rk4Stepper::new(g, params, v0, h)?;
    Trajectory::<S>::check_size(steps.saturating_add(1), g.n())?;
    let mut traj = Trajectory::with_capacity(steps + 1);
    traj.push(stepper.t(), stepper.state());
    for _ in 0..steps {
        stepper.step()?;
        traj.push(stepper.t(), stepper.state());
    }
    traj.max_clamp = stepper.max_clamp();
    Ok(traj)
}
