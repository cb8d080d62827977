//! CSV output for trajectories, predictions, ensembles and sweeps.
//!
//! Floats are written with 17 significant digits so values round-trip
//! exactly; missing values are written as `NaN`.

use std::io::Write;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stochastic::EnsembleResult;
use crate::temporal::PredictionReport;
use crate::transition::TransitionReport;

/// Full-precision decimal rendering (`NaN` for missing values).
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt<S: Scalar>(x: Option<S>) -> String {
    fmt_float(x.map_or(f64::NAN, Scalar::as_f64))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Streams CSV rows of floats.
pub struct FloatCsv<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> FloatCsv<W> {
    pub fn new(out: W, header: &[String]) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(header).map_err(csv_err)?;
        Ok(FloatCsv { inner })
    }

    pub fn row(&mut self, values: impl IntoIterator<Item = f64>) -> Result<()> {
        self.inner
            .write_record(values.into_iter().map(fmt_float))
            .map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Header `t,y,v_0,...,v_{n-1}`.
pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "y".to_string()];
    h.extend((0..n).map(|i| format!("v_{i}")));
    h
}

pub fn write_trajectory_csv<S: Scalar, W: Write>(out: W, traj: &Trajectory<S>) -> Result<()> {
    let n = traj.states.first().map_or(0, Vec::len);
    let mut w = FloatCsv::new(out, &trajectory_header(n))?;
    for k in 0..traj.len() {
        let row = [traj.times[k], traj.prevalence[k]]
            .into_iter()
            .chain(traj.states[k].iter().copied())
            .map(Scalar::as_f64);
        w.row(row)?;
    }
    w.finish()
}

/// `t,y_actual,y_pred,abs_err`.
pub fn write_prediction_csv<S: Scalar, W: Write>(out: W, rep: &PredictionReport<S>) -> Result<()> {
    let header = ["t", "y_actual", "y_pred", "abs_err"].map(String::from);
    let mut w = FloatCsv::new(out, &header)?;
    for (t, a, p, e) in rep.rows() {
        w.row([t, a, p, e].map(Scalar::as_f64))?;
    }
    w.finish()
}

/// `t,mean_y,survivors,runs,stderr`.
pub fn write_ensemble_csv<W: Write>(out: W, ens: &EnsembleResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "mean_y", "survivors", "runs", "stderr"])
        .map_err(csv_err)?;
    for k in 0..ens.times.len() {
        w.write_record([
            fmt_float(ens.times[k]),
            fmt_float(ens.mean[k]),
            ens.survivors[k].to_string(),
            ens.runs.to_string(),
            fmt_float(ens.stderr[k]),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub const SWEEP_HEADER: [&str; 13] = [
    "graph_id",
    "seed",
    "R0",
    "y_inf",
    "t_bar_decay",
    "t_bar_growth",
    "t_star",
    "U_D",
    "U_G",
    "T_hat",
    "L_G",
    "L_D",
    "flags",
];

/// One sweep row; `flags` are joined with `;`.
pub fn sweep_record<S: Scalar>(rep: &TransitionReport<S>) -> Vec<String> {
    let b = &rep.bounds;
    vec![
        rep.graph_id.clone(),
        rep.seed.map_or_else(String::new, |s| s.to_string()),
        fmt_float(rep.r0.as_f64()),
        fmt_float(rep.y_inf.as_f64()),
        fmt_float(rep.t_bar_decay.as_f64()),
        fmt_float(rep.t_bar_growth.as_f64()),
        fmt_opt(rep.t_star),
        fmt_float(b.u_d(rep.r0, rep.r).as_f64()),
        fmt_opt(b.u_g_growth),
        fmt_float(b.t_hat_combined.as_f64()),
        fmt_opt(b.l_g),
        fmt_float(b.l_d.as_f64()),
        rep.flags.join(";"),
    ]
}

pub fn write_sweep_csv<S: Scalar, W: Write>(out: W, reports: &[TransitionReport<S>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for rep in reports {
        w.write_record(sweep_record(rep)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
