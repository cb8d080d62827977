use std::io::Write;

use rayon::prelude::*;
use serde_json::json;

use nimfa::conjecture::{
    check_decay_envelope, check_projection_inequalities, decay_envelope_series, projection_series,
    write_counterexample, Counterexample, SLACK,
};
use nimfa::dynamics::{integrate, EpidemicParams, Trajectory};
use nimfa::io::{fmt_float, write_ensemble_csv, write_prediction_csv, write_sweep_csv, FloatCsv};
use nimfa::stochastic::{reduce_runs, sample_grid, simulate_run, MarkovState};
use nimfa::temporal::{integrate_temporal, quenched_predict, TemporalNetwork};
use nimfa::transition::{
    check_bound_ordering, r0_bin_spread, transition_report_for, ReportConfig, StaticProblem, TransitionReport,
};
use nimfa::{GraphModel, GraphSpec, RngSeed};

use crate::config::{stream, EnsembleSpec, ExperimentConfig};
use crate::output::Output;
use crate::CliError;

/// Static horizon when `params.t_end` is not given.
const DEFAULT_T_END: f64 = 100.0;
/// Envelope horizon of `verify` when `params.t_end` is not given.
const DEFAULT_VERIFY_T_END: f64 = 1e4;

pub struct Ctx {
    pub command: &'static str,
    pub cfg: ExperimentConfig,
    pub out: Output,
    pub pool: rayon::ThreadPool,
}

/// Number of counterexamples found; only `verify` turns this into a failure.
pub type Found = usize;

fn model_name(m: GraphModel) -> &'static str {
    match m {
        GraphModel::Er => "er",
        GraphModel::Ba => "ba",
        GraphModel::Ws => "ws",
    }
}

fn write_trajectory(ctx: &mut Ctx, traj: &Trajectory<f64>) -> Result<(), CliError> {
    let n = if ctx.cfg.params.states { traj.states.first().map_or(0, Vec::len) } else { 0 };
    let mut w = FloatCsv::new(ctx.out.file("trajectory.csv")?, &nimfa::io::trajectory_header(n))?;
    for k in 0..traj.len() {
        let states = traj.states[k].iter().take(n).copied();
        w.row([traj.times[k], traj.prevalence[k]].into_iter().chain(states))?;
    }
    Ok(w.finish()?)
}

/// Step size for a network whose intervals may be shorter than `h`.
fn step_for(ctx: &mut Ctx, dt: Option<f64>) -> f64 {
    let h = ctx.cfg.params.h;
    match dt {
        Some(dt) if dt < h => {
            ctx.out.note(format!("delta_t = {dt} is below h = {h}; integrating with h = delta_t"));
            dt
        }
        _ => h,
    }
}

pub fn simulate(ctx: &mut Ctx) -> Result<Found, CliError> {
    if ctx.cfg.sequence.is_some() {
        if ctx.cfg.graph.is_some() {
            return Err(CliError::Config("graph: give either graph or sequence".into()));
        }
        return temporal(ctx);
    }
    let (tau, delta) = ctx.cfg.params.rates()?;
    let g = ctx.cfg.graph()?;
    let p = &ctx.cfg.params;
    let (h, t_end) = (p.h, p.t_end.unwrap_or(DEFAULT_T_END));
    let params = EpidemicParams::rescaled(tau)?;
    let traj = integrate(&g, &params, &vec![p.y0; g.n()], t_end, h)?;
    write_trajectory(ctx, &traj)?;
    let problem = StaticProblem::new(&g, tau)?;
    let summary = json!({
        "n": g.n(),
        "links": g.links(),
        "R0": problem.r0(),
        "y_inf": problem.y_inf(),
        "y_end": traj.prevalence.last(),
        "max_clamp": traj.max_clamp,
    });
    finish(ctx, tau, delta, h, summary)
}

pub fn temporal(ctx: &mut Ctx) -> Result<Found, CliError> {
    let (tau, delta) = ctx.cfg.params.rates()?;
    let (tn, dt) = ctx.cfg.temporal(tau)?;
    let h = step_for(ctx, dt);
    let params = EpidemicParams::rescaled(tau)?;
    let run = integrate_temporal(&tn, &params, &vec![ctx.cfg.params.y0; tn.n()], h)?;
    write_trajectory(ctx, &run.trajectory)?;
    let summary = json!({
        "graphs": tn.len(),
        "delta_t": dt,
        "update_times": tn.update_times(),
        "boundaries": run.boundaries,
        "snapping_error": run.snapping_error,
        "max_clamp": run.trajectory.max_clamp,
    });
    finish(ctx, tau, delta, h, summary)
}

pub fn predict(ctx: &mut Ctx) -> Result<Found, CliError> {
    let (tau, delta) = ctx.cfg.params.rates()?;
    let (tn, dt) = ctx.cfg.temporal(tau)?;
    let h = step_for(ctx, dt);
    let p = &ctx.cfg.params;
    let params = EpidemicParams::rescaled(tau)?;
    let rep = quenched_predict(&tn, &params, &vec![p.y0; tn.n()], p.r, h)?;
    write_prediction_csv(ctx.out.file("prediction.csv")?, &rep)?;
    let intervals: Vec<_> = rep
        .intervals
        .iter()
        .map(|iv| {
            json!({
                "interval": iv.interval + 1,
                "max_error": iv.max_error(),
                "end_error": iv.end_error(),
                "die_out_floor": iv.die_out_floor,
            })
        })
        .collect();
    let summary = json!({
        "delta_t": dt,
        "r": p.r,
        "max_error": rep.max_error(),
        "snapping_error": rep.snapping_error,
        "intervals": intervals,
    });
    finish(ctx, tau, delta, h, summary)
}

pub fn markov(ctx: &mut Ctx) -> Result<Found, CliError> {
    let (tau, delta) = ctx.cfg.params.rates()?;
    let p = ctx.cfg.params.clone();
    let tn = if ctx.cfg.sequence.is_some() {
        ctx.cfg.temporal(tau)?.0
    } else {
        let g = ctx.cfg.graph()?;
        TemporalNetwork::new(vec![g], vec![0.0, p.t_end.unwrap_or(DEFAULT_T_END)])?
    };
    let t0 = tn.update_times()[0];
    let t_last = *tn.update_times().last().expect("validated network");
    let t_end = p.t_end.unwrap_or(t_last);
    if t_end > t_last + 1e-9 {
        return Err(CliError::Config(format!(
            "params.t_end: {t_end} is past the last update time {t_last}"
        )));
    }
    let every = p.grid_step / p.h;
    if (every - every.round()).abs() > 1e-9 || every.round() < 1.0 {
        return Err(CliError::Config(format!(
            "params.grid_step: {} must be a multiple of h = {}",
            p.grid_step, p.h
        )));
    }
    let every = every.round() as usize;
    let n = tn.n();
    let infected = (p.y0 * n as f64).round() as usize;
    let x0 = MarkovState {
        infected: (0..n).map(|i| i < infected).collect(),
    };
    let grid = sample_grid(t0, t_end, p.grid_step)?;
    let seed = RngSeed(ctx.cfg.seed).derive(stream::MARKOV);
    let runs = ctx.pool.install(|| {
        (0..p.runs as u64)
            .into_par_iter()
            .map(|k| simulate_run(&tn, tau, 1.0, &x0, &grid, seed, k))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let ens = reduce_runs(grid, &runs);
    write_ensemble_csv(ctx.out.file("ensemble.csv")?, &ens)?;

    // Mean-field prevalence from the same initial state, on the same grid.
    let v0: Vec<f64> = x0.infected.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
    let params = EpidemicParams::rescaled(tau)?;
    let traj = integrate_temporal(&tn, &params, &v0, p.h)?.trajectory;
    let mut w = FloatCsv::new(ctx.out.file("nimfa.csv")?, &["t".to_string(), "y".to_string()])?;
    let mut compared = 0usize;
    let mut above = 0usize;
    for (j, &t) in ens.times.iter().enumerate() {
        let y = traj.prevalence[j * every];
        w.row([t, y])?;
        if ens.stderr[j].is_finite() {
            compared += 1;
            if y >= ens.mean[j] - 3.0 * ens.stderr[j] {
                above += 1;
            }
        }
    }
    w.finish()?;
    let summary = json!({
        "runs": ens.runs,
        "initial_infected": infected,
        "survivors_at_end": ens.survivors.last(),
        "grid_points_compared": compared,
        "nimfa_above_mean_minus_3se": above,
    });
    finish(ctx, tau, delta, p.h, summary)
}

/// Graph `i` of ensemble member `k`, with its seed stream.
fn ensemble_spec(master: u64, k: usize, model: GraphModel, n: usize, i: usize) -> Result<GraphSpec, CliError> {
    let seed = RngSeed(master).derive(stream::ENSEMBLE).derive(k as u64).derive(i as u64);
    Ok(model.sample(n, seed)?)
}

fn ensemble_jobs(spec: &EnsembleSpec) -> Result<Vec<(usize, GraphModel, usize)>, CliError> {
    if spec.models.is_empty() || spec.count == 0 {
        return Err(CliError::Config("ensemble: need at least one model and count >= 1".into()));
    }
    Ok(spec
        .models
        .iter()
        .enumerate()
        .flat_map(|(k, &m)| (0..spec.count).map(move |i| (k, m, i)))
        .collect())
}

struct SweepRow {
    model: GraphModel,
    report: TransitionReport<f64>,
    spec: GraphSpec,
    /// Largest mixed-start transition time, when spot-checked.
    mixed: Option<f64>,
}

pub fn sweep(ctx: &mut Ctx) -> Result<Found, CliError> {
    let (tau, delta) = ctx.cfg.params.rates()?;
    let spec = ctx
        .cfg
        .ensemble
        .clone()
        .ok_or_else(|| CliError::Config("ensemble: required".into()))?;
    let p = ctx.cfg.params.clone();
    let master = ctx.cfg.seed;
    let jobs = ensemble_jobs(&spec)?;
    let rcfg = ReportConfig {
        r: p.r,
        r_star: p.r_star,
        h: p.h,
        t_max: p.t_max,
        t_star_max: p.t_star_max,
        cross_check: p.cross_check,
    };
    let decile = spec.count.div_ceil(10);
    let rows = ctx.pool.install(|| {
        jobs.par_iter()
            .map(|&(k, model, i)| -> Result<SweepRow, CliError> {
                let gspec = ensemble_spec(master, k, model, spec.n, i)?;
                let g = gspec.build()?;
                let problem = StaticProblem::new(&g, tau)?;
                let id = format!("{}-{i}", model_name(model));
                let mut report = transition_report_for(&problem, &rcfg, id, gspec.seed().map(|s| s.0))?;
                let mixed = if p.mixed_starts > 0 && i % decile == 0 {
                    let seed = RngSeed(master).derive(stream::MIXED_STARTS).derive(k as u64).derive(i as u64);
                    let worst = problem.mixed_start_max_t_bar(p.r, p.h, p.t_max, p.mixed_starts, seed)?;
                    if worst > report.t_bar() + p.h {
                        report.flags.push("mixed_start_exceeds_t_bar".into());
                    }
                    Some(worst)
                } else {
                    None
                };
                Ok(SweepRow {
                    model,
                    report,
                    spec: gspec,
                    mixed,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let reports: Vec<TransitionReport<f64>> = rows.iter().map(|r| r.report.clone()).collect();
    write_sweep_csv(ctx.out.file("sweep.csv")?, &reports)?;

    let mut violations = 0;
    let mut mixed_exceed = 0;
    for row in &rows {
        let rep = &row.report;
        if let Some(worst) = row.mixed {
            if worst > rep.t_bar() + p.h {
                mixed_exceed += 1;
                ctx.out.note(format!(
                    "{}: mixed start reached {worst} above reported t_bar {} (assumption spot-check)",
                    rep.graph_id,
                    rep.t_bar()
                ));
            }
        }
        let found = check_bound_ordering(rep);
        if found.is_empty() {
            continue;
        }
        violations += 1;
        let path = bundle_ordering(ctx, row, tau, &found)?;
        ctx.out.note(format!("{}: bound ordering violated, bundle in {path}", rep.graph_id));
    }

    let mut bins_flagged = 0;
    let mut w = ctx.out.file("r0_bins.csv")?;
    writeln!(w, "model,r0_low,count,mean_t_bar_decay,range,flagged")?;
    for &m in &spec.models {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.model == m)
            .map(|r| (r.report.r0, r.report.t_bar_decay))
            .collect();
        for b in r0_bin_spread(&points, p.bin_width) {
            bins_flagged += usize::from(b.flagged);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                model_name(m),
                fmt_float(b.r0_low),
                b.count,
                fmt_float(b.mean),
                fmt_float(b.range),
                b.flagged
            )?;
        }
    }
    w.flush()?;
    let summary = json!({
        "graphs": rows.len(),
        "supercritical": rows.iter().filter(|r| r.report.r0 > 1.0).count(),
        "ordering_violations": violations,
        "r0_bins_flagged": bins_flagged,
        "mixed_start_spot_checks": rows.iter().filter(|r| r.mixed.is_some()).count(),
        "mixed_start_exceedances": mixed_exceed,
    });
    finish(ctx, tau, delta, p.h, summary)
}

fn bundle_ordering(
    ctx: &mut Ctx,
    row: &SweepRow,
    tau: f64,
    found: &[nimfa::transition::OrderingViolation<f64>],
) -> Result<String, CliError> {
    let rep = &row.report;
    let g = row.spec.build()?;
    let cx = Counterexample {
        check: "bound-ordering".into(),
        graph_id: rep.graph_id.clone(),
        seed: rep.seed,
        tau,
        h: ctx.cfg.params.h,
        t_end: ctx.cfg.params.t_max,
        max_residual: found.iter().map(|v| v.lhs - v.rhs).fold(f64::NEG_INFINITY, f64::max),
    };
    let rows: Vec<Vec<f64>> = found.iter().map(|v| vec![v.lhs, v.rhs, f64::from(u8::from(v.conjectural))]).collect();
    bundle(ctx, &g, &cx, &["lhs", "rhs", "conjectural"], &rows)
}

fn bundle(
    ctx: &mut Ctx,
    g: &nimfa::Graph,
    cx: &Counterexample,
    header: &[&str],
    rows: &[Vec<f64>],
) -> Result<String, CliError> {
    let root = ctx.out.dir().join("counterexamples");
    let dir = write_counterexample(&root, g, cx, header, rows)?;
    let rel = format!(
        "counterexamples/{}",
        dir.file_name().expect("bundle directory").to_string_lossy()
    );
    ctx.out.record(rel.clone());
    Ok(rel)
}

struct VerifyRow {
    id: String,
    seed: Option<u64>,
    spec: GraphSpec,
    envelope: Vec<(f64, nimfa::DecayCheckResult64)>,
    projection: Option<nimfa::conjecture::ProjectionResiduals<f64>>,
}

pub fn verify(ctx: &mut Ctx) -> Result<Found, CliError> {
    let spec = ctx.cfg.ensemble.clone().unwrap_or(EnsembleSpec {
        models: vec![GraphModel::Er],
        n: 50,
        count: 100,
    });
    if spec.n < 2 {
        return Err(CliError::Config("ensemble.n: verify needs at least two nodes".into()));
    }
    let p = ctx.cfg.params.clone();
    let t_end = p.t_end.unwrap_or(DEFAULT_VERIFY_T_END);
    let tc = 1.0 / (spec.n - 1) as f64;
    let master = ctx.cfg.seed;
    let jobs = ensemble_jobs(&spec)?;
    let rows = ctx.pool.install(|| {
        jobs.par_iter()
            .map(|&(k, model, i)| -> Result<VerifyRow, CliError> {
                let gspec = ensemble_spec(master, k, model, spec.n, i)?;
                let g = gspec.build()?;
                let id = format!("{}-{i}", model_name(model));
                let envelope = p
                    .tau_multipliers
                    .iter()
                    .map(|&m| Ok((m, check_decay_envelope(&g, m * tc, p.h, t_end, id.clone())?)))
                    .collect::<Result<Vec<_>, CliError>>()?;
                let projection = if g.is_connected() {
                    Some(check_projection_inequalities(&g, tc, p.h, p.projection_t_end)?)
                } else {
                    None
                };
                Ok(VerifyRow {
                    id,
                    seed: gspec.seed().map(|s| s.0),
                    spec: gspec,
                    envelope,
                    projection,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut w = ctx.out.file("envelope.csv")?;
    writeln!(w, "graph_id,seed,tau_multiplier,max_excess,argmax_t,pass")?;
    for row in &rows {
        for (m, res) in &row.envelope {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                row.id,
                row.seed.map_or_else(String::new, |s| s.to_string()),
                fmt_float(*m),
                fmt_float(res.max_excess),
                fmt_float(res.argmax_t),
                res.pass
            )?;
        }
    }
    w.flush()?;
    let mut w = ctx.out.file("projection.csv")?;
    writeln!(w, "graph_id,seed,coefficient,orthogonal,chain,max_xi_norm,pass")?;
    for row in &rows {
        if let Some(pr) = &row.projection {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                row.id,
                row.seed.map_or_else(String::new, |s| s.to_string()),
                fmt_float(pr.coefficient),
                fmt_float(pr.orthogonal),
                fmt_float(pr.chain),
                fmt_float(pr.max_xi_norm),
                pr.pass()
            )?;
        }
    }
    w.flush()?;

    let mut found = 0;
    let mut skipped = 0;
    for row in &rows {
        let g = row.spec.build()?;
        for (m, res) in row.envelope.iter().filter(|(_, r)| !r.pass) {
            found += 1;
            let series = decay_envelope_series(&g, m * tc, p.h, t_end)?;
            let cx = Counterexample {
                check: format!("envelope-x{m}"),
                graph_id: row.id.clone(),
                seed: row.seed,
                tau: m * tc,
                h: p.h,
                t_end,
                max_residual: res.max_excess,
            };
            let data: Vec<Vec<f64>> = series.iter().map(|&(t, e)| vec![t, e]).collect();
            let path = bundle(ctx, &g, &cx, &["t", "excess"], &data)?;
            ctx.out.note(format!("{}: envelope exceeded by {:e} at tau multiplier {m}, bundle in {path}", row.id, res.max_excess));
        }
        match &row.projection {
            None => {
                skipped += 1;
                ctx.out.note(format!("{}: disconnected, projection checks skipped", row.id));
            }
            Some(pr) if !pr.pass() => {
                found += 1;
                let series = projection_series(&g, tc, p.h, p.projection_t_end)?;
                let cx = Counterexample {
                    check: "projection".into(),
                    graph_id: row.id.clone(),
                    seed: row.seed,
                    tau: tc,
                    h: p.h,
                    t_end: p.projection_t_end,
                    max_residual: pr.coefficient.max(pr.orthogonal).max(pr.chain),
                };
                let data: Vec<Vec<f64>> = series.iter().map(|r| r.to_vec()).collect();
                let path = bundle(ctx, &g, &cx, &["t", "coefficient", "orthogonal", "chain"], &data)?;
                ctx.out.note(format!("{}: projection inequality violated, bundle in {path}", row.id));
            }
            Some(_) => {}
        }
    }
    let (tau, delta) = ctx.cfg.params.rates()?;
    let summary = json!({
        "graphs": rows.len(),
        "envelope_checks": rows.iter().map(|r| r.envelope.len()).sum::<usize>(),
        "projection_checks": rows.len() - skipped,
        "projection_skipped_disconnected": skipped,
        "slack": SLACK,
        "counterexamples": found,
    });
    finish(ctx, tau, delta, p.h, summary)?;
    Ok(found)
}

fn finish(ctx: &mut Ctx, tau: f64, delta: f64, h: f64, summary: serde_json::Value) -> Result<Found, CliError> {
    ctx.out.finish(ctx.command, &ctx.cfg, tau, delta, h, summary)?;
    Ok(0)
}
