//! Exact event-driven simulation of the Markovian SIS process on a temporal
//! network: every infected node cures at rate `delta` and infects each
//! susceptible neighbour at rate `beta`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graphs::{Graph, RngSeed};
use crate::temporal::TemporalNetwork;

const RECOUNT_EVERY: u64 = 10_000;

/// Infection indicator per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkovState {
    pub infected: Vec<bool>,
}

impl MarkovState {
    pub fn all_healthy(n: usize) -> Self {
        MarkovState {
            infected: vec![false; n],
        }
    }

    pub fn all_infected(n: usize) -> Self {
        MarkovState {
            infected: vec![true; n],
        }
    }

    pub fn count(&self) -> usize {
        self.infected.iter().filter(|&&x| x).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub t: f64,
    pub node: usize,
    /// State of `node` after the event.
    pub infected: bool,
}

/// One realisation between its start time and `t_end`.
#[derive(Clone, Debug, PartialEq)]
pub struct EventPath {
    pub start: MarkovState,
    pub t_start: f64,
    pub t_end: f64,
    pub events: Vec<Event>,
    /// Time the all-healthy state was reached, if before `t_end`.
    pub extinction: Option<f64>,
}

impl EventPath {
    /// Number of infected nodes just after time `t`.
    pub fn infected_at(&self, t: f64) -> usize {
        let mut k = self.start.count() as isize;
        for e in self.events.iter().take_while(|e| e.t <= t) {
            k += if e.infected { 1 } else { -1 };
        }
        k as usize
    }
}

struct Simulator<'a> {
    tn: &'a TemporalNetwork,
    beta: f64,
    delta: f64,
    infected: Vec<bool>,
    infected_list: Vec<usize>,
    position: Vec<usize>,
    /// Susceptible neighbours of each node in the current graph.
    susceptible_nb: Vec<usize>,
    si_links: usize,
    graph: usize,
    t: f64,
    events: u64,
}

impl<'a> Simulator<'a> {
    fn new(tn: &'a TemporalNetwork, beta: f64, delta: f64, x0: &MarkovState) -> Self {
        let n = tn.n();
        let mut sim = Simulator {
            tn,
            beta,
            delta,
            infected: x0.infected.clone(),
            infected_list: Vec::with_capacity(n),
            position: vec![usize::MAX; n],
            susceptible_nb: vec![0; n],
            si_links: 0,
            graph: 0,
            t: tn.update_times()[0],
            events: 0,
        };
        for i in 0..n {
            if sim.infected[i] {
                sim.position[i] = sim.infected_list.len();
                sim.infected_list.push(i);
            }
        }
        sim.recount();
        sim
    }

    fn g(&self) -> &'a Graph {
        &self.tn.graphs()[self.graph]
    }

    /// Rebuilds the susceptible-neighbour counts and the S–I link total.
    fn recount(&mut self) {
        let g = self.g();
        let mut si = 0;
        for i in 0..g.n() {
            self.susceptible_nb[i] = g
                .neighbors(i)
                .iter()
                .filter(|&&j| !self.infected[j])
                .count();
            if self.infected[i] {
                si += self.susceptible_nb[i];
            }
        }
        self.si_links = si;
    }

    fn infect(&mut self, x: usize) {
        self.infected[x] = true;
        self.position[x] = self.infected_list.len();
        self.infected_list.push(x);
        for &j in self.g().neighbors(x) {
            self.susceptible_nb[j] -= 1;
            if self.infected[j] {
                self.si_links -= 1;
            }
        }
        self.si_links += self.susceptible_nb[x];
    }

    fn cure(&mut self, x: usize) {
        self.infected[x] = false;
        let p = self.position[x];
        self.infected_list.swap_remove(p);
        if let Some(&moved) = self.infected_list.get(p) {
            self.position[moved] = p;
        }
        self.position[x] = usize::MAX;
        for &j in self.g().neighbors(x) {
            self.susceptible_nb[j] += 1;
            if self.infected[j] {
                self.si_links += 1;
            }
        }
        self.si_links -= self.susceptible_nb[x];
    }

    /// Advances to the next event before `t_end`; `None` when absorbed or out of time.
    fn next_event(&mut self, rng: &mut ChaCha8Rng, t_end: f64) -> Option<Event> {
        loop {
            let cure_rate = self.delta * self.infected_list.len() as f64;
            let infect_rate = self.beta * self.si_links as f64;
            let total = cure_rate + infect_rate;
            if total <= 0.0 {
                return None;
            }
            let wait = -(1.0 - rng.gen::<f64>()).ln() / total;
            let next_update = self
                .tn
                .update_times()
                .get(self.graph + 1)
                .copied()
                .filter(|_| self.graph + 1 < self.tn.len())
                .unwrap_or(f64::INFINITY);
            if self.t + wait >= next_update && next_update < t_end {
                // Exponential clocks are memoryless: jump to the switch and redraw.
                self.t = next_update;
                self.graph += 1;
                self.recount();
                continue;
            }
            if self.t + wait >= t_end {
                self.t = t_end;
                return None;
            }
            self.t += wait;
            self.events += 1;
            let event = if rng.gen::<f64>() * total < cure_rate {
                let x = self.infected_list[rng.gen_range(0..self.infected_list.len())];
                self.cure(x);
                Event {
                    t: self.t,
                    node: x,
                    infected: false,
                }
            } else {
                let x = self.pick_infection(rng);
                self.infect(x);
                Event {
                    t: self.t,
                    node: x,
                    infected: true,
                }
            };
            if cfg!(debug_assertions) && self.events % RECOUNT_EVERY == 0 {
                let kept = self.si_links;
                self.recount();
                debug_assert_eq!(kept, self.si_links, "S-I link bookkeeping drifted");
            }
            return Some(event);
        }
    }

    /// Infecting node chosen by its number of susceptible neighbours, then a
    /// uniform susceptible neighbour of it.
    fn pick_infection(&self, rng: &mut ChaCha8Rng) -> usize {
        let mut ticket = rng.gen_range(0..self.si_links);
        let source = *self
            .infected_list
            .iter()
            .find(|&&i| {
                if ticket < self.susceptible_nb[i] {
                    true
                } else {
                    ticket -= self.susceptible_nb[i];
                    false
                }
            })
            .expect("ticket below S-I link count");
        let k = rng.gen_range(0..self.susceptible_nb[source]);
        *self
            .g()
            .neighbors(source)
            .iter()
            .filter(|&&j| !self.infected[j])
            .nth(k)
            .expect("k below susceptible neighbour count")
    }
}

fn check_inputs(
    tn: &TemporalNetwork,
    beta: f64,
    delta: f64,
    x0: &MarkovState,
    t_end: f64,
) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::param(
            "beta",
            format!("must be finite and >= 0, got {beta}"),
        ));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::param(
            "delta",
            format!("must be finite and > 0, got {delta}"),
        ));
    }
    if x0.infected.len() != tn.n() {
        return Err(Error::DimensionMismatch {
            expected: tn.n(),
            found: x0.infected.len(),
        });
    }
    if !(t_end >= tn.update_times()[0]) || !t_end.is_finite() {
        return Err(Error::param(
            "t_end",
            format!("must be finite and >= t_0, got {t_end}"),
        ));
    }
    Ok(())
}

/// Simulates one path from `x0` at `t_0` up to `t_end`. Graph `G_m` governs
/// `[t_{m-1}, t_m)`; after `t_M` the last graph stays in place.
pub fn gillespie_sis(
    tn: &TemporalNetwork,
    beta: f64,
    delta: f64,
    x0: &MarkovState,
    t_end: f64,
    seed: RngSeed,
) -> Result<EventPath> {
    check_inputs(tn, beta, delta, x0, t_end)?;
    let mut rng = seed.rng();
    let mut sim = Simulator::new(tn, beta, delta, x0);
    let mut events = Vec::new();
    let mut extinction = (x0.count() == 0).then_some(sim.t);
    while let Some(e) = sim.next_event(&mut rng, t_end) {
        events.push(e);
        if sim.infected_list.is_empty() {
            extinction = Some(e.t);
            break;
        }
    }
    Ok(EventPath {
        start: x0.clone(),
        t_start: tn.update_times()[0],
        t_end,
        events,
        extinction,
    })
}

/// Prevalence of one run on the sampling grid, with its extinction time.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSamples {
    pub prevalence: Vec<f64>,
    pub extinction: Option<f64>,
}

/// Uniform grid `t_0, t_0 + dt, ...` up to `t_end` (included when on the grid).
pub fn sample_grid(t0: f64, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param(
            "grid_step",
            format!("must be positive, got {dt}"),
        ));
    }
    let steps = ((t_end - t0) / dt + 1e-9).floor().max(0.0);
    // Each run keeps a count per grid point, so cap the grid like a trajectory.
    let limit = crate::dynamics::MAX_STORED_VALUES;
    if steps >= limit as f64 {
        return Err(Error::param(
            "t_end",
            format!("{steps} grid steps exceed the limit of {limit}; shorten the horizon or enlarge grid_step"),
        ));
    }
    let steps = steps as usize;
    Ok((0..=steps).map(|k| t0 + k as f64 * dt).collect())
}

/// Runs path `run` of an ensemble with master seed `seed`; the per-run seed
/// depends only on `(seed, run)`, so runs can be scheduled in any order.
#[allow(clippy::too_many_arguments)]
pub fn simulate_run(
    tn: &TemporalNetwork,
    beta: f64,
    delta: f64,
    x0: &MarkovState,
    grid: &[f64],
    seed: RngSeed,
    run: u64,
) -> Result<RunSamples> {
    let t_end = *grid
        .last()
        .ok_or_else(|| Error::param("grid", "empty sampling grid"))?;
    check_inputs(tn, beta, delta, x0, t_end)?;
    let mut rng = seed.derive(run).rng();
    let mut sim = Simulator::new(tn, beta, delta, x0);
    let n = tn.n() as f64;
    let mut prevalence = Vec::with_capacity(grid.len());
    let mut extinction = (x0.count() == 0).then_some(sim.t);
    let mut k = 0;
    let record_until = |limit: f64, infected: usize, out: &mut Vec<f64>, k: &mut usize| {
        while *k < grid.len() && grid[*k] < limit {
            out.push(infected as f64 / n);
            *k += 1;
        }
    };
    let mut infected = x0.count();
    while extinction.is_none() {
        match sim.next_event(&mut rng, t_end) {
            Some(e) => {
                record_until(e.t, infected, &mut prevalence, &mut k);
                infected = sim.infected_list.len();
                if infected == 0 {
                    extinction = Some(e.t);
                }
            }
            None => break,
        }
    }
    record_until(f64::INFINITY, infected, &mut prevalence, &mut k);
    Ok(RunSamples {
        prevalence,
        extinction,
    })
}

/// Prevalence conditioned on non-extinction.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    /// Mean over runs not yet extinct at each time; NaN where none survive.
    pub mean: Vec<f64>,
    pub survivors: Vec<usize>,
    pub runs: usize,
    /// Standard error of `mean`; NaN with fewer than two survivors.
    pub stderr: Vec<f64>,
}

/// Combines runs in the given order. A run contributes at grid times strictly
/// before its extinction.
pub fn reduce_runs(times: Vec<f64>, runs: &[RunSamples]) -> EnsembleResult {
    let len = times.len();
    let mut sum = vec![0.0; len];
    let mut sum_sq = vec![0.0; len];
    let mut survivors = vec![0usize; len];
    for run in runs {
        for k in 0..len {
            if run.extinction.is_some_and(|te| times[k] >= te) {
                continue;
            }
            let y = run.prevalence[k];
            sum[k] += y;
            sum_sq[k] += y * y;
            survivors[k] += 1;
        }
    }
    let mut mean = vec![f64::NAN; len];
    let mut stderr = vec![f64::NAN; len];
    for k in 0..len {
        let c = survivors[k] as f64;
        if survivors[k] > 0 {
            mean[k] = sum[k] / c;
        }
        if survivors[k] > 1 {
            let var = ((sum_sq[k] - c * mean[k] * mean[k]) / (c - 1.0)).max(0.0);
            stderr[k] = (var / c).sqrt();
        }
    }
    EnsembleResult {
        times,
        mean,
        survivors,
        runs: runs.len(),
        stderr,
    }
}

/// `runs` independent paths sampled every `grid_step` on `[t_0, t_end]`.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_prevalence(
    tn: &TemporalNetwork,
    beta: f64,
    delta: f64,
    x0: &MarkovState,
    t_end: f64,
    grid_step: f64,
    runs: usize,
    seed: RngSeed,
) -> Result<EnsembleResult> {
    if runs == 0 {
        return Err(Error::param("runs", "need at least one run"));
    }
    let grid = sample_grid(tn.update_times()[0], t_end, grid_step)?;
    let samples = (0..runs as u64)
        .map(|r| simulate_run(tn, beta, delta, x0, &grid, seed, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce_runs(grid, &samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{erdos_renyi, named_graph, NamedGraph};
    use crate::temporal::constant_interval_network;

    fn static_net(g: Graph, t: f64) -> TemporalNetwork {
        constant_interval_network(vec![g], t).unwrap()
    }

    #[test]
    fn healthy_start_is_absorbing() {
        let tn = static_net(named_graph(NamedGraph::Complete, 5).unwrap(), 10.0);
        let p = gillespie_sis(
            &tn,
            1.0,
            1.0,
            &MarkovState::all_healthy(5),
            10.0,
            RngSeed(1),
        )
        .unwrap();
        assert!(p.events.is_empty());
        assert_eq!(p.extinction, Some(0.0));
        assert_eq!(p.infected_at(5.0), 0);
    }

    #[test]
    fn pure_curing_mean_time() {
        let tn = static_net(named_graph(NamedGraph::Path, 3).unwrap(), 100.0);
        let mut x0 = MarkovState::all_healthy(3);
        x0.infected[1] = true;
        let delta = 2.0;
        let runs = 10_000;
        let mut total = 0.0;
        for r in 0..runs {
            let p = gillespie_sis(&tn, 0.0, delta, &x0, 100.0, RngSeed(9).derive(r)).unwrap();
            assert_eq!(p.events.len(), 1);
            total += p.extinction.unwrap();
        }
        let m = total / runs as f64;
        assert!((m - 1.0 / delta).abs() < 0.03 / delta, "{m}");
    }

    #[test]
    fn k2_first_event_time() {
        let tn = static_net(named_graph(NamedGraph::Complete, 2).unwrap(), 100.0);
        let x0 = MarkovState::all_infected(2);
        let runs = 10_000;
        let mut total = 0.0;
        for r in 0..runs {
            let p = gillespie_sis(&tn, 1.0, 1.0, &x0, 100.0, RngSeed(3).derive(r)).unwrap();
            total += p.events[0].t;
        }
        // Both infected: no S-I links, total rate 2 delta = 2.
        let m = total / runs as f64;
        assert!((m - 0.5).abs() < 0.05 * 0.5, "{m}");
    }

    #[test]
    fn k2_one_infected_first_event_time() {
        // One S-I link: rate delta + beta = 2 with beta = delta = 1.
        let tn = static_net(named_graph(NamedGraph::Complete, 2).unwrap(), 100.0);
        let x0 = MarkovState {
            infected: vec![true, false],
        };
        let runs = 10_000;
        let total: f64 = (0..runs)
            .map(|r| {
                gillespie_sis(&tn, 1.0, 1.0, &x0, 100.0, RngSeed(4).derive(r))
                    .unwrap()
                    .events[0]
                    .t
            })
            .sum();
        assert!((total / runs as f64 - 0.5).abs() < 0.025);
    }

    #[test]
    fn single_run_ensemble_equals_path() {
        let g = erdos_renyi(20, 0.3, RngSeed(2)).unwrap();
        let tn = static_net(g, 5.0);
        let x0 = MarkovState::all_infected(20);
        let ens = ensemble_prevalence(&tn, 0.3, 1.0, &x0, 5.0, 0.5, 1, RngSeed(8)).unwrap();
        let grid = sample_grid(0.0, 5.0, 0.5).unwrap();
        let run = simulate_run(&tn, 0.3, 1.0, &x0, &grid, RngSeed(8), 0).unwrap();
        for k in 0..grid.len() {
            if ens.survivors[k] == 1 {
                assert_eq!(ens.mean[k], run.prevalence[k]);
            }
        }
        assert!(ens.stderr.iter().all(|s| s.is_nan()));
    }

    #[test]
    fn pure_death_survival_fraction() {
        let n = 4;
        let tn = static_net(Graph::empty(n).unwrap(), 3.0);
        let x0 = MarkovState::all_infected(n);
        let runs = 4000;
        let ens = ensemble_prevalence(&tn, 0.0, 1.0, &x0, 3.0, 0.5, runs, RngSeed(6)).unwrap();
        for (k, &t) in ens.times.iter().enumerate() {
            let p = 1.0 - (1.0 - (-t).exp()).powi(n as i32);
            let frac = ens.survivors[k] as f64 / runs as f64;
            let sd = (p * (1.0 - p) / runs as f64).sqrt();
            assert!((frac - p).abs() <= 3.0 * sd + 1e-12, "t {t}: {frac} vs {p}");
        }
        assert!(ens.survivors.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ensemble_is_deterministic() {
        let g = erdos_renyi(30, 0.2, RngSeed(12)).unwrap();
        let tn = constant_interval_network(vec![g.clone(), g], 2.0).unwrap();
        let x0 = MarkovState::all_infected(30);
        let a = ensemble_prevalence(&tn, 0.2, 1.0, &x0, 4.0, 0.1, 20, RngSeed(77)).unwrap();
        let b = ensemble_prevalence(&tn, 0.2, 1.0, &x0, 4.0, 0.1, 20, RngSeed(77)).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert!(a.mean.iter().all(|m| m.is_nan() || (0.0..=1.0).contains(m)));
    }

    #[test]
    fn bookkeeping_matches_recount() {
        let g = erdos_renyi(40, 0.3, RngSeed(1)).unwrap();
        let h = erdos_renyi(40, 0.6, RngSeed(2)).unwrap();
        let tn = constant_interval_network(vec![g, h], 3.0).unwrap();
        let x0 = MarkovState::all_infected(40);
        let mut sim = Simulator::new(&tn, 0.5, 1.0, &x0);
        let mut rng = RngSeed(3).rng();
        for _ in 0..5000 {
            if sim.next_event(&mut rng, 6.0).is_none() {
                break;
            }
            let kept = sim.si_links;
            sim.recount();
            assert_eq!(kept, sim.si_links);
        }
    }
}
