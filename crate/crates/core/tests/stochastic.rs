use nimfa::graphs::{erdos_renyi, named_graph};
use nimfa::stochastic::{
    ensemble_prevalence, gillespie_sis, reduce_runs, sample_grid, simulate_run, MarkovState,
};
use nimfa::temporal::{constant_interval_network, TemporalNetwork};
use nimfa::{NamedGraph, RngSeed};

#[test]
fn runs_can_be_scheduled_in_any_order() {
    let g = erdos_renyi(30, 0.2, RngSeed(51)).unwrap();
    let tn = constant_interval_network(vec![g], 5.0).unwrap();
    let x0 = MarkovState::all_infected(30);
    let seed = RngSeed(52);
    let grid = sample_grid(0.0, 5.0, 0.25).unwrap();
    let mut runs: Vec<_> = (0..40u64)
        .rev()
        .map(|k| (k, simulate_run(&tn, 0.2, 1.0, &x0, &grid, seed, k).unwrap()))
        .collect();
    runs.sort_by_key(|(k, _)| *k);
    let runs: Vec<_> = runs.into_iter().map(|(_, r)| r).collect();
    let manual = reduce_runs(grid, &runs);
    let direct = ensemble_prevalence(&tn, 0.2, 1.0, &x0, 5.0, 0.25, 40, seed).unwrap();
    assert_eq!(manual, direct);
}

#[test]
fn no_infections_on_an_empty_graph_after_a_switch() {
    let tn = TemporalNetwork::new(
        vec![named_graph(NamedGraph::Complete, 10).unwrap(), named_graph(NamedGraph::Empty, 10).unwrap()],
        vec![0.0, 1.0, 2.0],
    )
    .unwrap();
    let x0 = MarkovState::all_infected(10);
    let thin = (-2.0f64).exp();
    // Pure curing from t = 1 on, also past the last update time, so
    // `count(3) - e^-2 count(1)` has mean zero.
    let runs = 4000;
    let residuals: Vec<f64> = (0..runs)
        .map(|k| {
            let path = gillespie_sis(&tn, 2.0, 1.0, &x0, 3.0, RngSeed(53).derive(k)).unwrap();
            assert!(path.events.iter().filter(|e| e.t >= 1.0).all(|e| !e.infected));
            assert!(path.events.windows(2).all(|w| w[0].t <= w[1].t));
            path.infected_at(3.0) as f64 - thin * path.infected_at(1.0) as f64
        })
        .collect();
    let n = runs as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let var = residuals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 4.0 * (var / n).sqrt(), "mean residual {mean}");
}

#[test]
fn path_replay_matches_event_counts() {
    let g = erdos_renyi(20, 0.3, RngSeed(54)).unwrap();
    let tn = constant_interval_network(vec![g], 10.0).unwrap();
    let path = gillespie_sis(&tn, 0.3, 1.0, &MarkovState::all_infected(20), 10.0, RngSeed(55)).unwrap();
    let mut infected = vec![true; 20];
    for e in &path.events {
        assert_ne!(infected[e.node], e.infected, "event must flip the node");
        infected[e.node] = e.infected;
        let count = infected.iter().filter(|&&x| x).count();
        assert_eq!(path.infected_at(e.t), count);
    }
    match path.extinction {
        Some(t) => assert_eq!(path.infected_at(t), 0),
        None => assert!(infected.iter().any(|&x| x)),
    }
}

#[test]
fn same_seed_same_path() {
    let g = erdos_renyi(20, 0.3, RngSeed(56)).unwrap();
    let tn = constant_interval_network(vec![g.clone(), g], 2.0).unwrap();
    let x0 = MarkovState::all_infected(20);
    let a = gillespie_sis(&tn, 0.3, 1.0, &x0, 4.0, RngSeed(57)).unwrap();
    let b = gillespie_sis(&tn, 0.3, 1.0, &x0, 4.0, RngSeed(57)).unwrap();
    let c = gillespie_sis(&tn, 0.3, 1.0, &x0, 4.0, RngSeed(58)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
