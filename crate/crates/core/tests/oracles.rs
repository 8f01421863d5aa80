use std::collections::HashMap;
use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scma_ee::assignment::{fixed_assignment, random_assignment};
use scma_ee::channel::{generate_channel, scenario_by_name, Placement, Scenario, PATHLOSS_EXPONENT};
use scma_ee::experiment::{run_case, run_experiment, trial_seed, Case, ExperimentConfig, SystemConfig};
use scma_ee::powalloc::{dinkelbach_allocate, PowerMode, SolverConfig};
use scma_ee::{Channel64, FactorGraph, Params64};

/// EE-optimal PPC allocation when no budget binds. Under the MAC rate only
/// the strongest user on a subcarrier should transmit, so the problem is
/// single-link water-filling over the per-subcarrier best gains, solved by
/// bisection on the price `omega`.
fn unconstrained_oracle(graph: &FactorGraph, channel: &Channel64, params: &Params64) -> (f64, Vec<f64>) {
    let sigma2 = params.noise_power();
    let fixed = graph.num_users() as f64 * params.circuit_power();
    let best: Vec<f64> = (0..params.num_subcarriers())
        .map(|k| graph.users_on(k).map(|j| channel.gain2(j, k)).fold(0.0, f64::max))
        .collect();
    let levels = |omega: f64| -> Vec<f64> {
        best.iter()
            .map(|&g| if g > 0.0 { (1.0 / (omega * LN_2) - sigma2 / g).max(0.0) } else { 0.0 })
            .collect()
    };
    let value = |omega: f64| {
        let x = levels(omega);
        let rate: f64 = x.iter().zip(&best).map(|(x, g)| (1.0 + x * g / sigma2).log2()).sum();
        rate - omega * (x.iter().sum::<f64>() + fixed)
    };
    let (mut lo, mut hi) = (1e-9_f64, 1e12_f64);
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if value(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, levels(lo))
}

#[test]
fn ppc_matches_unconstrained_water_filling() {
    let params = SystemConfig::default().params(20.0).unwrap();
    let graph = fixed_assignment(&params).unwrap();
    for scenario in ["fig1_equal", "cond1", "uniform"] {
        let scenario = scenario_by_name(scenario).unwrap();
        for seed in 0..25 {
            let channel = generate_channel(&scenario, &params, seed).unwrap();
            let (omega, powers) = unconstrained_oracle(&graph, &channel, &params);
            assert!(powers.iter().sum::<f64>() < params.max_power()[0]);
            let result = dinkelbach_allocate(&graph, &channel, &params, &SolverConfig::default()).unwrap();
            assert!(result.converged);
            assert!(
                (result.ee - omega).abs() <= 1e-6 * omega,
                "{} seed {seed}: {} vs {omega}",
                scenario.name,
                result.ee
            );
        }
    }
}

#[test]
fn pmp_on_single_user_spends_the_budget() {
    let params = Params64::with_equal_budget(2, 1, 2, 1e-12, 1e-3, 0.05, 1.0).unwrap();
    let graph = FactorGraph::from_columns(2, vec![vec![1, 1]]).unwrap();
    let channel = Channel64::from_gains(&[vec![1e-9, 4e-9]]).unwrap();
    let solver = SolverConfig::default().with_mode(PowerMode::Pmp);
    let result = dinkelbach_allocate(&graph, &channel, &params, &solver).unwrap();
    assert!((result.power.row_sum(0) - 0.05).abs() < 1e-12);
    // Under a fixed total, rate is maximised by water-filling at that total;
    // the subgradient solver gets close but not exact.
    let inv: [f64; 2] = [1e-12 / 1e-9, 1e-12 / 4e-9];
    let level: f64 = (0.05 + inv[0] + inv[1]) / 2.0;
    let rate: f64 = inv.iter().map(|n| (level / n).log2()).sum();
    assert!(result.sum_rate <= rate * (1.0 + 1e-12));
    assert!(result.sum_rate >= rate * (1.0 - 1e-5), "{} vs {rate}", result.sum_rate);
}

#[test]
fn fading_has_unit_mean() {
    let params = Params64::with_equal_budget(4, 6, 2, 1e-15, 1e-3, 0.1, 1.0).unwrap();
    let scenario = scenario_by_name("cond2").unwrap();
    let alpha = PATHLOSS_EXPONENT;
    let (mut sum, mut draws) = (0.0, 0);
    let mut seed = 0;
    while draws < 100_000 {
        let h = generate_channel(&scenario, &params, seed).unwrap();
        for j in 0..6 {
            let loss = h.distances()[j].powf(alpha);
            for k in 0..4 {
                sum += h.gain2(j, k) * loss;
                draws += 1;
            }
        }
        seed += 1;
    }
    let mean = sum / draws as f64;
    assert!((mean - 1.0).abs() < 0.01, "{mean}");
}

#[test]
fn disk_placement_is_uniform_in_area() {
    let params = Params64::with_equal_budget(4, 6, 2, 1e-15, 1e-3, 0.1, 1.0).unwrap();
    let scenario: Scenario<f64> = scenario_by_name("uniform").unwrap();
    assert_eq!(scenario.placement, Placement::UniformDisk);
    let mut inner = 0;
    let mut total = 0;
    for seed in 0..5000 {
        for d in generate_channel(&scenario, &params, seed).unwrap().distances() {
            total += 1;
            if *d <= 50.0 {
                inner += 1;
            }
        }
    }
    // A quarter of the disk area lies within half the radius.
    let share = inner as f64 / total as f64;
    assert!((share - 0.25).abs() < 0.01, "{share}");
}

#[test]
fn random_assignment_covers_every_column() {
    let params = Params64::with_equal_budget(4, 4, 2, 1e-15, 1e-3, 0.1, 1.0).unwrap();
    let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
    let draws = 6000;
    for seed in 0..draws {
        for column in random_assignment(&params, seed).unwrap().columns() {
            *counts.entry(column.clone()).or_default() += 1;
        }
    }
    assert_eq!(counts.len(), 6);
    // Each column is picked with probability 4/6 per draw.
    let expected = draws as f64 * 4.0 / 6.0;
    for (column, n) in counts {
        assert!((n as f64 - expected).abs() < 0.05 * expected, "{column:?}: {n}");
    }

    let full = SystemConfig::default().params(0.0).unwrap();
    let g = random_assignment(&full, 3).unwrap();
    let mut columns = g.columns().to_vec();
    columns.sort();
    columns.dedup();
    assert_eq!(columns.len(), 6);
}

#[test]
fn run_case_contracts() {
    let params = SystemConfig::default().params(10.0).unwrap();
    let solver = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for scenario in ["fig1_equal", "cond1", "cond2", "uniform"] {
        let scenario = scenario_by_name(scenario).unwrap();
        for _ in 0..10 {
            let seed: u64 = rng.random();
            let channel = generate_channel(&scenario, &params, seed).unwrap();
            let ppc = run_case(Case::PaPpc, &channel, &params, &solver, seed).unwrap();
            let pmp = run_case(Case::PaPmp, &channel, &params, &solver, seed).unwrap();
            assert_eq!(ppc.graph, pmp.graph);
            if ppc.allocation.converged && pmp.allocation.converged {
                assert!(ppc.allocation.ee >= pmp.allocation.ee);
            }
            let ra1 = run_case(Case::RaPmp, &channel, &params, &solver, seed).unwrap();
            let ra2 = run_case(Case::RaPmp, &channel, &params, &solver, seed).unwrap();
            assert_eq!(ra1.allocation.ee, ra2.allocation.ee);
        }
    }
    let small = Params64::with_equal_budget(4, 5, 2, 1e-15, 1e-3, 0.1, 1.0).unwrap();
    let channel = generate_channel(&scenario_by_name("uniform").unwrap(), &small, 1).unwrap();
    assert!(run_case(Case::FaPmp, &channel, &small, &solver, 1).is_err());
}

#[test]
fn single_trial_table_matches_run_case() {
    let config = ExperimentConfig {
        scenario: "cond1".into(),
        trials: 1,
        seed: 42,
        pmax_sweep_dbm: vec![-4.0, 12.0],
        ..ExperimentConfig::default()
    };
    let table = run_experiment(&config).unwrap();
    assert_eq!(table.len(), 4 * 2);
    let scenario = scenario_by_name("cond1").unwrap();
    let seed = trial_seed(42, 0);
    let solver = config.solver.solver_config();
    for row in &table {
        assert_eq!(row.seed, seed);
        let params = config.system.params(row.pmax_dbm).unwrap();
        let channel = generate_channel(&scenario, &params, seed).unwrap();
        let outcome = run_case(row.case, &channel, &params, &solver, seed).unwrap();
        assert_eq!(row.ee_mac, outcome.allocation.ee);
        assert_eq!(row.dinkelbach_iters, outcome.allocation.iterations());
        assert_eq!(row.converged, outcome.allocation.converged);
    }
}
