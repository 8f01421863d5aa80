use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use scma_ee::assignment::{
    count_factor_graphs, exhaustive_assignment, fast_assignment, fixed_assignment,
    random_assignment, CandidatePool,
};
use scma_ee::channel::{generate_channel, scenario_by_name};
use scma_ee::experiment::{
    emit_csv, format_summary, parse_cases, run_case, run_experiment, summarize, trial_seed,
    ExperimentConfig,
};
use scma_ee::{metrics, Result};

#[derive(Parser, Debug)]
#[command(name = "scma-ee", version, about = "Energy-efficient uplink SCMA resource allocation")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed (overrides the config).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Monte Carlo trials (overrides the config).
    #[arg(long, global = true, value_name = "N")]
    trials: Option<usize>,
    /// Output CSV path (overrides the config).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Comma-separated cases, e.g. PA-PPC,RA-PMP.
    #[arg(long = "case", global = true, value_name = "LIST")]
    cases: Option<String>,
    /// Scenario preset: fig1_equal, cond1, cond2, uniform.
    #[arg(long, global = true, value_name = "NAME")]
    scenario: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Greedy,
    Random,
    Fixed,
    Exhaustive,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the number of distinct factor graphs.
    Count {
        #[arg(short = 'K', long)]
        subcarriers: Option<usize>,
        #[arg(short = 'N', long)]
        sparsity: Option<usize>,
        #[arg(short = 'J', long)]
        users: Option<usize>,
    },
    /// Print a factor graph for one channel realization.
    Assign {
        #[arg(long, value_enum, default_value = "greedy")]
        method: Method,
        /// Per-user power budget, dBm.
        #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
        pmax_dbm: f64,
    },
    /// Run one case on one channel realization and print the Dinkelbach trace.
    Allocate {
        #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
        pmax_dbm: f64,
    },
    /// Run the full sweep and write the CSV.
    Experiment,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    if let Some(list) = &cli.cases {
        config.cases = parse_cases(list)?;
    }
    if let Some(name) = &cli.scenario {
        config.scenario = name.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Count {
            subcarriers,
            sparsity,
            users,
        } => {
            let k = subcarriers.unwrap_or(config.system.subcarriers);
            let n = sparsity.unwrap_or(config.system.sparsity);
            let j = users.unwrap_or(config.system.users);
            println!("{}", count_factor_graphs(k, n, j)?);
        }
        Command::Assign { method, pmax_dbm } => {
            let params = config.system.params(pmax_dbm)?;
            let scenario = scenario_by_name(&config.scenario)?;
            let seed = trial_seed(config.seed, 0);
            let channel = generate_channel(&scenario, &params, seed)?;
            let graph = match method {
                Method::Greedy => {
                    let pool = CandidatePool::shuffled(params.num_subcarriers(), params.sparsity(), seed)?;
                    fast_assignment(&channel, &params, pool)?
                }
                Method::Random => random_assignment(&params, seed)?,
                Method::Fixed => fixed_assignment(&params)?,
                Method::Exhaustive => exhaustive_assignment(&channel, &params)?.graph,
            };
            let ee = scma_ee::assignment::equal_split_ee(&graph, &channel, &params);
            println!("# scenario={} seed={seed} method={method:?}", config.scenario);
            print!("{graph}");
            println!("# equal-split EE (mac) = {ee}");
        }
        Command::Allocate { pmax_dbm } => {
            let params = config.system.params(pmax_dbm)?;
            let scenario = scenario_by_name(&config.scenario)?;
            let seed = trial_seed(config.seed, 0);
            let channel = generate_channel(&scenario, &params, seed)?;
            let solver = config.solver.solver_config();
            for &case in &config.cases {
                let outcome = run_case(case, &channel, &params, &solver, seed)?;
                let a = &outcome.allocation;
                println!("# case={case} scenario={} seed={seed} pmax_dbm={pmax_dbm}", config.scenario);
                print!("{}", outcome.graph);
                println!("iteration,omega,auxiliary");
                for step in &a.dinkelbach_trace {
                    println!("{},{},{}", step.iteration, step.omega, step.auxiliary);
                }
                let exact = metrics::sum_rate_exact(&outcome.graph, &a.power, &channel, &params);
                println!(
                    "ee={} sum_rate_mac={} sum_rate_exact={exact} total_power_w={} converged={}",
                    a.ee, a.sum_rate, a.total_power, a.converged
                );
                for (j, row) in a.power.rows().iter().enumerate() {
                    let cells: Vec<String> = row.iter().map(|p| format!("{p:.6e}")).collect();
                    println!("p[{j}] = {}", cells.join(" "));
                }
            }
        }
        Command::Experiment => {
            let table = run_experiment(&config)?;
            emit_csv(&table, &config.output)?;
            print!("{}", format_summary(&summarize(&table)));
            eprintln!("wrote {} rows to {}", table.len(), config.output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
