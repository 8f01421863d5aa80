//! Monte Carlo harness behind the command line: configuration, the four
//! resource-allocation pipelines, the sweep driver and CSV/summary output.
//!
//! Every trial draws one channel realization from a seed derived from the
//! base seed and the trial index; all cases and all budget points of a trial
//! share that channel. Trials run in parallel and are merged in a fixed order,
//! so the CSV bytes depend only on the configuration.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::assignment::{fast_assignment, fixed_assignment, random_assignment, CandidatePool};
use crate::channel::{dbm_to_watts, generate_channel, noise_power_from_spec, scenario_by_name};
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{AllocationResult, ChannelState, FactorGraph, SystemParams};
use crate::powalloc::{
    dinkelbach_allocate, OwnTerm, PowerMode, Schedule, SolverConfig, StepRule, UpdateOrder,
};

/// Exact CSV header written by [`write_csv`].
pub const CSV_HEADER: &str = "case,scenario,pmax_dbm,trial,seed,ee_mac,ee_exact,sum_rate_mac,sum_rate_exact,total_power_w,dinkelbach_iters,converged";

const POOL_STREAM: u64 = 0x5043_414e_4449_4441;
const RANDOM_STREAM: u64 = 0x5241_4e44_4f4d_4153;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial`: `splitmix64(base + trial)`. Adding trials never
/// changes the seeds of earlier ones.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    splitmix64(base.wrapping_add(trial as u64))
}

/// Resource-allocation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    /// Greedy assignment, inequality budget.
    PaPpc,
    /// Greedy assignment, full budget.
    PaPmp,
    /// Random assignment, full budget.
    RaPmp,
    /// Fixed 4 x 6 graph, full budget.
    FaPmp,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::PaPpc, Case::PaPmp, Case::RaPmp, Case::FaPmp];

    pub fn as_str(self) -> &'static str {
        match self {
            Case::PaPpc => "PA-PPC",
            Case::PaPmp => "PA-PMP",
            Case::RaPmp => "RA-PMP",
            Case::FaPmp => "FA-PMP",
        }
    }

    pub fn mode(self) -> PowerMode {
        match self {
            Case::PaPpc => PowerMode::Ppc,
            _ => PowerMode::Pmp,
        }
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        let key = key.strip_prefix("SCMA-").unwrap_or(&key);
        Case::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| Error::UnknownCase(s.to_string()))
    }
}

impl<'de> Deserialize<'de> for Case {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated case list.
pub fn parse_cases(list: &str) -> Result<Vec<Case>> {
    let cases = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if cases.is_empty() {
        return Err(Error::Config("case list is empty".into()));
    }
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub subcarriers: usize,
    pub users: usize,
    pub sparsity: usize,
    pub noise_density_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub circuit_power_w: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            subcarriers: 4,
            users: 6,
            sparsity: 2,
            noise_density_dbm_hz: -174.0,
            bandwidth_hz: 180e3,
            circuit_power_w: 1e-3,
        }
    }
}

impl SystemConfig {
    /// Parameters with every user's budget set to `pmax_dbm`.
    pub fn params(&self, pmax_dbm: f64) -> Result<SystemParams<f64>> {
        SystemParams::with_equal_budget(
            self.subcarriers,
            self.users,
            self.sparsity,
            noise_power_from_spec(self.noise_density_dbm_hz, self.bandwidth_hz)?,
            self.circuit_power_w,
            dbm_to_watts(pmax_dbm),
            self.bandwidth_hz,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ScheduleName {
    Literal,
    Nested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum OrderName {
    Jacobi,
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum OwnTermName {
    Include,
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum StepRuleName {
    Constant,
    Diminishing,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    epsilon: f64,
    beta: f64,
    initial_multiplier: f64,
    max_outer_iters: usize,
    max_inner_iters: usize,
    inner_tolerance: f64,
    schedule: ScheduleName,
    order: OrderName,
    own_term: OwnTermName,
    step_rule: StepRuleName,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::<f64>::default();
        Self {
            epsilon: d.epsilon,
            beta: d.beta[0],
            initial_multiplier: d.initial_multiplier,
            max_outer_iters: d.max_outer_iters,
            max_inner_iters: d.max_inner_iters,
            inner_tolerance: d.inner_tolerance,
            schedule: ScheduleName::Nested,
            order: OrderName::GaussSeidel,
            own_term: OwnTermName::Exclude,
            step_rule: StepRuleName::Constant,
        }
    }
}

impl SolverSection {
    pub fn solver_config(&self) -> SolverConfig<f64> {
        SolverConfig {
            epsilon: self.epsilon,
            beta: vec![self.beta],
            initial_multiplier: self.initial_multiplier,
            max_outer_iters: self.max_outer_iters,
            max_inner_iters: self.max_inner_iters,
            inner_tolerance: self.inner_tolerance,
            mode: PowerMode::Ppc,
            schedule: match self.schedule {
                ScheduleName::Literal => Schedule::Literal,
                ScheduleName::Nested => Schedule::Nested,
            },
            order: match self.order {
                OrderName::Jacobi => UpdateOrder::Jacobi,
                OrderName::GaussSeidel => UpdateOrder::GaussSeidel,
            },
            own_term: match self.own_term {
                OwnTermName::Include => OwnTerm::Include,
                OwnTermName::Exclude => OwnTerm::Exclude,
            },
            step_rule: match self.step_rule {
                StepRuleName::Constant => StepRule::Constant,
                StepRuleName::Diminishing => StepRule::Diminishing,
            },
        }
    }
}

/// Sweep definition, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub trials: usize,
    pub seed: u64,
    pub cases: Vec<Case>,
    pub pmax_sweep_dbm: Vec<f64>,
    pub output: PathBuf,
    pub system: SystemConfig,
    pub solver: SolverSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "fig1_equal".into(),
            trials: 150,
            seed: 1,
            cases: Case::ALL.to_vec(),
            pmax_sweep_dbm: (0..=15).map(|i| 2.0 * i as f64).collect(),
            output: PathBuf::from("results.csv"),
            system: SystemConfig::default(),
            solver: SolverSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.pmax_sweep_dbm.is_empty() {
            return Err(Error::Config("pmax sweep is empty".into()));
        }
        if self.pmax_sweep_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("pmax sweep has non-finite values".into()));
        }
        if self.cases.is_empty() {
            return Err(Error::Config("no cases selected".into()));
        }
        scenario_by_name::<f64>(&self.scenario)?;
        self.system.params(self.pmax_sweep_dbm[0])?;
        self.solver.solver_config().validate(self.system.users)?;
        Ok(())
    }
}

/// Factor graph and power allocation produced by one pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    pub graph: FactorGraph,
    pub allocation: AllocationResult<f64>,
}

/// Runs one pipeline on one channel. `seed` is the trial seed; the greedy
/// pool shuffle and the random assignment draw from streams derived from it.
pub fn run_case(
    case: Case,
    channel: &ChannelState<f64>,
    params: &SystemParams<f64>,
    solver: &SolverConfig<f64>,
    seed: u64,
) -> Result<CaseOutcome> {
    let graph = match case {
        Case::PaPpc | Case::PaPmp => {
            let pool = CandidatePool::shuffled(
                params.num_subcarriers(),
                params.sparsity(),
                splitmix64(seed ^ POOL_STREAM),
            )?;
            fast_assignment(channel, params, pool)?
        }
        Case::RaPmp => random_assignment(params, splitmix64(seed ^ RANDOM_STREAM))?,
        Case::FaPmp => fixed_assignment(params)?,
    };
    let config = solver.clone().with_mode(case.mode());
    let allocation = dinkelbach_allocate(&graph, channel, params, &config)?;
    Ok(CaseOutcome { graph, allocation })
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub case: Case,
    pub scenario: String,
    pub pmax_dbm: f64,
    pub trial: usize,
    pub seed: u64,
    pub ee_mac: f64,
    pub ee_exact: f64,
    pub sum_rate_mac: f64,
    pub sum_rate_exact: f64,
    pub total_power_w: f64,
    pub dinkelbach_iters: usize,
    pub converged: bool,
}

fn record(
    case: Case,
    scenario: &str,
    pmax_dbm: f64,
    trial: usize,
    seed: u64,
    channel: &ChannelState<f64>,
    params: &SystemParams<f64>,
    outcome: &CaseOutcome,
) -> TrialRecord {
    let power = &outcome.allocation.power;
    let sum_rate_mac = metrics::sum_rate_mac(&outcome.graph, power, channel, params);
    let sum_rate_exact = metrics::sum_rate_exact(&outcome.graph, power, channel, params);
    let total = metrics::total_power(&outcome.graph, power, params);
    TrialRecord {
        case,
        scenario: scenario.to_string(),
        pmax_dbm,
        trial,
        seed,
        ee_mac: metrics::ratio(sum_rate_mac, total).value,
        ee_exact: metrics::ratio(sum_rate_exact, total).value,
        sum_rate_mac,
        sum_rate_exact,
        total_power_w: total,
        dinkelbach_iters: outcome.allocation.iterations(),
        converged: outcome.allocation.converged,
    }
}

/// Runs every (trial, budget, case) combination. Rows come back sorted by
/// case (in [`Case::ALL`] order), then sweep position, then trial.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let scenario = scenario_by_name::<f64>(&config.scenario)?;
    let solver = config.solver.solver_config();
    let sweep: Vec<(usize, f64, SystemParams<f64>)> = config
        .pmax_sweep_dbm
        .iter()
        .enumerate()
        .map(|(i, &dbm)| Ok((i, dbm, config.system.params(dbm)?)))
        .collect::<Result<_>>()?;
    let mut cases = config.cases.clone();
    cases.sort();
    cases.dedup();

    let per_trial: Vec<Vec<(usize, TrialRecord)>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(config.seed, trial);
            let channel = generate_channel(&scenario, &sweep[0].2, seed)?;
            let mut rows = Vec::with_capacity(sweep.len() * cases.len());
            for (i, dbm, params) in &sweep {
                for &case in &cases {
                    let outcome = run_case(case, &channel, params, &solver, seed)?;
                    rows.push((
                        *i,
                        record(case, &config.scenario, *dbm, trial, seed, &channel, params, &outcome),
                    ));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<(usize, TrialRecord)> = per_trial.into_iter().flatten().collect();
    rows.sort_by_key(|(i, r)| (r.case, *i, r.trial));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Writes the header and one line per record.
pub fn write_csv<W: Write>(table: &[TrialRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in table {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.case,
            r.scenario,
            r.pmax_dbm,
            r.trial,
            r.seed,
            r.ee_mac,
            r.ee_exact,
            r.sum_rate_mac,
            r.sum_rate_exact,
            r.total_power_w,
            r.dinkelbach_iters,
            r.converged
        )?;
    }
    out.flush()
}

pub fn emit_csv(table: &[TrialRecord], path: &Path) -> Result<()> {
    if table.is_empty() {
        return Err(Error::Config("refusing to write an empty table".into()));
    }
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    write_csv(table, std::io::BufWriter::new(file)).map_err(io_err)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub case: Case,
    pub pmax_dbm: f64,
    pub trials: usize,
    pub converged: usize,
    pub mean_ee: f64,
    /// Standard error of the mean (sample standard deviation over `sqrt(n)`).
    pub stderr_ee: f64,
}

/// Mean and standard error of `ee_mac` per (case, budget), in table order.
pub fn summarize(table: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<(Case, f64, Vec<&TrialRecord>)> = Vec::new();
    for r in table {
        match groups.last_mut() {
            Some((c, p, rows)) if *c == r.case && *p == r.pmax_dbm => rows.push(r),
            _ => groups.push((r.case, r.pmax_dbm, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(case, pmax_dbm, rows)| {
            let n = rows.len();
            let mean = rows.iter().map(|r| r.ee_mac).sum::<f64>() / n as f64;
            let var = if n > 1 {
                rows.iter().map(|r| (r.ee_mac - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            SummaryRow {
                case,
                pmax_dbm,
                trials: n,
                converged: rows.iter().filter(|r| r.converged).count(),
                mean_ee: mean,
                stderr_ee: (var / n as f64).sqrt(),
            }
        })
        .collect()
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:>9} {:>7} {:>10} {:>16} {:>12}",
        "case", "pmax_dbm", "trials", "converged", "mean_ee", "stderr"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<8} {:>9} {:>7} {:>10} {:>16.6} {:>12.6}",
            r.case.as_str(),
            r.pmax_dbm,
            r.trials,
            r.converged,
            r.mean_ee,
            r.stderr_ee
        );
    }
    out
}
