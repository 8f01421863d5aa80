//! Energy-efficient power allocation for a fixed factor graph.
//!
//! The outer loop is Dinkelbach's method on the ratio `R(P) / P_tot(P)`: for a
//! parameter `omega` it maximizes the subtractive form
//! `A(omega, P) = R(P) - omega * P_tot(P)` and then moves `omega` to the ratio
//! achieved. The subtractive problem is handled by alternating a KKT
//! (water-filling) power update with a projected subgradient step on the
//! per-user budget multipliers.
//!
//! The solver keeps a feasible incumbent. A power update is only adopted when
//! it raises `A(omega, .)` and does not lower the ratio, which makes the
//! sequence of `omega` values non-decreasing by construction.

use crate::error::{Error, Result};
use crate::metrics::{self, ratio};
use crate::model::{
    validate_factor_graph, AllocationResult, ChannelState, DinkelbachStep, FactorGraph,
    PowerMatrix, SystemParams,
};
use crate::scalar::Scalar;

/// Budget constraint flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerMode {
    /// `sum_k p_{j,k} <= p_max[j]`.
    #[default]
    Ppc,
    /// `sum_k p_{j,k} = p_max[j]`.
    Pmp,
}

/// How power updates and ratio updates interleave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// One power sweep and one multiplier step per ratio update.
    Literal,
    /// Power/multiplier iterations run to a fixed point before each ratio update.
    #[default]
    Nested,
}

/// Which iterate the KKT update reads co-channel powers from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateOrder {
    /// Every entry reads the previous matrix.
    Jacobi,
    /// Entries read values already updated in the current sweep.
    #[default]
    GaussSeidel,
}

/// Whether the subtracted aggregate in the KKT update contains the user's own
/// previous received power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OwnTerm {
    Include,
    #[default]
    Exclude,
}

/// Multiplier step-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    #[default]
    Constant,
    /// `beta_j / sqrt(t)` at multiplier iteration `t`.
    Diminishing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    /// Stop once the auxiliary value drops below this.
    pub epsilon: T,
    /// Per-user subgradient steps; a single entry applies to every user.
    pub beta: Vec<T>,
    pub initial_multiplier: T,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub inner_tolerance: T,
    pub mode: PowerMode,
    pub schedule: Schedule,
    pub order: UpdateOrder,
    pub own_term: OwnTerm,
    pub step_rule: StepRule,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(1e-6),
            beta: vec![T::one()],
            initial_multiplier: T::one(),
            max_outer_iters: 500,
            max_inner_iters: 1000,
            inner_tolerance: T::lit(1e-8),
            mode: PowerMode::Ppc,
            schedule: Schedule::Nested,
            order: UpdateOrder::GaussSeidel,
            own_term: OwnTerm::Exclude,
            step_rule: StepRule::Constant,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn with_mode(mut self, mode: PowerMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self, num_users: usize) -> Result<()> {
        if !(self.epsilon > T::zero()) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.beta.len() != 1 && self.beta.len() != num_users {
            return Err(Error::Config(format!(
                "beta must have 1 or {num_users} entries, got {}",
                self.beta.len()
            )));
        }
        if self.beta.iter().any(|b| !(*b > T::zero())) {
            return Err(Error::Config("beta entries must be positive".into()));
        }
        if !(self.initial_multiplier >= T::zero()) {
            return Err(Error::Config("initial multiplier must be nonnegative".into()));
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        if !(self.inner_tolerance >= T::zero()) {
            return Err(Error::Config("inner tolerance must be nonnegative".into()));
        }
        Ok(())
    }

    /// Step size for `user` at multiplier iteration `iteration` (1-based).
    pub fn step_size(&self, user: usize, iteration: usize) -> T {
        let beta = if self.beta.len() == 1 {
            self.beta[0]
        } else {
            self.beta[user]
        };
        match self.step_rule {
            StepRule::Constant => beta,
            StepRule::Diminishing => beta / T::from_usize_lossy(iteration.max(1)).sqrt(),
        }
    }
}

/// `p_max[j] / N` on every assigned entry.
///
/// Rows for users beyond `graph.num_users()` stay zero, so prefixes of a
/// factor graph can be evaluated against the full parameter set.
pub fn equal_split_power<T: Scalar>(graph: &FactorGraph, params: &SystemParams<T>) -> PowerMatrix<T> {
    let mut power = PowerMatrix::zeros(params.num_users(), params.num_subcarriers());
    for j in 0..graph.num_users().min(params.num_users()) {
        let weight = graph.support(j).count();
        if weight == 0 {
            continue;
        }
        let share = params.max_power()[j] / T::from_usize_lossy(weight);
        for k in graph.support(j).collect::<Vec<_>>() {
            power.set(j, k, share);
        }
    }
    power
}

/// `A(omega, P) = R_mac(P) - omega * P_tot(P)`.
pub fn auxiliary_value<T: Scalar>(
    omega: T,
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
) -> T {
    metrics::sum_rate_mac(graph, power, channel, params)
        - omega * metrics::total_power(graph, power, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KktOptions {
    pub order: UpdateOrder,
    pub own_term: OwnTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktUpdate<T> {
    pub power: PowerMatrix<T>,
    /// Assigned `(user, subcarrier)` entries with zero gain, forced to zero.
    pub dead_entries: Vec<(usize, usize)>,
}

/// One water-filling sweep over every assigned entry.
///
/// Each entry becomes
/// `clamp(1 / ((lambda_j + omega) ln 2) - (sigma^2 + I) / |h_{j,k}|^2, 0, p_max[j])`
/// where `I` is the aggregate received power on the subcarrier, with or
/// without the user's own term. The upper clamp is implied by the budget and
/// keeps the update finite when `lambda_j + omega = 0`.
pub fn kkt_power_update<T: Scalar>(
    previous: &PowerMatrix<T>,
    lambda: &[T],
    omega: T,
    graph: &FactorGraph,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
    options: KktOptions,
) -> Result<KktUpdate<T>> {
    let users = params.num_users();
    let subcarriers = params.num_subcarriers();
    if (previous.num_users(), previous.num_subcarriers()) != (users, subcarriers) {
        return Err(Error::DimensionMismatch {
            what: "power matrix",
            expected: (users, subcarriers),
            found: (previous.num_users(), previous.num_subcarriers()),
        });
    }
    if lambda.len() != users {
        return Err(Error::DimensionMismatch {
            what: "multipliers",
            expected: (users, 1),
            found: (lambda.len(), 1),
        });
    }
    if !(omega >= T::zero()) || lambda.iter().any(|l| !(*l >= T::zero())) {
        return Err(Error::InvalidParams(
            "multipliers and omega must be nonnegative".into(),
        ));
    }

    let sigma2 = params.noise_power();
    let ln2 = T::LN_2();
    let mut next = previous.clone();
    let mut dead_entries = Vec::new();
    // Aggregate received power per subcarrier at the iterate being read.
    let mut aggregate: Vec<T> = (0..subcarriers)
        .map(|k| metrics::aggregate(k, graph, previous, channel))
        .collect();

    for j in 0..users {
        let denom = lambda[j] + omega;
        let level = if denom > T::zero() {
            T::one() / (denom * ln2)
        } else {
            T::infinity()
        };
        let cap = params.max_power()[j];
        for k in 0..subcarriers {
            if !graph.is_assigned(j, k) {
                next.set(j, k, T::zero());
                continue;
            }
            let gain = channel.gain2(j, k);
            let source = match options.order {
                UpdateOrder::Jacobi => previous.get(j, k),
                UpdateOrder::GaussSeidel => next.get(j, k),
            };
            let value = if gain > T::zero() {
                let subtracted = match options.own_term {
                    OwnTerm::Include => aggregate[k],
                    OwnTerm::Exclude => (aggregate[k] - source * gain).max(T::zero()),
                };
                (level - (sigma2 + subtracted) / gain).max(T::zero()).min(cap)
            } else {
                dead_entries.push((j, k));
                T::zero()
            };
            next.set(j, k, value);
            if options.order == UpdateOrder::GaussSeidel {
                aggregate[k] = aggregate[k] + (value - source) * gain;
            }
        }
    }
    Ok(KktUpdate {
        power: next,
        dead_entries,
    })
}

/// Projected subgradient step
/// `lambda_j <- max(0, lambda_j - beta_j (p_max[j] - sum_k p_{j,k}))`.
pub fn multiplier_update<T: Scalar>(
    lambda: &[T],
    power: &PowerMatrix<T>,
    params: &SystemParams<T>,
    config: &SolverConfig<T>,
    iteration: usize,
) -> Vec<T> {
    lambda
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let slack = params.max_power()[j] - power.row_sum(j);
            (l - config.step_size(j, iteration) * slack).max(T::zero())
        })
        .collect()
}

/// Maps an update onto the feasible set of `mode`: rows over budget are
/// scaled down (PPC) or every row is scaled onto its budget (PMP, all-zero
/// rows get an equal split).
pub fn project_to_budget<T: Scalar>(
    power: &PowerMatrix<T>,
    graph: &FactorGraph,
    params: &SystemParams<T>,
    mode: PowerMode,
) -> PowerMatrix<T> {
    let mut out = power.clone();
    for j in 0..params.num_users() {
        let budget = params.max_power()[j];
        let total = out.row_sum(j);
        match mode {
            PowerMode::Ppc if total > budget => {
                let scale = budget / total;
                out.row_mut(j).iter_mut().for_each(|p| *p = *p * scale);
            }
            PowerMode::Ppc => {}
            PowerMode::Pmp if total > T::zero() => {
                let scale = budget / total;
                out.row_mut(j).iter_mut().for_each(|p| *p = *p * scale);
            }
            PowerMode::Pmp => {
                let support: Vec<usize> = graph.support(j).collect();
                let share = budget / T::from_usize_lossy(support.len().max(1));
                for k in support {
                    out.set(j, k, share);
                }
            }
        }
    }
    out
}

fn check_channel<T: Scalar>(channel: &ChannelState<T>, params: &SystemParams<T>) -> Result<()> {
    let expected = (params.num_users(), params.num_subcarriers());
    let found = (channel.num_users(), channel.num_subcarriers());
    if expected != found {
        return Err(Error::DimensionMismatch {
            what: "channel",
            expected,
            found,
        });
    }
    Ok(())
}

/// Dinkelbach power allocation for a fixed factor graph.
///
/// Never panics on slow convergence: hitting `max_outer_iters` returns the
/// incumbent with `converged = false`.
pub fn dinkelbach_allocate<T: Scalar>(
    graph: &FactorGraph,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
    config: &SolverConfig<T>,
) -> Result<AllocationResult<T>> {
    validate_factor_graph(graph, params)?;
    check_channel(channel, params)?;
    config.validate(params.num_users())?;

    let options = KktOptions {
        order: config.order,
        own_term: config.own_term,
    };
    let power_scale = params
        .max_power()
        .iter()
        .copied()
        .fold(T::zero(), T::max);
    let inner_cap = match config.schedule {
        Schedule::Literal => 1,
        Schedule::Nested => config.max_inner_iters,
    };

    let mut incumbent = equal_split_power(graph, params);
    let mut working = incumbent.clone();
    let mut lambda = vec![config.initial_multiplier; params.num_users()];
    let mut omega = T::zero();
    let mut sweeps = 0usize;
    let mut trace = Vec::new();
    let mut converged = false;

    for t in 1..=config.max_outer_iters {
        for _ in 0..inner_cap {
            sweeps += 1;
            let next = kkt_power_update(&working, &lambda, omega, graph, channel, params, options)?
                .power;
            let next_lambda = multiplier_update(&lambda, &next, params, config, sweeps);
            let dp = next.max_abs_diff(&working) / power_scale;
            let lambda_scale = lambda.iter().copied().fold(T::one(), T::max);
            let dl = next_lambda
                .iter()
                .zip(&lambda)
                .map(|(a, b)| (*a - *b).abs())
                .fold(T::zero(), T::max)
                / lambda_scale;
            working = next;
            lambda = next_lambda;
            if dp <= config.inner_tolerance && dl <= config.inner_tolerance {
                break;
            }
        }

        let candidate = project_to_budget(&working, graph, params, config.mode);
        let a_incumbent = auxiliary_value(omega, graph, &incumbent, channel, params);
        let a_candidate = auxiliary_value(omega, graph, &candidate, channel, params);
        let ee_candidate =
            metrics::energy_efficiency(graph, &candidate, channel, params, metrics::RateModel::Mac);
        if a_candidate >= a_incumbent && ee_candidate.value >= omega {
            incumbent = candidate;
        }

        let auxiliary = auxiliary_value(omega, graph, &incumbent, channel, params);
        trace.push(DinkelbachStep {
            iteration: t,
            omega,
            auxiliary,
        });
        let done = match config.schedule {
            Schedule::Literal => auxiliary < config.epsilon,
            Schedule::Nested => auxiliary.abs() < config.epsilon,
        };
        if done {
            converged = true;
            break;
        }
        omega =
            metrics::energy_efficiency(graph, &incumbent, channel, params, metrics::RateModel::Mac)
                .value;
    }

    let sum_rate = metrics::sum_rate_mac(graph, &incumbent, channel, params);
    let total_power = metrics::total_power(graph, &incumbent, params);
    Ok(AllocationResult {
        ee: ratio(sum_rate, total_power).value,
        sum_rate,
        total_power,
        power: incumbent,
        multipliers: lambda,
        dinkelbach_trace: trace,
        converged,
    })
}
