//! Factor-graph construction: greedy EE-increment assignment and the random,
//! fixed and exhaustive baselines.
//!
//! Every method here scores a factor graph with equal-split power
//! (`p_max[j] / N` per occupied subcarrier) and the MAC rate model.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{self, RateModel};
use crate::model::{binomial, validate_factor_graph, ChannelState, FactorGraph, PowerMatrix, SystemParams};
use crate::powalloc::equal_split_power;
use crate::scalar::Scalar;

/// Default ceiling on the number of factor graphs exhaustive search may visit.
pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 1_000_000;

/// Ordered set of distinct weight-`N` indicator columns to draw assignments from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePool {
    num_subcarriers: usize,
    columns: Vec<Vec<u8>>,
    seed: Option<u64>,
}

impl CandidatePool {
    /// Pool from explicit columns. Columns must be distinct, of length `K`
    /// and of equal weight.
    pub fn from_columns(num_subcarriers: usize, columns: Vec<Vec<u8>>) -> Result<Self> {
        let weight = columns.first().map_or(0, |c| c.iter().filter(|v| **v == 1).count());
        let graph = FactorGraph::from_columns(num_subcarriers, columns)?;
        if graph.num_users() > 0 {
            let params = SystemParams::<f64>::with_equal_budget(
                num_subcarriers,
                graph.num_users(),
                weight.max(1),
                1.0,
                0.0,
                1.0,
                1.0,
            )?;
            validate_factor_graph(&graph, &params)?;
        }
        Ok(Self {
            num_subcarriers,
            columns: graph.columns().to_vec(),
            seed: None,
        })
    }

    /// Every weight-`N` column uniformly shuffled with `seed`.
    pub fn shuffled(num_subcarriers: usize, sparsity: usize, seed: u64) -> Result<Self> {
        let mut pool = enumerate_candidates(num_subcarriers, sparsity)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pool.columns.shuffle(&mut rng);
        pool.seed = Some(seed);
        Ok(pool)
    }

    pub fn columns(&self) -> &[Vec<u8>] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }
}

/// All `C(K, N)` weight-`N` columns, lexicographic in their support positions.
pub fn enumerate_candidates(num_subcarriers: usize, sparsity: usize) -> Result<CandidatePool> {
    if sparsity > num_subcarriers {
        return Err(Error::InvalidParams(format!(
            "N={sparsity} exceeds K={num_subcarriers}"
        )));
    }
    let columns = (0..num_subcarriers)
        .combinations(sparsity)
        .map(|support| {
            let mut col = vec![0u8; num_subcarriers];
            for k in support {
                col[k] = 1;
            }
            col
        })
        .collect();
    Ok(CandidatePool {
        num_subcarriers,
        columns,
        seed: None,
    })
}

/// Number of distinct factor graphs: `prod_{j=1..J} (C(K,N) - (j-1))`.
pub fn count_factor_graphs(num_subcarriers: usize, sparsity: usize, num_users: usize) -> Result<u128> {
    let overflow = Error::CountOverflow {
        k: num_subcarriers,
        n: sparsity,
        j: num_users,
    };
    if sparsity > num_subcarriers {
        return Err(Error::InvalidParams(format!(
            "N={sparsity} exceeds K={num_subcarriers}"
        )));
    }
    let pool = binomial(num_subcarriers, sparsity).ok_or(overflow)?;
    if num_users as u128 > pool {
        return Err(Error::InvalidParams(format!(
            "J={num_users} exceeds C(K,N)={pool}"
        )));
    }
    (0..num_users as u128).try_fold(1u128, |acc, j| {
        acc.checked_mul(pool - j).ok_or(Error::CountOverflow {
            k: num_subcarriers,
            n: sparsity,
            j: num_users,
        })
    })
}

fn mac_ee<T: Scalar>(
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
) -> T {
    metrics::energy_efficiency(graph, power, channel, params, RateModel::Mac).value
}

/// EE gain from admitting the last user of `prefix` (a graph holding the
/// first `j` users' columns), with circuit power counted per admitted user.
pub fn ee_increment<T: Scalar>(
    prefix: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
) -> Result<T> {
    let j = prefix.num_users();
    if j == 0 {
        return Err(Error::Undefined("EE increment needs at least one admitted user"));
    }
    if j > params.num_users() || prefix.num_subcarriers() != params.num_subcarriers() {
        return Err(Error::DimensionMismatch {
            what: "factor graph prefix",
            expected: (params.num_subcarriers(), params.num_users()),
            found: (prefix.num_subcarriers(), j),
        });
    }
    let with = mac_ee(prefix, power, channel, params);
    let without = mac_ee(&prefix.prefix(j - 1), power, channel, params);
    Ok(with - without)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Column picked for disjoint support while `j N <= K`.
    Orthogonal,
    /// Column picked by largest EE increment.
    Greedy,
}

/// Record of one admitted user.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep<T> {
    /// 1-based user index.
    pub user: usize,
    pub phase: Phase,
    /// Position of the chosen column in the pool as it stood at this step.
    pub pool_index: usize,
    pub column: Vec<u8>,
    /// EE increment of every column scored at this step, in pool order.
    pub increments: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyTrace<T> {
    pub graph: FactorGraph,
    pub steps: Vec<GreedyStep<T>>,
}

impl<T> GreedyTrace<T> {
    /// Number of EE increments evaluated across all greedy steps.
    pub fn evaluations(&self) -> usize {
        self.steps.iter().map(|s| s.increments.len()).sum()
    }
}

/// Greedy assignment returning the factor graph only.
pub fn fast_assignment<T: Scalar>(
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
    pool: CandidatePool,
) -> Result<FactorGraph> {
    fast_assignment_traced(channel, params, pool).map(|t| t.graph)
}

/// Greedy assignment with a per-step record.
///
/// Users are admitted in index order. While `j N <= K` the first pool column
/// disjoint from everything chosen so far is taken; afterwards the column
/// with the largest EE increment wins, lowest pool index on ties. Chosen
/// columns leave the pool.
pub fn fast_assignment_traced<T: Scalar>(
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
    pool: CandidatePool,
) -> Result<GreedyTrace<T>> {
    let k = params.num_subcarriers();
    let n = params.sparsity();
    let users = params.num_users();
    if pool.num_subcarriers != k {
        return Err(Error::DimensionMismatch {
            what: "candidate pool",
            expected: (k, pool.len()),
            found: (pool.num_subcarriers, pool.len()),
        });
    }
    if (channel.num_users(), channel.num_subcarriers()) != (users, k) {
        return Err(Error::DimensionMismatch {
            what: "channel",
            expected: (users, k),
            found: (channel.num_users(), channel.num_subcarriers()),
        });
    }

    let mut remaining = pool.columns;
    let mut chosen: Vec<Vec<u8>> = Vec::with_capacity(users);
    let mut occupied = vec![false; k];
    let mut steps = Vec::with_capacity(users);

    for j in 1..=users {
        if j * n <= k {
            let idx = remaining
                .iter()
                .position(|c| c.iter().zip(&occupied).all(|(f, o)| *f == 0 || !*o))
                .ok_or(Error::Infeasible {
                    phase: "orthogonal",
                    user: j,
                })?;
            let column = remaining.remove(idx);
            for (o, f) in occupied.iter_mut().zip(&column) {
                *o |= *f != 0;
            }
            chosen.push(column.clone());
            steps.push(GreedyStep {
                user: j,
                phase: Phase::Orthogonal,
                pool_index: idx,
                column,
                increments: Vec::new(),
            });
            continue;
        }

        if remaining.is_empty() {
            return Err(Error::Infeasible {
                phase: "greedy",
                user: j,
            });
        }
        let base = FactorGraph::from_columns(k, chosen.clone())?;
        let power = equal_split_power(&base, params);
        let base_ee = mac_ee(&base, &power, channel, params);
        let mut increments = Vec::with_capacity(remaining.len());
        let mut best: Option<(usize, T)> = None;
        for (idx, column) in remaining.iter().enumerate() {
            let mut cols = chosen.clone();
            cols.push(column.clone());
            let trial = FactorGraph::from_columns(k, cols)?;
            let power = equal_split_power(&trial, params);
            // The subtracted term is common to every candidate at this step.
            let ee = mac_ee(&trial, &power, channel, params);
            increments.push(ee - base_ee);
            if best.is_none_or(|(_, b)| ee > b) {
                best = Some((idx, ee));
            }
        }
        let (idx, _) = best.expect("non-empty pool");
        let column = remaining.remove(idx);
        chosen.push(column.clone());
        steps.push(GreedyStep {
            user: j,
            phase: Phase::Greedy,
            pool_index: idx,
            column,
            increments,
        });
    }

    let graph = FactorGraph::from_columns(k, chosen)?;
    validate_factor_graph(&graph, params)?;
    Ok(GreedyTrace { graph, steps })
}

/// `J` distinct columns drawn uniformly without replacement.
pub fn random_assignment<T: Scalar>(params: &SystemParams<T>, seed: u64) -> Result<FactorGraph> {
    let pool = CandidatePool::shuffled(params.num_subcarriers(), params.sparsity(), seed)?;
    let columns = pool.columns[..params.num_users()].to_vec();
    FactorGraph::from_columns(params.num_subcarriers(), columns)
}

/// The standard 4 x 6 SCMA factor graph (degree 3 per subcarrier).
pub fn fixed_assignment<T: Scalar>(params: &SystemParams<T>) -> Result<FactorGraph> {
    let dims = (params.num_subcarriers(), params.sparsity(), params.num_users());
    if dims != (4, 2, 6) {
        return Err(Error::UnsupportedDimensions {
            k: dims.0,
            n: dims.1,
            j: dims.2,
        });
    }
    FactorGraph::from_rows(&[
        vec![1, 1, 1, 0, 0, 0],
        vec![1, 0, 0, 1, 1, 0],
        vec![0, 1, 0, 1, 0, 1],
        vec![0, 0, 1, 0, 1, 1],
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveResult<T> {
    pub graph: FactorGraph,
    pub ee: T,
    /// Number of factor graphs scored.
    pub evaluations: u128,
}

/// Scores every injective user-to-column mapping and keeps the best; ties go
/// to the lexicographically smallest column-index tuple.
pub fn exhaustive_assignment<T: Scalar>(
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
) -> Result<ExhaustiveResult<T>> {
    exhaustive_assignment_capped(channel, params, DEFAULT_EXHAUSTIVE_CAP)
}

pub fn exhaustive_assignment_capped<T: Scalar>(
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
    cap: u128,
) -> Result<ExhaustiveResult<T>> {
    let k = params.num_subcarriers();
    let users = params.num_users();
    let count = count_factor_graphs(k, params.sparsity(), users)?;
    if count > cap {
        return Err(Error::SearchTooLarge { count, cap });
    }
    if (channel.num_users(), channel.num_subcarriers()) != (users, k) {
        return Err(Error::DimensionMismatch {
            what: "channel",
            expected: (users, k),
            found: (channel.num_users(), channel.num_subcarriers()),
        });
    }
    let universe = enumerate_candidates(k, params.sparsity())?.columns;

    // Each user's received power per subcarrier for each candidate column
    // under equal split; a mapping's MAC rate is a sum over these.
    let sigma2 = params.noise_power();
    let contribution: Vec<Vec<Vec<T>>> = (0..users)
        .map(|j| {
            let share = params.max_power()[j] / T::from_usize_lossy(params.sparsity());
            universe
                .iter()
                .map(|col| {
                    (0..k)
                        .map(|s| {
                            if col[s] != 0 {
                                share * channel.gain2(j, s)
                            } else {
                                T::zero()
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let total_power: T = params.max_power().iter().copied().sum::<T>()
        + T::from_usize_lossy(users) * params.circuit_power();

    let mut best: Option<(Vec<usize>, T)> = None;
    let mut evaluations = 0u128;
    let mut received = vec![T::zero(); k];
    for mapping in (0..universe.len()).permutations(users) {
        evaluations += 1;
        received.iter_mut().for_each(|r| *r = T::zero());
        for (j, &c) in mapping.iter().enumerate() {
            for (r, add) in received.iter_mut().zip(&contribution[j][c]) {
                *r = *r + *add;
            }
        }
        let rate: T = received.iter().map(|r| (T::one() + *r / sigma2).log2()).sum();
        let ee = metrics::ratio(rate, total_power).value;
        if best.as_ref().is_none_or(|(_, b)| ee > *b) {
            best = Some((mapping, ee));
        }
    }
    let (mapping, ee) = best.ok_or(Error::Undefined("no factor graph to search"))?;
    let graph = FactorGraph::from_columns(k, mapping.iter().map(|&c| universe[c].clone()).collect())?;
    Ok(ExhaustiveResult {
        graph,
        ee,
        evaluations,
    })
}

/// EE of `graph` under equal-split power and the MAC model.
pub fn equal_split_ee<T: Scalar>(
    graph: &FactorGraph,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
) -> T {
    mac_ee(graph, &equal_split_power(graph, params), channel, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize, j: usize, n: usize) -> SystemParams<f64> {
        SystemParams::with_equal_budget(k, j, n, 1e-3, 1e-3, 0.2, 1.0).unwrap()
    }

    fn channel(users: usize, k: usize, salt: f64) -> ChannelState<f64> {
        let rows: Vec<Vec<f64>> = (0..users)
            .map(|j| (0..k).map(|s| 0.05 + ((j * k + s) as f64 * 0.77 + salt).sin().abs()).collect())
            .collect();
        ChannelState::from_gains(&rows).unwrap()
    }

    #[test]
    fn candidate_counts() {
        assert_eq!(enumerate_candidates(4, 2).unwrap().len(), 6);
        assert_eq!(enumerate_candidates(5, 2).unwrap().len(), 10);
        let unit = enumerate_candidates(4, 1).unwrap();
        assert_eq!(unit.columns()[0], vec![1, 0, 0, 0]);
        assert_eq!(unit.columns()[3], vec![0, 0, 0, 1]);
        assert!(enumerate_candidates(2, 3).is_err());
    }

    #[test]
    fn candidates_are_lexicographic() {
        let pool = enumerate_candidates(4, 2).unwrap();
        assert_eq!(
            pool.columns(),
            &[
                vec![1, 1, 0, 0],
                vec![1, 0, 1, 0],
                vec![1, 0, 0, 1],
                vec![0, 1, 1, 0],
                vec![0, 1, 0, 1],
                vec![0, 0, 1, 1],
            ]
        );
    }

    #[test]
    fn factor_graph_counts() {
        assert_eq!(count_factor_graphs(4, 2, 6).unwrap(), 720);
        assert_eq!(count_factor_graphs(4, 2, 1).unwrap(), 6);
        assert_eq!(count_factor_graphs(4, 1, 3).unwrap(), 24);
        assert!(count_factor_graphs(4, 2, 7).is_err());
        assert!(matches!(
            count_factor_graphs(64, 32, 40),
            Err(Error::CountOverflow { .. })
        ));
    }

    #[test]
    fn first_increment_is_single_user_ee() {
        let params = params(4, 6, 2);
        let h = channel(6, 4, 0.3);
        let g = FactorGraph::from_columns(4, vec![vec![0, 1, 1, 0]]).unwrap();
        let p = equal_split_power(&g, &params);
        let inc = ee_increment(&g, &p, &h, &params).unwrap();
        let ee = metrics::energy_efficiency(&g, &p, &h, &params, RateModel::Mac).value;
        assert_eq!(inc, ee);
        let empty = FactorGraph::from_columns(4, vec![]).unwrap();
        assert!(ee_increment(&empty, &p, &h, &params).is_err());
    }

    #[test]
    fn silent_user_has_negative_increment() {
        let params = params(4, 3, 2);
        let mut rows: Vec<Vec<f64>> = (0..3).map(|j| channel(3, 4, 0.1).user_gains(j).to_vec()).collect();
        rows[2] = vec![0.0; 4];
        let h = ChannelState::from_gains(&rows).unwrap();
        let g = FactorGraph::from_columns(4, vec![vec![1, 1, 0, 0], vec![0, 0, 1, 1], vec![1, 0, 1, 0]]).unwrap();
        let p = equal_split_power(&g, &params);
        assert!(ee_increment(&g, &p, &h, &params).unwrap() < 0.0);
    }

    #[test]
    fn two_users_cover_all_subcarriers() {
        let params = params(4, 2, 2);
        let pool = CandidatePool::shuffled(4, 2, 11).unwrap();
        let trace = fast_assignment_traced(&channel(2, 4, 0.0), &params, pool).unwrap();
        assert!(trace.graph.row_degrees().iter().all(|d| *d == 1));
        assert!(trace.steps.iter().all(|s| s.phase == Phase::Orthogonal));
        assert_eq!(trace.evaluations(), 0);
    }

    #[test]
    fn greedy_evaluates_remaining_tail() {
        let params = params(4, 6, 2);
        let pool = CandidatePool::shuffled(4, 2, 5).unwrap();
        let trace = fast_assignment_traced(&channel(6, 4, 0.9), &params, pool).unwrap();
        validate_factor_graph(&trace.graph, &params).unwrap();
        assert_eq!(trace.evaluations(), 4 + 3 + 2 + 1);
    }

    #[test]
    fn greedy_picks_the_best_increment() {
        let params = params(5, 8, 2);
        let pool = CandidatePool::shuffled(5, 2, 17).unwrap();
        let trace = fast_assignment_traced(&channel(8, 5, 1.7), &params, pool).unwrap();
        for step in trace.steps.iter().filter(|s| s.phase == Phase::Greedy) {
            let chosen = step.increments[step.pool_index];
            assert!(step.increments.iter().all(|v| *v <= chosen));
            assert!(step.increments[..step.pool_index].iter().all(|v| *v < chosen));
        }
    }

    #[test]
    fn symmetric_channel_still_valid() {
        let params = params(4, 6, 2);
        let h = ChannelState::from_gains(&vec![vec![0.5; 4]; 6]).unwrap();
        let g = fast_assignment(&h, &params, CandidatePool::shuffled(4, 2, 1).unwrap()).unwrap();
        validate_factor_graph(&g, &params).unwrap();
        let fixed = fixed_assignment(&params).unwrap();
        let a = equal_split_ee(&g, &h, &params);
        let b = equal_split_ee(&fixed, &h, &params);
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn orthogonal_phase_infeasible_pool() {
        let params = params(4, 2, 2);
        let pool = CandidatePool::from_columns(4, vec![vec![1, 1, 0, 0], vec![1, 0, 1, 0]]).unwrap();
        assert!(matches!(
            fast_assignment(&channel(2, 4, 0.0), &params, pool),
            Err(Error::Infeasible { phase: "orthogonal", user: 2 })
        ));
    }

    #[test]
    fn exhausted_pool_is_reported() {
        let params = params(4, 3, 2);
        let pool = CandidatePool::from_columns(4, vec![vec![1, 1, 0, 0], vec![0, 0, 1, 1]]).unwrap();
        assert!(matches!(
            fast_assignment(&channel(3, 4, 0.0), &params, pool),
            Err(Error::Infeasible { phase: "greedy", user: 3 })
        ));
    }

    #[test]
    fn random_assignment_is_seeded() {
        let params = params(5, 7, 2);
        let a = random_assignment(&params, 42).unwrap();
        assert_eq!(a, random_assignment(&params, 42).unwrap());
        validate_factor_graph(&a, &params).unwrap();
    }

    #[test]
    fn fixed_graph_structure() {
        let params = params(4, 6, 2);
        let g = fixed_assignment(&params).unwrap();
        validate_factor_graph(&g, &params).unwrap();
        assert_eq!(g.row_degrees(), vec![3, 3, 3, 3]);
        assert!(matches!(
            fixed_assignment(&self::params(5, 6, 2)),
            Err(Error::UnsupportedDimensions { .. })
        ));
    }

    #[test]
    fn exhaustive_single_user_picks_best_column() {
        let params = params(4, 1, 2);
        let h = channel(1, 4, 2.2);
        let res = exhaustive_assignment(&h, &params).unwrap();
        assert_eq!(res.evaluations, 6);
        let best = enumerate_candidates(4, 2)
            .unwrap()
            .columns()
            .iter()
            .map(|c| equal_split_ee(&FactorGraph::from_columns(4, vec![c.clone()]).unwrap(), &h, &params))
            .fold(f64::MIN, f64::max);
        assert_eq!(res.ee, best);
    }

    #[test]
    fn exhaustive_matches_direct_scoring_and_dominates() {
        let params = params(4, 6, 2);
        let h = channel(6, 4, 0.4);
        let res = exhaustive_assignment(&h, &params).unwrap();
        assert_eq!(res.evaluations, 720);
        let direct = equal_split_ee(&res.graph, &h, &params);
        assert!((direct - res.ee).abs() <= 1e-12 * direct);
        let greedy = fast_assignment(&h, &params, CandidatePool::shuffled(4, 2, 3).unwrap()).unwrap();
        assert!(res.ee >= equal_split_ee(&greedy, &h, &params) - 1e-12 * res.ee);
    }

    #[test]
    fn exhaustive_cap_refuses() {
        let params = params(4, 6, 2);
        assert!(matches!(
            exhaustive_assignment_capped(&channel(6, 4, 0.0), &params, 719),
            Err(Error::SearchTooLarge { count: 720, cap: 719 })
        ));
    }
}
