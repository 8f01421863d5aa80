//! Domain types: system constants, factor graphs, channel and power matrices.
//!
//! Factor graphs are stored per user (one indicator column per user) because
//! assignment builds them a column at a time. Channel gains and powers are
//! stored user-major (`J x K`, row `j` belongs to user `j`).

use crate::error::{Error, Result, Violation};
use crate::scalar::{budget_tolerance, Scalar};

/// Number of `n`-subsets of a `k`-set, or `None` on overflow.
pub fn binomial(k: usize, n: usize) -> Option<u128> {
    if n > k {
        return Some(0);
    }
    let n = n.min(k - n);
    let mut acc: u128 = 1;
    for i in 0..n {
        acc = acc.checked_mul((k - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Dimensional and physical constants of the uplink.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams<T> {
    num_subcarriers: usize,
    num_users: usize,
    sparsity: usize,
    noise_power: T,
    circuit_power: T,
    max_power: Vec<T>,
    bandwidth: T,
}

impl<T: Scalar> SystemParams<T> {
    /// Validated constructor. `max_power` holds one budget per user.
    pub fn new(
        num_subcarriers: usize,
        num_users: usize,
        sparsity: usize,
        noise_power: T,
        circuit_power: T,
        max_power: Vec<T>,
        bandwidth: T,
    ) -> Result<Self> {
        if num_subcarriers == 0 || num_users == 0 || sparsity == 0 {
            return Err(Error::InvalidParams(
                "K, J and N must be positive".to_string(),
            ));
        }
        if sparsity > num_subcarriers {
            return Err(Error::InvalidParams(format!(
                "codeword sparsity N={sparsity} exceeds K={num_subcarriers}"
            )));
        }
        let pool = binomial(num_subcarriers, sparsity).unwrap_or(u128::MAX);
        if (num_users as u128) > pool {
            return Err(Error::InvalidParams(format!(
                "J={num_users} exceeds C(K={num_subcarriers}, N={sparsity})={pool}; distinct columns impossible"
            )));
        }
        if !(noise_power > T::zero()) || !noise_power.is_finite() {
            return Err(Error::InvalidParams(format!(
                "noise power must be positive and finite, got {noise_power}"
            )));
        }
        if !(circuit_power >= T::zero()) || !circuit_power.is_finite() {
            return Err(Error::InvalidParams(format!(
                "circuit power must be nonnegative, got {circuit_power}"
            )));
        }
        if max_power.len() != num_users {
            return Err(Error::InvalidParams(format!(
                "expected {num_users} power budgets, got {}",
                max_power.len()
            )));
        }
        if let Some((j, p)) = max_power
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p > T::zero()) || !p.is_finite())
        {
            return Err(Error::InvalidParams(format!(
                "power budget of user {j} must be positive, got {p}"
            )));
        }
        if !(bandwidth > T::zero()) {
            return Err(Error::InvalidParams(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self {
            num_subcarriers,
            num_users,
            sparsity,
            noise_power,
            circuit_power,
            max_power,
            bandwidth,
        })
    }

    /// Same budget `p_max` for every user.
    pub fn with_equal_budget(
        num_subcarriers: usize,
        num_users: usize,
        sparsity: usize,
        noise_power: T,
        circuit_power: T,
        p_max: T,
        bandwidth: T,
    ) -> Result<Self> {
        Self::new(
            num_subcarriers,
            num_users,
            sparsity,
            noise_power,
            circuit_power,
            vec![p_max; num_users],
            bandwidth,
        )
    }

    /// Copy with every user's budget replaced by `p_max`.
    pub fn with_budget(&self, p_max: T) -> Result<Self> {
        Self::new(
            self.num_subcarriers,
            self.num_users,
            self.sparsity,
            self.noise_power,
            self.circuit_power,
            vec![p_max; self.num_users],
            self.bandwidth,
        )
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    pub fn noise_power(&self) -> T {
        self.noise_power
    }

    pub fn circuit_power(&self) -> T {
        self.circuit_power
    }

    pub fn max_power(&self) -> &[T] {
        &self.max_power
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    /// `J / K`; above one the system is overloaded.
    pub fn overloading_factor(&self) -> f64 {
        self.num_users as f64 / self.num_subcarriers as f64
    }
}

/// `K x J` binary subcarrier-to-user assignment, held as one column per user.
///
/// Entries are kept as raw bytes so that invalid matrices can be represented
/// and rejected by [`validate_factor_graph`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactorGraph {
    num_subcarriers: usize,
    columns: Vec<Vec<u8>>,
}

impl FactorGraph {
    /// Builds from per-user columns; only checks that lengths agree.
    pub fn from_columns(num_subcarriers: usize, columns: Vec<Vec<u8>>) -> Result<Self> {
        if let Some(c) = columns.iter().find(|c| c.len() != num_subcarriers) {
            return Err(Error::DimensionMismatch {
                what: "factor graph column",
                expected: (num_subcarriers, 1),
                found: (c.len(), 1),
            });
        }
        Ok(Self {
            num_subcarriers,
            columns,
        })
    }

    /// Builds from `K` rows of length `J`.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let k = rows.len();
        let j = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != j) {
            return Err(Error::DimensionMismatch {
                what: "factor graph row",
                expected: (1, j),
                found: (1, r.len()),
            });
        }
        let columns = (0..j).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
        Self::from_columns(k, columns)
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_users(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<u8>] {
        &self.columns
    }

    pub fn column(&self, user: usize) -> &[u8] {
        &self.columns[user]
    }

    /// `f_{j,k}` as a bool.
    #[inline]
    pub fn is_assigned(&self, user: usize, subcarrier: usize) -> bool {
        self.columns[user][subcarrier] != 0
    }

    /// Subcarriers occupied by `user`, ascending.
    pub fn support(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.columns[user]
            .iter()
            .enumerate()
            .filter(|(_, f)| **f != 0)
            .map(|(k, _)| k)
    }

    /// Users sharing `subcarrier`, ascending.
    pub fn users_on(&self, subcarrier: usize) -> impl Iterator<Item = usize> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(move |(_, c)| c[subcarrier] != 0)
            .map(|(j, _)| j)
    }

    /// Row view: `rows()[k][j] = f_{j,k}`.
    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.num_subcarriers)
            .map(|k| self.columns.iter().map(|c| c[k]).collect())
            .collect()
    }

    /// Number of users on each subcarrier.
    pub fn row_degrees(&self) -> Vec<usize> {
        (0..self.num_subcarriers)
            .map(|k| self.users_on(k).count())
            .collect()
    }

    /// Graph restricted to the first `users` columns.
    pub fn prefix(&self, users: usize) -> FactorGraph {
        FactorGraph {
            num_subcarriers: self.num_subcarriers,
            columns: self.columns[..users.min(self.columns.len())].to_vec(),
        }
    }
}

impl std::fmt::Display for FactorGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Squared channel magnitudes `|h_{j,k}|^2` with the geometry that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState<T> {
    num_subcarriers: usize,
    gain2: Vec<T>,
    distances: Vec<T>,
    pathloss_exponent: T,
}

impl<T: Scalar> ChannelState<T> {
    /// `gain2` is user-major, `distances.len() x num_subcarriers` entries.
    pub fn new(
        num_subcarriers: usize,
        gain2: Vec<T>,
        distances: Vec<T>,
        pathloss_exponent: T,
    ) -> Result<Self> {
        let users = distances.len();
        if gain2.len() != users * num_subcarriers {
            return Err(Error::DimensionMismatch {
                what: "channel gains",
                expected: (users, num_subcarriers),
                found: (gain2.len() / num_subcarriers.max(1), num_subcarriers),
            });
        }
        if let Some(i) = gain2.iter().position(|g| !g.is_finite() || *g < T::zero()) {
            return Err(Error::InvalidChannel(format!(
                "gain of user {} on subcarrier {} is {}",
                i / num_subcarriers,
                i % num_subcarriers,
                gain2[i]
            )));
        }
        if let Some(j) = distances.iter().position(|d| !(*d > T::zero())) {
            return Err(Error::InvalidChannel(format!(
                "distance of user {j} must be positive"
            )));
        }
        if !(pathloss_exponent > T::zero()) {
            return Err(Error::InvalidChannel(
                "path loss exponent must be positive".to_string(),
            ));
        }
        Ok(Self {
            num_subcarriers,
            gain2,
            distances,
            pathloss_exponent,
        })
    }

    /// Channel from raw gains only; distances default to 1 m and `alpha` to 1.
    pub fn from_gains(rows: &[Vec<T>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidChannel("ragged gain rows".to_string()));
        }
        let gains = rows.iter().flatten().copied().collect();
        Self::new(k, gains, vec![T::one(); rows.len()], T::one())
    }

    pub fn num_users(&self) -> usize {
        self.distances.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    #[inline]
    pub fn gain2(&self, user: usize, subcarrier: usize) -> T {
        self.gain2[user * self.num_subcarriers + subcarrier]
    }

    pub fn user_gains(&self, user: usize) -> &[T] {
        let k = self.num_subcarriers;
        &self.gain2[user * k..(user + 1) * k]
    }

    pub fn distances(&self) -> &[T] {
        &self.distances
    }

    pub fn pathloss_exponent(&self) -> T {
        self.pathloss_exponent
    }

    /// Gains of the listed users only, in that order.
    pub fn select_users(&self, users: &[usize]) -> Self {
        let gain2 = users
            .iter()
            .flat_map(|&j| self.user_gains(j).iter().copied())
            .collect();
        Self {
            num_subcarriers: self.num_subcarriers,
            gain2,
            distances: users.iter().map(|&j| self.distances[j]).collect(),
            pathloss_exponent: self.pathloss_exponent,
        }
    }
}

/// Transmit powers `p_{j,k}`, user-major `J x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMatrix<T> {
    num_subcarriers: usize,
    values: Vec<T>,
}

impl<T: Scalar> PowerMatrix<T> {
    pub fn zeros(num_users: usize, num_subcarriers: usize) -> Self {
        Self {
            num_subcarriers,
            values: vec![T::zero(); num_users * num_subcarriers],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                what: "power row",
                expected: (1, k),
                found: (1, r.len()),
            });
        }
        Ok(Self {
            num_subcarriers: k,
            values: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn num_users(&self) -> usize {
        self.values.len().checked_div(self.num_subcarriers).unwrap_or(0)
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    #[inline]
    pub fn get(&self, user: usize, subcarrier: usize) -> T {
        self.values[user * self.num_subcarriers + subcarrier]
    }

    #[inline]
    pub fn set(&mut self, user: usize, subcarrier: usize, value: T) {
        self.values[user * self.num_subcarriers + subcarrier] = value;
    }

    pub fn row(&self, user: usize) -> &[T] {
        let k = self.num_subcarriers;
        &self.values[user * k..(user + 1) * k]
    }

    pub fn row_mut(&mut self, user: usize) -> &mut [T] {
        let k = self.num_subcarriers;
        &mut self.values[user * k..(user + 1) * k]
    }

    pub fn row_sum(&self, user: usize) -> T {
        self.row(user).iter().copied().sum()
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.num_users()).map(|j| self.row(j).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

/// One Dinkelbach iteration: the ratio parameter and the auxiliary value
/// reached by the power update at that parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachStep<T> {
    pub iteration: usize,
    pub omega: T,
    pub auxiliary: T,
}

/// Output of power allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult<T> {
    /// Achieved energy efficiency, bits/s/Hz per watt.
    pub ee: T,
    /// MAC-form sum rate at `power`, bits/s/Hz.
    pub sum_rate: T,
    /// Transmit plus circuit power, watts.
    pub total_power: T,
    pub power: PowerMatrix<T>,
    pub multipliers: Vec<T>,
    pub dinkelbach_trace: Vec<DinkelbachStep<T>>,
    pub converged: bool,
}

impl<T: Scalar> AllocationResult<T> {
    pub fn iterations(&self) -> usize {
        self.dinkelbach_trace.len()
    }
}

fn check_graph_dims<T>(graph: &FactorGraph, params: &SystemParams<T>) -> Result<()> {
    let expected = (params.num_subcarriers, params.num_users);
    let found = (graph.num_subcarriers(), graph.num_users());
    if expected != found {
        return Err(Error::DimensionMismatch {
            what: "factor graph",
            expected,
            found,
        });
    }
    Ok(())
}

/// Checks column weight (C1), binary entries (C2) and distinct columns (C3).
///
/// Dimension problems are reported as [`Error::DimensionMismatch`]; the first
/// violated constraint otherwise comes back as [`Error::Constraint`].
pub fn validate_factor_graph<T>(graph: &FactorGraph, params: &SystemParams<T>) -> Result<()> {
    check_graph_dims(graph, params)?;
    for (j, col) in graph.columns().iter().enumerate() {
        if let Some(k) = col.iter().position(|v| *v > 1) {
            return Err(Violation::NonBinary {
                row: k,
                column: j,
                value: col[k],
            }
            .into());
        }
        let weight = col.iter().filter(|v| **v == 1).count();
        if weight != params.sparsity {
            return Err(Violation::ColumnWeight {
                column: j,
                weight,
                expected: params.sparsity,
            }
            .into());
        }
    }
    let cols = graph.columns();
    for second in 1..cols.len() {
        if let Some(first) = (0..second).find(|&first| cols[first] == cols[second]) {
            return Err(Violation::DuplicateColumn { first, second }.into());
        }
    }
    Ok(())
}

fn check_power_dims<T: Scalar>(
    power: &PowerMatrix<T>,
    graph: &FactorGraph,
    params: &SystemParams<T>,
) -> Result<()> {
    check_graph_dims(graph, params)?;
    let expected = (params.num_users, params.num_subcarriers);
    let found = (power.num_users(), power.num_subcarriers());
    if expected != found {
        return Err(Error::DimensionMismatch {
            what: "power matrix",
            expected,
            found,
        });
    }
    Ok(())
}

/// Checks support inside the factor graph, nonnegativity (C5) and the
/// per-user budget (C4, 1e-9 W slack).
pub fn validate_power<T: Scalar>(
    power: &PowerMatrix<T>,
    graph: &FactorGraph,
    params: &SystemParams<T>,
) -> Result<()> {
    check_power_dims(power, graph, params)?;
    for j in 0..params.num_users {
        for (k, &p) in power.row(j).iter().enumerate() {
            if !p.is_finite() {
                return Err(Violation::NonFinitePower {
                    user: j,
                    subcarrier: k,
                }
                .into());
            }
            if p < T::zero() {
                return Err(Violation::NegativePower {
                    user: j,
                    subcarrier: k,
                    value: p.to_f64_lossy(),
                }
                .into());
            }
            if p > T::zero() && !graph.is_assigned(j, k) {
                return Err(Violation::PowerOutsideSupport {
                    user: j,
                    subcarrier: k,
                    value: p.to_f64_lossy(),
                }
                .into());
            }
        }
        let total = power.row_sum(j);
        let budget = params.max_power[j];
        if total > budget + budget_tolerance(budget) {
            return Err(Violation::BudgetExceeded {
                user: j,
                total: total.to_f64_lossy(),
                budget: budget.to_f64_lossy(),
            }
            .into());
        }
    }
    Ok(())
}

/// [`validate_power`] plus the equality budget `sum_k p_{j,k} = p_max[j]`.
pub fn validate_power_equality<T: Scalar>(
    power: &PowerMatrix<T>,
    graph: &FactorGraph,
    params: &SystemParams<T>,
) -> Result<()> {
    validate_power(power, graph, params)?;
    for j in 0..params.num_users {
        let total = power.row_sum(j);
        let budget = params.max_power[j];
        if (total - budget).abs() > budget_tolerance(budget) {
            return Err(Violation::BudgetNotMet {
                user: j,
                total: total.to_f64_lossy(),
                budget: budget.to_f64_lossy(),
            }
            .into());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SystemParams<f64> {
        SystemParams::with_equal_budget(4, 6, 2, 1e-3, 1e-3, 0.2, 180e3).unwrap()
    }

    fn canonical() -> FactorGraph {
        FactorGraph::from_rows(&[
            vec![1, 1, 1, 0, 0, 0],
            vec![1, 0, 0, 1, 1, 0],
            vec![0, 1, 0, 1, 0, 1],
            vec![0, 0, 1, 0, 1, 1],
        ])
        .unwrap()
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), Some(6));
        assert_eq!(binomial(5, 2), Some(10));
        assert_eq!(binomial(4, 0), Some(1));
        assert_eq!(binomial(3, 4), Some(0));
        assert_eq!(binomial(60, 30), Some(118_264_581_564_861_424));
    }

    #[test]
    fn params_reject_too_many_users() {
        let err = SystemParams::with_equal_budget(4, 7, 2, 1e-3, 1e-3, 0.2, 1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParams(_)));
        assert!(SystemParams::with_equal_budget(4, 1, 5, 1e-3, 1e-3, 0.2, 1.0).is_err());
        assert!(SystemParams::with_equal_budget(4, 6, 2, 0.0, 1e-3, 0.2, 1.0).is_err());
        assert!(SystemParams::with_equal_budget(4, 6, 2, 1e-3, -1.0, 0.2, 1.0).is_err());
    }

    #[test]
    fn overloading_above_one_is_allowed() {
        let p = params();
        assert!(p.overloading_factor() > 1.0);
    }

    #[test]
    fn canonical_graph_is_valid() {
        validate_factor_graph(&canonical(), &params()).unwrap();
    }

    #[test]
    fn heavy_column_is_c1_violation() {
        let mut cols = canonical().columns().to_vec();
        cols[3] = vec![1, 1, 1, 0];
        let g = FactorGraph::from_columns(4, cols).unwrap();
        match validate_factor_graph(&g, &params()) {
            Err(Error::Constraint(Violation::ColumnWeight { column, weight, .. })) => {
                assert_eq!((column, weight), (3, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn repeated_column_is_c3_violation() {
        let mut cols = canonical().columns().to_vec();
        cols[4] = vec![1, 1, 0, 0];
        let g = FactorGraph::from_columns(4, cols).unwrap();
        match validate_factor_graph(&g, &params()) {
            Err(Error::Constraint(Violation::DuplicateColumn { first, second })) => {
                assert_eq!((first, second), (0, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_binary_entry_is_c2_violation() {
        let mut cols = canonical().columns().to_vec();
        cols[0] = vec![2, 0, 0, 0];
        let g = FactorGraph::from_columns(4, cols).unwrap();
        assert!(matches!(
            validate_factor_graph(&g, &params()),
            Err(Error::Constraint(Violation::NonBinary { column: 0, .. }))
        ));
    }

    #[test]
    fn dimension_mismatch_is_distinct_error() {
        let g = canonical().prefix(5);
        assert!(matches!(
            validate_factor_graph(&g, &params()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_power_is_valid() {
        let p = PowerMatrix::zeros(6, 4);
        validate_power(&p, &canonical(), &params()).unwrap();
    }

    #[test]
    fn budget_boundary_is_valid() {
        let params = params();
        let g = canonical();
        let mut p = PowerMatrix::zeros(6, 4);
        for k in g.support(0).collect::<Vec<_>>() {
            p.set(0, k, params.max_power()[0] / 2.0);
        }
        validate_power(&p, &g, &params).unwrap();
        assert!((p.row_sum(0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn power_off_support_rejected() {
        let g = canonical();
        let mut p = PowerMatrix::zeros(6, 4);
        p.set(0, 2, 0.01);
        assert!(matches!(
            validate_power(&p, &g, &params()),
            Err(Error::Constraint(Violation::PowerOutsideSupport { user: 0, subcarrier: 2, .. }))
        ));
    }

    #[test]
    fn budget_and_sign_violations_name_user() {
        let g = canonical();
        let mut p = PowerMatrix::zeros(6, 4);
        p.set(2, 0, 0.3);
        assert!(matches!(
            validate_power(&p, &g, &params()),
            Err(Error::Constraint(Violation::BudgetExceeded { user: 2, .. }))
        ));
        let mut p = PowerMatrix::zeros(6, 4);
        p.set(5, 2, -1e-3);
        assert!(matches!(
            validate_power(&p, &g, &params()),
            Err(Error::Constraint(Violation::NegativePower { user: 5, .. }))
        ));
        let p = PowerMatrix::zeros(6, 4);
        assert!(matches!(
            validate_power_equality(&p, &g, &params()),
            Err(Error::Constraint(Violation::BudgetNotMet { user: 0, .. }))
        ));
    }

    #[test]
    fn channel_rejects_negative_and_nan() {
        assert!(ChannelState::from_gains(&[vec![1.0, -1.0]]).is_err());
        assert!(ChannelState::from_gains(&[vec![1.0, f64::NAN]]).is_err());
        assert!(ChannelState::from_gains(&[vec![1.0, f64::INFINITY]]).is_err());
    }
}
