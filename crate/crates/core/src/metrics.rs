//! Rate, power and energy-efficiency evaluators.
//!
//! Two rate models are provided. [`RateModel::Exact`] treats every co-scheduled
//! user on a subcarrier as interference to the others; [`RateModel::Mac`] is
//! the multiple-access sum capacity `sum_k log2(1 + sum_j f p |h|^2 / sigma^2)`,
//! which is the objective both optimizers work on. All rates are in bits/s/Hz.

use crate::error::{Error, Result};
use crate::model::{ChannelState, FactorGraph, PowerMatrix, SystemParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateModel {
    /// Per-user SINR rates summed over users and subcarriers.
    Exact,
    /// Multiple-access sum capacity.
    #[default]
    Mac,
}

/// Energy efficiency together with a flag marking the `0 / 0` case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEfficiency<T> {
    pub value: T,
    /// Set when total power is zero; `value` is then defined as 0.
    pub degenerate: bool,
}

/// Received power `f_{j,k} p_{j,k} |h_{j,k}|^2`.
#[inline]
pub(crate) fn received<T: Scalar>(
    user: usize,
    subcarrier: usize,
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
) -> T {
    if graph.is_assigned(user, subcarrier) {
        power.get(user, subcarrier) * channel.gain2(user, subcarrier)
    } else {
        T::zero()
    }
}

/// Sum of received powers on one subcarrier.
#[inline]
pub(crate) fn aggregate<T: Scalar>(
    subcarrier: usize,
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
) -> T {
    (0..graph.num_users())
        .map(|j| received(j, subcarrier, graph, power, channel))
        .sum()
}

/// Rate of `user` on `subcarrier` with all other users on it as interference.
pub fn per_user_rate<T: Scalar>(
    user: usize,
    subcarrier: usize,
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
) -> Result<T> {
    if user >= params.num_users() || subcarrier >= params.num_subcarriers() {
        return Err(Error::IndexOutOfRange(format!(
            "user {user}, subcarrier {subcarrier} for J={}, K={}",
            params.num_users(),
            params.num_subcarriers()
        )));
    }
    Ok(user_rate_unchecked(user, subcarrier, graph, power, channel, params))
}

fn user_rate_unchecked<T: Scalar>(
    user: usize,
    subcarrier: usize,
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
) -> T {
    if !graph.is_assigned(user, subcarrier) {
        return T::zero();
    }
    let signal = received(user, subcarrier, graph, power, channel);
    let interference: T = (0..graph.num_users())
        .filter(|&t| t != user)
        .map(|t| received(t, subcarrier, graph, power, channel))
        .sum();
    (T::one() + signal / (params.noise_power() + interference)).log2()
}

/// `R_k`: sum of per-user rates on one subcarrier.
pub fn subcarrier_rate<T: Scalar>(
    subcarrier: usize,
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
) -> T {
    (0..graph.num_users())
        .map(|j| user_rate_unchecked(j, subcarrier, graph, power, channel, params))
        .sum()
}

/// `R = sum_k R_k` under the interference model.
pub fn sum_rate_exact<T: Scalar>(
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
) -> T {
    (0..params.num_subcarriers())
        .map(|k| subcarrier_rate(k, graph, power, channel, params))
        .sum()
}

/// MAC sum capacity; the optimization objective.
pub fn sum_rate_mac<T: Scalar>(
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
) -> T {
    let sigma2 = params.noise_power();
    (0..params.num_subcarriers())
        .map(|k| (T::one() + aggregate(k, graph, power, channel) / sigma2).log2())
        .sum()
}

pub fn sum_rate<T: Scalar>(
    model: RateModel,
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
) -> T {
    match model {
        RateModel::Exact => sum_rate_exact(graph, power, channel, params),
        RateModel::Mac => sum_rate_mac(graph, power, channel, params),
    }
}

/// Transmit power on assigned entries plus `J * P_c`.
pub fn total_power<T: Scalar>(
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    params: &SystemParams<T>,
) -> T {
    let transmit: T = (0..graph.num_users())
        .flat_map(|j| graph.support(j).map(move |k| power.get(j, k)))
        .sum();
    transmit + T::from_usize_lossy(graph.num_users()) * params.circuit_power()
}

/// `rate / power`, with `0 / 0` mapped to a flagged zero.
pub fn ratio<T: Scalar>(rate: T, power: T) -> EnergyEfficiency<T> {
    if power > T::zero() {
        EnergyEfficiency {
            value: rate / power,
            degenerate: false,
        }
    } else {
        EnergyEfficiency {
            value: T::zero(),
            degenerate: true,
        }
    }
}

/// Sum rate of the selected model over total power.
pub fn energy_efficiency<T: Scalar>(
    graph: &FactorGraph,
    power: &PowerMatrix<T>,
    channel: &ChannelState<T>,
    params: &SystemParams<T>,
    model: RateModel,
) -> EnergyEfficiency<T> {
    ratio(
        sum_rate(model, graph, power, channel, params),
        total_power(graph, power, params),
    )
}
