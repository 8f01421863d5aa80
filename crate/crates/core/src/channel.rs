//! Rayleigh block fading with distance path loss, and the named scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{ChannelState, SystemParams};
use crate::scalar::Scalar;

/// Path loss exponent used by every preset.
pub const PATHLOSS_EXPONENT: f64 = 3.67;
/// Cell radius of the presets, metres.
pub const CELL_RADIUS_M: f64 = 100.0;
/// Users placed uniformly in the disk are kept at least this far out.
pub const MIN_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Placement<T> {
    /// Explicit per-user distances, metres.
    Fixed(Vec<T>),
    /// Every user at the same distance.
    Equal(T),
    /// Uniform over the disk area of the cell radius.
    UniformDisk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub name: String,
    pub placement: Placement<T>,
    pub pathloss_exponent: T,
    pub cell_radius: T,
}

impl<T: Scalar> Scenario<T> {
    pub fn validate(&self, num_users: usize) -> Result<()> {
        let in_cell = |d: T| d > T::zero() && d <= self.cell_radius;
        let ok = match &self.placement {
            Placement::Fixed(d) if d.len() != num_users => {
                return Err(Error::InvalidParams(format!(
                    "scenario `{}` fixes {} distances but J={num_users}",
                    self.name,
                    d.len()
                )))
            }
            Placement::Fixed(d) => d.iter().all(|&d| in_cell(d)),
            Placement::Equal(d) => in_cell(*d),
            Placement::UniformDisk => self.cell_radius >= T::lit(MIN_DISTANCE_M),
        };
        if !ok || !(self.pathloss_exponent > T::zero()) {
            return Err(Error::InvalidParams(format!(
                "scenario `{}` has distances outside (0, {}] or bad exponent",
                self.name, self.cell_radius
            )));
        }
        Ok(())
    }
}

fn preset<T: Scalar>(name: &str, placement: Placement<T>) -> Scenario<T> {
    Scenario {
        name: name.to_string(),
        placement,
        pathloss_exponent: T::lit(PATHLOSS_EXPONENT),
        cell_radius: T::lit(CELL_RADIUS_M),
    }
}

fn metres<T: Scalar>(d: &[f64]) -> Vec<T> {
    d.iter().map(|&v| T::lit(v)).collect()
}

/// `fig1_equal`, `cond1`, `cond2` and `uniform`.
pub fn scenario_presets<T: Scalar>() -> Vec<Scenario<T>> {
    vec![
        preset("fig1_equal", Placement::Equal(T::lit(100.0))),
        preset(
            "cond1",
            Placement::Fixed(metres(&[55.0, 68.0, 89.0, 99.0, 99.0, 100.0])),
        ),
        preset(
            "cond2",
            Placement::Fixed(metres(&[77.0, 80.0, 81.0, 90.0, 91.0, 91.0])),
        ),
        preset("uniform", Placement::UniformDisk),
    ]
}

pub fn scenario_by_name<T: Scalar>(name: &str) -> Result<Scenario<T>> {
    scenario_presets()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

/// Draws distances (for disk placement) and then `|g|^2 ~ Exp(1)` for every
/// user and subcarrier, in that order, from a ChaCha8 stream seeded by `seed`.
/// `|h_{j,k}|^2 = |g_{j,k}|^2 d_j^{-alpha}`.
pub fn generate_channel<T: Scalar>(
    scenario: &Scenario<T>,
    params: &SystemParams<T>,
    seed: u64,
) -> Result<ChannelState<T>> {
    let users = params.num_users();
    let k = params.num_subcarriers();
    scenario.validate(users)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let distances: Vec<T> = match &scenario.placement {
        Placement::Fixed(d) => d.clone(),
        Placement::Equal(d) => vec![*d; users],
        Placement::UniformDisk => {
            let radius = scenario.cell_radius.to_f64_lossy();
            (0..users)
                .map(|_| {
                    let u: f64 = rng.random();
                    T::lit((radius * u.sqrt()).max(MIN_DISTANCE_M))
                })
                .collect()
        }
    };

    let alpha = scenario.pathloss_exponent;
    let mut gain2 = Vec::with_capacity(users * k);
    for &d in &distances {
        let loss = d.powf(-alpha);
        for _ in 0..k {
            let fading: f64 = rng.sample(Exp1);
            gain2.push(T::lit(fading) * loss);
        }
    }
    ChannelState::new(k, gain2, distances, alpha)
}

/// Noise power in watts for a density in dBm/Hz over `bandwidth_hz`.
pub fn noise_power_from_spec<T: Scalar>(density_dbm_per_hz: T, bandwidth_hz: T) -> Result<T> {
    if !(bandwidth_hz > T::zero()) {
        return Err(Error::InvalidParams("bandwidth must be positive".into()));
    }
    let dbm = density_dbm_per_hz + T::lit(10.0) * bandwidth_hz.log10();
    Ok(dbm_to_watts(dbm))
}

pub fn dbm_to_watts<T: Scalar>(dbm: T) -> T {
    T::lit(10.0).powf((dbm - T::lit(30.0)) / T::lit(10.0))
}
