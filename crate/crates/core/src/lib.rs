//! Multicast scheduling for cache-aided multi-antenna delivery.
//!
//! The crate builds scheduling tables whose columns are multisets of
//! `(t+1)`-user multicast groups, checks that every column can be decoded
//! with linear receivers, and evaluates the resulting schedules at finite SNR.
//!
//! * [`model`] holds the combinatorial domain types shared by everything else.
//! * [`symmetric`] builds the reference table in which every user decodes the
//!   same number of streams per transmission.
//! * [`asymmetric`] grows the reference table by redistributing groups of
//!   dissolved columns, yielding unequal per-user stream counts.
//! * [`decodability`] certifies tables symbolically and with random channels.
//! * [`rate`] runs seeded SNR sweeps under nullspace zero-forcing.
//! * [`dof`] enumerates the achievable DoF values with witness tables.
//!
//! The numeric layers are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common double-precision instantiations.

pub mod asymmetric;
pub mod decodability;
pub mod dof;
mod error;
mod linalg;
pub mod model;
pub mod rate;
pub mod seed;
pub mod symmetric;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use error::{Error, Result};
pub use model::{MulticastGroup, ScheduleColumn, ScheduleTable, SystemParams, User};

/// Real scalar used by the numeric verifier and the rate simulator.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + std::fmt::Display {
    /// Relative singular-value threshold below which a value counts as zero.
    fn rank_rtol() -> Self;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }
}

impl Real for f64 {
    fn rank_rtol() -> Self {
        1e-8
    }
}

impl Real for f32 {
    fn rank_rtol() -> Self {
        1e-4
    }
}

pub type ChannelRealization = decodability::ChannelRealization<f64>;
pub type BeamformerSolution = decodability::BeamformerSolution<f64>;
pub type NumericReport = decodability::NumericReport<f64>;

pub type ChannelRealization32 = decodability::ChannelRealization<f32>;
pub type BeamformerSolution32 = decodability::BeamformerSolution<f32>;
pub type NumericReport32 = decodability::NumericReport<f32>;

pub type RatePoint = rate::RatePoint<f64>;
pub type Sweep = rate::Sweep<f64>;
pub type RatePoint32 = rate::RatePoint<f32>;
pub type Sweep32 = rate::Sweep<f32>;
