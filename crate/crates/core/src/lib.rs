//! Symbol-level constructive-interference precoding for the multiuser MISO
//! downlink with M-PSK signalling.
//!
//! The crate covers the strict and relaxed minimum-power precoders, their
//! weighted max-min counterparts, lower bounds and conventional baselines,
//! symbol error rate and energy-efficiency evaluation, and a reproducible
//! experiment harness.

pub mod bounds;
pub mod channel;
pub mod constellation;
pub mod coupling;
pub mod energy;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod maxmin;
pub mod precoder;
pub mod quadrature;
pub mod search;
pub mod ser;

pub use channel::{add_noise, draw_channel, ChannelMatrix, RngStream};
pub use constellation::{Constellation, DetectionRegion, SymbolFrame, C64};
pub use error::{Error, Result};
pub use precoder::{
    cipm, cipmr_equal_margin, cipmr_per_user, solve_fixed_phase, MarginMode, PhaseMargin, PrecodeSolution,
    TargetSpec,
};
