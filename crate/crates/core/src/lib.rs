//! Energy-efficient resource allocation for an OFDMA cell whose UEs share a
//! distributed antenna system (SUDAS): a licensed-band BS hop relayed by
//! SUDACs over orthogonal unlicensed sub-bands.
//!
//! The pipeline is channel draws → per-stream CNRs → Dinkelbach fractional
//! programming around alternating closed-form power, subcarrier and time
//! split updates. Baselines, brute-force oracles and a Monte Carlo harness
//! sit on top.

pub mod baselines;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod precoder;
pub mod solver;

pub use error::{Error, Result};
