//! Oblivious transfer over quasi-static fading channels.
//!
//! Alice holds two files, Bob wants one of them. Bob alone knows the fading
//! state; he reduces the channel to parallel subchannels, pairs strong with
//! weak subchannels and asks for the wanted file on the strong side of each
//! pair. Alice wiretap-encodes both files at the secrecy rate of each pair,
//! so Bob decodes only the requested file while Alice cannot tell which one
//! that was.
//!
//! Modules, bottom-up:
//! - [`complexmat`]: complex SVD, Haar unitaries, permutations
//! - [`channel`]: OFDM/MIMO fading models and the MIMO-to-parallel reduction
//! - [`pairing`]: best-with-worst pairing, exhaustive oracle, choice-bit γ map
//! - [`powalloc`]: per-block and ergodic power allocation
//! - [`rates`]: secrecy rates, asymptotic constants, multiplexing gain
//! - [`protocol`]: Alice/Bob session simulation and privacy audits
//! - [`harness`]: Monte Carlo sweeps and the command-line front end

pub mod channel;
pub mod complexmat;
pub mod error;
pub mod exec;
pub mod harness;
pub mod pairing;
pub mod powalloc;
pub mod protocol;
pub mod rates;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
