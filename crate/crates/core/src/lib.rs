//! Discrete-time quantum random walks on the line and on a four-site ring.
//!
//! Two fidelity tiers are provided. The idealized tier ([`walk`]) tracks coin
//! amplitudes on lattice sites exactly. The continuous-variable tier ([`cv`])
//! represents the walker as the motional mode of a trapped ion in a truncated
//! Fock space, with the coin as the ion's internal levels. On top of both sit
//! coin dephasing ([`decoherence`]), phase-space analysis ([`wigner`]) and the
//! coin-readout protocols used to benchmark decoherence ([`readout`]).
//!
//! Coin ordering everywhere is `(down, up)`; hybrid vectors are coin-major,
//! i.e. index `coin * sites + site` with `down = 0`.

pub mod cv;
pub mod decoherence;
pub mod error;
pub mod io;
pub mod linalg;
pub mod readout;
pub mod walk;
pub mod wigner;

pub use error::{QwalkError, Result};
pub use num_complex::Complex64 as C64;

pub use walk::{CoinVector, Distribution, LineState, RingState, Support, WalkStats};
