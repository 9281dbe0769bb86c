//! Simulator for weak-trace-free counterfactual communication built from
//! chained quantum Zeno interferometers.
//!
//! * [`engine`]: exact single-photon amplitude propagation.
//! * [`zeno`]: closed-form Zeno formulas and the success-probability sweep.
//! * [`protocol`]: compiles (M, N) into the nested interferometer network.
//! * [`channel`]: Monte Carlo photon counting, imperfections and trace audits.
//! * [`image`]: PGM I/O and pixel-by-pixel image transmission.
//! * [`config`]: TOML run configuration.
//! * [`cli`]: command-line front end.

pub mod engine;
pub mod zeno;
pub mod protocol;
pub mod channel;
pub mod image;
pub mod config;
pub mod cli;
