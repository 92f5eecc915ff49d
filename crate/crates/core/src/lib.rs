//! Decoherence of a central spin coupled to a bath of spins, analyzed two
//! ways: closed-form evolution of the dephasing factor (`evolution`) and an
//! analytical verdict from the discrete spectrum of that factor (`spectrum`,
//! `lemma`). `harness` drives both from the command line.

pub mod error;
pub mod evolution;
pub mod harness;
pub mod lemma;
pub mod model;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::SpinBathModel;
