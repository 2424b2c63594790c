pub mod circuit;
pub mod error;
pub mod gen;
pub mod kwise;
pub mod numeric;
pub mod query;
pub mod reductions;
pub mod rng;
pub mod sampler;
pub mod simulator;
pub mod state;

pub use circuit::{parse_circuit, render_circuit, validate, Circuit, CircuitOp, Qubit};
pub use error::{Error, Result};
pub use numeric::{Rational, SqrtDyadic};
pub use simulator::{run_exhaustive, run_sampled, OutcomeDistribution, SimConfig, Simulator};
pub use state::ExactState;
