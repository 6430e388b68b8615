//! Fault detection for three-phase induction motors.
//!
//! A small feedforward network with sigmoid units reads one instant of the
//! three phase voltages and currents and assigns it to one of seven
//! conditions: healthy, overload, ground fault, locked rotor, unbalanced
//! voltage, single phasing / under voltage, or overvoltage.
//!
//! - [`dataset`]: sample types, the CSV format, the 14-row reference table,
//!   stratified splitting.
//! - [`faultgen`]: seeded synthetic data around the reference signatures.
//! - [`neuralnet`]: the network, backpropagation, SGD training, model files.
//! - [`evaluation`]: decision rules, confusion matrix, frequency report,
//!   regression fit.
//! - [`stream`]: a TCP classification server with debounced fault
//!   notifications, and a replay client.
//! - [`cli`]: the `motorfault` command line.
//!
//! Runnable walkthroughs live in `examples/`.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod faultgen;
pub mod neuralnet;
pub mod rng;
pub mod stream;

pub use dataset::{Dataset, FaultClass, LabeledSample, PhaseSample};
pub use error::{Error, Result};
pub use evaluation::{classify, evaluate, DecisionRule, ScoreModel};
pub use neuralnet::{Network, NetworkConfig, TrainReport};
