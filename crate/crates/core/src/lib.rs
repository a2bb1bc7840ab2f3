//! Recurrent spiking network agents trained with clipped-ratio local
//! plasticity on two timescales, plus the Pong task used to exercise them.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod buffer;
pub mod controller;
pub mod env;
pub mod error;
pub mod plasticity;
pub mod policy;
pub mod pong;
pub mod rsn;
pub mod scalar;

pub use buffer::{EpisodeBuffer, StepRecord};
pub use controller::{
    learn_online, lfcs_episode, replay_memory, rereference, run_episode, run_eprop_baseline,
    transfer, transfer_guard, AgentPair, EpisodeReport, EpropAgent, LearnReport, ReplayStep,
};
pub use env::{Environment, Transition};
pub use error::{Error, Result};
pub use plasticity::{
    evaluate_replay, grad_eprop, grad_lfcs, surrogate_loss, Adam, Gradients, Hyper, OptState,
    ReplayEvaluation, TraceState,
};
pub use policy::{entropy, policy, policy_with_value, sample_action, softmax, PolicyOutput};
pub use pong::{Action, Pong, PongConfig, ServeRule};
pub use rsn::{ModelParams, NetworkState, NetworkWeights};
pub use scalar::Scalar;

pub type Params = ModelParams<f64>;
pub type Weights = NetworkWeights<f64>;
pub type State = NetworkState<f64>;
pub type Traces = TraceState<f64>;
pub type Buffer = EpisodeBuffer<f64>;
pub type Pair = AgentPair<f64>;
pub type HyperParams = Hyper<f64>;
