//! Predicting human decisions in strategic games from next-token
//! log-probabilities, and comparing base/aligned model pairs on that task.
pub mod analysis;
pub mod equilibrium;
pub mod filters;
pub mod game_model;
pub mod logprob;
pub mod pipeline;
pub mod predictor;
pub mod prompt;
pub mod report;
pub mod stats;
