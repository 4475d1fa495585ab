//! Two-asset all-or-nothing market timing: feasible return envelopes,
//! randomness tests for timing paths, Monte Carlo return distributions and
//! the closed-form median that approximates them.

pub mod analytics;
pub mod market_data;
pub mod monte_carlo;
pub mod randomness;
pub mod report;
pub mod special;
pub mod stats;
pub mod synthetic;
pub mod timing;
