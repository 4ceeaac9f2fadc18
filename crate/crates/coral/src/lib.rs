//! CoRAL: a reinforcement-learned retrieval policy that assembles
//! collaborative evidence (users and items) into an LLM prompt and is
//! trained against a marginal-information-gain reward.

pub mod config;
pub mod dataset;
pub mod ddpg;
pub mod embeddings;
pub mod env;
pub mod eval;
pub mod nn;
pub mod oracle;
pub mod prompting;
