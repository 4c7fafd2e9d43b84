//! Learned components: the bid-multiplier actor and the state-action critic.

pub mod actor;
pub mod checkpoint;
pub mod critic;
pub mod mlp;
pub mod normalize;
pub mod optim;

pub use actor::{state_vector, Actor, ScoreSlope, DEFAULT_HIDDEN};
pub use checkpoint::{
    load_actor, load_critic, read_actor, read_critic, save_actor, save_critic, write_actor,
    write_critic,
};
pub use critic::{Critic, CriticSample};
pub use mlp::{Activation, Mlp, Trace};
pub use normalize::Standardizer;
pub use optim::{Optimizer, OptimizerKind};
