//! Single-step actor-critic training of the multiplier network.

pub mod config;
pub mod trainer;
pub mod update;

pub use config::{PenaltyPeriod, TrainConfig, WarmStart};
pub use trainer::{
    best_gsp_sigma, collect_batch, collect_plays, explore_round, imitate, shape_rewards, train,
    world_benchmark, IterationRecord, RoundPlay, TrainOutcome, TrainReport, Trainer, Validation,
};
pub use update::{
    actor_loss_grad, actor_update, critic_update, pretrain_critic, probe_points, shaped_reward,
    st_violation, ActorLoss, Experience, Penalties, PretrainReport,
};
