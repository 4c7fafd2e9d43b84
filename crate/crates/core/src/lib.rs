//! Deep GSP auctions for multi-metric ad allocation.
//!
//! The crate is organised bottom-up:
//!
//! - [`auction`]: rank scores, allocation and pricing for GSP, uGSP and Deep GSP.
//! - [`net`]: the bid-multiplier actor and the critic, with hand-written backprop.
//! - [`sim`]: a synthetic market with ground-truth user responses and metrics.
//! - [`train`]: single-step actor-critic training with reward shaping.
//! - [`audit`]: monotonicity, payment-error and incentive-compatibility statistics.

pub mod auction;
pub mod audit;
pub mod error;
pub mod net;
pub mod sim;
pub mod sweep;
pub mod train;

pub use error::{Error, Result};
