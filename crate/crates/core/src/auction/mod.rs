//! Auction engine: rank scores, top-K allocation, and payment rules.

pub mod allocate;
pub mod mechanism;
pub mod pricing;
pub mod score;
pub mod toy;
pub mod types;

pub use allocate::{allocate, rank_order};
pub use mechanism::{price_outcome, run_auction, Mechanism, Pricing};
pub use pricing::{
    bisection_iterations, price_by_multiplier, price_exact_binary_search, PricingConfig,
};
pub use score::{fixed_rank_score, gsp_rank_score, ugsp_rank_score, UgspWeights};
pub use types::{feature, AdCandidate, AdId, AuctionOutcome, AuctionRequest, RankedEntry, Winner};
