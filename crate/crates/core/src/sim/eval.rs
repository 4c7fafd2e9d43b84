use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::feedback::{expected_feedback, simulate_feedback};
use super::metrics::{compute_metrics, FeedbackTotals, MetricWeights, MetricsRecord, Normalizers};
use super::world::{domain, stream, World};
use crate::auction::{run_auction, AuctionOutcome, Mechanism, Pricing, PricingConfig};
use crate::error::{Error, Result};

/// Whether metrics use realized Bernoulli feedback or its expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    /// Exact expectations over user behavior; requests are still sampled.
    #[default]
    Expected,
    Sampled,
}

/// Which rounds to play and how to charge and observe them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub seed: u64,
    pub rounds: usize,
    pub pricing: Pricing,
    pub pricing_cfg: PricingConfig,
    pub feedback: FeedbackMode,
}

impl EvalSpec {
    pub fn new(seed: u64, rounds: usize) -> Self {
        Self {
            seed,
            rounds,
            pricing: Pricing::Multiplier,
            pricing_cfg: PricingConfig::default(),
            feedback: FeedbackMode::Expected,
        }
    }

    pub fn sampled(self) -> Self {
        Self {
            feedback: FeedbackMode::Sampled,
            ..self
        }
    }
}

/// Result of one round: counters and per-advertiser utility.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub outcome: AuctionOutcome,
    pub totals: FeedbackTotals,
    /// Indexed like `world.advertisers`.
    pub utility: Vec<f64>,
}

pub fn play_round(
    world: &World,
    mechanism: &Mechanism<'_>,
    spec: &EvalSpec,
    index: u64,
) -> Result<RoundResult> {
    let round = world.round(spec.seed, index);
    let outcome = run_auction(&round.request, mechanism, spec.pricing, &spec.pricing_cfg)?;
    let mut utility = vec![0.0; world.n_advertisers()];
    let totals = match spec.feedback {
        FeedbackMode::Expected => {
            let imps = expected_feedback(&round.request, &outcome, &round.truth)?;
            for e in &imps {
                utility[e.candidate] += e.utility;
            }
            FeedbackTotals::from_expected(&imps)
        }
        FeedbackMode::Sampled => {
            let mut rng = stream(spec.seed, domain::FEEDBACK, index);
            let recs = simulate_feedback(index, &round.request, &outcome, &round.truth, &mut rng)?;
            for r in &recs {
                utility[r.candidate] += r.utility();
            }
            FeedbackTotals::from_records(&recs)
        }
    };
    Ok(RoundResult {
        outcome,
        totals,
        utility,
    })
}

/// Aggregate performance of a mechanism over a block of rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rounds: usize,
    pub totals: FeedbackTotals,
    pub metrics: MetricsRecord,
    /// Mean per-round utility of each advertiser.
    pub utility: Vec<f64>,
}

impl Evaluation {
    pub fn objective(&self, weights: &MetricWeights) -> f64 {
        self.metrics.objective(weights)
    }

    /// Sum over advertisers of mean per-round utility.
    pub fn total_utility(&self) -> f64 {
        self.utility.iter().sum()
    }

    pub fn mean_payment_per_click(&self) -> f64 {
        if self.totals.clicks > 0.0 {
            self.totals.revenue / self.totals.clicks
        } else {
            0.0
        }
    }
}

/// Rounds per parallel work unit. Partial sums are merged in unit order, so
/// results do not depend on the thread count.
const CHUNK: usize = 128;

pub fn evaluate(world: &World, mechanism: &Mechanism<'_>, spec: &EvalSpec) -> Result<Evaluation> {
    if spec.rounds == 0 {
        return Err(Error::InvalidInput(
            "evaluation needs at least one round".into(),
        ));
    }
    mechanism.validate()?;
    let n_ads = world.n_advertisers();
    let n_chunks = spec.rounds.div_ceil(CHUNK);
    let partials: Vec<(FeedbackTotals, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut totals = FeedbackTotals::default();
            let mut utility = vec![0.0; n_ads];
            for i in c * CHUNK..((c + 1) * CHUNK).min(spec.rounds) {
                let r = play_round(world, mechanism, spec, i as u64)?;
                totals += r.totals;
                for (u, x) in utility.iter_mut().zip(&r.utility) {
                    *u += x;
                }
            }
            Ok((totals, utility))
        })
        .collect::<Result<_>>()?;
    let mut totals = FeedbackTotals::default();
    let mut utility = vec![0.0; n_ads];
    for (t, u) in partials {
        totals += t;
        for (a, b) in utility.iter_mut().zip(u) {
            *a += b;
        }
    }
    for u in &mut utility {
        *u /= spec.rounds as f64;
    }
    Ok(Evaluation {
        rounds: spec.rounds,
        totals,
        metrics: compute_metrics(&totals, &world.normalizers),
        utility,
    })
}

/// Request seed reserved for normalizer calibration.
pub(crate) fn calibration_seed(world_seed: u64) -> u64 {
    world_seed ^ 0xCA1B_0000_0000_0000
}

/// Normalizers placing squashed GSP with exponent 1 at half of each metric's range.
pub fn calibrate_normalizers(world: &World) -> Result<Normalizers> {
    let spec = EvalSpec::new(
        calibration_seed(world.config.seed),
        world.config.calibration_rounds,
    );
    let eval = evaluate(world, &Mechanism::Gsp { sigma: 1.0 }, &spec)?;
    Ok(Normalizers::from_calibration(eval.totals.raw_metrics()))
}

pub const EPISODE_HEADER: &str =
    "round,ad_id,slot,bid,value,pctr,score,ppc,clicked,carted,ordered,gmv";

/// Writes realized feedback of every displayed ad, one line per impression.
pub fn write_episode_log<W: Write>(
    world: &World,
    mechanism: &Mechanism<'_>,
    spec: &EvalSpec,
    out: &mut W,
) -> Result<()> {
    writeln!(out, "{EPISODE_HEADER}")?;
    for i in 0..spec.rounds as u64 {
        let round = world.round(spec.seed, i);
        let outcome = run_auction(&round.request, mechanism, spec.pricing, &spec.pricing_cfg)?;
        let mut rng = stream(spec.seed, domain::FEEDBACK, i);
        for r in simulate_feedback(i, &round.request, &outcome, &round.truth, &mut rng)? {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.round,
                r.ad_id,
                r.slot,
                r.bid,
                r.value,
                r.pctr,
                r.score,
                r.price_per_click,
                r.clicked as u8,
                r.carted as u8,
                r.ordered as u8,
                r.gmv()
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::WorldConfig;

    fn world() -> World {
        World::build(WorldConfig {
            calibration_rounds: 500,
            ..WorldConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn calibration_mechanism_sits_at_half() {
        let w = world();
        let spec = EvalSpec::new(calibration_seed(w.config.seed), 500);
        let e = evaluate(&w, &Mechanism::Gsp { sigma: 1.0 }, &spec).unwrap();
        for v in e.metrics.values {
            assert!((v - 0.5).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn evaluation_is_deterministic_and_thread_independent() {
        let w = world();
        let spec = EvalSpec::new(3, 700).sampled();
        let a = evaluate(&w, &Mechanism::Gsp { sigma: 0.8 }, &spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| evaluate(&w, &Mechanism::Gsp { sigma: 0.8 }, &spec).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_converges_to_expected() {
        let w = world();
        let spec = EvalSpec::new(5, 20_000);
        let e = evaluate(&w, &Mechanism::Gsp { sigma: 1.0 }, &spec).unwrap();
        let s = evaluate(&w, &Mechanism::Gsp { sigma: 1.0 }, &spec.sampled()).unwrap();
        let p = e.totals.clicks / e.totals.impressions;
        let sd = (p * (1.0 - p) / e.totals.impressions).sqrt();
        assert!((s.totals.clicks / s.totals.impressions - p).abs() < 4.0 * sd);
    }

    #[test]
    fn episode_log_has_one_line_per_impression() {
        let w = world();
        let spec = EvalSpec::new(1, 10).sampled();
        let mut buf = Vec::new();
        write_episode_log(&w, &Mechanism::Gsp { sigma: 1.0 }, &spec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], EPISODE_HEADER);
        assert_eq!(lines.len(), 1 + 10 * w.config.slots);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 12));
    }
}
