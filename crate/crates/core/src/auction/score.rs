//! Closed-form rank scores for the baseline mechanisms.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Squashing exponents outside this range are allowed but unusual.
pub const SIGMA_TUNING_RANGE: (f64, f64) = (0.5, 2.0);

fn check_bid_rate(bid: f64, pctr: f64) -> Result<()> {
    ensure_finite("bid", bid)?;
    ensure_finite("pctr", pctr)?;
    if bid < 0.0 {
        return Err(Error::InvalidInput(format!("negative bid {bid}")));
    }
    if !(0.0..=1.0).contains(&pctr) {
        return Err(Error::InvalidInput(format!("pctr {pctr} outside [0,1]")));
    }
    Ok(())
}

/// GSP with a squashing exponent: `bid * pctr^sigma`.
pub fn gsp_rank_score(bid: f64, pctr: f64, sigma: f64) -> Result<f64> {
    check_bid_rate(bid, pctr)?;
    ensure_finite("sigma", sigma)?;
    if sigma < SIGMA_TUNING_RANGE.0 || sigma > SIGMA_TUNING_RANGE.1 {
        log::warn!("squashing exponent {sigma} outside tuning range {SIGMA_TUNING_RANGE:?}");
    }
    Ok(bid * gsp_quality(pctr, sigma))
}

/// Bid multiplier of squashed GSP. `0^0` is taken as 1.
pub(crate) fn gsp_quality(pctr: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        1.0
    } else {
        pctr.powf(sigma)
    }
}

/// Weights of the utility-augmented GSP score
/// `bid_weight*bid*pctr + ctr_weight*pctr + acr_weight*pacr + cvr_weight*pcvr + gmv_weight*pcvr*price`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct UgspWeights {
    pub bid: f64,
    pub ctr: f64,
    pub acr: f64,
    pub cvr: f64,
    pub gmv: f64,
}

impl UgspWeights {
    pub fn new(bid: f64, ctr: f64, cvr: f64) -> Self {
        Self {
            bid,
            ctr,
            cvr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("bid", self.bid),
            ("ctr", self.ctr),
            ("acr", self.acr),
            ("cvr", self.cvr),
            ("gmv", self.gmv),
        ] {
            ensure_finite(name, w)?;
            if w < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "uGSP weight {name} = {w} is negative"
                )));
            }
        }
        Ok(())
    }

    /// Bid slope and bid-independent part of the score.
    pub(crate) fn slope_offset(&self, pctr: f64, pacr: f64, pcvr: f64, price: f64) -> (f64, f64) {
        let slope = self.bid * pctr;
        let offset = self.ctr * pctr + self.acr * pacr + self.cvr * pcvr + self.gmv * pcvr * price;
        (slope, offset)
    }
}

/// Utility-augmented GSP: `l1*bid*pctr + l2*pctr + l3*pcvr`.
pub fn ugsp_rank_score(bid: f64, pctr: f64, pcvr: f64, lambdas: (f64, f64, f64)) -> Result<f64> {
    check_bid_rate(bid, pctr)?;
    ensure_finite("pcvr", pcvr)?;
    let w = UgspWeights::new(lambdas.0, lambdas.1, lambdas.2);
    w.validate()?;
    let (slope, offset) = w.slope_offset(pctr, 0.0, pcvr, 0.0);
    Ok(bid * slope + offset)
}

/// Hand-set nonlinear score `(bid/10)^0.4 * pctr^0.7` from the three-ad toy example.
pub fn fixed_rank_score(bid: f64, pctr: f64) -> Result<f64> {
    check_bid_rate(bid, pctr)?;
    Ok(fixed_score_unchecked(bid, pctr))
}

pub(crate) fn fixed_score_unchecked(bid: f64, pctr: f64) -> f64 {
    (bid / 10.0).powf(0.4) * pctr.powf(0.7)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gsp_examples() {
        assert_abs_diff_eq!(
            gsp_rank_score(10.0, 0.1, 1.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            gsp_rank_score(2.4, 0.2, 1.0).unwrap(),
            0.48,
            epsilon = 1e-12
        );
        for b in [0.0, 0.7, 3.0, 120.0] {
            assert_eq!(gsp_rank_score(b, 0.3, 0.0).unwrap(), b);
        }
        assert_eq!(gsp_rank_score(5.0, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn gsp_rejects_non_finite() {
        assert!(gsp_rank_score(f64::NAN, 0.1, 1.0).is_err());
        assert!(gsp_rank_score(1.0, 0.1, f64::INFINITY).is_err());
        assert!(gsp_rank_score(-1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn ugsp_examples() {
        assert_abs_diff_eq!(
            ugsp_rank_score(10.0, 0.1, 0.0, (1.0, 0.0, 0.0)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            ugsp_rank_score(0.0, 0.2, 0.5, (1.0, 0.0, 1.0)).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            ugsp_rank_score(2.4, 0.2, 0.3, (0.5, 0.5, 0.0)).unwrap(),
            0.34,
            epsilon = 1e-12
        );
        assert!(ugsp_rank_score(1.0, 0.2, 0.3, (1.0, -0.1, 0.0)).is_err());
    }

    #[test]
    fn fixed_score_matches_toy_table() {
        // The published scores are truncated to three decimals (0.19953 is shown as 0.199).
        let truncated = |x: f64| (x * 1000.0).floor() / 1000.0;
        for (bid, pctr, shown) in [(10.0, 0.1, 0.199), (2.4, 0.2, 0.183), (1.3, 0.3, 0.190)] {
            let s = fixed_rank_score(bid, pctr).unwrap();
            assert_abs_diff_eq!(truncated(s), shown, epsilon = 1e-12);
            assert!((s - shown).abs() < 1e-3);
        }
    }
}
