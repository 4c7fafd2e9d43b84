use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use super::feedback::{ExpectedImpression, FeedbackRecord};
use crate::error::{ensure_finite, Error, Result};

pub const N_METRICS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Rpm,
    Ctr,
    Acr,
    Cvr,
    Gpm,
}

impl Metric {
    pub const ALL: [Metric; N_METRICS] = [
        Metric::Rpm,
        Metric::Ctr,
        Metric::Acr,
        Metric::Cvr,
        Metric::Gpm,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rpm => "RPM",
            Metric::Ctr => "CTR",
            Metric::Acr => "ACR",
            Metric::Cvr => "CVR",
            Metric::Gpm => "GPM",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

/// Additive feedback counters. Counts are reals so expected feedback fits too.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeedbackTotals {
    pub impressions: f64,
    pub clicks: f64,
    pub carts: f64,
    pub orders: f64,
    pub revenue: f64,
    pub gmv: f64,
}

impl FeedbackTotals {
    pub fn from_records(records: &[FeedbackRecord]) -> Self {
        let mut t = Self::default();
        for r in records {
            t.add_record(r);
        }
        t
    }

    pub fn from_expected(impressions: &[ExpectedImpression]) -> Self {
        impressions.iter().fold(Self::default(), |mut t, e| {
            t.impressions += 1.0;
            t.clicks += e.click;
            t.carts += e.cart;
            t.orders += e.order;
            t.revenue += e.payment;
            t.gmv += e.gmv;
            t
        })
    }

    pub fn add_record(&mut self, r: &FeedbackRecord) {
        self.impressions += 1.0;
        self.clicks += r.clicked as u8 as f64;
        self.carts += r.carted as u8 as f64;
        self.orders += r.ordered as u8 as f64;
        self.revenue += r.payment();
        self.gmv += r.gmv();
    }

    /// Unnormalized RPM, CTR, ACR, CVR, GPM. All zero without impressions.
    pub fn raw_metrics(&self) -> [f64; N_METRICS] {
        if self.impressions <= 0.0 {
            return [0.0; N_METRICS];
        }
        let n = self.impressions;
        [
            self.revenue / n * 1000.0,
            self.clicks / n,
            self.carts / n,
            self.orders / n,
            self.gmv / n * 1000.0,
        ]
    }
}

impl Add for FeedbackTotals {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl AddAssign for FeedbackTotals {
    fn add_assign(&mut self, o: Self) {
        self.impressions += o.impressions;
        self.clicks += o.clicks;
        self.carts += o.carts;
        self.orders += o.orders;
        self.revenue += o.revenue;
        self.gmv += o.gmv;
    }
}

/// Per-metric divisors mapping raw metrics into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub scale: [f64; N_METRICS],
}

impl Normalizers {
    /// Share of the normalizer taken up by the calibration mechanism.
    pub const CALIBRATION_LEVEL: f64 = 0.5;

    pub fn unit() -> Self {
        Self {
            scale: [1.0; N_METRICS],
        }
    }

    /// Divisors placing the calibration metrics at [`Self::CALIBRATION_LEVEL`].
    pub fn from_calibration(raw: [f64; N_METRICS]) -> Self {
        let mut scale = [1.0; N_METRICS];
        for (s, r) in scale.iter_mut().zip(raw) {
            if r > 0.0 && r.is_finite() {
                *s = r / Self::CALIBRATION_LEVEL;
            }
        }
        Self { scale }
    }

    pub fn apply(&self, raw: [f64; N_METRICS]) -> [f64; N_METRICS] {
        let mut out = raw;
        for (o, s) in out.iter_mut().zip(self.scale) {
            *o /= s;
        }
        out
    }
}

/// Aggregated performance of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Normalized metrics clamped to `[0, 1]`, indexed by [`Metric`].
    pub values: [f64; N_METRICS],
    /// Normalized metrics before clamping.
    pub scaled: [f64; N_METRICS],
    pub raw: [f64; N_METRICS],
    pub impressions: f64,
    pub clicks: f64,
    pub orders: f64,
    /// No impressions: every metric is defined as zero.
    pub empty: bool,
    /// Some metric exceeded its normalizer and was clamped.
    pub saturated: bool,
}

impl MetricsRecord {
    pub fn get(&self, m: Metric) -> f64 {
        self.values[m.index()]
    }

    pub fn objective(&self, weights: &MetricWeights) -> f64 {
        weights.dot(&self.values)
    }
}

pub fn compute_metrics(totals: &FeedbackTotals, normalizers: &Normalizers) -> MetricsRecord {
    let raw = totals.raw_metrics();
    let scaled = normalizers.apply(raw);
    let mut values = scaled;
    let mut saturated = false;
    for v in &mut values {
        if *v > 1.0 {
            saturated = true;
        }
        *v = v.clamp(0.0, 1.0);
    }
    MetricsRecord {
        values,
        scaled,
        raw,
        impressions: totals.impressions,
        clicks: totals.clicks,
        orders: totals.orders,
        empty: totals.impressions <= 0.0,
        saturated,
    }
}

/// Metric weights on the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MetricWeights([f64; N_METRICS]);

impl MetricWeights {
    pub fn new(w: [f64; N_METRICS]) -> Result<Self> {
        for (m, x) in Metric::ALL.iter().zip(w) {
            ensure_finite(m.name(), x)?;
            if x < 0.0 {
                return Err(Error::Config(format!("weight on {} is negative", m.name())));
            }
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "metric weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self(w))
    }

    /// `lambda * RPM + (1 - lambda) * other`.
    pub fn tradeoff(lambda: f64, other: Metric) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda {lambda} outside [0,1]")));
        }
        let mut w = [0.0; N_METRICS];
        w[Metric::Rpm.index()] += lambda;
        w[other.index()] += 1.0 - lambda;
        Self::new(w)
    }

    pub fn rpm_only() -> Self {
        Self([1.0, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn as_array(&self) -> [f64; N_METRICS] {
        self.0
    }

    pub fn dot(&self, values: &[f64; N_METRICS]) -> f64 {
        self.0.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Tuple rendering like `(0.5,0.5,0,0,0)`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|w| format!("{w}")).collect();
        format!("({})", parts.join(","))
    }
}

impl TryFrom<Vec<f64>> for MetricWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        let arr: [f64; N_METRICS] = v.try_into().map_err(|v: Vec<f64>| {
            Error::Config(format!(
                "expected {N_METRICS} metric weights, got {}",
                v.len()
            ))
        })?;
        Self::new(arr)
    }
}

impl From<MetricWeights> for Vec<f64> {
    fn from(w: MetricWeights) -> Self {
        w.0.to_vec()
    }
}

/// `F = sum_j w_j f_j`.
pub fn scalarize(metrics: &[f64], weights: &[f64]) -> Result<f64> {
    if metrics.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} metrics but {} weights",
            metrics.len(),
            weights.len()
        )));
    }
    Ok(metrics.iter().zip(weights).map(|(m, w)| m * w).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rpm_arithmetic() {
        let t = FeedbackTotals {
            impressions: 1000.0,
            clicks: 300.0,
            revenue: 300.0,
            ..Default::default()
        };
        let raw = t.raw_metrics();
        assert!((raw[0] - 300.0).abs() < 1e-12);
        assert!((raw[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn clicks_without_orders() {
        let t = FeedbackTotals {
            impressions: 10.0,
            clicks: 10.0,
            revenue: 5.0,
            ..Default::default()
        };
        let m = compute_metrics(&t, &Normalizers::unit());
        assert_eq!(m.get(Metric::Cvr), 0.0);
        assert_eq!(m.get(Metric::Gpm), 0.0);
    }

    #[test]
    fn empty_batch_is_flagged_zero() {
        let m = compute_metrics(&FeedbackTotals::default(), &Normalizers::unit());
        assert!(m.empty);
        assert_eq!(m.values, [0.0; 5]);
    }

    #[test]
    fn calibration_maps_to_half() {
        let raw = [40.0, 0.05, 0.01, 0.005, 300.0];
        let n = Normalizers::from_calibration(raw);
        for v in n.apply(raw) {
            assert!((v - 0.5).abs() < 1e-12);
        }
        let big = compute_metrics(
            &FeedbackTotals {
                impressions: 1.0,
                revenue: 1.0,
                ..Default::default()
            },
            &n,
        );
        assert!(big.saturated && big.values[0] == 1.0 && big.scaled[0] > 1.0);
    }

    #[test]
    fn scalarize_examples() {
        let f = [0.3, 0.2, 0.1, 0.05, 0.9];
        assert_eq!(
            scalarize(&f, &MetricWeights::rpm_only().as_array()).unwrap(),
            0.3
        );
        let w2 = MetricWeights::new([0.5, 0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!((scalarize(&f, &w2.as_array()).unwrap() - 0.25).abs() < 1e-15);
        assert!(scalarize(&f, &[1.0, 0.0]).is_err());
        let w6 = MetricWeights::new([0.6, 0.1, 0.1, 0.1, 0.1]).unwrap();
        assert!((w6.dot(&[0.42; 5]) - 0.42).abs() < 1e-15);
    }

    #[test]
    fn weights_validation() {
        assert!(MetricWeights::new([0.5, 0.4, 0.0, 0.0, 0.0]).is_err());
        assert!(MetricWeights::new([1.2, -0.2, 0.0, 0.0, 0.0]).is_err());
        assert!(MetricWeights::try_from(vec![1.0]).is_err());
        assert_eq!(
            MetricWeights::tradeoff(0.25, Metric::Ctr)
                .unwrap()
                .as_array(),
            [0.25, 0.75, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            MetricWeights::tradeoff(1.0, Metric::Gpm).unwrap(),
            MetricWeights::rpm_only()
        );
        assert_eq!(
            MetricWeights::new([0.5, 0.5, 0.0, 0.0, 0.0])
                .unwrap()
                .label(),
            "(0.5,0.5,0,0,0)"
        );
    }

    fn totals() -> impl Strategy<Value = FeedbackTotals> {
        (0u32..50, 0u32..50, 0.0..100.0f64).prop_map(|(imp, extra, money)| {
            let clicks = (imp / 2) as f64;
            FeedbackTotals {
                impressions: (imp + extra) as f64,
                clicks,
                carts: (clicks / 2.0).floor(),
                orders: (clicks / 3.0).floor(),
                revenue: money,
                gmv: 2.0 * money,
            }
        })
    }

    proptest! {
        #[test]
        fn merge_is_associative_and_commutative(a in totals(), b in totals(), c in totals()) {
            let left = (a + b) + c;
            let right = a + (b + c);
            for (x, y) in [(left.revenue, right.revenue), (left.clicks, right.clicks), (left.gmv, right.gmv)] {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
            prop_assert_eq!((a + b).impressions, (b + a).impressions);
        }

        #[test]
        fn conversion_rates_bounded_by_ctr(t in totals()) {
            let raw = t.raw_metrics();
            prop_assert!(raw[3] <= raw[1] && raw[2] <= raw[1]);
            let m = compute_metrics(&t, &Normalizers::from_calibration([30.0, 0.05, 0.01, 0.005, 200.0]));
            prop_assert!(m.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
