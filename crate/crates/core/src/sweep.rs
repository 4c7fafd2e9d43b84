//! Trade-off sweeps: Pareto curves against the closed-form baselines and the
//! smooth-transition sweep over the utility tolerance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auction::{Mechanism, UgspWeights};
use crate::audit::{spearman_rho, Rho};
use crate::error::{Error, Result};
use crate::net::Actor;
use crate::sim::{evaluate, EvalSpec, Evaluation, Metric, MetricWeights, World};
use crate::train::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gsp,
    Ugsp,
    DeepGsp,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gsp => "gsp",
            Family::Ugsp => "ugsp",
            Family::DeepGsp => "deep_gsp",
        }
    }
}

/// One mechanism evaluated in the (other metric, RPM) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub family: Family,
    /// Squashing exponent, uGSP mixing weight, or objective weight on RPM.
    pub param: f64,
    pub other: f64,
    pub rpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParetoSpec {
    /// Metric traded against RPM.
    pub other: Metric,
    /// Objective weights on RPM for the trained models.
    pub lambdas: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    /// Mixing weights of the uGSP score `l * pctr * bid + (1 - l) * p_other`.
    pub ugsp_grid: Vec<f64>,
    pub eval_seed: u64,
    pub eval_rounds: usize,
}

impl Default for ParetoSpec {
    fn default() -> Self {
        Self {
            other: Metric::Ctr,
            lambdas: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            sigma_grid: vec![0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
            // bid * pctr dwarfs pctr, so the interesting part of the curve sits
            // at small weights
            ugsp_grid: vec![
                0.0, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9,
                1.0,
            ],
            eval_seed: 777,
            eval_rounds: 5_000,
        }
    }
}

impl ParetoSpec {
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if self.other == Metric::Rpm {
            p.push("other metric must differ from RPM".to_string());
        }
        for (name, g) in [("lambdas", &self.lambdas), ("ugsp_grid", &self.ugsp_grid)] {
            if g.is_empty() || g.iter().any(|l| !(0.0..=1.0).contains(l)) {
                p.push(format!("{name} must be nonempty and inside [0,1]"));
            }
        }
        if self.sigma_grid.is_empty() || self.sigma_grid.iter().any(|s| !s.is_finite() || *s < 0.0)
        {
            p.push("sigma_grid must be nonempty and nonnegative".into());
        }
        if self.eval_rounds == 0 {
            p.push("eval_rounds must be positive".into());
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("; ")))
        }
    }

    fn eval(&self) -> EvalSpec {
        EvalSpec::new(self.eval_seed, self.eval_rounds)
    }

    fn ugsp(&self, l: f64) -> UgspWeights {
        let mut w = UgspWeights {
            bid: l,
            ..UgspWeights::default()
        };
        let rest = 1.0 - l;
        match self.other {
            Metric::Ctr => w.ctr = rest,
            Metric::Acr => w.acr = rest,
            Metric::Cvr => w.cvr = rest,
            Metric::Gpm => w.gmv = rest,
            Metric::Rpm => unreachable!("validated"),
        }
        w
    }
}

fn point(family: Family, param: f64, other: Metric, e: &Evaluation) -> CurvePoint {
    CurvePoint {
        family,
        param,
        other: e.metrics.get(other),
        rpm: e.metrics.get(Metric::Rpm),
    }
}

/// GSP over the sigma grid followed by uGSP over its grid.
pub fn baseline_curves(world: &World, spec: &ParetoSpec) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    let mut jobs: Vec<(Family, f64)> = spec.sigma_grid.iter().map(|&s| (Family::Gsp, s)).collect();
    jobs.extend(spec.ugsp_grid.iter().map(|&l| (Family::Ugsp, l)));
    jobs.par_iter()
        .map(|&(family, param)| {
            let mech = match family {
                Family::Gsp => Mechanism::Gsp { sigma: param },
                _ => Mechanism::Ugsp(spec.ugsp(param)),
            };
            Ok(point(
                family,
                param,
                spec.other,
                &evaluate(world, &mech, &spec.eval())?,
            ))
        })
        .collect()
}

/// Upper envelope of `curve` reachable at `other >= x`: efficient points joined
/// by straight segments (mixing two mechanisms at random attains any point on
/// the segment). `None` when every point lies left of `x`.
pub fn frontier_rpm_at(curve: &[CurvePoint], x: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.other, p.rpm)).collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    // sweep from the right, keeping points that beat everything further right
    let mut eff: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        if eff.last().is_none_or(|l| p.1 > l.1) {
            eff.push(p);
        }
    }
    eff.reverse();
    let (first, last) = (*eff.first()?, *eff.last()?);
    if x > last.0 {
        return None;
    }
    if x <= first.0 {
        return Some(first.1);
    }
    let k = eff.partition_point(|p| p.0 < x);
    let (a, b) = (eff[k - 1], eff[k]);
    Some(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0))
}

/// Whether some point of the interpolated curve is at least as good in both
/// coordinates and strictly better in RPM than `p`.
pub fn dominated_by(curve: &[CurvePoint], p: &CurvePoint) -> bool {
    frontier_rpm_at(curve, p.other).is_some_and(|y| y > p.rpm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoRow {
    pub lambda: f64,
    pub deep: CurvePoint,
    /// Scalarized objective of the trained model.
    pub objective: f64,
    /// Best scalarized objective over all baseline points at the same weights.
    pub best_baseline_objective: f64,
    pub dominated_by_gsp: bool,
    pub dominated_by_ugsp: bool,
}

impl ParetoRow {
    pub fn undominated(&self) -> bool {
        !self.dominated_by_gsp && !self.dominated_by_ugsp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoReport {
    pub other: Metric,
    pub baselines: Vec<CurvePoint>,
    pub rows: Vec<ParetoRow>,
}

impl ParetoReport {
    pub const CSV_HEADER: &'static str = "family,param,other,rpm";

    /// Fraction of weights at which the trained model lies on or above both baseline curves.
    pub fn dominance_fraction(&self) -> f64 {
        self.rows.iter().filter(|r| r.undominated()).count() as f64 / self.rows.len().max(1) as f64
    }

    pub fn points(&self) -> impl Iterator<Item = &CurvePoint> {
        self.baselines
            .iter()
            .chain(self.rows.iter().map(|r| &r.deep))
    }
}

/// Objective weights of the trained model at one point of the RPM trade-off.
pub fn tradeoff_config(template: &TrainConfig, lambda: f64, other: Metric) -> Result<TrainConfig> {
    Ok(TrainConfig {
        weights: Some(MetricWeights::tradeoff(lambda, other)?),
        ..template.clone()
    })
}

/// Trains (through `model`) one actor per weight and places it against the baselines.
pub fn pareto<F>(
    world: &World,
    spec: &ParetoSpec,
    template: &TrainConfig,
    model: F,
) -> Result<ParetoReport>
where
    F: Fn(&TrainConfig) -> Result<Actor> + Sync,
{
    let baselines = baseline_curves(world, spec)?;
    let (gsp, ugsp): (Vec<CurvePoint>, Vec<CurvePoint>) =
        baselines.iter().partition(|p| p.family == Family::Gsp);
    let evals: Vec<(f64, Evaluation)> = spec
        .lambdas
        .par_iter()
        .map(|&l| {
            let actor = model(&tradeoff_config(template, l, spec.other)?)?;
            Ok((
                l,
                evaluate(world, &Mechanism::DeepGsp(&actor), &spec.eval())?,
            ))
        })
        .collect::<Result<_>>()?;
    let rows = evals
        .iter()
        .map(|(l, e)| {
            let w = MetricWeights::tradeoff(*l, spec.other)?;
            let deep = point(Family::DeepGsp, *l, spec.other, e);
            let scal = |p: &CurvePoint| l * p.rpm + (1.0 - l) * p.other;
            Ok(ParetoRow {
                lambda: *l,
                deep,
                objective: e.objective(&w),
                best_baseline_objective: baselines
                    .iter()
                    .map(scal)
                    .fold(f64::NEG_INFINITY, f64::max),
                dominated_by_gsp: dominated_by(&gsp, &deep),
                dominated_by_ugsp: dominated_by(&ugsp, &deep),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ParetoReport {
        other: spec.other,
        baselines,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionSpec {
    pub epsilons: Vec<f64>,
    pub eval_seed: u64,
    pub eval_rounds: usize,
}

impl Default for TransitionSpec {
    fn default() -> Self {
        Self {
            epsilons: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            eval_seed: 777,
            eval_rounds: 5_000,
        }
    }
}

impl TransitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.len() < 2 || self.epsilons.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::Config(
                "epsilons need at least two values inside [0,1]".into(),
            ));
        }
        if self.eval_rounds == 0 {
            return Err(Error::Config("eval_rounds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub epsilon: f64,
    /// Total advertiser utility, percent of the benchmark mechanism's.
    pub utility_pct: f64,
    /// Scalarized objective, percent of the benchmark mechanism's.
    pub objective_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub benchmark_objective: f64,
    pub benchmark_utility: f64,
    pub rows: Vec<TransitionRow>,
}

impl TransitionReport {
    pub const CSV_HEADER: &'static str = "epsilon,utility_pct,objective_pct";

    fn trend(&self, f: impl Fn(&TransitionRow) -> f64) -> Result<Rho> {
        let e: Vec<f64> = self.rows.iter().map(|r| r.epsilon).collect();
        let y: Vec<f64> = self.rows.iter().map(f).collect();
        spearman_rho(&e, &y)
    }

    /// Rank correlation of utility with the tolerance; expected negative.
    pub fn utility_trend(&self) -> Result<Rho> {
        self.trend(|r| r.utility_pct)
    }

    /// Rank correlation of the objective with the tolerance; expected positive.
    pub fn objective_trend(&self) -> Result<Rho> {
        self.trend(|r| r.objective_pct)
    }
}

/// Trains one actor per tolerance and reports utility and objective relative
/// to GSP with unit squashing on common held-out requests.
pub fn transition<F>(
    world: &World,
    spec: &TransitionSpec,
    template: &TrainConfig,
    model: F,
) -> Result<TransitionReport>
where
    F: Fn(&TrainConfig) -> Result<Actor> + Sync,
{
    spec.validate()?;
    let weights = template.weights()?;
    let eval = EvalSpec::new(spec.eval_seed, spec.eval_rounds);
    let bench = evaluate(world, &Mechanism::Gsp { sigma: 1.0 }, &eval)?;
    let (bo, bu) = (bench.objective(&weights), bench.total_utility());
    let rows = spec
        .epsilons
        .par_iter()
        .map(|&epsilon| {
            let actor = model(&TrainConfig {
                epsilon,
                ..template.clone()
            })?;
            let e = evaluate(world, &Mechanism::DeepGsp(&actor), &eval)?;
            Ok(TransitionRow {
                epsilon,
                utility_pct: 100.0 * e.total_utility() / bu,
                objective_pct: 100.0 * e.objective(&weights) / bo,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TransitionReport {
        benchmark_objective: bo,
        benchmark_utility: bu,
        rows,
    })
}
