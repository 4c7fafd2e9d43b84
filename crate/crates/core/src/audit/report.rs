use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{i_sic, monotonicity_metric, payment_error_rate, test_states, AuditConfig};
use super::{IsicReport, MonotonicityReport, PerReport};
use crate::auction::{Mechanism, Pricing, PricingConfig};
use crate::error::Result;
use crate::net::Actor;
use crate::sim::World;

/// One line of the audit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub label: String,
    pub monotonicity: MonotonicityReport,
    pub per: PerReport,
    pub isic: IsicReport,
}

/// Runs all three audits on an actor. Monotonicity and payment error use the
/// world as configured; i-SIC uses its single-slot restriction.
pub fn audit_actor(
    label: &str,
    actor: &Actor,
    world: &World,
    cfg: &AuditConfig,
) -> Result<AuditRow> {
    cfg.validate()?;
    let states = test_states(world, cfg.seed, cfg.mono_rounds);
    let monotonicity = monotonicity_metric(actor, &states, cfg)?;
    let mech = Mechanism::DeepGsp(actor);
    let pricing = PricingConfig::default();
    let per = payment_error_rate(
        world,
        &mech,
        cfg.seed.wrapping_add(1),
        cfg.per_rounds,
        &pricing,
    )?;
    let isic = i_sic(
        &world.single_slot(),
        &mech,
        Pricing::Multiplier,
        &pricing,
        cfg.alpha,
        cfg.isic_samples,
        cfg.seed.wrapping_add(2),
    )?;
    Ok(AuditRow {
        label: label.to_string(),
        monotonicity,
        per,
        isic,
    })
}

fn opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.digits$}"))
}

impl AuditRow {
    pub const CSV_HEADER: &'static str =
        "config,t_m,t_m_states,t_m_degenerate,per_mean,per_p05,per_p95,per_audited,per_excluded,isic,isic_alpha,isic_samples";

    pub fn csv_line(&self) -> String {
        format!(
            "\"{}\",{},{},{},{},{},{},{},{},{},{},{}",
            self.label,
            opt(self.monotonicity.t_m, 6),
            self.monotonicity.states,
            self.monotonicity.degenerate,
            opt(self.per.mean, 6),
            opt(self.per.p05, 6),
            opt(self.per.p95, 6),
            self.per.audited,
            self.per.excluded,
            opt(self.isic.value, 6),
            self.isic.alpha,
            self.isic.samples
        )
    }
}

/// Plain-text table with one row per configuration: `Exp | config | T_m | PER | IC`.
pub fn format_table(rows: &[AuditRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.label.len())
        .max()
        .unwrap_or(0)
        .max(22);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>3} | {:<width$} | {:>6} | {:>6} | {:>6}",
        "Exp", "Metrics Configuration", "T_m", "PER", "IC"
    );
    let _ = writeln!(s, "{}", "-".repeat(width + 34));
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:>3} | {:<width$} | {:>6} | {:>6} | {:>6}",
            i + 1,
            r.label,
            opt(r.monotonicity.t_m, 3),
            opt(r.per.mean, 3),
            opt(r.isic.value, 4)
        );
    }
    s
}
