//! The three-ad, two-slot worked example: squashing-free GSP against the
//! hand-set nonlinear score, with the printed reference values.

use std::fmt::Write as _;

use super::mechanism::{run_auction, Mechanism, Pricing};
use super::pricing::PricingConfig;
use super::types::{AdCandidate, AdId, AuctionRequest};
use crate::error::Result;

/// (ad, bid, pctr) of the three eligible ads.
pub const ADS: [(u32, f64, f64); 3] = [(1, 10.0, 0.1), (2, 2.4, 0.2), (3, 1.3, 0.3)];

/// Printed reference: per ad `(slot, ppc)` with `None` for the loser, then totals.
pub struct Expected {
    pub rows: [Option<(usize, f64)>; 3],
    pub revenue: f64,
    pub ctr: f64,
}

pub const GSP_EXPECTED: Expected = Expected {
    rows: [Some((1, 4.8)), Some((2, 1.95)), None],
    revenue: 0.87,
    ctr: 0.3,
};

pub const FIXED_EXPECTED: Expected = Expected {
    rows: [Some((1, 9.54)), None, Some((2, 1.25))],
    revenue: 1.329,
    ctr: 0.4,
};

pub const PPC_TOL: f64 = 0.02;
/// Tolerance on the nonlinear-score revenue total; the printed scores are rounded.
pub const FIXED_REVENUE_TOL: f64 = 0.005;
const EXACT_TOL: f64 = 1e-9;

pub fn toy_request() -> AuctionRequest {
    AuctionRequest {
        candidates: ADS
            .iter()
            .map(|&(id, bid, pctr)| AdCandidate::with_pctr(AdId(id), bid, pctr, 0))
            .collect(),
        slots: 2,
        slot_ctr_factors: vec![1.0, 1.0],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyRow {
    pub ad: u32,
    pub bid: f64,
    pub pctr: f64,
    pub score: f64,
    pub rank: usize,
    /// `(slot, ppc)` for winners.
    pub win: Option<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTable {
    pub label: &'static str,
    pub rows: Vec<ToyRow>,
    /// Sum of `ppc * pctr` over winners.
    pub revenue: f64,
    pub ctr: f64,
}

fn table(label: &'static str, mechanism: &Mechanism<'_>) -> Result<ToyTable> {
    let req = toy_request();
    let out = run_auction(
        &req,
        mechanism,
        Pricing::Multiplier,
        &PricingConfig::default(),
    )?;
    let rows: Vec<ToyRow> = req
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let rank = out
                .ranking
                .iter()
                .position(|e| e.candidate == i)
                .expect("ranked")
                + 1;
            ToyRow {
                ad: c.ad_id.0,
                bid: c.bid,
                pctr: c.pctr(),
                score: out.ranking[rank - 1].score,
                rank,
                win: out.winner_of(i).map(|w| (w.slot, w.price_per_click)),
            }
        })
        .collect();
    let (revenue, ctr) = rows.iter().fold((0.0, 0.0), |(r, c), row| match row.win {
        Some((_, ppc)) => (r + ppc * row.pctr, c + row.pctr),
        None => (r, c),
    });
    Ok(ToyTable {
        label,
        rows,
        revenue,
        ctr,
    })
}

/// Both halves of the example: GSP first, then the nonlinear score.
pub fn toy_tables() -> Result<[ToyTable; 2]> {
    Ok([
        table("GSP", &Mechanism::Gsp { sigma: 1.0 })?,
        table("Deep GSP (fixed score)", &Mechanism::Fixed)?,
    ])
}

/// Human-readable mismatches against the printed values; empty when the example reproduces.
pub fn toy_mismatches(tables: &[ToyTable; 2]) -> Vec<String> {
    let mut bad = Vec::new();
    for (t, exp, rev_tol) in [
        (&tables[0], &GSP_EXPECTED, EXACT_TOL),
        (&tables[1], &FIXED_EXPECTED, FIXED_REVENUE_TOL),
    ] {
        for (row, want) in t.rows.iter().zip(&exp.rows) {
            match (row.win, want) {
                (Some((slot, ppc)), Some((ws, wp))) => {
                    if slot != *ws {
                        bad.push(format!(
                            "{}: ad {} in slot {slot}, expected {ws}",
                            t.label, row.ad
                        ));
                    }
                    if (ppc - wp).abs() > PPC_TOL {
                        bad.push(format!(
                            "{}: ad {} pays {ppc:.4}, expected {wp} ± {PPC_TOL}",
                            t.label, row.ad
                        ));
                    }
                }
                (None, None) => {}
                _ => bad.push(format!(
                    "{}: ad {} has the wrong win/lose status",
                    t.label, row.ad
                )),
            }
        }
        if (t.revenue - exp.revenue).abs() > rev_tol {
            bad.push(format!(
                "{}: revenue {:.4}, expected {} ± {rev_tol}",
                t.label, t.revenue, exp.revenue
            ));
        }
        if (t.ctr - exp.ctr).abs() > EXACT_TOL {
            bad.push(format!(
                "{}: ctr {:.4}, expected {}",
                t.label, t.ctr, exp.ctr
            ));
        }
    }
    bad
}

pub fn format_toy(tables: &[ToyTable; 2]) -> String {
    let mut s = String::new();
    for t in tables {
        let _ = writeln!(s, "{}", t.label);
        let _ = writeln!(s, "Ad  Bid    pCTR  Score   Rank  PPC     Revenue  CTR");
        for r in &t.rows {
            let (ppc, rev, ctr) = match r.win {
                Some((_, p)) => (
                    format!("{p:.3}"),
                    format!("{:.3}", p * r.pctr),
                    format!("{:.1}", r.pctr),
                ),
                None => ("/".into(), "/".into(), "/".into()),
            };
            let _ = writeln!(
                s,
                "{:<3} {:<6} {:<5} {:<7.3} {:<5} {:<7} {:<8} {}",
                r.ad, r.bid, r.pctr, r.score, r.rank, ppc, rev, ctr
            );
        }
        let _ = writeln!(s, "Total{:>37.3}  {:.1}\n", t.revenue, t.ctr);
    }
    s
}
