//! Greedy backward elimination of polynomial surface terms.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::fit_surface_linear;
use crate::model::OperatingPoint;
use crate::surface::{canonical_basis, full_basis, Monomial};

/// Default relative RMSE growth allowed over the full-basis fit.
pub const DEFAULT_PLATEAU: f64 = 1.10;
/// Rmse values at or below this are treated as an exact fit.
pub const RMSE_FLOOR: f64 = 1e-12;
const IMPROVEMENT: f64 = 0.01;

/// Smallest total degree `N` beyond which adding the next degree improves
/// rmse by less than 1%.
///
/// `N` never exceeds `max_degree`, and the full basis of degree `N` never
/// has more terms than there are samples. A rank-deficient fit at `N + 1`
/// also stops the search.
pub fn choose_initial_degree(samples: &[(OperatingPoint, f64)], max_degree: u32) -> Result<u32> {
    if samples.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut degree = 0;
    let mut rmse = fit_surface_linear(samples, &full_basis(0))?.rmse;
    while degree < max_degree && rmse > RMSE_FLOOR {
        let next = full_basis(degree + 1);
        if next.len() > samples.len() {
            break;
        }
        let next_rmse = match fit_surface_linear(samples, &next) {
            Ok(fit) => fit.rmse,
            Err(Error::RankDeficient { .. }) => break,
            Err(e) => return Err(e),
        };
        if next_rmse >= (1.0 - IMPROVEMENT) * rmse {
            break;
        }
        degree += 1;
        rmse = next_rmse;
    }
    Ok(degree)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EliminationStep {
    pub removed: Monomial,
    pub rmse_after: f64,
    /// Rmse of the refit without each candidate, in basis order.
    pub rmse_deltas_considered: Vec<(Monomial, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    PlateauExceeded,
    MinTermsReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EliminationTrace {
    pub initial_basis: Vec<Monomial>,
    pub baseline_rmse: f64,
    pub steps: Vec<EliminationStep>,
    pub selected_basis: Vec<Monomial>,
    pub stop_reason: StopReason,
}

/// Candidate to remove: minimum refit rmse; near-ties (within 1e-12
/// relative) go to the higher total degree, then the higher frequency power.
fn pick(candidates: &[(Monomial, f64)]) -> (Monomial, f64) {
    let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * best + 1e-300;
    *candidates
        .iter()
        .filter(|c| c.1 <= best + tol)
        .max_by_key(|c| (c.0.degree(), c.0.freq_power))
        .expect("at least one candidate")
}

/// Repeatedly drops the term whose removal raises rmse least.
///
/// Stops before a removal would push rmse above
/// `plateau_factor × max(baseline, 1e-12)`, or once `min_terms` remain.
pub fn eliminate(
    samples: &[(OperatingPoint, f64)],
    initial_basis: &[Monomial],
    plateau_factor: f64,
    min_terms: usize,
) -> Result<EliminationTrace> {
    if !(plateau_factor > 1.0) {
        return Err(Error::Domain(format!("plateau factor must exceed 1, got {plateau_factor}")));
    }
    if min_terms == 0 {
        return Err(Error::Domain("min_terms must be at least 1".into()));
    }
    let initial_basis = canonical_basis(initial_basis.to_vec())?;
    let baseline_rmse = fit_surface_linear(samples, &initial_basis)?.rmse;
    let budget = plateau_factor * baseline_rmse.max(RMSE_FLOOR);

    let mut basis = initial_basis.clone();
    let mut steps = Vec::new();
    let stop_reason = loop {
        if basis.len() <= min_terms {
            break StopReason::MinTermsReached;
        }
        let candidates = basis
            .par_iter()
            .map(|&m| {
                let reduced: Vec<Monomial> = basis.iter().copied().filter(|&b| b != m).collect();
                fit_surface_linear(samples, &reduced).map(|fit| (m, fit.rmse))
            })
            .collect::<Result<Vec<_>>>()?;
        let (removed, rmse_after) = pick(&candidates);
        if rmse_after > budget {
            break StopReason::PlateauExceeded;
        }
        basis.retain(|&b| b != removed);
        steps.push(EliminationStep {
            removed,
            rmse_after,
            rmse_deltas_considered: candidates,
        });
    };
    Ok(EliminationTrace {
        initial_basis,
        baseline_rmse,
        steps,
        selected_basis: basis,
        stop_reason,
    })
}

/// One plotted point of an elimination trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub terms_count: usize,
    pub rmse: f64,
    /// Monomial removed to reach this basis size; `None` for the full basis.
    pub removed: Option<Monomial>,
}

/// One row per basis size, from the initial basis down to the selected one.
pub fn export_trace(trace: &EliminationTrace) -> Vec<TraceRow> {
    let mut rows = vec![TraceRow {
        terms_count: trace.initial_basis.len(),
        rmse: trace.baseline_rmse,
        removed: None,
    }];
    for (i, step) in trace.steps.iter().enumerate() {
        rows.push(TraceRow {
            terms_count: trace.initial_basis.len() - i - 1,
            rmse: step.rmse_after,
            removed: Some(step.removed),
        });
    }
    rows
}

pub const TRACE_HEADER: &str = "terms_count,rmse,removed_monomial";

/// CSV with header `terms_count,rmse,removed_monomial`; the first row has
/// an empty monomial field.
pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for row in rows {
        let removed = row.removed.map(|m| m.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{:e},{}", row.terms_count, row.rmse, removed);
    }
    out
}

pub fn trace_from_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRACE_HEADER => {}
        other => {
            return Err(Error::parse(
                "trace csv",
                format!("expected header {TRACE_HEADER:?}, got {other:?}"),
            ))
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let ctx = format!("trace csv line {}", i + 2);
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [count, rmse, removed] = fields[..] else {
                return Err(Error::parse(ctx, "expected 3 fields"));
            };
            Ok(TraceRow {
                terms_count: count.parse().map_err(|e| Error::parse(&ctx, e))?,
                rmse: rmse.parse().map_err(|e| Error::parse(&ctx, e))?,
                removed: if removed.is_empty() {
                    None
                } else {
                    Some(removed.parse().map_err(|e| Error::parse(&ctx, e))?)
                },
            })
        })
        .collect()
}
