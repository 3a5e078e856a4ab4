//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use behavior_probe::game_model::MatrixGame2x2;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Textbook single-pass formula.
pub fn direct_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Upper-tail signed-rank p-value by enumerating all 2^n sign assignments.
/// Returns `(w_plus, w_minus, p)` where `p` is for the larger side.
pub fn signflip_wilcoxon(diffs: &[f64]) -> (f64, f64, f64) {
    let d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    let ranks: Vec<f64> = d
        .iter()
        .map(|v| {
            let below = d.iter().filter(|w| w.abs() < v.abs()).count() as f64;
            let same = d.iter().filter(|w| w.abs() == v.abs()).count() as f64;
            below + (same + 1.0) / 2.0
        })
        .collect();
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total: f64 = ranks.iter().sum();
    let w_minus = total - w_plus;
    let stat = w_plus.max(w_minus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w >= stat {
            hits += 1;
        }
    }
    (w_plus, w_minus, hits as f64 / (1u64 << n) as f64)
}

/// Expected payoffs of each pure action against a mixed opponent.
fn row_payoffs(g: &MatrixGame2x2, q: f64) -> [f64; 2] {
    let a = &g.row_payoffs;
    [q * a[0][0] + (1.0 - q) * a[0][1], q * a[1][0] + (1.0 - q) * a[1][1]]
}

fn col_payoffs(g: &MatrixGame2x2, p: f64) -> [f64; 2] {
    let b = &g.col_payoffs;
    [p * b[0][0] + (1.0 - p) * b[1][0], p * b[0][1] + (1.0 - p) * b[1][1]]
}

/// Every action in the support of a mixed strategy earns the maximum.
fn is_best_response(payoffs: [f64; 2], prob_first: f64, tol: f64) -> bool {
    let best = payoffs[0].max(payoffs[1]);
    (prob_first <= 0.0 || payoffs[0] >= best - tol) && (prob_first >= 1.0 || payoffs[1] >= best - tol)
}

/// Both strategies are best responses to each other.
pub fn best_response_holds(g: &MatrixGame2x2, p: f64, q: f64, tol: f64) -> bool {
    (0.0..=1.0).contains(&p)
        && (0.0..=1.0).contains(&q)
        && is_best_response(row_payoffs(g, q), p, tol)
        && is_best_response(col_payoffs(g, p), q, tol)
}

/// No player is ever indifferent between pure actions against a pure
/// opponent action.
pub fn is_nondegenerate(g: &MatrixGame2x2) -> bool {
    let (a, b) = (&g.row_payoffs, &g.col_payoffs);
    a[0][0] != a[1][0] && a[0][1] != a[1][1] && b[0][0] != b[0][1] && b[1][0] != b[1][1]
}

/// All equilibria found by enumerating the nine support pairs.
pub fn support_enumeration(g: &MatrixGame2x2) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (p, q) in [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)] {
        if best_response_holds(g, p, q, 0.0) {
            out.push((p, q));
        }
    }
    // Full supports: each player mixes to make the other indifferent.
    let (a, b) = (&g.row_payoffs, &g.col_payoffs);
    let q_den = (a[0][0] - a[1][0]) - (a[0][1] - a[1][1]);
    let p_den = (b[0][0] - b[0][1]) - (b[1][0] - b[1][1]);
    if q_den != 0.0 && p_den != 0.0 {
        let q = (a[1][1] - a[0][1]) / q_den;
        let p = (b[1][1] - b[1][0]) / p_den;
        if q > 0.0 && q < 1.0 && p > 0.0 && p < 1.0 {
            out.push((p, q));
        }
    }
    // Mixed against pure: the mixing player must be indifferent against a
    // pure action, which non-degenerate games rule out.
    out
}

/// The unique equilibrium when there is one, otherwise the fully mixed one.
pub fn oracle_ne(g: &MatrixGame2x2) -> Option<(f64, f64)> {
    let eqs = support_enumeration(g);
    if eqs.len() == 1 {
        return Some(eqs[0]);
    }
    eqs.into_iter().find(|&(p, q)| p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0)
}

/// Compares a p-value against a printed value rounded to `sig` significant
/// figures: the printed digits must be within half a unit in the last place.
pub fn matches_printed(p: f64, printed: f64, sig: i32) -> bool {
    let exp = printed.abs().log10().floor() as i32;
    let half_ulp = 0.5 * 10f64.powi(exp - sig + 1);
    (p - printed).abs() <= half_ulp * (1.0 + 1e-9)
}
