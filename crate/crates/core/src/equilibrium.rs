//! Equilibrium predictions for one-shot 2×2 games.
//!
//! Selection rule:
//! 1. if either player has a strictly dominant action, the dominance-solved
//!    pure profile;
//! 2. otherwise the fully mixed profile, when both indifference
//!    probabilities lie strictly inside (0, 1);
//! 3. otherwise the unique pure equilibrium.
//!
//! Anything else (weak-dominance ties with several equilibria, zero
//! indifference denominators) is reported as degenerate.

use serde::{Deserialize, Serialize};

use crate::analysis::Winner;
use crate::game_model::MatrixGame2x2;
use crate::stats::{pearson, CorrelationResult, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeKind {
    InteriorMixed,
    PureDominant,
    PureUnique,
}

/// Equilibrium probabilities of each player's first action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NePrediction {
    pub row_action1_prob: f64,
    pub col_action1_prob: f64,
    pub kind: NeKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EquilibriumError {
    #[error("payoffs must be finite")]
    NonFinite,
    #[error("degenerate game: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("correlation is undefined")]
    UndefinedCorrelation,
}

fn strictly_dominant_row(a: &[[f64; 2]; 2]) -> Option<usize> {
    if a[0][0] > a[1][0] && a[0][1] > a[1][1] {
        Some(0)
    } else if a[1][0] > a[0][0] && a[1][1] > a[0][1] {
        Some(1)
    } else {
        None
    }
}

fn strictly_dominant_col(b: &[[f64; 2]; 2]) -> Option<usize> {
    if b[0][0] > b[0][1] && b[1][0] > b[1][1] {
        Some(0)
    } else if b[0][1] > b[0][0] && b[1][1] > b[1][0] {
        Some(1)
    } else {
        None
    }
}

fn indicator(action: usize) -> f64 {
    if action == 0 {
        1.0
    } else {
        0.0
    }
}

fn pure(i: usize, j: usize, kind: NeKind) -> NePrediction {
    NePrediction {
        row_action1_prob: indicator(i),
        col_action1_prob: indicator(j),
        kind,
    }
}

/// Computes the selected equilibrium of a 2×2 game.
pub fn mixed_ne_2x2(game: &MatrixGame2x2) -> Result<NePrediction, EquilibriumError> {
    if !game.payoffs_finite() {
        return Err(EquilibriumError::NonFinite);
    }
    let a = &game.row_payoffs;
    let b = &game.col_payoffs;

    match (strictly_dominant_row(a), strictly_dominant_col(b)) {
        (Some(i), Some(j)) => return Ok(pure(i, j, NeKind::PureDominant)),
        (Some(i), None) => {
            let j = match b[i][0].partial_cmp(&b[i][1]) {
                Some(std::cmp::Ordering::Greater) => 0,
                Some(std::cmp::Ordering::Less) => 1,
                _ => {
                    return Err(EquilibriumError::Degenerate(format!(
                        "column player is indifferent against dominant row action {}",
                        i + 1
                    )))
                }
            };
            return Ok(pure(i, j, NeKind::PureDominant));
        }
        (None, Some(j)) => {
            let i = match a[0][j].partial_cmp(&a[1][j]) {
                Some(std::cmp::Ordering::Greater) => 0,
                Some(std::cmp::Ordering::Less) => 1,
                _ => {
                    return Err(EquilibriumError::Degenerate(format!(
                        "row player is indifferent against dominant column action {}",
                        j + 1
                    )))
                }
            };
            return Ok(pure(i, j, NeKind::PureDominant));
        }
        (None, None) => {}
    }

    // p makes the column player indifferent, q makes the row player indifferent.
    let den_p = b[0][0] - b[0][1] - b[1][0] + b[1][1];
    let den_q = a[0][0] - a[0][1] - a[1][0] + a[1][1];
    if den_p != 0.0 && den_q != 0.0 {
        let p = (b[1][1] - b[1][0]) / den_p;
        let q = (a[1][1] - a[0][1]) / den_q;
        if p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0 {
            return Ok(NePrediction {
                row_action1_prob: p,
                col_action1_prob: q,
                kind: NeKind::InteriorMixed,
            });
        }
    }

    let pure_eq: Vec<(usize, usize)> = [(0, 0), (0, 1), (1, 0), (1, 1)]
        .into_iter()
        .filter(|&(i, j)| a[i][j] >= a[1 - i][j] && b[i][j] >= b[i][1 - j])
        .collect();
    if let [(i, j)] = pure_eq[..] {
        return Ok(pure(i, j, NeKind::PureUnique));
    }
    let reason = if den_p == 0.0 {
        "column indifference denominator b11 - b12 - b21 + b22 is zero".to_string()
    } else if den_q == 0.0 {
        "row indifference denominator a11 - a12 - a21 + a22 is zero".to_string()
    } else {
        format!("{} pure equilibria and no interior mixed equilibrium", pure_eq.len())
    };
    Err(EquilibriumError::Degenerate(reason))
}

/// Pearson correlation between model predictions and equilibrium
/// probabilities of action 1, game by game.
pub fn ne_alignment(predictions: &[f64], ne: &[f64]) -> Result<CorrelationResult, EquilibriumError> {
    Ok(pearson(predictions, ne)?)
}

/// Which model of a pair correlates more strongly with the equilibrium.
pub fn closer_to_ne(base_r: Option<f64>, aligned_r: Option<f64>) -> Result<Winner, EquilibriumError> {
    match (base_r, aligned_r) {
        (Some(b), Some(a)) if b > a => Ok(Winner::Base),
        (Some(b), Some(a)) if a > b => Ok(Winner::Aligned),
        (Some(_), Some(_)) => Ok(Winner::Tie),
        _ => Err(EquilibriumError::UndefinedCorrelation),
    }
}
