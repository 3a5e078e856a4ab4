//! Pair-level exclusion filters and threshold sensitivity grids.
//!
//! Both thresholds are satisfied at equality. An undefined correlation is
//! below every threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::game_model::GameFamily;
use crate::report::TextTable;
use crate::stats::{sign_test, Direction};

pub const DEFAULT_MASS_LEVELS: [Option<f64>; 6] =
    [None, Some(0.5), Some(0.6), Some(0.7), Some(0.8), Some(0.9)];
pub const DEFAULT_CORR_LEVELS: [Option<f64>; 6] =
    [None, Some(0.1), Some(0.2), Some(0.3), Some(0.4), Some(0.5)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub mass_threshold: f64,
    pub min_corr_threshold: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            mass_threshold: 0.8,
            min_corr_threshold: 0.3,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.mass_threshold) {
            return Err(format!("mass_threshold {} is outside [0, 1]", self.mass_threshold));
        }
        if !(-1.0..=1.0).contains(&self.min_corr_threshold) {
            return Err(format!(
                "min_corr_threshold {} is outside [-1, 1]",
                self.min_corr_threshold
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub pair_id: u32,
    pub family: GameFamily,
    pub mass_pass: bool,
    pub corr_pass: bool,
    pub included: bool,
}

/// Passes iff both models put at least `threshold` average mass on the
/// decision labels. `None` disables the check.
pub fn mass_pass_at(base_mass: f64, aligned_mass: f64, threshold: Option<f64>) -> bool {
    match threshold {
        Some(t) => base_mass.min(aligned_mass) >= t,
        None => true,
    }
}

/// Passes unless both correlations fall below `threshold`. With `None`,
/// passes iff at least one correlation is defined.
pub fn corr_pass_at(base_r: Option<f64>, aligned_r: Option<f64>, threshold: Option<f64>) -> bool {
    let best = match (base_r, aligned_r) {
        (None, None) => return false,
        (b, a) => b.unwrap_or(f64::NEG_INFINITY).max(a.unwrap_or(f64::NEG_INFINITY)),
    };
    match threshold {
        Some(t) => best >= t,
        None => true,
    }
}

pub fn mass_filter(base_mass: f64, aligned_mass: f64, cfg: &FilterConfig) -> bool {
    mass_pass_at(base_mass, aligned_mass, Some(cfg.mass_threshold))
}

pub fn min_corr_filter(base_r: Option<f64>, aligned_r: Option<f64>, cfg: &FilterConfig) -> bool {
    corr_pass_at(base_r, aligned_r, Some(cfg.min_corr_threshold))
}

/// The per-pair numbers the filters and win count depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStat {
    pub pair_id: u32,
    pub family: GameFamily,
    pub base_mass: f64,
    pub aligned_mass: f64,
    pub base_r: Option<f64>,
    pub aligned_r: Option<f64>,
}

impl PairStat {
    pub fn outcome(&self, cfg: &FilterConfig) -> FilterOutcome {
        let mass_pass = mass_filter(self.base_mass, self.aligned_mass, cfg);
        let corr_pass = min_corr_filter(self.base_r, self.aligned_r, cfg);
        FilterOutcome {
            pair_id: self.pair_id,
            family: self.family,
            mass_pass,
            corr_pass,
            included: mass_pass && corr_pass,
        }
    }

    pub fn included_at(&self, mass: Option<f64>, corr: Option<f64>) -> bool {
        mass_pass_at(self.base_mass, self.aligned_mass, mass)
            && corr_pass_at(self.base_r, self.aligned_r, corr)
    }
}

/// Win/tie/undecided tallies for a set of included pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinCount {
    pub base: u64,
    pub aligned: u64,
    pub ties: u64,
}

impl WinCount {
    /// Pairs with a winner; ties are excluded from every test.
    pub fn decided(&self) -> u64 {
        self.base + self.aligned
    }
}

/// Compares correlations, an undefined side losing to a defined one.
pub fn pair_winner(base_r: Option<f64>, aligned_r: Option<f64>) -> Option<Direction> {
    let b = base_r.unwrap_or(f64::NEG_INFINITY);
    let a = aligned_r.unwrap_or(f64::NEG_INFINITY);
    if base_r.is_none() && aligned_r.is_none() {
        None
    } else if b > a {
        Some(Direction::First)
    } else if a > b {
        Some(Direction::Second)
    } else {
        Some(Direction::Tie)
    }
}

pub fn count_wins<'a>(pairs: impl IntoIterator<Item = &'a PairStat>) -> WinCount {
    let mut c = WinCount::default();
    for p in pairs {
        match pair_winner(p.base_r, p.aligned_r) {
            Some(Direction::First) => c.base += 1,
            Some(Direction::Second) => c.aligned += 1,
            Some(Direction::Tie) => c.ties += 1,
            None => {}
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub mass_level: Option<f64>,
    pub corr_level: Option<f64>,
    pub wins_base: u64,
    pub wins_aligned: u64,
    pub ties: u64,
    /// One-sided binomial p in the direction of the majority; `None` when
    /// no pair is decided.
    pub p_value: Option<f64>,
    pub direction: Option<Direction>,
}

impl GridCell {
    pub fn total(&self) -> u64 {
        self.wins_base + self.wins_aligned
    }
}

/// Rows are mass levels, columns correlation levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityGrid {
    pub family: GameFamily,
    pub mass_levels: Vec<Option<f64>>,
    pub corr_levels: Vec<Option<f64>>,
    pub cells: Vec<Vec<GridCell>>,
}

fn cell(pairs: &[&PairStat], mass: Option<f64>, corr: Option<f64>) -> GridCell {
    let c = count_wins(pairs.iter().copied().filter(|p| p.included_at(mass, corr)));
    let (p_value, direction) = if c.decided() == 0 {
        (None, None)
    } else {
        let t = sign_test(c.base, c.aligned);
        (Some(t.p_value), Some(t.direction))
    };
    GridCell {
        mass_level: mass,
        corr_level: corr,
        wins_base: c.base,
        wins_aligned: c.aligned,
        ties: c.ties,
        p_value,
        direction,
    }
}

/// Re-applies both filters at every (mass, corr) level pair for one family.
pub fn sensitivity_grid(
    pairs: &[PairStat],
    family: GameFamily,
    mass_levels: &[Option<f64>],
    corr_levels: &[Option<f64>],
) -> SensitivityGrid {
    let fam: Vec<&PairStat> = pairs.iter().filter(|p| p.family == family).collect();
    let cells = mass_levels
        .par_iter()
        .map(|&m| corr_levels.iter().map(|&c| cell(&fam, m, c)).collect())
        .collect();
    SensitivityGrid {
        family,
        mass_levels: mass_levels.to_vec(),
        corr_levels: corr_levels.to_vec(),
        cells,
    }
}

fn level(l: Option<f64>) -> String {
    l.map_or_else(|| "none".to_string(), |v| format!("{v}"))
}

/// Compact p-value: two significant figures.
pub fn format_p(p: f64) -> String {
    if p >= 0.01 {
        format!("{p:.2}")
    } else {
        format!("{p:.1e}")
    }
}

impl SensitivityGrid {
    pub fn cell_at(&self, mass: Option<f64>, corr: Option<f64>) -> Option<&GridCell> {
        let i = self.mass_levels.iter().position(|l| *l == mass)?;
        let j = self.corr_levels.iter().position(|l| *l == corr)?;
        Some(&self.cells[i][j])
    }

    pub fn to_text(&self) -> String {
        let mut header = vec![format!("{} mass \\ corr", self.family)];
        header.extend(self.corr_levels.iter().map(|l| level(*l)));
        let mut t = TextTable::new(header);
        for (i, row) in self.cells.iter().enumerate() {
            let mut line = vec![level(self.mass_levels[i])];
            line.extend(row.iter().map(|c| match c.p_value {
                Some(p) => format!("{}:{} ({})", c.wins_base, c.wins_aligned, format_p(p)),
                None => "0:0".to_string(),
            }));
            t.push(line);
        }
        t.render()
    }
}
