use serde::{Deserialize, Serialize};

use super::chain::{Coefficients, Generator, MorseComplexData};
use super::snf::{rank_mod2, smith_invariants, to_big, torsion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeHomology {
    pub degree: i64,
    /// Number of generators c_k.
    pub rank: usize,
    pub betti: usize,
    /// Torsion coefficients of H_k as decimal strings (integer mode only).
    pub torsion: Vec<String>,
    pub in_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomologyResult {
    pub coefficients: Coefficients,
    /// Highest degree whose homology the cap determines; None when empty.
    pub window: Option<i64>,
    pub degrees: Vec<DegreeHomology>,
    /// Pair counts that moved under seed jitter.
    pub unstable_pairs: usize,
    /// Distinct winding classes among the generators.
    pub components: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl HomologyResult {
    pub fn betti(&self, degree: i64) -> Option<usize> {
        self.degrees.iter().find(|d| d.degree == degree).map(|d| d.betti)
    }

    pub fn window_degrees(&self) -> impl Iterator<Item = &DegreeHomology> {
        self.degrees.iter().filter(|d| d.in_window)
    }
}

/// Highest degree K such that every generator of degree ≤ K + 1 sits at
/// least one observed energy gap below the cap. With only degree-0
/// generators the window is {0}.
pub fn validity_window(generators: &[Generator], cap: f64) -> Option<i64> {
    let top = generators.iter().map(|g| g.degree).max()?;
    if top == 0 {
        return Some(0);
    }
    let mut energies: Vec<f64> = generators.iter().map(|g| g.energy).collect();
    energies.sort_by(f64::total_cmp);
    let gap = energies.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).fold(f64::INFINITY, f64::min);
    let gap = if gap.is_finite() { gap } else { 0.0 };
    let mut k = top - 1;
    while k >= 0 {
        let highest =
            generators.iter().filter(|g| g.degree <= k + 1).map(|g| g.energy).fold(f64::NEG_INFINITY, f64::max);
        if highest + gap <= cap {
            return Some(k);
        }
        k -= 1;
    }
    None
}

pub fn compute_homology(complex: &MorseComplexData) -> HomologyResult {
    let window = validity_window(&complex.generators, complex.energy_cap);
    let degrees = complex.degrees();
    let rank_of = |k: i64| -> (usize, Vec<String>) {
        match complex.boundary_at(k) {
            None => (0, Vec::new()),
            Some(b) => match complex.coefficients {
                Coefficients::Integer => {
                    let inv = smith_invariants(&to_big(&b.entries));
                    (inv.len(), torsion(&inv).iter().map(|t| t.to_string()).collect())
                }
                Coefficients::Mod2 => (rank_mod2(&b.entries), Vec::new()),
            },
        }
    };
    let top = degrees.last().copied().unwrap_or(-1);
    let out = (0..=top)
        .map(|k| {
            let c = complex.rank(k);
            let (rk, _) = rank_of(k);
            let (rk1, tors) = rank_of(k + 1);
            DegreeHomology {
                degree: k,
                rank: c,
                betti: c.saturating_sub(rk + rk1),
                torsion: tors,
                in_window: window.is_some_and(|w| k <= w),
            }
        })
        .collect();
    let mut notes = Vec::new();
    if window.is_none() {
        notes.push("window empty".to_string());
    }
    if !complex.unstable_pairs.is_empty() {
        notes.push(format!("{} pair counts unstable under seed jitter", complex.unstable_pairs.len()));
    }
    let mut classes: Vec<&Option<Vec<i64>>> = complex.generators.iter().map(|g| &g.winding).collect();
    classes.sort();
    classes.dedup();
    HomologyResult {
        coefficients: complex.coefficients,
        window,
        degrees: out,
        unstable_pairs: complex.unstable_pairs.len(),
        components: classes.len(),
        notes,
    }
}
