use serde::{Deserialize, Serialize};

use super::homology::HomologyResult;
use crate::geometry::manifold::ManifoldModel;

/// Betti number of the loop space reference restricted to the path
/// components the cap reaches: Ω(S¹) and Ω(T²) have contractible
/// components, Ω(S²) has one ℤ in every degree.
pub fn reference_betti(model: ManifoldModel, degree: i64, components: usize) -> usize {
    match model {
        ManifoldModel::Circle | ManifoldModel::Torus2 => {
            if degree == 0 {
                components
            } else {
                0
            }
        }
        ManifoldModel::Sphere2 => usize::from(degree >= 0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub degree: i64,
    pub betti: usize,
    pub expected: usize,
    pub torsion: Vec<String>,
    /// c_k ≥ b_k.
    pub morse_inequality: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub manifold: ManifoldModel,
    pub window: Option<i64>,
    pub rows: Vec<ComparisonRow>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn compare_reference(result: &HomologyResult, model: ManifoldModel) -> ComparisonReport {
    let rows: Vec<ComparisonRow> = result
        .window_degrees()
        .map(|d| {
            let expected = reference_betti(model, d.degree, result.components);
            let morse_inequality = d.rank >= d.betti;
            ComparisonRow {
                degree: d.degree,
                betti: d.betti,
                expected,
                torsion: d.torsion.clone(),
                morse_inequality,
                pass: d.betti == expected && d.torsion.is_empty() && morse_inequality,
            }
        })
        .collect();
    let note = if result.window.is_none() {
        Some("window empty".to_string())
    } else if result.unstable_pairs > 0 {
        Some(format!("{} orbit counts unstable, instance rejected", result.unstable_pairs))
    } else {
        None
    };
    ComparisonReport {
        manifold: model,
        window: result.window,
        pass: rows.iter().all(|r| r.pass) && result.unstable_pairs == 0,
        rows,
        note,
    }
}
