//! Discrete Morse complexes: orbit counting between index-adjacent rest
//! points, boundary assembly, homology and the loop-space reference.

pub mod chain;
pub mod homology;
pub mod invariance;
pub mod orbits;
pub mod reference;
pub mod run;
pub mod snf;
pub mod system;

pub use chain::{
    assemble_boundary, build_complex, build_path_complex, census, path_critical_points, BoundaryMatrix, Coefficients,
    Generator, MorseComplexData,
};
pub use homology::{compute_homology, validity_window, DegreeHomology, HomologyResult};
pub use invariance::{check_closeness, continuation_map, perturbation_invariance, ContinuationEntry, InvarianceReport};
pub use orbits::{find_flow_lines, Orbit, OrbitSearch, PairCensus};
pub use reference::{compare_reference, reference_betti, ComparisonReport, ComparisonRow};
pub use run::{run_complex, ComplexRun, ComplexSettings};
pub use snf::{matmul, rank_int, rank_mod2, smith_invariants, to_big, torsion};
pub use system::{Chart, CriticalPoint, MorseSystem, Synthetic};
