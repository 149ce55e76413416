//! Closed-form conditions under which reweighting preliminary components
//! improves the total and the individual components, each paired with a
//! brute-force check.

pub mod constrained;
pub mod error;
pub mod interval;
pub mod montecarlo;
pub mod suite;
pub mod two;

pub use constrained::{constrained_optimal_weights, reachable_span, sample_optimal_weights};
pub use error::{Result, TheoryError};
pub use interval::{improvement_interval, lemma_predicate, ImprovementSet};
pub use montecarlo::{conjecture_monte_carlo, ConjectureRow, NoiseSpec};
pub use two::{
    bias_predicate_g, improves, joint_improvement_map_n2, optimal_weight_n2, sign_rule_improves, threshold_classification,
    verdict_n2, GridSpec, ImprovementVerdict, Region, RegionCell, TheoryInstance, ThresholdCase,
};
pub use suite::{run_theory_suite, Check, SuiteConfig, TheoryReport};
