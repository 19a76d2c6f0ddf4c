//! ABCD stratification of product portfolios.
//!
//! Items are ranked by value and labelled A through D from their cumulative
//! value share. Later passes revisit slices of a hierarchy (brand, category,
//! region, ...) and promote items where the slice's A coverage falls short,
//! then the remainder is re-banded into B, C and D.

pub mod classifier;
pub mod concentration;
pub mod error;
pub mod io;
pub mod model;
pub mod money;
pub mod productivity;
pub mod segmentation;

pub use classifier::{
    classify, classify_at_precision, cumulative_shares, remainder_bands, renormalize_thresholds,
    ClassAssignment, CumulativeShares, RemainderBands, StageTwoThresholds, SHARE_TOLERANCE,
};
pub use concentration::{
    effective_t_a, hhi, hhi_bounds, hhi_report, simulate_threshold_impact, ConcentrationIndex,
    ConcentrationReport, ConcentrationRow, HPolicy, HStep, ImpactRow, PolicyMode, H_MAX,
};
pub use error::{Error, Result};
pub use model::{
    build_snapshot, ClassLabel, Item, ItemRef, PortfolioSnapshot, Scope, SliceKey, SnapshotBuilder,
    Thresholds,
};
pub use money::{Money, MoneyParseError};
pub use productivity::{
    blend_curve, curve_from_values, optimal_blend_point, productivity_curve, solve_t_a, BlendCurve,
    BlendOptimum, BlendSpec, ProductivityCurve, TaSolution,
};
pub use segmentation::{
    a_coverage, is_underrepresented, run_pass, stratify, ASet, PassSpec, RenormalizeMode,
    StratificationResult, StratifyConfig,
};
