//! Focused false discovery rate control over directed acyclic graphs of
//! hypotheses.

pub mod checks;
pub mod combine;
pub mod dag;
pub mod error;
pub mod filters;
pub mod procedures;
pub mod simulation;
pub mod weights;

pub use combine::{combine, smooth_all_descendants, Combiner, PValues};
pub use dag::{Dag, DepthIndex, GroupIndex, Hierarchy, NodeSet};
pub use error::{Error, Result};
pub use filters::{apply_filter, is_monotonic, FilterSpec, Monotonicity};
pub use procedures::{
    bh, fbh, run_method, storey_bh, weighted_reshaped_fbh, wfbh, yekutieli_tree, Method,
    MethodParams, Outcome, ProcedureResult, Reshaping,
};
pub use weights::{dag_weights, DwMode, WeightConfig, WeightVector};
