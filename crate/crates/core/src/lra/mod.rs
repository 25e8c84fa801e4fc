//! Sparse low-rank tensor approximation surrogates.

mod als;
mod cv;
mod design;
mod fit;
mod lars;
mod legendre;
mod model;

pub use als::{
    als_correction_step, als_joint_refine, als_refine, als_update_step, AlsOptions, Correction, JointRefinement,
    LegendreTable, RankOneFactor, Update,
};
pub use cv::{fold_assignment, select_rank_cv, CvEntry, CvReport, FOLDS};
pub use design::{normalize_inputs, ExperimentalDesign, Metric};
pub use fit::{fit_lra, fit_lra_path, LraFit};
pub use lars::{lars_select, LarsFit};
pub use legendre::legendre_eval;
pub use model::{surrogate_sample, LraModel};
