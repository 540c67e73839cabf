//! Evaluation metrics for generated images: bilinear degradation,
//! SSIM/MS-SSIM diversity, collapse tracking, classifier discriminability,
//! Inception score, nearest-neighbour probes and the joint
//! diversity/accuracy report, plus their CSV forms.

mod collapse;
mod csv;
mod curve;
mod diversity;
mod inception;
mod joint;
mod nearest;
mod resize;
mod ssim;

pub use collapse::{collapse_trajectory, detect_collapse, ClassSampler, CollapseTrajectory, COLLAPSE_RISE};
pub use csv::{
    curve_csv, diversity_csv, iscore_csv, joint_csv, nn_csv, trajectory_csv, SCHEMA_VERSION,
};
pub use curve::{discriminability_curve, CurvePoint, DiscriminabilityCurve};
pub use diversity::{
    intra_class_diversity, mean_pairwise_ms_ssim, sample_pairs, ClassDiversity, DiversityReport,
    DIVERSITY_CEILING,
};
pub use inception::{inception_score, InceptionScoreReport, IS_PROB_FLOOR};
pub use joint::{diversity_vs_discriminability, pearson, JointReport, JointRow, LOW_ACCURACY};
pub use nearest::nearest_neighbor_l1;
pub use resize::{bilinear_resize, reduce_then_restore, resize_batch};
pub use ssim::{ms_ssim, ms_ssim_depth, ssim, to_luma, Luma, SsimParams, MS_SSIM_WEIGHTS};
