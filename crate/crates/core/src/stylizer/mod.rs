//! Audio-guided stylization of the masked region: patch sampling, the
//! directional patch loss, texture and content regularizers and the
//! optimization loop over the implicit representation.

mod features;
mod patchclip;
mod patches;
mod run;

pub use features::{
    content_loss, feature_mse, foreground_reg_loss, gram_backward, gram_matrix, FeatureExtractor, FeatureMap,
    IdentityExtractor, ReferenceExtractor,
};
pub use patchclip::{hardest, ohem_count, patchclip_loss, PatchClipOutput, MIN_DIRECTION_NORM};
pub use patches::{
    augment_patch, crop_patches, sample_patch_centers, Augmentation, CropWindow, PatchPlan, PatchSet, MIN_SUBCROP_AREA,
    PATCH_RES,
};
pub use run::{
    stylize, total_loss, write_loss_csv, Evaluation, InrConfig, IterationRecord, LossComponents, LossWeights,
    StyleConfig, StyleModel, StyleProblem, StyleResult,
};
