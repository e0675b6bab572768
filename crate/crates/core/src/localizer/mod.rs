//! Weakly-supervised sound-source localization.

mod decoder;
mod masks;
mod train;

pub use decoder::{decoder_forward, predict_mask, DecoderCache, DecoderParams, DecoderShape, ImageFeatures};
pub use masks::{bce_loss, pseudo_mask, sigmoid, BinaryMask, LogitMap, ProbabilityMask, BCE_EPS};
pub use train::{train_from, train_localizer, LocalizerExample, LocalizerTrainConfig, TrainedLocalizer};
