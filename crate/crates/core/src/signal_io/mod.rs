//! Audio and image loading, preprocessing and resampling.

mod audio;
mod image;
pub mod resample;

pub use audio::{
    load_wav, mel_filterbank, mel_spectrogram, mel_spectrogram_with, save_wav, spec_augment,
    AugmentSpec, MelConfig, MelSpectrogram, Waveform, TARGET_SAMPLE_RATE,
};
pub use image::{
    load_gray_png, load_image, quantize, resize_image, save_gray_png, save_image, ImageBuffer,
};
