//! Trains the audio projection head on the toy tone/image pairs and shows
//! how well each tone retrieves its own image before and after.
//!
//! ```text
//! cargo run --release --example contrastive_pretraining -- 100
//! ```

use avstyle::embedding::{
    cosine_similarity, pretrain_audio_encoder, AudioEncoder, ContrastiveConfig, ImageEncoder,
    ReferenceAudioEncoder, ReferenceImageEncoder,
};
use avstyle::toy::paired_dataset;

fn retrieval(audio: &ReferenceAudioEncoder, image: &ReferenceImageEncoder, data: &[avstyle::embedding::PairedExample]) -> avstyle::Result<usize> {
    let za: Vec<_> = data.iter().map(|ex| audio.encode(&ex.mel)).collect::<avstyle::Result<_>>()?;
    let zv: Vec<_> = data.iter().map(|ex| image.encode(&ex.image)).collect();
    Ok((0..data.len())
        .filter(|&i| {
            let best = (0..data.len())
                .max_by(|&a, &b| cosine_similarity(&za[i], &zv[a]).total_cmp(&cosine_similarity(&za[i], &zv[b])))
                .unwrap_or(0);
            best == i
        })
        .count())
}

fn main() -> avstyle::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let data = paired_dataset(8, 8, 0)?;
    let audio = ReferenceAudioEncoder::new(7);
    let image = ReferenceImageEncoder::new(7);
    println!("top-1 audio->image before: {}/{}", retrieval(&audio, &image, &data)?, data.len());

    let cfg = ContrastiveConfig { epochs, ..ContrastiveConfig::default() };
    let out = pretrain_audio_encoder(&data, &audio, &image, &cfg)?;
    for (e, l) in out.epoch_losses.iter().enumerate().step_by((epochs / 10).max(1)) {
        println!("epoch {e:4}  InfoNCE {l:.4}");
    }
    let trained = ReferenceAudioEncoder::new(7).with_head(out.head)?;
    println!("top-1 audio->image after:  {}/{}", retrieval(&trained, &image, &data)?, data.len());
    Ok(())
}
