//! Trains the mask decoder on the quadrant toy task, where each sample
//! asks for the quadrant holding one color, and reports held-out IoU.
//!
//! ```text
//! cargo run --release --example localizer_training -- mask.png
//! ```

use avstyle::localizer::{predict_mask, train_localizer, DecoderShape, LocalizerTrainConfig};
use avstyle::metrics::ciou_sample;
use avstyle::toy::{quadrant_conditions, quadrant_dataset};

fn main() -> avstyle::Result<()> {
    let conds = quadrant_conditions(512, 11);
    let train = quadrant_dataset(32, 64, &conds, 0.5, 12)?;
    let test = quadrant_dataset(16, 64, &conds, 0.5, 13)?;
    let cfg = LocalizerTrainConfig { epochs: 300, batch_size: 32, seed: 14, ..LocalizerTrainConfig::default() };
    let trained = train_localizer(&train, DecoderShape::default(), &cfg)?;
    for (e, l) in trained.epoch_losses.iter().enumerate().step_by(30) {
        println!("step {e:3}  BCE {l:.4}");
    }

    let mut ious = Vec::with_capacity(test.len());
    for ex in &test {
        ious.push(ciou_sample(&predict_mask(&ex.image, &ex.cond, &trained.params)?, &ex.target, 0.5)?);
    }
    println!("held-out mean IoU {:.4} over {} samples", ious.iter().sum::<f64>() / ious.len() as f64, ious.len());

    if let Some(path) = std::env::args().nth(1) {
        predict_mask(&test[0].image, &test[0].cond, &trained.params)?.save_png(&path)?;
        println!("wrote the first held-out prediction to {path}");
    }
    Ok(())
}
