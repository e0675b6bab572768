//! Restyles the masked square of the toy scene toward the direction of a
//! striped orange style image, printing the loss trace and writing the
//! source, the result and the trace.
//!
//! ```text
//! cargo run --release --example stylization -- target/stylization
//! ```

use std::path::PathBuf;

use avstyle::embedding::ReferenceImageEncoder;
use avstyle::signal_io::save_image;
use avstyle::stylizer::{stylize, write_loss_csv, InrConfig, LossWeights, ReferenceExtractor, StyleConfig};
use avstyle::toy::{style_direction, style_instance};
use avstyle::Error;

fn main() -> avstyle::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/stylization".into()));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let inst = style_instance(64, 3);
    let encoder = ReferenceImageEncoder::new(3);
    let target = style_direction(&encoder, &inst);
    let cfg = StyleConfig {
        k: 16,
        size_range: (8, 16),
        seed: 3,
        inr: InrConfig { fourier_m: 64, layers: 4, width: 64, ..InrConfig::default() },
        ..StyleConfig::default()
    };
    let result = stylize(
        &inst.source,
        &inst.mask.to_probability(),
        &target,
        &cfg,
        &LossWeights::default(),
        &encoder,
        &ReferenceExtractor::new(3),
    )?;
    for r in result.trace.iter().step_by(20) {
        println!(
            "iter {:3}  clip {:.4}  reg {:.4}  content {:.4}  total {:.3}  cos {:.3}",
            r.iter,
            r.components.l_clip,
            r.components.l_reg,
            r.components.l_c,
            r.total,
            r.mean_cosine.unwrap_or(f64::NAN)
        );
    }

    save_image(&inst.source, dir.join("source.png"))?;
    save_image(&inst.style, dir.join("style.png"))?;
    save_image(&result.image, dir.join("styled.png"))?;
    save_image(&result.model.render(&inst.source, &inst.mask.to_probability(), 128, 128)?, dir.join("styled_128.png"))?;
    let csv = dir.join("loss.csv");
    let file = std::fs::File::create(&csv).map_err(|e| Error::io(&csv, e))?;
    write_loss_csv(&result.trace, file).map_err(|e| Error::io(&csv, e))?;
    println!("outputs in {}", dir.display());
    Ok(())
}
