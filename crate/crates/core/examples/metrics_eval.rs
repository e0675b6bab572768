//! Scores a directory of `<stem>.pred.png` / `<stem>.gt.png` masks and
//! prints the JSON report. Without an argument it scores a generated set
//! of shifted quadrant predictions.
//!
//! ```text
//! cargo run --release --example metrics_eval -- path/to/eval_dir
//! ```

use avstyle::metrics::{evaluate_dir, EvalConfig};
use avstyle::toy::quadrant_mask;
use avstyle::localizer::ProbabilityMask;

fn main() -> avstyle::Result<()> {
    let tmp;
    let dir = match std::env::args().nth(1) {
        Some(d) => d.into(),
        None => {
            tmp = std::env::temp_dir().join("avstyle-metrics-eval");
            std::fs::create_dir_all(&tmp).map_err(|e| avstyle::Error::io(&tmp, e))?;
            for i in 0..8 {
                let gt = quadrant_mask(32, i % 4);
                let shift = i / 2;
                let pred = ProbabilityMask::new(
                    32,
                    32,
                    (0..32 * 32usize)
                        .map(|p| {
                            let (y, x) = (p / 32, p % 32);
                            let inside = gt.values()[y * 32 + x.saturating_sub(shift * 3)];
                            if inside { 0.9 } else { 0.1 }
                        })
                        .collect(),
                )?;
                gt.save_png(tmp.join(format!("s{i}.gt.png")))?;
                pred.save_png(tmp.join(format!("s{i}.pred.png")))?;
            }
            tmp.clone()
        }
    };
    let report = evaluate_dir(&dir, &EvalConfig::default())?;
    for (i, s) in report.per_sample.iter().enumerate() {
        println!("sample {i}: IoU {s:.3}");
    }
    println!("{}", report.to_json());
    Ok(())
}
