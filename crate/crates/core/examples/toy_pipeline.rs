//! Writes the toy assets and runs every subcommand on them through the
//! command-line entry point: pretrain, train-localizer, localize, stylize
//! with the predicted mask, eval and selftest.
//!
//! ```text
//! cargo run --release --example toy_pipeline -- /tmp/avstyle-toy
//! ```

use std::path::PathBuf;

use avstyle::cli::main_with_args;
use avstyle::toy::write_assets;

fn run(args: &[&str]) {
    println!("$ avstyle {}", args.join(" "));
    let status = main_with_args(std::iter::once("avstyle").chain(args.iter().copied()));
    assert_eq!(status, 0, "subcommand failed");
}

fn main() -> avstyle::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/toy-pipeline".into()));
    let assets = write_assets(&root, 64, 0)?;
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();
    let s = |path: &PathBuf| path.to_string_lossy().into_owned();

    std::fs::write(
        root.join("small.conf"),
        "# a quick stylization setting\nstyle.k = 16\nstyle.size_min = 16\nstyle.size_max = 32\n\
         inr.fourier_m = 64\ninr.layers = 4\ninr.width = 64\n",
    )
    .map_err(|e| avstyle::Error::io(root.join("small.conf"), e))?;

    run(&["pretrain", "--seed", "1", "--data", &s(&assets.pairs), "--iterations", "50", "--out", &p("head.params")]);
    run(&["train-localizer", "--seed", "1", "--head", &p("head.params"), "--iterations", "100", "--out", &p("decoder.params")]);
    run(&[
        "localize", "--image", &s(&assets.scene), "--audio", &s(&assets.query),
        "--head", &p("head.params"), "--decoder", &p("decoder.params"), "--out", &p("scene.mask.png"),
    ]);
    run(&[
        "stylize", "--config", &p("small.conf"), "--seed", "1", "--image", &s(&assets.scene),
        "--mask", &p("scene.mask.png"), "--style-audio", &s(&assets.style), "--head", &p("head.params"),
        "--iterations", "100", "--resolution", "128x128", "--out", &p("scene.styled.png"),
    ]);
    run(&["eval", "--data", &s(&assets.eval), "--out", &p("report.json")]);
    println!("{}", std::fs::read_to_string(root.join("report.json")).unwrap_or_default());
    run(&["selftest", "--probes", "20"]);
    println!("outputs in {}", root.display());
    Ok(())
}
