//! The `avstyle` command line: argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::CliConfig;
use crate::embedding::{
    pretrain_audio_encoder, AudioEncoder, AudioHead, Embedding, PairedExample, ReferenceAudioEncoder,
    ReferenceImageEncoder,
};
use crate::error::{Error, Result};
use crate::localizer::{
    predict_mask, train_localizer, BinaryMask, DecoderParams, LocalizerExample, ProbabilityMask,
};
use crate::metrics::evaluate_dir;
use crate::params_io::ParamFile;
use crate::signal_io::{load_image, load_wav, mel_spectrogram_with, save_image, ImageBuffer, MelSpectrogram};
use crate::stylizer::{stylize, write_loss_csv, ReferenceExtractor};
use crate::{selftest, toy};

#[derive(Debug, Parser)]
#[command(name = "avstyle", version, about = "Audio-guided localization and stylization of images")]
pub struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the `seed` config key.
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Contrastively train the audio encoder head on paired clips.
    Pretrain(PretrainArgs),
    /// Train the mask decoder on (image, audio, mask) triplets.
    TrainLocalizer(TrainLocalizerArgs),
    /// Predict a sound-source mask for an image and an audio clip.
    Localize(LocalizeArgs),
    /// Restyle the sounding region of an image after a style audio clip.
    Stylize(StylizeArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Run the finite-difference and closed-form checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Directory of `<stem>.wav` / `<stem>.png` pairs; built-in toy pairs if absent.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Overrides `pretrain.epochs`.
    #[arg(long, value_name = "INT")]
    pub iterations: Option<usize>,
    /// Output parameter file for the audio head.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainLocalizerArgs {
    /// Directory of `<stem>.png`, `<stem>.wav` and `<stem>.mask.png`; built-in toy task if absent.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Trained audio head from `pretrain`.
    #[arg(long, value_name = "PATH")]
    pub head: Option<PathBuf>,
    /// Overrides `localizer.epochs`.
    #[arg(long, value_name = "INT")]
    pub iterations: Option<usize>,
    /// Output parameter file for the decoder.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[arg(long, value_name = "PATH")]
    pub image: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub audio: PathBuf,
    /// Decoder parameters from `train-localizer`.
    #[arg(long, value_name = "PATH")]
    pub decoder: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub head: Option<PathBuf>,
    /// Output grayscale mask PNG.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StylizeArgs {
    #[arg(long, value_name = "PATH")]
    pub image: PathBuf,
    /// Grayscale mask PNG; otherwise the mask is predicted from `--audio`.
    #[arg(long, value_name = "PATH", conflicts_with = "audio")]
    pub mask: Option<PathBuf>,
    /// Audio to localize (requires `--decoder`).
    #[arg(long, value_name = "PATH", requires = "decoder")]
    pub audio: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub decoder: Option<PathBuf>,
    /// Audio whose embedding sets the style direction.
    #[arg(long, value_name = "PATH")]
    pub style_audio: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub head: Option<PathBuf>,
    /// Overrides `style.iterations`.
    #[arg(long, value_name = "INT")]
    pub iterations: Option<usize>,
    /// Render the result at this size instead of the source size.
    #[arg(long, value_name = "HxW", value_parser = parse_resolution)]
    pub resolution: Option<(usize, usize)>,
    /// Output PNG.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Loss CSV; defaults to the output path with a `.csv` extension.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of `<stem>.pred.png` / `<stem>.gt.png` pairs.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Output JSON report.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Finite-difference probes per gradient check.
    #[arg(long, default_value_t = 24)]
    pub probes: usize,
    /// Also write the report here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Parses `HxW`, e.g. `256x384`.
pub fn parse_resolution(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got `{s}`"))?;
    let dim = |v: &str| match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("bad dimension `{v}` in `{s}`")),
    };
    Ok((dim(h)?, dim(w)?))
}

/// Parses `args` and runs the chosen subcommand. Returns the process exit
/// status; diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Pretrain(a) => pretrain(&cfg, a),
        Command::TrainLocalizer(a) => train(&cfg, a),
        Command::Localize(a) => localize(&cfg, a),
        Command::Stylize(a) => run_stylize(&cfg, a),
        Command::Eval(a) => eval(&cfg, a),
        Command::Selftest(a) => run_selftest(&cfg, a),
    }
}

fn mel(cfg: &CliConfig, path: &Path) -> Result<MelSpectrogram> {
    mel_spectrogram_with(&load_wav(path)?, &cfg.mel)
}

fn audio_encoder(cfg: &CliConfig, head: Option<&Path>) -> Result<ReferenceAudioEncoder> {
    let enc = ReferenceAudioEncoder::new(cfg.backend_seed);
    match head {
        Some(p) => enc.with_head(AudioHead::from_param_file(&ParamFile::load(p)?)?),
        None => Ok(enc),
    }
}

/// Sorted stems of files in `dir` ending in `suffix`.
fn stems(dir: &Path, suffix: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let name = entry.map_err(|e| Error::io(dir, e))?.file_name();
        if let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(suffix)) {
            out.push(stem.to_string());
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

fn pretrain(cfg: &CliConfig, a: PretrainArgs) -> Result<()> {
    let data: Vec<PairedExample> = match &a.data {
        Some(dir) => stems(dir, ".wav")?
            .into_iter()
            .map(|s| {
                Ok(PairedExample {
                    mel: mel(cfg, &dir.join(format!("{s}.wav")))?,
                    image: load_image(dir.join(format!("{s}.png")))?,
                })
            })
            .collect::<Result<_>>()?,
        None => toy::paired_dataset(cfg.toy_samples, 8, cfg.seed)?,
    };
    let mut pcfg = cfg.pretrain.clone();
    pcfg.seed = cfg.seed;
    if let Some(n) = a.iterations {
        pcfg.epochs = n;
    }
    let audio = ReferenceAudioEncoder::new(cfg.backend_seed);
    let image = ReferenceImageEncoder::new(cfg.backend_seed);
    let out = pretrain_audio_encoder(&data, &audio, &image, &pcfg)?;
    if let (Some(first), Some(last)) = (out.epoch_losses.first(), out.epoch_losses.last()) {
        eprintln!("pretrain: {} pairs, loss {first:.4} -> {last:.4}", data.len());
    }
    out.head.to_param_file().save(&a.out)
}

fn train(cfg: &CliConfig, a: TrainLocalizerArgs) -> Result<()> {
    let encoder = audio_encoder(cfg, a.head.as_deref())?;
    let data: Vec<LocalizerExample> = match &a.data {
        Some(dir) => stems(dir, ".mask.png")?
            .into_iter()
            .map(|s| {
                Ok(LocalizerExample {
                    image: load_image(dir.join(format!("{s}.png")))?,
                    cond: encoder.encode(&mel(cfg, &dir.join(format!("{s}.wav")))?)?,
                    target: BinaryMask::load_png(dir.join(format!("{s}.mask.png")))?,
                })
            })
            .collect::<Result<_>>()?,
        None => toy::quadrant_dataset(
            cfg.toy_samples,
            cfg.toy_size,
            &toy::tone_conditions(&encoder)?,
            cfg.localizer.threshold,
            cfg.seed,
        )?,
    };
    let mut lcfg = cfg.localizer.clone();
    lcfg.seed = cfg.seed;
    if let Some(n) = a.iterations {
        lcfg.epochs = n;
    }
    let mut shape = cfg.decoder;
    shape.embed_dim = encoder.dim();
    let out = train_localizer(&data, shape, &lcfg)?;
    if let (Some(first), Some(last)) = (out.epoch_losses.first(), out.epoch_losses.last()) {
        eprintln!("train-localizer: {} examples, loss {first:.4} -> {last:.4}", data.len());
    }
    out.params.to_param_file().save(&a.out)
}

fn predict(cfg: &CliConfig, image: &ImageBuffer, audio: &Path, decoder: &Path, head: Option<&Path>) -> Result<ProbabilityMask> {
    let z = audio_encoder(cfg, head)?.encode(&mel(cfg, audio)?)?;
    let params = DecoderParams::from_param_file(&ParamFile::load(decoder)?)?;
    predict_mask(image, &z, &params)
}

fn localize(cfg: &CliConfig, a: LocalizeArgs) -> Result<()> {
    let image = load_image(&a.image)?;
    predict(cfg, &image, &a.audio, &a.decoder, a.head.as_deref())?.save_png(&a.out)
}

fn run_stylize(cfg: &CliConfig, a: StylizeArgs) -> Result<()> {
    let source = load_image(&a.image)?;
    let mask = match (&a.mask, &a.audio, &a.decoder) {
        (Some(m), _, _) => ProbabilityMask::load_png(m)?,
        (None, Some(audio), Some(dec)) => predict(cfg, &source, audio, dec, a.head.as_deref())?,
        _ => {
            return Err(Error::InvalidArgument(
                "stylize needs --mask or both --audio and --decoder".into(),
            ))
        }
    };
    if mask.shape() != source.shape() {
        return Err(Error::shape(format!("mask {:?}", source.shape()), format!("{:?}", mask.shape())));
    }
    let target: Embedding = audio_encoder(cfg, a.head.as_deref())?.encode(&mel(cfg, &a.style_audio)?)?;
    let mut scfg = cfg.style;
    scfg.seed = cfg.seed;
    if let Some(n) = a.iterations {
        scfg.iterations = n;
    }
    if !mask.values().iter().any(|&m| m > scfg.center_threshold) && mask.values().iter().any(|&m| m > 0.0) {
        eprintln!(
            "stylize: no mask value exceeds {}; the patch loss is skipped",
            scfg.center_threshold
        );
    }
    let encoder = ReferenceImageEncoder::new(cfg.backend_seed);
    let extractor = ReferenceExtractor::new(cfg.backend_seed);
    let result = stylize(&source, &mask, &target, &scfg, &cfg.weights, &encoder, &extractor)?;
    let image = match a.resolution {
        Some((h, w)) if (h, w) != source.shape() => result.model.render(&source, &mask, h, w)?,
        _ => result.image,
    };
    save_image(&image, &a.out)?;
    let trace_path = a.trace.unwrap_or_else(|| a.out.with_extension("csv"));
    let file = std::fs::File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
    write_loss_csv(&result.trace, std::io::BufWriter::new(file)).map_err(|e| Error::io(&trace_path, e))
}

fn eval(cfg: &CliConfig, a: EvalArgs) -> Result<()> {
    let report = evaluate_dir(&a.data, &cfg.eval)?;
    std::fs::write(&a.out, report.to_json() + "\n").map_err(|e| Error::io(&a.out, e))
}

fn run_selftest(cfg: &CliConfig, a: SelftestArgs) -> Result<()> {
    let mut reports = selftest::oracle_suite(cfg.seed)?;
    reports.extend(selftest::gradient_suite(a.probes, cfg.seed)?);
    let text: String = reports.iter().map(|r| format!("{r}\n")).collect();
    print!("{text}");
    if let Some(p) = &a.out {
        std::fs::write(p, &text).map_err(|e| Error::io(p, e))?;
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(Error::SelfTestFailed {
            failed,
            total: reports.len(),
        });
    }
    Ok(())
}
