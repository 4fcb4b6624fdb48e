//! `encmatch`: encoders, dataset construction, sample assembly and scoring
//! for the encrypted image matching challenge.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use encmatch_core::augment::{Approach, OpSet};
use encmatch_core::chaos::CatMapKey;
use encmatch_core::dataset::Split;
use encmatch_core::evalkit::TieRule;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;
pub const EXIT_SELFTEST: u8 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "encmatch",
    version,
    about = "Obfuscate images, build matching-pair datasets, and score detectors",
    after_help = "Any subcommand also accepts --config FILE with `name = value` lines; \
                  explicit flags override the file."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode one image with a subtask's encoder.
    Encode(EncodeArgs),
    /// Invert an encoding.
    Decode(DecodeArgs),
    /// Generate an encryption key file.
    Keygen(KeygenArgs),
    /// Build a pair corpus with its manifest.
    BuildDataset(BuildDatasetArgs),
    /// Render before/after augmentation grids.
    AugmentPreview(AugmentPreviewArgs),
    /// Turn a corpus into six-channel sample files.
    MakeSamples(MakeSamplesArgs),
    /// Score samples with the histogram stub, or compute accuracies.
    Score(ScoreArgs),
    /// Average model scores into a submission file.
    Ensemble(EnsembleArgs),
    /// Per-model validation accuracy and loss.
    Report(ReportArgs),
    /// Run the embedded invariant checks.
    Selftest,
}

#[derive(Debug, Args)]
struct KeyArgs {
    /// Cat-map key, e.g. `N=32,a=1,b=1,k=5` (default: the subtask's key).
    #[arg(long)]
    key: Option<CatMapKey>,
    /// Derive a separate iteration count for every tile (subtask 1).
    #[arg(long)]
    per_tile: bool,
    /// Encryption key file (subtask 3).
    #[arg(long)]
    keys: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct EncodeArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    subtask: u8,
    /// Input image; a synthetic image drawn from the seed when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path (`.png`, `.ppm`, or `.bin` for ciphertexts).
    #[arg(long)]
    output: PathBuf,
    /// Also write the geometry-normalized original here.
    #[arg(long)]
    original_out: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    key: KeyArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct DecodeArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    subtask: u8,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Seed used at encoding time; needed with --per-tile.
    #[arg(long, required_if_eq("per_tile", "true"))]
    seed: Option<u64>,
    /// Image side of a decrypted face crop.
    #[arg(long, default_value_t = 52)]
    side: u32,
    #[command(flatten)]
    key: KeyArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct KeygenArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = encmatch_core::bfv::params::DEFAULT_N)]
    n: usize,
    #[arg(long, default_value_t = encmatch_core::bfv::params::DEFAULT_Q)]
    q: u64,
    #[arg(long, default_value_t = encmatch_core::bfv::params::DEFAULT_T)]
    t: u64,
    #[arg(long, default_value_t = encmatch_core::bfv::params::DEFAULT_RELIN_BASE)]
    relin_base: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct BuildDatasetArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    subtask: u8,
    /// Dataset root; the corpus goes to `<out>/<subtask>/`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Directory of original images (sorted by name).
    #[arg(long, conflicts_with = "count")]
    originals: Option<PathBuf>,
    /// Number of synthetic originals when --originals is not given.
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = encmatch_core::dataset::DEFAULT_TRAIN_RATIO)]
    train_ratio: f64,
    /// Draw non-matching partners as a derangement instead of with replacement.
    #[arg(long)]
    derangement: bool,
    #[command(flatten)]
    key: KeyArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct AugmentArgs {
    /// Augmentation settings file (`name = value` lines).
    #[arg(long)]
    augment_config: Option<PathBuf>,
    /// Override the per-op firing probability.
    #[arg(long)]
    probability: Option<f64>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct AugmentPreviewArgs {
    /// Input images; synthetic ones drawn from the seed when omitted.
    #[arg(long, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = 4)]
    rows: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "standard", value_parser = parse_opset)]
    ops: OpSet,
    #[arg(long)]
    output: PathBuf,
    /// Side of each preview cell.
    #[arg(long, default_value_t = 256)]
    side: u32,
    #[command(flatten)]
    augment: AugmentArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct MakeSamplesArgs {
    /// Dataset root passed to build-dataset.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    subtask: u8,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// S12, T1, T2 or T3 (default: S12 for subtasks 1-2, T1 for subtask 3).
    #[arg(long)]
    approach: Option<Approach>,
    /// Only emit this split.
    #[arg(long)]
    split: Option<Split>,
    #[command(flatten)]
    augment: AugmentArgs,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["samples", "pred", "accuracies"]))]
struct ScoreArgs {
    /// Sample directory to score with the histogram stub.
    #[arg(long, requires = "output")]
    samples: Option<PathBuf>,
    /// Score file to write in --samples mode.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "histogram-stub")]
    model_id: String,
    /// Tile side for the histogram stub.
    #[arg(long, default_value_t = 32)]
    tile: u32,
    /// Submission to score against --truth or --manifest.
    #[arg(long, requires = "truth_source")]
    pred: Option<PathBuf>,
    #[arg(long, group = "truth_source")]
    truth: Option<PathBuf>,
    /// Manifest providing the truth labels (ordered by pair id).
    #[arg(long, group = "truth_source")]
    manifest: Option<PathBuf>,
    /// Restrict manifest truth to one split.
    #[arg(long)]
    split: Option<Split>,
    /// Three per-subtask accuracies, comma separated.
    #[arg(long, value_delimiter = ',')]
    accuracies: Option<Vec<f64>>,
    /// Subtask weights, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.6")]
    weights: Vec<f64>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct EnsembleArgs {
    /// Score files (pair_id,model_id,score); all are merged.
    #[arg(long, required = true, num_args = 1..)]
    scores: Vec<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// half-up maps an average of exactly 0.5 to 1, half-down to 0.
    #[arg(long, default_value = "half-up")]
    tie: TieRule,
    /// Reject the result unless it has this many lines.
    #[arg(long)]
    expected_lines: Option<usize>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct ReportArgs {
    #[arg(long, required = true, num_args = 1..)]
    scores: Vec<PathBuf>,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "valid")]
    split: Split,
    #[arg(long, default_value = "half-up")]
    tie: TieRule,
    /// Report CSV; printed to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_opset(s: &str) -> Result<OpSet, String> {
    s.parse().map_err(|e: encmatch_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: config: {}", commands::render(&e));
            return ExitCode::from(commands::classify(&e));
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    commands::run(cli.command)
}
