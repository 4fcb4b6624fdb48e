use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context};
use encmatch_core::augment::{apply_augmentations_traced, preview_grid, Approach, AugmentConfig};
use encmatch_core::bfv::{self, Bfv, BfvParams};
use encmatch_core::dataset::{
    self, build_dataset, folder_sources, subtask_dir, synthetic_sources, DatasetConfig, Encoded, Encoder,
    NonMatchMode, PairManifest, Subtask, MANIFEST_FILE,
};
use encmatch_core::evalkit::{self, ScoreMatrix, SubmissionFile, Weights};
use encmatch_core::pipeline::{self, TileKeying};
use encmatch_core::raster::RasterImage;
use encmatch_core::samples::{self, SAMPLE_INDEX_FILE};
use encmatch_core::synth::{synthetic_image, SizeRange};
use encmatch_core::{seed, selftest};

use crate::{
    AugmentArgs, AugmentPreviewArgs, BuildDatasetArgs, Command, DecodeArgs, EncodeArgs, EnsembleArgs, KeyArgs,
    KeygenArgs, MakeSamplesArgs, ReportArgs, ScoreArgs, EXIT_IO, EXIT_SELFTEST, EXIT_VALIDATION,
};

pub fn run(command: Command) -> ExitCode {
    let (stage, result) = match command {
        Command::Encode(a) => ("encode", encode(a)),
        Command::Decode(a) => ("decode", decode(a)),
        Command::Keygen(a) => ("keygen", keygen(a)),
        Command::BuildDataset(a) => ("build-dataset", build(a)),
        Command::AugmentPreview(a) => ("augment-preview", augment_preview(a)),
        Command::MakeSamples(a) => ("make-samples", make_samples(a)),
        Command::Score(a) => ("score", score(a)),
        Command::Ensemble(a) => ("ensemble", ensemble(a)),
        Command::Report(a) => ("report", report(a)),
        Command::Selftest => return run_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {stage}: {}", render(&e));
            ExitCode::from(classify(&e))
        }
    }
}

/// The error chain joined by `: `, skipping causes whose text the previous
/// message already ends with.
pub fn render(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

/// Exit code for a failure: filesystem problems are I/O, everything else is
/// a validation failure.
pub fn classify(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<encmatch_core::Error>() {
            return if core.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn subtask(n: u8) -> anyhow::Result<Subtask> {
    Ok(Subtask::from_number(n)?)
}

fn read_bytes(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_keys(path: &Path) -> anyhow::Result<(Bfv, encmatch_core::bfv::KeyTriple)> {
    let (params, keys) = bfv::read_keys(&read_bytes(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok((Bfv::new(params)?, keys))
}

fn encoder_for(subtask: Subtask, key: &KeyArgs, seed: u64) -> anyhow::Result<Encoder> {
    if key.key.is_some() && subtask == Subtask::Encrypted {
        bail!("--key applies to subtasks 1 and 2; subtask 3 takes --keys");
    }
    if key.keys.is_some() && subtask != Subtask::Encrypted {
        bail!("--keys applies to subtask 3 only");
    }
    Ok(match subtask {
        Subtask::Tiled => Encoder::Tiled {
            key: key.key.unwrap_or_else(Encoder::default_tiled_key),
            keying: if key.per_tile {
                TileKeying::PerTile { master_seed: seed }
            } else {
                TileKeying::Shared
            },
        },
        Subtask::FullFrame => Encoder::FullFrame {
            key: key.key.unwrap_or_else(Encoder::default_fullframe_key),
        },
        Subtask::Encrypted => match &key.keys {
            Some(path) => {
                let (bfv, keys) = load_keys(path)?;
                Encoder::Encrypted {
                    bfv,
                    keys: Box::new(keys),
                }
            }
            None => Encoder::encrypted(BfvParams::default(), seed)?,
        },
    })
}

fn encode(a: EncodeArgs) -> anyhow::Result<()> {
    let subtask = subtask(a.subtask)?;
    let encoder = encoder_for(subtask, &a.key, a.seed)?;
    let img = match &a.input {
        Some(p) => RasterImage::load(p)?,
        None => {
            let sizes = if subtask == Subtask::Encrypted { SizeRange::FACE } else { SizeRange::FRAME };
            synthetic_image(a.seed, sizes)
        }
    };
    let prepared = encoder.prepare(&img)?;
    if let Some(p) = &a.original_out {
        prepared.save(p)?;
    }
    match encoder.encode(&prepared, seed::derive(a.seed, "encode", &[]))? {
        Encoded::Image(out) => {
            if let Some(parent) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            out.save(&a.output)?
        }
        Encoded::Blob(blob) => write_bytes(&a.output, &blob)?,
    }
    println!("{}: {}", a.output.display(), encoder.describe());
    Ok(())
}

fn decode(a: DecodeArgs) -> anyhow::Result<()> {
    let subtask = subtask(a.subtask)?;
    let seed = a.seed.unwrap_or(0);
    let out = match encoder_for(subtask, &a.key, seed)? {
        Encoder::Tiled { key, keying } => pipeline::decode_tiled(&RasterImage::load(&a.input)?, &key, keying)?,
        Encoder::FullFrame { key } => pipeline::decode_fullframe(&RasterImage::load(&a.input)?, &key)?,
        Encoder::Encrypted { bfv, keys } => {
            if a.key.keys.is_none() && a.seed.is_none() {
                bail!("subtask 3 needs --keys, or the --seed the keys were derived from");
            }
            bfv::decrypt_image(&bfv, &read_bytes(&a.input)?, &keys.secret, a.side, a.side)?
        }
    };
    out.save(&a.output)?;
    println!("{}", a.output.display());
    Ok(())
}

fn keygen(a: KeygenArgs) -> anyhow::Result<()> {
    let params = BfvParams::new(a.n, a.q, a.t, a.relin_base)?;
    let bfv = Bfv::new(params)?;
    let keys = bfv.keygen(seed::derive(a.seed, "bfv-keys", &[]));
    write_bytes(&a.output, &bfv::write_keys(&params, &keys))?;
    println!(
        "{}: n={} q={} t={} T={} digits={} ntt={}",
        a.output.display(),
        params.n,
        params.q,
        params.t,
        params.relin_base,
        params.relin_digits(),
        bfv.uses_ntt()
    );
    Ok(())
}

fn build(a: BuildDatasetArgs) -> anyhow::Result<()> {
    let subtask = subtask(a.subtask)?;
    let sources = match &a.originals {
        Some(dir) => folder_sources(dir)?,
        None => synthetic_sources(a.count, a.seed),
    };
    if sources.len() < 2 {
        bail!("need at least two originals, found {}", sources.len());
    }
    let config = DatasetConfig {
        encoder: encoder_for(subtask, &a.key, a.seed)?,
        sources,
        master_seed: a.seed,
        train_ratio: a.train_ratio,
        nonmatch: if a.derangement { NonMatchMode::Derangement } else { NonMatchMode::WithReplacement },
    };
    let manifest = build_dataset(&a.out, &config)?;
    let c = manifest.counts();
    println!(
        "{}: {} records (train {} match / {} non-match, valid {} match / {} non-match)",
        subtask_dir(&a.out, subtask).join(MANIFEST_FILE).display(),
        c.total(),
        c.match_train,
        c.nonmatch_train,
        c.match_valid,
        c.nonmatch_valid
    );
    Ok(())
}

fn augment_config(a: &AugmentArgs) -> anyhow::Result<AugmentConfig> {
    let mut cfg = AugmentConfig::default();
    if let Some(path) = &a.augment_config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg = cfg.with_overrides(&text)?;
    }
    if let Some(p) = a.probability {
        if !(0.0..=1.0).contains(&p) {
            bail!("--probability must be in [0, 1], got {p}");
        }
        cfg.probability = p;
    }
    Ok(cfg)
}

fn augment_preview(a: AugmentPreviewArgs) -> anyhow::Result<()> {
    let mut cfg = augment_config(&a.augment)?;
    cfg.ops = a.ops;
    let originals = if a.input.is_empty() {
        (0..a.rows)
            .map(|i| synthetic_image(seed::derive(a.seed, "preview-image", &[i as u64]), SizeRange::FRAME))
            .collect()
    } else {
        a.input.iter().map(RasterImage::load).collect::<Result<Vec<_>, _>>()?
    };
    let mut pairs = Vec::with_capacity(originals.len());
    for (i, img) in originals.iter().enumerate() {
        let before = pipeline::normalize_geometry(img, a.side)?;
        let (after, fired) = apply_augmentations_traced(&before, &cfg, seed::derive(a.seed, "preview", &[i as u64]));
        let names: Vec<_> = fired.iter().map(|op| op.name()).collect();
        println!("row {i}: {}", if names.is_empty() { "(none)".to_string() } else { names.join(", ") });
        pairs.push((before, after));
    }
    if let Some(parent) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    preview_grid(&pairs).save(&a.output)?;
    println!("{}", a.output.display());
    Ok(())
}

fn make_samples(a: MakeSamplesArgs) -> anyhow::Result<()> {
    let subtask = subtask(a.subtask)?;
    let dir = subtask_dir(&a.dataset, subtask);
    let manifest = PairManifest::read(&dir.join(MANIFEST_FILE))?;
    let approach = a.approach.unwrap_or_else(|| Approach::default_for(subtask));
    let cfg = augment_config(&a.augment)?;
    let rows = samples::emit_samples(&manifest, &dir, &a.out, approach, &cfg, a.seed, a.split)?;
    println!("{}: {} samples ({approach})", a.out.join(SAMPLE_INDEX_FILE).display(), rows.len());
    Ok(())
}

fn score(a: ScoreArgs) -> anyhow::Result<()> {
    if let Some(dir) = &a.samples {
        let rows = samples::stub_scores(dir, &a.model_id, a.tile)?;
        let out = a.output.as_ref().expect("clap requires --output with --samples");
        write_bytes(out, evalkit::scores_to_csv(&rows).as_bytes())?;
        println!("{}: {} scores", out.display(), rows.len());
    } else if let Some(pred) = &a.pred {
        let pred = SubmissionFile::read(pred, None)?;
        let truth = match (&a.truth, &a.manifest) {
            (Some(t), _) => SubmissionFile::read(t, Some(pred.len()))?,
            (None, Some(m)) => evalkit::truth_for(&PairManifest::read(m)?, a.split).1,
            (None, None) => unreachable!("clap requires a truth source"),
        };
        println!("accuracy={}", evalkit::accuracy(&pred, &truth)?);
    } else if let Some(acc) = &a.accuracies {
        let [w1, w2, w3] = a.weights[..] else {
            bail!("--weights needs three values");
        };
        let &[a1, a2, a3] = &acc[..] else {
            bail!("--accuracies needs three values");
        };
        let weights = Weights::new(w1, w2, w3)?;
        let acc = [a1, a2, a3];
        println!("weighted_accuracy={}", evalkit::weighted_accuracy(acc, &weights)?);
    }
    Ok(())
}

fn read_matrix(paths: &[std::path::PathBuf]) -> anyhow::Result<ScoreMatrix> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(evalkit::read_scores(p).with_context(|| format!("reading {}", p.display()))?);
    }
    Ok(ScoreMatrix::from_rows(&rows)?)
}

fn ensemble(a: EnsembleArgs) -> anyhow::Result<()> {
    let matrix = read_matrix(&a.scores)?;
    let sub = evalkit::ensemble(&matrix, a.tie)?;
    if let Some(n) = a.expected_lines {
        if sub.len() != n {
            bail!("ensemble produced {} lines, expected {n}", sub.len());
        }
    }
    write_bytes(&a.output, sub.emit().as_bytes())?;
    println!("{}: {} predictions from {} models", a.output.display(), sub.len(), matrix.models().len());
    Ok(())
}

fn report(a: ReportArgs) -> anyhow::Result<()> {
    let matrix = read_matrix(&a.scores)?;
    let manifest = dataset::PairManifest::read(&a.manifest)?;
    let rows = evalkit::report_validation(&matrix, &manifest, a.split, a.tie)?;
    let csv = evalkit::report_to_csv(&rows);
    match &a.output {
        Some(p) => write_bytes(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_selftest() -> ExitCode {
    let results = selftest::run();
    let mut failed = 0;
    for r in &results {
        match &r.failure {
            None => println!("ok      {}", r.name),
            Some(why) => {
                failed += 1;
                println!("FAILED  {}: {why}", r.name);
            }
        }
    }
    println!("{} checks, {failed} failed", results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SELFTEST)
    }
}
