use std::collections::BTreeSet;

use encmatch_core::augment::{Approach, AugmentConfig};
use encmatch_core::dataset::{
    build_dataset, folder_sources, subtask_dir, tree_hashes, DatasetConfig, Encoder, Label, NonMatchMode,
    PairManifest, Split, Subtask, KEYS_FILE, MANIFEST_FILE,
};
use encmatch_core::raster::RasterImage;
use encmatch_core::samples::{emit_samples, read_index, load_sample, SAMPLE_INDEX_FILE};
use encmatch_core::synth::{synthetic_image, SizeRange};

#[test]
fn manifest_on_disk_matches_returned_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = DatasetConfig::synthetic(Subtask::FullFrame, 12, 3).unwrap();
    let built = build_dataset(dir.path(), &config).unwrap();
    let sub = subtask_dir(dir.path(), Subtask::FullFrame);
    let read = PairManifest::read(&sub.join(MANIFEST_FILE)).unwrap();
    assert_eq!(read, built);
    let text = std::fs::read_to_string(sub.join(MANIFEST_FILE)).unwrap();
    assert!(text.starts_with("# encmatch-manifest subtask=2 master_seed=3"), "{text}");
    assert_eq!(text.lines().nth(1).unwrap(), "pair_id,subtask,original_path,encoded_path,label,split");
    for r in &read.records {
        assert!(sub.join(&r.original_path).is_file());
        assert!(sub.join(&r.encoded_path).is_file());
        let img = RasterImage::load(sub.join(&r.encoded_path)).unwrap();
        assert_eq!((img.width(), img.height()), (512, 512));
    }
}

#[test]
fn seeds_change_the_corpus() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    build_dataset(a.path(), &DatasetConfig::synthetic(Subtask::Tiled, 6, 1).unwrap()).unwrap();
    build_dataset(b.path(), &DatasetConfig::synthetic(Subtask::Tiled, 6, 2).unwrap()).unwrap();
    let ha = tree_hashes(&subtask_dir(a.path(), Subtask::Tiled)).unwrap();
    let hb = tree_hashes(&subtask_dir(b.path(), Subtask::Tiled)).unwrap();
    assert_ne!(ha, hb);
}

#[test]
fn derangement_uses_every_encoding_once() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = DatasetConfig::synthetic(Subtask::Tiled, 15, 8).unwrap();
    config.nonmatch = NonMatchMode::Derangement;
    let m = build_dataset(dir.path(), &config).unwrap();
    let used: BTreeSet<&str> = m
        .records
        .iter()
        .filter(|r| r.label == Label::NonMatch)
        .map(|r| r.encoded_path.as_str())
        .collect();
    assert_eq!(used.len(), 15);
    assert_eq!(m.self_pairings(), 0);
}

#[test]
fn folder_originals_are_used_in_name_order() {
    let src = tempfile::tempdir().unwrap();
    for (i, name) in ["b.png", "a.png", "c.ppm"].iter().enumerate() {
        synthetic_image(i as u64, SizeRange { min: 60, max: 90 }).save(src.path().join(name)).unwrap();
    }
    std::fs::write(src.path().join("notes.txt"), "not an image").unwrap();
    let sources = folder_sources(src.path()).unwrap();
    assert_eq!(sources.len(), 3);
    let out = tempfile::tempdir().unwrap();
    let config = DatasetConfig {
        encoder: Encoder::default_for(Subtask::Tiled, 1).unwrap(),
        sources,
        master_seed: 1,
        train_ratio: 0.8,
        nonmatch: NonMatchMode::default(),
    };
    let m = build_dataset(out.path(), &config).unwrap();
    assert_eq!(m.records.len(), 6);
    // Pair 0 comes from a.png, geometry-normalized to 512.
    let a = RasterImage::load(src.path().join("a.png")).unwrap();
    let stored = RasterImage::load(subtask_dir(out.path(), Subtask::Tiled).join(&m.records[0].original_path)).unwrap();
    assert_eq!(stored, encmatch_core::pipeline::normalize_geometry(&a, 512).unwrap());
}

#[test]
fn encrypted_corpus_to_samples() {
    let dir = tempfile::tempdir().unwrap();
    let config = DatasetConfig::synthetic(Subtask::Encrypted, 5, 21).unwrap();
    let m = build_dataset(dir.path(), &config).unwrap();
    let sub = subtask_dir(dir.path(), Subtask::Encrypted);
    assert!(sub.join(KEYS_FILE).is_file());
    assert!(m.records.iter().all(|r| r.encoded_path.ends_with(".bin")));

    let out = dir.path().join("samples");
    let rows = emit_samples(&m, &sub, &out, Approach::T2, &AugmentConfig::default(), 4, Some(Split::Train)).unwrap();
    assert_eq!(rows.len(), m.records_in(Split::Train).count());
    let index = read_index(&out.join(SAMPLE_INDEX_FILE)).unwrap();
    assert_eq!(index, rows);
    for row in &index {
        let s = load_sample(&out, row).unwrap();
        assert_eq!((s.height, s.width), (52, 52));
        assert_eq!(s.label, Some(row.label));
        assert_eq!(s.pair_id, row.pair_id);
        assert!(s.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    // Same seed, same bytes.
    let again = dir.path().join("again");
    emit_samples(&m, &sub, &again, Approach::T2, &AugmentConfig::default(), 4, Some(Split::Train)).unwrap();
    assert_eq!(tree_hashes(&out).unwrap(), tree_hashes(&again).unwrap());
}

#[test]
fn augmented_samples_depend_on_seed() {
    let dir = tempfile::tempdir().unwrap();
    let m = build_dataset(dir.path(), &DatasetConfig::synthetic(Subtask::Tiled, 4, 2).unwrap()).unwrap();
    let sub = subtask_dir(dir.path(), Subtask::Tiled);
    let cfg = AugmentConfig {
        probability: 1.0,
        ..AugmentConfig::default()
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    emit_samples(&m, &sub, &a, Approach::S12, &cfg, 1, Some(Split::Valid)).unwrap();
    emit_samples(&m, &sub, &b, Approach::S12, &cfg, 1, Some(Split::Valid)).unwrap();
    emit_samples(&m, &sub, &c, Approach::S12, &cfg, 2, Some(Split::Valid)).unwrap();
    assert_eq!(tree_hashes(&a).unwrap(), tree_hashes(&b).unwrap());
    assert_ne!(tree_hashes(&a).unwrap(), tree_hashes(&c).unwrap());
}
