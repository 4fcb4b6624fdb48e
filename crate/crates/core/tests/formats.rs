use encmatch_core::bfv::{self, Bfv, BfvParams, BlobHeader, BLOB_HEADER_LEN};
use encmatch_core::chaos::CatMapKey;
use encmatch_core::pipeline::{encode_tiled, prepare_face_crop, CropBox, TileKeying};
use encmatch_core::raster::RasterImage;
use encmatch_core::synth::{synthetic_image, SizeRange};

fn face() -> RasterImage {
    let img = synthetic_image(5, SizeRange::FACE);
    prepare_face_crop(&img, CropBox::centered_square(img.width(), img.height())).unwrap()
}

#[test]
fn image_encryption_roundtrip_and_layout() {
    let bfv = Bfv::new(BfvParams::default()).unwrap();
    let keys = bfv.keygen(1);
    let img = face();
    let blob = bfv::encrypt_image(&bfv, &img, &keys.public, 9).unwrap();
    let header = BlobHeader::parse(&blob).unwrap();
    // 52 * 52 * 3 bytes in 1024-slot plaintexts.
    assert_eq!(header.count, (52 * 52 * 3usize).div_ceil(1024) as u64);
    assert_eq!((header.n, header.q, header.t), (1024, bfv.params().q, 257));
    assert_eq!(blob.len(), BLOB_HEADER_LEN + header.count as usize * 2 * 1024 * 8);
    assert_eq!(bfv::decrypt_image(&bfv, &blob, &keys.secret, 52, 52).unwrap(), img);
    // Encryption is randomized by the seed.
    assert_ne!(blob, bfv::encrypt_image(&bfv, &img, &keys.public, 10).unwrap());
    assert_eq!(blob, bfv::encrypt_image(&bfv, &img, &keys.public, 9).unwrap());
}

#[test]
fn ciphertext_view_is_deterministic_and_sized() {
    let bfv = Bfv::new(BfvParams::default()).unwrap();
    let keys = bfv.keygen(2);
    let blob = bfv::encrypt_image(&bfv, &face(), &keys.public, 3).unwrap();
    let a = bfv::ciphertext_to_image(&blob, 52, 52).unwrap();
    assert_eq!((a.width(), a.height()), (52, 52));
    assert_eq!(a, bfv::ciphertext_to_image(&blob, 52, 52).unwrap());
    let big = bfv::ciphertext_to_image(&blob, 128, 96).unwrap();
    assert_eq!((big.width(), big.height()), (128, 96));
}

#[test]
fn damaged_blobs_are_rejected() {
    let bfv = Bfv::new(BfvParams::default()).unwrap();
    let keys = bfv.keygen(3);
    let blob = bfv::encrypt_image(&bfv, &face(), &keys.public, 4).unwrap();
    assert!(bfv::read_blob(bfv.params(), &blob[..blob.len() - 8]).is_err());
    let mut bad = blob.clone();
    bad[0] = b'X';
    assert!(bfv::read_blob(bfv.params(), &bad).is_err());
    let other = BfvParams::new(1024, bfv.params().q, 17, 256).unwrap();
    assert!(bfv::read_blob(&other, &blob).is_err());
    // A coefficient at or above q.
    let mut bad = blob;
    bad[BLOB_HEADER_LEN..BLOB_HEADER_LEN + 8].copy_from_slice(&u64::MAX.to_le_bytes());
    assert!(bfv::read_blob(bfv.params(), &bad).is_err());
}

#[test]
fn key_files_survive_disk() {
    let dir = tempfile::tempdir().unwrap();
    let bfv = Bfv::new(BfvParams::default()).unwrap();
    let keys = bfv.keygen(5);
    let path = dir.path().join("k.bfk");
    std::fs::write(&path, bfv::write_keys(bfv.params(), &keys)).unwrap();
    let (params, back) = bfv::read_keys(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(params, *bfv.params());
    assert_eq!(back, keys);
    assert_eq!(bfv.public_key_residual(&back), bfv.public_key_residual(&keys));
}

#[test]
fn encoded_images_survive_png_and_ppm() {
    let dir = tempfile::tempdir().unwrap();
    let img = synthetic_image(8, SizeRange { min: 64, max: 64 });
    let enc = encode_tiled(&img, &CatMapKey::classic(32, 3).unwrap(), TileKeying::Shared).unwrap();
    for name in ["e.png", "e.ppm"] {
        let path = dir.path().join(name);
        enc.save(&path).unwrap();
        assert_eq!(RasterImage::load(&path).unwrap(), enc, "{name}");
    }
    assert!(RasterImage::load(dir.path().join("missing.png")).unwrap_err().is_io());
}
