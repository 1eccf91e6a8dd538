//! Map format contracts: bit-exact roundtrips, exact layout size, error
//! classes, and the committed golden noise fixture.

use diffuse::mapio::{read_map, read_sdm, write_csv, write_map, write_sdm, MapError};
use diffuse_core::synth::gen_noise;
use diffuse_core::{ScalarField, SphericalGrid};

fn bitwise_equal(a: &ScalarField, b: &ScalarField) -> bool {
    a.grid().theta().iter().zip(b.grid().theta()).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.grid().phi().iter().zip(b.grid().phi()).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.values().len() == b.values().len()
        && a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits())
}

#[test]
fn sdm_roundtrip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("map.sdm");
    let grid = SphericalGrid::stretched(33, 64, 0.7).unwrap();
    let field = gen_noise(&grid, 31337, 2.5);
    write_sdm(&path, &field).unwrap();
    let back = read_sdm(&path).unwrap();
    assert!(bitwise_equal(&field, &back));
}

#[test]
fn sdm_layout_size_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.sdm");
    let grid = SphericalGrid::uniform(3, 4).unwrap();
    write_sdm(&path, &ScalarField::zeros(&grid)).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 168);
}

#[test]
fn csv_roundtrip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("map.csv");
    let grid = SphericalGrid::stretched(9, 11, 0.35).unwrap();
    let field = gen_noise(&grid, 7, 1.0);
    write_csv(&path, &field).unwrap();
    let back = read_map(&path).unwrap();
    assert!(bitwise_equal(&field, &back));
}

#[test]
fn extension_dispatch() {
    let dir = tempfile::tempdir().unwrap();
    let grid = SphericalGrid::uniform(4, 5).unwrap();
    let field = ScalarField::constant(&grid, 1.25);

    for name in ["a.sdm", "b.csv"] {
        let path = dir.path().join(name);
        write_map(&path, &field).unwrap();
        assert!(bitwise_equal(&field, &read_map(&path).unwrap()));
    }

    let bad = dir.path().join("c.dat");
    match write_map(&bad, &field) {
        Err(MapError::Format { detail, .. }) => assert!(detail.contains("extension")),
        other => panic!("expected format error, got {other:?}"),
    }
}

#[test]
fn truncated_file_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("map.sdm");
    let grid = SphericalGrid::uniform(5, 6).unwrap();
    write_sdm(&path, &ScalarField::zeros(&grid)).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
    assert!(matches!(read_sdm(&path), Err(MapError::Format { .. })));
    std::fs::write(&path, &bytes[..10]).unwrap();
    assert!(matches!(read_sdm(&path), Err(MapError::Format { .. })));
}

#[test]
fn bad_magic_and_version_are_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("map.sdm");
    let grid = SphericalGrid::uniform(3, 3).unwrap();
    write_sdm(&path, &ScalarField::zeros(&grid)).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();

    let mut tampered = bytes.clone();
    tampered[0] = b'X';
    std::fs::write(&path, &tampered).unwrap();
    match read_sdm(&path) {
        Err(MapError::Format { detail, .. }) => assert!(detail.contains("magic")),
        other => panic!("expected bad-magic format error, got {other:?}"),
    }

    bytes[4] = 9;
    std::fs::write(&path, &bytes).unwrap();
    match read_sdm(&path) {
        Err(MapError::Format { detail, .. }) => assert!(detail.contains("version")),
        other => panic!("expected version format error, got {other:?}"),
    }
}

#[test]
fn broken_grid_axis_is_validation_error_naming_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("map.sdm");
    let grid = SphericalGrid::uniform(5, 6).unwrap();
    write_sdm(&path, &ScalarField::zeros(&grid)).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    // First theta value lives right after the header; make it nonzero.
    bytes[16..24].copy_from_slice(&0.25f64.to_le_bytes());
    std::fs::write(&path, &bytes).unwrap();
    match read_sdm(&path) {
        Err(MapError::Validation { detail, .. }) => {
            assert!(detail.contains("theta"), "unhelpful detail: {detail}")
        }
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn golden_noise_fixture_matches_generator() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/noise_8x16_seed42.sdm");
    let stored = read_map(std::path::Path::new(fixture)).unwrap();

    let grid = SphericalGrid::uniform(8, 16).unwrap();
    let fresh = gen_noise(&grid, 42, 1.0);
    assert!(bitwise_equal(&fresh, &stored), "generator drifted from the committed fixture");

    // Byte-level too: rewriting the fixture must reproduce it exactly.
    let dir = tempfile::tempdir().unwrap();
    let rewritten = dir.path().join("re.sdm");
    write_sdm(&rewritten, &fresh).unwrap();
    assert_eq!(std::fs::read(fixture).unwrap(), std::fs::read(&rewritten).unwrap());
}
