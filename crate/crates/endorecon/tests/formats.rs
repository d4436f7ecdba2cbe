use endorecon::dataset::{self, depth_path, Dataset};
use endorecon::error::Error;
use endorecon::formats::binary::{decode_descriptors, encode_descriptors};
use endorecon::synth::{generate, SynthConfig};
use endorecon_core::matching::{AnalyticDescriptor, DescriptorSource};

fn small() -> SynthConfig {
    SynthConfig { frames: 3, width: 40, height: 32, focal: 20.0, sparse_points: 100, ..Default::default() }
}

fn assert_close(a: &Dataset, b: &Dataset) {
    assert_eq!(a.intrinsics, b.intrinsics);
    assert_eq!(a.cloud, b.cloud);
    assert_eq!(a.frames.len(), b.frames.len());
    for (x, y) in a.frames.iter().zip(&b.frames) {
        assert_eq!(x.frame_id, y.frame_id);
        assert_eq!(x.color, y.color);
        assert_eq!(x.pose.translation, y.pose.translation);
        assert!(x.pose.rotation.angle_to(&y.pose.rotation) < 1e-12);
        for (p, q) in x.mean.iter().chain(&x.stddev).zip(y.mean.iter().chain(&y.stddev)) {
            assert!((p - q).abs() <= 1e-6 * p.abs().max(1e-3), "{p} vs {q}");
        }
    }
}

#[test]
fn dataset_round_trip() {
    let s = generate(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    dataset::save(dir.path(), &s.dataset, Some(&s.mesh)).unwrap();
    let back = dataset::load(dir.path()).unwrap();
    assert_close(&s.dataset, &back);
    let mesh = dataset::read_mesh(&dir.path().join(dataset::PHANTOM)).unwrap();
    assert_eq!(mesh.triangles, s.mesh.triangles);
    for (a, b) in mesh.vertices.iter().zip(&s.mesh.vertices) {
        assert!((a - b).norm() < 1e-5);
    }
}

#[test]
fn corrupt_frame_names_file_and_offset() {
    let s = generate(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    dataset::save(dir.path(), &s.dataset, None).unwrap();
    let path = depth_path(dir.path(), 1);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(100);
    std::fs::write(&path, &bytes).unwrap();
    let err = dataset::load(dir.path()).unwrap_err();
    assert!(matches!(&err, Error::Parse { path: p, offset: 12, .. } if *p == path), "{err}");
    let msg = err.to_string();
    assert!(msg.contains("000001.dpth") && msg.contains("offset 12"), "{msg}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn wrong_frame_size_is_rejected() {
    let s = generate(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    dataset::save(dir.path(), &s.dataset, None).unwrap();
    std::fs::write(dir.path().join(dataset::INTRINSICS), "20 20 20 16 41 32\n").unwrap();
    let err = dataset::load(dir.path()).unwrap_err();
    assert!(err.to_string().contains("40x32"), "{err}");
}

#[test]
fn missing_files_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let err = dataset::load(dir.path()).unwrap_err();
    assert!(err.to_string().contains("intrinsics.txt"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn descriptor_file_round_trip() {
    let map = AnalyticDescriptor::seeded(6, 3).render(9, 7);
    let bytes = encode_descriptors(&map);
    assert_eq!(bytes.len(), 16 + 4 * 9 * 7 * 6);
    assert_eq!(&bytes[..4], b"DESC");
    assert_eq!(decode_descriptors(&bytes).unwrap(), map);
    assert_eq!(decode_descriptors(&bytes[..40]).unwrap_err().offset, 16);
}
