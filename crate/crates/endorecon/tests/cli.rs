use std::path::Path;
use std::process::{Command, Output};

use endorecon::config::{PipelineConfig, KEYS};
use endorecon::formats::binary::{encode_depth, encode_descriptors, DepthImage};
use endorecon::formats::text::{read_matches, write_queries};
use endorecon_core::matching::{AnalyticDescriptor, DescriptorSource};
use endorecon_core::Vec2;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_endorecon")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &["--width", "64", "--height", "48", "--focal", "32", "--sparse-points", "300"];

fn synth_small(dir: &Path, frames: &str) {
    let mut args = vec!["synth", "--out", p(dir), "--frames", frames];
    args.extend_from_slice(SMALL);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        if e.file_type().unwrap().is_dir() {
            for (n, b) in files(&e.path()) {
                out.push((format!("{}/{n}", e.file_name().to_string_lossy()), b));
            }
        } else {
            out.push((e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn synth_default_writes_a_full_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--out", p(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let depth = std::fs::read_dir(dir.path().join("depth")).unwrap().count();
    assert_eq!(depth, 60);
    for f in ["intrinsics.txt", "trajectory.txt", "sparse.ply", "phantom.ply", "synth.txt"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let traj = std::fs::read_to_string(dir.path().join("trajectory.txt")).unwrap();
    assert_eq!(traj.lines().count(), 60);
}

#[test]
fn synth_frames_flag_and_determinism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synth_small(a.path(), "2");
    synth_small(b.path(), "2");
    assert_eq!(std::fs::read_dir(a.path().join("depth")).unwrap().count(), 2);
    assert_eq!(files(a.path()), files(b.path()));
}

#[test]
fn synth_rejects_invalid_spec() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--out", p(dir.path()), "--bend", "3"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("phantom"));
}

#[test]
fn reconstruct_evaluate_and_echo_config() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, out, eval) = (tmp.path().join("data"), tmp.path().join("out"), tmp.path().join("eval"));
    synth_small(&data, "24");
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# test run\nvoxel_size = 1.0\nseed = 5\n").unwrap();
    let o = run(&["reconstruct", "--config", p(&cfg), "--dataset", p(&data), "--output", p(&out), "--set", "dump_volume=true"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["mesh.ply", "mesh_watertight.txt", "mesh_scales.txt", "config.txt", "mesh.tsdf"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let echoed = std::fs::read_to_string(out.join("config.txt")).unwrap();
    let reloaded = PipelineConfig::load(Some(&echoed), &[]).unwrap();
    assert_eq!(reloaded.seed, 5);
    assert!(reloaded.dump_volume);
    assert_eq!(std::fs::read_to_string(out.join("mesh_scales.txt")).unwrap().lines().count(), 24);

    // byte-identical rerun
    let again = tmp.path().join("again");
    run(&["reconstruct", "--config", p(&cfg), "--dataset", p(&data), "--output", p(&again), "--set", "dump_volume=true"]);
    assert_eq!(std::fs::read(out.join("mesh.ply")).unwrap(), std::fs::read(again.join("mesh.ply")).unwrap());

    let o = run(&[
        "evaluate",
        "--recon",
        p(&out.join("mesh.ply")),
        "--reference",
        p(&data.join("phantom.ply")),
        "--trajectory",
        p(&data.join("trajectory.txt")),
        "--cloud",
        p(&data.join("sparse.ply")),
        "--output",
        p(&eval),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(eval.join("metrics.txt")).unwrap();
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(eval.join("metrics.json")).unwrap()).unwrap();
    for line in text.lines() {
        let f: Vec<&str> = line.split(' ').collect();
        assert_eq!(f.len(), 3, "{line}");
        assert_eq!(json[f[0]]["unit"], f[2]);
    }
    assert!(json["sparse_to_recon_mean"]["value"].as_f64().unwrap() < 1.0);
}

#[test]
fn evaluate_reference_against_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_small(&data, "4");
    let reference = data.join("phantom.ply");
    let o = run(&[
        "evaluate",
        "--recon",
        p(&reference),
        "--reference",
        p(&reference),
        "--trajectory",
        p(&data.join("trajectory.txt")),
        "--cloud",
        p(&data.join("sparse.ply")),
        "--output",
        p(tmp.path()),
        "--set",
        "icp_init=identity",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("metrics.json")).unwrap()).unwrap();
    let v = |k: &str| json[k]["value"].as_f64().unwrap();
    assert!(v("registration_residual_mean") < 1e-9);
    assert!(v("cross_section_mean_relative_difference") < 1e-9);
    assert!(v("sparse_to_recon_max") < 1e-5, "f32 storage of the mesh");
}

#[test]
fn evaluate_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_small(&data, "4");
    let missing = tmp.path().join("nope.ply");
    let args = |reference: &Path, traj: &Path| {
        run(&[
            "evaluate",
            "--recon",
            p(&data.join("phantom.ply")),
            "--reference",
            p(reference),
            "--trajectory",
            p(traj),
            "--cloud",
            p(&data.join("sparse.ply")),
            "--output",
            p(tmp.path()),
        ])
    };
    let o = args(&missing, &data.join("trajectory.txt"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.ply"), "{}", stderr(&o));

    // every plane misses: numerical failure, other metrics still written
    let far = tmp.path().join("far.txt");
    std::fs::write(&far, "0 500 500 500 0 0 0 1\n1 -500 0 0 0 0 0 1\n").unwrap();
    let o = args(&data.join("phantom.ply"), &far);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("metrics.txt")).unwrap();
    assert!(text.contains("registration_residual_mean"));
    assert!(text.contains("cross_section_mean_relative_difference NaN ratio"));
    assert!(text.contains("cross_section_skipped 2 count"));
}

#[test]
fn all_invalid_depths_fail_with_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_small(&data, "3");
    let blank = DepthImage { width: 64, height: 48, mean: vec![0.0; 64 * 48], stddev: vec![0.0; 64 * 48] };
    for id in 0..3 {
        std::fs::write(endorecon::dataset::depth_path(&data, id), encode_depth(&blank)).unwrap();
    }
    let o = run(&["reconstruct", "--dataset", p(&data), "--output", p(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no valid depth"), "{}", stderr(&o));
}

#[test]
fn corrupt_depth_reports_file_and_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_small(&data, "3");
    let path = endorecon::dataset::depth_path(&data, 2);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, bytes).unwrap();
    let o = run(&["reconstruct", "--dataset", p(&data), "--output", p(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("000002.dpth") && err.contains("byte offset 0"), "{err}");
}

#[test]
fn consistency_command() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth_small(&data, "20");
    let out = tmp.path().join("out");
    let o = run(&["consistency", "--dataset", p(&data), "--output", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("consistency.txt")).unwrap();
    assert!(text.contains("frames_a 14 count"), "{text}");
    assert!(text.contains("a_to_b_residual_mean"));
    assert!(out.join("mesh_a.ply").is_file() && out.join("mesh_b.ply").is_file());
}

fn write_map(path: &Path, shift: Vec2, channels: usize) {
    let map = AnalyticDescriptor::seeded(channels, 9).shifted(shift).render(40, 30);
    std::fs::write(path, encode_descriptors(&map)).unwrap();
}

#[test]
fn match_command() {
    let tmp = tempfile::tempdir().unwrap();
    let (src, same, moved, other) =
        (tmp.path().join("a.desc"), tmp.path().join("b.desc"), tmp.path().join("c.desc"), tmp.path().join("d.desc"));
    write_map(&src, Vec2::zeros(), 16);
    write_map(&same, Vec2::zeros(), 16);
    write_map(&moved, Vec2::new(3.25, -1.5), 16);
    write_map(&other, Vec2::zeros(), 8);
    let queries = tmp.path().join("q.txt");
    let q: Vec<Vec2> = (0..10).map(|i| Vec2::new(8.0 + 2.0 * i as f64, 10.0 + i as f64)).collect();
    std::fs::write(&queries, write_queries(&q)).unwrap();
    let out = tmp.path().join("m.txt");
    let m = |target: &Path, queries: &Path| run(&["match", "--source", p(&src), "--target", p(target), "--queries", p(queries), "--output", p(&out)]);

    assert!(m(&same, &queries).status.success());
    let found = read_matches(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(found.len(), 10);
    for r in &found {
        assert!((r.matched - r.query).norm() < 0.25, "{r:?}");
        assert!((r.score - 1.0).abs() < 1e-5);
    }

    assert!(m(&moved, &queries).status.success());
    for r in read_matches(&std::fs::read_to_string(&out).unwrap()).unwrap() {
        assert!((r.matched - r.query - Vec2::new(3.25, -1.5)).norm() < 0.25, "{r:?}");
    }

    let o = m(&other, &queries);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("channel"), "{}", stderr(&o));

    let empty = tmp.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(m(&same, &empty).status.code(), Some(0));
    assert_eq!(std::fs::read(&out).unwrap(), b"");
}

#[test]
fn help_and_usage_errors() {
    let o = run(&["reconstruct", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let help = String::from_utf8_lossy(&o.stdout);
    for (k, _, _) in KEYS {
        assert!(help.contains(k), "{k} missing from help");
    }
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["reconstruct", "--set", "voxel_size=-2", "--dataset", "x", "--output", "y"]).status.code(), Some(1));
    let o = run(&["reconstruct", "--set", "nonsense=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nonsense"));
    assert_eq!(run(&["reconstruct"]).status.code(), Some(1), "dataset not set");
}
