use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use tvdd::io::{encode_csv, encode_pgm, parse_csv, parse_pgm, read_pgm, write_pgm, PgmEncoding};
use tvdd::operators::{parse_index_set, read_index_set, write_index_set};
use tvdd::{GridShape, Signal};

fn tvdd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvdd"))
        .args(args)
        .env_remove("TVDD_THREADS")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pgm_round_trip_is_within_half_a_level(
        (rows, cols, values) in (1usize..12, 1usize..12)
            .prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(0.0f64..1.0, r * c))),
        binary in any::<bool>(),
    ) {
        let image = Signal::new(GridShape::d2(rows, cols).unwrap(), values).unwrap();
        let enc = if binary { PgmEncoding::Binary } else { PgmEncoding::Ascii };
        let back = parse_pgm(&encode_pgm(&image, enc).unwrap(), "mem").unwrap();
        prop_assert_eq!(back.shape(), image.shape());
        prop_assert!(back.max_abs_diff(&image) <= 0.5 / 255.0 + 1e-12);
    }

    #[test]
    fn csv_round_trip_is_exact(values in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let s = Signal::from_vec(values).unwrap();
        let back = parse_csv(&encode_csv(&s), "mem").unwrap();
        prop_assert_eq!(back.values(), s.values());
    }
}

#[test]
fn pgm_header_comments_and_sixteen_bit_samples() {
    let text = b"P2\n# made by hand\n3 2\n# max\n1000\n0 500 1000\n250 750 1000\n";
    let img = parse_pgm(text, "mem").unwrap();
    assert_eq!(img.shape().dims(), &[2, 3]);
    assert_eq!(img.values(), &[0.0, 0.5, 1.0, 0.25, 0.75, 1.0]);

    let mut bin = b"P5 2 1 65535\n".to_vec();
    bin.extend([0xff, 0xff, 0x00, 0x00]);
    assert_eq!(parse_pgm(&bin, "mem").unwrap().values(), &[1.0, 0.0]);
}

#[test]
fn malformed_inputs_are_rejected() {
    for bad in [
        &b"P3\n1 1\n255\n0\n"[..],
        b"P2\n2 2\n255\n0 1 2\n",
        b"P2\n2 2\n255\n0 1 2 300\n",
        b"P2\n0 2\n255\n",
        b"P5\n2 2\n255\n\x00",
        b"",
    ] {
        assert!(parse_pgm(bad, "mem").is_err(), "{:?}", String::from_utf8_lossy(bad));
    }
    let err = parse_csv("1.0\n2.0\nabc\n", "sig.csv").unwrap_err().to_string();
    assert!(err.contains("sig.csv") && err.contains('3'), "{err}");
    assert!(parse_csv("# only a comment\n\n", "mem").is_err());
    let shape = GridShape::d2(4, 4).unwrap();
    assert!(parse_index_set("0 0\n4 1\n", &shape, "mem").is_err());
    assert!(parse_index_set("0\n", &shape, "mem").is_err());
}

#[test]
fn files_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let shape = GridShape::d2(3, 5).unwrap();
    let img = Signal::from_fn(&shape, |ix| (ix[0] * 5 + ix[1]) as f64 / 14.0);
    let path = dir.path().join("a.pgm");
    write_pgm(&path, &img, PgmEncoding::Binary).unwrap();
    assert!(read_pgm(&path).unwrap().max_abs_diff(&img) <= 0.5 / 255.0);

    let set = vec![0, 3, 7, 14];
    let path = dir.path().join("set.txt");
    write_index_set(&path, &shape, &set).unwrap();
    assert_eq!(read_index_set(&path, &shape).unwrap(), set);
    assert!(read_pgm(&dir.path().join("missing.pgm")).is_err());
}

#[test]
fn selftest_exits_successfully() {
    let out = tvdd(&["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 5 && !text.contains("FAIL"), "{text}");
}

#[test]
fn bad_arguments_fail_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"experiment": "inpaint2d", "bogus": 1}"#).unwrap();
    let bad_pgm = dir.path().join("bad.pgm");
    std::fs::write(&bad_pgm, "P2\n2 2\n255\n1 2\n").unwrap();
    let out_dir = dir.path().join("o");
    let o = out_dir.to_str().unwrap();
    for args in [
        vec!["inpaint2d", "--config", cfg.to_str().unwrap(), "--out", o],
        vec!["inpaint2d", "--input", bad_pgm.to_str().unwrap(), "--out", o],
        vec!["cs-fourier", "--config", dir.path().join("none.json").to_str().unwrap(), "--out", o],
        vec!["interpolate1d", "--alpha", "-1", "--out", o],
        vec!["cs-fourier", "--fraction", "1.5", "--out", o],
        vec!["no-such-command"],
    ] {
        let out = tvdd(&args);
        assert!(!out.status.success(), "{args:?} should fail");
    }
    std::fs::write(&cfg, r#"{"experiment": "cs-fourier"}"#).unwrap();
    assert!(!tvdd(&["inpaint2d", "--config", cfg.to_str().unwrap(), "--out", o]).status.success());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "inpaint2d", "size": 12, "subdomains": 3, "overlap": 2, "solver": {"outer_iters": 4}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    let out = tvdd(&[
        "inpaint2d",
        "--config",
        cfg.to_str().unwrap(),
        "--subdomains",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out_dir);
    assert_eq!(r["shape"], serde_json::json!([12, 12]));
    assert_eq!(r["subdomains"], 2);
    assert_eq!(r["overlap"], 2);
    assert!(r["outer_iterations"].as_u64().unwrap() <= 4);
    for f in ["input.pgm", "mask.pgm", "observed.pgm", "reconstruction.pgm", "trace.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = tvdd(&[
            "cs-fourier",
            "--size",
            "16",
            "--low-block",
            "4",
            "--subdomains",
            "2",
            "--outer-iters",
            "5",
            "--seed",
            "11",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (
            std::fs::read(out_dir.join("reconstruction.pgm")).unwrap(),
            std::fs::read_to_string(out_dir.join("sampling_set.txt")).unwrap(),
            std::fs::read_to_string(out_dir.join("trace.csv")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn interpolation_writes_signals_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("i");
    let out = tvdd(&[
        "interpolate1d",
        "--length",
        "40",
        "--gap",
        "15",
        "25",
        "--overlap",
        "12",
        "--outer-iters",
        "10",
        "--no-ablation",
        "--snapshots",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = tvdd::io::read_csv(&out_dir.join("reconstruction.csv")).unwrap();
    assert_eq!(rec.len(), 40);
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,energy,increment_norm,max_component_norm,projection_residual"));
    let r = report(&out_dir);
    assert!(r["energy_non_increasing"].as_bool().unwrap());
    assert!(r["ablation"].is_null());
    let snaps = std::fs::read_dir(out_dir.join("snapshots")).unwrap().count();
    assert_eq!(snaps, r["outer_iterations"].as_u64().unwrap() as usize);
}
