//! End-to-end runs of the `sbltomo` binary and the experiment runners.

use std::fs;
use std::path::Path;
use std::process::Command;

use sbltomo::experiment::{
    read_pixels, run_invert, write_pixels, ExperimentConfig, ExperimentKind, Pixel,
};
use sbltomo::model::SteeringMatrix;
use sbltomo::sim::{generate_snapshot, NoiseSpec, RngSeed, Scatterer, Scene};
use sbltomo::{DVector, Error, C64};

fn sbltomo(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sbltomo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn angular_bias_run_writes_all_files_and_replays_from_its_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.txt");
    fs::write(&cfg, "# small run\nsamples = 12\n").unwrap();
    let first = tmp.path().join("first");
    let out = sbltomo(&[
        "angular-bias",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let samples = read(&first, "samples.csv");
    assert!(samples.starts_with("sample_index,method,slot,bias_deg,est_elevation,true_elevation\n"));
    assert_eq!(samples.lines().count(), 1 + 12 * 3 * 2);
    assert!(!samples.contains('\r'));
    let aggregate = read(&first, "aggregate.csv");
    assert_eq!(aggregate.lines().count(), 1 + 3 * 2);
    let summary = read(&first, "summary.txt");
    assert!(
        summary.contains("<=1")
            && summary.contains("<=3")
            && summary.contains("<=6")
            && summary.contains(">6")
    );

    // Replay from the manifest into another directory with more workers.
    let second = tmp.path().join("second");
    let out = sbltomo(&[
        "angular-bias",
        "--config",
        first.join("manifest.txt").to_str().unwrap(),
        "--workers",
        "4",
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(samples, read(&second, "samples.csv"));
    assert_eq!(aggregate, read(&second, "aggregate.csv"));
}

#[test]
fn config_errors_name_the_line_and_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.txt");
    fs::write(&cfg, "samples = 3\nlooks = lots\n").unwrap();
    let out = sbltomo(&[
        "angular-bias",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.txt:2") && err.contains("looks"), "{err}");

    fs::write(&cfg, "experiment = superres\n").unwrap();
    let out = sbltomo(&["trace-prior", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
}

#[test]
fn trace_prior_emits_the_initialization_and_finds_both_scatterers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sbltomo(&["trace-prior", "--out", tmp.path().to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trace = read(tmp.path(), "trace.csv");
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iteration,grid_index,elevation_m,w"));
    let initial: Vec<&str> = lines
        .clone()
        .take_while(|l| l.starts_with("0,"))
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(initial.len(), 301);
    assert!(initial.iter().all(|w| *w == initial[0]));
    let summary = read(tmp.path(), "summary.txt");
    assert!(
        summary.contains("true grid indices: [100, 118]"),
        "{summary}"
    );
    assert!(
        summary.contains("largest local maxima of w: [100, 118]"),
        "{summary}"
    );
}

fn invert_config() -> (ExperimentConfig, SteeringMatrix) {
    let cfg = ExperimentConfig::preset(ExperimentKind::Invert);
    let r = SteeringMatrix::build(&cfg.geometry().unwrap(), &cfg.grid().unwrap()).unwrap();
    (cfg, r)
}

#[test]
fn invert_round_trip_recovers_generated_scatterers() {
    let (cfg, r) = invert_config();
    let pixels: Vec<Pixel> = [(57.0, 1.0), (212.0, 0.5)]
        .iter()
        .enumerate()
        .map(|(i, &(s, a))| {
            let scene = Scene::new(vec![Scatterer::new(s, a, 1.2)], true);
            Pixel {
                id: format!("px{i}"),
                g: generate_snapshot(
                    &scene,
                    &r,
                    &NoiseSpec::snr_db(30.0),
                    RngSeed::new(3, i as u64),
                )
                .unwrap(),
            }
        })
        .chain(std::iter::once(Pixel {
            id: "zero".into(),
            g: DVector::from_element(r.nrows(), C64::new(0.0, 0.0)),
        }))
        .collect();
    let text = write_pixels(&pixels).unwrap();
    assert_eq!(read_pixels(&text, r.nrows()).unwrap(), pixels);

    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("pixels.csv");
    fs::write(&input, &text).unwrap();
    let bundle = run_invert(&cfg, &input).unwrap();
    let table = bundle.table("scatterers.csv").unwrap();
    assert_eq!(
        table.header,
        [
            "pixel_id",
            "elevation_m",
            "amplitude_abs",
            "amplitude_phase",
            "n_iterations",
            "converged"
        ]
    );
    let strongest = |id: &str| {
        table
            .rows
            .iter()
            .filter(|row| row[0] == id)
            .max_by(|a, b| {
                a[2].parse::<f64>()
                    .unwrap()
                    .total_cmp(&b[2].parse::<f64>().unwrap())
            })
            .map(|row| row[1].parse::<f64>().unwrap())
    };
    assert_eq!(strongest("px0"), Some(57.0));
    assert_eq!(strongest("px1"), Some(212.0));
    assert!(table.rows.iter().all(|row| row[0] != "zero"));

    // Same through the binary.
    let out_dir = tmp.path().join("out");
    let out = sbltomo(&[
        "invert",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(read(&out_dir, "scatterers.csv"), table.to_csv().unwrap());
    assert!(read(&out_dir, "manifest.txt").contains("input = "));
}

#[test]
fn invert_reports_malformed_records_and_dimension_mismatch() {
    let (_, r) = invert_config();
    let n = r.nrows();
    let mut header = String::from("pixel_id");
    for k in 1..=n {
        header.push_str(&format!(",re_{k},im_{k}"));
    }
    let row = |id: &str, v: &str| format!("{id}{}\n", format!(",{v}").repeat(2 * n));
    let text = format!("{header}\n{}{}", row("a", "0.5"), row("b", "x"));
    match read_pixels(&text, n) {
        Err(Error::MalformedInput { record, .. }) => assert_eq!(record, 2),
        other => panic!("expected malformed record 2, got {other:?}"),
    }

    let short = "pixel_id,re_1,im_1,re_2,im_2\np,1,0,1,0\n";
    let err = read_pixels(short, n).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains(&n.to_string()) && msg.contains('2'), "{msg}");
    assert!(matches!(
        err,
        Error::DimensionMismatch {
            expected: 13,
            actual: 2,
            ..
        }
    ));
}
