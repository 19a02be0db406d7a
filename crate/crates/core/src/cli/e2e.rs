//! End-to-end command tests run in-process.

use std::fs;
use std::path::Path;

use clap::Parser;

use super::{main_with_args, run, Cli, CliError};

fn invoke(args: &[&str]) -> Result<(), CliError> {
    let mut full = vec!["mimo-adc"];
    full.extend_from_slice(args);
    run(Cli::try_parse_from(full).expect("arguments parse"))
}

fn config_message(r: Result<(), CliError>) -> String {
    match r {
        Err(CliError::Config(msg)) => msg,
        other => panic!("expected a config error, got {other:?}"),
    }
}

const SMALL: [&str; 11] = [
    "--bits",
    "1,3,inf",
    "--ebn0=-12:2:-4",
    "--channels",
    "4",
    "--vectors",
    "50",
    "--m",
    "32",
    "--k",
    "4",
];

fn small_sweep(out: &Path, extra: &[&str]) -> Vec<u8> {
    let mut args = vec!["sweep", "--out", out.to_str().unwrap()];
    args.extend(SMALL);
    args.extend_from_slice(extra);
    invoke(&args).unwrap();
    fs::read(out.join("sweep.csv")).unwrap()
}

#[test]
fn sweep_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let text = String::from_utf8(small_sweep(dir.path(), &[])).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "ebn0_db,bits,detector,modulation,m,k,bit_errors,bits_total,ber"
    );
    assert_eq!(lines.count(), 3 * 5);

    let csv = dir.path().join("sweep.csv");
    invoke(&[
        "plot",
        csv.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ])
    .unwrap();
    let svg = fs::read_to_string(dir.path().join("sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("full precision"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let sweep_with = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| small_sweep(dir.path(), &[]))
    };
    let first = sweep_with(1);
    assert_eq!(first, sweep_with(3));
    assert_eq!(first, sweep_with(1));
}

#[test]
fn seed_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let first = small_sweep(dir.path(), &[]);
    assert_ne!(first, small_sweep(dir.path(), &["--seed", "7"]));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "[system]\nm = 16\nk = 2\n[link]\nmod = \"16qam\"\nbits = [2, \"inf\"]\n[run]\nebn0 = \"0:5:10\"\nchannels = 2\nvectors = 10\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    invoke(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--detector",
        "mmse",
        "--out",
        out.to_str().unwrap(),
    ])
    .unwrap();
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert!(r.contains(",mmse,16qam,16,2,"), "{r}");
        assert_eq!(r.split(',').nth(7).unwrap(), (2 * 10 * 2 * 4).to_string());
    }
}

#[test]
fn degradation_flags_unreachable_target() {
    let dir = tempfile::tempdir().unwrap();
    invoke(&[
        "degradation",
        "--out",
        dir.path().to_str().unwrap(),
        "--m",
        "32",
        "--k",
        "4",
        "--bits",
        "1",
        "--ebn0=-10:5:10",
        "--channels",
        "2",
        "--vectors",
        "50",
        "--target-ber",
        "1e-9",
    ])
    .unwrap();
    let text = fs::read_to_string(dir.path().join("degradation.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "modulation,detector,bits,m,k,target_ber,degradation_db,achieved"
    );
    assert_eq!(lines.len(), 3, "1-bit row plus the added reference row");
    assert!(lines[1..].iter().all(|l| l.ends_with(",,false")), "{text}");
    assert!(dir.path().join("degradation_curves.csv").exists());

    let table = dir.path().join("degradation.csv");
    invoke(&[
        "plot",
        table.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ])
    .unwrap();
    assert!(dir.path().join("degradation.svg").exists());
}

#[test]
fn mscale_writes_degradation_schema() {
    let dir = tempfile::tempdir().unwrap();
    invoke(&[
        "mscale",
        "--out",
        dir.path().to_str().unwrap(),
        "--m",
        "16,32",
        "--k",
        "4",
        "--bits",
        "3",
        "--ebn0=-10:2:10",
        "--channels",
        "4",
        "--vectors",
        "100",
        "--target-ber",
        "1e-2",
    ])
    .unwrap();
    let text = fs::read_to_string(dir.path().join("mscale.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    let table = dir.path().join("mscale.csv");
    invoke(&[
        "plot",
        table.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ])
    .unwrap();
    let svg = fs::read_to_string(dir.path().join("mscale.svg")).unwrap();
    assert!(svg.contains("BS antennas M"));
}

#[test]
fn configuration_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let msg = config_message(invoke(&["sweep", "--out", out, "--m", "4", "--k", "8"]));
    assert!(msg.contains("`m`") || msg.contains("`k`"), "{msg}");
    let msg = config_message(invoke(&["sweep", "--out", out, "--bits", "9"]));
    assert!(msg.contains("`bits`"), "{msg}");
    let msg = config_message(invoke(&["sweep", "--out", out, "--mod", "8psk"]));
    assert!(msg.contains("8psk"), "{msg}");
    let msg = config_message(invoke(&["sweep", "--out", out, "--ebn0", "5:-1:0"]));
    assert!(msg.contains("`ebn0`"), "{msg}");

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[link]\nmodulation = \"qpsk\"\nadc = 3\n").unwrap();
    let msg = config_message(invoke(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out,
    ]));
    assert!(msg.contains("adc"), "{msg}");

    assert!(!dir.path().join("sweep.csv").exists());
}

#[test]
fn malformed_csv_reports_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(
        &csv,
        "ebn0_db,bits,detector,modulation,m,k,bit_errors,bits_total,ber\n0,1,zf,qpsk,100,10,1,10,0.1\n1,1,zf,qpsk,100,10,1,10,oops\n",
    )
    .unwrap();
    let msg = config_message(invoke(&[
        "plot",
        csv.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    assert!(msg.contains("row 3"), "{msg}");
    assert!(!dir.path().join("bad.svg").exists());
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| {
        let mut full = vec!["mimo-adc"];
        full.extend_from_slice(args);
        main_with_args(full)
    };

    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["sweep", "--m", "4", "--k", "8"]), 1);

    let missing_csv = dir.path().join("missing.csv");
    assert_eq!(code(&["plot", missing_csv.to_str().unwrap()]), 3);
    let missing_cfg = dir.path().join("missing.toml");
    assert_eq!(
        code(&["sweep", "--config", missing_cfg.to_str().unwrap()]),
        3
    );

    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let nested = blocker.join("sub");
    assert_eq!(
        code(&[
            "sweep",
            "--out",
            nested.to_str().unwrap(),
            "--m",
            "8",
            "--k",
            "2",
            "--ebn0",
            "0",
            "--channels",
            "1",
            "--vectors",
            "1",
        ]),
        3
    );
}
