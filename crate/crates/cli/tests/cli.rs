use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use benford_core::kernel::{Digit, DEFAULT_LIMBS};
use benford_core::sources::{Family, SequenceKind, StreamMeta};
use benford_core::store::{read_digits, DigitWriter};

fn benford(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_benford"))
        .current_dir(dir)
        .env_remove("BENFORD_DATA_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn generate_mersenne_20() {
    let dir = tempfile::tempdir().unwrap();
    let o = benford(
        dir.path(),
        &["generate", "--seq", "mersenne", "-n", "20", "-o", "m.bdig"],
    );
    assert_eq!(code(&o), 0, "{o:?}");
    let s = read_digits(&dir.path().join("m.bdig")).unwrap();
    assert_eq!(
        s.values().collect::<Vec<_>>(),
        [3, 7, 3, 1, 2, 8, 1, 5, 8, 5, 2, 1, 2, 8, 1, 9, 5, 2, 1, 2]
    );
}

#[test]
fn random_mersenne_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for (name, seed) in [("a", "42"), ("b", "42"), ("c", "43")] {
        let o = benford(
            dir.path(),
            &[
                "generate",
                "--seq",
                "random-mersenne",
                "-n",
                "1000",
                "--seed",
                seed,
                "-o",
                name,
            ],
        );
        assert_eq!(code(&o), 0, "{o:?}");
    }
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn output_does_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    for seq in ["factorial", "pow2-nlogn", "mersenne"] {
        for t in ["1", "4"] {
            let out = format!("{seq}-{t}");
            let o = benford(
                dir.path(),
                &[
                    "--threads",
                    t,
                    "generate",
                    "--seq",
                    seq,
                    "-n",
                    "300000",
                    "-o",
                    &out,
                ],
            );
            assert_eq!(code(&o), 0, "{o:?}");
        }
        let read = |t: &str| fs::read(dir.path().join(format!("{seq}-{t}"))).unwrap();
        assert_eq!(read("1"), read("4"), "{seq}");
    }
}

#[test]
fn interrupted_generation_resumes_to_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for seq in ["primorial", "npown"] {
        let full = format!("{seq}.full");
        let part = format!("{seq}.part");
        let resume = format!("{seq}.resume.json");
        let args = ["generate", "--seq", seq, "-n", "250001"];
        let o = benford(dir.path(), &[&args[..], &["-o", &full]].concat());
        assert_eq!(code(&o), 0);
        for stop in ["1", "77777", "250000"] {
            let o = benford(
                dir.path(),
                &[
                    &args[..],
                    &["-o", &part, "--resume", &resume, "--stop-at", stop],
                ]
                .concat(),
            );
            assert_eq!(code(&o), 0, "{o:?}");
            assert!(dir.path().join(&resume).exists());
        }
        let o = benford(
            dir.path(),
            &[&args[..], &["-o", &part, "--resume", &resume]].concat(),
        );
        assert_eq!(code(&o), 0, "{o:?}");
        assert!(!dir.path().join(&resume).exists());
        assert_eq!(
            fs::read(dir.path().join(&full)).unwrap(),
            fs::read(dir.path().join(&part)).unwrap(),
            "{seq}"
        );
    }
}

#[test]
fn resume_file_for_other_run_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = benford(
        dir.path(),
        &[
            "generate",
            "--seq",
            "pow2",
            "-n",
            "100",
            "--resume",
            "r.json",
            "--stop-at",
            "50",
        ],
    );
    assert_eq!(code(&o), 0);
    let o = benford(
        dir.path(),
        &[
            "generate", "--seq", "pow2", "-n", "101", "--resume", "r.json",
        ],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn waits_on_pow2_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = benford(
        dir.path(),
        &["generate", "--seq", "pow2", "-n", "1000000", "-o", "p.bdig"],
    );
    assert_eq!(code(&o), 0);
    let o = benford(dir.path(), &["analyze", "waits", "-d", "1", "-i", "p.bdig"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let gaps: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(gaps, ["3", "4"]);
}

#[test]
fn counts_json_and_pipe_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = benford(
        dir.path(),
        &["generate", "--seq", "factorial", "-n", "5000", "-o", "f"],
    );
    assert_eq!(code(&o), 0);
    let from_file = benford(
        dir.path(),
        &["analyze", "counts", "-i", "f", "--format", "json"],
    );
    let piped = benford(
        dir.path(),
        &[
            "analyze",
            "counts",
            "--pipe",
            "--seq",
            "factorial",
            "-n",
            "5000",
            "--format",
            "json",
        ],
    );
    assert_eq!(code(&from_file), 0);
    assert_eq!(stdout(&from_file), stdout(&piped));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&from_file)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 9);
    let total: u64 = rows.iter().map(|r| r["observed"].as_u64().unwrap()).sum();
    assert_eq!(total, 5000);
}

#[test]
fn checkpoint_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.csv");
    let o = benford(
        dir.path(),
        &[
            "analyze",
            "zscore",
            "--pipe",
            "--seq",
            "mersenne",
            "-n",
            "20000",
            "--checkpoints",
            "-o",
            out.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0, "{o:?}");
    let text = fs::read_to_string(&out).unwrap();
    let ns: Vec<u64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    // checkpoints 1050, 1102, …, 19799, then N itself; nine rows each
    assert_eq!(ns.first(), Some(&1050));
    assert_eq!(ns.last(), Some(&20000));
    assert_eq!(ns.len() % 9, 0);
    assert!(ns.windows(2).all(|w| w[0] <= w[1]));

    let o = benford(
        dir.path(),
        &[
            "analyze", "tvd", "--pipe", "--seq", "pow2", "-n", "1000", "-k", "3",
        ],
    );
    assert_eq!(stdout(&o).lines().collect::<Vec<_>>()[0], "n,k,tvd");
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("1000,3,"));
}

#[test]
fn data_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_benford"))
            .current_dir(dir.path())
            .env("BENFORD_DATA_DIR", &data)
            .args(args)
            .output()
            .unwrap()
    };
    let o = run(&["generate", "--seq", "npown", "-n", "100"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert!(data.join("npown-100.bdig").exists());
    let o = run(&["analyze", "counts", "--seq", "npown", "-n", "100"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert_eq!(stdout(&o).lines().count(), 10);
}

#[test]
fn verify_examples() {
    let dir = tempfile::tempdir().unwrap();
    for (seq, n) in [
        ("mersenne", "10000"),
        ("factorial", "5000"),
        ("pow2", "10000"),
    ] {
        let o = benford(dir.path(), &["verify", "--seq", seq, "-n", n]);
        assert_eq!(code(&o), 0, "{o:?}");
        assert!(stdout(&o).contains(", 0 mismatches"), "{}", stdout(&o));
    }
    let o = benford(
        dir.path(),
        &[
            "verify",
            "--seq",
            "random-mersenne",
            "--seed",
            "9",
            "-n",
            "2000",
            "--base",
            "7",
        ],
    );
    assert_eq!(code(&o), 0, "{o:?}");
}

#[test]
fn verify_reports_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.bdig");
    let meta = StreamMeta {
        kind: SequenceKind::decimal(Family::Pow2).unwrap(),
        count: 10,
        limbs: DEFAULT_LIMBS,
    };
    // 2^10 = 1024, not 9…
    let v = [2, 4, 8, 1, 3, 6, 1, 2, 5, 9];
    let digits: Vec<Digit> = v.iter().map(|&d| Digit::new(d, 10).unwrap()).collect();
    let mut w = DigitWriter::create(&path, meta).unwrap();
    w.push(&digits).unwrap();
    w.finish().unwrap();
    let o = benford(dir.path(), &["verify", "-i", "bad.bdig"]);
    assert_eq!(code(&o), 5, "{o:?}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("n=10"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&[&str], i32)] = &[
        (&["generate", "-n", "5"], 2),
        (&["generate", "--seq", "pow2", "--seed", "1", "-n", "5"], 2),
        (&["generate", "--seq", "random-mersenne", "-n", "5"], 2),
        (&["generate", "--seq", "pow2", "-n", "5", "--base", "8"], 2),
        (&["generate", "--seq", "pow2", "-n", "5", "--limbs", "2"], 2),
        (&["generate", "--seq", "cubes", "-n", "5"], 2),
        (
            &[
                "analyze", "counts", "--pipe", "--seq", "pow2", "-n", "9", "-k", "5",
            ],
            2,
        ),
        (
            &["analyze", "histogram", "--pipe", "--seq", "pow2", "-n", "9"],
            2,
        ),
        (&["analyze", "counts", "-i", "missing.bdig"], 3),
        (&["verify", "--seq", "pow2", "-n", "10001"], 2),
        (&["frobnicate"], 2),
    ];
    for (args, want) in cases {
        let o = benford(dir.path(), args);
        assert_eq!(code(&o), *want, "{args:?}: {o:?}");
    }
    fs::write(dir.path().join("junk.bdig"), b"not a digit file at all, no").unwrap();
    let o = benford(dir.path(), &["analyze", "counts", "-i", "junk.bdig"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn delta_log_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = benford(
        dir.path(),
        &["delta-log", "--seq", "pow2", "--from", "5", "-n", "3"],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(
        stdout(&o),
        "n,u\n5,3.010300e-1\n6,3.010300e-1\n7,3.010300e-1\n"
    );
}
