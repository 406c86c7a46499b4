//! The binary end to end: exit codes, output files and reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ergodec(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergodec")).args(args).arg("--out").arg(out).output().unwrap()
}

fn with_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn exit_codes_follow_the_outcome() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(ergodec(&["sigma-finite"], &out).status.code(), Some(0));

    let unknown = with_config(tmp.path(), "bogus = 1\n");
    let run = ergodec(&["validate", "--config", &unknown], &out);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("bogus"));

    let mistyped = with_config(tmp.path(), "cocycle_trials = \"many\"\n");
    assert_eq!(ergodec(&["validate", "--config", &mistyped], &out).status.code(), Some(2));

    let too_big = with_config(tmp.path(), "conditional_level = 6\n");
    assert_eq!(ergodec(&["validate", "--config", &too_big], &out).status.code(), Some(3));

    // Eleven samples cannot meet a 1e-9 tolerance on a frequency of one half.
    let strict = with_config(tmp.path(), "samples = 11\ntolerance = 1e-9\n");
    assert_eq!(ergodec(&["kolmogorov", "--config", &strict], &out).status.code(), Some(1));
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("FAIL"));

    let missing = tmp.path().join("absent.toml");
    assert_eq!(ergodec(&["validate", "--config", missing.to_str().unwrap()], &out).status.code(), Some(4));
}

#[test]
fn reruns_are_byte_identical_and_csv_matches_json() {
    let tmp = tempfile::tempdir().unwrap();
    let config = with_config(tmp.path(), "samples = 300\nwindow = 4096\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let run = ergodec(&["definetti", "--config", &config, "--seed", "5", "--workers", workers], dir);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 4);
    for name in &names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?} differs");
    }

    let record: serde_json::Value = serde_json::from_slice(&fs::read(a.join("result.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 5);
    for (table, entries) in record["tables"].as_object().unwrap() {
        let mut reader = csv::Reader::from_path(a.join(format!("{table}.csv"))).unwrap();
        let rows: Vec<_> = reader.records().map(Result::unwrap).collect();
        let entries = entries.as_array().unwrap();
        assert_eq!(rows.len(), entries.len());
        for (row, entry) in rows.iter().zip(entries) {
            assert_eq!(&row[0], entry["name"].as_str().unwrap());
            assert_eq!(row[1].parse::<f64>().unwrap().to_bits(), entry["value"].as_f64().unwrap().to_bits());
            match entry["stderr"].as_f64() {
                Some(se) => assert_eq!(row[4].parse::<f64>().unwrap().to_bits(), se.to_bits()),
                None => assert!(row[4].is_empty()),
            }
        }
    }
}

#[test]
fn seed_flag_overrides_config_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = with_config(tmp.path(), "seed = 3\n");
    let out = tmp.path().join("out");
    assert!(ergodec(&["sigma-finite", "--config", &config, "--seed", "9"], &out).status.success());
    let record: serde_json::Value = serde_json::from_slice(&fs::read(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 9);
}
