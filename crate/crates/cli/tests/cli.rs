//! End-to-end CLI behavior: exit codes, determinism, and the scenario
//! catalog.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sparsegrad")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("sparsegrad-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn list_contains_required_scenarios() {
    let out = Command::new(bin()).arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["meyers-sparse", "vmo-sparse", "dini-sparse", "weighted-a2"] {
        assert!(text.contains(name), "missing scenario {name}");
    }
    // one header line plus at least eight scenarios
    assert!(text.lines().count() >= 9, "catalog too short:\n{text}");
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let dir = tmp("malformed");
    let cfg = dir.join("bad.cfg");
    write(&cfg, "[scenario\nname oops\n");
    let out = Command::new(bin())
        .arg("run")
        .arg(&cfg)
        .env("SPARSEGRAD_OUT", &dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.join("out").exists(), "outputs written on config error");

    // unknown scenario is also a config error
    let cfg2 = dir.join("unknown.cfg");
    write(&cfg2, "[scenario]\nname = no-such-scenario\n");
    let out = Command::new(bin())
        .arg("run")
        .arg(&cfg2)
        .env("SPARSEGRAD_OUT", &dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_invariant_exits_1_and_names_it() {
    // the rough checkerboard drifts under refinement, so the stability
    // check of the calibration scenario fails by design
    let dir = tmp("failing");
    let cfg = dir.join("rough.cfg");
    write(
        &cfg,
        "[scenario]\nname = dini-calibrate\nseed = 3\ndim = 2\nlevel = 3\ntrials = 3\n\
         [coefficient]\nkind = checkerboard\nalpha = 1\nbeta = 25\nperiod = 0.125\n\
         [exponents]\ndepth_cap = 2\n\n[output]\ndir = out\n",
    );
    let out = Command::new(bin())
        .arg("run")
        .arg(&cfg)
        .env("SPARSEGRAD_OUT", &dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("refinement-stability"),
        "stderr does not name the invariant: {err}"
    );
    let report = std::fs::read_to_string(dir.join("out/report.txt")).unwrap();
    assert!(report.contains("result: FAIL"));
}

#[test]
fn custom_domain_file_and_random_g() {
    // a hand-drawn mask (rows of 0/1 over the full grid) plus a random
    // nonnegative pairing function g
    let dir = tmp("custom-domain");
    let grid_side = 24usize; // dim 2, level 3
    let m = grid_side / 3;
    let mut rows = Vec::new();
    for y in 0..grid_side {
        let mut row = String::new();
        for x in 0..grid_side {
            // a fat plus-sign inside Q0
            let inside_q0 = (m..2 * m).contains(&x) && (m..2 * m).contains(&y);
            let arm_x = (m + 2..2 * m - 2).contains(&x);
            let arm_y = (m + 2..2 * m - 2).contains(&y);
            row.push(if inside_q0 && (arm_x || arm_y) { '1' } else { '0' });
        }
        rows.push(row);
    }
    let mask = dir.join("plus.mask");
    write(&mask, &(rows.join("\n") + "\n"));
    let cfg = dir.join("custom.cfg");
    write(
        &cfg,
        &format!(
            "[scenario]\nname = meyers-sparse\nseed = 4\ndim = 2\nlevel = 3\ntrials = 3\n\
             [coefficient]\nkind = checkerboard\nalpha = 1\nbeta = 4\nperiod = 0.25\n\
             [domain]\nkind = file\nfile = {}\n\n[data]\ng = random\n\n\
             [exponents]\ntheta = 0.5\n\n[output]\ndir = out\n",
            mask.display()
        ),
    );
    let out = Command::new(bin())
        .arg("run")
        .arg(&cfg)
        .env("SPARSEGRAD_OUT", &dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(dir.join("out/report.txt")).unwrap();
    assert!(report.contains("result: PASS"));
}

#[test]
fn deterministic_reruns_are_byte_identical() {
    let dir = tmp("determinism");
    let cfg = dir.join("small.cfg");
    write(
        &cfg,
        "[scenario]\nname = meyers-sparse\nseed = 42\ndim = 2\nlevel = 3\ntrials = 4\n\
         [coefficient]\nkind = checkerboard\nalpha = 1\nbeta = 4\nperiod = 0.25\n\
         [exponents]\ntheta = 0.5\nq_l = 2\nq_h = 4\n\n[output]\ndir = out\n",
    );
    let mut outputs = Vec::new();
    for round in ["a", "b"] {
        let root = dir.join(round);
        let out = Command::new(bin())
            .arg("run")
            .arg(&cfg)
            .env("SPARSEGRAD_OUT", &root)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let mut blob = Vec::new();
        for f in ["report.txt", "cubes.csv", "steps.csv", "grad.csv"] {
            blob.extend(std::fs::read(root.join("out").join(f)).unwrap());
        }
        outputs.push(blob);
    }
    assert_eq!(outputs[0], outputs[1], "re-run outputs differ");
}

#[test]
fn calibrate_prints_constants() {
    let out = Command::new(bin())
        .args(["calibrate", "identity", "square", "--level", "3", "--trials", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    for key in ["c_n", "K_M", "B = N_h", "C_w", "C_S", "C_inf"] {
        assert!(text.contains(key), "missing `{key}` in:\n{text}");
    }
}
