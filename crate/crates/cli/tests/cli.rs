use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bclm_cli::format::{build_ensemble, ensemble_record, parse_file, read_file, LoadedFile, SolutionFile};
use bclm_core::acs::seed_ensemble;
use bclm_core::analysis::eps_max;
use bclm_core::matcore::{nuclear_norm, HermitianMatrix};
use bclm_core::sdp::{matrix_equality, solve_sdp, SdpOptions, SdpProblem};
use bclm_core::subsolvers::{optimize_measurements, optimize_states, StepOptions};
use bclm_core::{evaluate, SolveConfig, SolveResult};
use proptest::prelude::*;

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/golden_d3_n3.json")
}

fn bclm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bclm"))
        .args(args)
        .env_remove("BCLM_JOBS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fake_result(cfg: &SolveConfig, restart: usize) -> SolveResult {
    let best = seed_ensemble(cfg, restart).unwrap();
    let breakdown = evaluate(&best).unwrap();
    SolveResult {
        eps_max: eps_max(&breakdown, cfg.n),
        trace: vec![breakdown.bound],
        half_step_trace: vec![breakdown.bound],
        restart_bounds: vec![Some(breakdown.bound)],
        lower_bound_ok: true,
        partially_optimal: false,
        rounds: 0,
        restart_index: restart,
        best,
        breakdown,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solution_files_round_trip_exactly(
        seed in any::<u64>(),
        d in 2usize..=4,
        n in 2usize..=5,
        eps_bar in 0.0f64..0.01,
        free in any::<bool>(),
    ) {
        let cfg = SolveConfig { d, n, eps_bar, seed, free_reference: free, ..Default::default() };
        let res = fake_result(&cfg, (seed % 7) as usize);
        let file = SolutionFile::from_result(&cfg, &res);
        let parsed = match parse_file(&file.to_json()).unwrap() {
            LoadedFile::Solution(f) => *f,
            LoadedFile::Bare(_) => panic!("lost schema_version"),
        };
        prop_assert_eq!(&parsed, &file);
        let rebuilt = build_ensemble(&parsed.ensemble).unwrap();
        prop_assert_eq!(&rebuilt, &res.best);
        prop_assert_eq!(evaluate(&rebuilt).unwrap(), res.breakdown);
    }
}

#[test]
fn bare_ensemble_accepts_either_pair_order() {
    let cfg = SolveConfig { d: 3, n: 3, seed: 5, ..Default::default() };
    let ens = seed_ensemble(&cfg, 0).unwrap();
    let mut rec = ensemble_record(&ens);
    for m in &mut rec.measurements {
        m.pair.swap(0, 1);
        let e = m.elements.as_mut().unwrap();
        e.swap(0, 1);
    }
    let rebuilt = build_ensemble(&rec).unwrap();
    assert_eq!(evaluate(&rebuilt).unwrap(), evaluate(&ens).unwrap());
}

#[test]
fn missing_and_duplicate_pairs_are_all_reported() {
    let cfg = SolveConfig { d: 2, n: 3, seed: 2, ..Default::default() };
    let mut rec = ensemble_record(&seed_ensemble(&cfg, 0).unwrap());
    rec.measurements[2] = rec.measurements[0].clone();
    rec.states[1][0][0][0] += 0.5;
    let issues = build_ensemble(&rec).unwrap_err();
    assert!(issues.iter().any(|s| s.contains("state 2")), "{issues:?}");
    assert!(issues.iter().any(|s| s.contains("more than once")), "{issues:?}");
    assert!(issues.iter().any(|s| s.contains("no measurement")), "{issues:?}");
}

#[test]
fn golden_design_evaluates_to_reference_numbers() {
    let out = bclm(&["eval", golden_path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("bound        0.80"), "{text}");

    let ens = build_ensemble(read_file(&golden_path()).unwrap().ensemble()).unwrap();
    let b = evaluate(&ens).unwrap();
    assert!((b.numerator_a - 1.2018).abs() < 2e-3);
    assert!((b.denominator_b - 1.5003).abs() < 2e-3);
    assert!((b.bound - 0.8011).abs() < 2e-3);
}

#[test]
fn golden_overlap_matches_epigraph_program() {
    let ens = build_ensemble(read_file(&golden_path()).unwrap().ensemble()).unwrap();
    let d = ens.dim();
    let diff = ens.reference().matrix() - ens.states()[0].matrix();
    // ‖Δ‖_* = min tr(P + N) subject to P − N = Δ, P, N ⪰ 0.
    let eye = HermitianMatrix::identity(d);
    let p = SdpProblem::new(vec![d, d], vec![eye.clone(), eye], matrix_equality(&[(0, 1.0), (1, -1.0)], &diff)).unwrap();
    let sol = solve_sdp(&p, &SdpOptions::default()).unwrap();
    assert!((sol.primal_obj - nuclear_norm(&diff)).abs() < 1e-6);
}

#[test]
fn golden_design_is_nearly_stationary() {
    let ens = build_ensemble(read_file(&golden_path()).unwrap().ensemble()).unwrap();
    let opts = StepOptions::default();
    let m = optimize_measurements(&ens, &opts).unwrap();
    let sum_a: f64 = evaluate(&m).unwrap().antidist.iter().map(|(_, a)| a).sum();
    assert!(sum_a <= 0.2018 + 1e-3, "Σ𝒜 = {sum_a}");
    let s = optimize_states(&ens, false, &opts).unwrap();
    let bound = evaluate(&s).unwrap().bound;
    assert!(bound <= 0.8011 + 2e-3, "bound {bound}");
}

#[test]
fn solve_then_eval_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let p = path.to_str().unwrap();
    let out = bclm(&["solve", "--d", "2", "--n", "3", "--restarts", "2", "--seed", "3", "--out", p]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(bclm(&["eval", p]).status.code(), Some(0));

    // Break completeness of the pair (2, 1) measurement by 1e-3.
    let mut file = match read_file(&path).unwrap() {
        LoadedFile::Solution(f) => *f,
        LoadedFile::Bare(_) => unreachable!(),
    };
    let rec = &mut file.ensemble.measurements[0];
    let label = format!("pair ({}, {})", rec.pair[0], rec.pair[1]);
    rec.elements.as_mut().unwrap()[0][0][0][0] += 1e-3;
    file.write(&path).unwrap();
    let out = bclm(&["eval", p]);
    assert_eq!(out.status.code(), Some(3));
    let text = stdout(&out);
    assert!(text.contains(&label), "{text}");
}

#[test]
fn tampered_breakdown_is_flagged() {
    let cfg = SolveConfig { d: 2, n: 2, seed: 1, ..Default::default() };
    let mut file = SolutionFile::from_result(&cfg, &fake_result(&cfg, 0));
    file.breakdown.bound *= 0.9;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    file.write(&path).unwrap();
    assert_eq!(bclm(&["eval", path.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn exit_codes_for_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{ not json").unwrap();
    assert_eq!(bclm(&["eval", junk.to_str().unwrap()]).status.code(), Some(1));
    std::fs::write(&junk, r#"{"schema_version": "9"}"#).unwrap();
    assert_eq!(bclm(&["eval", junk.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(bclm(&["solve", "--d", "1", "--n", "3"]).status.code(), Some(1));
    assert_eq!(bclm(&["solve", "--d", "3"]).status.code(), Some(1));
    assert_eq!(bclm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bclm(&["--help"]).status.code(), Some(0));
}

#[test]
fn deterministic_sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let csv = dir.path().join(name);
        let sols = dir.path().join(format!("{name}.d"));
        let out = bclm(&[
            "sweep",
            "--d-range",
            "2:3",
            "--n-range",
            "2:3",
            "--restarts",
            "2",
            "--seed",
            "17",
            "--deterministic",
            "--csv",
            csv.to_str().unwrap(),
            "--solutions-dir",
            sols.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        (std::fs::read_to_string(csv).unwrap(), sols)
    };
    let (a, sols) = run("a.csv");
    let (b, _) = run("b.csv");
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some("d,n,eps_bar,best_bound,eps_max,restarts,wall_time_ms,rounds"));
    assert_eq!(lines.count(), 4);
    for entry in std::fs::read_dir(sols).unwrap() {
        assert_eq!(bclm(&["eval", entry.unwrap().path().to_str().unwrap()]).status.code(), Some(0));
    }
}

#[test]
fn bounds_command_lists_floor_and_literature() {
    let out = bclm(&["bounds", "--d", "4", "--n", "16"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("0.0625"), "{text}");
    assert!(text.contains("0.5"), "{text}");
}

#[test]
fn jobs_env_must_be_numeric() {
    let out = Command::new(env!("CARGO_BIN_EXE_bclm"))
        .args(["bounds", "--d", "3", "--n", "3"])
        .env("BCLM_JOBS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_with_one_trial_writes_one_row_per_n() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = bclm(&["bench", "--d", "2", "--n-range", "2:4", "--trials", "1", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(csv).unwrap();
    let mut rows: Vec<&str> = text.lines().skip(1).collect();
    rows.sort();
    assert_eq!(rows.len(), 3);
    for (k, row) in rows.iter().enumerate() {
        assert!(row.starts_with(&format!("{},0,", k + 2)), "{row}");
    }
    assert_eq!(stdout(&out).lines().filter(|l| l.contains("mean_ms")).count(), 3);
}
