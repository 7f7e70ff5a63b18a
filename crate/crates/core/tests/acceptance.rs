//! Acceptance battery: thirteen numbered criteria, each printing one
//! `criterion NN <label> ... PASS|FAIL` line. Tolerances are pinned in the
//! assertions; quantities with closed-form predictions are compared against
//! them, bounds are checked as bounds, and re-runs must be byte-identical.

use bsvylab::bsvy::{
    bsvy_limit, bsvy_value, FunctionalConfig, HQuadrature, LambdaGrid,
};
use bsvylab::calculus::{limit_symbol_oracle, SymbolWeighting};
use bsvylab::dyadic::{
    level_family_from_scores, minimizing_polynomial, near_best_ratio, qx_check, score_cubes,
    Domain, FamilyParams,
};
use bsvylab::field::{AnalyticField, GridSpec};
use bsvylab::harness::{run_suite, CheckRecord, HarnessConfig};
use bsvylab::spaces::SpaceSpec;
use bsvylab::weights::Cube;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

fn criterion<F>(number: u32, label: &str, body: F)
where
    F: FnOnce() + std::panic::UnwindSafe,
{
    let result = std::panic::catch_unwind(body);
    let status = if result.is_ok() { "PASS" } else { "FAIL" };
    println!("\ncriterion {number:02} {label} ... {status}");
    if let Err(p) = result {
        std::panic::resume_unwind(p);
    }
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> HarnessConfig {
    let path = config_dir().join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    HarnessConfig::from_toml(&text).unwrap_or_else(|e| panic!("parsing {name}: {e}"))
}

fn run_config(name: &str) -> Vec<CheckRecord> {
    run_suite(&load(name), 1.0, false).unwrap_or_else(|e| panic!("running {name}: {e}"))
}

fn assert_all_pass(name: &str, recs: &[CheckRecord]) {
    for r in recs {
        assert!(
            r.pass,
            "{name}: `{}` failed (computed {}, predicted {}, tol {})",
            r.name, r.computed, r.predicted, r.tolerance
        );
    }
}

fn interval(a: f64, b: f64) -> Cube {
    Cube::new(vec![a], b - a).unwrap()
}

// -------------------------------------------------------------------------

#[test]
fn criterion_01_limiting_identity() {
    criterion(1, "limiting identity (plateau vs closed form)", || {
        let f = AnalyticField::gaussian_bump(1, 1.0, vec![0]).unwrap();
        for k in [1u32, 2] {
            for p in [1.0f64, 2.0] {
                for q in [1.0f64, 2.0] {
                    let mut gammas = vec![1.0f64];
                    if p > 1.0 {
                        gammas.push(-2.0);
                    }
                    for gamma in gammas {
                        let lambda = if gamma > 0.0 {
                            LambdaGrid { min: 1e-3, max: 1e2, per_decade: 8 }
                        } else {
                            LambdaGrid { min: 1e-4, max: 1.0, per_decade: 8 }
                        };
                        let cfg = FunctionalConfig {
                            k,
                            ell: k,
                            q,
                            gamma,
                            space: SpaceSpec::Lebesgue { p },
                            lambda,
                            h_quad: HQuadrature {
                                directions: 2,
                                radial_per_decade: 48,
                                r_min: 1e-8,
                                r_max: 60.0,
                            },
                            grid: GridSpec::new(1, 4096, 4.0).unwrap(),
                        };
                        let t0 = Instant::now();
                        let res = bsvy_limit(&f, &cfg, SymbolWeighting::Multinomial)
                            .unwrap_or_else(|e| {
                                panic!("k={k} p={p} q={q} gamma={gamma}: {e}")
                            });
                        let dt = t0.elapsed();
                        assert!(
                            res.relative_error <= 0.05,
                            "k={k} p={p} q={q} gamma={gamma}: relative error {} \
                             (limit {}, predicted {})",
                            res.relative_error,
                            res.limit,
                            res.predicted
                        );
                        assert!(
                            dt.as_secs() < 60,
                            "k={k} p={p} q={q} gamma={gamma}: took {dt:?}"
                        );
                    }
                }
            }
        }
        // Dimension 2 at 2^9 points per axis, 10% tolerance, under 10 min.
        let f2 = AnalyticField::gaussian_bump(2, 1.0, vec![0, 0]).unwrap();
        let cfg2 = FunctionalConfig {
            k: 1,
            ell: 1,
            q: 2.0,
            gamma: 1.0,
            space: SpaceSpec::Lebesgue { p: 2.0 },
            lambda: LambdaGrid { min: 1e1, max: 1e2, per_decade: 8 },
            h_quad: HQuadrature {
                directions: 32,
                radial_per_decade: 32,
                r_min: 1e-8,
                r_max: 60.0,
            },
            grid: GridSpec::new(2, 512, 4.0).unwrap(),
        };
        let t0 = Instant::now();
        let res2 = bsvy_limit(&f2, &cfg2, SymbolWeighting::Multinomial).unwrap();
        let dt = t0.elapsed();
        assert!(
            res2.relative_error <= 0.10,
            "dim 2: relative error {} (limit {}, predicted {})",
            res2.relative_error,
            res2.limit,
            res2.predicted
        );
        assert!(dt.as_secs() < 600, "dim 2 case took {dt:?}");
    });
}

#[test]
fn criterion_02_equivalence_window() {
    criterion(2, "equivalence ratio window across catalog and dilations", || {
        for name in [
            "equivalence_n1_pos.toml",
            "equivalence_n1_neg.toml",
            "equivalence_n2_pos.toml",
            "equivalence_n2_neg.toml",
        ] {
            let recs = run_config(name);
            let pairs = recs
                .iter()
                .filter(|r| r.name.starts_with("equiv_ratio"))
                .count();
            assert!(pairs >= 15, "{name}: only {pairs} ratio pairs");
            assert_all_pass(name, &recs);
            let window = recs
                .iter()
                .find(|r| r.name == "equiv_window_max_over_min")
                .expect("window record");
            assert!(
                window.computed <= 4.0,
                "{name}: ratio window {}",
                window.computed
            );
        }
    });
}

#[test]
fn criterion_03_dilation_covariance() {
    criterion(3, "exact dilation covariance at random (a, lambda)", || {
        let hc = load("equivalence_n1_pos.toml");
        let f = AnalyticField::gaussian_bump(1, 1.0, vec![0]).unwrap();
        let cfg = hc
            .functional
            .build(hc.function.dim, &hc.space, 1.0)
            .unwrap();
        let e = cfg.threshold_exponent();
        let mut rng = ChaCha8Rng::seed_from_u64(20260816);
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let a: f64 = rng.gen_range(0.5..2.0);
            let lambda: f64 = rng.gen_range(0.05..5.0);
            let lhs = bsvy_value(&f.dilate(a).unwrap(), lambda, &cfg.dilated(a)).unwrap();
            let rhs = a.powf(cfg.k as f64 - 1.0 / 2.0)
                * bsvy_value(&f, lambda * a.powf(-e), &cfg).unwrap();
            let dev = (lhs - rhs).abs() / rhs.abs().max(1e-12);
            worst = worst.max(dev);
        }
        assert!(worst <= 0.02, "max relative deviation {worst}");
    });
}

#[test]
fn criterion_04_sharpness_growth_and_control() {
    criterion(4, "endpoint growth of truncations with saturating control", || {
        let t0 = Instant::now();
        let recs = run_config("sharpness.toml");
        assert_all_pass("sharpness.toml", &recs);
        let growth = recs
            .iter()
            .find(|r| r.name == "sharpness_growth")
            .expect("growth record");
        assert!(growth.computed > 1.5, "growth {}", growth.computed);
        let ctrl = run_config("sharpness_control.toml");
        assert_all_pass("sharpness_control.toml", &ctrl);
        let sat = ctrl
            .iter()
            .find(|r| r.name == "sharpness_control_growth")
            .expect("control record");
        assert!(sat.computed < 1.1, "control growth {}", sat.computed);
        assert!(t0.elapsed().as_secs() < 300, "took {:?}", t0.elapsed());
    });
}

#[test]
fn criterion_05_truncation_defect_regression() {
    criterion(5, "defect grows affinely in log(1/eps), zero on low degree", || {
        let recs = run_config("defect.toml");
        assert_all_pass("defect.toml", &recs);
        let slopes = recs
            .iter()
            .filter(|r| r.name.starts_with("defect_slope"))
            .count();
        let fits = recs
            .iter()
            .filter(|r| r.name.starts_with("defect_r2"))
            .count();
        assert_eq!(slopes, 3, "expected 3 smooth fields");
        assert_eq!(fits, 3);
        for r in &recs {
            if r.name.starts_with("defect_r2") {
                assert!(r.computed > 0.99, "{}: R^2 {}", r.name, r.computed);
            }
        }
        assert!(recs.iter().any(|r| r.name == "defect_zero_on_low_degree"));
    });
}

#[test]
fn criterion_06_sparse_battery() {
    criterion(6, "sparse aggregates finite and dilation-stable", || {
        let recs = run_config("sparse.toml");
        assert_all_pass("sparse.toml", &recs);
        let finite = recs
            .iter()
            .filter(|r| r.name.starts_with("sparse_finite"))
            .count();
        let windows: Vec<&CheckRecord> = recs
            .iter()
            .filter(|r| r.name.starts_with("sparse_dilation_window"))
            .collect();
        // 3 outer/size-exponent pairs x 2 weights x 2 orders x 3 dilations
        assert_eq!(finite, 36, "finite records");
        assert_eq!(windows.len(), 12, "window records");
        for w in windows {
            assert!(w.computed < 3.0, "{}: spread {}", w.name, w.computed);
        }
    });
}

#[test]
fn criterion_07_chain_ratio_bound() {
    criterion(7, "pointwise chain ratio within the geometric bound", || {
        let f = AnalyticField::gaussian_bump(1, 1.0, vec![0]).unwrap();
        let params = FamilyParams {
            beta: 0.0,
            k: 1,
            ell: 1,
            alpha: vec![0.0],
            j_min: -6,
            j_max: 3,
            box_half: 4.0,
        };
        let scores = score_cubes(&f, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut covered = 0u32;
        for _ in 0..200 {
            let lambda: f64 = rng.gen_range(0.005..0.3);
            let x = [rng.gen_range(-1.5..1.5)];
            let p = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
            let bound = 1.0 / (1.0 - 2f64.powf(-(p * (params.beta - 1.0).abs())));
            let fam = level_family_from_scores(&scores, lambda, &params);
            match qx_check(&fam, p, &x) {
                Ok((_, ratio)) => {
                    covered += 1;
                    assert!(
                        ratio <= bound * (1.0 + 1e-9),
                        "ratio {ratio} exceeds bound {bound} at lambda={lambda}, x={}",
                        x[0]
                    );
                    assert!(ratio >= 1.0 - 1e-9, "ratio {ratio} below 1");
                }
                Err(bsvylab::Error::Precondition(_)) => {}
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
        assert!(covered > 50, "only {covered} draws were covered");
    });
}

#[test]
fn criterion_08_minimizing_polynomials() {
    criterion(8, "projection idempotence, closed form, near-best constant", || {
        // Idempotence: a polynomial of the basis degree projects onto itself.
        let f1 = AnalyticField::polynomial(
            1,
            vec![(vec![2], 2.0), (vec![1], -1.0), (vec![0], 0.5)],
        );
        let d1 = Domain::Cube(interval(0.0, 1.0));
        let p1 = minimizing_polynomial(&f1, &d1, 2).unwrap();
        for t in [0.0, 0.3, 0.77, 1.0] {
            assert!(
                (p1.eval(&[t]) - f1.eval(&[t])).abs() <= 1e-12,
                "idempotence at {t}: {} vs {}",
                p1.eval(&[t]),
                f1.eval(&[t])
            );
        }
        let f2 = AnalyticField::polynomial(2, vec![(vec![1, 1], 2.0), (vec![0, 1], -1.0)]);
        let d2 = Domain::Cube(Cube::new(vec![-0.5, 0.25], 1.5).unwrap());
        let p2 = minimizing_polynomial(&f2, &d2, 2).unwrap();
        for pt in [[0.1, 0.9], [-0.4, 1.6], [0.7, 0.3]] {
            assert!(
                (p2.eval(&pt) - f2.eval(&pt)).abs() <= 1e-12,
                "idempotence (dim 2) at {pt:?}"
            );
        }
        // Closed form: degree-1 projection of x^2 on [0,1] is x - 1/6.
        let sq = AnalyticField::polynomial(1, vec![(vec![2], 1.0)]);
        let proj = minimizing_polynomial(&sq, &d1, 1).unwrap();
        for t in [0.0, 0.25, 0.5, 0.9, 1.0] {
            assert!(
                (proj.eval(&[t]) - (t - 1.0 / 6.0)).abs() <= 1e-10,
                "closed form at {t}: {}",
                proj.eval(&[t])
            );
        }
        // Near-best: projection error within a factor 10 of the
        // derivative-free minimizer, s <= 3 in dim 1 and s <= 2 in dim 2.
        let g1 = AnalyticField::gaussian_bump(1, 1.0, vec![0]).unwrap();
        for s in 0..=3u32 {
            let r = near_best_ratio(&g1, &Domain::Cube(interval(-0.9, 2.1)), s).unwrap();
            assert!((1.0..=10.0).contains(&r), "dim 1 s={s}: ratio {r}");
        }
        let g2 = AnalyticField::gaussian_bump(2, 0.9, vec![1, 0]).unwrap();
        let dom2 = Domain::Cube(Cube::new(vec![-0.8, -0.6], 1.7).unwrap());
        for s in 0..=2u32 {
            let r = near_best_ratio(&g2, &dom2, s).unwrap();
            assert!((1.0..=10.0).contains(&r), "dim 2 s={s}: ratio {r}");
        }
    });
}

#[test]
fn criterion_09_muckenhoupt_suite() {
    criterion(9, "unit constant exact, power dichotomy, monotonicity", || {
        let recs = run_config("weights.toml");
        assert_all_pass("weights.toml", &recs);
        let unit = recs
            .iter()
            .find(|r| r.name == "ap_constant_of_unit_weight")
            .expect("unit record");
        assert_eq!(unit.computed, 1.0, "unit weight constant must be exact");
        assert!(recs
            .iter()
            .any(|r| r.name.starts_with("ap_power_above_upper_critical")
                && r.computed.is_infinite()));
        assert!(recs.iter().any(|r| r.name == "ap_monotone_in_exponent"));
    });
}

#[test]
fn criterion_10_space_registry_coincidences() {
    criterion(10, "norm coincidences on random fields within 1%", || {
        let recs = run_config("spaces.toml");
        assert_all_pass("spaces.toml", &recs);
        for label in [
            "coincidence[lorentz_diagonal]",
            "coincidence[morrey_diagonal]",
            "coincidence[orlicz_power]",
            "coincidence[weighted_unit]",
            "coincidence[bbm_diagonal]",
        ] {
            let r = recs
                .iter()
                .find(|r| r.name == label)
                .unwrap_or_else(|| panic!("missing {label}"));
            assert!(r.computed <= 0.01, "{label}: deviation {}", r.computed);
        }
    });
}

#[test]
fn criterion_11_symbol_weighting_oracle() {
    criterion(11, "difference-symbol oracle selects the multinomial weighting", || {
        let probes = [
            AnalyticField::gaussian_bump(2, 1.0, vec![0, 0]).unwrap(),
            AnalyticField::gaussian_bump(2, 0.8, vec![1, 1]).unwrap(),
            AnalyticField::gaussian_bump(2, 1.2, vec![2, 0]).unwrap(),
        ];
        for (i, f) in probes.iter().enumerate() {
            let rep = limit_symbol_oracle(f, 2, &[0.3, -0.2], &[0.6, 0.8]).unwrap();
            assert_eq!(
                rep.winner,
                SymbolWeighting::Multinomial,
                "probe {i}: winner {:?}",
                rep.winner
            );
            assert!(
                rep.multinomial_residual_slope >= 1.0,
                "probe {i}: slope {}",
                rep.multinomial_residual_slope
            );
        }
        // The finding is recorded in the scenario report.
        let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("oracle_report");
        let status = Command::new(env!("CARGO_BIN_EXE_bsvylab"))
            .args(["run", "--config"])
            .arg(config_dir().join("calculus_oracles.toml"))
            .arg("--out-dir")
            .arg(&out)
            .status()
            .expect("spawning the scenario binary");
        assert_eq!(status.code(), Some(0), "oracle scenario exit code");
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap())
                .unwrap();
        let checks = report["checks"].as_array().expect("checks array");
        let winners: Vec<&serde_json::Value> = checks
            .iter()
            .filter(|c| {
                c["name"]
                    .as_str()
                    .is_some_and(|n| n.starts_with("oracle_winner_multinomial"))
            })
            .collect();
        assert_eq!(winners.len(), 3, "three recorded winner checks");
        for w in winners {
            assert_eq!(w["pass"], serde_json::Value::Bool(true));
        }
        assert_eq!(report["verdict"], serde_json::Value::Bool(true));
    });
}

#[test]
fn criterion_12_interpolation_modes() {
    criterion(12, "interpolation constants dilation-stable, endpoint consistent", || {
        let recs = run_config("gn.toml");
        assert_all_pass("gn.toml", &recs);
        let drifts: Vec<&CheckRecord> = recs
            .iter()
            .filter(|r| r.name.starts_with("gn_dilation_drift"))
            .collect();
        assert_eq!(drifts.len(), 3, "three parameter modes");
        for d in drifts {
            assert!(d.computed <= 2.0, "{}: drift {}", d.name, d.computed);
        }
        let endpoint = recs
            .iter()
            .find(|r| r.name == "gn_endpoint_vs_sup")
            .expect("endpoint record");
        let rel = (endpoint.computed - endpoint.predicted).abs()
            / endpoint.predicted.abs().max(1e-300);
        assert!(rel <= 0.01, "endpoint relative gap {rel}");
    });
}

#[test]
fn criterion_13_determinism_and_resolution() {
    criterion(13, "byte-identical re-runs and stable resolution doubling", || {
        let bin = env!("CARGO_BIN_EXE_bsvylab");
        let cfg = config_dir().join("limit_n1_verify.toml");
        let tmp = Path::new(env!("CARGO_TARGET_TMPDIR"));
        let (out_a, out_b) = (tmp.join("det_a"), tmp.join("det_b"));
        for out in [&out_a, &out_b] {
            // The scenario has verify_resolution on: exit 0 also certifies
            // that doubling every quadrature resolution moved no headline
            // number beyond its tolerance (exit 3 otherwise).
            let status = Command::new(bin)
                .args(["run", "--config"])
                .arg(&cfg)
                .arg("--out-dir")
                .arg(out)
                .status()
                .expect("spawning the scenario binary");
            assert_eq!(status.code(), Some(0), "scenario run exit code");
        }
        let strip = |dir: &Path| -> String {
            std::fs::read_to_string(dir.join("report.json"))
                .unwrap()
                .lines()
                .filter(|l| !l.contains("wall_time_ms"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(&out_a), strip(&out_b), "report.json differs");
        let csv_a = std::fs::read(out_a.join("checks.csv")).unwrap();
        let csv_b = std::fs::read(out_b.join("checks.csv")).unwrap();
        assert_eq!(csv_a, csv_b, "checks.csv differs");
        for out in [&out_a, &out_b] {
            let status = Command::new(bin)
                .args(["sweep", "--axis", "lambda", "--config"])
                .arg(&cfg)
                .arg("--out-dir")
                .arg(out)
                .status()
                .expect("spawning the sweep");
            assert_eq!(status.code(), Some(0), "sweep exit code");
        }
        let sw_a = std::fs::read(out_a.join("sweep_lambda.csv")).unwrap();
        let sw_b = std::fs::read(out_b.join("sweep_lambda.csv")).unwrap();
        assert_eq!(sw_a, sw_b, "sweep CSV differs");
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_a.join("report.json")).unwrap())
                .unwrap();
        assert!(report["checks"]
            .as_array()
            .unwrap()
            .iter()
            .any(|c| c["name"] == "resolution_doubling_consistent"
                && c["pass"] == serde_json::Value::Bool(true)));
    });
}
