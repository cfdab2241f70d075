use std::time::Instant;

use gvasicek::estimators::{asymptotic_constants, IntegralMode};
use gvasicek::mc::{
    emit_report, read_replications_csv, records_to_rows, run_experiment, summarize, ExperimentConfig, ReplicationRow,
    ReportFormat, SummaryContext,
};
use gvasicek::{Fbm, VasicekParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn smoke() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{"kernel": {"name": "fbm", "H": 0.7}, "params": {"k": 1.0, "mu": 2.0},
            "T_list": [50], "dt": 0.05, "replications": 50, "master_seed": 42}"#,
    )
    .unwrap()
}

fn summary_json(cfg: &ExperimentConfig, threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let rows = pool.install(|| records_to_rows(&run_experiment(cfg).unwrap(), cfg).unwrap());
    summarize(&rows, &SummaryContext::for_config(cfg).unwrap()).unwrap().to_json().unwrap()
}

#[test]
fn smoke_config_is_quick() {
    let start = Instant::now();
    let cfg = smoke();
    let records = run_experiment(&cfg).unwrap();
    assert_eq!(records.len(), 50);
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn summary_is_identical_across_thread_counts() {
    let mut cfg = smoke();
    cfg.horizons = vec![20.0, 50.0];
    cfg.replications = 31;
    let one = summary_json(&cfg, 1);
    assert_eq!(one, summary_json(&cfg, 2));
    assert_eq!(one, summary_json(&cfg, 7));
}

#[test]
fn replications_round_trip_to_identical_summary() {
    let cfg = smoke();
    let rows = records_to_rows(&run_experiment(&cfg).unwrap(), &cfg).unwrap();
    let ctx = SummaryContext::for_config(&cfg).unwrap();
    let summary = summarize(&rows, &ctx).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&summary, &rows, ReportFormat::Csv, dir.path()).unwrap();
    let back = read_replications_csv(&dir.path().join("replications.csv")).unwrap();
    let again = summarize(&back, &ctx).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("summary.json")).unwrap(), again.to_json().unwrap());
}

#[test]
fn degenerate_noise_is_rejected() {
    let text = r#"{"kernel": {"name": "fbm", "H": 0.7}, "params": {"k": 1.0, "mu": 2.0, "sigma": 0.0},
                   "T_list": [50], "dt": 0.05, "replications": 50, "master_seed": 42}"#;
    let cfg = ExperimentConfig::from_json(text).unwrap();
    assert!(cfg.validate().is_err());
    assert!(run_experiment(&cfg).is_err());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let text = r#"{"kernel": {"name": "fbm", "H": 0.7}, "params": {"k": 1.0, "mu": 2.0},
                   "T_list": [50], "dt": 0.05, "replications": 50, "master_seed": 42, "extra": 1}"#;
    assert!(ExperimentConfig::from_json(text).is_err());
}

/// Errors drawn exactly from the claimed limit laws must pass every KS check
/// of the pipeline.
#[test]
fn synthetic_self_test_at_m_1000() {
    let params = VasicekParams::new(1.5, 2.0, 1.0).unwrap();
    let c = asymptotic_constants(&Fbm::new(0.7).unwrap(), params.k).unwrap();
    let ctx = SummaryContext { params, beta: 0.7, constants: Some(c) };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let horizon: f64 = 100.0;
    let (rm, rk) = (horizon.powf(0.3), horizon.sqrt());
    let mut draw = |v: f64| rng.sample::<f64, _>(StandardNormal) * v.sqrt();
    let var_mu = params.sigma.powi(2) / (params.k * params.k);
    let rows: Vec<ReplicationRow> = (0..1000)
        .map(|i| {
            let (e_mu, e_k, e_mu_ls, e_k_ls) =
                (draw(var_mu), draw(c.var_k_moment_thm), draw(var_mu), draw(c.var_k_ls));
            ReplicationRow {
                index: i,
                horizon,
                seed: i as u64,
                mu_hat: Some(params.mu + e_mu / rm),
                k_hat: Some(params.k + e_k / rk),
                mu_ls: Some(params.mu + e_mu_ls / rm),
                k_ls: Some(params.k + e_k_ls / rk),
                mode: IntegralMode::SkorohodOracle,
                e_mu: Some(e_mu),
                e_k: Some(e_k),
                e_mu_ls: Some(e_mu_ls),
                e_k_ls: Some(e_k_ls),
            }
        })
        .collect();
    let s = summarize(&rows, &ctx).unwrap();
    let target = [
        ("mu_hat", "var_mu"),
        ("k_hat", "var_k_moment_thm"),
        ("mu_ls_skorohod_oracle", "var_mu"),
        ("k_ls_skorohod_oracle", "var_k_ls"),
    ];
    for (est, law) in target {
        let cell = s.cell(est, horizon).unwrap();
        let fit = cell.candidates.iter().find(|f| f.name == law).unwrap();
        let p = fit.ks.unwrap().p;
        assert!(p > 0.05, "{est} vs {law}: p = {p}");
        assert!(fit.within_factor);
        assert!(cell.studentized.unwrap().p > 0.05);
    }
}

#[test]
fn consistency_monotone_from_100_to_400() {
    let cfg = ExperimentConfig::from_json(
        r#"{"kernel": {"name": "fbm", "H": 0.7}, "params": {"k": 1.0, "mu": 2.0},
            "T_list": [100, 400], "dt": 0.05, "replications": 200, "master_seed": 77,
            "modes": ["skorohod_oracle"]}"#,
    )
    .unwrap();
    let rows = records_to_rows(&run_experiment(&cfg).unwrap(), &cfg).unwrap();
    let s = summarize(&rows, &SummaryContext::for_config(&cfg).unwrap()).unwrap();
    for est in ["mu_hat", "k_hat"] {
        assert!(s.consistency(est).unwrap().decreasing, "{est}");
    }
}

fn arb_row() -> impl Strategy<Value = (Option<f64>, Option<f64>, f64)> {
    (prop::option::weighted(0.9, -5.0f64..5.0), prop::option::weighted(0.9, -5.0f64..5.0), 0.0f64..1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summary_invariants(values in prop::collection::vec(arb_row(), 25..60)) {
        let params = VasicekParams::new(1.0, 2.0, 1.0).unwrap();
        let ctx = SummaryContext {
            params,
            beta: 0.7,
            constants: Some(asymptotic_constants(&Fbm::new(0.7).unwrap(), 1.0).unwrap()),
        };
        let rows: Vec<ReplicationRow> = values
            .iter()
            .enumerate()
            .map(|(i, &(a, b, c))| ReplicationRow {
                index: i,
                horizon: 10.0,
                seed: 0,
                mu_hat: Some(2.0 + c),
                k_hat: a.map(|x| 1.0 + x),
                mu_ls: Some(2.0 - c),
                k_ls: b.map(|x| 1.0 + x),
                mode: IntegralMode::Pathwise,
                e_mu: Some(c),
                e_k: a,
                e_mu_ls: Some(-c),
                e_k_ls: b,
            })
            .collect();
        match summarize(&rows, &ctx) {
            Ok(s) => {
                for cell in &s.cells {
                    prop_assert!(cell.variance >= 0.0);
                    prop_assert_eq!(cell.valid + cell.failed, rows.len());
                    for f in &cell.candidates {
                        if let Some(ks) = f.ks {
                            prop_assert!((0.0..=1.0).contains(&ks.p));
                        }
                    }
                }
            }
            Err(e) => prop_assert!(matches!(e, gvasicek::Error::Summary(_))),
        }
    }
}
