//! Acceptance gate: ten numbered criteria, each its own test printing one
//! `ACCEPTANCE <nn> <slug>: PASS` line (visible with `--nocapture`; the test
//! harness reports the same outcome per test either way). Tolerances and
//! time limits are pinned here and must not be loosened.

use ordibound_cli::commands::random_marginal;
use ordibound_core::{
    attaining_matrix_lower, attaining_matrix_upper, bootstrap_interval, bounds_report, delta_jm,
    estimate_bounds, gamma_independent, gamma_lower, gamma_upper, lp_gamma_bounds, tuple_set,
    validate_attainment, xi_jm, CounterRng, Dataset, Design, MarginalDistribution, TupleIndex,
    UnitRecord,
};
use rayon::prelude::*;
use std::path::PathBuf;
use std::time::{Duration, Instant};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn senn_marginals() -> (MarginalDistribution, MarginalDistribution) {
    let treated = MarginalDistribution::from_counts(&[23, 15, 48, 67, 121, 177]).unwrap();
    let control = MarginalDistribution::from_counts(&[42, 40, 62, 103, 184, 11]).unwrap();
    (treated, control)
}

fn pass(number: usize, slug: &str, detail: String) {
    println!("ACCEPTANCE {number:02} {slug}: PASS ({detail})");
}

#[test]
fn criterion_01_senn_bounds() {
    let start = Instant::now();
    let (treated, control) = senn_marginals();
    let report = bounds_report(&treated, &control).unwrap();
    let elapsed = start.elapsed();

    assert!((report.gamma_independent - 0.386712).abs() <= 0.0005, "{}", report.gamma_independent);
    assert!((report.gamma_upper - 0.900287).abs() <= 0.0005, "{}", report.gamma_upper);
    assert!((report.gamma_lower - 0.028328).abs() <= 0.0005, "{}", report.gamma_lower);
    assert_eq!(report.argmin_upper, Some(TupleIndex { j: 1, m: 4 }));
    assert_eq!(report.argmax_lower, Some(TupleIndex { j: 5, m: 1 }));
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass(
        1,
        "six-category-trial-bounds",
        format!(
            "gamma_L={:.6} gamma_I={:.6} gamma_U={:.6} in {elapsed:?}",
            report.gamma_lower, report.gamma_independent, report.gamma_upper
        ),
    );
}

#[test]
fn criterion_02_senn_bootstrap_interval() {
    let start = Instant::now();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_ordibound"))
        .args([
            "ci",
            "--counts-file",
            fixture("senn_counts.txt").to_str().unwrap(),
            "--boot",
            "2000",
            "--seed",
            "0",
        ])
        .env("ORDIBOUND_THREADS", "1")
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let lower = v["interval"]["interval_lower"].as_f64().unwrap();
    let upper = v["interval"]["interval_upper"].as_f64().unwrap();
    assert_eq!(v["interval"]["replicates_used"], 2000);
    assert!((lower - 0.315).abs() <= 0.01, "interval lower {lower}");
    assert!((upper - 0.972).abs() <= 0.01, "interval upper {upper}");
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    pass(
        2,
        "six-category-trial-interval",
        format!("95% interval [{lower:.4}, {upper:.4}] from 2000 replicates in {elapsed:?}"),
    );
}

/// Deterministic instance stream shared by criteria 3 and 4.
fn oracle_instances() -> Vec<(MarginalDistribution, MarginalDistribution)> {
    let mut out = Vec::new();
    for categories in 2..=8usize {
        for trial in 0..1000u64 {
            let mut rng = CounterRng::from_key(0x0AC1E ^ categories as u64, trial);
            out.push((
                random_marginal(&mut rng, categories),
                random_marginal(&mut rng, categories),
            ));
        }
    }
    out
}

#[test]
fn criterion_03_closed_forms_match_lp_oracle() {
    let start = Instant::now();
    let instances = oracle_instances();
    let worst = instances
        .par_iter()
        .map(|(p1, p0)| {
            let (upper, _) = gamma_upper(p1, p0).unwrap();
            let (lower, _) = gamma_lower(p1, p0).unwrap();
            let (lp_lower, lp_upper) = lp_gamma_bounds(p1.probs(), p0.probs()).unwrap();
            (upper - lp_upper).abs().max((lower - lp_lower).abs())
        })
        .reduce(|| 0.0f64, f64::max);
    let elapsed = start.elapsed();
    assert!(worst <= 1e-9, "worst closed-form vs LP deviation {worst:e}");
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    pass(
        3,
        "lp-oracle-equivalence",
        format!("{} instances, worst deviation {worst:.3e} in {elapsed:?}", instances.len()),
    );
}

#[test]
fn criterion_04_attainment_validates_on_oracle_instances() {
    let instances = oracle_instances();
    let worst = instances
        .par_iter()
        .map(|(p1, p0)| {
            let upper = attaining_matrix_upper(p1, p0).unwrap();
            let lower = attaining_matrix_lower(p1, p0).unwrap();
            let vu = validate_attainment(&upper.matrix, p1, p0, upper.target, 1e-9);
            let vl = validate_attainment(&lower.matrix, p1, p0, lower.target, 1e-9);
            assert!(vu.ok, "upper attainment failed: {vu:?}");
            assert!(vl.ok, "lower attainment failed: {vl:?}");
            vu.max_row_deviation
                .max(vu.max_col_deviation)
                .max(vu.gamma_deviation)
                .max(vl.max_row_deviation)
                .max(vl.max_col_deviation)
                .max(vl.gamma_deviation)
        })
        .reduce(|| 0.0f64, f64::max);
    pass(
        4,
        "attainment-constructions",
        format!("{} instances, worst marginal/effect deviation {worst:.3e}", instances.len()),
    );
}

#[test]
fn criterion_05_three_category_closed_forms() {
    let mut worst = 0.0f64;
    for trial in 0..200u64 {
        let mut rng = CounterRng::from_key(0x3CA7, trial);
        let p1 = random_marginal(&mut rng, 3);
        let p0 = random_marginal(&mut rng, 3);
        let (a, b) = (p1.probs(), p0.probs());
        let expected = [
            (1, 1, a[1] + a[2] + a[2] - b[1] - b[2]),
            (1, 2, a[1] + a[2] - b[2]),
            (2, 1, a[2] + b[0] - b[2]),
        ];
        for (j, m, want) in expected {
            let t = TupleIndex::new(j, m, 3).unwrap();
            let got = delta_jm(&p1, &p0, t).unwrap();
            worst = worst.max((got - want).abs());
        }
        let expected_xi = [
            (1, 1, a[1] + a[2] - b[1] - b[2] - b[2]),
            (1, 2, a[2] - b[1] - b[2]),
            (2, 1, a[2] - b[2] - a[0]),
        ];
        for (j, m, want) in expected_xi {
            let t = TupleIndex::new(j, m, 3).unwrap();
            let got = xi_jm(&p1, &p0, t).unwrap();
            worst = worst.max((got - want).abs());
        }
        let delta_min = expected.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
        let xi_max = expected_xi.iter().map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((gamma_upper(&p1, &p0).unwrap().0 - delta_min).abs());
        worst = worst.max((gamma_lower(&p1, &p0).unwrap().0 - xi_max).abs());
    }
    assert!(worst <= 1e-12, "worst closed-form deviation {worst:e}");
    pass(5, "three-category-closed-forms", format!("200 pairs, worst deviation {worst:.3e}"));
}

#[test]
fn criterion_06_symmetry_ordering_recursions() {
    let mut worst = 0.0f64;
    for trial in 0..200u64 {
        let mut rng = CounterRng::from_key(0x5E55, trial);
        let categories = 2 + (trial as usize) % 7;
        let p1 = random_marginal(&mut rng, categories);
        let p0 = random_marginal(&mut rng, categories);
        let j_last = categories - 1;

        // swapping the arms negates the effect tuple by tuple
        for t in tuple_set(categories) {
            let xi = xi_jm(&p1, &p0, t).unwrap();
            let delta_swapped = delta_jm(&p0, &p1, t).unwrap();
            worst = worst.max((xi + delta_swapped).abs());
        }

        // the three bounds are ordered
        let (upper, _) = gamma_upper(&p1, &p0).unwrap();
        let (lower, _) = gamma_lower(&p1, &p0).unwrap();
        let independent = gamma_independent(&p1, &p0).unwrap();
        worst = worst.max((lower - independent).max(0.0));
        worst = worst.max((independent - upper).max(0.0));

        // in-row, diagonal, and wrap-around recursions of the delta table
        let (a, b) = (p1.probs(), p0.probs());
        let delta =
            |j: usize, m: usize| delta_jm(&p1, &p0, TupleIndex { j, m }).unwrap();
        for j in 1..=j_last {
            for m in 1..categories - j {
                worst = worst.max((delta(j, m + 1) - delta(j, m) - b[j + m - 1] + a[j + m]).abs());
            }
        }
        for j in 1..j_last {
            for m in 1..categories - j {
                worst = worst.max((delta(j, m + 1) - delta(j + 1, m) - a[j] + b[j - 1]).abs());
            }
        }
        for j in 1..=categories.saturating_sub(2) {
            worst = worst
                .max((delta(1, j) - delta(j + 1, j_last - j) - b[j_last] + a[0]).abs());
        }
    }
    assert!(worst <= 1e-12, "worst identity deviation {worst:e}");
    pass(6, "symmetry-ordering-recursions", format!("200 pairs, worst deviation {worst:.3e}"));
}

#[test]
fn criterion_07_model_fits_match_closed_forms_and_gradients() {
    use ordibound_core::glm::{
        fit_logistic, fit_proportional_odds, logistic_gradient, logistic_log_likelihood,
        proportional_odds_gradient, proportional_odds_log_likelihood, DesignMatrix,
    };

    // intercept-only logistic lands on the log odds of the sample mean
    let y_bin: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
    let ones = y_bin.iter().filter(|&&v| v == 1).count() as f64;
    let design = DesignMatrix::intercept_only(y_bin.len()).unwrap();
    let fit = fit_logistic(&design, &y_bin).unwrap();
    let want = (ones / (y_bin.len() as f64 - ones)).ln();
    let logistic_dev = (fit.coefficients[0] - want).abs();
    assert!(logistic_dev <= 1e-10, "intercept deviation {logistic_dev:e}");

    // intercept-only proportional odds lands on the empirical cumulative
    // log odds
    let y_ord: Vec<usize> =
        std::iter::empty().chain(vec![0; 14]).chain(vec![1; 9]).chain(vec![2; 21]).chain(vec![3; 16]).collect();
    let n = y_ord.len() as f64;
    let design = DesignMatrix::intercept_only(y_ord.len()).unwrap();
    let fit = fit_proportional_odds(&design, &y_ord, 4).unwrap();
    let mut ordinal_dev = 0.0f64;
    let mut cumulative = 0.0;
    for (c, count) in [14.0, 9.0, 21.0].iter().enumerate() {
        cumulative += count;
        let want = (cumulative / (n - cumulative)).ln();
        ordinal_dev = ordinal_dev.max((fit.cutpoints[c] - want).abs());
    }
    assert!(ordinal_dev <= 1e-10, "cutpoint deviation {ordinal_dev:e}");

    // analytic scores agree with central differences at random points
    let mut rng = CounterRng::from_key(0x9D4A, 0);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|_| vec![2.0 * rng.next_f64() - 1.0, 2.0 * rng.next_f64() - 1.0])
        .collect();
    let design = DesignMatrix::new(rows).unwrap();
    let y_bin: Vec<u8> = (0..40).map(|_| u8::from(rng.next_f64() < 0.5)).collect();
    let y_ord: Vec<usize> = (0..40).map(|_| rng.next_index(4)).collect();
    let mut grad_dev = 0.0f64;
    for point in 0..10u64 {
        let mut prng = CounterRng::from_key(0x9D4B, point);
        let beta: Vec<f64> = (0..3).map(|_| 2.0 * prng.next_f64() - 1.0).collect();
        let analytic = logistic_gradient(&design, &y_bin, &beta);
        for i in 0..beta.len() {
            let h = 1e-6 * beta[i].abs().max(1.0);
            let mut hi = beta.clone();
            let mut lo = beta.clone();
            hi[i] += h;
            lo[i] -= h;
            let fd = (logistic_log_likelihood(&design, &y_bin, &hi)
                - logistic_log_likelihood(&design, &y_bin, &lo))
                / (2.0 * h);
            grad_dev = grad_dev.max((analytic[i] - fd).abs() / analytic[i].abs().max(1.0));
        }

        let phi: Vec<f64> = (0..5).map(|_| prng.next_f64() - 0.5).collect();
        let analytic = proportional_odds_gradient(&design, &y_ord, 4, &phi);
        for i in 0..phi.len() {
            let h = 1e-6 * phi[i].abs().max(1.0);
            let mut hi = phi.clone();
            let mut lo = phi.clone();
            hi[i] += h;
            lo[i] -= h;
            let fd = (proportional_odds_log_likelihood(&design, &y_ord, 4, &hi)
                - proportional_odds_log_likelihood(&design, &y_ord, 4, &lo))
                / (2.0 * h);
            grad_dev = grad_dev.max((analytic[i] - fd).abs() / analytic[i].abs().max(1.0));
        }
    }
    assert!(grad_dev <= 1e-5, "worst relative gradient deviation {grad_dev:e}");
    pass(
        7,
        "model-fit-checks",
        format!(
            "intercepts {logistic_dev:.2e}/{ordinal_dev:.2e}, gradients {grad_dev:.2e} relative"
        ),
    );
}

/// Draws a covariate dataset from a proportional-odds data generating
/// process. Always produces both arms; categories may collapse, which the
/// caller screens for.
fn random_covariate_dataset(seed: u64, n: usize) -> Dataset {
    let mut rng = CounterRng::from_key(0xDA7A, seed);
    let invlogit = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut units = Vec::with_capacity(n);
    for i in 0..n {
        let x1 = 2.0 * rng.next_f64() - 1.0;
        let x2 = f64::from(rng.next_f64() < 0.5);
        let treatment = u8::from(i % 2 == 0);
        let eta = 0.8 * f64::from(treatment) + 0.9 * x1 - 0.5 * x2;
        let c1 = invlogit(-0.4 - eta);
        let c2 = invlogit(0.9 - eta);
        let u = rng.next_f64();
        let outcome = usize::from(u >= c1) + usize::from(u >= c2);
        units.push(UnitRecord { treatment, outcome, covariates: vec![x1, x2] });
    }
    Dataset::new(units, 3).unwrap()
}

#[test]
fn criterion_08_sharpening_narrows_and_degenerates_to_cre() {
    let mut successes = 0usize;
    let mut seed = 0u64;
    let mut worst_upper = f64::NEG_INFINITY;
    let mut worst_lower = f64::NEG_INFINITY;
    while successes < 100 {
        assert!(seed < 200, "too many unfittable random datasets");
        let data = random_covariate_dataset(seed, 120);
        seed += 1;
        let Ok(marginal) = estimate_bounds(&data, Design::OutcomeRegression) else {
            continue;
        };
        let sharpened = estimate_bounds(&data, Design::Sharpened)
            .expect("sharpened uses the same fits that just succeeded");
        worst_upper = worst_upper.max(sharpened.bounds.gamma_upper - marginal.bounds.gamma_upper);
        worst_lower = worst_lower.max(marginal.bounds.gamma_lower - sharpened.bounds.gamma_lower);
        successes += 1;
    }
    assert!(worst_upper <= 1e-9, "sharpened upper exceeded marginal by {worst_upper:e}");
    assert!(worst_lower <= 1e-9, "sharpened lower fell below marginal by {worst_lower:e}");

    // with no covariates every design collapses to the arm proportions
    let mut worst_degenerate = 0.0f64;
    for seed in 0..5u64 {
        let mut rng = CounterRng::from_key(0xDE9E, seed);
        let units: Vec<UnitRecord> = (0..80)
            .map(|i| UnitRecord {
                treatment: u8::from(i % 2 == 0),
                outcome: rng.next_index(3),
                covariates: vec![],
            })
            .collect();
        let data = Dataset::new(units, 3).unwrap();
        let cre = estimate_bounds(&data, Design::Cre).unwrap();
        for design in [Design::Ipw, Design::OutcomeRegression, Design::Sharpened] {
            let est = estimate_bounds(&data, design).unwrap();
            worst_degenerate = worst_degenerate
                .max((est.bounds.gamma_lower - cre.bounds.gamma_lower).abs())
                .max((est.bounds.gamma_independent - cre.bounds.gamma_independent).abs())
                .max((est.bounds.gamma_upper - cre.bounds.gamma_upper).abs());
        }
    }
    assert!(worst_degenerate <= 1e-10, "intercept-only deviation from CRE {worst_degenerate:e}");
    pass(
        8,
        "covariate-sharpening",
        format!(
            "100 datasets narrow (slack {:.2e}/{:.2e}), intercept-only within {worst_degenerate:.2e} of CRE",
            worst_upper, worst_lower
        ),
    );
}

#[test]
fn criterion_09_interval_coverage() {
    let start = Instant::now();
    let p1 = MarginalDistribution::new(vec![0.3, 0.4, 0.3]).unwrap();
    let p0 = MarginalDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
    let true_independent = gamma_independent(&p1, &p0).unwrap();
    let (true_upper, _) = gamma_upper(&p1, &p0).unwrap();

    let datasets = 500usize;
    let n = 500usize;
    let covered: usize = (0..datasets as u64)
        .map(|s| {
            let mut rng = CounterRng::from_key(0xC07E, s);
            let units: Vec<UnitRecord> = (0..n)
                .map(|_| {
                    let treatment = u8::from(rng.next_f64() < 0.5);
                    let probs =
                        if treatment == 1 { p1.probs() } else { p0.probs() };
                    let u = rng.next_f64();
                    let mut outcome = 0usize;
                    let mut acc = probs[0];
                    while u >= acc && outcome + 1 < probs.len() {
                        outcome += 1;
                        acc += probs[outcome];
                    }
                    UnitRecord { treatment, outcome, covariates: vec![] }
                })
                .collect();
            let data = Dataset::new(units, 3).unwrap();
            let interval = bootstrap_interval(&data, Design::Cre, 0.05, 200, 1000 + s).unwrap();
            usize::from(
                interval.interval_lower <= true_independent
                    && true_upper <= interval.interval_upper,
            )
        })
        .sum();
    let elapsed = start.elapsed();
    let coverage = covered as f64 / datasets as f64;
    assert!(coverage >= 0.93, "coverage {coverage:.3}");
    assert!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    pass(
        9,
        "interval-coverage",
        format!("{:.1}% ({covered}/{datasets}) in {elapsed:?}", 100.0 * coverage),
    );
}

#[test]
fn criterion_10_cardia_study_end_to_end() {
    // three-category counts: ordering and oracle agreement
    let treated = MarginalDistribution::from_counts(&[51, 18, 10]).unwrap();
    let control = MarginalDistribution::from_counts(&[50, 21, 8]).unwrap();
    let report = bounds_report(&treated, &control).unwrap();
    assert!(report.gamma_lower <= report.gamma_independent);
    assert!(report.gamma_independent <= report.gamma_upper);
    let (lp_lower, lp_upper) = lp_gamma_bounds(treated.probs(), control.probs()).unwrap();
    assert!((report.gamma_upper - lp_upper).abs() <= 1e-9);
    assert!((report.gamma_lower - lp_lower).abs() <= 1e-9);
    let upper = attaining_matrix_upper(&treated, &control).unwrap();
    assert!(validate_attainment(&upper.matrix, &treated, &control, upper.target, 1e-9).ok);

    // synthetic covariate data runs through every design and the interval
    let binary = env!("CARGO_BIN_EXE_ordibound");
    let data = fixture("karolinska_synthetic.csv");
    for design in ["cre", "ipw", "outcome-regression", "sharpened"] {
        let out = std::process::Command::new(binary)
            .args(["estimate", "--data", data.to_str().unwrap(), "--design", design])
            .output()
            .expect("binary runs");
        assert_eq!(
            out.status.code(),
            Some(0),
            "{design}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["estimate"]["num_units"], 158);
        let b = &v["estimate"]["bounds"];
        assert!(b["gamma_lower"].as_f64().unwrap() <= b["gamma_upper"].as_f64().unwrap());
    }
    let out = std::process::Command::new(binary)
        .args([
            "ci",
            "--data",
            data.to_str().unwrap(),
            "--design",
            "cre",
            "--boot",
            "300",
            "--seed",
            "5",
        ])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let i = &v["interval"];
    assert!(i["interval_lower"].as_f64().unwrap() <= i["gamma_independent"].as_f64().unwrap());
    assert!(i["gamma_upper"].as_f64().unwrap() <= i["interval_upper"].as_f64().unwrap());
    pass(
        10,
        "cardia-study-pipeline",
        format!(
            "counts gamma in [{:.4}, {:.4}], covariate pipeline exit codes all zero",
            report.gamma_lower, report.gamma_upper
        ),
    );
}
