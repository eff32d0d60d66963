use proptest::prelude::*;
use roughir::core::gaussian::{estimate_h, lambda_p};
use roughir::core::{
    estimate_alpha, r0_tilde_2n, r_tilde_2n, LambdaTildeTable, SampledPath, VarianceTable,
};
use roughir::mc::{self, McEstimate};
use roughir::seed::{self, stream};
use roughir::sim::{apply_trend, sim_brownian, sim_fbm, sim_levy_stable, FbmGenerator, Func};
use roughir::tables::DEFAULT_TABLE_SEED;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn agree(a: McEstimate, b: McEstimate, k: f64) -> bool {
    (a.estimate - b.estimate).abs() <= k * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

fn gaussian_table() -> VarianceTable {
    let grid: Vec<(usize, f64)> = (1..=19).map(|i| (2, i as f64 / 20.0)).collect();
    mc::build_variance_table(&grid, 400, 2048, DEFAULT_TABLE_SEED).unwrap()
}

fn stable_table() -> LambdaTildeTable {
    mc::build_stable_table(
        &mc::default_stable_grid(),
        mc::DEFAULT_STABLE_REPS,
        DEFAULT_TABLE_SEED,
    )
    .unwrap()
}

#[test]
fn sigma2_is_reproducible_across_seeds() {
    let a = mc::sigma_p_mc(2, 0.5, 800, 1024, 1).unwrap();
    let b = mc::sigma_p_mc(2, 0.5, 800, 1024, 2).unwrap();
    assert!(a.estimate > 0.0 && b.estimate > 0.0);
    assert!(agree(a, b, 3.0), "{a:?} vs {b:?}");
}

#[test]
fn sigma2_lag_sum_matches_variance_route() {
    for h in [0.3, 0.5, 0.8] {
        let var = mc::sigma_p_mc(2, h, 1000, 2048, 3).unwrap();
        let lags = mc::sigma_lag_sum(2, h, 1000, 2048, mc::DEFAULT_LAG_TRUNCATION, 4).unwrap();
        assert!(agree(var, lags, 3.0), "H={h}: {var:?} vs {lags:?}");
    }
}

#[test]
fn sigma1_refuses_the_divergent_region() {
    assert!(mc::sigma_p_mc(1, 0.8, 200, 256, 1).is_err());
    assert!(mc::sigma_p_mc(1, 0.7, 200, 256, 1).is_ok());
}

#[test]
fn second_increment_covariances_match_closed_form() {
    let (n, paths, h) = (1024, 300, 0.7);
    let gen = FbmGenerator::new(n, h).unwrap();
    let mut rng = seed::rng(31, stream::TEST, 0);
    let scale = (n as f64).powf(2.0 * h);
    let mut by_lag = vec![Vec::new(); 4];
    for _ in 0..paths {
        let x = gen.sample(&mut rng);
        let d2: Vec<f64> = x
            .values()
            .windows(3)
            .map(|w| (w[2] - 2.0 * w[1] + w[0]) * scale.sqrt())
            .collect();
        for (j, acc) in by_lag.iter_mut().enumerate() {
            let m = d2.len() - j;
            acc.push(
                d2[..m]
                    .iter()
                    .zip(&d2[j..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / m as f64,
            );
        }
    }
    for (j, v) in by_lag.iter().enumerate() {
        let (m, se) = mean_se(v);
        let target = roughir::core::fbm_increment_cov(2, h, j as i64).unwrap();
        assert!(
            (m - target).abs() <= 3.0 * se,
            "lag {j}: {m} vs {target} (se {se})"
        );
    }
}

#[test]
fn hurst_estimates_cover_the_truth() {
    let table = gaussian_table();
    let (n, reps, h) = (1 << 13, 500, 0.7);
    let gen = FbmGenerator::new(n, h).unwrap();
    let mut rng = seed::rng(32, stream::TEST, 0);
    let mut inside = 0;
    for _ in 0..reps {
        let e = estimate_h(&gen.sample(&mut rng), &table, 0.95).unwrap();
        assert!(e.ci_low <= e.h_hat && e.h_hat <= e.ci_high);
        inside += usize::from((e.h_hat - h).abs() <= 3.0 * e.stderr);
    }
    assert!(
        inside as f64 >= 0.99 * reps as f64,
        "{inside} of {reps} within 3 stderr"
    );
}

#[test]
fn smooth_trend_barely_moves_the_hurst_estimate() {
    let table = gaussian_table();
    let n = 1 << 13;
    let (alpha, beta) = (Func::custom(|t| 2.0 + t.sin()), Func::Poly(vec![0.0, 1.0]));
    for k in 0..20 {
        let x = sim_fbm(n, 0.6, &mut seed::rng(33, stream::TEST, k)).unwrap();
        let z = apply_trend(&x, &alpha, &beta).unwrap();
        let (hx, hz) = (
            estimate_h(&x, &table, 0.95).unwrap(),
            estimate_h(&z, &table, 0.95).unwrap(),
        );
        assert!(
            (hx.h_hat - hz.h_hat).abs() <= 0.02,
            "path {k}: {} vs {}",
            hx.h_hat,
            hz.h_hat
        );
    }
}

#[test]
fn linear_path_is_out_of_range() {
    let x = SampledPath::from_fn(256, |t| 3.0 * t - 1.0).unwrap();
    assert!(estimate_h(&x, &gaussian_table(), 0.95).is_err());
}

#[test]
fn lambda_tilde_bounds_order_and_anchor() {
    let reps = 1 << 18;
    for alpha in [0.1, 0.5, 1.0, 1.5, 2.0] {
        let l = mc::lambda_tilde(alpha, reps, 5).unwrap();
        assert!((0.5..=1.0).contains(&l.estimate), "alpha={alpha}: {l:?}");
    }
    let low = mc::lambda_tilde(0.5, reps, 6).unwrap();
    let high = mc::lambda_tilde(1.5, reps, 7).unwrap();
    let joint = (low.stderr.powi(2) + high.stderr.powi(2)).sqrt();
    assert!(low.estimate - high.estimate > 3.0 * joint);
    let two = mc::lambda_tilde(2.0, reps, 8).unwrap();
    let l1 = lambda_p(1, 0.5).unwrap();
    assert!(
        (two.estimate - l1).abs() <= 3.0 * two.stderr,
        "{two:?} vs {l1}"
    );
}

#[test]
fn sigma_tilde_sq_at_two_matches_brownian_variance() {
    let s = mc::sigma_tilde_sq(2.0, 1 << 18, 9).unwrap();
    let other = mc::sigma_tilde_sq(2.0, 1 << 18, 10).unwrap();
    assert!(s.estimate >= -3.0 * s.stderr);
    assert!(agree(s, other, 3.0), "{s:?} vs {other:?}");

    let (n, reps) = (1 << 12, 500);
    let r: Vec<f64> = (0..reps)
        .map(|k| {
            let x = sim_brownian(n, &mut seed::rng(34, stream::TEST, k)).unwrap();
            r_tilde_2n(&x).unwrap().value
        })
        .collect();
    let nvar = mc::variance_with_stderr(&r);
    let nvar = McEstimate {
        estimate: n as f64 * nvar.estimate,
        stderr: n as f64 * nvar.stderr,
    };
    assert!(agree(s, nvar, 3.0), "{s:?} vs {nvar:?}");
}

#[test]
fn stable_table_is_well_formed() {
    let t = mc::build_stable_table(&mc::default_stable_grid(), mc::QUICK_STABLE_REPS, 11).unwrap();
    assert!(t
        .rows()
        .iter()
        .all(|r| (0.5..=1.0).contains(&r.lambda) && r.sigma_sq >= 0.0));
    assert!(t.rows().windows(2).all(|w| w[1].lambda <= w[0].lambda));
    let again =
        mc::build_stable_table(&mc::default_stable_grid(), mc::QUICK_STABLE_REPS, 11).unwrap();
    assert_eq!(t, again);
}

#[test]
fn stable_index_recovery() {
    let table = stable_table();
    let (n, reps, alpha) = (1 << 13, 500, 1.2);
    let mut est = Vec::new();
    for k in 0..reps {
        let x = sim_levy_stable(n, alpha, 1.0, &mut seed::rng(35, stream::TEST, k)).unwrap();
        let e = estimate_alpha(&x, &table, 0.95).unwrap();
        assert!(e.ci_low <= e.alpha_hat && e.alpha_hat <= e.ci_high);
        est.push(e.alpha_hat);
    }
    let (m, se) = mean_se(&est);
    let row = table.entry(alpha).unwrap();
    let table_se = row.lambda_stderr / row.dlambda_dalpha.abs();
    let joint = (se * se + table_se * table_se).sqrt();
    assert!(
        (m - alpha).abs() <= 3.0 * joint,
        "{m} vs {alpha} (joint se {joint})"
    );

    let bm = sim_brownian(n, &mut seed::rng(36, stream::TEST, 0)).unwrap();
    let e = estimate_alpha(&bm, &table, 0.95).unwrap();
    assert!(
        e.alpha_hat > 1.7 && e.alpha_hat <= 2.0,
        "Brownian path gave {}",
        e.alpha_hat
    );
}

#[test]
fn zero_crossing_statistic_ignores_alpha() {
    let n = 1 << 12;
    for alpha in [0.8, 1.8] {
        let r: Vec<f64> = (0..200)
            .map(|k| {
                let x =
                    sim_levy_stable(n, alpha, 1.0, &mut seed::rng(37, stream::TEST, k)).unwrap();
                r0_tilde_2n(&x).unwrap().value
            })
            .collect();
        let (m, se) = mean_se(&r);
        assert!((m - 0.5).abs() <= 3.0 * se, "alpha={alpha}: {m} (se {se})");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn alpha_estimate_is_scale_invariant(s in any::<u64>(), k in -30i32..30, c in 0.01f64..100.0) {
        let table = quick_table();
        let x = sim_levy_stable(512, 1.3, 1.0, &mut seed::rng(s, stream::TEST, 38)).unwrap();
        let a = estimate_alpha(&x, table, 0.95).unwrap();
        let y = x.map(|_, v| 2f64.powi(k) * v).unwrap();
        prop_assert_eq!(a.alpha_hat, estimate_alpha(&y, table, 0.95).unwrap().alpha_hat);
        let y = x.map(|_, v| -c * v).unwrap();
        prop_assert!((a.alpha_hat - estimate_alpha(&y, table, 0.95).unwrap().alpha_hat).abs() < 1e-9);
    }
}

fn quick_table() -> &'static LambdaTildeTable {
    static TABLE: std::sync::OnceLock<LambdaTildeTable> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        mc::build_stable_table(&mc::default_stable_grid(), mc::QUICK_STABLE_REPS, 12).unwrap()
    })
}
