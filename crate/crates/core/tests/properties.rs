use couponflux::careless::{careless_kernel, careless_flux_from, CarelessParams};
use couponflux::chain::{
    block_entry_moments, cut_flux_residuals, entry_flux, exit_flux, log_ladder_mean, mean_hitting_time_dense,
    stationary_distribution, tv_contraction_check, CountKernel, TargetSet, ROW_TOLERANCE,
};
use couponflux::clumsy::{clumsy_count_kernel, clumsy_flux, ClumsyParams};
use couponflux::combined::{combined_kernel, CombinedParams};
use couponflux::qseries::{
    alternating_series_stationary, infinite_chain_stationary, log_q_pochhammer, LuckyWeightTable, Terms,
};
use couponflux::record::{ExperimentRecord, Model, OutputValue};
use couponflux::reset::{beta_mean, exact_mean, log_success_probability, reset_pgf, ResetParams};
use couponflux::rng::parallel_samples;
use couponflux::stats::{ks_exp1, ks_two_sample};
use proptest::prelude::*;
use rand::Rng;

fn row_sums_ok(k: &CountKernel) -> bool {
    k.rows().iter().all(|r| (r.iter().sum::<f64>() - 1.0).abs() <= ROW_TOLERANCE)
}

fn ln_binom(n: usize, k: usize) -> f64 {
    (1..=k).map(|i| ((n + 1 - i) as f64 / i as f64).ln()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn kernels_are_stochastic_and_stationary(n in 1usize..60, p in 0.02f64..0.98, s in 0.05f64..0.95) {
        let kernels = [
            clumsy_count_kernel(&ClumsyParams::new(n, p).unwrap()).unwrap(),
            careless_kernel(&CarelessParams::new(n, p).unwrap()).unwrap(),
            combined_kernel(&CombinedParams::from_refresh(n, 1.0 - p, s).unwrap()).unwrap(),
        ];
        for k in &kernels {
            prop_assert!(row_sums_ok(k));
            let pi = stationary_distribution(k).unwrap();
            prop_assert!(pi.residual() <= 1e-10);
        }
    }

    #[test]
    fn entry_and_exit_flux_balance(n in 1usize..40, q in 0.2f64..0.9, b in 1usize..40) {
        let cp = CarelessParams::from_q(n, q).unwrap();
        let k = careless_kernel(&cp).unwrap();
        let pi = stationary_distribution(&k).unwrap();
        let t = cp.target();
        let inflow = entry_flux(&k, &pi, &t).unwrap().ln();
        let outflow = exit_flux(&k, &pi, &t).unwrap().ln();
        prop_assert!((inflow - outflow).exp_m1().abs() <= 1e-10);
        let r = block_entry_moments(&k, &pi, &t, b).unwrap();
        prop_assert!((r.log_flux.ln() - inflow).abs() <= 1e-10);
        if inflow > -700.0 {
            prop_assert!((r.first_moment / b as f64 / inflow.exp() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn clumsy_law_is_binomial_and_flux_is_p_q_n(n in 1usize..=30, p in 0.05f64..0.95) {
        let cp = ClumsyParams::new(n, p).unwrap();
        let k = clumsy_count_kernel(&cp).unwrap();
        let pi = stationary_distribution(&k).unwrap();
        for a in 0..=n {
            let binom = (ln_binom(n, a) + a as f64 * p.ln() + (n - a) as f64 * (1.0 - p).ln()).exp();
            prop_assert!((pi.prob(a) - binom).abs() <= 1e-10);
        }
        prop_assert!(clumsy_flux(&cp).unwrap().log_ratio.abs() <= 1e-10);
    }

    #[test]
    fn careless_identities(n in 1usize..=100, q in 0.1f64..0.9) {
        let cp = CarelessParams::from_q(n, q).unwrap();
        let k = careless_kernel(&cp).unwrap();
        let nu = stationary_distribution(&k).unwrap();
        let r = careless_flux_from(&cp, &k, &nu).unwrap();
        for alt in r.alternatives.values() {
            prop_assert!((alt.ln() - r.log_exact.ln()).exp_m1().abs() <= 1e-10);
        }
        prop_assert!(cut_flux_residuals(&k, &nu).iter().all(|&x| x <= 1e-10));
        prop_assert!((nu.mean() - cp.stationary_mean()).abs() <= 1e-10);
        let w = LuckyWeightTable::new(n, q, 1.0).unwrap();
        for j in 0..=n {
            prop_assert!(nu.log_prob(j) >= nu.log_prob(0) + w.log_w[j] - 1e-9);
        }
    }

    #[test]
    fn combined_identities(n in 1usize..=60, big_q in 0.1f64..1.0, s in 0.1f64..0.9) {
        let cp = CombinedParams::from_refresh(n, big_q, s).unwrap();
        let k = combined_kernel(&cp).unwrap();
        let nu = stationary_distribution(&k).unwrap();
        prop_assert!(cut_flux_residuals(&k, &nu).iter().all(|&x| x <= 1e-10));
        let w = LuckyWeightTable::new(n, s, big_q).unwrap();
        for j in 0..n {
            let up = ((n - j) as f64 / n as f64).ln() + big_q.ln() + (j + 1) as f64 * s.ln();
            prop_assert!((k.log_entry(j, j + 1) - up).abs() <= 1e-12);
        }
        for j in 0..=n {
            prop_assert!(nu.log_prob(j) >= nu.log_prob(0) + w.log_w[j] - 1e-9);
        }
    }

    #[test]
    fn tv_contraction_is_monotone(n in 1usize..12, p in 0.05f64..0.95, steps in 0usize..60) {
        let k = clumsy_count_kernel(&ClumsyParams::new(n, p).unwrap()).unwrap();
        let mut d1 = vec![0.0; n + 1];
        let mut d2 = vec![0.0; n + 1];
        d1[0] = 1.0;
        d2[n] = 1.0;
        let seq = tv_contraction_check(&k, &d1, &d2, steps).unwrap();
        prop_assert_eq!(seq.len(), steps + 1);
        prop_assert!(seq.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn ladder_matches_elimination(n in 2usize..8, q in 0.3f64..0.9, start in 0usize..7) {
        let cp = CarelessParams::from_q(n, q).unwrap();
        let k = careless_kernel(&cp).unwrap();
        let start = start % n;
        let ladder = log_ladder_mean(&k, start, n).unwrap().exp();
        // elimination loses about cond·eps; keep to well-conditioned cases
        prop_assume!(ladder < 1e5);
        let dense = mean_hitting_time_dense(&k, &cp.target(), start).unwrap();
        prop_assert!((ladder / dense - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn pochhammer_and_lucky_weights(a in 0.01f64..0.95, n in 1usize..80, s in 0.05f64..0.95, big_q in 0.05f64..1.0) {
        let mut prev = 0.0;
        for m in 0..40 {
            let v = log_q_pochhammer(a, Terms::Finite(m)).unwrap();
            prop_assert!(v <= prev + 1e-15);
            prev = v;
        }
        prop_assert!(log_q_pochhammer(a, Terms::Infinite).unwrap() <= prev + 1e-15);
        let w = LuckyWeightTable::new(n, s, big_q).unwrap();
        for k in 0..n {
            let step = (w.log_w[k + 1] - w.log_w[k]).exp();
            let expect = (n - k) as f64 / n as f64 * big_q * s.powi(k as i32 + 1);
            prop_assert!((step / expect - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn limiting_law_is_a_fixed_point(s in 0.1f64..0.9, big_q in 0.1f64..1.0) {
        let kmax = 30;
        let pi = infinite_chain_stationary(s, big_q, kmax).unwrap();
        // one step: Bin(k, S) survivors plus a Bernoulli(QS) arrival
        let mut next = vec![0.0; kmax + 2];
        for (k, &m) in pi.iter().enumerate() {
            for j in 0..=k {
                let b = (ln_binom(k, j) + j as f64 * s.ln() + (k - j) as f64 * (1.0 - s).ln()).exp();
                next[j] += m * b * (1.0 - big_q * s);
                next[j + 1] += m * b * big_q * s;
            }
        }
        for j in 0..=kmax - 2 {
            prop_assert!((next[j] - pi[j]).abs() <= 1e-10);
        }
    }

    #[test]
    fn alternating_series_agrees(s in 0.2f64..0.8) {
        let pi = infinite_chain_stationary(s, 1.0, 20).unwrap();
        for k in 0..=15 {
            let alt = alternating_series_stationary(s, 1.0, k).unwrap();
            prop_assert!((alt - pi[k]).abs() <= 1e-10, "k={} {} vs {}", k, alt, pi[k]);
        }
    }

    #[test]
    fn reset_mean_identities(n in 1usize..40, rho in 0.01f64..0.9) {
        let p = ResetParams::equal(n, rho).unwrap();
        let s = log_success_probability(&p).unwrap().exp();
        let m = exact_mean(&p).unwrap();
        prop_assert!((m / ((1.0 - s) / (rho * s)) - 1.0).abs() <= 1e-9);
        prop_assert!((beta_mean(&p).unwrap() / m - 1.0).abs() <= 1e-9);
        prop_assert!((reset_pgf(&p, 1.0).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn reset_pgf_derivative(n in 1usize..12, rho in 0.02f64..0.3) {
        let p = ResetParams::equal(n, rho).unwrap();
        let m = exact_mean(&p).unwrap();
        prop_assume!(m < 1e3);
        let h = 1e-6;
        let d = (reset_pgf(&p, 1.0 + h).unwrap() - reset_pgf(&p, 1.0 - h).unwrap()) / (2.0 * h);
        prop_assert!((d / m - 1.0).abs() <= 1e-4, "{} vs {}", d, m);
    }

    #[test]
    fn records_round_trip(seed in any::<u64>(), xs in proptest::collection::vec(-1e300f64..1e300, 0..6), l in -5000f64..5000.0) {
        let mut r = ExperimentRecord::new(Model::Combined, seed, "2001-02-03T04:05:06Z").param("n", 7).param("Q", 0.8);
        for (i, x) in xs.iter().enumerate() {
            r.put(&format!("x{i}"), *x);
        }
        r.put("neg", f64::NEG_INFINITY);
        r.put_log("mu", l);
        let back = ExperimentRecord::from_json(&r.to_json()).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(matches!(back.outputs["mu"], OutputValue::Log { .. }), l.abs() > 700.0);
        prop_assert_eq!(back.log_space, l.abs() > 700.0);
    }

    #[test]
    fn ks_statistics_are_bounded(a in proptest::collection::vec(0.0f64..10.0, 1..60), b in proptest::collection::vec(0.0f64..10.0, 1..60)) {
        let d = ks_exp1(&a);
        prop_assert!((0.0..=1.0).contains(&d));
        let ab = ks_two_sample(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ks_two_sample(&b, &a)).abs() <= 1e-15);
    }

    #[test]
    fn streams_ignore_thread_count(seed in any::<u64>(), count in 1usize..200, threads in 2usize..9) {
        let f = |i: u64, rng: &mut couponflux::rng::SampleRng| (i, rng.random::<u64>());
        prop_assert_eq!(parallel_samples(seed, count, 1, f), parallel_samples(seed, count, threads, f));
    }
}

#[test]
fn ladder_matches_rational_elimination() {
    // exact rational Gauss-Jordan solves of the same kernels
    for (n, q, exact) in [(4, 0.5, 6208.0), (5, 0.3, 1291806480.2750912), (6, 0.3, 4298154448291.9214)] {
        let cp = CarelessParams::from_q(n, q).unwrap();
        let k = careless_kernel(&cp).unwrap();
        let ladder = log_ladder_mean(&k, 0, n).unwrap().exp();
        assert!((ladder / exact - 1.0).abs() < 1e-12, "n={n}: {ladder} vs {exact}");
    }
}

#[test]
fn degenerate_targets_are_errors() {
    assert!(TargetSet::new(std::iter::empty(), 3).is_err());
    let k = clumsy_count_kernel(&ClumsyParams::new(2, 0.5).unwrap()).unwrap();
    let pi = stationary_distribution(&k).unwrap();
    let all = TargetSet::new(0..=2, 2).unwrap();
    assert!(entry_flux(&k, &pi, &all).is_err());
}
