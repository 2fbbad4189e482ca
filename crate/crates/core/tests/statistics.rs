use rand::Rng;

use birr::channel::{BisymmetricChannel, BitIndex};
use birr::estimator::{
    efficiency_constant, greenwood_moments, loss, loss_approx_quality, loss_approx_quality_at, loss_function,
    loss_ratio_empirical, ProbabilityVector,
};
use birr::par;
use birr::randomizer::{randomize_with, unrelated_channel_entry, BitRecord, FlipSampler, RandomizerSpec};
use birr::rng::RandomSeed;
use birr::sim::{sample_flat_dirichlet, simulate_randomized};

#[test]
fn estimator_is_unbiased() {
    let pi = ProbabilityVector::new(vec![0.1, 0.2, 0.3, 0.15, 0.05, 0.05, 0.1, 0.05]).unwrap();
    let (a, m, trials) = (0.8, 2000u64, 4000usize);
    let seed = RandomSeed::new(31);
    let estimates = par::map_indexed(trials, |t| simulate_randomized(&pi, a, m, &mut seed.rng_at(t as u64)).unwrap());
    // per-cell standard error of the mean from the exact covariance
    let cov = birr::estimator::covariance(&pi, a, m).unwrap();
    for (x, &p) in pi.values().iter().enumerate() {
        let mean = estimates.iter().map(|e| e.values()[x]).sum::<f64>() / trials as f64;
        let se = (cov.get(x, x) / trials as f64).sqrt();
        assert!((mean - p).abs() <= 5.0 * se, "cell {x}: mean {mean} vs {p} (se {se})");
    }
}

#[test]
fn empirical_loss_matches_closed_form_for_every_sample_size() {
    let mut rng = RandomSeed::new(8).rng_at(0);
    for n in 1..=4u32 {
        for a in [0.2, 0.6, 0.75, 0.95] {
            let pi = sample_flat_dirichlet(1 << n, &mut rng).unwrap();
            let expected = loss(pi.greenwood(), a, n).unwrap().loss_l;
            for m in [1u64, 10, 12345] {
                let got = loss_ratio_empirical(&pi, a, m).unwrap();
                assert!((got - expected).abs() <= 1e-9 * expected, "n={n} a={a} m={m}: {got} vs {expected}");
            }
        }
    }
}

#[test]
fn approximation_bound_covers_simulated_gap() {
    // E f_L(S) / f_L(E S) - 1 by simulation, against the analytic bound.
    // f_L(s) = 1 + (c - 1) g(s) with g(s) = 1 / (1 - s); since E S is known,
    // the linear term of g around E S is subtracted per draw to cut the noise.
    let draws = 50_000;
    for n in 3..=5u32 {
        let seed = RandomSeed::new(u64::from(n));
        let s: Vec<f64> = par::map_indexed(draws, |d| {
            sample_flat_dirichlet(1 << n, &mut seed.rng_at(d as u64)).unwrap().greenwood()
        });
        let (mu, _) = greenwood_moments(n).unwrap();
        let g = |s: f64| 1.0 / (1.0 - s);
        let curvature: Vec<f64> = s.iter().map(|&s| g(s) - g(mu) - g(mu) * g(mu) * (s - mu)).collect();
        let mean = curvature.iter().sum::<f64>() / draws as f64;
        let sd = (curvature.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0)).sqrt();
        let se = sd / (draws as f64).sqrt();
        for a in [0.55, 0.75, 0.9, 0.99] {
            let c = efficiency_constant(a, n).unwrap();
            let scale = (c - 1.0) / loss_function(c, mu);
            let gap = scale * mean;
            let bound = loss_approx_quality_at(n, c).unwrap();
            assert!(gap >= 0.0, "convexity makes the gap nonnegative");
            assert!(gap <= bound + 5.0 * scale * se, "n={n} a={a}: gap {gap} bound {bound}");
            assert!(bound <= loss_approx_quality(n).unwrap() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn bit_flips_are_independent_across_positions() {
    let width = 6u32;
    let a = 0.7;
    let samples = 200_000;
    let mut rng = RandomSeed::new(4).rng_at(0);
    let x = BitRecord::zeros(width);
    let mut single = vec![0u64; width as usize];
    let mut pair = vec![vec![0u64; width as usize]; width as usize];
    for _ in 0..samples {
        let y = randomize_with(&x, a, &mut rng);
        for i in 0..width {
            if y.get(i) {
                single[i as usize] += 1;
                for j in i + 1..width {
                    if y.get(j) {
                        pair[i as usize][j as usize] += 1;
                    }
                }
            }
        }
    }
    let q = 1.0 - a;
    let se_single = (q * a / samples as f64).sqrt();
    let se_pair = (q * q * (1.0 - q * q) / samples as f64).sqrt();
    for i in 0..width as usize {
        let f = single[i] as f64 / samples as f64;
        assert!((f - q).abs() <= 5.0 * se_single, "bit {i}: {f}");
        for j in i + 1..width as usize {
            let f = pair[i][j] as f64 / samples as f64;
            assert!((f - q * q).abs() <= 5.0 * se_pair, "bits {i},{j}: {f}");
        }
    }
}

#[test]
fn flip_sampler_rate() {
    for a in [0.01, 0.3, 0.5, 0.75, 0.999] {
        let s = FlipSampler::new(a);
        let mut rng = RandomSeed::new(12).rng_at(0);
        let trials = 400_000;
        let flips = (0..trials).filter(|_| s.flip(&mut rng)).count() as f64 / trials as f64;
        let se = (a * (1.0 - a) / trials as f64).sqrt();
        assert!((flips - (1.0 - a)).abs() <= 5.0 * se, "a={a}: {flips}");
    }
}

#[test]
fn unrelated_question_binomial_sum_is_a_bisymmetric_channel() {
    for p in [0.0, 0.2, 0.5, 0.9] {
        let a = RandomizerSpec::UnrelatedUniform { p }.effective_a();
        for n in 1..=5u32 {
            let c = BisymmetricChannel::new(a, n).unwrap();
            for r in 0..1u64 << n {
                for x in 0..1u64 << n {
                    let (ri, xi) = (BitIndex::new(r, n).unwrap(), BitIndex::new(x, n).unwrap());
                    let direct = unrelated_channel_entry(p, n, ri, xi).unwrap();
                    assert!((direct - c.entry_at(ri, xi).unwrap()).abs() <= 1e-14);
                }
            }
        }
    }
}

#[test]
fn random_configurations_keep_loss_above_one() {
    let mut rng = RandomSeed::new(77).rng_at(0);
    for _ in 0..500 {
        let n = rng.gen_range(1..=10u32);
        let a: f64 = rng.gen_range(0.0..1.0);
        if (a - 0.5).abs() < 1e-3 {
            continue;
        }
        let pi = sample_flat_dirichlet(1 << n, &mut rng).unwrap();
        let report = loss(pi.greenwood(), a, n).unwrap();
        assert!(report.loss_l >= 1.0 - 1e-12);
        assert!(report.c >= 1.0);
    }
}
