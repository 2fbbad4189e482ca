//! End-to-end acceptance checks. Runs without the libtest harness so that each
//! check prints exactly one PASS or FAIL line; the process fails if any check does.

use std::time::{Duration, Instant};

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use birr::casestudies::compare_at_epsilon;
use birr::channel::{inverse_entry_by_distance, BisymmetricChannel, BitIndex};
use birr::estimator::{
    cov_trace_closed_form, covariance, efficiency_constant, loss, loss_approx_quality, ProbabilityVector,
};
use birr::privacy::{a_for_epsilon, a_for_epsilon_branch, c_at_alpha, epsilon_of, Branch};
use birr::randomizer::{randomize_corpus, simulate_protocol, BitRecord, RandomizerSpec, ResponseCorpus};
use birr::rng::RandomSeed;
use birr::sim::{figure_2a, figure_2b, mse_comparison, ratio_crossing, sample_flat_dirichlet};
use birr::{matrix::DenseMatrix, par};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn inverse_dense(a: f64, n: u32) -> DenseMatrix {
    let dim = 1usize << n;
    let mut m = DenseMatrix::zeros(dim);
    for x in 0..dim {
        for r in 0..dim {
            let d = ((x ^ r) as u64).count_ones();
            m.set(x, r, inverse_entry_by_distance(a, n, d).unwrap());
        }
    }
    m
}

fn inverse_correctness() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for a in [0.3, 0.6, 0.75, 0.9, 0.99] {
        for n in 0..=6 {
            let c = BisymmetricChannel::new(a, n).unwrap().materialize().unwrap();
            let inv = inverse_dense(a, n);
            let dim = 1usize << n;
            let dev = c.matmul(&inv).max_abs_diff(&DenseMatrix::identity(dim));
            worst = worst.max(dev);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(5),
        format!("max |C C^-1 - I| = {worst:.3e}, {:.3} s", elapsed.as_secs_f64()),
    )
}

fn trace_oracle() -> Outcome {
    let mut rng = RandomSeed::new(2024).rng_at(0);
    let configs = 200;
    let mut worst: f64 = 0.0;
    for _ in 0..configs {
        let n = rng.gen_range(1..=5u32);
        let pi = sample_flat_dirichlet(1 << n, &mut rng).unwrap();
        // keep away from the singular a = 1/2
        let a = if rng.gen_bool(0.5) {
            rng.gen_range(0.6..0.99)
        } else {
            rng.gen_range(0.01..0.4)
        };
        let m = rng.gen_range(1..=10_000u64);
        let brute = covariance(&pi, a, m).unwrap().trace();
        let closed = cov_trace_closed_form(pi.greenwood(), a, n, m).unwrap();
        worst = worst.max((brute - closed).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("{configs} configurations, max |trace - (c - s)/m| = {worst:.3e}"),
    )
}

fn caption_loss() -> Outcome {
    let a = RandomizerSpec::UnrelatedUniform { p: 0.5 }.effective_a();
    let l = loss(0.4, a, 2).unwrap().loss_l;
    outcome((l - 9.75).abs() <= 1e-12, format!("a = {a}, L = {l}"))
}

fn scaled_sample_mse() -> Outcome {
    let start = Instant::now();
    let pi = ProbabilityVector::new(vec![0.05, 0.15, 0.3, 0.5]).unwrap();
    let a = RandomizerSpec::UnrelatedUniform { p: 0.5 }.effective_a();
    let trials = 10_000;
    let r = mse_comparison(&pi, a, 1000, 9750, trials, &RandomSeed::new(11)).unwrap();
    let elapsed = start.elapsed();
    outcome(
        r.mse_randomized <= 1.10 * r.mse_direct && elapsed < Duration::from_secs(120),
        format!(
            "{trials} trials, MSE randomized(m=9750) = {:.4e}, direct(m=1000) = {:.4e}, ratio {:.4}, {:.1} s",
            r.mse_randomized,
            r.mse_direct,
            r.ratio(),
            elapsed.as_secs_f64()
        ),
    )
}

fn approximation_bounds() -> Outcome {
    let d3 = loss_approx_quality(3).unwrap();
    let d4 = loss_approx_quality(4).unwrap();
    let scaled: Vec<f64> = (3..=12)
        .map(|n| loss_approx_quality(n).unwrap() * (3.0 * n as f64).exp2())
        .collect();
    let max_scaled = scaled.iter().cloned().fold(0.0, f64::max);
    let bounded = scaled.iter().all(|v| v.is_finite()) && max_scaled <= 1e3;
    outcome(
        d3 <= 0.2386 && d4 <= 0.0029 && bounded,
        format!("delta(3) = {d3:.5}, delta(4) = {d4:.5}, max delta(n) 2^(3n) over n = 3..12 = {max_scaled:.4}"),
    )
}

fn channel_fidelity() -> Outcome {
    let specs = [
        RandomizerSpec::Warner { p: 0.7 },
        RandomizerSpec::UnrelatedUniform { p: 0.5 },
        RandomizerSpec::RapporOneTime { f: 0.5 },
        RandomizerSpec::RapporFull { f: 0.5, q: 0.75 },
    ];
    let samples = 100_000u64;
    let n = 2;
    let critical = ChiSquared::new(3.0).unwrap().inverse_cdf(1.0 - 1e-3);
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for (si, spec) in specs.iter().enumerate() {
        let channel = spec.channel(n).unwrap();
        for x in 0..4u64 {
            let record = BitRecord::from_index(x, n).unwrap();
            let mut rng = RandomSeed::with_stream(77, si as u64).rng_at(x);
            let mut counts = [0u64; 4];
            for _ in 0..samples {
                counts[simulate_protocol(spec, &record, &mut rng).index().unwrap() as usize] += 1;
            }
            let stat: f64 = (0..4u64)
                .map(|r| {
                    let expected =
                        samples as f64 * channel.entry_at(BitIndex::new(r, n).unwrap(), BitIndex::new(x, n).unwrap()).unwrap();
                    (counts[r as usize] as f64 - expected).powi(2) / expected
                })
                .sum();
            worst = worst.max(stat);
            pass &= stat < critical;
        }
    }
    outcome(
        pass,
        format!("4 mechanisms x 4 inputs, max chi-square = {worst:.3} (critical {critical:.3}, 3 df)"),
    )
}

fn privacy_roundtrips() -> Outcome {
    let mut worst_a: f64 = 0.0;
    for i in 1..=50 {
        let a = 0.5 + i as f64 * 0.0098;
        for k in 1..=4 {
            let eps = epsilon_of(a, k).unwrap();
            worst_a = worst_a.max((a_for_epsilon(eps, k).unwrap() - a).abs());
            let lying = a_for_epsilon_branch(epsilon_of(1.0 - a, k).unwrap(), k, Branch::Lying).unwrap();
            worst_a = worst_a.max((lying - (1.0 - a)).abs());
        }
    }
    let mut worst_eps: f64 = 0.0;
    for i in 1..=100 {
        let eps = i as f64 * 0.05;
        for k in 1..=4 {
            worst_eps = worst_eps.max((epsilon_of(a_for_epsilon(eps, k).unwrap(), k).unwrap() - eps).abs());
        }
    }
    // Where c exceeds 1e4 one ulp is already above 1e-10, so the gap is
    // measured relative to c there.
    let (mut worst_abs, mut worst_rel): (f64, f64) = (0.0, 0.0);
    for a in [0.55, 0.6, 0.75, 0.9, 0.99, 0.3, 0.1] {
        for n in 1..=4 {
            for k in 1..=n {
                let c = c_at_alpha(epsilon_of(a, k).unwrap(), k, n).unwrap();
                let gap = (c - efficiency_constant(a, n).unwrap()).abs();
                if c <= 1e4 {
                    worst_abs = worst_abs.max(gap);
                } else {
                    worst_rel = worst_rel.max(gap / c);
                }
            }
        }
    }

    let m = 1_000_000usize;
    let seed = RandomSeed::new(3);
    let ones = |bit: bool, seed: &RandomSeed| {
        let corpus = ResponseCorpus::from_records(1, vec![BitRecord::from_bits(&[bit]); m]).unwrap();
        let out = randomize_corpus(&corpus, 0.75, seed);
        out.iter().filter(|r| r.get(0)).count() as f64 / m as f64
    };
    let p1 = ones(true, &seed.derive(1));
    let p0 = ones(false, &seed.derive(2));
    let ratio = (p1 / p0).max(p0 / p1).max((1.0 - p1) / (1.0 - p0)).max((1.0 - p0) / (1.0 - p1));

    outcome(
        worst_a <= 1e-12 && worst_eps <= 1e-12 && worst_abs <= 1e-10 && worst_rel <= 1e-10 && (2.9..=3.1).contains(&ratio),
        format!(
            "a round trip {worst_a:.2e}, eps round trip {worst_eps:.2e}, c gap {worst_abs:.2e} (relative {worst_rel:.2e} where c > 1e4), empirical ratio {ratio:.4}"
        ),
    )
}

fn mechanism_comparison() -> Outcome {
    let mut crossings = Vec::new();
    for n in 1..=3 {
        crossings.push(ratio_crossing(&figure_2a(n).unwrap()));
    }
    let crossing_ok = crossings
        .iter()
        .all(|c| c.is_some_and(|p| (p - 2.0 / 3.0).abs() <= 0.005));
    let mut worst: f64 = 0.0;
    for row in figure_2b(1, 1).unwrap() {
        worst = worst.max((row.c_unrelated - row.c_warner).abs());
    }
    for k in 1..=2 {
        for i in 20..=200 {
            let row = compare_at_epsilon(i as f64 / 100.0, k, 2).unwrap();
            worst = worst.max((row.c_unrelated - row.c_warner).abs());
        }
    }
    outcome(
        crossing_ok && worst <= 1e-10,
        format!("crossings {crossings:.4?}, max |c_M - c_W| at equal eps = {worst:.2e}"),
    )
}

/// Best per-call time over repeated batches of roughly `batch` each.
fn best_time(mut call: impl FnMut()) -> f64 {
    let batch = Duration::from_millis(40);
    let mut best = f64::INFINITY;
    for _ in 0..12 {
        let start = Instant::now();
        let mut iters = 0u32;
        while iters == 0 || start.elapsed() < batch {
            call();
            iters += 1;
        }
        best = best.min(start.elapsed().as_secs_f64() / iters as f64);
    }
    best
}

fn growth(times: &[f64]) -> Vec<f64> {
    times.windows(2).map(|w| w[1] / w[0]).collect()
}

fn materialize_scaling() -> Outcome {
    let widths = 6..=11;
    let times: Vec<f64> = widths
        .clone()
        .map(|n| {
            let channel = BisymmetricChannel::new(0.75, n).unwrap();
            best_time(|| {
                std::hint::black_box(channel.materialize().unwrap());
            })
        })
        .collect();
    // Same fill into a reused buffer, which leaves out the cost of fresh pages.
    let reused: Vec<f64> = widths
        .map(|n| {
            let channel = BisymmetricChannel::new(0.75, n).unwrap();
            let mut out = channel.materialize().unwrap();
            best_time(|| {
                channel.materialize_into(&mut out, 12).unwrap();
                std::hint::black_box(&out);
            })
        })
        .collect();
    let factors = growth(&times);
    let pass = factors.iter().all(|f| (3.0..=6.0).contains(f));
    outcome(
        pass,
        format!(
            "seconds per call n=6..11 [{}], growth factors {factors:.2?}; into a reused buffer {:.2?}",
            times.iter().map(|t| format!("{t:.3e}")).collect::<Vec<_>>().join(", "),
            growth(&reused)
        ),
    )
}

fn moran_moments() -> Outcome {
    let draws = 1_000_000usize;
    let chunk = 10_000usize;
    let seed = RandomSeed::new(99);
    let partial = par::map_indexed(draws / chunk, |c| {
        let mut rng = seed.rng_at(c as u64);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..chunk {
            let s = sample_flat_dirichlet(4, &mut rng).unwrap().greenwood();
            s1 += s;
            s2 += s * s;
        }
        (s1, s2)
    });
    let (s1, s2) = partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let mean = s1 / draws as f64;
    let var = (s2 - draws as f64 * mean * mean) / (draws as f64 - 1.0);
    let (m_exact, v_exact) = (0.4, 0.08 / 7.0);
    let (em, ev) = ((mean - m_exact).abs() / m_exact, (var - v_exact).abs() / v_exact);
    outcome(
        em <= 0.01 && ev <= 0.05,
        format!("mean {mean:.5} (rel err {em:.2e}), variance {var:.6} (rel err {ev:.2e})"),
    )
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("inverse correctness", inverse_correctness),
        ("covariance trace oracle", trace_oracle),
        ("loss for the worked example", caption_loss),
        ("scaled sample size matches direct MSE", scaled_sample_mse),
        ("loss approximation bounds", approximation_bounds),
        ("mechanism channel fidelity", channel_fidelity),
        ("privacy round trips", privacy_roundtrips),
        ("mechanism comparison", mechanism_comparison),
        ("materialize scaling", materialize_scaling),
        ("Greenwood moments", moran_moments),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} [{tag}] {name}: {} ({:.2} s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
