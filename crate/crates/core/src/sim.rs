//! Monte-Carlo harness: flat-Dirichlet sampling, simulated surveys, and the
//! datasets behind the loss and mechanism-comparison figures.
//!
//! Trials run through [`crate::par`] and draw from per-trial substreams, so
//! every dataset is a pure function of its configuration and seed.

use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Deserialize;

use crate::casestudies::{compare, compare_at_epsilon};
use crate::error::{Error, Result};
use crate::estimator::{efficiency_constant, loss, loss_function, Histogram, ProbabilityVector, RawEstimate};
use crate::par;
use crate::randomizer::{FlipSampler, RandomizerSpec};
use crate::rng::RandomSeed;

/// Uniform draw from the simplex over `cells` categories (normalized Exp(1) draws).
pub fn sample_flat_dirichlet<R: Rng + ?Sized>(cells: usize, rng: &mut R) -> Result<ProbabilityVector> {
    if cells < 2 || !cells.is_power_of_two() {
        return Err(Error::Domain {
            name: "cells",
            value: cells as f64,
            reason: "need a power of two, at least 2",
        });
    }
    let draws: Vec<f64> = (0..cells).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    Ok(ProbabilityVector::from_normalized(draws.into_iter().map(|d| d / total).collect()))
}

/// [`sample_flat_dirichlet`] from substream 0 of `seed`.
pub fn sample_flat_dirichlet_seeded(cells: usize, seed: &RandomSeed) -> Result<ProbabilityVector> {
    sample_flat_dirichlet(cells, &mut seed.rng_at(0))
}

/// Inverse-CDF sampling of cell indices.
#[derive(Clone, Debug)]
pub struct CellSampler {
    cumulative: Vec<f64>,
}

impl CellSampler {
    pub fn new(pi: &ProbabilityVector) -> Self {
        let mut acc = 0.0;
        let cumulative = pi
            .values()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { cumulative }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1) as u64
    }
}

/// `pi*(m) = X / m` from `m` direct (unrandomized) responses.
pub fn simulate_direct<R: Rng + ?Sized>(pi: &ProbabilityVector, m: u64, rng: &mut R) -> Result<RawEstimate> {
    if m == 0 {
        return Err(Error::EmptyCorpus);
    }
    let sampler = CellSampler::new(pi);
    let mut hist = Histogram::zeros(pi.width());
    for _ in 0..m {
        hist.add(sampler.sample(rng));
    }
    Ok(RawEstimate::new(
        hist.counts().iter().map(|&c| c as f64 / m as f64).collect(),
    ))
}

/// Histogram of `m` responses drawn from `pi` and randomized with truth probability `a`.
pub fn simulate_randomized_histogram<R: Rng + ?Sized>(pi: &ProbabilityVector, a: f64, m: u64, rng: &mut R) -> Histogram {
    let sampler = CellSampler::new(pi);
    let flips = FlipSampler::new(a);
    let width = pi.width();
    let mut hist = Histogram::zeros(width);
    for _ in 0..m {
        let x = sampler.sample(rng);
        hist.add(x ^ flips.mask(rng, width));
    }
    hist
}

/// The unbiased estimate from `m` simulated randomized responses.
pub fn simulate_randomized<R: Rng + ?Sized>(pi: &ProbabilityVector, a: f64, m: u64, rng: &mut R) -> Result<RawEstimate> {
    crate::estimator::estimate(&simulate_randomized_histogram(pi, a, m, rng), a)
}

/// Mean squared errors of the direct and randomized estimators over many trials.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct MseComparison {
    pub trials: usize,
    pub m_direct: u64,
    pub m_randomized: u64,
    pub mse_direct: f64,
    pub mse_randomized: f64,
}

impl MseComparison {
    pub fn ratio(&self) -> f64 {
        self.mse_randomized / self.mse_direct
    }
}

/// Estimates `E||pi_hat(m_randomized) - pi||^2` and `E||pi*(m_direct) - pi||^2`.
pub fn mse_comparison(
    pi: &ProbabilityVector,
    a: f64,
    m_direct: u64,
    m_randomized: u64,
    trials: usize,
    seed: &RandomSeed,
) -> Result<MseComparison> {
    if trials == 0 {
        return Err(Error::Domain {
            name: "trials",
            value: 0.0,
            reason: "at least one trial is required",
        });
    }
    let (direct_seed, random_seed) = (seed.derive(1), seed.derive(2));
    let errors = par::map_indexed(trials, |t| -> Result<(f64, f64)> {
        let d = simulate_direct(pi, m_direct, &mut direct_seed.rng_at(t as u64))?;
        let r = simulate_randomized(pi, a, m_randomized, &mut random_seed.rng_at(t as u64))?;
        Ok((d.squared_error(pi.values()), r.squared_error(pi.values())))
    });
    let mut sums = (0.0, 0.0);
    for e in errors {
        let (d, r) = e?;
        sums.0 += d;
        sums.1 += r;
    }
    Ok(MseComparison {
        trials,
        m_direct,
        m_randomized,
        mse_direct: sums.0 / trials as f64,
        mse_randomized: sums.1 / trials as f64,
    })
}

/// `ceil(l * m)`, rounding up so the scale factor is at least `l`.
pub fn scaled_sample_size(l: f64, m: u64) -> u64 {
    (l * m as f64).ceil() as u64
}

/// Which loss value scales the randomized sample size in figure 1a.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossScale {
    /// `f_L(2 / (2^n + 1))`, the value quoted for the published figure.
    #[default]
    Approx,
    /// `f_L(pi^T pi)` for the configured `pi`.
    Exact,
}

/// How the generating distribution is chosen.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PiSpec {
    Explicit(Vec<f64>),
    /// `"dirichlet-flat"`: one draw from the flat Dirichlet.
    Named(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n: u32,
    pub m: u64,
    pub trials: usize,
    pub pi: PiSpec,
    pub mechanism: RandomizerSpec,
    pub seed: u64,
    pub scale: LossScale,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 2,
            m: 1000,
            trials: 100,
            pi: PiSpec::Explicit(vec![0.05, 0.15, 0.3, 0.5]),
            mechanism: RandomizerSpec::UnrelatedUniform { p: 0.5 },
            seed: 1,
            scale: LossScale::Approx,
            output: None,
        }
    }
}

/// On-disk (TOML) form of [`ExperimentConfig`]; every field optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfigFile {
    pub n: Option<u32>,
    pub m: Option<u64>,
    pub trials: Option<usize>,
    pub pi: Option<PiSpec>,
    pub mechanism: Option<String>,
    pub seed: Option<u64>,
    pub scale: Option<LossScale>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfigFile {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn apply(self, mut base: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(n) = self.n {
            base.n = n;
        }
        if let Some(m) = self.m {
            base.m = m;
        }
        if let Some(t) = self.trials {
            base.trials = t;
        }
        if let Some(pi) = self.pi {
            base.pi = pi;
        }
        if let Some(mech) = self.mechanism {
            base.mechanism = mech.parse()?;
        }
        if let Some(seed) = self.seed {
            base.seed = seed;
        }
        if let Some(scale) = self.scale {
            base.scale = scale;
        }
        if self.output.is_some() {
            base.output = self.output;
        }
        Ok(base)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Domain {
                name: "trials",
                value: 0.0,
                reason: "at least one trial is required",
            });
        }
        if self.n == 0 || self.n > 20 {
            return Err(Error::Domain {
                name: "n",
                value: self.n as f64,
                reason: "experiments support 1 <= n <= 20",
            });
        }
        self.mechanism.validate()?;
        if let PiSpec::Explicit(v) = &self.pi {
            if v.len() != 1usize << self.n {
                return Err(Error::Dimension {
                    expected: 1usize << self.n,
                    found: v.len(),
                });
            }
        }
        Ok(())
    }

    /// The generating distribution, drawing it if configured as flat Dirichlet.
    pub fn resolve_pi(&self) -> Result<ProbabilityVector> {
        match &self.pi {
            PiSpec::Explicit(v) => ProbabilityVector::new(v.clone()),
            PiSpec::Named(name) if name == "dirichlet-flat" => {
                sample_flat_dirichlet_seeded(1usize << self.n, &RandomSeed::new(self.seed).derive(0xD1))
            }
            PiSpec::Named(other) => Err(Error::Query(format!(
                "unknown distribution {other:?}; expected an explicit vector or \"dirichlet-flat\""
            ))),
        }
    }
}

/// One estimate in the figure 1a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Fig1aRow {
    pub trial: usize,
    /// `direct`, `randomized`, or `randomized-scaled`.
    pub estimator: &'static str,
    pub m: u64,
    pub estimate: Vec<f64>,
}

/// Dataset and metadata for figure 1a.
#[derive(Clone, Debug, PartialEq)]
pub struct Fig1a {
    pub pi: ProbabilityVector,
    pub a: f64,
    /// The loss used to scale `m`.
    pub scale_loss: f64,
    pub scale: LossScale,
    /// `f_L(pi^T pi)`, reported alongside whichever scale was used.
    pub exact_loss: f64,
    pub approx_loss: f64,
    pub rows: Vec<Fig1aRow>,
}

/// Per-trial `pi*(m)`, `pi_hat(m)` and `pi_hat(ceil(L m))`.
pub fn figure_1a(cfg: &ExperimentConfig) -> Result<Fig1a> {
    cfg.validate()?;
    let pi = cfg.resolve_pi()?;
    let a = cfg.mechanism.effective_a();
    let report = loss(pi.greenwood(), a, cfg.n)?;
    let scale_loss = match cfg.scale {
        LossScale::Approx => report.loss_approx,
        LossScale::Exact => report.loss_l,
    };
    let m_scaled = scaled_sample_size(scale_loss, cfg.m);
    let seed = RandomSeed::new(cfg.seed);
    let seeds = [seed.derive(1), seed.derive(2), seed.derive(3)];
    let per_trial = par::map_indexed(cfg.trials, |t| -> Result<[Fig1aRow; 3]> {
        let idx = t as u64;
        let direct = simulate_direct(&pi, cfg.m, &mut seeds[0].rng_at(idx))?;
        let plain = simulate_randomized(&pi, a, cfg.m, &mut seeds[1].rng_at(idx))?;
        let scaled = simulate_randomized(&pi, a, m_scaled, &mut seeds[2].rng_at(idx))?;
        Ok([
            Fig1aRow { trial: t, estimator: "direct", m: cfg.m, estimate: direct.into_values() },
            Fig1aRow { trial: t, estimator: "randomized", m: cfg.m, estimate: plain.into_values() },
            Fig1aRow { trial: t, estimator: "randomized-scaled", m: m_scaled, estimate: scaled.into_values() },
        ])
    });
    let mut rows = Vec::with_capacity(3 * cfg.trials);
    for r in per_trial {
        rows.extend(r?);
    }
    Ok(Fig1a {
        pi,
        a,
        scale_loss,
        scale: cfg.scale,
        exact_loss: report.loss_l,
        approx_loss: report.loss_approx,
        rows,
    })
}

/// Unrelated-question `p` values shown in figures 1b and 1c.
pub const FIGURE_1_PS: [f64; 3] = [0.0001, 0.5, 0.9999];

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Fig1bRow {
    pub n: u32,
    pub p: f64,
    pub log_loss: f64,
}

/// `ln f_L(2 / (2^n + 1))` for `n = 1..=12` and each `p` in [`FIGURE_1_PS`].
pub fn figure_1b() -> Result<Vec<Fig1bRow>> {
    let mut rows = Vec::new();
    for p in FIGURE_1_PS {
        for n in 1..=12 {
            let cells = (n as f64).exp2();
            let c = efficiency_constant((2.0 - p) / 2.0, n)?;
            rows.push(Fig1bRow {
                n,
                p,
                log_loss: loss_function(c, 2.0 / (cells + 1.0)).ln(),
            });
        }
    }
    Ok(rows)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Fig1cRow {
    pub n: u32,
    pub p: f64,
    pub draw: usize,
    pub s: f64,
    /// `f_L(pi^T pi) / f_L(2 / (2^n + 1))`
    pub ratio: f64,
    /// `f_L(2^-n) / f_L(2 / (2^n + 1))`, the smallest possible ratio.
    pub floor_ratio: f64,
}

/// Loss ratio for `draws` flat-Dirichlet `pi` per `n = 2..=12`.
pub fn figure_1c(draws: usize, seed: &RandomSeed) -> Result<Vec<Fig1cRow>> {
    let mut rows = Vec::new();
    for n in 2..=12u32 {
        let cells = 1usize << n;
        let base = seed.derive(u64::from(n));
        let pis = par::map_indexed(draws, |d| sample_flat_dirichlet(cells, &mut base.rng_at(d as u64)));
        let pis = pis.into_iter().collect::<Result<Vec<_>>>()?;
        for p in FIGURE_1_PS {
            let c = efficiency_constant((2.0 - p) / 2.0, n)?;
            let approx = loss_function(c, 2.0 / (cells as f64 + 1.0));
            let floor = loss_function(c, 1.0 / cells as f64);
            for (draw, pi) in pis.iter().enumerate() {
                let s = pi.greenwood();
                rows.push(Fig1cRow {
                    n,
                    p,
                    draw,
                    s,
                    ratio: loss_function(c, s) / approx,
                    floor_ratio: floor / approx,
                });
            }
        }
    }
    Ok(rows)
}

/// `c_M / c_W` for `p` on a 0.001 grid in `(0, 0.8)`, skipping the singular `p = 0.5`.
pub fn figure_2a(n: u32) -> Result<Vec<crate::casestudies::MechanismComparison>> {
    (1..800)
        .filter(|&i| i != 500)
        .map(|i| compare(i as f64 / 1000.0, n))
        .collect()
}

/// Constants at equal budget for `eps` on a 0.01 grid over `[0.2, 2]`.
pub fn figure_2b(k: u32, n: u32) -> Result<Vec<crate::casestudies::PrivacyComparison>> {
    (20..=200).map(|i| compare_at_epsilon(i as f64 / 100.0, k, n)).collect()
}

/// Linear interpolation of the first crossing of `ratio = 1` in figure 2a data.
pub fn ratio_crossing(rows: &[crate::casestudies::MechanismComparison]) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        let (x0, y0) = (w[0].p, w[0].ratio - 1.0);
        let (x1, y1) = (w[1].p, w[1].ratio - 1.0);
        (y0 < 0.0 && y1 >= 0.0).then(|| x0 + (x1 - x0) * (-y0) / (y1 - y0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_is_on_simplex() {
        let mut rng = RandomSeed::new(5).rng_at(0);
        for cells in [2, 4, 64] {
            let pi = sample_flat_dirichlet(cells, &mut rng).unwrap();
            assert!((pi.values().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(pi.values().iter().all(|&v| v >= 0.0));
        }
        assert!(sample_flat_dirichlet(1, &mut rng).is_err());
        let s = RandomSeed::new(9);
        assert_eq!(sample_flat_dirichlet_seeded(8, &s).unwrap(), sample_flat_dirichlet_seeded(8, &s).unwrap());
    }

    #[test]
    fn cell_sampler_respects_zero_cells() {
        let pi = ProbabilityVector::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let s = CellSampler::new(&pi);
        let mut rng = RandomSeed::new(1).rng_at(0);
        assert!((0..1000).all(|_| s.sample(&mut rng) == 1));
    }

    #[test]
    fn scaled_size_rounds_up() {
        assert_eq!(scaled_sample_size(9.75, 1000), 9750);
        assert_eq!(scaled_sample_size(9.2677, 1000), 9268);
    }

    #[test]
    fn figure_1a_shape_and_scale() {
        let cfg = ExperimentConfig { trials: 4, ..Default::default() };
        let fig = figure_1a(&cfg).unwrap();
        assert_eq!(fig.rows.len(), 12);
        assert!((fig.scale_loss - 9.75).abs() < 1e-12);
        assert!((fig.exact_loss - (6.25 - 0.365) / 0.635).abs() < 1e-12);
        assert_eq!(fig.rows[2].m, 9750);
        assert_eq!(fig, figure_1a(&cfg).unwrap());
    }

    #[test]
    fn config_file_overrides() {
        let file = ExperimentConfigFile::parse(
            "n = 3\nm = 50\ntrials = 2\npi = \"dirichlet-flat\"\nmechanism = \"warner:0.8\"\nseed = 4\nscale = \"exact\"\n",
        )
        .unwrap();
        let cfg = file.apply(ExperimentConfig::default()).unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.mechanism, RandomizerSpec::Warner { p: 0.8 });
        assert_eq!(cfg.scale, LossScale::Exact);
        assert_eq!(cfg.resolve_pi().unwrap().values().len(), 8);
        assert!(ExperimentConfigFile::parse("bogus = 1").is_err());
        let bad = ExperimentConfig { n: 3, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn figure_2a_crossing_near_two_thirds() {
        let rows = figure_2a(1).unwrap();
        let x = ratio_crossing(&rows).unwrap();
        assert!((x - 2.0 / 3.0).abs() <= 0.005, "{x}");
    }
}
