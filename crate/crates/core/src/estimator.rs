//! Marginal histograms, the unbiased estimate `m^-1 C_{a/(2a-1)}(k) y`, its
//! covariance, and the closed-form efficiency loss.
//!
//! The estimate is returned raw: it sums to one but individual cells may be
//! negative. [`project_to_simplex`] is available as explicit post-processing.

use crate::channel::{BisymmetricChannel, DEFAULT_DENSE_CAP};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::par;
use crate::randomizer::ResponseCorpus;

/// Largest width for which [`covariance`] builds dense `2^n x 2^n` matrices.
pub const COVARIANCE_CAP: u32 = 8;

/// Bit positions `K` selecting a `k`-way marginal, strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarginalQuery {
    positions: Vec<u32>,
}

impl MarginalQuery {
    pub fn new(positions: Vec<u32>, width: u32) -> Result<Self> {
        if positions.len() > 63 {
            return Err(Error::Query(format!("{} positions; at most 63 supported", positions.len())));
        }
        if let Some(&p) = positions.iter().find(|&&p| p >= width) {
            return Err(Error::Query(format!("position {p} out of range for width {width}")));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Query(format!(
                "positions {positions:?} must be distinct and strictly increasing"
            )));
        }
        Ok(Self { positions })
    }

    /// All positions `0..width`.
    pub fn all(width: u32) -> Result<Self> {
        Self::new((0..width).collect(), width)
    }

    pub fn positions(&self) -> &[u32] {
        &self.positions
    }

    pub fn k(&self) -> u32 {
        self.positions.len() as u32
    }
}

/// Counts over the `2^k` cells of a marginal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    k: u32,
    counts: Vec<u64>,
    m: u64,
}

impl Histogram {
    pub fn zeros(k: u32) -> Self {
        Self {
            k,
            counts: vec![0; 1usize << k],
            m: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let k = cells_to_width(counts.len())?;
        let m = counts.iter().sum();
        Ok(Self { k, counts, m })
    }

    #[inline]
    pub fn add(&mut self, cell: u64) {
        self.counts[cell as usize] += 1;
        self.m += 1;
    }

    /// Cellwise sum; both histograms must have the same `k`.
    pub fn merge(mut self, other: &Self) -> Self {
        assert_eq!(self.k, other.k, "merging histograms of different width");
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.m += other.m;
        self
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn m(&self) -> u64 {
        self.m
    }
}

/// A probability vector over `2^n` cells: nonnegative, summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        cells_to_width(values.len())?;
        if let Some(&v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain {
                name: "pi",
                value: v,
                reason: "probabilities must be finite and nonnegative",
            });
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain {
                name: "sum(pi)",
                value: sum,
                reason: "probabilities must sum to 1",
            });
        }
        Ok(Self(values))
    }

    pub fn uniform(width: u32) -> Self {
        let cells = 1usize << width;
        Self(vec![1.0 / cells as f64; cells])
    }

    pub fn point_mass(width: u32, cell: usize) -> Self {
        let mut v = vec![0.0; 1usize << width];
        v[cell] = 1.0;
        Self(v)
    }

    pub(crate) fn from_normalized(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn width(&self) -> u32 {
        self.0.len().trailing_zeros()
    }

    /// The Greenwood statistic `s = pi^T pi`.
    pub fn greenwood(&self) -> f64 {
        self.0.iter().map(|p| p * p).sum()
    }
}

/// The unbiased estimate; sums to one, cells may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct RawEstimate(Vec<f64>);

impl RawEstimate {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn squared_error(&self, truth: &[f64]) -> f64 {
        self.0.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum()
    }
}

/// Efficiency figures for a channel `C_a(n)` at Greenwood statistic `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport {
    /// `((a^2 + (1-a)^2) / (2a-1)^2)^n`
    pub c: f64,
    pub s: f64,
    /// Covariance trace for a single response (`m = 1`): `c - s`. Divide by `m`.
    pub trace_cov: f64,
    /// `f_L(s) = (c - s) / (1 - s)`
    pub loss_l: f64,
    /// `f_L(2^-n)`, the smallest loss any distribution can have.
    pub loss_floor: f64,
    /// `f_L(2 / (2^n + 1))`, the flat-Dirichlet approximation for unknown `pi`.
    pub loss_approx: f64,
}

fn cells_to_width(len: usize) -> Result<u32> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::Dimension {
            expected: len.max(1).next_power_of_two(),
            found: len,
        });
    }
    Ok(len.trailing_zeros())
}

/// Counts `eta(r_j[K])` over the corpus. Shards are merged by addition, so
/// the result does not depend on scheduling.
pub fn marginal_histogram(corpus: &ResponseCorpus, query: &MarginalQuery) -> Result<Histogram> {
    if let Some(&p) = query.positions().iter().find(|&&p| p >= corpus.width()) {
        return Err(Error::Query(format!(
            "position {p} out of range for corpus width {}",
            corpus.width()
        )));
    }
    let k = query.k();
    let positions = query.positions();
    Ok(par::fold_items(
        corpus.records(),
        || Histogram::zeros(k),
        |mut h, r| {
            h.add(r.sub_index(positions));
            h
        },
        |a, b| a.merge(&b),
    ))
}

/// `m^-1 C_{a/(2a-1)}(k) y` under the default dense cap.
pub fn estimate(hist: &Histogram, a: f64) -> Result<RawEstimate> {
    estimate_with_cap(hist, a, DEFAULT_DENSE_CAP)
}

/// As [`estimate`]; widths above `cap` apply the inverse channel bit by bit
/// instead of materializing it.
pub fn estimate_with_cap(hist: &Histogram, a: f64, cap: u32) -> Result<RawEstimate> {
    let inverse = BisymmetricChannel::new(a, hist.k())?.inverse()?;
    if hist.m() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let m = hist.m() as f64;
    let y: Vec<f64> = hist.counts().iter().map(|&c| c as f64).collect();
    let unscaled = if hist.k() <= cap {
        inverse.materialize_capped(cap)?.matvec(&y)
    } else {
        inverse.apply(&y)?
    };
    Ok(RawEstimate(unscaled.into_iter().map(|v| v / m).collect()))
}

/// Histogram then estimate in one call.
pub fn estimate_marginal(corpus: &ResponseCorpus, query: &MarginalQuery, a: f64) -> Result<RawEstimate> {
    estimate(&marginal_histogram(corpus, query)?, a)
}

/// `((a^2 + (1-a)^2) / (2a-1)^2)^n`, the covariance-trace constant.
pub fn efficiency_constant(a: f64, n: u32) -> Result<f64> {
    if a == 0.5 || !a.is_finite() {
        return Err(Error::SingularChannel { a });
    }
    let base = (a * a + (1.0 - a) * (1.0 - a)) / ((2.0 * a - 1.0) * (2.0 * a - 1.0));
    Ok(base.powi(n as i32))
}

/// `f_L(s) = (c - s) / (1 - s)`.
pub fn loss_function(c: f64, s: f64) -> f64 {
    (c - s) / (1.0 - s)
}

/// Exact covariance `m^-1 (C^-1 diag(C pi) C^-T - pi pi^T)` of the estimate.
pub fn covariance(pi: &ProbabilityVector, a: f64, m: u64) -> Result<DenseMatrix> {
    let n = pi.width();
    if n > COVARIANCE_CAP {
        return Err(Error::WidthCap {
            width: n,
            cap: COVARIANCE_CAP,
        });
    }
    if m == 0 {
        return Err(Error::EmptyCorpus);
    }
    let ch = BisymmetricChannel::new(a, n)?;
    let inv = ch.inverse()?.materialize()?;
    let c = ch.materialize()?;
    let observed = c.matvec(pi.values());
    let core = inv.matmul(&DenseMatrix::diagonal(&observed)).matmul(&inv.transpose());
    Ok(scaled_minus_outer(core, pi.values(), m))
}

/// Covariance `m^-1 (diag(pi) - pi pi^T)` of the non-randomized estimate.
pub fn direct_covariance(pi: &ProbabilityVector, m: u64) -> Result<DenseMatrix> {
    if m == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(scaled_minus_outer(DenseMatrix::diagonal(pi.values()), pi.values(), m))
}

fn scaled_minus_outer(mut core: DenseMatrix, pi: &[f64], m: u64) -> DenseMatrix {
    let dim = core.dim();
    let inv_m = 1.0 / m as f64;
    for i in 0..dim {
        for j in 0..dim {
            let v = core.get(i, j);
            core.set(i, j, (v - pi[i] * pi[j]) * inv_m);
        }
    }
    core
}

/// `m^-1 (c - s)`.
pub fn cov_trace_closed_form(s: f64, a: f64, n: u32, m: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok((efficiency_constant(a, n)? - s) / m as f64)
}

/// Loss of the randomized estimator relative to direct observation.
pub fn loss(s: f64, a: f64, n: u32) -> Result<LossReport> {
    if s >= 1.0 {
        return Err(Error::Degenerate { s });
    }
    if !(s > 0.0) {
        return Err(Error::Domain {
            name: "s",
            value: s,
            reason: "the Greenwood statistic must be positive",
        });
    }
    let c = efficiency_constant(a, n)?;
    let cells = (n as f64).exp2();
    Ok(LossReport {
        c,
        s,
        trace_cov: c - s,
        loss_l: loss_function(c, s),
        loss_floor: loss_function(c, 1.0 / cells),
        loss_approx: loss_function(c, 2.0 / (cells + 1.0)),
    })
}

/// `Tr(cov(randomized)) / Tr(cov(direct))` from full matrices.
pub fn loss_ratio_empirical(pi: &ProbabilityVector, a: f64, m: u64) -> Result<f64> {
    let randomized = covariance(pi, a, m)?.trace();
    let direct = direct_covariance(pi, m)?.trace();
    if direct <= 0.0 {
        return Err(Error::Degenerate { s: pi.greenwood() });
    }
    Ok(randomized / direct)
}

/// Mean and variance of `pi^T pi` for flat-Dirichlet `pi` on `2^n` cells.
pub fn greenwood_moments(n: u32) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Domain {
            name: "n",
            value: 0.0,
            reason: "at least one bit (two cells) is required",
        });
    }
    Ok(greenwood_moments_cells((n as f64).exp2()))
}

/// Moran's moments for `cells` categories: `2/(N+1)` and
/// `4(N-1) / ((N+1)^2 (N+2) (N+3))`.
pub fn greenwood_moments_cells(cells: f64) -> (f64, f64) {
    let mean = 2.0 / (cells + 1.0);
    let var = 4.0 * (cells - 1.0) / ((cells + 1.0).powi(2) * (cells + 2.0) * (cells + 3.0));
    (mean, var)
}

/// Upper bound `delta(n)` on `E f_L(S) / f_L(E S) - 1`, uniform in `a`.
///
/// With `S = pi^T pi`, the second-order bound is
/// `lambda Var(S) / (2 f_L(E S))` where `lambda` is the largest
/// `f_L''(s) = 2 (c-1) / (1-s)^3` up to `s* = E S + 10 sd(S)` (Chebyshev at 1%).
/// The ratio increases in `c`; its `c -> inf` limit is
/// `Var(S) (1 - E S) / (1 - s*)^3`.
pub fn loss_approx_quality(n: u32) -> Result<f64> {
    let (mean, var, s_star) = delta_terms(n)?;
    Ok(var * (1.0 - mean) / (1.0 - s_star).powi(3))
}

/// The same bound at a finite efficiency constant `c > 1`.
pub fn loss_approx_quality_at(n: u32, c: f64) -> Result<f64> {
    let (mean, var, s_star) = delta_terms(n)?;
    let lambda = 2.0 * (c - 1.0) / (1.0 - s_star).powi(3);
    Ok(lambda * var / (2.0 * loss_function(c, mean)))
}

fn delta_terms(n: u32) -> Result<(f64, f64, f64)> {
    if n <= 2 {
        return Err(Error::Domain {
            name: "n",
            value: n as f64,
            reason: "the approximation bound is stated for n > 2",
        });
    }
    let (mean, var) = greenwood_moments(n)?;
    Ok((mean, var, mean + 10.0 * var.sqrt()))
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_to_simplex(estimate: &RawEstimate) -> ProbabilityVector {
    let v = estimate.values();
    let mut sorted = v.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    ProbabilityVector::from_normalized(v.iter().map(|x| (x - theta).max(0.0)).collect())
}
