//! Likelihood ratios, differential-privacy budgets, and the efficiency cost of
//! a given budget.
//!
//! A bisymmetric bit randomizer with truth probability `a` has worst-case
//! likelihood ratio `r(a) = max(a/(1-a), (1-a)/a)`. When any two inputs differ
//! in at most `k` bits the iterated randomizer is `k ln r(a)`-differentially
//! private. Expressed in the budget `eps`, the covariance constant becomes
//! `((e^{2eps/k} + 1) / (e^{eps/k} - 1)^2)^n` whatever parameterization produced
//! `a`.
//!
//! For `n = 1` bisymmetric randomizers are optimal for this loss at every
//! privacy level (Warner's randomizer is known to be optimal there).

use crate::error::{Error, Result};
use crate::estimator::{efficiency_constant, loss_function};

/// Which of the two `a` values with the same budget to return.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum Branch {
    /// `a > 1/2`: respondents mostly tell the truth.
    #[default]
    Truthful,
    /// `1 - a < 1/2`: respondents mostly lie. Same budget, same efficiency.
    Lying,
}

/// A budget `eps` protecting inputs that differ in at most `k` bits.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    k: u32,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, k: u32) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_k(k)?;
        Ok(Self { epsilon, k })
    }

    /// `k` checked against the record width `n`.
    pub fn for_width(epsilon: f64, k: u32, n: u32) -> Result<Self> {
        if k > n {
            return Err(Error::Domain {
                name: "k",
                value: k as f64,
                reason: "cannot exceed the record width n",
            });
        }
        Self::new(epsilon, k)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn a(&self, branch: Branch) -> f64 {
        let a = truthful_a(self.epsilon, self.k);
        match branch {
            Branch::Truthful => a,
            Branch::Lying => 1.0 - a,
        }
    }
}

/// Everything the privacy calculator knows about one channel.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PrivacyReport {
    pub a: f64,
    pub ratio: f64,
    pub epsilon_per_bit: f64,
    pub epsilon_total: f64,
    pub k: u32,
    pub n: u32,
    pub c_at_alpha: f64,
    /// `L(eps)` at the supplied `s`, if any.
    pub loss_at_alpha: Option<f64>,
}

/// `r(a) = max(a/(1-a), (1-a)/a)`.
pub fn likelihood_ratio(a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Domain {
            name: "a",
            value: a,
            reason: "must lie in [0, 1]",
        });
    }
    if a == 0.0 || a == 1.0 {
        return Err(Error::InfiniteDisclosure { a });
    }
    Ok((a / (1.0 - a)).max((1.0 - a) / a))
}

/// `k ln r(a)`.
pub fn epsilon_of(a: f64, k: u32) -> Result<f64> {
    check_k(k)?;
    Ok(k as f64 * likelihood_ratio(a)?.ln())
}

/// The truthful-branch `a = e^{eps/k} / (1 + e^{eps/k})`.
pub fn a_for_epsilon(epsilon: f64, k: u32) -> Result<f64> {
    a_for_epsilon_branch(epsilon, k, Branch::Truthful)
}

pub fn a_for_epsilon_branch(epsilon: f64, k: u32, branch: Branch) -> Result<f64> {
    Ok(PrivacyBudget::new(epsilon, k)?.a(branch))
}

fn truthful_a(epsilon: f64, k: u32) -> f64 {
    // logistic(t), written to stay finite for large t
    let t = epsilon / k as f64;
    1.0 / (1.0 + (-t).exp())
}

/// `c_alpha(eps) = ((e^{2eps/k} + 1) / (e^{eps/k} - 1)^2)^n`.
pub fn c_at_alpha(epsilon: f64, k: u32, n: u32) -> Result<f64> {
    if epsilon == 0.0 {
        return Err(Error::SingularChannel { a: 0.5 });
    }
    check_epsilon(epsilon)?;
    check_k(k)?;
    let t = epsilon / k as f64;
    let em1 = t.exp_m1();
    let base = ((2.0 * t).exp() + 1.0) / (em1 * em1);
    Ok(base.powi(n as i32))
}

/// `L(eps) = (c_alpha(eps) - s) / (1 - s)`.
pub fn loss_at_alpha(epsilon: f64, k: u32, n: u32, s: f64) -> Result<f64> {
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
    Ok(loss_function(c_at_alpha(epsilon, k, n)?, s))
}

/// Report for a channel parameter `a` at width `n` and Hamming bound `k`.
pub fn report_for_a(a: f64, k: u32, n: u32, s: Option<f64>) -> Result<PrivacyReport> {
    let ratio = likelihood_ratio(a)?;
    let epsilon_per_bit = ratio.ln();
    // a = 1/2 is perfectly private but singular.
    let c = efficiency_constant(a, n)?;
    let loss = s
        .map(|s| {
            if s >= 1.0 {
                Err(Error::Degenerate { s })
            } else {
                Ok(loss_function(c, s))
            }
        })
        .transpose()?;
    Ok(PrivacyReport {
        a,
        ratio,
        epsilon_per_bit,
        epsilon_total: k as f64 * epsilon_per_bit,
        k,
        n,
        c_at_alpha: c,
        loss_at_alpha: loss,
    })
}

/// Report for a budget `eps`, choosing `a` on the requested branch.
pub fn report_for_epsilon(epsilon: f64, k: u32, n: u32, s: Option<f64>, branch: Branch) -> Result<PrivacyReport> {
    let budget = PrivacyBudget::new(epsilon, k)?;
    let a = budget.a(branch);
    let c = c_at_alpha(epsilon, k, n)?;
    let loss = s.map(|s| loss_at_alpha(epsilon, k, n, s)).transpose()?;
    let ratio = (epsilon / k as f64).exp();
    Ok(PrivacyReport {
        a,
        ratio,
        epsilon_per_bit: epsilon / k as f64,
        epsilon_total: epsilon,
        k,
        n,
        c_at_alpha: c,
        loss_at_alpha: loss,
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "epsilon",
            value: epsilon,
            reason: "must be positive and finite",
        })
    }
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        Err(Error::Domain {
            name: "k",
            value: 0.0,
            reason: "must be at least 1",
        })
    } else {
        Ok(())
    }
}
