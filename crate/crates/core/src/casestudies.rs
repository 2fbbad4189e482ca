//! Efficiency constants of the unrelated uniform question and Warner
//! mechanisms, compared by parameter and by privacy budget.
//!
//! Indexed by their own parameter `p` the two mechanisms differ: the
//! unrelated question is better for `p < 2/3`. Indexed by the budget `eps`
//! they coincide.

use crate::error::{Error, Result};
use crate::privacy::a_for_epsilon;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct MechanismComparison {
    pub p: f64,
    pub n: u32,
    pub c_unrelated: f64,
    pub c_warner: f64,
    /// `c_unrelated / c_warner`
    pub ratio: f64,
}

/// The two constants at the same budget.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PrivacyComparison {
    pub epsilon: f64,
    pub k: u32,
    pub n: u32,
    pub p_unrelated: f64,
    pub p_warner: f64,
    pub c_unrelated: f64,
    pub c_warner: f64,
}

/// `c_M = ((p^2 - 2p + 2) / (2 (p-1)^2))^n`.
pub fn unrelated_c(p: f64, n: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            name: "p",
            value: p,
            reason: "must lie in [0, 1]",
        });
    }
    if p == 1.0 {
        return Err(Error::SingularChannel { a: 0.5 });
    }
    let base = (p * p - 2.0 * p + 2.0) / (2.0 * (p - 1.0) * (p - 1.0));
    Ok(base.powi(n as i32))
}

/// `c_W = ((2p^2 - 2p + 1) / (2p - 1)^2)^n`.
pub fn warner_c(p: f64, n: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            name: "p",
            value: p,
            reason: "must lie in [0, 1]",
        });
    }
    if p == 0.5 {
        return Err(Error::SingularChannel { a: 0.5 });
    }
    let base = (2.0 * p * p - 2.0 * p + 1.0) / ((2.0 * p - 1.0) * (2.0 * p - 1.0));
    Ok(base.powi(n as i32))
}

pub fn compare(p: f64, n: u32) -> Result<MechanismComparison> {
    let c_unrelated = unrelated_c(p, n)?;
    let c_warner = warner_c(p, n)?;
    Ok(MechanismComparison {
        p,
        n,
        c_unrelated,
        c_warner,
        ratio: c_unrelated / c_warner,
    })
}

/// Both mechanisms tuned to budget `eps` (Hamming bound `k`), each through
/// its own parameterization: Warner `p = a`, unrelated question `p = 2 - 2a`.
pub fn compare_at_epsilon(epsilon: f64, k: u32, n: u32) -> Result<PrivacyComparison> {
    let a = a_for_epsilon(epsilon, k)?;
    let p_warner = a;
    let p_unrelated = 2.0 - 2.0 * a;
    Ok(PrivacyComparison {
        epsilon,
        k,
        n,
        p_unrelated,
        p_warner,
        c_unrelated: unrelated_c(p_unrelated, n)?,
        c_warner: warner_c(p_warner, n)?,
    })
}
