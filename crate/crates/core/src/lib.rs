//! Iterated bisymmetric randomized response.
//!
//! Each bit of an `n`-bit record is reported truthfully with probability `a`
//! and flipped otherwise. The resulting channel is the `n`-fold Kronecker
//! power `C_a(n)` of `[[a, 1-a], [1-a, a]]`, whose entries and inverse have
//! closed forms. That gives a one-line unbiased maximum-likelihood estimator
//! for any `k`-way marginal, exact covariance traces, and a direct link
//! between `a`, the differential-privacy budget, and statistical efficiency.
//!
//! ```
//! use birr::{channel::BisymmetricChannel, estimator::{estimate, Histogram}};
//!
//! let c = BisymmetricChannel::new(0.75, 1).unwrap();
//! assert_eq!(c.materialize().unwrap().entries(), &[0.75, 0.25, 0.25, 0.75]);
//!
//! // 25 zeros and 75 ones observed after randomization with a = 0.75.
//! let h = Histogram::from_counts(vec![25, 75]).unwrap();
//! let pi = estimate(&h, 0.75).unwrap();
//! assert!((pi.values()[1] - 1.0).abs() < 1e-12);
//! ```

pub mod casestudies;
pub mod channel;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod io;
pub mod matrix;
pub mod par;
pub mod privacy;
pub mod randomizer;
pub mod rng;
pub mod sim;

pub use channel::{BisymmetricChannel, BitIndex};
pub use error::{Error, Result};
pub use estimator::{Histogram, LossReport, MarginalQuery, ProbabilityVector, RawEstimate};
pub use matrix::{DenseChannelMatrix, DenseMatrix};
pub use privacy::{PrivacyBudget, PrivacyReport};
pub use randomizer::{BitRecord, RandomizerSpec, ResponseCorpus};
pub use rng::RandomSeed;
