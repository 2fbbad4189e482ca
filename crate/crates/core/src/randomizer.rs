//! Bitwise-independent bisymmetric randomization of binary records.
//!
//! The randomizer is `M(x) = x XOR u` where `u` holds `n` independent
//! Bernoulli(`1 - a`) draws. The named mechanisms (Warner, the unrelated
//! uniform question, and the symmetric Rappor modes) are all of this form for
//! some effective truth probability `a`; [`RandomizerSpec::effective_a`]
//! performs that reduction and [`simulate_protocol`] runs each mechanism's own
//! two-stage protocol so the reduction can be checked empirically.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::channel::{BisymmetricChannel, BitIndex};
use crate::error::{check_probability, Error, Result};
use crate::par;
use crate::rng::RandomSeed;

/// A fixed-width binary record, packed little-endian into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitRecord {
    width: u32,
    words: Vec<u64>,
}

impl BitRecord {
    pub fn zeros(width: u32) -> Self {
        Self {
            width,
            words: vec![0; words_for(width)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut r = Self::zeros(bits.len() as u32);
        for (i, &b) in bits.iter().enumerate() {
            r.set(i as u32, b);
        }
        r
    }

    /// The `width`-bit record whose index `eta` is `value`. Requires `width <= 64`.
    pub fn from_index(value: u64, width: u32) -> Result<Self> {
        if width > 64 {
            return Err(Error::Dimension {
                expected: 64,
                found: width as usize,
            });
        }
        BitIndex::new(value, width)?;
        let mut r = Self::zeros(width);
        if width > 0 {
            r.words[0] = value;
        }
        Ok(r)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn get(&self, i: u32) -> bool {
        assert!(i < self.width, "bit {i} out of range for width {}", self.width);
        (self.words[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: u32, value: bool) {
        assert!(i < self.width, "bit {i} out of range for width {}", self.width);
        let w = &mut self.words[(i / 64) as usize];
        let mask = 1u64 << (i % 64);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.width).map(move |i| self.get(i))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.bits().collect()
    }

    /// Number of set bits, `|x|`.
    pub fn weight(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// `eta` of the whole record. Requires `width <= 64`.
    pub fn index(&self) -> Option<u64> {
        match self.width {
            0 => Some(0),
            1..=64 => Some(self.words[0]),
            _ => None,
        }
    }

    /// `eta(x[K])`: position `j` of `positions` contributes `2^j`.
    #[inline]
    pub fn sub_index(&self, positions: &[u32]) -> u64 {
        positions
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &p)| acc | (u64::from(self.get(p)) << j))
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.words {
            *w = !*w;
        }
        out.clear_tail();
        out
    }

    fn clear_tail(&mut self) {
        let rem = self.width % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for BitRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BitRecord(")?;
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}

fn words_for(width: u32) -> usize {
    width.div_ceil(64) as usize
}

/// An ordered collection of records sharing one width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponseCorpus {
    width: u32,
    records: Vec<BitRecord>,
}

impl ResponseCorpus {
    pub fn new(width: u32) -> Self {
        Self {
            width,
            records: Vec::new(),
        }
    }

    pub fn from_records(width: u32, records: Vec<BitRecord>) -> Result<Self> {
        if let Some(bad) = records.iter().find(|r| r.width() != width) {
            return Err(Error::Dimension {
                expected: width as usize,
                found: bad.width() as usize,
            });
        }
        Ok(Self { width, records })
    }

    pub fn push(&mut self, record: BitRecord) -> Result<()> {
        if record.width() != self.width {
            return Err(Error::Dimension {
                expected: self.width as usize,
                found: record.width() as usize,
            });
        }
        self.records.push(record);
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[BitRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BitRecord> {
        self.records.iter()
    }
}

/// A named randomization mechanism.
///
/// Rappor's mode bit is split into two variants. The full (two-stage) mode is
/// only bisymmetric when its instantaneous stage uses `p = 1 - q`, so only `q`
/// is stored; [`RandomizerSpec::rappor_full_with_p`] rejects other `p`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum RandomizerSpec {
    /// Report each bit truthfully with probability `a`.
    Direct { a: f64 },
    /// Warner's spinner: truthful with probability `p`, inverted otherwise.
    Warner { p: f64 },
    /// With probability `p` answer "flip a coin, is it heads?" instead.
    UnrelatedUniform { p: f64 },
    /// Rappor one-time mode: permanent randomized response only.
    RapporOneTime { f: f64 },
    /// Rappor permanent then instantaneous randomized response with `p = 1 - q`.
    RapporFull { f: f64, q: f64 },
}

impl RandomizerSpec {
    pub fn rappor_full_with_p(f: f64, q: f64, p: f64) -> Result<Self> {
        if (p - (1.0 - q)).abs() > 1e-12 {
            return Err(Error::Mechanism(format!(
                "rappor with p = {p}, q = {q}: only the symmetric mode p = 1 - q is a bisymmetric randomizer"
            )));
        }
        let spec = Self::RapporFull { f, q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Direct { a } => check_probability("a", a),
            Self::Warner { p } | Self::UnrelatedUniform { p } => check_probability("p", p),
            Self::RapporOneTime { f } => check_probability("f", f),
            Self::RapporFull { f, q } => {
                check_probability("f", f)?;
                check_probability("q", q)
            }
        }
    }

    /// The truth probability `a` of the equivalent bisymmetric bit randomizer.
    pub fn effective_a(&self) -> f64 {
        match *self {
            Self::Direct { a } => a,
            Self::Warner { p } => p,
            Self::UnrelatedUniform { p } => (2.0 - p) / 2.0,
            Self::RapporOneTime { f } => (2.0 - f) / 2.0,
            Self::RapporFull { f, q } => q - (q - 0.5) * f,
        }
    }

    pub fn channel(&self, width: u32) -> Result<BisymmetricChannel> {
        self.validate()?;
        BisymmetricChannel::new(self.effective_a(), width)
    }
}

/// Free-function form of [`RandomizerSpec::effective_a`].
pub fn effective_a(spec: &RandomizerSpec) -> f64 {
    spec.effective_a()
}

impl fmt::Display for RandomizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Direct { a } => write!(f, "direct:{a}"),
            Self::Warner { p } => write!(f, "warner:{p}"),
            Self::UnrelatedUniform { p } => write!(f, "unrelated:{p}"),
            Self::RapporOneTime { f: ff } => write!(f, "rappor-once:{ff}"),
            Self::RapporFull { f: ff, q } => write!(f, "rappor:{ff},{q}"),
        }
    }
}

impl FromStr for RandomizerSpec {
    type Err = Error;

    /// Parses `direct:A`, `warner:P`, `unrelated:P`, `rappor-once:F`, and
    /// `rappor:F,Q` or `rappor:f=F,q=Q[,p=P]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Mechanism(format!("{s:?}: {msg}"));
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| bad("expected KIND:PARAMS, e.g. unrelated:0.5"))?;
        let mut named = Vec::new();
        for (pos, tok) in args.split(',').enumerate() {
            let tok = tok.trim();
            let (key, val) = match tok.split_once('=') {
                Some((k, v)) => (Some(k.trim().to_ascii_lowercase()), v.trim()),
                None => (None, tok),
            };
            let value: f64 = val.parse().map_err(|_| bad("parameter is not a number"))?;
            named.push((pos, key, value));
        }
        let get = |name: &str, pos: usize| -> Option<f64> {
            named
                .iter()
                .find(|(_, k, _)| k.as_deref() == Some(name))
                .or_else(|| named.iter().find(|(p, k, _)| k.is_none() && *p == pos))
                .map(|(_, _, v)| *v)
        };
        let need = |name: &str, pos: usize| get(name, pos).ok_or_else(|| bad(&format!("missing parameter {name}")));
        let spec = match kind.trim().to_ascii_lowercase().as_str() {
            "direct" => Self::Direct { a: need("a", 0)? },
            "warner" => Self::Warner { p: need("p", 0)? },
            "unrelated" | "unrelated-uniform" => Self::UnrelatedUniform { p: need("p", 0)? },
            "rappor-once" | "rappor-one-time" => Self::RapporOneTime { f: need("f", 0)? },
            "rappor" | "rappor-full" => {
                let f = need("f", 0)?;
                let q = need("q", 1)?;
                match get("p", 2) {
                    Some(p) => return Self::rappor_full_with_p(f, q, p),
                    None => Self::RapporFull { f, q },
                }
            }
            other => return Err(bad(&format!("unknown mechanism {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Bernoulli(`1 - a`) flip decisions from one 64-bit draw each.
///
/// A flip happens when the draw is below `(1 - a) 2^64`. The endpoints are
/// exact: `a = 1` never flips and `a = 0` always flips.
#[derive(Copy, Clone, Debug)]
pub struct FlipSampler {
    threshold: u64,
    always: bool,
}

impl FlipSampler {
    pub fn new(a: f64) -> Self {
        let flip = 1.0 - a;
        if flip >= 1.0 {
            return Self {
                threshold: u64::MAX,
                always: true,
            };
        }
        let threshold = if flip <= 0.0 {
            0
        } else {
            (flip * 18_446_744_073_709_551_616.0) as u64
        };
        Self {
            threshold,
            always: false,
        }
    }

    #[inline]
    pub fn flip<R: RngCore + ?Sized>(&self, rng: &mut R) -> bool {
        self.always || rng.next_u64() < self.threshold
    }

    /// A mask of `width <= 64` independent flips.
    #[inline]
    pub fn mask<R: RngCore + ?Sized>(&self, rng: &mut R, width: u32) -> u64 {
        (0..width).fold(0u64, |m, i| m | (u64::from(self.flip(rng)) << i))
    }
}

/// `x XOR u` drawing `u` from `rng`.
pub fn randomize_with<R: RngCore + ?Sized>(x: &BitRecord, a: f64, rng: &mut R) -> BitRecord {
    let sampler = FlipSampler::new(a);
    let mut out = x.clone();
    for (wi, word) in out.words.iter_mut().enumerate() {
        let bits = (x.width - 64 * wi as u32).min(64);
        *word ^= sampler.mask(rng, bits);
    }
    out
}

/// Randomizes one record using substream 0 of `seed`.
pub fn randomize(x: &BitRecord, a: f64, seed: &RandomSeed) -> BitRecord {
    randomize_with(x, a, &mut seed.rng_at(0))
}

/// Randomizes every record, record `j` drawing from substream `j` of `seed`.
/// Output is identical with or without the `parallel` feature.
pub fn randomize_corpus(corpus: &ResponseCorpus, a: f64, seed: &RandomSeed) -> ResponseCorpus {
    let records = par::map_indexed(corpus.len(), |j| {
        randomize_with(&corpus.records[j], a, &mut seed.rng_at(j as u64))
    });
    ResponseCorpus {
        width: corpus.width,
        records,
    }
}

/// Single-threaded [`randomize_corpus`].
pub fn randomize_corpus_serial(corpus: &ResponseCorpus, a: f64, seed: &RandomSeed) -> ResponseCorpus {
    let records = par::map_indexed_serial(corpus.len(), |j| {
        randomize_with(&corpus.records[j], a, &mut seed.rng_at(j as u64))
    });
    ResponseCorpus {
        width: corpus.width,
        records,
    }
}

/// Runs `spec`'s own protocol on each bit rather than the reduced XOR form.
pub fn simulate_protocol<R: Rng + ?Sized>(spec: &RandomizerSpec, x: &BitRecord, rng: &mut R) -> BitRecord {
    let mut out = x.clone();
    for i in 0..x.width() {
        let truth = x.get(i);
        let reported = match *spec {
            RandomizerSpec::Direct { a } => truth ^ !rng.gen_bool(a),
            RandomizerSpec::Warner { p } => {
                // The spinner selects the sensitive statement with probability p,
                // otherwise its negation; the respondent answers the selected one.
                if rng.gen_bool(p) {
                    truth
                } else {
                    !truth
                }
            }
            RandomizerSpec::UnrelatedUniform { p } | RandomizerSpec::RapporOneTime { f: p } => {
                permanent_response(truth, p, rng)
            }
            RandomizerSpec::RapporFull { f, q } => {
                let prr = permanent_response(truth, f, rng);
                // Instantaneous stage with p = 1 - q.
                rng.gen_bool(if prr { q } else { 1.0 - q })
            }
        };
        out.set(i, reported);
    }
    out
}

/// With probability `p` report a fair coin, otherwise the truth.
fn permanent_response<R: Rng + ?Sized>(truth: bool, p: f64, rng: &mut R) -> bool {
    if rng.gen_bool(p) {
        rng.gen_bool(0.5)
    } else {
        truth
    }
}

/// `P(r | x)` for the unrelated uniform question mechanism, by the explicit
/// binomial sum over how many coordinates were answered by the coin.
pub fn unrelated_channel_entry(p: f64, n: u32, r: BitIndex, x: BitIndex) -> Result<f64> {
    check_probability("p", p)?;
    for i in [r, x] {
        BitIndex::new(i.value(), n)?;
    }
    let d = r.distance(x);
    let free = n - d;
    let mut binom = 1.0f64;
    let mut total = 0.0;
    for i in 0..=free {
        if i > 0 {
            binom *= (free - i + 1) as f64 / i as f64;
        }
        let used = (i + d) as i32;
        total += binom * (p / 2.0).powi(used) * (1.0 - p).powi(n as i32 - used);
    }
    Ok(total)
}
