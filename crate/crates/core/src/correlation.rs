//! Behaviors, deterministic strategies and the no-signalling building blocks.
//!
//! A behavior for `n` parties is stored dense: `4^n` entries indexed by
//! `(x, a)` where `x` and `a` are `n`-bit integers and party 1 is the most
//! significant bit. Exact behaviors use [`Rational`] entries, quantum ones
//! use `f64`; conversion between the two is always explicit.

use std::fmt::Debug;

use num_traits::{Num, Signed};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{self, Rational};

/// Default cap on the number of parties of a dense behavior.
pub const DEFAULT_MAX_PARTIES: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum CorrelationError {
    #[error("a behavior needs at least one party")]
    NoParties,
    #[error("{n} parties exceed the configured cap of {cap}")]
    TooManyParties { n: usize, cap: usize },
    #[error("table has {found} entries, expected {expected}")]
    TableSize { expected: usize, found: usize },
    #[error("missing table entry x={x:?} a={a:?}")]
    MissingEntry { x: Vec<u8>, a: Vec<u8> },
    #[error("duplicate table entry x={x:?} a={a:?}")]
    DuplicateEntry { x: Vec<u8>, a: Vec<u8> },
    #[error("index vector {0:?} has wrong length or non-binary entries")]
    BadIndexVector(Vec<u8>),
    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),
    #[error("group {group:?} has {expected} parties but its behavior has {found}")]
    GroupSizeMismatch {
        group: Vec<usize>,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Precondition(String),
    #[error("invalid probability {0:?}")]
    BadProbability(String),
}

/// Scalar type a behavior can be stored in.
pub trait Probability:
    Num + Signed + Copy + PartialOrd + Debug + Send + Sync + 'static
{
    fn to_f64(self) -> f64;
    fn from_rational(r: Rational) -> Self;
}

impl Probability for f64 {
    fn to_f64(self) -> f64 {
        self
    }
    fn from_rational(r: Rational) -> Self {
        rational::to_f64(&r)
    }
}

impl Probability for Rational {
    fn to_f64(self) -> f64 {
        rational::to_f64(&self)
    }
    fn from_rational(r: Rational) -> Self {
        r
    }
}

/// Bit of `party` (0-based, party 0 most significant) in an `n`-bit index.
#[inline]
pub fn bit(index: u32, party: usize, n: usize) -> u8 {
    ((index >> (n - 1 - party)) & 1) as u8
}

/// Packs a bit vector (party 1 first) into an index.
pub fn pack_bits(bits: &[u8]) -> Result<u32, CorrelationError> {
    if bits.len() > 31 || bits.iter().any(|&b| b > 1) {
        return Err(CorrelationError::BadIndexVector(bits.to_vec()));
    }
    Ok(bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32))
}

pub fn unpack_bits(index: u32, n: usize) -> Vec<u8> {
    (0..n).map(|p| bit(index, p, n)).collect()
}

/// Extracts the bits of `parties` (in the given order) from an `n`-bit index.
#[inline]
pub fn gather_bits(index: u32, parties: &[usize], n: usize) -> u32 {
    parties
        .iter()
        .fold(0u32, |acc, &p| (acc << 1) | bit(index, p, n) as u32)
}

/// Full conditional distribution `P(a|x)` of `n` binary parties.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior<T = f64> {
    n: usize,
    table: Vec<T>,
}

pub type ExactBehavior = Behavior<Rational>;

fn check_party_count(n: usize, cap: usize) -> Result<(), CorrelationError> {
    if n == 0 {
        return Err(CorrelationError::NoParties);
    }
    if n > cap {
        return Err(CorrelationError::TooManyParties { n, cap });
    }
    Ok(())
}

impl<T: Probability> Behavior<T> {
    pub fn from_fn(n: usize, f: impl Fn(u32, u32) -> T) -> Result<Self, CorrelationError> {
        Self::from_fn_capped(n, DEFAULT_MAX_PARTIES, f)
    }

    pub fn from_fn_capped(
        n: usize,
        cap: usize,
        f: impl Fn(u32, u32) -> T,
    ) -> Result<Self, CorrelationError> {
        check_party_count(n, cap)?;
        let dim = 1u32 << n;
        let mut table = Vec::with_capacity((dim as usize) * (dim as usize));
        for x in 0..dim {
            for a in 0..dim {
                table.push(f(x, a));
            }
        }
        Ok(Self { n, table })
    }

    pub fn from_table(n: usize, table: Vec<T>) -> Result<Self, CorrelationError> {
        check_party_count(n, DEFAULT_MAX_PARTIES)?;
        let expected = 1usize << (2 * n);
        if table.len() != expected {
            return Err(CorrelationError::TableSize {
                expected,
                found: table.len(),
            });
        }
        Ok(Self { n, table })
    }

    /// `P = 1/2^n` everywhere.
    pub fn uniform(n: usize) -> Result<Self, CorrelationError> {
        let p = T::one() / T::from_rational(Rational::from_integer(1i64 << n.min(62)));
        Self::from_fn(n, |_, _| p)
    }

    pub fn n_parties(&self) -> usize {
        self.n
    }

    /// Number of setting (and outcome) vectors, `2^n`.
    pub fn dim(&self) -> u32 {
        1 << self.n
    }

    #[inline]
    pub fn get(&self, x: u32, a: u32) -> T {
        self.table[((x as usize) << self.n) | a as usize]
    }

    pub fn get_bits(&self, x: &[u8], a: &[u8]) -> Result<T, CorrelationError> {
        if x.len() != self.n || a.len() != self.n {
            return Err(CorrelationError::BadIndexVector(x.to_vec()));
        }
        Ok(self.get(pack_bits(x)?, pack_bits(a)?))
    }

    pub fn table(&self) -> &[T] {
        &self.table
    }

    /// Normalization, positivity and no-signalling residuals.
    pub fn check(&self, tol: f64) -> BehaviorReport {
        let dim = self.dim();
        let mut normalization = 0.0f64;
        for x in 0..dim {
            let sum = (0..dim).fold(T::zero(), |acc, a| acc + self.get(x, a));
            normalization = normalization.max((sum - T::one()).abs().to_f64());
        }
        let min_entry = self
            .table
            .iter()
            .map(|p| p.to_f64())
            .fold(f64::INFINITY, f64::min);
        let mut ns = 0.0f64;
        for party in 0..self.n {
            let mask = 1u32 << (self.n - 1 - party);
            for x in (0..dim).filter(|x| x & mask == 0) {
                let flipped = x | mask;
                for a in (0..dim).filter(|a| a & mask == 0) {
                    let m0 = self.get(x, a) + self.get(x, a | mask);
                    let m1 = self.get(flipped, a) + self.get(flipped, a | mask);
                    ns = ns.max((m0 - m1).abs().to_f64());
                }
            }
        }
        BehaviorReport {
            normalization_residual: normalization,
            min_entry,
            ns_residual: ns,
            tolerance: tol,
        }
    }

    /// Single-party marginal `P(a_party = outcome | x)`.
    pub fn marginal(&self, party: usize, x: u32, outcome: u8) -> T {
        (0..self.dim())
            .filter(|&a| bit(a, party, self.n) == outcome)
            .fold(T::zero(), |acc, a| acc + self.get(x, a))
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: T) -> Result<Self, CorrelationError> {
        if self.n != other.n {
            return Err(CorrelationError::Precondition(format!(
                "cannot mix behaviors of {} and {} parties",
                self.n, other.n
            )));
        }
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(&p, &q)| lambda * p + (T::one() - lambda) * q)
            .collect();
        Ok(Self { n: self.n, table })
    }

    /// Relabels parties: party `i` of the result is party `perm[i]` of `self`.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<Self, CorrelationError> {
        let n = self.n;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(CorrelationError::Precondition(format!(
                "{perm:?} is not a permutation of {n} parties"
            )));
        }
        Self::from_fn_capped(n, n, |x, a| {
            // entry (x, a) of the result reads party perm[i]'s bits from position i
            let mut ox = 0u32;
            let mut oa = 0u32;
            for (i, &p) in perm.iter().enumerate() {
                ox |= (bit(x, i, n) as u32) << (n - 1 - p);
                oa |= (bit(a, i, n) as u32) << (n - 1 - p);
            }
            self.get(ox, oa)
        })
    }
}

impl ExactBehavior {
    pub fn to_f64(&self) -> Behavior<f64> {
        Behavior {
            n: self.n,
            table: self.table.iter().map(rational::to_f64).collect(),
        }
    }
}

/// Residuals returned by [`check_behavior`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub normalization_residual: f64,
    pub min_entry: f64,
    pub ns_residual: f64,
    pub tolerance: f64,
}

impl BehaviorReport {
    pub fn is_valid(&self) -> bool {
        self.normalization_residual <= self.tolerance
            && self.min_entry >= -self.tolerance
            && self.ns_residual <= self.tolerance
    }
}

pub fn check_behavior<T: Probability>(b: &Behavior<T>, tol: f64) -> BehaviorReport {
    b.check(tol)
}

/// Local deterministic strategy: each party answers with a fixed function of
/// its own setting.
///
/// `responses[i]` packs party `i`'s response table: bit 0 is the outcome for
/// setting 0, bit 1 the outcome for setting 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeterministicStrategy {
    responses: Vec<u8>,
}

impl DeterministicStrategy {
    pub fn new(responses: Vec<u8>) -> Result<Self, CorrelationError> {
        if responses.is_empty() {
            return Err(CorrelationError::NoParties);
        }
        if responses.iter().any(|&r| r > 3) {
            return Err(CorrelationError::Precondition(format!(
                "response tables must be in 0..4, got {responses:?}"
            )));
        }
        Ok(Self { responses })
    }

    /// Strategy number `index` in base 4, party 1 most significant.
    pub fn from_index(n: usize, index: u64) -> Self {
        let responses = (0..n)
            .map(|p| ((index >> (2 * (n - 1 - p))) & 3) as u8)
            .collect();
        Self { responses }
    }

    pub fn index(&self) -> u64 {
        self.responses
            .iter()
            .fold(0u64, |acc, &r| (acc << 2) | r as u64)
    }

    pub fn all_ones(n: usize) -> Self {
        Self {
            responses: vec![3; n],
        }
    }

    pub fn n_parties(&self) -> usize {
        self.responses.len()
    }

    pub fn responses(&self) -> &[u8] {
        &self.responses
    }

    #[inline]
    pub fn output(&self, party: usize, setting: u8) -> u8 {
        (self.responses[party] >> setting) & 1
    }

    /// Outcome vector produced on settings `x`.
    #[inline]
    pub fn outcomes(&self, x: u32) -> u32 {
        let n = self.responses.len();
        (0..n).fold(0u32, |acc, p| {
            (acc << 1) | self.output(p, bit(x, p, n)) as u32
        })
    }

    pub fn behavior<T: Probability>(&self) -> Result<Behavior<T>, CorrelationError> {
        Behavior::from_fn(self.n_parties(), |x, a| {
            if self.outcomes(x) == a {
                T::one()
            } else {
                T::zero()
            }
        })
    }
}

/// Wire form of a deterministic strategy: per-party `[out(x=0), out(x=1)]`.
#[derive(Debug, Serialize, Deserialize)]
struct StrategyJson {
    n: usize,
    responses: Vec<[u8; 2]>,
}

impl Serialize for DeterministicStrategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StrategyJson {
            n: self.n_parties(),
            responses: (0..self.n_parties())
                .map(|p| [self.output(p, 0), self.output(p, 1)])
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DeterministicStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = StrategyJson::deserialize(d)?;
        if raw.responses.len() != raw.n {
            return Err(D::Error::custom("response count does not match n"));
        }
        let packed = raw
            .responses
            .iter()
            .map(|[o0, o1]| {
                if *o0 > 1 || *o1 > 1 {
                    Err(D::Error::custom("outcomes must be bits"))
                } else {
                    Ok(o0 | (o1 << 1))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        DeterministicStrategy::new(packed).map_err(D::Error::custom)
    }
}

/// All `4^n` deterministic strategies in index order.
pub fn enumerate_deterministic(
    n: usize,
) -> impl ExactSizeIterator<Item = DeterministicStrategy> + Clone {
    assert!((1..=31).contains(&n), "enumerate_deterministic needs 1 <= n <= 31");
    (0..1usize << (2 * n)).map(move |i| DeterministicStrategy::from_index(n, i as u64))
}

/// Every party outputs 1 on both settings.
pub fn all_ones_strategy(n: usize) -> DeterministicStrategy {
    DeterministicStrategy::all_ones(n)
}

/// Ordered partition of the parties `0..n` into disjoint non-empty groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    groups: Vec<Vec<usize>>,
}

impl Grouping {
    /// Groups are sorted internally; their order is kept.
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self, CorrelationError> {
        let mut seen = vec![false; n];
        let mut groups = groups;
        for g in &mut groups {
            if g.is_empty() {
                return Err(CorrelationError::InvalidGrouping("empty group".into()));
            }
            g.sort_unstable();
            for &p in g.iter() {
                if p >= n {
                    return Err(CorrelationError::InvalidGrouping(format!(
                        "party {} out of range for n = {n}",
                        p + 1
                    )));
                }
                if std::mem::replace(&mut seen[p], true) {
                    return Err(CorrelationError::InvalidGrouping(format!(
                        "party {} appears in two groups",
                        p + 1
                    )));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(CorrelationError::InvalidGrouping(format!(
                "party {} is not covered",
                missing + 1
            )));
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn m(&self) -> usize {
        self.groups.len()
    }

    pub fn n_parties(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

/// `P(ab|xy) = 1/2` iff `a ⊕ b = xy ⊕ αx ⊕ βy ⊕ γ`.
pub fn pr_box_relabeled(alpha: u8, beta: u8, gamma: u8) -> ExactBehavior {
    let half = Rational::new(1, 2);
    Behavior::from_fn(2, |x, a| {
        let (x1, x2) = ((x >> 1) as u8, (x & 1) as u8);
        let parity = ((a >> 1) ^ (a & 1)) as u8;
        if parity == (x1 & x2) ^ (alpha & x1) ^ (beta & x2) ^ gamma {
            half
        } else {
            Rational::from_integer(0)
        }
    })
    .expect("two parties is within the cap")
}

/// The canonical PR box, `a ⊕ b = xy`.
pub fn pr_box() -> ExactBehavior {
    pr_box_relabeled(0, 0, 0)
}

/// Vertices of the two-party binary no-signalling polytope: the 16
/// deterministic strategies (index order) followed by the 8 PR boxes
/// (ordered by `(alpha, beta, gamma)`).
pub fn bipartite_ns_vertices() -> Vec<ExactBehavior> {
    let mut out: Vec<ExactBehavior> = enumerate_deterministic(2)
        .map(|s| s.behavior().expect("two parties"))
        .collect();
    for alpha in 0..2 {
        for beta in 0..2 {
            for gamma in 0..2 {
                out.push(pr_box_relabeled(alpha, beta, gamma));
            }
        }
    }
    out
}

/// `n`-party PR-type box: `P(a|x) = 1/2^(n-1)` iff `⊕ a_i = ⊕_{i<j} x_i x_j`.
pub fn ns_box(n: usize) -> Result<ExactBehavior, CorrelationError> {
    if n < 2 {
        return Err(CorrelationError::Precondition(format!(
            "ns_box needs n >= 2, got {n}"
        )));
    }
    let weight = Rational::new(1, 1i64 << (n - 1));
    Behavior::from_fn(n, |x, a| {
        let a_parity = (a.count_ones() & 1) as u8;
        // ⊕_{i<j} x_i x_j = C(|x|, 2) mod 2
        let k = x.count_ones() as u64;
        let x_parity = ((k * k.saturating_sub(1) / 2) & 1) as u8;
        if a_parity == x_parity {
            weight
        } else {
            Rational::from_integer(0)
        }
    })
}

/// Joint behavior of independent groups.
///
/// `parts[k].1` lists the (0-based) parties that `parts[k].0` acts on, in the
/// order of that behavior's own parties.
pub fn product_behavior<T: Probability>(
    parts: &[(Behavior<T>, Vec<usize>)],
) -> Result<Behavior<T>, CorrelationError> {
    let n: usize = parts.iter().map(|(_, g)| g.len()).sum();
    check_party_count(n, DEFAULT_MAX_PARTIES)?;
    validate_parts(parts, n)?;
    Behavior::from_fn(n, |x, a| product_probability(parts, n, x, a))
}

pub(crate) fn validate_parts<T: Probability>(
    parts: &[(Behavior<T>, Vec<usize>)],
    n: usize,
) -> Result<(), CorrelationError> {
    let mut seen = vec![false; n];
    for (b, g) in parts {
        if g.is_empty() {
            return Err(CorrelationError::InvalidGrouping("empty group".into()));
        }
        if b.n_parties() != g.len() {
            return Err(CorrelationError::GroupSizeMismatch {
                group: g.clone(),
                expected: g.len(),
                found: b.n_parties(),
            });
        }
        for &p in g {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(CorrelationError::InvalidGrouping(format!(
                    "party index {p} overlaps or is out of range"
                )));
            }
        }
    }
    Ok(())
}

/// One entry of a product behavior without materializing the joint table.
#[inline]
pub fn product_probability<T: Probability>(
    parts: &[(Behavior<T>, Vec<usize>)],
    n: usize,
    x: u32,
    a: u32,
) -> T {
    parts.iter().fold(T::one(), |acc, (b, g)| {
        acc * b.get(gather_bits(x, g, n), gather_bits(a, g, n))
    })
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Debug, Serialize, Deserialize)]
struct EntryJson {
    x: Vec<u8>,
    a: Vec<u8>,
    p: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct BehaviorJson {
    n: usize,
    entries: Vec<EntryJson>,
}

/// A behavior read from disk: exact when every entry is a rational string.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyBehavior {
    Exact(ExactBehavior),
    Float(Behavior<f64>),
}

impl AnyBehavior {
    pub fn n_parties(&self) -> usize {
        match self {
            AnyBehavior::Exact(b) => b.n_parties(),
            AnyBehavior::Float(b) => b.n_parties(),
        }
    }

    pub fn to_f64(&self) -> Behavior<f64> {
        match self {
            AnyBehavior::Exact(b) => b.to_f64(),
            AnyBehavior::Float(b) => b.clone(),
        }
    }

    pub fn check(&self, tol: f64) -> BehaviorReport {
        match self {
            AnyBehavior::Exact(b) => b.check(tol),
            AnyBehavior::Float(b) => b.check(tol),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            AnyBehavior::Exact(b) => b.to_json(),
            AnyBehavior::Float(b) => b.to_json(),
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, CorrelationError> {
        let raw: BehaviorJson = serde_json::from_value(value.clone())
            .map_err(|e| CorrelationError::Precondition(format!("malformed behavior JSON: {e}")))?;
        check_party_count(raw.n, DEFAULT_MAX_PARTIES)?;
        let exact = raw.entries.iter().all(|e| e.p.is_string());
        let n = raw.n;
        let size = 1usize << (2 * n);
        let mut slots: Vec<Option<&serde_json::Value>> = vec![None; size];
        for e in &raw.entries {
            if e.x.len() != n {
                return Err(CorrelationError::BadIndexVector(e.x.clone()));
            }
            if e.a.len() != n {
                return Err(CorrelationError::BadIndexVector(e.a.clone()));
            }
            let idx = ((pack_bits(&e.x)? as usize) << n) | pack_bits(&e.a)? as usize;
            if slots[idx].replace(&e.p).is_some() {
                return Err(CorrelationError::DuplicateEntry {
                    x: e.x.clone(),
                    a: e.a.clone(),
                });
            }
        }
        if let Some(missing) = slots.iter().position(Option::is_none) {
            return Err(CorrelationError::MissingEntry {
                x: unpack_bits((missing >> n) as u32, n),
                a: unpack_bits((missing & ((1 << n) - 1)) as u32, n),
            });
        }
        let values = slots.into_iter().map(|s| s.expect("all slots filled"));
        if exact {
            let table = values
                .map(|v| {
                    let s = v.as_str().expect("checked string");
                    rational::parse_rational(s)
                        .map_err(|_| CorrelationError::BadProbability(s.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(AnyBehavior::Exact(Behavior::from_table(n, table)?))
        } else {
            let table = values
                .map(|v| match v {
                    serde_json::Value::Number(num) => num
                        .as_f64()
                        .ok_or_else(|| CorrelationError::BadProbability(num.to_string())),
                    serde_json::Value::String(s) => rational::parse_rational(s)
                        .map(|r| rational::to_f64(&r))
                        .map_err(|_| CorrelationError::BadProbability(s.clone())),
                    other => Err(CorrelationError::BadProbability(other.to_string())),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(AnyBehavior::Float(Behavior::from_table(n, table)?))
        }
    }
}

impl<T: Probability + JsonProbability> Behavior<T> {
    pub fn to_json(&self) -> serde_json::Value {
        let dim = self.dim();
        let mut entries = Vec::with_capacity(self.table.len());
        for x in 0..dim {
            for a in 0..dim {
                entries.push(EntryJson {
                    x: unpack_bits(x, self.n),
                    a: unpack_bits(a, self.n),
                    p: self.get(x, a).to_json_value(),
                });
            }
        }
        serde_json::to_value(BehaviorJson { n: self.n, entries }).expect("plain data")
    }
}

/// How a probability is written to JSON.
pub trait JsonProbability {
    fn to_json_value(&self) -> serde_json::Value;
}

impl JsonProbability for f64 {
    fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!(self)
    }
}

impl JsonProbability for Rational {
    fn to_json_value(&self) -> serde_json::Value {
        serde_json::Value::String(rational::format_rational(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn uniform_has_zero_residuals() {
        let u = ExactBehavior::uniform(3).unwrap();
        let rep = u.check(0.0);
        assert_eq!(rep.normalization_residual, 0.0);
        assert_eq!(rep.ns_residual, 0.0);
        assert_eq!(rep.min_entry, 0.125);
        assert!(rep.is_valid());
    }

    #[test]
    fn pr_box_is_no_signalling() {
        let rep = pr_box().check(0.0);
        assert!(rep.is_valid());
        assert_eq!(rep.ns_residual, 0.0);
        assert_eq!(pr_box().get_bits(&[1, 1], &[0, 1]).unwrap(), r(1, 2));
        assert_eq!(pr_box().get_bits(&[1, 1], &[0, 0]).unwrap(), r(0, 1));
    }

    #[test]
    fn perturbed_entry_is_flagged() {
        let mut table = Behavior::<f64>::uniform(2).unwrap().table().to_vec();
        table[0] += 1e-3;
        let b = Behavior::from_table(2, table).unwrap();
        let rep = b.check(1e-6);
        assert!((rep.normalization_residual - 1e-3).abs() < 1e-15);
        assert!(!rep.is_valid());
    }

    #[test]
    fn deterministic_counts() {
        assert_eq!(enumerate_deterministic(1).count(), 4);
        assert_eq!(enumerate_deterministic(2).count(), 16);
        let all: Vec<_> = enumerate_deterministic(4).collect();
        assert_eq!(all.len(), 256);
        let mut dedup = all.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 256);
        for (i, s) in all.iter().enumerate() {
            assert_eq!(s.index(), i as u64);
        }
    }

    #[test]
    fn deterministic_behavior_has_one_unit_entry_per_setting() {
        for s in enumerate_deterministic(3) {
            let b: ExactBehavior = s.behavior().unwrap();
            for x in 0..8 {
                let ones = (0..8).filter(|&a| b.get(x, a) == r(1, 1)).count();
                let zeros = (0..8).filter(|&a| b.get(x, a).is_zero()).count();
                assert_eq!((ones, zeros), (1, 7));
            }
        }
    }

    #[test]
    fn all_ones_outputs_ones_everywhere() {
        let b: ExactBehavior = all_ones_strategy(3).behavior().unwrap();
        for x in 0..8 {
            assert_eq!(b.get(x, 0b111), r(1, 1));
        }
        let five: ExactBehavior = all_ones_strategy(5).behavior().unwrap();
        let rep = five.check(0.0);
        assert_eq!(
            (rep.normalization_residual, rep.ns_residual),
            (0.0, 0.0)
        );
    }

    #[test]
    fn uniform_is_equal_mixture_of_deterministic_strategies() {
        let n = 2;
        let strategies: Vec<ExactBehavior> = enumerate_deterministic(n)
            .map(|s| s.behavior().unwrap())
            .collect();
        let w = r(1, strategies.len() as i64);
        let mix = ExactBehavior::from_fn(n, |x, a| {
            strategies
                .iter()
                .fold(Rational::zero(), |acc, b| acc + w * b.get(x, a))
        })
        .unwrap();
        assert_eq!(mix, ExactBehavior::uniform(n).unwrap());
    }

    #[test]
    fn ns_vertex_list_shape() {
        let v = bipartite_ns_vertices();
        assert_eq!(v.len(), 24);
        assert!(v.contains(&pr_box()));
        for s in enumerate_deterministic(2) {
            assert!(v.contains(&s.behavior().unwrap()));
        }
        let half_marginals = v
            .iter()
            .filter(|b| {
                (0..4).all(|x| {
                    b.marginal(0, x, 0) == r(1, 2) && b.marginal(1, x, 0) == r(1, 2)
                })
            })
            .count();
        assert_eq!(half_marginals, 8);
    }

    #[test]
    fn ns_box_matches_pr_box_and_has_flat_marginals() {
        assert_eq!(ns_box(2).unwrap(), pr_box());
        let b3 = ns_box(3).unwrap();
        assert!(b3.check(0.0).is_valid());
        assert_eq!(b3.get(0, 0), r(1, 4));
        for n in 2..=6 {
            let b = ns_box(n).unwrap();
            for party in 0..n {
                for x in 0..(1u32 << n) {
                    assert_eq!(b.marginal(party, x, 0), r(1, 2));
                }
            }
        }
        assert!(ns_box(1).is_err());
    }

    #[test]
    fn product_of_pr_box_and_all_ones() {
        let one: ExactBehavior = all_ones_strategy(1).behavior().unwrap();
        let p = product_behavior(&[(pr_box(), vec![0, 1]), (one, vec![2])]).unwrap();
        assert!(p.check(0.0).is_valid());
        // P(a1 a2 1 | x) = PR(a1 a2 | x1 x2)
        assert_eq!(p.get_bits(&[1, 1, 0], &[0, 1, 1]).unwrap(), r(1, 2));
        assert_eq!(p.get_bits(&[1, 1, 0], &[0, 1, 0]).unwrap(), r(0, 1));
    }

    #[test]
    fn product_of_uniforms_is_uniform() {
        let u1 = ExactBehavior::uniform(1).unwrap();
        let parts: Vec<_> = (0..4).map(|p| (u1.clone(), vec![p])).collect();
        assert_eq!(
            product_behavior(&parts).unwrap(),
            ExactBehavior::uniform(4).unwrap()
        );
    }

    #[test]
    fn two_pr_boxes_on_four_parties() {
        let p = product_behavior(&[(pr_box(), vec![0, 2]), (pr_box(), vec![1, 3])]).unwrap();
        let rep = p.check(0.0);
        assert_eq!((rep.normalization_residual, rep.ns_residual), (0.0, 0.0));
    }

    #[test]
    fn product_rejects_bad_groupings() {
        let u1 = ExactBehavior::uniform(1).unwrap();
        assert!(matches!(
            product_behavior(&[(u1.clone(), vec![0]), (u1.clone(), vec![0])]),
            Err(CorrelationError::InvalidGrouping(_))
        ));
        assert!(matches!(
            product_behavior(&[(pr_box(), vec![0])]),
            Err(CorrelationError::GroupSizeMismatch { .. })
        ));
    }

    #[test]
    fn grouping_validation() {
        assert!(Grouping::new(3, vec![vec![2, 0], vec![1]]).is_ok());
        assert_eq!(
            Grouping::new(3, vec![vec![2, 0], vec![1]]).unwrap().groups()[0],
            vec![0, 2]
        );
        assert!(Grouping::new(3, vec![vec![0, 1]]).is_err());
        assert!(Grouping::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Grouping::new(3, vec![vec![0, 1, 2], vec![]]).is_err());
    }

    #[test]
    fn json_round_trip_and_structural_errors() {
        let b = ns_box(3).unwrap();
        let json = b.to_json();
        assert_eq!(AnyBehavior::from_json(&json).unwrap(), AnyBehavior::Exact(b.clone()));
        let f = b.to_f64();
        assert_eq!(
            AnyBehavior::from_json(&f.to_json()).unwrap(),
            AnyBehavior::Float(f)
        );
        let mut broken = json.clone();
        broken["entries"].as_array_mut().unwrap().pop();
        assert!(matches!(
            AnyBehavior::from_json(&broken),
            Err(CorrelationError::MissingEntry { .. })
        ));
    }

    #[test]
    fn strategy_json_uses_response_tables() {
        let s = DeterministicStrategy::new(vec![0b10, 0b11]).unwrap();
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v, serde_json::json!({"n": 2, "responses": [[0, 1], [1, 1]]}));
        let back: DeterministicStrategy = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn permuting_parties_moves_bits() {
        let one: ExactBehavior = all_ones_strategy(1).behavior().unwrap();
        let p = product_behavior(&[(pr_box(), vec![0, 1]), (one, vec![2])]).unwrap();
        // new party 0 = old party 2
        let q = p.permute_parties(&[2, 0, 1]).unwrap();
        assert_eq!(q.get_bits(&[0, 1, 1], &[1, 0, 1]).unwrap(), r(1, 2));
        assert!(p.permute_parties(&[0, 0, 1]).is_err());
    }
}
