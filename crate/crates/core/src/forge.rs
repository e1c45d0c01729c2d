//! Bell functionals, seeds, lifting and the seed-generated families.
//!
//! A functional is a sparse map `(x, a) → c` with exact rational
//! coefficients; identical keys are always merged and zero coefficients
//! dropped, so two functionals are the same inequality iff their coefficient
//! maps are equal.
//!
//! Every family is built the same way: lift copies of a seed onto subsets of
//! the parties (all other parties fixed to setting 0, outcome 0), add them up
//! and subtract enough copies of the root term `P(0…0|0…0)` to cancel the
//! copies that a coarser grouping could still make positive.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::bounds::{self, BoundCertificate, BoundError};
use crate::correlation::{bit, pack_bits, unpack_bits, Behavior, DeterministicStrategy, Probability};
use crate::rational::{self, binomial, Rational};

#[derive(Debug, Error, PartialEq)]
pub enum ForgeError {
    #[error("functional has {functional} parties but the behavior has {behavior}")]
    DimensionMismatch { functional: usize, behavior: usize },
    #[error("{0}")]
    Precondition(String),
    #[error("party collision: {0}")]
    PartyCollision(String),
    #[error("invalid seed: {0}")]
    Seed(#[from] SeedError),
    #[error("malformed functional: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum SeedError {
    #[error("seeds need at least 2 parties, got {0}")]
    TooFewParties(usize),
    #[error("coefficient of P(0…0|0…0) must be exactly 1, found {}", rational::format_rational(.0))]
    RootCoefficient(Rational),
    #[error("non-root coefficient {} at x={x:?} a={a:?} is positive", rational::format_rational(.c))]
    PositiveCoefficient { x: Vec<u8>, a: Vec<u8>, c: Rational },
    #[error("{kind} bound is {}, a seed needs 0", rational::format_rational(.value))]
    NonZeroBound { kind: String, value: Rational },
    #[error("bound certification failed: {0}")]
    Certification(String),
}

/// Key of one probability `P(a|x)`; both are `n`-bit indices, party 1 most
/// significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermKey {
    pub x: u32,
    pub a: u32,
}

impl TermKey {
    pub const ROOT: TermKey = TermKey { x: 0, a: 0 };
}

#[derive(Clone, Debug, PartialEq)]
pub struct BellFunctional {
    n: usize,
    terms: BTreeMap<TermKey, Rational>,
    bound: Rational,
    meta: serde_json::Value,
}

const MAX_FUNCTIONAL_PARTIES: usize = 31;

impl BellFunctional {
    /// Empty functional with bound 0.
    pub fn new(n: usize) -> Result<Self, ForgeError> {
        if n == 0 || n > MAX_FUNCTIONAL_PARTIES {
            return Err(ForgeError::Precondition(format!(
                "functional needs 1..={MAX_FUNCTIONAL_PARTIES} parties, got {n}"
            )));
        }
        Ok(Self {
            n,
            terms: BTreeMap::new(),
            bound: Rational::zero(),
            meta: json!({}),
        })
    }

    pub fn n_parties(&self) -> usize {
        self.n
    }

    /// Adds `c` to the coefficient of `P(a|x)`.
    pub fn add(&mut self, key: TermKey, c: Rational) {
        debug_assert!(key.x >> self.n == 0 && key.a >> self.n == 0);
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(key).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add_bits(&mut self, x: &[u8], a: &[u8], c: Rational) -> Result<(), ForgeError> {
        if x.len() != self.n || a.len() != self.n {
            return Err(ForgeError::Precondition(format!(
                "index vectors must have length {}",
                self.n
            )));
        }
        let key = TermKey {
            x: pack_bits(x).map_err(|e| ForgeError::Precondition(e.to_string()))?,
            a: pack_bits(a).map_err(|e| ForgeError::Precondition(e.to_string()))?,
        };
        self.add(key, c);
        Ok(())
    }

    pub fn coefficient(&self, key: TermKey) -> Rational {
        self.terms.get(&key).copied().unwrap_or_else(Rational::zero)
    }

    pub fn coefficient_bits(&self, x: &[u8], a: &[u8]) -> Rational {
        if x.len() != self.n || a.len() != self.n {
            return Rational::zero();
        }
        match (pack_bits(x), pack_bits(a)) {
            (Ok(x), Ok(a)) => self.coefficient(TermKey { x, a }),
            _ => Rational::zero(),
        }
    }

    pub fn root_coefficient(&self) -> Rational {
        self.coefficient(TermKey::ROOT)
    }

    pub fn terms(&self) -> impl Iterator<Item = (TermKey, Rational)> + '_ {
        self.terms.iter().map(|(k, c)| (*k, *c))
    }

    pub fn term_map(&self) -> &BTreeMap<TermKey, Rational> {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn bound(&self) -> Rational {
        self.bound
    }

    pub fn with_bound(mut self, bound: Rational) -> Self {
        self.bound = bound;
        self
    }

    pub fn meta(&self) -> &serde_json::Value {
        &self.meta
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = meta;
        self
    }

    /// True iff both functionals have the same parties and coefficients.
    pub fn same_coefficients(&self, other: &BellFunctional) -> bool {
        self.n == other.n && self.terms == other.terms
    }

    pub fn scaled(&self, factor: Rational) -> BellFunctional {
        let mut out = BellFunctional {
            n: self.n,
            terms: BTreeMap::new(),
            bound: self.bound * factor,
            meta: self.meta.clone(),
        };
        for (k, c) in self.terms() {
            out.add(k, c * factor);
        }
        out
    }

    pub fn add_functional(&mut self, other: &BellFunctional) -> Result<(), ForgeError> {
        if other.n != self.n {
            return Err(ForgeError::Precondition(format!(
                "cannot add functionals on {} and {} parties",
                self.n, other.n
            )));
        }
        for (k, c) in other.terms() {
            self.add(k, c);
        }
        Ok(())
    }

    /// `Σ c·P(a|x)`, exact for exact behaviors.
    pub fn evaluate<T: Probability>(&self, b: &Behavior<T>) -> Result<T, ForgeError> {
        if b.n_parties() != self.n {
            return Err(ForgeError::DimensionMismatch {
                functional: self.n,
                behavior: b.n_parties(),
            });
        }
        Ok(self.evaluate_with(|x, a| b.get(x, a)))
    }

    /// Evaluates against an arbitrary probability oracle `p(x, a)`.
    #[inline]
    pub fn evaluate_with<T: Probability>(&self, mut p: impl FnMut(u32, u32) -> T) -> T {
        self.terms.iter().fold(T::zero(), |acc, (k, c)| {
            acc + T::from_rational(*c) * p(k.x, k.a)
        })
    }

    /// Exact value on a deterministic strategy.
    pub fn evaluate_strategy(&self, s: &DeterministicStrategy) -> Result<Rational, ForgeError> {
        if s.n_parties() != self.n {
            return Err(ForgeError::DimensionMismatch {
                functional: self.n,
                behavior: s.n_parties(),
            });
        }
        let (out0, out1) = response_masks(s);
        Ok(self.evaluate_masks(out0, out1))
    }

    /// Value of the deterministic strategy whose outcome vector on settings
    /// `x` is `(out1 & x) | (out0 & !x)`.
    #[inline]
    pub(crate) fn evaluate_masks(&self, out0: u32, out1: u32) -> Rational {
        self.terms
            .iter()
            .filter(|(k, _)| ((out1 & k.x) | (out0 & !k.x)) == k.a)
            .fold(Rational::zero(), |acc, (_, c)| acc + c)
    }

    /// Relabels parties: party `i` of the result is party `perm[i]` of `self`.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<BellFunctional, ForgeError> {
        let n = self.n;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(ForgeError::Precondition(format!(
                "{perm:?} is not a permutation of {n} parties"
            )));
        }
        // old party perm[i] moves to position i
        let mut inverse = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let remap = |v: u32| {
            (0..n).fold(0u32, |acc, old| {
                acc | (bit(v, old, n) as u32) << (n - 1 - inverse[old])
            })
        };
        let mut out = BellFunctional::new(n)?.with_bound(self.bound).with_meta(self.meta.clone());
        for (k, c) in self.terms() {
            out.add(TermKey { x: remap(k.x), a: remap(k.a) }, c);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<TermJson> = self
            .terms()
            .map(|(k, c)| TermJson {
                x: unpack_bits(k.x, self.n),
                a: unpack_bits(k.a, self.n),
                c,
            })
            .collect();
        serde_json::to_value(FunctionalJson {
            n: self.n,
            bound: self.bound,
            terms,
            meta: self.meta.clone(),
        })
        .expect("plain data")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, ForgeError> {
        let raw: FunctionalJson = serde_json::from_value(value.clone())
            .map_err(|e| ForgeError::Malformed(e.to_string()))?;
        let mut f = BellFunctional::new(raw.n)?
            .with_bound(raw.bound)
            .with_meta(raw.meta);
        for t in raw.terms {
            f.add_bits(&t.x, &t.a, t.c)
                .map_err(|e| ForgeError::Malformed(e.to_string()))?;
        }
        Ok(f)
    }
}

/// Outcome masks of a strategy for all-0 and all-1 settings.
pub(crate) fn response_masks(s: &DeterministicStrategy) -> (u32, u32) {
    let n = s.n_parties();
    (0..n).fold((0u32, 0u32), |(o0, o1), p| {
        (
            (o0 << 1) | s.output(p, 0) as u32,
            (o1 << 1) | s.output(p, 1) as u32,
        )
    })
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    x: Vec<u8>,
    a: Vec<u8>,
    #[serde(with = "rational::serde_str")]
    c: Rational,
}

#[derive(Serialize, Deserialize)]
struct FunctionalJson {
    n: usize,
    #[serde(with = "rational::serde_str")]
    bound: Rational,
    terms: Vec<TermJson>,
    #[serde(default = "empty_meta")]
    meta: serde_json::Value,
}

fn empty_meta() -> serde_json::Value {
    json!({})
}

/// A validated seed: `P(0…0|0…0) − Σ β P(a|x)` with `β ≥ 0` and a certified
/// bound of 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Seed {
    functional: BellFunctional,
    certificate: BoundCertificate,
}

impl Seed {
    pub fn functional(&self) -> &BellFunctional {
        &self.functional
    }

    pub fn parties(&self) -> usize {
        self.functional.n
    }

    /// Local bound for two-party seeds, tripartite biseparable bound for
    /// three-party seeds, local bound otherwise.
    pub fn certificate(&self) -> &BoundCertificate {
        &self.certificate
    }

    fn family_tag(&self) -> serde_json::Value {
        self.functional.meta.clone()
    }
}

/// Checks the seed form and certifies its bound.
pub fn validate_seed(f: &BellFunctional) -> Result<Seed, SeedError> {
    check_seed_form(f)?;
    let cert = match f.n {
        3 => bounds::biseparable_bound_tripartite(f),
        _ => bounds::local_bound(f),
    }
    .map_err(|e: BoundError| SeedError::Certification(e.to_string()))?;
    if f.n > 3 {
        log::warn!(
            "{}-party seed: only the local bound is certified exactly",
            f.n
        );
    }
    let value = cert
        .exact_value()
        .ok_or_else(|| SeedError::Certification("expected an exact certificate".into()))?;
    if !value.is_zero() {
        return Err(SeedError::NonZeroBound {
            kind: cert.kind.label().to_string(),
            value,
        });
    }
    Ok(Seed {
        functional: f.clone(),
        certificate: cert,
    })
}

/// Structural part of [`validate_seed`]: root coefficient 1, all others ≤ 0.
pub fn check_seed_form(f: &BellFunctional) -> Result<(), SeedError> {
    if f.n < 2 {
        return Err(SeedError::TooFewParties(f.n));
    }
    let root = f.root_coefficient();
    if !root.is_one() {
        return Err(SeedError::RootCoefficient(root));
    }
    if let Some((k, c)) = f
        .terms()
        .find(|(k, c)| *k != TermKey::ROOT && c.is_positive())
    {
        return Err(SeedError::PositiveCoefficient {
            x: unpack_bits(k.x, f.n),
            a: unpack_bits(k.a, f.n),
            c,
        });
    }
    Ok(())
}

fn from_literal(n: usize, terms: &[(&str, &str, Rational)], meta: serde_json::Value) -> BellFunctional {
    let mut f = BellFunctional::new(n).expect("literal functional").with_meta(meta);
    for (a, x, c) in terms {
        let bits = |s: &str| s.bytes().map(|b| b - b'0').collect::<Vec<u8>>();
        f.add_bits(&bits(x), &bits(a), *c).expect("literal term");
    }
    f
}

fn one() -> Rational {
    Rational::one()
}

/// `P(00|00) − P(01|01) − P(10|10) − P(00|11) ≤ 0`.
pub fn chsh_variant_functional() -> BellFunctional {
    // entries are (outcomes, settings, coefficient)
    from_literal(
        2,
        &[
            ("00", "00", one()),
            ("01", "01", -one()),
            ("10", "10", -one()),
            ("00", "11", -one()),
        ],
        json!({"family": "chsh"}),
    )
}

pub fn chsh_variant() -> Seed {
    validate_seed(&chsh_variant_functional()).expect("CHSH variant is a valid seed")
}

/// CHSH variant minus `(β/2)·P_{A1}(1|0)`, the marginal written at `x2 = 0`.
pub fn tilted_chsh(beta: Rational) -> Result<Seed, ForgeError> {
    if beta.is_negative() {
        return Err(ForgeError::Precondition(format!(
            "tilted CHSH needs beta >= 0, got {}",
            rational::format_rational(&beta)
        )));
    }
    let mut f = chsh_variant_functional().with_meta(json!({
        "family": "tilted_chsh",
        "beta": rational::format_rational(&beta),
    }));
    let half_beta = beta / Rational::from_integer(2);
    f.add(TermKey { x: 0b00, a: 0b10 }, -half_beta);
    f.add(TermKey { x: 0b00, a: 0b11 }, -half_beta);
    Ok(validate_seed(&f)?)
}

/// Seven-term tripartite seed.
pub fn tripartite_seed_functional() -> BellFunctional {
    from_literal(
        3,
        &[
            ("000", "000", one()),
            ("010", "111", -one()),
            ("000", "011", -one()),
            ("001", "001", -one()),
            ("100", "110", -one()),
            ("010", "010", -one()),
            ("100", "100", -one()),
        ],
        json!({"family": "tripartite"}),
    )
}

pub fn tripartite_seed() -> Seed {
    validate_seed(&tripartite_seed_functional()).expect("tripartite seed is valid")
}

/// Standard CHSH `⟨A0B0⟩ + ⟨A1B0⟩ + ⟨A0B1⟩ − ⟨A1B1⟩ ≤ 2` expanded into
/// probabilities.
pub fn correlator_chsh() -> BellFunctional {
    let mut f = BellFunctional::new(2)
        .expect("two parties")
        .with_bound(Rational::from_integer(2))
        .with_meta(json!({"family": "chsh_correlator"}));
    for x in 0..4u32 {
        let sign = if x == 0b11 { -one() } else { one() };
        for a in 0..4u32 {
            let parity = ((a >> 1) ^ (a & 1)) & 1;
            let c = if parity == 0 { sign } else { -sign };
            f.add(TermKey { x, a }, c);
        }
    }
    f
}

/// Extends `f` to `n` parties: party `k` of `f` becomes party `targets[k]`,
/// every other party is pinned to `fixed[p] = (setting, outcome)`.
pub fn lift(
    f: &BellFunctional,
    n: usize,
    targets: &[usize],
    fixed: &BTreeMap<usize, (u8, u8)>,
) -> Result<BellFunctional, ForgeError> {
    if n < f.n {
        return Err(ForgeError::Precondition(format!(
            "cannot lift a {}-party functional to {n} parties",
            f.n
        )));
    }
    if targets.len() != f.n {
        return Err(ForgeError::Precondition(format!(
            "need {} target parties, got {}",
            f.n,
            targets.len()
        )));
    }
    let mut owner = vec![false; n];
    for &t in targets {
        if t >= n || std::mem::replace(&mut owner[t], true) {
            return Err(ForgeError::PartyCollision(format!(
                "target party {} repeated or out of range",
                t + 1
            )));
        }
    }
    for (&p, &(x, a)) in fixed {
        if p >= n {
            return Err(ForgeError::Precondition(format!(
                "fixed party {} out of range",
                p + 1
            )));
        }
        if owner[p] {
            return Err(ForgeError::PartyCollision(format!(
                "party {} is both lifted and fixed",
                p + 1
            )));
        }
        if x > 1 || a > 1 {
            return Err(ForgeError::Precondition(format!(
                "fixed values of party {} must be bits",
                p + 1
            )));
        }
    }
    if let Some(missing) = (0..n).find(|p| !owner[*p] && !fixed.contains_key(p)) {
        return Err(ForgeError::Precondition(format!(
            "added party {} has no fixed setting/outcome",
            missing + 1
        )));
    }
    let shift = |p: usize| n - 1 - p;
    let (mut base_x, mut base_a) = (0u32, 0u32);
    for (&p, &(x, a)) in fixed {
        base_x |= (x as u32) << shift(p);
        base_a |= (a as u32) << shift(p);
    }
    let place = |v: u32| {
        targets.iter().enumerate().fold(0u32, |acc, (k, &t)| {
            acc | (bit(v, k, f.n) as u32) << shift(t)
        })
    };
    let mut out = BellFunctional::new(n)?
        .with_bound(f.bound)
        .with_meta(json!({"family": "lifted", "base": f.meta, "targets": targets}));
    for (k, c) in f.terms() {
        out.add(
            TermKey {
                x: base_x | place(k.x),
                a: base_a | place(k.a),
            },
            c,
        );
    }
    Ok(out)
}

/// [`lift`] with every added party pinned to setting 0, outcome 0.
pub fn lift_to(f: &BellFunctional, n: usize, targets: &[usize]) -> Result<BellFunctional, ForgeError> {
    let fixed: BTreeMap<usize, (u8, u8)> = (0..n)
        .filter(|p| !targets.contains(p))
        .map(|p| (p, (0, 0)))
        .collect();
    lift(f, n, targets, &fixed)
}

/// Ascending `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn sum_of_lifts<'a>(
    seed: &BellFunctional,
    n: usize,
    placements: impl IntoIterator<Item = (Rational, &'a [usize])>,
) -> Result<BellFunctional, ForgeError> {
    let mut out = BellFunctional::new(n)?;
    for (weight, targets) in placements {
        let lifted = lift_to(seed, n, targets)?;
        out.add_functional(&lifted.scaled(weight))?;
    }
    Ok(out)
}

/// Sum of the seed lifted onto every `m`-subset, minus `C(n−1, m)` root terms.
pub fn build_symmetric(seed: &Seed, n: usize) -> Result<BellFunctional, ForgeError> {
    let m = seed.parties();
    if n <= m {
        return Err(ForgeError::Precondition(format!(
            "symmetric family needs n > {m}, got {n}"
        )));
    }
    if m >= 4 {
        log::warn!("symmetric subtraction C(n-1, m) is extrapolated for {m}-party seeds");
    }
    let subsets = combinations(n, m);
    let mut f = sum_of_lifts(
        seed.functional(),
        n,
        subsets.iter().map(|s| (one(), s.as_slice())),
    )?;
    f.add(TermKey::ROOT, -Rational::from_integer(binomial(n - 1, m)));
    Ok(f.with_meta(json!({"family": "symmetric", "seed": seed.family_tag(), "n": n})))
}

/// The seed joined from a fixed center of `m − 1` parties to each remaining
/// party, minus `(n − m)` root terms. The center parties take the first seed
/// slots in the given order.
pub fn build_centered(seed: &Seed, n: usize, center: &[usize]) -> Result<BellFunctional, ForgeError> {
    let m = seed.parties();
    if n <= m {
        return Err(ForgeError::Precondition(format!(
            "centered family needs n > {m}, got {n}"
        )));
    }
    if center.len() + 1 != m {
        return Err(ForgeError::Precondition(format!(
            "center must have {} parties, got {}",
            m - 1,
            center.len()
        )));
    }
    let mut seen = vec![false; n];
    for &c in center {
        if c >= n || std::mem::replace(&mut seen[c], true) {
            return Err(ForgeError::PartyCollision(format!(
                "center party {} repeated or out of range",
                c + 1
            )));
        }
    }
    let placements: Vec<Vec<usize>> = (0..n)
        .filter(|j| !seen[*j])
        .map(|j| center.iter().copied().chain([j]).collect())
        .collect();
    let mut f = sum_of_lifts(
        seed.functional(),
        n,
        placements.iter().map(|p| (one(), p.as_slice())),
    )?;
    f.add(TermKey::ROOT, -Rational::from_integer((n - m) as i64));
    let center_labels: Vec<usize> = center.iter().map(|c| c + 1).collect();
    Ok(f.with_meta(json!({
        "family": "centered",
        "seed": seed.family_tag(),
        "n": n,
        "center": center_labels,
    })))
}

/// Weighted three-party family `Σ μ_ij I^{ij} − P(000|000)`.
///
/// Sets `meta.trivial = true` (and logs a warning) when `μ12 + μ13 + μ23 ≤ 1`.
pub fn build_mu_family(mu: [Rational; 3]) -> Result<BellFunctional, ForgeError> {
    for m in &mu {
        if m.is_negative() || *m > one() {
            return Err(ForgeError::Precondition(format!(
                "mu weights must lie in [0, 1], got {}",
                rational::format_rational(m)
            )));
        }
    }
    let seed = chsh_variant();
    let pairs: [[usize; 2]; 3] = [[0, 1], [0, 2], [1, 2]];
    let mut f = sum_of_lifts(
        seed.functional(),
        3,
        mu.iter().zip(pairs.iter()).map(|(w, p)| (*w, p.as_slice())),
    )?;
    f.add(TermKey::ROOT, -one());
    let total = mu[0] + mu[1] + mu[2];
    let trivial = total <= one();
    if trivial {
        log::warn!(
            "mu weights sum to {} <= 1: the inequality holds for every distribution",
            rational::format_rational(&total)
        );
    }
    let labels: Vec<String> = mu.iter().map(rational::format_rational).collect();
    Ok(f.with_meta(json!({"family": "mu", "mu": labels, "trivial": trivial})))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MSeparableVariant {
    Symmetric,
    Centered,
}

/// `m`-way families from a two-party seed: the symmetric variant subtracts
/// `C(n+1−m, 2)` root terms, the centered one (center party 1) `n − m`.
pub fn build_m_separable(
    seed: &Seed,
    n: usize,
    m: usize,
    variant: MSeparableVariant,
) -> Result<BellFunctional, ForgeError> {
    if seed.parties() != 2 {
        return Err(ForgeError::Precondition(format!(
            "m-separable families need a two-party seed, got {} parties",
            seed.parties()
        )));
    }
    if m < 2 || m >= n {
        return Err(ForgeError::Precondition(format!(
            "m-separable family needs 2 <= m < n, got m = {m}, n = {n}"
        )));
    }
    let (mut f, subtract) = match variant {
        MSeparableVariant::Symmetric => {
            let pairs = combinations(n, 2);
            (
                sum_of_lifts(seed.functional(), n, pairs.iter().map(|p| (one(), p.as_slice())))?,
                binomial(n + 1 - m, 2),
            )
        }
        MSeparableVariant::Centered => {
            let pairs: Vec<[usize; 2]> = (1..n).map(|j| [0, j]).collect();
            (
                sum_of_lifts(seed.functional(), n, pairs.iter().map(|p| (one(), p.as_slice())))?,
                (n - m) as i64,
            )
        }
    };
    f.add(TermKey::ROOT, -Rational::from_integer(subtract));
    Ok(f.with_meta(json!({
        "family": "m_separable",
        "variant": variant,
        "seed": seed.family_tag(),
        "n": n,
        "m": m,
    })))
}

/// Symmetric CHSH family written recursively:
/// `(1/(n−2)) Σ_i I^{all∖A_i} − P(0…0|0…0)`, bottoming out at the seed.
pub fn build_recursive_symmetric(n: usize) -> Result<BellFunctional, ForgeError> {
    if n < 3 {
        return Err(ForgeError::Precondition(format!(
            "recursive family needs n >= 3, got {n}"
        )));
    }
    let inner = if n == 3 {
        chsh_variant_functional()
    } else {
        build_recursive_symmetric(n - 1)?
    };
    let weight = Rational::new(1, (n - 2) as i64);
    let placements: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&p| p != i).collect())
        .collect();
    let mut f = sum_of_lifts(&inner, n, placements.iter().map(|p| (weight, p.as_slice())))?;
    f.add(TermKey::ROOT, -one());
    Ok(f.with_meta(json!({"family": "recursive_symmetric", "n": n})))
}

/// Symmetric CHSH family on `n` parties.
pub fn i_sym(n: usize) -> Result<BellFunctional, ForgeError> {
    build_symmetric(&chsh_variant(), n)
}

/// CHSH family centered on party 1.
pub fn i_centered(n: usize) -> Result<BellFunctional, ForgeError> {
    build_centered(&chsh_variant(), n, &[0])
}
