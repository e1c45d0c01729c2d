//! Local, tripartite biseparable and sampled m-separable bounds.
//!
//! Local and tripartite biseparable bounds are exact maxima over the vertices
//! of the respective polytopes. For m-separable models with groups of three or
//! more parties no vertex list is available, so [`grouped_bound_sampled`]
//! only searches an inner approximation and reports the best value it found.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::correlation::{
    self, bipartite_ns_vertices, product_probability, Behavior, DeterministicStrategy,
    ExactBehavior, Grouping, DEFAULT_MAX_PARTIES,
};
use crate::forge::{response_masks, BellFunctional};
use crate::quantum::{self, MeasurementAssignment, QubitMeasurement};
use crate::rational::{self, binomial, Rational};
use crate::rng::{self, tags};

/// Largest party count accepted by [`local_bound`].
pub const DEFAULT_LOCAL_CAP: usize = 8;

/// Tolerance for re-evaluating a sampled witness.
pub const SAMPLED_WITNESS_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("{n} parties exceeds the enumeration cap of {cap}")]
    TooManyParties { n: usize, cap: usize },
    #[error("{0}")]
    Precondition(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Local,
    BiseparableTripartite,
    GroupedSampled,
}

impl BoundKind {
    pub fn label(&self) -> &'static str {
        match self {
            BoundKind::Local => "local",
            BoundKind::BiseparableTripartite => "biseparable",
            BoundKind::GroupedSampled => "grouped-sampled",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundValue {
    Exact(Rational),
    Float(f64),
}

impl BoundValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            BoundValue::Exact(r) => rational::to_f64(r),
            BoundValue::Float(v) => *v,
        }
    }
}

/// Behavior attaining the reported value.
#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    Deterministic(DeterministicStrategy),
    /// Pair `pair` shares bipartite NS vertex `vertex` (index into
    /// [`bipartite_ns_vertices`]); party `single` answers with `response`.
    Biseparable {
        pair: [usize; 2],
        single: usize,
        vertex: usize,
        response: u8,
    },
    Grouped {
        sample: usize,
        parts: Vec<(Behavior<f64>, Vec<usize>)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundCertificate {
    pub kind: BoundKind,
    pub value: BoundValue,
    pub witness: Witness,
    pub sample_count: Option<usize>,
}

impl BoundCertificate {
    pub fn exact_value(&self) -> Option<Rational> {
        match self.value {
            BoundValue::Exact(r) => Some(r),
            BoundValue::Float(_) => None,
        }
    }

    /// Re-evaluates the witness on `f` and compares with the reported value
    /// (exactly, or within [`SAMPLED_WITNESS_TOL`] for sampled bounds).
    pub fn verify(&self, f: &BellFunctional) -> bool {
        match (&self.witness, self.value) {
            (Witness::Deterministic(s), BoundValue::Exact(v)) => {
                f.evaluate_strategy(s).is_ok_and(|w| w == v)
            }
            (w @ Witness::Biseparable { .. }, BoundValue::Exact(v)) => {
                let parts = biseparable_parts(w);
                f.n_parties() == 3
                    && f.evaluate_with(|x, a| product_probability(&parts, 3, x, a)) == v
            }
            (Witness::Grouped { parts, .. }, BoundValue::Float(v)) => {
                correlation::validate_parts(parts, f.n_parties()).is_ok()
                    && (f.evaluate_with(|x, a| product_probability(parts, f.n_parties(), x, a))
                        - v)
                        .abs()
                        <= SAMPLED_WITNESS_TOL
            }
            _ => false,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let value = match self.value {
            BoundValue::Exact(r) => json!(rational::format_rational(&r)),
            BoundValue::Float(v) => json!(v),
        };
        let witness = match &self.witness {
            Witness::Deterministic(s) => json!({"strategy": s}),
            Witness::Biseparable {
                pair,
                single,
                vertex,
                response,
            } => json!({
                "pair": [pair[0] + 1, pair[1] + 1],
                "single": single + 1,
                "ns_vertex": vertex,
                "single_response": [response & 1, (response >> 1) & 1],
            }),
            Witness::Grouped { sample, parts } => json!({
                "sample": sample,
                "groups": parts
                    .iter()
                    .map(|(b, g)| json!({
                        "parties": g.iter().map(|p| p + 1).collect::<Vec<_>>(),
                        "behavior": b.to_json(),
                    }))
                    .collect::<Vec<_>>(),
            }),
        };
        json!({
            "kind": self.kind,
            "value": value,
            "exact": matches!(self.value, BoundValue::Exact(_)),
            "sample_count": self.sample_count,
            "witness": witness,
        })
    }
}

/// Exact local bound: maximum over all `4^n` deterministic strategies, with
/// ties broken towards the smallest strategy index.
pub fn local_bound(f: &BellFunctional) -> Result<BoundCertificate, BoundError> {
    local_bound_capped(f, DEFAULT_LOCAL_CAP)
}

pub fn local_bound_capped(f: &BellFunctional, cap: usize) -> Result<BoundCertificate, BoundError> {
    let n = f.n_parties();
    if n > cap {
        return Err(BoundError::TooManyParties { n, cap });
    }
    let count = 1u64 << (2 * n);
    let (value, index) = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = DeterministicStrategy::from_index(n, i);
            let (o0, o1) = response_masks(&s);
            (f.evaluate_masks(o0, o1), i)
        })
        .reduce_with(better)
        .expect("at least one strategy");
    Ok(BoundCertificate {
        kind: BoundKind::Local,
        value: BoundValue::Exact(value),
        witness: Witness::Deterministic(DeterministicStrategy::from_index(n, index)),
        sample_count: None,
    })
}

/// Larger value wins; equal values keep the smaller index.
fn better<K: Ord + Copy>(a: (Rational, K), b: (Rational, K)) -> (Rational, K) {
    match a.0.cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

/// Bipartitions `(single, pair)` of three parties.
const TRIPARTITIONS: [(usize, [usize; 2]); 3] = [(0, [1, 2]), (1, [0, 2]), (2, [0, 1])];

fn single_party_behavior(response: u8) -> ExactBehavior {
    DeterministicStrategy::new(vec![response])
        .expect("response in 0..4")
        .behavior()
        .expect("one party")
}

fn biseparable_parts(w: &Witness) -> Vec<(ExactBehavior, Vec<usize>)> {
    match w {
        Witness::Biseparable {
            pair,
            single,
            vertex,
            response,
        } => vec![
            (bipartite_ns_vertices()[*vertex].clone(), pair.to_vec()),
            (single_party_behavior(*response), vec![*single]),
        ],
        _ => Vec::new(),
    }
}

/// Exact tripartite biseparable bound over the 288 products of a bipartite NS
/// vertex with a single-party deterministic strategy.
pub fn biseparable_bound_tripartite(f: &BellFunctional) -> Result<BoundCertificate, BoundError> {
    if f.n_parties() != 3 {
        return Err(BoundError::Precondition(format!(
            "biseparable enumeration needs n = 3, got {}",
            f.n_parties()
        )));
    }
    let vertices = bipartite_ns_vertices();
    let singles: Vec<ExactBehavior> = (0..4).map(single_party_behavior).collect();
    let mut best: Option<(Rational, (usize, usize, u8))> = None;
    for (bi, (single, pair)) in TRIPARTITIONS.iter().enumerate() {
        for (vi, v) in vertices.iter().enumerate() {
            for (r, s) in singles.iter().enumerate() {
                let parts = [(v.clone(), pair.to_vec()), (s.clone(), vec![*single])];
                let value = f.evaluate_with(|x, a| product_probability(&parts, 3, x, a));
                let cand = (value, (bi, vi, r as u8));
                best = Some(match best {
                    None => cand,
                    Some(b) => better(b, cand),
                });
            }
        }
    }
    let (value, (bi, vertex, response)) = best.expect("288 candidates");
    let (single, pair) = TRIPARTITIONS[bi];
    Ok(BoundCertificate {
        kind: BoundKind::BiseparableTripartite,
        value: BoundValue::Exact(value),
        witness: Witness::Biseparable {
            pair,
            single,
            vertex,
            response,
        },
        sample_count: None,
    })
}

/// Number of party pairs inside a common group, `Σ C(|k_i|, 2)`.
pub fn count_potentially_positive_pairs(grouping: &Grouping) -> usize {
    grouping
        .groups()
        .iter()
        .map(|g| binomial(g.len(), 2) as usize)
        .sum()
}

/// Empirical maximum of `f` over randomly drawn `m`-separable products.
///
/// Sample 0 is always the all-ones strategy split into `m` groups. Later
/// samples draw a random grouping into exactly `m` groups and fill each group
/// with: single parties from deterministic responses or their mixtures; pairs
/// from the 24 bipartite NS vertices or their mixtures; larger groups from
/// quantum behaviors of Haar-random states, deterministic strategies and the
/// NS box, pure or mixed. The result is a lower estimate of the true bound.
pub fn grouped_bound_sampled(
    f: &BellFunctional,
    m: usize,
    samples: usize,
    rng_seed: u64,
) -> Result<BoundCertificate, BoundError> {
    let n = f.n_parties();
    if m < 2 || m >= n {
        return Err(BoundError::Precondition(format!(
            "sampled grouped bound needs 2 <= m < n, got m = {m}, n = {n}"
        )));
    }
    if n > DEFAULT_MAX_PARTIES {
        return Err(BoundError::TooManyParties {
            n,
            cap: DEFAULT_MAX_PARTIES,
        });
    }
    if samples == 0 {
        return Err(BoundError::Precondition("need at least one sample".into()));
    }
    let vertices: Vec<Behavior<f64>> = bipartite_ns_vertices().iter().map(|v| v.to_f64()).collect();
    let evaluate = |parts: &[(Behavior<f64>, Vec<usize>)]| {
        f.evaluate_with(|x, a| product_probability(parts, n, x, a))
    };
    let (value, sample) = (0..samples)
        .into_par_iter()
        .map(|s| {
            let parts = draw_sample(n, m, s, rng_seed, &vertices);
            (evaluate(&parts), s)
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("at least one sample");
    let parts = draw_sample(n, m, sample, rng_seed, &vertices);
    Ok(BoundCertificate {
        kind: BoundKind::GroupedSampled,
        value: BoundValue::Float(value),
        witness: Witness::Grouped { sample, parts },
        sample_count: Some(samples),
    })
}

fn draw_sample(
    n: usize,
    m: usize,
    sample: usize,
    seed: u64,
    vertices: &[Behavior<f64>],
) -> Vec<(Behavior<f64>, Vec<usize>)> {
    if sample == 0 {
        // first group takes the surplus parties
        let first = n - m + 1;
        let mut groups: Vec<Vec<usize>> = vec![(0..first).collect()];
        groups.extend((first..n).map(|p| vec![p]));
        return groups
            .into_iter()
            .map(|g| {
                let b = DeterministicStrategy::all_ones(g.len())
                    .behavior()
                    .expect("group within cap");
                (b, g)
            })
            .collect();
    }
    let mut r = rng::substream(seed, tags::BOUND_SAMPLE, sample as u64);
    random_grouping(n, m, &mut r)
        .into_iter()
        .map(|g| (random_group_behavior(g.len(), &mut r, vertices), g))
        .collect()
}

/// Uniformly shuffled parties cut at `m − 1` random positions.
fn random_grouping(n: usize, m: usize, r: &mut rng::Rng) -> Vec<Vec<usize>> {
    let mut parties: Vec<usize> = (0..n).collect();
    parties.shuffle(r);
    let mut cuts = rand::seq::index::sample(r, n - 1, m - 1).into_vec();
    cuts.sort_unstable();
    let mut groups = Vec::with_capacity(m);
    let mut start = 0;
    for c in cuts.into_iter().chain([n - 1]) {
        let mut g = parties[start..=c].to_vec();
        g.sort_unstable();
        groups.push(g);
        start = c + 1;
    }
    groups
}

fn dirichlet_weights(k: usize, r: &mut rng::Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| Exp1.sample(r)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn mixture(components: &[Behavior<f64>], weights: &[f64]) -> Behavior<f64> {
    let n = components[0].n_parties();
    let len = components[0].table().len();
    let table: Vec<f64> = (0..len)
        .map(|i| {
            components
                .iter()
                .zip(weights)
                .map(|(b, w)| w * b.table()[i])
                .sum()
        })
        .collect();
    Behavior::from_table(n, table).expect("same shape")
}

const PURE_FRACTION: f64 = 0.3;

fn random_deterministic(k: usize, r: &mut rng::Rng) -> Behavior<f64> {
    DeterministicStrategy::from_index(k, r.random_range(0..1u64 << (2 * k)))
        .behavior()
        .expect("group within cap")
}

fn random_quantum(k: usize, r: &mut rng::Rng) -> Behavior<f64> {
    let state = quantum::haar_with_rng(k, r);
    let parties: Vec<[QubitMeasurement; 2]> = (0..k)
        .map(|_| {
            let mut meas = || {
                QubitMeasurement::new(
                    r.random_range(0.0..std::f64::consts::PI),
                    r.random_range(0.0..std::f64::consts::TAU),
                )
            };
            [meas(), meas()]
        })
        .collect();
    let m = MeasurementAssignment::new(parties).expect("non-empty");
    quantum::behavior_from_state(&state, &m).expect("matching sizes")
}

fn random_group_behavior(k: usize, r: &mut rng::Rng, vertices: &[Behavior<f64>]) -> Behavior<f64> {
    let pure = r.random_bool(PURE_FRACTION);
    match k {
        1 => {
            if pure {
                random_deterministic(1, r)
            } else {
                let comps: Vec<Behavior<f64>> =
                    (0..4).map(|i| single_party_behavior(i).to_f64()).collect();
                mixture(&comps, &dirichlet_weights(4, r))
            }
        }
        2 => {
            if pure {
                vertices[r.random_range(0..vertices.len())].clone()
            } else {
                let size = r.random_range(2..=vertices.len());
                let picked: Vec<Behavior<f64>> = rand::seq::index::sample(r, vertices.len(), size)
                    .into_iter()
                    .map(|i| vertices[i].clone())
                    .collect();
                mixture(&picked, &dirichlet_weights(size, r))
            }
        }
        _ => {
            let draw = |r: &mut rng::Rng| match r.random_range(0..3) {
                0 => random_quantum(k, r),
                1 => random_deterministic(k, r),
                _ => correlation::ns_box(k).expect("k >= 3").to_f64(),
            };
            if pure {
                draw(r)
            } else {
                let size = r.random_range(2..=4);
                let picked: Vec<Behavior<f64>> = (0..size).map(|_| draw(r)).collect();
                mixture(&picked, &dirichlet_weights(size, r))
            }
        }
    }
}
