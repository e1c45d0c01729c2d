//! Pure qubit states, rank-1 projective measurements and the Born rule.
//!
//! Amplitude index `i` of an `n`-qubit state has qubit 1 as its most
//! significant bit, matching the party convention of [`crate::correlation`].

use std::f64::consts::FRAC_PI_4;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlation::{Behavior, CorrelationError, DEFAULT_MAX_PARTIES};
use crate::rng;

pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum QuantumError {
    #[error("state vector length {0} is not a power of two >= 2")]
    BadLength(usize),
    #[error("state norm is {0}, expected 1")]
    NotNormalized(f64),
    #[error("{0}")]
    Precondition(String),
    #[error("dimension mismatch: state has {state} qubits, assignment covers {assignment}")]
    DimensionMismatch { state: usize, assignment: usize },
    #[error("projection has zero probability ({0:e})")]
    ZeroProbability(f64),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    /// Wraps a normalized amplitude vector (norm checked to 1e-12).
    pub fn new(amps: Vec<Complex64>) -> Result<Self, QuantumError> {
        let n = qubit_count(amps.len())?;
        let norm = norm_sqr(&amps).sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(Self { n, amps })
    }

    /// Normalizes `amps` first.
    pub fn from_unnormalized(mut amps: Vec<Complex64>) -> Result<Self, QuantumError> {
        let n = qubit_count(amps.len())?;
        let norm = norm_sqr(&amps).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QuantumError::NotNormalized(norm));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amps).sqrt()
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Applies a single-qubit operator to `qubit` (0-based).
    pub fn apply_single(&self, qubit: usize, op: &Matrix2<Complex64>) -> PureState {
        let mut amps = self.amps.clone();
        apply_local(&mut amps, self.n, qubit, [[op[(0, 0)], op[(0, 1)]], [op[(1, 0)], op[(1, 1)]]]);
        PureState { n: self.n, amps }
    }
}

fn qubit_count(len: usize) -> Result<usize, QuantumError> {
    if len < 2 || !len.is_power_of_two() {
        return Err(QuantumError::BadLength(len));
    }
    Ok(len.trailing_zeros() as usize)
}

fn norm_sqr(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

/// `cos θ |0…0⟩ − sin θ |1…1⟩`.
pub fn ghz_state(n: usize, theta: f64) -> Result<PureState, QuantumError> {
    if !(2..=DEFAULT_MAX_PARTIES).contains(&n) {
        return Err(QuantumError::Precondition(format!(
            "ghz_state needs 2 <= n <= {DEFAULT_MAX_PARTIES}, got {n}"
        )));
    }
    if !(0.0..=FRAC_PI_4).contains(&theta) {
        return Err(QuantumError::Precondition(format!(
            "ghz_state needs theta in [0, pi/4], got {theta}"
        )));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    amps[0] = Complex64::new(theta.cos(), 0.0);
    amps[(1 << n) - 1] = Complex64::new(-theta.sin(), 0.0);
    Ok(PureState { n, amps })
}

/// Three-qubit canonical form
/// `h0|000⟩ + h1 e^{iφ}|100⟩ + h2|101⟩ + h3|110⟩ + h4|111⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcinParams {
    pub h: [f64; 5],
    pub phi: f64,
}

impl AcinParams {
    pub fn validate(&self) -> Result<(), QuantumError> {
        if self.h.iter().any(|&h| h.is_nan() || h < 0.0 || !h.is_finite()) {
            return Err(QuantumError::Precondition(format!(
                "Acin coefficients must be finite and nonnegative, got {:?}",
                self.h
            )));
        }
        let norm: f64 = self.h.iter().map(|h| h * h).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QuantumError::NotNormalized(norm.sqrt()));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.phi) {
            return Err(QuantumError::Precondition(format!(
                "phi must lie in [0, pi], got {}",
                self.phi
            )));
        }
        Ok(())
    }

    /// Recovers the parameters of a three-qubit state already in canonical form.
    pub fn from_state(state: &PureState) -> Result<Self, QuantumError> {
        if state.n_qubits() != 3 {
            return Err(QuantumError::Precondition(format!(
                "canonical form needs 3 qubits, got {}",
                state.n_qubits()
            )));
        }
        const TOL: f64 = 1e-10;
        let a = state.amplitudes();
        for idx in [0b001, 0b010, 0b011] {
            if a[idx].norm() > TOL {
                return Err(QuantumError::Precondition(format!(
                    "amplitude of |{idx:03b}> must vanish in canonical form"
                )));
            }
        }
        let mut h = [0.0; 5];
        for (slot, idx) in [(0, 0b000), (2, 0b101), (3, 0b110), (4, 0b111)] {
            let c = a[idx];
            if c.im.abs() > TOL || c.re < -TOL {
                return Err(QuantumError::Precondition(format!(
                    "amplitude of |{idx:03b}> must be real and nonnegative, got {c}"
                )));
            }
            h[slot] = c.re.max(0.0);
        }
        let c = a[0b100];
        h[1] = c.norm();
        let mut phi = if h[1] > 0.0 { c.arg() } else { 0.0 };
        if phi < -TOL {
            return Err(QuantumError::Precondition(format!(
                "phase of |100> must lie in [0, pi], got {phi}"
            )));
        }
        phi = phi.max(0.0);
        let params = AcinParams { h, phi };
        Ok(params)
    }
}

pub fn acin_state(params: &AcinParams) -> Result<PureState, QuantumError> {
    params.validate()?;
    let [h0, h1, h2, h3, h4] = params.h;
    let mut amps = vec![Complex64::new(0.0, 0.0); 8];
    amps[0b000] = Complex64::new(h0, 0.0);
    amps[0b100] = Complex64::from_polar(h1, params.phi);
    amps[0b101] = Complex64::new(h2, 0.0);
    amps[0b110] = Complex64::new(h3, 0.0);
    amps[0b111] = Complex64::new(h4, 0.0);
    PureState::new(amps)
}

/// Haar-random state: normalized vector of i.i.d. complex Gaussians.
pub fn haar_random_state(n: usize, seed: u64) -> Result<PureState, QuantumError> {
    if !(2..=DEFAULT_MAX_PARTIES).contains(&n) {
        return Err(QuantumError::Precondition(format!(
            "haar_random_state needs 2 <= n <= {DEFAULT_MAX_PARTIES}, got {n}"
        )));
    }
    let mut r = rng::rng_from_seed(seed);
    Ok(haar_with_rng(n, &mut r))
}

pub(crate) fn haar_with_rng(n: usize, r: &mut rng::Rng) -> PureState {
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(r);
            let im: f64 = StandardNormal.sample(r);
            Complex64::new(re, im)
        })
        .collect();
    PureState::from_unnormalized(amps).expect("gaussian vector is nonzero")
}

/// Rank-1 qubit projective measurement.
///
/// Outcome 0 is the bra `cos α ⟨0| + e^{iδ} sin α ⟨1|`, outcome 1 the
/// orthogonal bra `sin α ⟨0| − e^{iδ} cos α ⟨1|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitMeasurement {
    pub alpha: f64,
    pub delta: f64,
}

impl QubitMeasurement {
    pub fn new(alpha: f64, delta: f64) -> Self {
        Self { alpha, delta }
    }

    /// Bra components `[⟨m|0⟩, ⟨m|1⟩]` of the given outcome.
    #[inline]
    pub fn bra(&self, outcome: u8) -> [Complex64; 2] {
        let (s, c) = self.alpha.sin_cos();
        let phase = Complex64::from_polar(1.0, self.delta);
        if outcome == 0 {
            [Complex64::new(c, 0.0), phase * s]
        } else {
            [Complex64::new(s, 0.0), -phase * c]
        }
    }

    /// Rows are the outcome bras.
    #[inline]
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        [self.bra(0), self.bra(1)]
    }

    /// Measurement whose outcome-0 bra is `bra` up to normalization and
    /// global phase. Returns `α ∈ [0, π/2]`.
    pub fn from_bra(bra: [Complex64; 2]) -> Result<Self, QuantumError> {
        let n0 = bra[0].norm();
        let n1 = bra[1].norm();
        if (n0 + n1).is_nan() || n0 + n1 <= 0.0 {
            return Err(QuantumError::Precondition("zero measurement vector".into()));
        }
        let alpha = n1.atan2(n0);
        let delta = if n0 == 0.0 || n1 == 0.0 {
            0.0
        } else {
            (bra[1] * bra[0].conj()).arg()
        };
        Ok(Self { alpha, delta })
    }

    /// `max |⟨m_i|m_j⟩ − δ_ij|` over the two outcome vectors.
    pub fn orthonormality_residual(&self) -> f64 {
        let m = self.matrix();
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let ip: Complex64 = (0..2).map(|k| m[i][k] * m[j][k].conj()).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).norm());
            }
        }
        worst
    }
}

/// For every party, its measurement for setting 0 and setting 1.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementAssignment {
    parties: Vec<[QubitMeasurement; 2]>,
}

impl MeasurementAssignment {
    pub fn new(parties: Vec<[QubitMeasurement; 2]>) -> Result<Self, QuantumError> {
        if parties.is_empty() {
            return Err(QuantumError::Precondition(
                "assignment needs at least one party".into(),
            ));
        }
        Ok(Self { parties })
    }

    /// Every party uses the same pair of measurements.
    pub fn uniform(n: usize, settings: [QubitMeasurement; 2]) -> Self {
        Self {
            parties: vec![settings; n],
        }
    }

    pub fn n_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn get(&self, party: usize, setting: u8) -> QubitMeasurement {
        self.parties[party][setting as usize]
    }

    pub fn set(&mut self, party: usize, setting: u8, m: QubitMeasurement) {
        self.parties[party][setting as usize] = m;
    }

    pub fn parties(&self) -> &[[QubitMeasurement; 2]] {
        &self.parties
    }

    /// Flat angle vector `[α, δ]` per party per setting.
    pub fn to_angles(&self) -> Vec<f64> {
        self.parties
            .iter()
            .flat_map(|p| p.iter().flat_map(|m| [m.alpha, m.delta]))
            .collect()
    }

    pub fn from_angles(angles: &[f64]) -> Result<Self, QuantumError> {
        if angles.is_empty() || !angles.len().is_multiple_of(4) {
            return Err(QuantumError::Precondition(format!(
                "angle vector length {} is not a positive multiple of 4",
                angles.len()
            )));
        }
        Ok(Self {
            parties: angles
                .chunks(4)
                .map(|c| {
                    [
                        QubitMeasurement::new(c[0], c[1]),
                        QubitMeasurement::new(c[2], c[3]),
                    ]
                })
                .collect(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PartySettingsJson {
    settings: [QubitMeasurement; 2],
}

#[derive(Serialize, Deserialize)]
struct AssignmentJson {
    parties: Vec<PartySettingsJson>,
}

impl Serialize for MeasurementAssignment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AssignmentJson {
            parties: self
                .parties
                .iter()
                .map(|&settings| PartySettingsJson { settings })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MeasurementAssignment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = AssignmentJson::deserialize(d)?;
        MeasurementAssignment::new(raw.parties.into_iter().map(|p| p.settings).collect())
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    n: usize,
    amps: Vec<[f64; 2]>,
}

impl Serialize for PureState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StateJson {
            n: self.n,
            amps: self.amps.iter().map(|a| [a.re, a.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = StateJson::deserialize(d)?;
        if raw.amps.len() != 1usize << raw.n.min(30) {
            return Err(D::Error::custom(format!(
                "state declares n = {} but has {} amplitudes",
                raw.n,
                raw.amps.len()
            )));
        }
        PureState::new(raw.amps.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
            .map_err(D::Error::custom)
    }
}

/// In-place application of a 2×2 matrix to `qubit`: `new_r = Σ_c m[r][c] old_c`.
fn apply_local(amps: &mut [Complex64], n: usize, qubit: usize, m: [[Complex64; 2]; 2]) {
    let stride = 1usize << (n - 1 - qubit);
    let block = stride << 1;
    for base in (0..amps.len()).step_by(block) {
        for i in base..base + stride {
            let a0 = amps[i];
            let a1 = amps[i + stride];
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[i + stride] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

/// Contracts `qubit` with `bra`, returning a vector on the remaining qubits.
pub(crate) fn contract_qubit(
    amps: &[Complex64],
    n: usize,
    qubit: usize,
    bra: [Complex64; 2],
) -> Vec<Complex64> {
    let stride = 1usize << (n - 1 - qubit);
    let block = stride << 1;
    let mut out = Vec::with_capacity(amps.len() / 2);
    for base in (0..amps.len()).step_by(block) {
        for i in base..base + stride {
            out.push(bra[0] * amps[i] + bra[1] * amps[i + stride]);
        }
    }
    out
}

/// `⟨m_{a_1|x_1}| ⊗ … ⊗ ⟨m_{a_n|x_n}| ψ⟩`.
pub fn amplitude(state: &PureState, m: &MeasurementAssignment, x: u32, a: u32) -> Complex64 {
    let n = state.n;
    let mut v = state.amps.clone();
    // contract from the last qubit so remaining indices keep their positions
    for q in (0..n).rev() {
        let xb = ((x >> (n - 1 - q)) & 1) as u8;
        let ab = ((a >> (n - 1 - q)) & 1) as u8;
        v = contract_qubit(&v, q + 1, q, m.get(q, xb).bra(ab));
    }
    v[0]
}

/// Single Born-rule probability `P(a|x)`.
pub fn probability(state: &PureState, m: &MeasurementAssignment, x: u32, a: u32) -> f64 {
    amplitude(state, m, x, a).norm_sqr()
}

/// Full behavior induced by measuring `state` with `m`.
pub fn behavior_from_state(
    state: &PureState,
    m: &MeasurementAssignment,
) -> Result<Behavior<f64>, QuantumError> {
    let n = state.n;
    if m.n_parties() != n {
        return Err(QuantumError::DimensionMismatch {
            state: n,
            assignment: m.n_parties(),
        });
    }
    let dim = 1usize << n;
    let rows: Vec<Vec<f64>> = (0..dim as u32)
        .into_par_iter()
        .map(|x| {
            let mut amps = state.amps.clone();
            for q in 0..n {
                let setting = ((x >> (n - 1 - q)) & 1) as u8;
                apply_local(&mut amps, n, q, m.get(q, setting).matrix());
            }
            amps.iter().map(|c| c.norm_sqr()).collect()
        })
        .collect();
    Ok(Behavior::from_table(n, rows.concat())?)
}

/// Projects `n − 2` parties onto fixed outcomes and returns the normalized
/// state of the two remaining parties (lower index first) together with the
/// probability of the fixed outcomes.
pub fn conditional_two_party_state(
    state: &PureState,
    fixed: &[(usize, QubitMeasurement, u8)],
) -> Result<(PureState, f64), QuantumError> {
    let n = state.n;
    if fixed.len() + 2 != n {
        return Err(QuantumError::Precondition(format!(
            "exactly {} parties must be fixed, got {}",
            n.saturating_sub(2),
            fixed.len()
        )));
    }
    let mut seen = vec![false; n];
    for &(p, _, o) in fixed {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(QuantumError::Precondition(format!(
                "fixed party {p} repeated or out of range"
            )));
        }
        if o > 1 {
            return Err(QuantumError::Precondition(format!("outcome {o} is not a bit")));
        }
    }
    let mut order: Vec<_> = fixed.to_vec();
    // highest index first keeps lower qubit positions stable
    order.sort_by_key(|e| std::cmp::Reverse(e.0));
    let mut v = state.amps.clone();
    let mut width = n;
    for (p, meas, o) in order {
        v = contract_qubit(&v, width, p, meas.bra(o));
        width -= 1;
    }
    let prob = norm_sqr(&v);
    if prob <= 1e-14 {
        return Err(QuantumError::ZeroProbability(prob));
    }
    let s = prob.sqrt();
    v.iter_mut().for_each(|c| *c /= s);
    Ok((PureState { n: 2, amps: v }, prob))
}

/// `(U_A ⊗ U_B)|ψ⟩ = cos θ|00⟩ + sin θ|11⟩` with `θ ∈ [0, π/4]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtDecomposition {
    pub theta: f64,
    pub u_a: Matrix2<Complex64>,
    pub u_b: Matrix2<Complex64>,
}

impl SchmidtDecomposition {
    pub fn canonical_state(&self) -> PureState {
        let (s, c) = self.theta.sin_cos();
        PureState {
            n: 2,
            amps: vec![
                Complex64::new(c, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(s, 0.0),
            ],
        }
    }

    /// Applies `U_A ⊗ U_B`.
    pub fn rotate(&self, state: &PureState) -> PureState {
        state.apply_single(0, &self.u_a).apply_single(1, &self.u_b)
    }

    /// Maps a Schmidt-frame bra of party A back to the original frame.
    pub fn bra_a_to_original(&self, bra: [Complex64; 2]) -> [Complex64; 2] {
        row_times(bra, &self.u_a)
    }

    pub fn bra_b_to_original(&self, bra: [Complex64; 2]) -> [Complex64; 2] {
        row_times(bra, &self.u_b)
    }

    /// Expresses an original-frame bra of party B in the Schmidt frame.
    pub fn bra_b_to_schmidt(&self, bra: [Complex64; 2]) -> [Complex64; 2] {
        row_times(bra, &self.u_b.adjoint())
    }

    pub fn bra_a_to_schmidt(&self, bra: [Complex64; 2]) -> [Complex64; 2] {
        row_times(bra, &self.u_a.adjoint())
    }
}

fn row_times(bra: [Complex64; 2], m: &Matrix2<Complex64>) -> [Complex64; 2] {
    [
        bra[0] * m[(0, 0)] + bra[1] * m[(1, 0)],
        bra[0] * m[(0, 1)] + bra[1] * m[(1, 1)],
    ]
}

/// Schmidt decomposition of a normalized two-qubit state via the singular
/// value decomposition of its 2×2 amplitude matrix.
pub fn schmidt_decompose(state: &PureState) -> Result<SchmidtDecomposition, QuantumError> {
    if state.n != 2 {
        return Err(QuantumError::Precondition(format!(
            "schmidt_decompose needs 2 qubits, got {}",
            state.n
        )));
    }
    let a = &state.amps;
    let c = Matrix2::new(a[0], a[1], a[2], a[3]);
    let svd = c.svd(true, true);
    let (w, v_t) = (
        svd.u.expect("requested U"),
        svd.v_t.expect("requested V^T"),
    );
    let mut s = [svd.singular_values[0], svd.singular_values[1]];
    // C = W S Vt; with U_A = W^† and U_B^T = Vt^† we get U_A C U_B^T = S
    let mut u_a = w.adjoint();
    let mut u_b = v_t.map(|z| z.conj());
    if s[0] < s[1] {
        s.swap(0, 1);
        u_a.swap_rows(0, 1);
        u_b.swap_rows(0, 1);
    }
    let norm = (s[0] * s[0] + s[1] * s[1]).sqrt();
    let theta = (s[1] / norm).atan2(s[0] / norm).clamp(0.0, FRAC_PI_4);
    Ok(SchmidtDecomposition { theta, u_a, u_b })
}
