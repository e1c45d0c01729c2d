//! Closed-form violating measurements.
//!
//! * GHZ states `cos θ|0…0⟩ − sin θ|1…1⟩` with every party using the same two
//!   real measurements violate the symmetric CHSH family.
//! * Two-qubit Hardy measurements on `cos θ|00⟩ + sin θ|11⟩`.
//! * Symmetric three-qubit canonical-form states: fix the setting-0
//!   measurement of parties 2 and 3, condition on party 3, and complete a
//!   Hardy argument on the remaining pair in its Schmidt frame.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::correlation::{Behavior, DEFAULT_MAX_PARTIES};
use crate::forge::{self, ForgeError};
use crate::quantum::{
    self, AcinParams, MeasurementAssignment, PureState, QuantumError, QubitMeasurement,
};

/// Zero conditions of composed constructions.
pub const COMPOSED_ZERO_TOL: f64 = 1e-10;
/// Zero conditions of the direct two-qubit Hardy construction.
pub const HARDY_ZERO_TOL: f64 = 1e-12;
/// Smallest violation accepted from the three-qubit construction.
pub const MIN_THEOREM2_VIOLATION: f64 = 1e-6;

const FORBIDDEN_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("{0}")]
    Precondition(String),
    #[error("{what}: residual {residual:e} exceeds {tolerance:e}")]
    Tolerance {
        what: String,
        residual: f64,
        tolerance: f64,
    },
    #[error("no admissible free angle: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Forge(#[from] ForgeError),
}

fn check_open_theta(theta: f64, hint: &str) -> Result<(), AnalyticError> {
    if !(theta > FORBIDDEN_TOL && theta < FRAC_PI_4 - FORBIDDEN_TOL) {
        return Err(AnalyticError::Precondition(format!(
            "theta must lie strictly inside (0, pi/4), got {theta}{hint}"
        )));
    }
    Ok(())
}

/// `α0 = atan(tan θ^{−3/(3n−4)})`, `α1 = −atan(tan θ^{−1/(3n−4)})`.
pub fn ghz_angles(n: usize, theta: f64) -> Result<(f64, f64), AnalyticError> {
    if !(3..=DEFAULT_MAX_PARTIES).contains(&n) {
        return Err(AnalyticError::Precondition(format!(
            "GHZ construction needs 3 <= n <= {DEFAULT_MAX_PARTIES}, got {n}"
        )));
    }
    check_open_theta(
        theta,
        "; the closed form breaks down at the endpoints, use the optimizer there",
    )?;
    let t = theta.tan();
    let d = (3 * n - 4) as f64;
    Ok((t.powf(-3.0 / d).atan(), -t.powf(-1.0 / d).atan()))
}

/// `(n−1)(cos^n α0 cos θ − sin^n α0 sin θ)²`.
pub fn ghz_closed_form(n: usize, theta: f64) -> Result<f64, AnalyticError> {
    let (a0, _) = ghz_angles(n, theta)?;
    let (s, c) = a0.sin_cos();
    let amp = c.powi(n as i32) * theta.cos() - s.powi(n as i32) * theta.sin();
    Ok((n - 1) as f64 * amp * amp)
}

/// Closed forms of `P(10…0|10…0)` and `P(00…0|110…0)`, both zero.
pub fn ghz_zero_terms_closed_form(n: usize, theta: f64) -> Result<[f64; 2], AnalyticError> {
    let (a0, a1) = ghz_angles(n, theta)?;
    let (s0, c0) = a0.sin_cos();
    let (s1, c1) = a1.sin_cos();
    let (st, ct) = theta.sin_cos();
    let k = n as i32;
    let single = c0.powi(k - 1) * s1 * ct + s0.powi(k - 1) * c1 * st;
    let double = c0.powi(k - 2) * c1 * c1 * ct - s0.powi(k - 2) * s1 * s1 * st;
    Ok([single * single, double * double])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GhzCertificate {
    pub n: usize,
    pub theta: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    /// Symmetric-family value from the simulated behavior.
    pub value: f64,
    pub value_closed: f64,
    pub p_root: f64,
    /// Largest `P(e_i|e_i)` and largest `P(0…0|e_i + e_j)`.
    pub zero_residuals: [f64; 2],
    pub assignment: MeasurementAssignment,
}

impl GhzCertificate {
    /// `|value − closed form|`.
    pub fn residual(&self) -> f64 {
        (self.value - self.value_closed).abs()
    }
}

pub fn ghz_assignment(n: usize, theta: f64) -> Result<MeasurementAssignment, AnalyticError> {
    let (a0, a1) = ghz_angles(n, theta)?;
    Ok(MeasurementAssignment::uniform(
        n,
        [QubitMeasurement::new(a0, 0.0), QubitMeasurement::new(a1, 0.0)],
    ))
}

/// Simulates the GHZ construction and checks it against the closed form.
pub fn ghz_violation(n: usize, theta: f64) -> Result<GhzCertificate, AnalyticError> {
    let (alpha0, alpha1) = ghz_angles(n, theta)?;
    let assignment = ghz_assignment(n, theta)?;
    let state = quantum::ghz_state(n, theta)?;
    let behavior = quantum::behavior_from_state(&state, &assignment)?;
    let f = forge::i_sym(n)?;
    let value = f.evaluate(&behavior)?;
    let p_root = behavior.get(0, 0);
    let top = |i: usize| 1u32 << (n - 1 - i);
    let single = (0..n)
        .map(|i| behavior.get(top(i), top(i)))
        .fold(0.0, f64::max);
    let double = forge::combinations(n, 2)
        .iter()
        .map(|p| behavior.get(top(p[0]) | top(p[1]), 0))
        .fold(0.0, f64::max);
    let cert = GhzCertificate {
        n,
        theta,
        alpha0,
        alpha1,
        value,
        value_closed: ghz_closed_form(n, theta)?,
        p_root,
        zero_residuals: [single, double],
        assignment,
    };
    for (what, residual) in [
        ("P(e_i|e_i)", single),
        ("P(0|e_i+e_j)", double),
        ("value minus closed form", cert.residual()),
        ("value minus (n-1) P(0|0)", (value - (n - 1) as f64 * p_root).abs()),
    ] {
        if residual > COMPOSED_ZERO_TOL {
            return Err(AnalyticError::Tolerance {
                what: what.into(),
                residual,
                tolerance: COMPOSED_ZERO_TOL,
            });
        }
    }
    if value <= 0.0 {
        return Err(AnalyticError::Tolerance {
            what: "violation is not positive".into(),
            residual: value,
            tolerance: 0.0,
        });
    }
    Ok(cert)
}

type Bra = [Complex64; 2];

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Bra orthogonal to `b`.
fn orthogonal(b: Bra) -> Bra {
    [b[1].conj(), -b[0].conj()]
}

/// Bra of the first qubit annihilating `cos θ|00⟩ + sin θ|11⟩` together with
/// bra `partner` on the second qubit (the state is symmetric, so this also
/// works with the roles exchanged).
fn annihilator(partner: Bra, theta: f64) -> Bra {
    let (s, c_) = theta.sin_cos();
    [partner[1] * s, -partner[0] * c_]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HardyCertificate {
    pub theta: f64,
    pub alpha: f64,
    pub delta: f64,
    /// First party, settings 0 and 1.
    pub m: [QubitMeasurement; 2],
    /// Second party, settings 0 and 1.
    pub n: [QubitMeasurement; 2],
    pub p_00_00: f64,
    pub p_01_01: f64,
    pub p_10_10: f64,
    pub p_00_11: f64,
}

impl HardyCertificate {
    pub fn assignment(&self) -> MeasurementAssignment {
        MeasurementAssignment::new(vec![self.m, self.n]).expect("two parties")
    }

    pub fn max_zero_residual(&self) -> f64 {
        self.p_01_01.max(self.p_10_10).max(self.p_00_11)
    }
}

/// Hardy measurements on `cos θ|00⟩ + sin θ|11⟩` whose first-party setting-0
/// outcome-0 bra is `cos α⟨0| + e^{iδ} sin α⟨1|`.
pub fn hardy_measurements(theta: f64, alpha: f64, delta: f64) -> Result<HardyCertificate, AnalyticError> {
    check_open_theta(theta, "; sin 4θ vanishes at the endpoints")?;
    if (2.0 * alpha).sin().abs() < FORBIDDEN_TOL {
        return Err(AnalyticError::Precondition(format!(
            "alpha = {alpha} lies on a forbidden line (alpha = 0 or pi/2 mod pi)"
        )));
    }
    let (m, n, _) = hardy_bras(theta, alpha, delta);
    let meas = |b: Bra| QubitMeasurement::from_bra(b);
    let m = [meas(m[0])?, meas(m[1])?];
    let n = [meas(n[0])?, meas(n[1])?];
    let cert = hardy_certificate(theta, alpha, delta, m, n)?;
    if cert.max_zero_residual() > HARDY_ZERO_TOL {
        return Err(AnalyticError::Tolerance {
            what: "Hardy zero condition".into(),
            residual: cert.max_zero_residual(),
            tolerance: HARDY_ZERO_TOL,
        });
    }
    Ok(cert)
}

/// Outcome-0 bras `[M0, M1]`, `[N0, N1]` and the outcome-1 bra of `N1`.
fn hardy_bras(theta: f64, alpha: f64, delta: f64) -> ([Bra; 2], [Bra; 2], Bra) {
    let (sa, ca) = alpha.sin_cos();
    let m0 = [c(ca), Complex64::from_polar(sa, delta)];
    // P(01|01) = 0
    let n1_out1 = annihilator(m0, theta);
    let n1 = orthogonal(n1_out1);
    // P(00|11) = 0
    let m1 = annihilator(n1, theta);
    // P(10|10) = 0
    let n0 = annihilator(orthogonal(m1), theta);
    ([m0, m1], [n0, n1], n1_out1)
}

fn hardy_certificate(
    theta: f64,
    alpha: f64,
    delta: f64,
    m: [QubitMeasurement; 2],
    n: [QubitMeasurement; 2],
) -> Result<HardyCertificate, AnalyticError> {
    let (s, c_) = theta.sin_cos();
    let state = PureState::new(vec![c(c_), c(0.0), c(0.0), c(s)])?;
    let assignment = MeasurementAssignment::new(vec![m, n])?;
    let p = |x: u32, a: u32| quantum::probability(&state, &assignment, x, a);
    Ok(HardyCertificate {
        theta,
        alpha,
        delta,
        m,
        n,
        p_00_00: p(0b00, 0b00),
        p_01_01: p(0b01, 0b01),
        p_10_10: p(0b10, 0b10),
        p_00_11: p(0b11, 0b00),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem2Certificate {
    pub params: AcinParams,
    /// Setting-0 angle shared by parties 2 and 3.
    pub alpha: f64,
    /// Schmidt angle of the pair (1, 2) after party 3 obtains outcome 0.
    pub conditional_theta: f64,
    pub assignment: MeasurementAssignment,
    /// Centered family value, equal to `P(000|000)`.
    pub value: f64,
    pub p_root: f64,
    /// `P(010|010)`, `P(100|100)`, `P(000|110)`, `P(001|001)`, `P(000|101)`.
    pub zeros: [f64; 5],
    /// Free angles tried before success.
    pub attempts: usize,
}

impl Theorem2Certificate {
    pub fn max_zero_residual(&self) -> f64 {
        self.zeros.iter().copied().fold(0.0, f64::max)
    }
}

/// Free-angle candidates for parties 2 and 3, in the order tried.
pub const THEOREM2_ALPHAS: [f64; 7] = [
    FRAC_PI_4,
    PI / 3.0,
    PI / 6.0,
    5.0 * PI / 12.0,
    PI / 12.0,
    3.0 * PI / 8.0,
    PI / 8.0,
];

/// Violating measurements for a canonical-form state with `h2 = h3` and
/// `h0, h2, h4 > 0`.
pub fn theorem2_construction(params: &AcinParams) -> Result<Theorem2Certificate, AnalyticError> {
    params.validate()?;
    let [h0, _, h2, h3, h4] = params.h;
    if (h2 - h3).abs() > 1e-12 {
        return Err(AnalyticError::Precondition(format!(
            "state must be symmetric under exchanging parties 2 and 3 (h2 = h3), got h2 = {h2}, h3 = {h3}"
        )));
    }
    for (name, h) in [("h0", h0), ("h2", h2), ("h4", h4)] {
        if h <= 1e-12 {
            return Err(AnalyticError::Precondition(format!(
                "{name} must be nonzero, got {h}"
            )));
        }
    }
    let state = quantum::acin_state(params)?;
    let f = forge::i_centered(3)?;
    let mut reasons = Vec::new();
    for (attempt, &alpha) in THEOREM2_ALPHAS.iter().enumerate() {
        // tan α = −h2/h4 makes the conditional state a product
        if (alpha.tan() + h2 / h4).abs() < 1e-6 {
            reasons.push(format!("alpha = {alpha:.4}: tan alpha = -h2/h4"));
            continue;
        }
        match theorem2_attempt(&state, params, alpha, &f) {
            Ok(mut cert) => {
                cert.attempts = attempt + 1;
                return Ok(cert);
            }
            Err(e) => reasons.push(format!("alpha = {alpha:.4}: {e}")),
        }
    }
    Err(AnalyticError::Degenerate(reasons.join("; ")))
}

fn theorem2_attempt(
    state: &PureState,
    params: &AcinParams,
    alpha: f64,
    f: &forge::BellFunctional,
) -> Result<Theorem2Certificate, AnalyticError> {
    let shared = QubitMeasurement::new(alpha, 0.0);
    let (pair, _) = quantum::conditional_two_party_state(state, &[(2, shared, 0)])?;
    let schmidt = quantum::schmidt_decompose(&pair)?;
    let theta = schmidt.theta;
    if (4.0 * theta).sin().abs() < 1e-6 {
        return Err(AnalyticError::Degenerate(format!(
            "conditional Schmidt angle {theta} makes sin 4θ vanish"
        )));
    }
    // the free Hardy measurement sits on party 2, the Schmidt frame's second qubit
    let free = QubitMeasurement::from_bra(schmidt.bra_b_to_schmidt(shared.bra(0)))?;
    if (2.0 * free.alpha).sin().abs() < 1e-6 {
        return Err(AnalyticError::Degenerate(
            "shared measurement is diagonal in the Schmidt frame".into(),
        ));
    }
    let (m, n, _) = hardy_bras(theta, free.alpha, free.delta);
    let party2_setting1 = QubitMeasurement::from_bra(schmidt.bra_b_to_original(m[1]))?;
    let party1 = [
        QubitMeasurement::from_bra(schmidt.bra_a_to_original(n[0]))?,
        QubitMeasurement::from_bra(schmidt.bra_a_to_original(n[1]))?,
    ];
    let assignment = MeasurementAssignment::new(vec![
        party1,
        [shared, party2_setting1],
        [shared, party2_setting1],
    ])?;
    let behavior: Behavior<f64> = quantum::behavior_from_state(state, &assignment)?;
    let value = f.evaluate(&behavior)?;
    let p_root = behavior.get(0, 0);
    let zeros = [
        behavior.get(0b010, 0b010),
        behavior.get(0b100, 0b100),
        behavior.get(0b110, 0b000),
        behavior.get(0b001, 0b001),
        behavior.get(0b101, 0b000),
    ];
    let cert = Theorem2Certificate {
        params: *params,
        alpha,
        conditional_theta: theta,
        assignment,
        value,
        p_root,
        zeros,
        attempts: 0,
    };
    if cert.max_zero_residual() > COMPOSED_ZERO_TOL {
        return Err(AnalyticError::Tolerance {
            what: "zero condition".into(),
            residual: cert.max_zero_residual(),
            tolerance: COMPOSED_ZERO_TOL,
        });
    }
    if value <= MIN_THEOREM2_VIOLATION {
        return Err(AnalyticError::Degenerate(format!(
            "violation {value:e} is below {MIN_THEOREM2_VIOLATION:e}"
        )));
    }
    Ok(cert)
}

/// Normalized outcome-0 bras `[M00, M01, N00, N01]` written out explicitly.
pub fn hardy_bras_explicit(theta: f64, alpha: f64, delta: f64) -> [Bra; 4] {
    let (sa, ca) = alpha.sin_cos();
    let (s, c_) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, delta);
    let normalize = |b: Bra| {
        let norm = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
        [b[0] / norm, b[1] / norm]
    };
    [
        [c(ca), e * sa],
        normalize([e.conj() * sa * s * s, c(-ca * c_ * c_)]),
        normalize([e * sa * s.powi(3), c(-ca * c_.powi(3))]),
        normalize([c(ca * c_), e.conj() * sa * s]),
    ]
}

/// `P(00|00)` of the Hardy construction in closed form.
pub fn hardy_p00_closed_form(theta: f64, alpha: f64) -> f64 {
    let (sa, ca) = alpha.sin_cos();
    let (s, c_) = theta.sin_cos();
    let amp = (2.0 * alpha).sin() * (4.0 * theta).sin() / 8.0;
    amp * amp / (sa * sa * s.powi(6) + ca * ca * c_.powi(6))
}
