//! Measurement search maximizing a Bell functional on a fixed pure state.
//!
//! The see-saw updates one party at a time. With the other parties fixed,
//! each of the party's two settings contributes `⟨m|D|m⟩ + const` for a 2×2
//! Hermitian `D`, so the best outcome-0 vector is the top eigenvector of `D`
//! and every update is an exact maximization. The direct search runs a
//! Nelder–Mead simplex over all `4n` angles.

use std::f64::consts::{PI, TAU};
use std::str::FromStr;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analytic;
use crate::forge::BellFunctional;
use crate::quantum::{
    self, contract_qubit, AcinParams, MeasurementAssignment, PureState, QuantumError,
    QubitMeasurement,
};
use crate::rng::{self, tags};

/// Values above this count as a violation of a bound of 0.
pub const VIOLATION_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error("functional has {functional} parties but the state has {state} qubits")]
    DimensionMismatch { functional: usize, state: usize },
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SeeSaw,
    DirectSearch,
}

impl FromStr for Method {
    type Err = OptimizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "see-saw" | "seesaw" | "coordinate-see-saw" => Ok(Method::SeeSaw),
            "direct-search" | "nelder-mead" => Ok(Method::DirectSearch),
            other => Err(OptimizeError::Precondition(format!(
                "unknown method {other:?} (expected see-saw or direct-search)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeOptions {
    pub restarts: usize,
    pub seed: u64,
    pub method: Method,
    /// See-saw sweeps (or simplex iterations per angle) before giving up.
    pub max_sweeps: usize,
    /// Absolute improvement below which a restart counts as converged.
    pub tol: f64,
    /// Starting point of restart 0.
    pub warm_start: Option<MeasurementAssignment>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            seed: 0,
            method: Method::SeeSaw,
            max_sweeps: 200,
            tol: 1e-10,
            warm_start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best_value: f64,
    pub best_assignment: MeasurementAssignment,
    pub best_restart: usize,
    pub restarts_used: usize,
    /// Whether the best restart stopped on the improvement threshold.
    pub converged: bool,
    pub rng_seed: u64,
    pub method: Method,
    pub restart_values: Vec<f64>,
    /// 1-based count of restarts needed to first exceed the violation threshold.
    pub restarts_to_first_violation: Option<usize>,
}

/// `Σ c · P(a|x)` for the given measurements.
pub fn assignment_value(f: &BellFunctional, state: &PureState, m: &MeasurementAssignment) -> f64 {
    f.evaluate_with(|x, a| quantum::probability(state, m, x, a))
}

fn check_dims(f: &BellFunctional, state: &PureState) -> Result<(), OptimizeError> {
    if f.n_parties() != state.n_qubits() {
        return Err(OptimizeError::DimensionMismatch {
            functional: f.n_parties(),
            state: state.n_qubits(),
        });
    }
    Ok(())
}

/// Best value over `opts.restarts` independent local searches.
pub fn optimize(
    f: &BellFunctional,
    state: &PureState,
    opts: &OptimizeOptions,
) -> Result<OptimizationResult, OptimizeError> {
    check_dims(f, state)?;
    if opts.restarts == 0 {
        return Err(OptimizeError::Precondition("need at least one restart".into()));
    }
    if let Some(w) = &opts.warm_start {
        if w.n_parties() != state.n_qubits() {
            return Err(OptimizeError::Precondition(format!(
                "warm start covers {} parties, state has {} qubits",
                w.n_parties(),
                state.n_qubits()
            )));
        }
    }
    let n = state.n_qubits();
    let runs: Vec<RestartOutcome> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let start = match (&opts.warm_start, r) {
                (Some(w), 0) => w.clone(),
                _ => random_assignment(n, &mut rng::substream(opts.seed, tags::RESTART, r as u64)),
            };
            match opts.method {
                Method::SeeSaw => see_saw(f, state, start, opts.max_sweeps, opts.tol),
                Method::DirectSearch => direct_search(f, state, start, opts.max_sweeps, opts.tol),
            }
        })
        .collect();
    let best_restart = runs
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| if r.value > runs[best].value { i } else { best });
    let restart_values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let restarts_to_first_violation = restart_values
        .iter()
        .position(|&v| v > VIOLATION_THRESHOLD)
        .map(|i| i + 1);
    let best = &runs[best_restart];
    Ok(OptimizationResult {
        best_value: best.value,
        best_assignment: best.assignment.clone(),
        best_restart,
        restarts_used: opts.restarts,
        converged: best.converged,
        rng_seed: opts.seed,
        method: opts.method,
        restart_values,
        restarts_to_first_violation,
    })
}

fn random_assignment(n: usize, r: &mut rng::Rng) -> MeasurementAssignment {
    let parties = (0..n)
        .map(|_| {
            let mut m = || QubitMeasurement::new(r.random_range(0.0..PI), r.random_range(0.0..TAU));
            [m(), m()]
        })
        .collect();
    MeasurementAssignment::new(parties).expect("n >= 1")
}

#[derive(Clone, Debug)]
struct RestartOutcome {
    value: f64,
    assignment: MeasurementAssignment,
    converged: bool,
}

/// Values after each completed sweep, starting with the initial value.
#[derive(Clone, Debug, PartialEq)]
pub struct SeeSawTrace {
    pub values: Vec<f64>,
    pub assignment: MeasurementAssignment,
    pub converged: bool,
}

/// One see-saw run from `start`, recording the value after every sweep.
pub fn see_saw_trace(
    f: &BellFunctional,
    state: &PureState,
    start: MeasurementAssignment,
    max_sweeps: usize,
    tol: f64,
) -> Result<SeeSawTrace, OptimizeError> {
    check_dims(f, state)?;
    let mut m = start;
    let mut values = vec![assignment_value(f, state, &m)];
    let mut converged = false;
    for _ in 0..max_sweeps {
        for p in 0..state.n_qubits() {
            update_party(f, state, &mut m, p);
        }
        let v = assignment_value(f, state, &m);
        let last = *values.last().expect("non-empty");
        values.push(v);
        if v - last < tol {
            converged = true;
            break;
        }
    }
    Ok(SeeSawTrace {
        values,
        assignment: m,
        converged,
    })
}

fn see_saw(
    f: &BellFunctional,
    state: &PureState,
    start: MeasurementAssignment,
    max_sweeps: usize,
    tol: f64,
) -> RestartOutcome {
    let trace = see_saw_trace(f, state, start, max_sweeps, tol).expect("dimensions checked");
    RestartOutcome {
        value: *trace.values.last().expect("non-empty"),
        assignment: trace.assignment,
        converged: trace.converged,
    }
}

/// Amplitude with every party except `skip` contracted, as a vector over the
/// computational basis of `skip`.
fn partial_amplitude(
    state: &PureState,
    m: &MeasurementAssignment,
    x: u32,
    a: u32,
    skip: usize,
) -> [Complex64; 2] {
    let n = state.n_qubits();
    let mut v = state.amplitudes().to_vec();
    let mut width = n;
    for q in (0..n).rev() {
        if q == skip {
            continue;
        }
        let xb = ((x >> (n - 1 - q)) & 1) as u8;
        let ab = ((a >> (n - 1 - q)) & 1) as u8;
        v = contract_qubit(&v, width, q, m.get(q, xb).bra(ab));
        width -= 1;
    }
    [v[0], v[1]]
}

/// Replaces both settings of party `p` by their exact optimum.
fn update_party(f: &BellFunctional, state: &PureState, m: &mut MeasurementAssignment, p: usize) {
    let n = state.n_qubits();
    let zero = Complex64::new(0.0, 0.0);
    // d[s] = W_{s,0} − W_{s,1}
    let mut d = [Matrix2::from_element(zero); 2];
    for (k, c) in f.terms() {
        let phi = partial_amplitude(state, m, k.x, k.a, p);
        let s = ((k.x >> (n - 1 - p)) & 1) as usize;
        let o = (k.a >> (n - 1 - p)) & 1;
        let sign = if o == 0 { 1.0 } else { -1.0 };
        let w = sign * crate::rational::to_f64(&c);
        for i in 0..2 {
            for j in 0..2 {
                d[s][(i, j)] += phi[i] * phi[j].conj() * w;
            }
        }
    }
    for (s, ds) in d.iter().enumerate() {
        if ds.iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        let eig = ds.symmetric_eigen();
        let top = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
        let v = eig.eigenvectors.column(top);
        let bra = [v[0].conj(), v[1].conj()];
        if let Ok(meas) = QubitMeasurement::from_bra(bra) {
            m.set(p, s as u8, meas);
        }
    }
}

struct NegatedValue<'a> {
    f: &'a BellFunctional,
    state: &'a PureState,
}

impl CostFunction for NegatedValue<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, angles: &Self::Param) -> Result<f64, argmin::core::Error> {
        let m = MeasurementAssignment::from_angles(angles)?;
        Ok(-assignment_value(self.f, self.state, &m))
    }
}

fn direct_search(
    f: &BellFunctional,
    state: &PureState,
    start: MeasurementAssignment,
    max_sweeps: usize,
    tol: f64,
) -> RestartOutcome {
    let x0 = start.to_angles();
    let dim = x0.len();
    let mut simplex = vec![x0.clone()];
    for i in 0..dim {
        let mut v = x0.clone();
        v[i] += 0.4;
        simplex.push(v);
    }
    let fallback = |converged| RestartOutcome {
        value: assignment_value(f, state, &start),
        assignment: start.clone(),
        converged,
    };
    let solver = match NelderMead::new(simplex).with_sd_tolerance(tol) {
        Ok(s) => s,
        Err(_) => return fallback(false),
    };
    let max_iters = (max_sweeps * dim) as u64;
    let run = Executor::new(NegatedValue { f, state }, solver)
        .configure(|s| s.max_iters(max_iters))
        .run();
    match run {
        Ok(res) => {
            let st = res.state();
            let angles = st.get_best_param().cloned().unwrap_or(x0);
            let assignment = MeasurementAssignment::from_angles(&angles).expect("4n angles");
            let value = assignment_value(f, state, &assignment);
            RestartOutcome {
                value,
                assignment,
                converged: st.get_iter() < max_iters,
            }
        }
        Err(_) => fallback(false),
    }
}

/// Closed-form violating measurements when `state` is a GHZ state
/// `cos θ|0…0⟩ − sin θ|1…1⟩` with θ strictly inside (0, π/4), or a
/// three-qubit canonical-form state covered by the symmetric construction.
pub fn analytic_warm_start(state: &PureState) -> Option<MeasurementAssignment> {
    let n = state.n_qubits();
    let amps = state.amplitudes();
    let last = amps.len() - 1;
    let is_ghz = n >= 3
        && amps
            .iter()
            .enumerate()
            .all(|(i, z)| i == 0 || i == last || z.norm() < 1e-12)
        && amps[0].im.abs() < 1e-12
        && amps[last].im.abs() < 1e-12
        && amps[0].re > 0.0
        && amps[last].re <= 0.0;
    if is_ghz {
        let theta = (-amps[last].re).atan2(amps[0].re);
        return analytic::ghz_assignment(n, theta).ok();
    }
    if n == 3 {
        if let Ok(params) = AcinParams::from_state(state) {
            return analytic::theorem2_construction(&params)
                .ok()
                .map(|c| c.assignment);
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanEntry {
    pub state_index: usize,
    pub best_value: f64,
    pub restarts_to_first_violation: Option<usize>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSummary {
    pub n: usize,
    pub count: usize,
    pub fraction_violating: f64,
    pub min_best_value: f64,
    pub max_best_value: f64,
    pub results: Vec<ScanEntry>,
}

/// The `index`-th state drawn by [`scan_random_states`] under `seed`.
pub fn scan_state(n: usize, seed: u64, index: usize) -> Result<PureState, OptimizeError> {
    Ok(quantum::haar_random_state(
        n,
        rng::substream_seed(seed, tags::SCAN_STATE, index as u64),
    )?)
}

/// Optimizes `f` on `count` Haar-random states. `opts.seed` drives both the
/// states and the restarts; any warm start in `opts` is ignored.
pub fn scan_random_states(
    f: &BellFunctional,
    count: usize,
    opts: &OptimizeOptions,
) -> Result<ScanSummary, OptimizeError> {
    if count == 0 {
        return Err(OptimizeError::Precondition("count must be at least 1".into()));
    }
    let n = f.n_parties();
    let results = (0..count)
        .into_par_iter()
        .map(|i| {
            let state = scan_state(n, opts.seed, i)?;
            let local = OptimizeOptions {
                seed: rng::substream_seed(opts.seed, tags::SCAN_OPTIMIZE, i as u64),
                warm_start: None,
                ..opts.clone()
            };
            let res = optimize(f, &state, &local)?;
            Ok(ScanEntry {
                state_index: i,
                best_value: res.best_value,
                restarts_to_first_violation: res.restarts_to_first_violation,
                converged: res.converged,
            })
        })
        .collect::<Result<Vec<_>, OptimizeError>>()?;
    let violating = results
        .iter()
        .filter(|r| r.best_value > VIOLATION_THRESHOLD)
        .count();
    let values = results.iter().map(|r| r.best_value);
    Ok(ScanSummary {
        n,
        count,
        fraction_violating: violating as f64 / count as f64,
        min_best_value: values.clone().fold(f64::INFINITY, f64::min),
        max_best_value: values.fold(f64::NEG_INFINITY, f64::max),
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge;

    #[test]
    fn see_saw_is_monotone() {
        let f = forge::i_sym(3).unwrap();
        let state = quantum::haar_random_state(3, 4).unwrap();
        let start = random_assignment(3, &mut rng::rng_from_seed(1));
        let trace = see_saw_trace(&f, &state, start, 200, 1e-10).unwrap();
        for w in trace.values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{w:?}");
        }
    }

    #[test]
    fn reported_value_reproduces() {
        let f = forge::i_sym(3).unwrap();
        let state = quantum::haar_random_state(3, 8).unwrap();
        for method in [Method::SeeSaw, Method::DirectSearch] {
            let opts = OptimizeOptions {
                restarts: 4,
                seed: 3,
                method,
                ..Default::default()
            };
            let res = optimize(&f, &state, &opts).unwrap();
            let again = assignment_value(&f, &state, &res.best_assignment);
            assert!((again - res.best_value).abs() < 1e-10);
        }
    }

    #[test]
    fn ghz_warm_start_is_detected() {
        let state = quantum::ghz_state(3, PI / 8.0).unwrap();
        let w = analytic_warm_start(&state).unwrap();
        let f = forge::i_sym(3).unwrap();
        let closed = analytic::ghz_closed_form(3, PI / 8.0).unwrap();
        assert!((assignment_value(&f, &state, &w) - closed).abs() < 1e-10);
        assert!(analytic_warm_start(&quantum::haar_random_state(3, 1).unwrap()).is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = forge::i_sym(3).unwrap();
        let state = quantum::haar_random_state(4, 1).unwrap();
        assert!(matches!(
            optimize(&f, &state, &OptimizeOptions::default()),
            Err(OptimizeError::DimensionMismatch { .. })
        ));
        let s3 = quantum::haar_random_state(3, 1).unwrap();
        let opts = OptimizeOptions {
            restarts: 0,
            ..Default::default()
        };
        assert!(optimize(&f, &s3, &opts).is_err());
        assert!("bogus".parse::<Method>().is_err());
    }
}
