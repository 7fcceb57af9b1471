//! Time-dependent Schrödinger propagation and transition probabilities.
//!
//! Amplitudes are integrated in the diabatic interaction picture,
//! `ψ_k = a_k·exp(−iθ_k)` with `θ_k = β_k t²/2 + ε_k t`, so that
//! `i·ȧ_a = Σ_b V_ab·exp(i(θ_a − θ_b))·a_b` carries only the off-diagonal
//! couplings. The integrator is the Dormand–Prince 5(4) pair with local
//! extrapolation and absolute per-step error control.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{MlzError, Result};
use crate::matrix::{unitarity_defect, ComplexMatrix};
use crate::models::DiabaticModel;

pub const DEFAULT_RK_TOL: f64 = 1e-11;
pub const DEFAULT_T_LIST: [f64; 5] = [500.0, 707.0, 1000.0, 1414.0, 2000.0];
pub const METHOD: &str = "interaction picture, Dormand-Prince 5(4), absolute local error control";

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `dy/dt = f(t, y)` on a flat complex state.
trait Rhs {
    fn eval(&self, t: f64, y: &[Complex64], out: &mut [Complex64]);
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

impl StepStats {
    fn add(&mut self, other: StepStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn dormand_prince<R: Rhs>(
    rhs: &R,
    y: &mut [Complex64],
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<StepStats> {
    let len = y.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut k: Vec<Vec<Complex64>> = vec![vec![zero; len]; 7];
    let mut stage = vec![zero; len];
    let mut err_vec = vec![zero; len];
    let mut stats = StepStats::default();
    let mut t = t0;
    let mut h = (0.01_f64).min(t1 - t0);
    rhs.eval(t, y, &mut k[0]);

    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(MlzError::StepUnderflow { t, h });
        }
        for s in 1..7 {
            stage.copy_from_slice(y);
            for (j, kj) in k.iter().enumerate().take(s) {
                let c = h * A[s][j];
                if c != 0.0 {
                    for (st, kv) in stage.iter_mut().zip(kj) {
                        *st += kv * c;
                    }
                }
            }
            rhs.eval(t + C[s] * h, &stage, &mut k[s]);
        }
        // stage holds the fifth-order solution and k[6] its derivative.
        err_vec.fill(zero);
        for (j, kj) in k.iter().enumerate() {
            let c = h * E[j];
            if c != 0.0 {
                for (e, kv) in err_vec.iter_mut().zip(kj) {
                    *e += kv * c;
                }
            }
        }
        let err = err_vec
            .iter()
            .fold(0.0_f64, |m, e| m.max(e.norm_sqr()))
            .sqrt();
        if err <= tol {
            t += h;
            y.copy_from_slice(&stage);
            k.swap(0, 6);
            stats.accepted += 1;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            stats.rejected += 1;
            h *= (0.9 * (tol / err).powf(0.2)).clamp(0.2, 1.0);
        }
    }
    Ok(stats)
}

/// Per-edge data `(a, b, V_ab, β_a − β_b, ε_a − ε_b)`.
struct InteractionRhs {
    n: usize,
    edges: Vec<(usize, usize, f64, f64, f64)>,
}

impl InteractionRhs {
    fn new(model: &DiabaticModel) -> Self {
        let eps = model.level_offsets();
        let beta = model.slope();
        let edges = model
            .coupling_edges()
            .into_iter()
            .map(|(a, b, v)| (a, b, v, beta[a] - beta[b], eps[a] - eps[b]))
            .collect();
        Self {
            n: model.n(),
            edges,
        }
    }
}

impl Rhs for InteractionRhs {
    fn eval(&self, t: f64, y: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        out.fill(Complex64::new(0.0, 0.0));
        for &(a, b, v, db, de) in &self.edges {
            let phase = (0.5 * db * t + de) * t;
            let (s, c) = phase.sin_cos();
            // −i·V·e^{iφ} and −i·V·e^{−iφ}
            let wab = Complex64::new(v * s, -v * c);
            let wba = Complex64::new(-v * s, -v * c);
            for col in 0..n {
                let ya = y[a * n + col];
                let yb = y[b * n + col];
                out[a * n + col] += wab * yb;
                out[b * n + col] += wba * ya;
            }
        }
    }
}

struct SchrodingerRhs<'a> {
    model: &'a DiabaticModel,
}

impl Rhs for SchrodingerRhs<'_> {
    fn eval(&self, t: f64, y: &[Complex64], out: &mut [Complex64]) {
        let n = self.model.n();
        let h = self.model.assemble_h(t);
        for r in 0..n {
            for col in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += y[k * n + col] * h[(r, k)];
                }
                out[r * n + col] = -I * acc;
            }
        }
    }
}

fn check_tol(rk_tol: f64) -> Result<()> {
    if !(rk_tol > 0.0) {
        return Err(MlzError::InvalidParameter(format!(
            "rk_tol must be positive, got {rk_tol}"
        )));
    }
    Ok(())
}

fn identity_state(n: usize) -> Vec<Complex64> {
    let mut y = vec![Complex64::new(0.0, 0.0); n * n];
    for k in 0..n {
        y[k * n + k] = Complex64::new(1.0, 0.0);
    }
    y
}

fn state_to_matrix(n: usize, y: &[Complex64]) -> ComplexMatrix {
    DMatrix::from_row_slice(n, n, y)
}

/// Interaction-picture evolution operator from `t0` to `t1 > t0`.
pub fn propagate_segment(
    model: &DiabaticModel,
    t0: f64,
    t1: f64,
    rk_tol: f64,
) -> Result<(ComplexMatrix, StepStats)> {
    check_tol(rk_tol)?;
    if !(t1 > t0) {
        return Err(MlzError::InvalidParameter(format!(
            "segment needs t1 > t0, got [{t0}, {t1}]"
        )));
    }
    let n = model.n();
    let mut y = identity_state(n);
    let rhs = InteractionRhs::new(model);
    let stats = if rhs.edges.is_empty() {
        StepStats::default()
    } else {
        dormand_prince(&rhs, &mut y, t0, t1, rk_tol)?
    };
    Ok((state_to_matrix(n, &y), stats))
}

/// Interaction-picture evolution operator over `[−T, T]`.
pub fn propagate(model: &DiabaticModel, horizon: f64, rk_tol: f64) -> Result<ComplexMatrix> {
    if !(horizon > 0.0) {
        return Err(MlzError::InvalidParameter(format!(
            "T must be positive, got {horizon}"
        )));
    }
    Ok(propagate_segment(model, -horizon, horizon, rk_tol)?.0)
}

/// Schrödinger-picture evolution operator over `[−T, T]`, integrating `H(t)` directly.
pub fn propagate_schrodinger(
    model: &DiabaticModel,
    horizon: f64,
    rk_tol: f64,
) -> Result<ComplexMatrix> {
    check_tol(rk_tol)?;
    if !(horizon > 0.0) {
        return Err(MlzError::InvalidParameter(format!(
            "T must be positive, got {horizon}"
        )));
    }
    let n = model.n();
    let mut y = identity_state(n);
    dormand_prince(&SchrodingerRhs { model }, &mut y, -horizon, horizon, rk_tol)?;
    Ok(state_to_matrix(n, &y))
}

/// Diagonal phases `θ_k(t) = β_k t²/2 + ε_k t`.
pub fn diabatic_phases(model: &DiabaticModel, t: f64) -> Vec<f64> {
    model
        .level_offsets()
        .iter()
        .zip(model.slope())
        .map(|(e, b)| 0.5 * b * t * t + e * t)
        .collect()
}

/// Schrödinger-picture operator `D(t1)·U_I·D(t0)†` with `D = diag(e^{−iθ})`.
pub fn restore_phases(
    model: &DiabaticModel,
    u_interaction: &ComplexMatrix,
    t0: f64,
    t1: f64,
) -> ComplexMatrix {
    let th0 = diabatic_phases(model, t0);
    let th1 = diabatic_phases(model, t1);
    ComplexMatrix::from_fn(model.n(), model.n(), |r, c| {
        u_interaction[(r, c)] * Complex64::from_polar(1.0, th0[c] - th1[r])
    })
}

/// Nonnegative matrix with entry `(j, i)` the probability of ending in `j` from `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl Serialize for TransitionMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Columns index initial states.
    Direct,
    Transposed,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrientationReport {
    pub direct_deviation: f64,
    pub transposed_deviation: f64,
    pub accepted: Orientation,
}

impl TransitionMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(MlzError::DimensionMismatch(format!(
                "transition matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(MlzError::DimensionMismatch(format!(
                "expected {n} rows of length {n}"
            )));
        }
        Ok(Self(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    /// `|U_ji|²`.
    pub fn from_amplitudes(u: &ComplexMatrix) -> Self {
        Self(u.map(|z| z.norm_sqr()))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.0[(to, from)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `|Σ − 1|` over rows and columns.
    pub fn stochasticity_defect(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0_f64;
        for k in 0..n {
            let row: f64 = (0..n).map(|j| self.0[(k, j)]).sum();
            let col: f64 = (0..n).map(|j| self.0[(j, k)]).sum();
            worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
        }
        worst
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        self.0.iter().all(|&v| v >= -tol && v <= 1.0 + tol) && self.stochasticity_defect() < tol
    }

    /// Compares with `reference` as stored and transposed; keeps the closer one.
    pub fn orient_against(&self, reference: &TransitionMatrix) -> OrientationReport {
        let direct_deviation = self.max_abs_diff(reference);
        let transposed_deviation = self.transpose().max_abs_diff(reference);
        let accepted = if transposed_deviation < direct_deviation {
            Orientation::Transposed
        } else {
            Orientation::Direct
        };
        OrientationReport {
            direct_deviation,
            transposed_deviation,
            accepted,
        }
    }

    /// Header `final,from_1,...,from_n`; row `j` holds `P(j | i)` for each `i`.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::from("final");
        for i in 1..=n {
            let _ = write!(out, ",from_{i}");
        }
        out.push('\n');
        for j in 0..n {
            let _ = write!(out, "{}", j + 1);
            for i in 0..n {
                let _ = write!(out, ",{:.17e}", self.0[(j, i)]);
            }
            out.push('\n');
        }
        out
    }
}

fn serialize_complex<S: Serializer>(
    u: &ComplexMatrix,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Parts {
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    }
    let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..u.nrows())
            .map(|r| (0..u.ncols()).map(|c| f(&u[(r, c)])).collect())
            .collect()
    };
    Parts {
        re: rows(|z| z.re),
        im: rows(|z| z.im),
    }
    .serialize(serializer)
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagationResult {
    /// Interaction-picture evolution operator at the largest horizon.
    #[serde(serialize_with = "serialize_complex")]
    pub amplitude: ComplexMatrix,
    /// Mean of `|U_ji(T)|²` over the horizons.
    pub probability: TransitionMatrix,
    pub t_list: Vec<f64>,
    pub per_horizon: Vec<TransitionMatrix>,
    /// Largest entrywise spread of the probabilities across horizons.
    pub dispersion: f64,
    /// Largest `‖U†U − I‖_F` across horizons.
    pub unitarity_defect: f64,
    pub steps: StepStats,
    pub rk_tol: f64,
    pub method: String,
}

fn check_horizons(t_list: &[f64]) -> Result<()> {
    if t_list.len() < 3 {
        return Err(MlzError::InvalidParameter(format!(
            "need at least 3 horizons, got {}",
            t_list.len()
        )));
    }
    if !(t_list[0] > 0.0)
        || t_list.windows(2).any(|w| !(w[1] > w[0]))
        || t_list.iter().any(|t| !t.is_finite())
    {
        return Err(MlzError::InvalidParameter(
            "horizons must be positive, finite and increasing".into(),
        ));
    }
    Ok(())
}

/// Horizon-averaged transition probabilities.
///
/// The evolution over `[−T_k, T_k]` is built from the one over
/// `[−T_{k−1}, T_{k−1}]` by integrating only the two new outer segments.
pub fn transition_matrix(
    model: &DiabaticModel,
    t_list: &[f64],
    rk_tol: f64,
) -> Result<PropagationResult> {
    check_tol(rk_tol)?;
    check_horizons(t_list)?;
    let n = model.n();
    let (mut u, mut steps) = propagate_segment(model, -t_list[0], t_list[0], rk_tol)?;
    let mut per_horizon = vec![TransitionMatrix::from_amplitudes(&u)];
    let mut worst_unitarity = unitarity_defect(&u);
    for w in t_list.windows(2) {
        let (inner, outer) = (w[0], w[1]);
        let (left, s_left) = propagate_segment(model, -outer, -inner, rk_tol)?;
        let (right, s_right) = propagate_segment(model, inner, outer, rk_tol)?;
        steps.add(s_left);
        steps.add(s_right);
        u = right * u * left;
        worst_unitarity = worst_unitarity.max(unitarity_defect(&u));
        per_horizon.push(TransitionMatrix::from_amplitudes(&u));
    }

    let count = per_horizon.len() as f64;
    let mut mean = DMatrix::<f64>::zeros(n, n);
    for p in &per_horizon {
        mean += p.as_matrix();
    }
    mean /= count;
    let mut dispersion = 0.0_f64;
    for j in 0..n {
        for i in 0..n {
            let (lo, hi) = per_horizon
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.get(j, i)), hi.max(p.get(j, i)))
                });
            dispersion = dispersion.max(hi - lo);
        }
    }

    Ok(PropagationResult {
        amplitude: u,
        probability: TransitionMatrix(mean),
        t_list: t_list.to_vec(),
        per_horizon,
        dispersion,
        unitarity_defect: worst_unitarity,
        steps,
        rk_tol,
        method: METHOD.to_string(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TauSweepPoint {
    pub tau0: f64,
    pub result: PropagationResult,
}

/// [`transition_matrix`] with the model's τ replaced by each `τ₀`.
pub fn tau_sweep(
    model: &DiabaticModel,
    tau0_list: &[f64],
    t_list: &[f64],
    rk_tol: f64,
) -> Result<Vec<TauSweepPoint>> {
    if tau0_list.is_empty() || tau0_list[0] <= 0.0 || tau0_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MlzError::InvalidParameter(
            "tau0 values must be positive and increasing".into(),
        ));
    }
    tau0_list
        .iter()
        .map(|&tau0| {
            Ok(TauSweepPoint {
                tau0,
                result: transition_matrix(&model.with_tau(tau0), t_list, rk_tol)?,
            })
        })
        .collect()
}
