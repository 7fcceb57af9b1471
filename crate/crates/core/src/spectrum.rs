//! Adiabatic eigenvalue flows, diabatic crossing events and exact crossings.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{MlzError, Result};
use crate::matrix::sym_eigenvalues;
use crate::models::DiabaticModel;
use crate::optimize::golden_section_min;

pub const DEFAULT_WINDOW: (f64, f64) = (-6.0, 6.0);
pub const DEFAULT_SAMPLES: usize = 2001;
/// Exactness threshold relative to the largest `|λ|` on the window.
pub const DEFAULT_EXACT_REL: f64 = 1e-8;
/// Third-level coincidence window relative to the spectral scale.
pub const ISOLATION_REL: f64 = 1e-9;
pub const REFINE_XTOL: f64 = 1e-12;

/// Sorted eigenvalues of `H(t)` on a uniform grid.
#[derive(Clone, Debug, Serialize)]
pub struct EigenFlow {
    pub times: Vec<f64>,
    /// `curves[i][k]` is the `i`-th smallest eigenvalue at `times[k]`.
    pub curves: Vec<Vec<f64>>,
}

impl EigenFlow {
    /// Header `t,lambda_1,...,lambda_n` then one row per time.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.curves.len() {
            let _ = write!(out, ",lambda_{i}");
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t:.17e}");
            for curve in &self.curves {
                let _ = write!(out, ",{:.17e}", curve[k]);
            }
            out.push('\n');
        }
        out
    }

    /// Smallest gap between adjacent curves over the grid, with its time.
    pub fn min_gap(&self) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for k in 0..self.times.len() {
            for i in 1..self.curves.len() {
                let gap = self.curves[i][k] - self.curves[i - 1][k];
                if best.is_none_or(|(g, _)| gap < g) {
                    best = Some((gap, self.times[k]));
                }
            }
        }
        best
    }
}

pub fn eigenflow(
    model: &DiabaticModel,
    t_min: f64,
    t_max: f64,
    samples: usize,
) -> Result<EigenFlow> {
    if samples < 2 {
        return Err(MlzError::InvalidParameter(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    if !(t_min < t_max) || !t_min.is_finite() || !t_max.is_finite() {
        return Err(MlzError::InvalidParameter(format!(
            "bad window [{t_min}, {t_max}]"
        )));
    }
    let times: Vec<f64> = (0..samples)
        .map(|k| t_min + (t_max - t_min) * k as f64 / (samples - 1) as f64)
        .collect();
    let mut curves = vec![Vec::with_capacity(samples); model.n()];
    for &t in &times {
        for (i, v) in sym_eigenvalues(&model.assemble_h(t))
            .into_iter()
            .enumerate()
        {
            curves[i].push(v);
        }
    }
    Ok(EigenFlow { times, curves })
}

/// Crossing of two diabatic levels with different slopes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossingEvent {
    pub a: usize,
    pub b: usize,
    pub time: f64,
    pub energy: f64,
    pub coupling: f64,
    /// `exp(−2πg²/|β_a − β_b|)`.
    pub lz_p: f64,
    /// No third level within the isolation window at `time`.
    pub isolated: bool,
}

pub fn lz_probability(g: f64, slope_difference: f64) -> f64 {
    (-2.0 * PI * g * g / slope_difference.abs()).exp()
}

fn spectral_scale(model: &DiabaticModel) -> f64 {
    model
        .level_offsets()
        .iter()
        .chain(model.slope())
        .fold(1.0_f64, |m, v| m.max(v.abs()))
}

/// Every pairwise diabatic crossing, sorted by time then `(a, b)`.
pub fn diabatic_crossings(model: &DiabaticModel) -> Vec<CrossingEvent> {
    let n = model.n();
    let beta = model.slope();
    let eps = model.level_offsets();
    let window = ISOLATION_REL * spectral_scale(model);
    let mut events = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let db = beta[a] - beta[b];
            if db == 0.0 {
                continue;
            }
            let time = -(eps[a] - eps[b]) / db;
            let energy = beta[a] * time + eps[a];
            let isolated = (0..n)
                .filter(|&c| c != a && c != b)
                .all(|c| (beta[c] * time + eps[c] - energy).abs() >= window);
            let coupling = model.coupling()[(a, b)];
            events.push(CrossingEvent {
                a,
                b,
                time,
                energy,
                coupling,
                lz_p: lz_probability(coupling, db),
                isolated,
            });
        }
    }
    events.sort_by(|x, y| x.time.total_cmp(&y.time).then((x.a, x.b).cmp(&(y.a, y.b))));
    events
}

/// Refined local minimum of the gap between adjacent eigenvalues `lower` and `lower + 1`.
#[derive(Clone, Debug, Serialize)]
pub struct GapMinimum {
    pub time: f64,
    pub lower: usize,
    pub upper: usize,
    pub gap: f64,
    /// Best gap after each golden-section iteration.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactCrossing {
    pub time: f64,
    pub lower: usize,
    pub upper: usize,
    pub gap: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ExactCrossingOptions {
    pub window: (f64, f64),
    pub samples: usize,
    /// Absolute gap threshold; `None` means `1e-8 · max|λ|` on the window.
    pub threshold: Option<f64>,
}

impl Default for ExactCrossingOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            samples: DEFAULT_SAMPLES,
            threshold: None,
        }
    }
}

fn gap_at(model: &DiabaticModel, lower: usize, t: f64) -> f64 {
    let v = sym_eigenvalues(&model.assemble_h(t));
    v[lower + 1] - v[lower]
}

/// Every interior grid minimum of each adjacent gap, refined, plus the
/// threshold used to classify them.
pub fn gap_minima(
    model: &DiabaticModel,
    options: &ExactCrossingOptions,
) -> Result<(Vec<GapMinimum>, f64)> {
    let flow = eigenflow(model, options.window.0, options.window.1, options.samples)?;
    let largest = flow
        .curves
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let threshold = options.threshold.unwrap_or(DEFAULT_EXACT_REL * largest);
    let mut minima = Vec::new();
    for lower in 0..model.n().saturating_sub(1) {
        let gaps: Vec<f64> = (0..flow.times.len())
            .map(|k| flow.curves[lower + 1][k] - flow.curves[lower][k])
            .collect();
        for k in 1..gaps.len() - 1 {
            if !(gaps[k] < gaps[k - 1] && gaps[k] <= gaps[k + 1]) {
                continue;
            }
            let r = golden_section_min(
                |t| gap_at(model, lower, t),
                flow.times[k - 1],
                flow.times[k + 1],
                REFINE_XTOL,
            );
            minima.push(GapMinimum {
                time: r.x,
                lower,
                upper: lower + 1,
                gap: r.value,
                trace: r.trace,
            });
        }
    }
    minima.sort_by(|x, y| x.time.total_cmp(&y.time).then(x.lower.cmp(&y.lower)));
    Ok((minima, threshold))
}

pub fn find_exact_crossings(
    model: &DiabaticModel,
    options: &ExactCrossingOptions,
) -> Result<Vec<ExactCrossing>> {
    let (minima, threshold) = gap_minima(model, options)?;
    Ok(minima
        .into_iter()
        .filter(|m| m.gap < threshold)
        .map(|m| ExactCrossing {
            time: m.time,
            lower: m.lower,
            upper: m.upper,
            gap: m.gap,
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossingPairing {
    pub a: usize,
    pub b: usize,
    pub diabatic_time: f64,
    /// Closest exact crossing, if any were found.
    pub exact_time: Option<f64>,
    pub offset: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossingCountReport {
    /// Largest `|g|` among the couplings.
    pub coupling_scale: f64,
    /// Isolated crossings of directly uncoupled levels.
    pub predicted: Vec<CrossingEvent>,
    pub found: Vec<ExactCrossing>,
    pub predicted_count: usize,
    pub found_count: usize,
    pub matches: bool,
    pub pairings: Vec<CrossingPairing>,
    /// Largest `|offset| / (1 + |t*|)` over the pairings.
    pub max_relative_offset: Option<f64>,
}

pub fn crossing_count_check(
    model: &DiabaticModel,
    options: &ExactCrossingOptions,
) -> Result<CrossingCountReport> {
    let predicted: Vec<CrossingEvent> = diabatic_crossings(model)
        .into_iter()
        .filter(|e| e.isolated && e.coupling == 0.0)
        .collect();
    let found = find_exact_crossings(model, options)?;
    let pairings: Vec<CrossingPairing> = predicted
        .iter()
        .map(|e| {
            let nearest = found
                .iter()
                .map(|x| x.time)
                .min_by(|x, y| (x - e.time).abs().total_cmp(&(y - e.time).abs()));
            CrossingPairing {
                a: e.a,
                b: e.b,
                diabatic_time: e.time,
                exact_time: nearest,
                offset: nearest.map(|t| t - e.time),
            }
        })
        .collect();
    let max_relative_offset = pairings
        .iter()
        .map(|p| p.offset.map(|o| o.abs() / (1.0 + p.diabatic_time.abs())))
        .try_fold(0.0_f64, |m, o| o.map(|o| m.max(o)));
    let max_relative_offset = if pairings.is_empty() {
        None
    } else {
        max_relative_offset
    };
    let coupling_scale = model
        .coupling_edges()
        .iter()
        .fold(0.0_f64, |m, e| m.max(e.2.abs()));
    Ok(CrossingCountReport {
        coupling_scale,
        predicted_count: predicted.len(),
        found_count: found.len(),
        matches: predicted.len() == found.len(),
        predicted,
        found,
        pairings,
        max_relative_offset,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingSweepPoint {
    pub factor: f64,
    pub report: CrossingCountReport,
}

/// [`crossing_count_check`] with all off-diagonal couplings scaled by each factor.
pub fn coupling_scale_sweep(
    model: &DiabaticModel,
    factors: &[f64],
    options: &ExactCrossingOptions,
) -> Result<Vec<CouplingSweepPoint>> {
    factors
        .iter()
        .map(|&factor| {
            Ok(CouplingSweepPoint {
                factor,
                report: crossing_count_check(&model.with_scaled_couplings(factor), options)?,
            })
        })
        .collect()
}
