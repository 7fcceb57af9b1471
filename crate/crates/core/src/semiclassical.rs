//! Chronological product of pairwise Landau–Zener blocks.
//!
//! Each coupled crossing `(a, b)` contributes the doubly stochastic block
//! `[[p, q], [q, p]]` on rows and columns `{a, b}`; the prediction is the
//! product with the earliest event applied first. The product is exact at
//! probability level only when every `(i, j)` is joined by at most one path.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{MlzError, Result};
use crate::models::DiabaticModel;
use crate::propagator::{transition_matrix, PropagationResult, TransitionMatrix};
use crate::spectrum::{diabatic_crossings, CrossingEvent};

/// Times closer than this (relative) count as simultaneous.
pub const SIMULTANEITY_REL: f64 = 1e-12;

pub const APPROXIMATION_TAG: &str = "non-interference approximation";

#[derive(Clone, Debug, Serialize)]
pub struct DiagramEvent {
    pub event: CrossingEvent,
    pub coupled: bool,
    pub p: f64,
    pub q: f64,
}

impl DiagramEvent {
    /// Identity except `[[p, q], [q, p]]` on `{a, b}` for coupled events.
    pub fn block(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::identity(n, n);
        if self.coupled {
            let (a, b) = (self.event.a, self.event.b);
            m[(a, a)] = self.p;
            m[(b, b)] = self.p;
            m[(a, b)] = self.q;
            m[(b, a)] = self.q;
        }
        m
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossingDiagram {
    pub n: usize,
    /// Chronological; ties ordered by `(a, b)`.
    pub events: Vec<DiagramEvent>,
}

fn simultaneous(x: f64, y: f64) -> bool {
    (x - y).abs() <= SIMULTANEITY_REL * x.abs().max(y.abs()).max(1.0)
}

pub fn build_diagram(model: &DiabaticModel) -> Result<CrossingDiagram> {
    let events: Vec<DiagramEvent> = diabatic_crossings(model)
        .into_iter()
        .map(|event| {
            let coupled = event.coupling != 0.0;
            let p = event.lz_p;
            DiagramEvent {
                event,
                coupled,
                p,
                q: 1.0 - p,
            }
        })
        .collect();

    for (i, x) in events.iter().enumerate() {
        for y in &events[i + 1..] {
            if !simultaneous(x.event.time, y.event.time) {
                break;
            }
            let shares = [x.event.a, x.event.b]
                .iter()
                .any(|l| *l == y.event.a || *l == y.event.b);
            if x.coupled && y.coupled && shares {
                return Err(MlzError::Degenerate(format!(
                    "coupled crossings ({}, {}) and ({}, {}) coincide at t = {}",
                    x.event.a, x.event.b, y.event.a, y.event.b, x.event.time
                )));
            }
        }
    }
    Ok(CrossingDiagram {
        n: model.n(),
        events,
    })
}

impl CrossingDiagram {
    /// `B_last ··· B_first`.
    pub fn product(&self) -> DMatrix<f64> {
        self.events
            .iter()
            .fold(DMatrix::identity(self.n, self.n), |acc, e| {
                e.block(self.n) * acc
            })
    }

    /// Number of distinct branch sequences from each initial to each final level.
    pub fn path_counts(&self) -> Vec<Vec<u64>> {
        let n = self.n;
        let mut counts: Vec<Vec<u64>> = (0..n)
            .map(|j| (0..n).map(|i| u64::from(i == j)).collect())
            .collect();
        for e in self.events.iter().filter(|e| e.coupled) {
            let (a, b) = (e.event.a, e.event.b);
            for i in 0..n {
                let merged = counts[a][i].saturating_add(counts[b][i]);
                counts[a][i] = merged;
                counts[b][i] = merged;
            }
        }
        counts
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PathReport {
    /// `path_count[j][i]`: paths from initial `i` to final `j`.
    pub path_count: Vec<Vec<u64>>,
    pub interference: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Prediction {
    pub probability: TransitionMatrix,
    pub paths: PathReport,
    /// Present when interference makes the product approximate.
    pub tag: Option<String>,
}

pub fn predict_probabilities(model: &DiabaticModel) -> Result<Prediction> {
    let diagram = build_diagram(model)?;
    let path_count = diagram.path_counts();
    let interference = path_count.iter().flatten().any(|&c| c >= 2);
    Ok(Prediction {
        probability: TransitionMatrix::new(diagram.product())?,
        paths: PathReport {
            path_count,
            interference,
        },
        tag: interference.then(|| APPROXIMATION_TAG.to_string()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub max_deviation: f64,
    pub predicted: Prediction,
    pub numeric: PropagationResult,
}

pub fn compare_with_numerics(
    model: &DiabaticModel,
    t_list: &[f64],
    rk_tol: f64,
) -> Result<ComparisonReport> {
    let predicted = predict_probabilities(model)?;
    let numeric = transition_matrix(model, t_list, rk_tol)?;
    Ok(ComparisonReport {
        max_deviation: predicted.probability.max_abs_diff(&numeric.probability),
        predicted,
        numeric,
    })
}
