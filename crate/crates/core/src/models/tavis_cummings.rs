//! Driven Tavis–Cummings model: `N` spins-½ and one bosonic mode, restricted
//! to a fixed excitation number `M = n_ph + Σ(s_jᶻ + ½)`.
//!
//! Labels are `(n_ph, s_1, …, s_N)` with `s_j ∈ {0 = ↓, 1 = ↑}`, sorted in
//! descending lexicographic order (most photons first).

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::{DiabaticModel, SectorBasis, TtauPartner};
use crate::error::{MlzError, Result};
use crate::matrix::RealSymMatrix;

pub(crate) struct TcOperators {
    pub slope: Vec<f64>,
    pub tau_slope: Vec<f64>,
    pub b11: Vec<f64>,
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

fn sz(label: &[u32], j: usize) -> f64 {
    label[1 + j] as f64 - 0.5
}

/// Builds every operator of the family on an arbitrary list of labels.
/// Matrix elements that leave the list (photon truncation) are dropped.
pub(crate) fn tc_operators_on(eps: &[f64], g: f64, labels: &[Vec<u32>]) -> TcOperators {
    let dim = labels.len();
    let spins = eps.len();
    let index: HashMap<&[u32], usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_slice(), i))
        .collect();

    let slope = labels.iter().map(|l| -(l[0] as f64)).collect();
    let tau_slope = labels
        .iter()
        .map(|l| (0..spins).map(|j| eps[j] * sz(l, j)).sum())
        .collect();
    let b11 = labels
        .iter()
        .map(|l| (0..spins).map(|j| eps[j] * eps[j] * sz(l, j)).sum())
        .collect();

    let mut a0 = DMatrix::zeros(dim, dim);
    let mut a1 = DMatrix::zeros(dim, dim);
    let mut c = DMatrix::zeros(dim, dim);

    for (src, label) in labels.iter().enumerate() {
        for j in 0..spins {
            // ψ†s_j⁻ and its conjugate ψs_j⁺.
            let mut target = label.clone();
            if label[1 + j] == 1 {
                target[1 + j] = 0;
                target[0] += 1;
                if let Some(&dst) = index.get(target.as_slice()) {
                    let amp = g * (target[0] as f64).sqrt();
                    a0[(dst, src)] += amp;
                    a1[(dst, src)] += eps[j] * amp;
                }
            } else if label[0] > 0 {
                target[1 + j] = 1;
                target[0] -= 1;
                if let Some(&dst) = index.get(target.as_slice()) {
                    let amp = g * (label[0] as f64).sqrt();
                    a0[(dst, src)] += amp;
                    a1[(dst, src)] += eps[j] * amp;
                }
            }
        }

        // g² Σ_{k≠j} ŝ_k·ŝ_j over ordered pairs.
        for k in 0..spins {
            for j in 0..spins {
                if k == j {
                    continue;
                }
                c[(src, src)] += g * g * sz(label, k) * sz(label, j);
                if label[1 + k] != label[1 + j] {
                    // ½(s_k⁺s_j⁻ + s_k⁻s_j⁺) swaps the two spins.
                    let mut target = label.clone();
                    target.swap(1 + k, 1 + j);
                    if let Some(&dst) = index.get(target.as_slice()) {
                        c[(dst, src)] += 0.5 * g * g;
                    }
                }
            }
        }
    }

    TcOperators {
        slope,
        tau_slope,
        b11,
        a0,
        a1,
        c,
    }
}

pub(crate) fn tc_sector_labels(spins: usize, excitations: u32) -> Vec<Vec<u32>> {
    let mut labels = Vec::new();
    for mask in 0u32..(1u32 << spins) {
        let up = mask.count_ones();
        if up > excitations {
            continue;
        }
        let mut label = Vec::with_capacity(spins + 1);
        label.push(excitations - up);
        label.extend((0..spins).map(|j| (mask >> (spins - 1 - j)) & 1));
        labels.push(label);
    }
    labels.sort_by(|a, b| b.cmp(a));
    labels
}

/// Builds the sector with `excitations` quanta shared between photon and spins.
pub fn build_tavis_cummings(
    eps: &[f64],
    g: f64,
    excitations: u32,
    tau: f64,
) -> Result<(DiabaticModel, TtauPartner, SectorBasis)> {
    if eps.is_empty() {
        return Err(MlzError::EmptySector("need at least one spin".into()));
    }
    if eps.len() > 16 {
        return Err(MlzError::InvalidParameter(format!(
            "{} spins is too many for a dense sector",
            eps.len()
        )));
    }
    if !(tau > 0.0) {
        return Err(MlzError::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let labels = tc_sector_labels(eps.len(), excitations);
    if labels.is_empty() {
        return Err(MlzError::EmptySector(format!(
            "no states with M = {excitations}"
        )));
    }
    let ops = tc_operators_on(eps, g, &labels);
    let model = DiabaticModel::new(ops.slope, ops.tau_slope, RealSymMatrix::new(ops.a0)?, tau)?;
    let partner = TtauPartner::new(
        ops.b11,
        RealSymMatrix::new(ops.a1)?,
        RealSymMatrix::new(ops.c)?,
    )?;
    Ok((
        model,
        partner,
        SectorBasis {
            labels,
            conserved: excitations,
        },
    ))
}
