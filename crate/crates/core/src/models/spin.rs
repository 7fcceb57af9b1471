//! Total-spin identities on the full `2^N` space of `N` spins-½.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{MlzError, Result};
use crate::matrix::{
    commutator, frobenius_norm, solve_linear, sym_eigenvalues, RealSymMatrix, DEFAULT_RANK_TOL,
};

#[derive(Clone, Debug, Serialize)]
pub struct SpinIdentityReport {
    pub spins: usize,
    /// `‖[Ŝ², Ŝ⁺]‖_F`.
    pub s2_raise_commutator: f64,
    /// `‖[Σ_{k≠j} ŝ_k·ŝ_j, Ŝ⁺]‖_F`.
    pub pair_sum_raise_commutator: f64,
    /// Best fit of `Σ_{k≠j} ŝ_k·ŝ_j ≈ α·Ŝ² + γ·I` (minimum-norm when `Ŝ² ∝ I`).
    pub alpha: f64,
    pub gamma: f64,
    pub fit_residual: f64,
    /// `‖Σ_{k≠j} ŝ_k·ŝ_j − (Ŝ²/2 − 3N/4)‖_F`.
    pub half_s2_form_residual: f64,
    /// Eigenvalues of the pair sum, ascending and deduplicated to 1e-9.
    pub pair_sum_spectrum: Vec<f64>,
}

struct SpinOps {
    z: Vec<DMatrix<f64>>,
    plus: Vec<DMatrix<f64>>,
    minus: Vec<DMatrix<f64>>,
}

fn spin_ops(n: usize) -> SpinOps {
    let dim = 1usize << n;
    let mut z = Vec::with_capacity(n);
    let mut plus = Vec::with_capacity(n);
    for j in 0..n {
        let mut sz = DMatrix::zeros(dim, dim);
        let mut sp = DMatrix::zeros(dim, dim);
        for s in 0..dim {
            let up = s >> j & 1 == 1;
            sz[(s, s)] = if up { 0.5 } else { -0.5 };
            if !up {
                sp[(s | 1 << j, s)] = 1.0;
            }
        }
        z.push(sz);
        plus.push(sp);
    }
    let minus = plus.iter().map(|m| m.transpose()).collect();
    SpinOps { z, plus, minus }
}

pub fn spin_identity_report(spins: usize) -> Result<SpinIdentityReport> {
    if !(1..=6).contains(&spins) {
        return Err(MlzError::InvalidParameter(format!(
            "need 1 <= N <= 6, got {spins}"
        )));
    }
    let dim = 1usize << spins;
    let ops = spin_ops(spins);
    let identity = DMatrix::<f64>::identity(dim, dim);

    let mut pair_sum = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..spins {
        for j in 0..spins {
            if k != j {
                pair_sum += &ops.z[k] * &ops.z[j]
                    + (&ops.plus[k] * &ops.minus[j] + &ops.minus[k] * &ops.plus[j]) * 0.5;
            }
        }
    }
    let total = |parts: &[DMatrix<f64>]| {
        parts
            .iter()
            .fold(DMatrix::zeros(dim, dim), |acc, m| acc + m)
    };
    let sz = total(&ops.z);
    let sp = total(&ops.plus);
    let sm = total(&ops.minus);
    let s2 = &sz * &sz + (&sp * &sm + &sm * &sp) * 0.5;

    let s2_raise_commutator = frobenius_norm(&commutator(&s2, &sp)?);
    let pair_sum_raise_commutator = frobenius_norm(&commutator(&pair_sum, &sp)?);

    let design = DMatrix::from_columns(&[
        DVector::from_column_slice(s2.as_slice()),
        DVector::from_column_slice(identity.as_slice()),
    ]);
    let fit = solve_linear(
        &design,
        &DVector::from_column_slice(pair_sum.as_slice()),
        DEFAULT_RANK_TOL,
    )?;

    let quarter = 0.75 * spins as f64;
    let half_form = &s2 * 0.5 - &identity * quarter;
    let half_s2_form_residual = frobenius_norm(&(&pair_sum - half_form));

    let sym = RealSymMatrix::new(pair_sum)?;
    let mut pair_sum_spectrum: Vec<f64> = Vec::new();
    for v in sym_eigenvalues(&sym) {
        if pair_sum_spectrum
            .last()
            .is_none_or(|&last| (v - last).abs() > 1e-9)
        {
            pair_sum_spectrum.push(v);
        }
    }

    Ok(SpinIdentityReport {
        spins,
        s2_raise_commutator,
        pair_sum_raise_commutator,
        alpha: fit.particular[0],
        gamma: fit.particular[1],
        fit_residual: fit.residual,
        half_s2_form_residual,
        pair_sum_spectrum,
    })
}
