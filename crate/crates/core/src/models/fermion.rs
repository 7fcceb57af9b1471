//! Interacting fermions: one mode `d` hopping to `N − 1` modes `c_k`, with a
//! density interaction of strength `x`, at fixed particle number.
//!
//! Modes are ordered `d < c_1 < … < c_{N−1}` for Jordan–Wigner signs. Labels
//! are occupation tuples `(n_d, n_1, …)` sorted in descending lexicographic
//! order, so the single-particle sector lists `d` first.

use nalgebra::DMatrix;

use super::{DiabaticModel, FamilyOperator, SectorBasis, TtauPartner};
use crate::error::{MlzError, Result};
use crate::matrix::{frobenius_norm, RealSymMatrix};

/// Fermion model together with its commuting generators.
#[derive(Clone, Debug)]
pub struct FermionModel {
    pub model: DiabaticModel,
    /// `H′_F = Σ_j e_j H_j(τe)` in t/τ form.
    pub partner: TtauPartner,
    /// `H_j(τe)` for `j = 1..N−1`.
    pub generators: Vec<FamilyOperator>,
    pub basis: SectorBasis,
    pub x: f64,
}

impl FermionModel {
    /// `‖Σ_j H_j(τe) + [1 + x(N_F − 1)]·H_F(t, τ) − t·N_F·I‖_F`.
    pub fn generator_sum_defect(&self, t: f64, tau: f64) -> Result<f64> {
        let nf = self.basis.conserved as f64;
        let mut acc = self.model.assemble_h_at(t, tau).into_inner() * (1.0 + self.x * (nf - 1.0));
        for h in &self.generators {
            acc += h.assemble(t, tau)?.as_matrix();
        }
        for k in 0..acc.nrows() {
            acc[(k, k)] -= t * nf;
        }
        Ok(frobenius_norm(&acc))
    }
}

pub(crate) struct FermionOperators {
    pub slope: Vec<f64>,
    pub tau_slope: Vec<f64>,
    pub a0: DMatrix<f64>,
    pub generators: Vec<FamilyOperator>,
}

fn occupied(state: u32, mode: usize) -> bool {
    state >> mode & 1 == 1
}

fn parity_below(state: u32, mode: usize) -> f64 {
    let below = state & ((1u32 << mode) - 1);
    if below.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `c_a† c_b |state⟩` as `(sign, new_state)`.
fn hop(state: u32, a: usize, b: usize) -> Option<(f64, u32)> {
    if !occupied(state, b) {
        return None;
    }
    let sign_b = parity_below(state, b);
    let mid = state & !(1u32 << b);
    if occupied(mid, a) {
        return None;
    }
    let sign_a = parity_below(mid, a);
    Some((sign_a * sign_b, mid | (1u32 << a)))
}

fn to_state(label: &[u32]) -> u32 {
    label.iter().enumerate().fold(0, |s, (m, &n)| s | (n << m))
}

fn to_label(state: u32, modes: usize) -> Vec<u32> {
    (0..modes).map(|m| state >> m & 1).collect()
}

/// Builds `H_F` and all `H_j(τe)` on an arbitrary list of labels.
pub(crate) fn fermion_operators_on(
    e: &[f64],
    g: &[f64],
    x: f64,
    labels: &[Vec<u32>],
) -> FermionOperators {
    let dim = labels.len();
    let channels = e.len();
    let states: Vec<u32> = labels.iter().map(|l| to_state(l)).collect();
    let index = |s: u32| states.iter().position(|&t| t == s);
    let n = |i: usize, mode: usize| if occupied(states[i], mode) { 1.0 } else { 0.0 };

    // Σ over basis of coef·c_a†c_b, written as target-row/source-column entries.
    let hop_matrix = |a: usize, b: usize| {
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for (src, &s) in states.iter().enumerate() {
            if let Some((sign, t)) = hop(s, a, b) {
                if let Some(dst) = index(t) {
                    m[(dst, src)] += sign;
                }
            }
        }
        m
    };
    // d†c_k + c_k†d, with c_k stored as mode k (d is mode 0).
    let exchange: Vec<DMatrix<f64>> = (1..=channels)
        .map(|k| hop_matrix(0, k) + hop_matrix(k, 0))
        .collect();

    let slope: Vec<f64> = (0..dim).map(|i| n(i, 0)).collect();
    let tau_slope: Vec<f64> = (0..dim)
        .map(|i| {
            (0..channels)
                .map(|k| e[k] * (1.0 - x * n(i, 0)) * n(i, k + 1))
                .sum()
        })
        .collect();
    let mut a0 = DMatrix::zeros(dim, dim);
    for k in 0..channels {
        a0 += &exchange[k] * g[k];
    }

    let mut generators = Vec::with_capacity(channels);
    for j in 0..channels {
        let mj = j + 1;
        let t_coeff: Vec<f64> = (0..dim).map(|i| n(i, mj) * (1.0 - x * n(i, 0))).collect();
        let tau_coeff: Vec<f64> = (0..dim)
            .map(|i| {
                let all: f64 = (0..channels).map(|k| e[k] * n(i, k + 1)).sum();
                let others: f64 = (0..channels)
                    .filter(|&k| k != j)
                    .map(|k| e[k] * n(i, k + 1))
                    .sum();
                -e[j] * n(i, mj) + x * x * n(i, 0) * n(i, mj) * all - x * n(i, mj) * others
            })
            .collect();

        let mut constant = &exchange[j] * (-g[j]);
        let mut dressed = DMatrix::<f64>::zeros(dim, dim);
        for k in (0..channels).filter(|&k| k != j) {
            dressed += &exchange[k] * g[k];
        }
        // Left-multiply by n_j (hops of other channels leave n_j unchanged).
        for r in 0..dim {
            let nj = n(r, mj);
            for c in 0..dim {
                constant[(r, c)] -= x * nj * dressed[(r, c)];
            }
        }

        let mut inv_tau = DMatrix::<f64>::zeros(dim, dim);
        for k in (0..channels).filter(|&k| k != j) {
            let mk = k + 1;
            let w = -1.0 / (e[j] - e[k]);
            inv_tau += (hop_matrix(mj, mk) + hop_matrix(mk, mj)) * (w * g[k] * g[j]);
            for i in 0..dim {
                inv_tau[(i, i)] -= w * (g[j] * g[j] * n(i, mk) + g[k] * g[k] * n(i, mj));
            }
        }

        generators.push(FamilyOperator {
            t_coeff,
            tau_coeff,
            constant: RealSymMatrix::new(constant).expect("hopping terms are symmetric"),
            inv_tau: RealSymMatrix::new(inv_tau).expect("hopping terms are symmetric"),
        });
    }

    FermionOperators {
        slope,
        tau_slope,
        a0,
        generators,
    }
}

pub(crate) fn fermion_sector_labels(modes: usize, particles: u32) -> Vec<Vec<u32>> {
    let mut labels: Vec<Vec<u32>> = (0u32..(1u32 << modes))
        .filter(|s| s.count_ones() == particles)
        .map(|s| to_label(s, modes))
        .collect();
    labels.sort_by(|a, b| b.cmp(a));
    labels
}

/// Builds the `N_F`-particle sector for `N = e.len() + 1` modes.
pub fn build_fermion(
    e: &[f64],
    g: &[f64],
    x: f64,
    particles: u32,
    tau: f64,
) -> Result<FermionModel> {
    if e.is_empty() || e.len() != g.len() {
        return Err(MlzError::InvalidParameter(format!(
            "need matching nonempty e and g, got {} and {}",
            e.len(),
            g.len()
        )));
    }
    let modes = e.len() + 1;
    if modes > 20 {
        return Err(MlzError::InvalidParameter(format!(
            "{modes} modes is too many for a dense sector"
        )));
    }
    for (i, a) in e.iter().enumerate() {
        if e[i + 1..].contains(a) {
            return Err(MlzError::InvalidParameter(format!(
                "e_k must be distinct, {a} repeats"
            )));
        }
    }
    if !(tau > 0.0) {
        return Err(MlzError::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )));
    }
    if particles == 0 || particles as usize > modes {
        return Err(MlzError::EmptySector(format!(
            "need 1 <= N_F <= {modes}, got {particles}"
        )));
    }
    let labels = fermion_sector_labels(modes, particles);
    let ops = fermion_operators_on(e, g, x, &labels);
    let dim = labels.len();

    let mut b11 = vec![0.0; dim];
    let mut a1 = DMatrix::<f64>::zeros(dim, dim);
    let mut c = DMatrix::<f64>::zeros(dim, dim);
    for (j, h) in ops.generators.iter().enumerate() {
        for i in 0..dim {
            b11[i] += e[j] * h.tau_coeff[i];
        }
        a1 += h.constant.as_matrix() * e[j];
        c += h.inv_tau.as_matrix() * e[j];
    }

    let model = DiabaticModel::new(ops.slope, ops.tau_slope, RealSymMatrix::new(ops.a0)?, tau)?;
    let partner = TtauPartner::new(b11, RealSymMatrix::new(a1)?, RealSymMatrix::new(c)?)?;
    Ok(FermionModel {
        model,
        partner,
        generators: ops.generators,
        basis: SectorBasis {
            labels,
            conserved: particles,
        },
        x,
    })
}
