//! Model data for the t/τ family and builders for the model catalog.
//!
//! A model is `H(t, τ) = diag(slope)·t + diag(tau_slope)·τ + coupling` in
//! the diabatic basis. A partner is
//! `H′(t, τ) = diag(b11)·τ + diag(tau_slope)·t + a1 + c/τ`; its t-coefficient
//! is shared with the model, so `∂τH = ∂tH′` holds by construction.

mod catalog;
mod fermion;
mod spin;
mod tavis_cummings;

pub use catalog::{build_bowtie, build_demkov_osherov, build_h5, build_h6, build_lz2, h5_ansatz};
pub use fermion::{build_fermion, FermionModel};
pub use spin::{spin_identity_report, SpinIdentityReport};
pub use tavis_cummings::build_tavis_cummings;

use serde::{Deserialize, Serialize};

use crate::error::{MlzError, Result};
use crate::matrix::RealSymMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct DiabaticModel {
    slope: Vec<f64>,
    tau_slope: Vec<f64>,
    coupling: RealSymMatrix,
    tau: f64,
}

impl DiabaticModel {
    pub fn new(
        slope: Vec<f64>,
        tau_slope: Vec<f64>,
        coupling: RealSymMatrix,
        tau: f64,
    ) -> Result<Self> {
        let n = slope.len();
        if n == 0 {
            return Err(MlzError::InvalidParameter(
                "model needs at least one state".into(),
            ));
        }
        if tau_slope.len() != n || coupling.dim() != n {
            return Err(MlzError::DimensionMismatch(format!(
                "slope has {n} entries, tau_slope {}, coupling is {}x{}",
                tau_slope.len(),
                coupling.dim(),
                coupling.dim()
            )));
        }
        if slope
            .iter()
            .chain(&tau_slope)
            .chain(coupling.iter())
            .any(|v| !v.is_finite())
        {
            return Err(MlzError::InvalidParameter(
                "model entries must be finite".into(),
            ));
        }
        if !tau.is_finite() {
            return Err(MlzError::InvalidParameter(format!(
                "tau must be finite, got {tau}"
            )));
        }
        Ok(Self {
            slope,
            tau_slope,
            coupling,
            tau,
        })
    }

    pub fn n(&self) -> usize {
        self.slope.len()
    }

    /// Diagonal of B₀₀.
    pub fn slope(&self) -> &[f64] {
        &self.slope
    }

    /// Diagonal of B₀₁.
    pub fn tau_slope(&self) -> &[f64] {
        &self.tau_slope
    }

    /// A₀, including constant level offsets on its diagonal.
    pub fn coupling(&self) -> &RealSymMatrix {
        &self.coupling
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self {
            tau,
            ..self.clone()
        }
    }

    pub fn with_coupling(&self, coupling: RealSymMatrix) -> Result<Self> {
        Self::new(
            self.slope.clone(),
            self.tau_slope.clone(),
            coupling,
            self.tau,
        )
    }

    /// Off-diagonal couplings scaled by `factor`; the diagonal is untouched.
    pub fn with_scaled_couplings(&self, factor: f64) -> Self {
        let mut c = self.coupling.clone();
        for a in 0..self.n() {
            for b in (a + 1)..self.n() {
                c.set_sym(a, b, factor * self.coupling[(a, b)]);
            }
        }
        Self {
            coupling: c,
            ..self.clone()
        }
    }

    /// `ε_k = tau_slope_k·τ + A₀ᵏᵏ`, the time-independent part of each level.
    pub fn level_offsets(&self) -> Vec<f64> {
        self.level_offsets_at(self.tau)
    }

    pub fn level_offsets_at(&self, tau: f64) -> Vec<f64> {
        (0..self.n())
            .map(|k| self.tau_slope[k] * tau + self.coupling[(k, k)])
            .collect()
    }

    /// Diabatic energy of level `k` at time `t`.
    pub fn diabatic_energy(&self, k: usize, t: f64) -> f64 {
        self.slope[k] * t + self.tau_slope[k] * self.tau + self.coupling[(k, k)]
    }

    /// Nonzero off-diagonal couplings as `(a, b, g)` with `a < b`.
    pub fn coupling_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut edges = Vec::new();
        for a in 0..self.n() {
            for b in (a + 1)..self.n() {
                let g = self.coupling[(a, b)];
                if g != 0.0 {
                    edges.push((a, b, g));
                }
            }
        }
        edges
    }

    pub fn has_diagonal_offsets(&self) -> bool {
        (0..self.n()).any(|k| self.coupling[(k, k)] != 0.0)
    }

    pub fn assemble_h(&self, t: f64) -> RealSymMatrix {
        self.assemble_h_at(t, self.tau)
    }

    pub fn assemble_h_at(&self, t: f64, tau: f64) -> RealSymMatrix {
        let mut h = self.coupling.clone();
        for k in 0..self.n() {
            h.add_sym(k, k, self.slope[k] * t + self.tau_slope[k] * tau);
        }
        h
    }

    /// Block-diagonal combination of independent models (τ taken from the first).
    pub fn direct_sum(parts: &[DiabaticModel]) -> Result<Self> {
        let n: usize = parts.iter().map(DiabaticModel::n).sum();
        let mut slope = Vec::with_capacity(n);
        let mut tau_slope = Vec::with_capacity(n);
        let mut coupling = RealSymMatrix::zeros(n);
        let mut offset = 0;
        for p in parts {
            slope.extend_from_slice(&p.slope);
            tau_slope.extend_from_slice(&p.tau_slope);
            for a in 0..p.n() {
                for b in a..p.n() {
                    coupling.set_sym(offset + a, offset + b, p.coupling[(a, b)]);
                }
            }
            offset += p.n();
        }
        let tau = parts.first().map_or(1.0, |p| p.tau);
        Self::new(slope, tau_slope, coupling, tau)
    }
}

/// `H = diag(slope·t + tau_slope·τ) + coupling` at the model's τ.
pub fn assemble_h(model: &DiabaticModel, t: f64) -> RealSymMatrix {
    model.assemble_h(t)
}

/// Commuting-partner data `(B₁₁, A₁, C)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtauPartner {
    pub b11: Vec<f64>,
    pub a1: RealSymMatrix,
    pub c: RealSymMatrix,
}

impl TtauPartner {
    pub fn new(b11: Vec<f64>, a1: RealSymMatrix, c: RealSymMatrix) -> Result<Self> {
        let n = b11.len();
        if a1.dim() != n || c.dim() != n {
            return Err(MlzError::DimensionMismatch(format!(
                "partner b11 has {n} entries, a1 is {0}x{0}, c is {1}x{1}",
                a1.dim(),
                c.dim()
            )));
        }
        Ok(Self { b11, a1, c })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            b11: vec![0.0; n],
            a1: RealSymMatrix::zeros(n),
            c: RealSymMatrix::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.b11.len()
    }

    fn check_against(&self, model: &DiabaticModel) -> Result<()> {
        if self.n() != model.n() {
            return Err(MlzError::DimensionMismatch(format!(
                "model has {} states, partner {}",
                model.n(),
                self.n()
            )));
        }
        Ok(())
    }

    pub fn assemble(&self, model: &DiabaticModel, t: f64) -> Result<RealSymMatrix> {
        self.assemble_at(model, t, model.tau())
    }

    pub fn assemble_at(&self, model: &DiabaticModel, t: f64, tau: f64) -> Result<RealSymMatrix> {
        self.check_against(model)?;
        if tau == 0.0 {
            return Err(MlzError::InvalidParameter("H′ has a pole at τ = 0".into()));
        }
        let mut h = self.a1.plus(&self.c.scaled(1.0 / tau));
        for k in 0..self.n() {
            h.add_sym(k, k, self.b11[k] * tau + model.tau_slope()[k] * t);
        }
        Ok(h)
    }
}

/// `H′ = diag(b11)·τ + diag(tau_slope)·t + a1 + c/τ` at the model's τ.
pub fn assemble_hprime(
    model: &DiabaticModel,
    partner: &TtauPartner,
    t: f64,
) -> Result<RealSymMatrix> {
    partner.assemble(model, t)
}

/// Operator of the general form `diag(t_coeff)·t + diag(tau_coeff)·τ + constant + inv_tau/τ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyOperator {
    pub t_coeff: Vec<f64>,
    pub tau_coeff: Vec<f64>,
    pub constant: RealSymMatrix,
    pub inv_tau: RealSymMatrix,
}

impl FamilyOperator {
    pub fn assemble(&self, t: f64, tau: f64) -> Result<RealSymMatrix> {
        if tau == 0.0 {
            return Err(MlzError::InvalidParameter(
                "operator has a pole at τ = 0".into(),
            ));
        }
        let mut h = self.constant.plus(&self.inv_tau.scaled(1.0 / tau));
        for k in 0..self.t_coeff.len() {
            h.add_sym(k, k, self.t_coeff[k] * t + self.tau_coeff[k] * tau);
        }
        Ok(h)
    }
}

/// Occupation labels of a fixed-conserved-quantity sector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SectorBasis {
    /// One occupation tuple per basis state, in basis order.
    pub labels: Vec<Vec<u32>>,
    /// Value of the conserved quantity shared by every label.
    pub conserved: u32,
}

impl SectorBasis {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_couplings_at_origin() {
        let m = DiabaticModel::new(
            vec![1.0, -1.0, 0.5],
            vec![0.3, 0.0, -2.0],
            RealSymMatrix::zeros(3),
            2.0,
        )
        .unwrap();
        let h = m.assemble_h(0.0);
        assert_eq!(h.diagonal(), vec![0.6, 0.0, -4.0]);
        assert_eq!(h[(0, 1)], 0.0);
    }

    #[test]
    fn two_state_direct_assembly() {
        let m = build_lz2(1.0, 0.105, 1.0).unwrap();
        let h = m.assemble_h(3.0);
        assert_eq!(h.rows(), vec![vec![3.0, 0.105], vec![0.105, 0.0]]);
    }

    #[test]
    fn hprime_with_only_b11() {
        let model = build_h6(1.0, 1.5, 1.0, 0.105, 1.3).unwrap();
        let mut partner = TtauPartner::zeros(6);
        partner.b11 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t = 0.7;
        let hp = partner.assemble(&model, t).unwrap();
        for k in 0..6 {
            assert_eq!(hp[(k, k)], partner.b11[k] * 1.3 + model.tau_slope()[k] * t);
        }
        assert_eq!(hp.iter().filter(|v| **v != 0.0).count(), 6);
    }

    #[test]
    fn hprime_is_affine_in_t() {
        let (model, partner) = build_h5(1.2, 0.8, 1.1, 0.1, 0.3, 0.9).unwrap();
        let t = 2.5;
        let diff = partner.assemble(&model, t).unwrap().into_inner()
            - partner.assemble(&model, 0.0).unwrap().into_inner();
        for a in 0..5 {
            for b in 0..5 {
                let expected = if a == b {
                    model.tau_slope()[a] * t
                } else {
                    0.0
                };
                assert!((diff[(a, b)] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hprime_rejects_zero_tau() {
        let (model, partner) = build_h5(1.0, 1.0, 1.0, 0.15, 0.25, 1.0).unwrap();
        assert!(partner.assemble_at(&model, 0.0, 0.0).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(
            DiabaticModel::new(vec![1.0], vec![0.0, 1.0], RealSymMatrix::zeros(1), 1.0).is_err()
        );
        assert!(
            DiabaticModel::new(vec![f64::NAN], vec![0.0], RealSymMatrix::zeros(1), 1.0).is_err()
        );
        assert!(DiabaticModel::new(vec![], vec![], RealSymMatrix::zeros(0), 1.0).is_err());
    }

    #[test]
    fn direct_sum_is_block_diagonal() {
        let a = build_lz2(1.0, 0.1, 1.0).unwrap();
        let b = build_lz2(2.0, 0.3, 1.0).unwrap();
        let s = DiabaticModel::direct_sum(&[a, b]).unwrap();
        assert_eq!(s.slope(), &[1.0, 0.0, 2.0, 0.0]);
        assert_eq!(s.coupling_edges(), vec![(0, 1, 0.1), (2, 3, 0.3)]);
    }
}
