//! Finite models with explicit matrices: two-state LZ, five- and six-state
//! models, Demkov–Osherov and the generalized bowtie.
//!
//! Level indices below are zero-based; they follow the printed row order.

use std::f64::consts::SQRT_2;

use super::{DiabaticModel, TtauPartner};
use crate::error::{MlzError, Result};
use crate::matrix::RealSymMatrix;

fn require_positive_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(MlzError::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )));
    }
    Ok(())
}

fn require_distinct(values: &[f64], what: &str) -> Result<()> {
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            if a == b {
                return Err(MlzError::InvalidParameter(format!(
                    "{what} must be distinct, {a} repeats"
                )));
            }
        }
    }
    Ok(())
}

/// Two crossing levels with slopes `(beta, 0)` and coupling `g`.
pub fn build_lz2(beta: f64, g: f64, tau: f64) -> Result<DiabaticModel> {
    if beta == 0.0 {
        return Err(MlzError::InvalidParameter("beta must be nonzero".into()));
    }
    let mut coupling = RealSymMatrix::zeros(2);
    coupling.set_sym(0, 1, g);
    DiabaticModel::new(vec![beta, 0.0], vec![0.0, 0.0], coupling, tau)
}

/// Five-state model with `g3` left free.
///
/// Integrable only on `g3 = √(2(g2² − g1²))`; the scan in
/// [`crate::integrability::scan_parameter`] recovers that constraint.
pub fn h5_ansatz(
    e1: f64,
    e2: f64,
    b: f64,
    g1: f64,
    g2: f64,
    g3: f64,
    tau: f64,
) -> Result<DiabaticModel> {
    if b == 0.0 {
        return Err(MlzError::InvalidParameter("b must be nonzero".into()));
    }
    require_positive_tau(tau)?;
    let mut coupling = RealSymMatrix::zeros(5);
    coupling.set_sym(0, 2, g1);
    coupling.set_sym(1, 2, g2);
    coupling.set_sym(0, 3, g3);
    coupling.set_sym(0, 4, g2 * SQRT_2);
    coupling.set_sym(1, 4, g1 * SQRT_2);
    DiabaticModel::new(
        vec![0.0, 0.0, -b, -b, b],
        vec![e1, -e2, -e2, e1, e1],
        coupling,
        tau,
    )
}

/// Five-state model and its commuting partner.
pub fn build_h5(
    e1: f64,
    e2: f64,
    b: f64,
    g1: f64,
    g2: f64,
    tau: f64,
) -> Result<(DiabaticModel, TtauPartner)> {
    let disc = 2.0 * (g2 * g2 - g1 * g1);
    if disc < 0.0 {
        return Err(MlzError::InvalidParameter(format!(
            "g2² < g1² ({g2}² < {g1}²) makes g3 imaginary"
        )));
    }
    let g3 = disc.sqrt();
    let model = h5_ansatz(e1, e2, b, g1, g2, g3, tau)?;

    let e = e1 + e2;
    let b11 = vec![0.0, -e * e / b, -e * e / b, 0.0, 0.0];
    let mut a1 = RealSymMatrix::zeros(5);
    a1.set_sym(0, 2, e * g1 / b);
    a1.set_sym(1, 4, SQRT_2 * e * g1 / b);
    let mut c = RealSymMatrix::zeros(5);
    c.set_sym(0, 0, g1 * g1 / b);
    c.set_sym(0, 1, -g1 * g2 / b);
    c.set_sym(1, 1, g2 * g2 / b);
    c.set_sym(2, 2, g3 * g3 / (2.0 * b));
    c.set_sym(2, 3, -g1 * g3 / b);
    c.set_sym(3, 3, 2.0 * g1 * g1 / b);

    Ok((model, TtauPartner::new(b11, a1, c)?))
}

/// Six-state model with bands of three, two and one parallel levels.
pub fn build_h6(e1: f64, e2: f64, b: f64, g: f64, tau: f64) -> Result<DiabaticModel> {
    if b == 0.0 {
        return Err(MlzError::InvalidParameter("b must be nonzero".into()));
    }
    require_positive_tau(tau)?;
    let mut coupling = RealSymMatrix::zeros(6);
    for (a, c) in [(1, 3), (2, 3), (0, 4), (1, 4), (0, 5), (1, 5), (2, 5)] {
        coupling.set_sym(a, c, g);
    }
    DiabaticModel::new(
        vec![0.0, 0.0, 0.0, b, b, -b],
        vec![e1, 0.0, -e2, -e2, e1, 0.0],
        coupling,
        tau,
    )
}

/// One sloped level crossing `intercepts.len()` parallel flat levels.
pub fn build_demkov_osherov(
    intercepts: &[f64],
    couplings: &[f64],
    tau: f64,
) -> Result<DiabaticModel> {
    if intercepts.is_empty() || intercepts.len() != couplings.len() {
        return Err(MlzError::InvalidParameter(format!(
            "need matching nonempty intercepts and couplings, got {} and {}",
            intercepts.len(),
            couplings.len()
        )));
    }
    require_distinct(intercepts, "intercepts")?;
    let n = intercepts.len() + 1;
    let mut slope = vec![0.0; n];
    slope[0] = 1.0;
    let mut tau_slope = vec![0.0; n];
    tau_slope[1..].copy_from_slice(intercepts);
    let mut coupling = RealSymMatrix::zeros(n);
    for (k, &g) in couplings.iter().enumerate() {
        coupling.set_sym(0, k + 1, g);
    }
    DiabaticModel::new(slope, tau_slope, coupling, tau)
}

/// Generalized bowtie: two parallel levels `0±` coupled to `N` levels that
/// cross at one point. States are ordered `(0₊, 0₋, 1..N)`.
pub fn build_bowtie(beta: &[f64], g: &[f64], tau: f64) -> Result<(DiabaticModel, TtauPartner)> {
    if beta.is_empty() || beta.len() != g.len() {
        return Err(MlzError::InvalidParameter(format!(
            "need matching nonempty slopes and couplings, got {} and {}",
            beta.len(),
            g.len()
        )));
    }
    if beta.contains(&0.0) {
        return Err(MlzError::InvalidParameter(
            "bowtie slopes must be nonzero".into(),
        ));
    }
    require_distinct(beta, "bowtie slopes")?;

    let n = beta.len() + 2;
    let mut slope = vec![0.0; n];
    slope[2..].copy_from_slice(beta);
    let mut tau_slope = vec![0.0; n];
    tau_slope[0] = 1.0;
    tau_slope[1] = -1.0;
    let mut coupling = RealSymMatrix::zeros(n);
    let mut a1 = RealSymMatrix::zeros(n);
    let mut b11 = vec![0.0; n];
    let mut kappa = 0.0;
    for (k, (&bk, &gk)) in beta.iter().zip(g).enumerate() {
        let s = k + 2;
        coupling.set_sym(0, s, gk);
        coupling.set_sym(1, s, gk);
        a1.set_sym(0, s, -gk / bk);
        a1.set_sym(1, s, gk / bk);
        // cc6 on the (0±, n) entries fixes B₁₁ⁿⁿ − B₁₁⁰⁰ = +1/βₙ.
        b11[s] = 1.0 / bk;
        kappa += gk * gk / bk;
    }
    let mut c = RealSymMatrix::zeros(n);
    c.set_sym(0, 0, kappa);
    c.set_sym(1, 1, kappa);
    c.set_sym(0, 1, -kappa);

    let model = DiabaticModel::new(slope, tau_slope, coupling, tau)?;
    Ok((model, TtauPartner::new(b11, a1, c)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn h5_entries() {
        let (g1, g2) = (0.15, 0.25);
        let (model, partner) = build_h5(1.0, 1.0, 1.0, g1, g2, 1.0).unwrap();
        let h = model.assemble_h(0.0);
        assert_eq!(h[(0, 0)], 1.0);
        assert_eq!(h[(0, 4)], g2 * SQRT_2);
        let hp = partner.assemble(&model, 0.0).unwrap();
        assert_abs_diff_eq!(hp[(0, 0)], g1 * g1, epsilon = 1e-15);
        assert_abs_diff_eq!(hp[(0, 1)], -g1 * g2, epsilon = 1e-15);
    }

    #[test]
    fn h5_g3_value_and_limit() {
        let (model, _) = build_h5(1.0, 1.0, 1.0, 0.15, 0.25, 1.0).unwrap();
        // √(2(0.25² − 0.15²)) = √0.08
        assert_abs_diff_eq!(
            model.coupling()[(0, 3)],
            0.282_842_712_474_619,
            epsilon = 1e-14
        );

        let (model, _) = build_h5(1.0, 1.0, 1.0, 0.2, 0.2, 1.0).unwrap();
        assert_eq!(model.coupling()[(0, 3)], 0.0);
        assert!(model
            .coupling_edges()
            .iter()
            .all(|&(a, b, _)| (a, b) != (0, 3)));
    }

    #[test]
    fn h5_rejects_imaginary_g3() {
        assert!(matches!(
            build_h5(1.0, 1.0, 1.0, 0.3, 0.2, 1.0),
            Err(MlzError::InvalidParameter(_))
        ));
        assert!(build_h5(1.0, 1.0, 0.0, 0.1, 0.2, 1.0).is_err());
    }

    #[test]
    fn h5_sparsity_pattern() {
        let (model, _) = build_h5(1.0, 1.0, 1.0, 0.15, 0.25, 1.0).unwrap();
        let edges: Vec<_> = model
            .coupling_edges()
            .iter()
            .map(|&(a, b, _)| (a, b))
            .collect();
        assert_eq!(edges, vec![(0, 2), (0, 3), (0, 4), (1, 2), (1, 4)]);
    }

    #[test]
    fn h6_fig3_diagonal_and_pattern() {
        let model = build_h6(1.0, 1.5, 1.0, 0.105, 1.0).unwrap();
        assert_eq!(
            model.assemble_h(0.0).diagonal(),
            vec![1.0, 0.0, -1.5, -1.5, 1.0, 0.0]
        );
        let edges: Vec<_> = model
            .coupling_edges()
            .iter()
            .map(|&(a, b, _)| (a, b))
            .collect();
        assert_eq!(
            edges,
            vec![(0, 4), (0, 5), (1, 3), (1, 4), (1, 5), (2, 3), (2, 5)]
        );
    }

    #[test]
    fn h6_without_coupling_is_diagonal() {
        let model = build_h6(1.0, 1.5, 1.0, 0.0, 1.0).unwrap();
        for t in [-3.0, 0.0, 1.7] {
            let h = model.assemble_h(t);
            for a in 0..6 {
                for b in 0..6 {
                    if a != b {
                        assert_eq!(h[(a, b)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn demkov_osherov_shapes() {
        let lz = build_demkov_osherov(&[0.0], &[0.2], 1.0).unwrap();
        assert_eq!(lz.n(), 2);
        assert_eq!(lz.slope(), &[1.0, 0.0]);

        let m = build_demkov_osherov(&[-1.0, 0.0, 1.0], &[0.1, 0.2, 0.3], 1.0).unwrap();
        let edges = m.coupling_edges();
        assert_eq!(edges, vec![(0, 1, 0.1), (0, 2, 0.2), (0, 3, 0.3)]);
        assert_eq!(m.tau_slope(), &[0.0, -1.0, 0.0, 1.0]);
        assert!(!m.has_diagonal_offsets());
    }

    #[test]
    fn demkov_osherov_rejects_repeated_intercepts() {
        assert!(build_demkov_osherov(&[1.0, 1.0], &[0.1, 0.2], 1.0).is_err());
    }

    #[test]
    fn bowtie_single_level_kappa() {
        let (_, partner) = build_bowtie(&[1.0], &[0.2], 1.0).unwrap();
        let kappa = 0.04;
        assert_abs_diff_eq!(partner.c[(0, 0)], kappa, epsilon = 1e-16);
        assert_abs_diff_eq!(partner.c[(1, 1)], kappa, epsilon = 1e-16);
        assert_abs_diff_eq!(partner.c[(0, 1)], -kappa, epsilon = 1e-16);
        assert_eq!(partner.c[(2, 2)], 0.0);
    }

    #[test]
    fn bowtie_without_coupling_has_trivial_partner() {
        let (_, partner) = build_bowtie(&[1.0, -2.0], &[0.0, 0.0], 1.0).unwrap();
        assert!(partner.a1.iter().all(|v| *v == 0.0));
        assert!(partner.c.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bowtie_rejects_bad_slopes() {
        assert!(build_bowtie(&[1.0, 1.0], &[0.1, 0.1], 1.0).is_err());
        assert!(build_bowtie(&[0.0], &[0.1], 1.0).is_err());
    }
}
