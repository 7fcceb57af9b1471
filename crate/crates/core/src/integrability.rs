//! The t/τ-family conditions as residuals and as a linear system.
//!
//! Expanding `[H, H′]` by powers of `t` and `τ` gives
//!
//! | name | condition                 | power   |
//! |------|---------------------------|---------|
//! | cc1  | diagonal blocks commute   | t², tτ, τ² |
//! | cc2  | `[B₀₁,A₀] = [B₀₀,A₁]`     | t       |
//! | cc3  | `[B₀₁,C] = −[A₀,A₁]`      | 1       |
//! | cc4  | `[B₀₀,C] = 0`             | t/τ     |
//! | cc5  | `[A₀,C] = 0`              | 1/τ     |
//! | cc6  | `[B₀₁,A₁] = [B₁₁,A₀]`     | τ       |
//!
//! Every condition except cc2 is homogeneous in the partner, so the solver
//! moves `[B₀₁,A₀]` to the right-hand side.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{MlzError, Result};
use crate::matrix::{commutator, frobenius_norm, solve_linear, RealSymMatrix, DEFAULT_RANK_TOL};
use crate::models::{DiabaticModel, TtauPartner};
use crate::optimize::golden_section_min;

/// Default feasibility tolerance of [`solve_partner`], relative to `‖[B₀₁,A₀]‖ + 1`.
pub const DEFAULT_SOLVE_TOL: f64 = 1e-8;

/// Parameter resolution of refined scan zeros.
pub const SCAN_XTOL: f64 = 1e-9;

/// `(t, τ)` points at which `[H, H′]` is sampled.
pub const COMMUTATOR_GRID: [(f64, f64); 9] = [
    (-2.0, 0.5),
    (-2.0, 1.0),
    (-2.0, 2.0),
    (0.0, 0.5),
    (0.0, 1.0),
    (0.0, 2.0),
    (2.0, 0.5),
    (2.0, 1.0),
    (2.0, 2.0),
];

fn diag(d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(d))
}

fn comm(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    x * y - y * x
}

fn check_dims(model: &DiabaticModel, partner: &TtauPartner) -> Result<()> {
    if model.n() != partner.n() || partner.a1.dim() != partner.n() || partner.c.dim() != partner.n()
    {
        return Err(MlzError::DimensionMismatch(format!(
            "model has {} states, partner has b11 {}, a1 {}, c {}",
            model.n(),
            partner.n(),
            partner.a1.dim(),
            partner.c.dim()
        )));
    }
    Ok(())
}

/// LHS − RHS of cc1..cc6, in that order. cc1 stacks its three commutators
/// side by side.
pub fn condition_matrices(
    model: &DiabaticModel,
    partner: &TtauPartner,
) -> Result<[DMatrix<f64>; 6]> {
    check_dims(model, partner)?;
    let mut m = homogeneous_terms(model, partner);
    m[1] += inhomogeneous_term(model);
    Ok(m)
}

/// `[B₀₁, A₀]`, the only partner-independent term.
pub fn inhomogeneous_term(model: &DiabaticModel) -> DMatrix<f64> {
    comm(&diag(model.tau_slope()), model.coupling().as_matrix())
}

fn homogeneous_terms(model: &DiabaticModel, partner: &TtauPartner) -> [DMatrix<f64>; 6] {
    let n = model.n();
    let b00 = diag(model.slope());
    let b01 = diag(model.tau_slope());
    let b11 = diag(&partner.b11);
    let a0 = model.coupling().as_matrix();
    let a1 = partner.a1.as_matrix();
    let c = partner.c.as_matrix();

    let mut cc1 = DMatrix::zeros(n, 3 * n);
    cc1.columns_mut(0, n).copy_from(&comm(&b00, &b01));
    cc1.columns_mut(n, n).copy_from(&comm(&b00, &b11));
    cc1.columns_mut(2 * n, n).copy_from(&comm(&b01, &b11));

    [
        cc1,
        -comm(&b00, a1),
        comm(&b01, c) + comm(a0, a1),
        comm(&b00, c),
        comm(a0, c),
        comm(&b01, a1) - comm(&b11, a0),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutatorSample {
    pub t: f64,
    pub tau: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub r_cc1: f64,
    pub r_cc2: f64,
    pub r_cc3: f64,
    pub r_cc4: f64,
    pub r_cc5: f64,
    pub r_cc6: f64,
    pub commutator_samples: Vec<CommutatorSample>,
    pub max_commutator: f64,
    /// Largest `‖H‖_F` or `‖H′‖_F` over the sampled points.
    pub matrix_scale: f64,
    pub tol: f64,
    pub pass: bool,
}

impl ResidualReport {
    pub fn residuals(&self) -> [f64; 6] {
        [
            self.r_cc1, self.r_cc2, self.r_cc3, self.r_cc4, self.r_cc5, self.r_cc6,
        ]
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals().into_iter().fold(0.0, f64::max)
    }
}

/// Frobenius residuals of cc1..cc6 and sampled `‖[H, H′]‖`.
/// `pass` looks at the cc residuals only.
pub fn verify_pair(
    model: &DiabaticModel,
    partner: &TtauPartner,
    tol: f64,
) -> Result<ResidualReport> {
    if !(tol > 0.0) {
        return Err(MlzError::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let m = condition_matrices(model, partner)?;
    let r: Vec<f64> = m.iter().map(frobenius_norm).collect();

    let mut commutator_samples = Vec::with_capacity(COMMUTATOR_GRID.len());
    let mut matrix_scale = 0.0_f64;
    for &(t, tau) in &COMMUTATOR_GRID {
        let h = model.assemble_h_at(t, tau);
        let hp = partner.assemble_at(model, t, tau)?;
        matrix_scale = matrix_scale
            .max(frobenius_norm(h.as_matrix()))
            .max(frobenius_norm(hp.as_matrix()));
        let norm = frobenius_norm(&commutator(h.as_matrix(), hp.as_matrix())?);
        commutator_samples.push(CommutatorSample { t, tau, norm });
    }
    let max_commutator = commutator_samples
        .iter()
        .map(|s| s.norm)
        .fold(0.0, f64::max);
    let max_residual = r.iter().copied().fold(0.0, f64::max);

    Ok(ResidualReport {
        r_cc1: r[0],
        r_cc2: r[1],
        r_cc3: r[2],
        r_cc4: r[3],
        r_cc5: r[4],
        r_cc6: r[5],
        commutator_samples,
        max_commutator,
        matrix_scale,
        tol,
        pass: max_residual < tol,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowReport {
    /// `∂τH = ∂tH′ = B₀₁` holds by the layout of [`TtauPartner`].
    pub by_construction: bool,
    pub step: f64,
    /// Largest central-difference disagreement over the commutator grid.
    pub max_fd_error: f64,
    pub holds: bool,
}

pub const FLOW_FD_STEP: f64 = 1e-5;
pub const FLOW_FD_TOL: f64 = 1e-8;

/// Central-difference disagreement between `∂τH` and `∂tH′` at `(t, τ)`.
pub fn flow_fd_error(
    model: &DiabaticModel,
    partner: &TtauPartner,
    t: f64,
    tau: f64,
    h: f64,
) -> Result<f64> {
    check_dims(model, partner)?;
    let dtau_h = (model.assemble_h_at(t, tau + h).into_inner()
        - model.assemble_h_at(t, tau - h).into_inner())
        / (2.0 * h);
    let dt_hp = (partner.assemble_at(model, t + h, tau)?.into_inner()
        - partner.assemble_at(model, t - h, tau)?.into_inner())
        / (2.0 * h);
    Ok(frobenius_norm(&(dtau_h - dt_hp)))
}

pub fn verify_flow(model: &DiabaticModel, partner: &TtauPartner) -> Result<FlowReport> {
    let mut max_fd_error = 0.0_f64;
    for &(t, tau) in &COMMUTATOR_GRID {
        max_fd_error = max_fd_error.max(flow_fd_error(model, partner, t, tau, FLOW_FD_STEP)?);
    }
    Ok(FlowReport {
        by_construction: true,
        step: FLOW_FD_STEP,
        max_fd_error,
        holds: max_fd_error < FLOW_FD_TOL,
    })
}

/// Packs `(b11, upper(a1), upper(c))` into one vector, rows first.
pub fn stack_partner(partner: &TtauPartner) -> DVector<f64> {
    let n = partner.n();
    let tri = n * (n + 1) / 2;
    let mut x = DVector::zeros(n + 2 * tri);
    x.rows_mut(0, n).copy_from_slice(&partner.b11);
    let mut k = n;
    for m in [&partner.a1, &partner.c] {
        for a in 0..n {
            for b in a..n {
                x[k] = m[(a, b)];
                k += 1;
            }
        }
    }
    x
}

pub fn unstack_partner(n: usize, x: &DVector<f64>) -> Result<TtauPartner> {
    let tri = n * (n + 1) / 2;
    if x.len() != n + 2 * tri {
        return Err(MlzError::DimensionMismatch(format!(
            "stacked partner for n = {n} needs {} entries, got {}",
            n + 2 * tri,
            x.len()
        )));
    }
    let b11 = x.rows(0, n).iter().copied().collect();
    let mut mats = [RealSymMatrix::zeros(n), RealSymMatrix::zeros(n)];
    let mut k = n;
    for m in &mut mats {
        for a in 0..n {
            for b in a..n {
                m.set_sym(a, b, x[k]);
                k += 1;
            }
        }
    }
    let [a1, c] = mats;
    TtauPartner::new(b11, a1, c)
}

fn stack_conditions(m: &[DMatrix<f64>; 6]) -> Vec<f64> {
    // cc1 is identically zero for diagonal B blocks and carries no equations.
    m[1..].iter().flat_map(|x| x.iter().copied()).collect()
}

/// Matrix of the homogeneous map `x ↦ (cc2..cc6)(x)` on stacked partners.
pub fn condition_system(model: &DiabaticModel) -> DMatrix<f64> {
    let n = model.n();
    let unknowns = n + n * (n + 1);
    let mut columns = Vec::with_capacity(unknowns);
    for j in 0..unknowns {
        let mut e = DVector::zeros(unknowns);
        e[j] = 1.0;
        let basis = unstack_partner(n, &e).expect("stacked length matches by construction");
        columns.push(DVector::from_vec(stack_conditions(&homogeneous_terms(
            model, &basis,
        ))));
    }
    DMatrix::from_columns(&columns)
}

#[derive(Clone, Debug, Serialize)]
pub struct PartnerSolveReport {
    pub feasible: bool,
    /// `‖L·x − b‖` of the least-squares solution.
    pub residual: f64,
    /// `tol · (‖[B₀₁,A₀]‖ + 1)`.
    pub threshold: f64,
    pub inhomogeneous_norm: f64,
    pub particular: TtauPartner,
    pub nullspace_dim: usize,
    pub nullspace: Vec<TtauPartner>,
    /// Set when `[B₀₁,A₀] ≠ 0` or the nullspace exceeds the three identity shifts.
    pub nontrivial: bool,
    /// cc1..cc6 residuals of `particular`.
    pub condition_residuals: [f64; 6],
    pub rank_tol: f64,
}

impl PartnerSolveReport {
    /// Distance from `partner` to the affine set `particular + span(nullspace)`,
    /// measured on stacked coordinates.
    pub fn projection_distance(&self, partner: &TtauPartner) -> Result<f64> {
        let mut d = stack_partner(partner) - stack_partner(&self.particular);
        for v in &self.nullspace {
            let v = stack_partner(v);
            let coef = v.dot(&d);
            d.axpy(-coef, &v, 1.0);
        }
        Ok(d.norm())
    }
}

pub fn solve_partner(model: &DiabaticModel, tol: f64) -> Result<PartnerSolveReport> {
    solve_partner_with(model, tol, DEFAULT_RANK_TOL)
}

pub fn solve_partner_with(
    model: &DiabaticModel,
    tol: f64,
    rank_tol: f64,
) -> Result<PartnerSolveReport> {
    if !(tol > 0.0) {
        return Err(MlzError::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let n = model.n();
    let system = condition_system(model);
    let inhom = inhomogeneous_term(model);
    let inhomogeneous_norm = frobenius_norm(&inhom);

    // Only cc2 carries the inhomogeneous term; it sits first in the stacking.
    let mut rhs = DVector::zeros(system.nrows());
    for (k, v) in inhom.iter().enumerate() {
        rhs[k] = -v;
    }
    let solved = solve_linear(&system, &rhs, rank_tol)?;

    let particular = unstack_partner(n, &solved.particular)?;
    let nullspace = solved
        .nullspace
        .iter()
        .map(|v| unstack_partner(n, v))
        .collect::<Result<Vec<_>>>()?;
    let condition_residuals = {
        let m = condition_matrices(model, &particular)?;
        let r: Vec<f64> = m.iter().map(frobenius_norm).collect();
        [r[0], r[1], r[2], r[3], r[4], r[5]]
    };
    let threshold = tol * (inhomogeneous_norm + 1.0);

    Ok(PartnerSolveReport {
        feasible: solved.residual < threshold,
        residual: solved.residual,
        threshold,
        inhomogeneous_norm,
        particular,
        nullspace_dim: nullspace.len(),
        nullspace,
        nontrivial: inhomogeneous_norm > threshold || solved.nullspace.len() > 3,
        condition_residuals,
        rank_tol,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanPoint {
    pub value: f64,
    pub residual: Option<f64>,
    pub feasible: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanZero {
    pub value: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
}

/// Run of consecutive feasible grid points.
#[derive(Clone, Debug, Serialize)]
pub struct FeasibleInterval {
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub param: String,
    pub points: Vec<ScanPoint>,
    /// Isolated residual zeros refined from grid minima.
    pub zeros: Vec<ScanZero>,
    pub feasible_intervals: Vec<FeasibleInterval>,
}

/// Solver residual along a one-parameter family of models.
///
/// The residual is a norm, so zeros are minima rather than sign changes:
/// each strict interior grid minimum is refined by golden-section search
/// on its two neighbouring cells and kept when it reaches feasibility.
pub fn scan_parameter<F>(builder: F, param: &str, grid: &[f64], tol: f64) -> Result<ScanReport>
where
    F: Fn(f64) -> Result<DiabaticModel>,
{
    if grid.is_empty() {
        return Err(MlzError::InvalidParameter("scan grid is empty".into()));
    }
    let evaluate = |v: f64| -> Result<PartnerSolveReport> { solve_partner(&builder(v)?, tol) };

    let points: Vec<ScanPoint> = grid
        .iter()
        .map(|&value| match evaluate(value) {
            Ok(r) => ScanPoint {
                value,
                residual: Some(r.residual),
                feasible: r.feasible,
                error: None,
            },
            Err(e) => ScanPoint {
                value,
                residual: None,
                feasible: false,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut feasible_intervals = Vec::new();
    let mut i = 0;
    while i < points.len() {
        if points[i].feasible {
            let start = i;
            while i + 1 < points.len() && points[i + 1].feasible {
                i += 1;
            }
            if i > start {
                feasible_intervals.push(FeasibleInterval {
                    start: points[start].value,
                    end: points[i].value,
                });
            }
        }
        i += 1;
    }
    let in_run = |k: usize| {
        points[k].feasible
            && ((k > 0 && points[k - 1].feasible)
                || (k + 1 < points.len() && points[k + 1].feasible))
    };

    let mut zeros: Vec<ScanZero> = Vec::new();
    for k in 1..points.len().saturating_sub(1) {
        let (Some(left), Some(mid), Some(right)) = (
            points[k - 1].residual,
            points[k].residual,
            points[k + 1].residual,
        ) else {
            continue;
        };
        if !(mid < left && mid <= right) || in_run(k) {
            continue;
        }
        let bracket = (points[k - 1].value, points[k + 1].value);
        let refined = golden_section_min(
            |v| evaluate(v).map_or(f64::INFINITY, |r| r.residual),
            bracket.0,
            bracket.1,
            SCAN_XTOL,
        );
        let report = evaluate(refined.x)?;
        if report.feasible
            && zeros
                .last()
                .is_none_or(|z| (z.value - refined.x).abs() > SCAN_XTOL * 10.0)
        {
            zeros.push(ScanZero {
                value: refined.x,
                residual: report.residual,
                bracket,
            });
        }
    }

    Ok(ScanReport {
        param: param.to_string(),
        points,
        zeros,
        feasible_intervals,
    })
}

/// Evenly spaced grid with `steps` points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..steps)
            .map(|i| a + (b - a) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleReport {
    /// Levels in traversal order; the last connects back to the first.
    pub levels: Vec<usize>,
    /// `(ΔB₀₁)²/ΔB₀₀` for each consecutive pair, closing pair last.
    pub terms: Vec<f64>,
    pub sum: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeReport {
    pub a: usize,
    pub b: usize,
    /// `(B₀₁ᵃᵃ − B₀₁ᵇᵇ)²/(B₀₀ᵃᵃ − B₀₀ᵇᵇ)`.
    pub slope_term: f64,
    /// `B₁₁ᵃᵃ − B₁₁ᵇᵇ`, when a partner is supplied.
    pub b11_difference: Option<f64>,
    pub defect: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroAreaReport {
    pub cycles: Vec<CycleReport>,
    pub edges: Vec<EdgeReport>,
    /// Coupled pairs with equal slopes; excluded from the graph.
    pub equal_slope_edges: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
    pub tol: f64,
    pub pass: bool,
}

fn slope_term(model: &DiabaticModel, a: usize, b: usize) -> f64 {
    let d01 = model.tau_slope()[a] - model.tau_slope()[b];
    let d00 = model.slope()[a] - model.slope()[b];
    d01 * d01 / d00
}

/// Signed loop sum `Σ (ΔB₀₁)²/ΔB₀₀` along `levels`, closing the loop.
pub fn cycle_sum(model: &DiabaticModel, levels: &[usize]) -> f64 {
    let mut sum = 0.0;
    for k in 0..levels.len() {
        sum += slope_term(model, levels[k], levels[(k + 1) % levels.len()]);
    }
    sum
}

/// Fundamental cycles of a graph on `n` vertices, from a breadth-first
/// spanning forest. Each non-tree edge closes one cycle.
pub fn fundamental_cycles(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); n];
    for (idx, &(a, b)) in edges.iter().enumerate() {
        adjacency[a].push((b, idx));
        adjacency[b].push((a, idx));
    }
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut depth = vec![0usize; n];
    let mut seen = vec![false; n];
    let mut tree_edge = vec![false; edges.len()];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, idx) in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    depth[v] = depth[u] + 1;
                    tree_edge[idx] = true;
                    queue.push_back(v);
                }
            }
        }
    }

    let mut cycles = Vec::new();
    for (idx, &(u, v)) in edges.iter().enumerate() {
        if tree_edge[idx] {
            continue;
        }
        // u → lca along the tree, then lca → v; the edge (v, u) closes it.
        let (mut x, mut y) = (u, v);
        let mut up = vec![x];
        let mut down = vec![y];
        while depth[x] > depth[y] {
            x = parent[x].expect("deeper vertex has a parent");
            up.push(x);
        }
        while depth[y] > depth[x] {
            y = parent[y].expect("deeper vertex has a parent");
            down.push(y);
        }
        while x != y {
            x = parent[x].expect("distinct vertices below the root");
            y = parent[y].expect("distinct vertices below the root");
            up.push(x);
            down.push(y);
        }
        down.pop();
        up.extend(down.into_iter().rev());
        cycles.push(up);
    }
    cycles
}

pub fn zero_area_check(
    model: &DiabaticModel,
    partner: Option<&TtauPartner>,
    tol: f64,
) -> Result<ZeroAreaReport> {
    if let Some(p) = partner {
        check_dims(model, p)?;
    }
    let mut warnings = Vec::new();
    if model.has_diagonal_offsets() {
        warnings.push(
            "coupling has a nonzero diagonal; only slope diagonals enter the loop sums".to_string(),
        );
    }

    let mut graph_edges = Vec::new();
    let mut equal_slope_edges = Vec::new();
    let mut edges = Vec::new();
    for (a, b, _) in model.coupling_edges() {
        if model.slope()[a] == model.slope()[b] {
            equal_slope_edges.push((a, b));
            continue;
        }
        graph_edges.push((a, b));
        let term = slope_term(model, a, b);
        let b11_difference = partner.map(|p| p.b11[a] - p.b11[b]);
        edges.push(EdgeReport {
            a,
            b,
            slope_term: term,
            b11_difference,
            defect: b11_difference.map(|d| (d - term).abs()),
        });
    }

    let cycles: Vec<CycleReport> = fundamental_cycles(model.n(), &graph_edges)
        .into_iter()
        .map(|levels| {
            let terms: Vec<f64> = (0..levels.len())
                .map(|k| slope_term(model, levels[k], levels[(k + 1) % levels.len()]))
                .collect();
            let sum = terms.iter().sum();
            CycleReport { levels, terms, sum }
        })
        .collect();

    let pass = cycles.iter().all(|c| c.sum.abs() < tol)
        && edges.iter().all(|e| e.defect.is_none_or(|d| d < tol));
    Ok(ZeroAreaReport {
        cycles,
        edges,
        equal_slope_edges,
        warnings,
        tol,
        pass,
    })
}
