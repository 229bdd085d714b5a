//! Semidefinite programs over a single matrix variable, the projected Shor
//! relaxation of a QCQP, and helpers built on the vectorized engine in
//! [`cone`].

pub mod cone;
pub mod lp;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{eig_sym, SymMatrix};
use crate::model::{QcqpInstance, Sense};
use cone::{solve_cone, ConeBuilder};
pub use cone::{AdmmSettings, SolveStatus};

pub const DEFAULT_EPS: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 50_000;

#[derive(Clone, Debug)]
pub struct LinearConstraint {
    pub matrix: SymMatrix,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min ⟨C, Z⟩ s.t. ⟨A_i, Z⟩ (≤ | =) r_i, [tr Z = τ], Z ⪰ 0`.
///
/// With `diagonal` set, `Z` is restricted to nonnegative diagonal matrices and
/// the program is a linear program.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    pub dim: usize,
    pub objective: SymMatrix,
    pub constraints: Vec<LinearConstraint>,
    pub trace_normalization: Option<f64>,
    pub diagonal: bool,
}

impl ConicProgram {
    pub fn new(objective: SymMatrix) -> Self {
        ConicProgram {
            dim: objective.dim(),
            objective,
            constraints: Vec::new(),
            trace_normalization: None,
            diagonal: false,
        }
    }

    pub fn le(mut self, matrix: SymMatrix, rhs: f64) -> Self {
        self.constraints.push(LinearConstraint {
            matrix,
            sense: Sense::Le,
            rhs,
        });
        self
    }

    pub fn eq(mut self, matrix: SymMatrix, rhs: f64) -> Self {
        self.constraints.push(LinearConstraint {
            matrix,
            sense: Sense::Eq,
            rhs,
        });
        self
    }

    pub fn with_trace(mut self, tau: f64) -> Self {
        self.trace_normalization = Some(tau);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SdpSolution {
    pub z: SymMatrix,
    /// Lagrange multipliers `λ_i` with `C + Σ λ_i A_i [+ λ_τ I] ⪰ 0`; nonnegative for `≤` rows.
    pub y: Vec<f64>,
    pub trace_multiplier: Option<f64>,
    pub objective_value: f64,
    pub dual_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

pub fn solve(prog: &ConicProgram, eps: f64, max_iter: usize) -> Result<SdpSolution> {
    if prog.diagonal
        || prog.dim != prog.objective.dim()
        || prog.constraints.iter().any(|c| c.matrix.dim() != prog.dim)
    {
        return solve_unscaled(prog, eps, max_iter);
    }
    let per_round = (max_iter / SCALING_ROUNDS).max(1);
    let mut d = congruence_scaling(prog);
    let mut best: Option<SdpSolution> = None;
    let mut spent = 0;
    for _ in 0..SCALING_ROUNDS {
        let mut sol = solve_scaled(prog, &d, eps, per_round)?;
        spent += sol.iterations;
        sol.iterations = spent;
        if sol.status != SolveStatus::MaxIter {
            return Ok(sol);
        }
        d = solution_scaling(&sol.z, &dual_slack(prog, &sol));
        if best
            .as_ref()
            .is_none_or(|b| worst_residual(&sol) < worst_residual(b))
        {
            best = Some(sol);
        }
    }
    let mut best = best.expect("at least one scaling round");
    best.iterations = spent;
    Ok(best)
}

const SCALING_ROUNDS: usize = 4;

fn worst_residual(s: &SdpSolution) -> f64 {
    s.primal_residual.max(s.dual_residual).max(s.gap)
}

/// Solves with `Z = D Ẑ D`, `D = diag(d)`.
fn solve_scaled(
    prog: &ConicProgram,
    d: &DVector<f64>,
    eps: f64,
    max_iter: usize,
) -> Result<SdpSolution> {
    let dm = DMatrix::from_diagonal(d);
    let scale = |m: &SymMatrix| m.congruence(&dm);
    let mut scaled = ConicProgram::new(scale(&prog.objective));
    for c in &prog.constraints {
        scaled.constraints.push(LinearConstraint {
            matrix: scale(&c.matrix),
            sense: c.sense,
            rhs: c.rhs,
        });
    }
    if let Some(tau) = prog.trace_normalization {
        scaled.constraints.push(LinearConstraint {
            matrix: SymMatrix::diag(d.map(|v| v * v).as_slice()),
            sense: Sense::Eq,
            rhs: tau,
        });
    }
    let mut sol = solve_unscaled(&scaled, eps, max_iter)?;
    if prog.trace_normalization.is_some() {
        sol.trace_multiplier = sol.y.pop();
    }
    sol.z = scale(&sol.z);
    sol.objective_value = prog.objective.inner(&sol.z);
    Ok(sol)
}

/// Dual slack `C + Σ λ_i A_i [+ λ_τ I]` of an approximate solution.
fn dual_slack(prog: &ConicProgram, sol: &SdpSolution) -> SymMatrix {
    let mut s = prog.objective.matrix().clone();
    for (c, y) in prog.constraints.iter().zip(&sol.y) {
        s += c.matrix.matrix() * *y;
    }
    if let Some(t) = sol.trace_multiplier {
        s += DMatrix::identity(prog.dim, prog.dim) * t;
    }
    SymMatrix::new(s)
}

/// Diagonal `D` balancing the diagonals of `D⁻¹ Z D⁻¹` and `D S D` for an
/// approximate primal-dual pair.
fn solution_scaling(z: &SymMatrix, s: &SymMatrix) -> DVector<f64> {
    let n = z.dim();
    let floor = |m: &SymMatrix| 1e-6 * (0..n).map(|i| m.get(i, i).abs()).fold(0.0, f64::max);
    let (fz, fs) = (floor(z), floor(s));
    if !(fz.is_finite() && fs.is_finite() && fz > 0.0 && fs > 0.0) {
        return DVector::from_element(n, 1.0);
    }
    DVector::from_fn(n, |i, _| {
        ((z.get(i, i).max(0.0) + fz) / (s.get(i, i).max(0.0) + fs)).powf(0.25)
    })
}

/// Diagonal `D` with `Z = D Ẑ D` equilibrating the constraint matrices (Ruiz passes).
fn congruence_scaling(prog: &ConicProgram) -> DVector<f64> {
    let n = prog.dim;
    let mut mats: Vec<DMatrix<f64>> = prog
        .constraints
        .iter()
        .filter_map(|c| {
            let f = c.matrix.frobenius_norm();
            (f > 0.0).then(|| c.matrix.matrix() / f)
        })
        .collect();
    if prog.trace_normalization.is_some() {
        mats.push(DMatrix::identity(n, n) / (n as f64).sqrt());
    }
    let mut d = DVector::from_element(n, 1.0);
    for _ in 0..10 {
        let mut r = DVector::zeros(n);
        for m in &mats {
            for i in 0..n {
                for j in 0..n {
                    r[i] = f64::max(r[i], (m[(i, j)] * d[i] * d[j]).abs());
                }
            }
        }
        let mut done = true;
        for i in 0..n {
            if r[i] > 0.0 {
                let f = 1.0 / r[i].sqrt();
                done &= (f - 1.0).abs() < 1e-3;
                d[i] = (d[i] * f).clamp(1e-4, 1e4);
            }
        }
        if done {
            break;
        }
    }
    d
}

fn solve_unscaled(prog: &ConicProgram, eps: f64, max_iter: usize) -> Result<SdpSolution> {
    if eps <= 0.0 {
        return Err(Error::Input("eps must be positive".into()));
    }
    check_dim(prog.dim, prog.objective.dim())?;
    for c in &prog.constraints {
        check_dim(prog.dim, c.matrix.dim())?;
    }
    let d = prog.dim;
    let mut bld = ConeBuilder::new();
    let zb = if prog.diagonal {
        bld.nonneg(d)
    } else {
        bld.psd(d)
    };
    let n_le = prog
        .constraints
        .iter()
        .filter(|c| c.sense == Sense::Le)
        .count();
    let slack = bld.nonneg(n_le);
    let terms = |bld: &ConeBuilder, m: &SymMatrix, coeff: f64| -> Vec<(usize, f64)> {
        if prog.diagonal {
            (0..d)
                .filter(|&i| m.get(i, i) != 0.0)
                .map(|i| (bld.var(zb, i), coeff * m.get(i, i)))
                .collect()
        } else {
            bld.matrix_terms(zb, m, coeff)
        }
    };
    let mut k = 0;
    for c in &prog.constraints {
        let mut row = terms(&bld, &c.matrix, 1.0);
        if c.sense == Sense::Le {
            // Slack in the units of the normalized row.
            let norm = row.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
            row.push((bld.var(slack, k), if norm > 0.0 { norm } else { 1.0 }));
            k += 1;
        }
        bld.add_eq(row, c.rhs);
    }
    if let Some(tau) = prog.trace_normalization {
        bld.add_eq(terms(&bld, &SymMatrix::identity(d), 1.0), tau);
    }
    bld.add_objective(terms(&bld, &prog.objective, 1.0));
    let sol = solve_cone(&bld.build(), &AdmmSettings::new(eps, max_iter));
    let z = if prog.diagonal {
        SymMatrix::diag(&bld.block_values(&sol.x, zb))
    } else {
        bld.block_matrix(&sol.x, zb)
    };
    let nc = prog.constraints.len();
    let y: Vec<f64> = (0..nc).map(|i| -sol.y[i]).collect();
    let trace_multiplier = prog.trace_normalization.map(|_| -sol.y[nc]);
    Ok(SdpSolution {
        objective_value: prog.objective.inner(&z),
        z,
        y,
        trace_multiplier,
        dual_value: sol.dual_objective,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        gap: sol.gap,
        status: sol.status,
        iterations: sol.iterations,
    })
}

/// `E_nn`, the matrix selecting the homogenizing entry.
pub fn corner(n1: usize) -> SymMatrix {
    let mut d = vec![0.0; n1];
    d[n1 - 1] = 1.0;
    SymMatrix::diag(&d)
}

/// `Sym(e_i e_jᵀ)`; `⟨unit_sym(i,j), Z⟩ = Z_ij`.
pub fn unit_sym(n: usize, i: usize, j: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |a, b| {
        if (a == i && b == j) || (a == j && b == i) {
            if i == j {
                1.0
            } else {
                0.5
            }
        } else {
            0.0
        }
    })
}

/// Solves the projected Shor relaxation
/// `min ⟨M_obj, Z⟩ s.t. ⟨M_i, Z⟩ ≤ 0 (i ∈ I), ⟨M_i, Z⟩ = 0 (i ∈ E), Z_{n+1,n+1} = 1, Z ⪰ 0`.
pub fn solve_opt_sdp(inst: &QcqpInstance, eps: f64) -> Result<SdpSolution> {
    solve(&shor_program(inst), eps, DEFAULT_MAX_ITER)
}

pub fn shor_program(inst: &QcqpInstance) -> ConicProgram {
    let mut prog = ConicProgram::new(inst.objective_matrix());
    for (m, s) in inst.homogenize() {
        prog.constraints.push(LinearConstraint {
            matrix: m,
            sense: s,
            rhs: 0.0,
        });
    }
    prog.eq(corner(inst.n + 1), 1.0)
}

/// The point `x` read off the last column of a relaxation solution.
pub fn relaxation_point(z: &SymMatrix) -> DVector<f64> {
    let n = z.dim() - 1;
    DVector::from_fn(n, |i, _| z.get(i, n) / z.get(n, n))
}

#[derive(Clone, Debug, Serialize)]
pub struct Membership {
    pub member: bool,
    /// Smallest achievable largest violation of the relaxation constraints.
    pub violation: f64,
    pub status: SolveStatus,
    pub warning: Option<String>,
}

/// Membership of `(x, t)` in the projected relaxation of the epigraph.
///
/// Solves `min s` over `Z = [[X, x], [xᵀ, 1]] ⪰ 0` with every relaxed
/// constraint and `⟨M_obj, Z⟩ − t` bounded above by `s`, `s ≥ −1`; the point
/// is a member iff `s ≤ tol`.
pub fn dsdp_membership(
    inst: &QcqpInstance,
    x: &DVector<f64>,
    t: f64,
    tol: f64,
) -> Result<Membership> {
    check_dim(inst.n, x.len())?;
    let n1 = inst.n + 1;
    let mut rows: Vec<SymMatrix> = Vec::new();
    for (m, s) in inst.homogenize() {
        if s == Sense::Eq {
            rows.push(-&m);
        }
        rows.push(m);
    }
    let mut obj = inst.objective_matrix();
    obj = &obj - &corner(n1).scale(t);
    rows.push(obj);
    let mut bld = ConeBuilder::new();
    let zb = bld.psd(n1);
    let sp = bld.nonneg(1);
    let sl = bld.nonneg(rows.len());
    for (k, m) in rows.iter().enumerate() {
        let scale = 1.0 / m.frobenius_norm().max(1.0);
        let mut r = bld.matrix_terms(zb, m, scale);
        r.push((bld.var(sp, 0), -1.0));
        r.push((bld.var(sl, k), 1.0));
        bld.add_eq(r, -1.0);
    }
    for i in 0..inst.n {
        bld.add_eq(vec![bld.entry_term(zb, i, inst.n, 1.0)], x[i]);
    }
    bld.add_eq(vec![bld.entry_term(zb, inst.n, inst.n, 1.0)], 1.0);
    bld.add_objective(vec![(bld.var(sp, 0), 1.0)]);
    let settings = AdmmSettings::new((tol * 0.1).min(DEFAULT_EPS), DEFAULT_MAX_ITER);
    let sol = solve_cone(&bld.build(), &settings);
    let z = bld.block_matrix(&sol.x, zb);
    let violation = rows
        .iter()
        .map(|m| m.inner(&z) / m.frobenius_norm().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let fixed = (0..inst.n)
        .map(|i| (z.get(i, inst.n) - x[i]).abs())
        .fold((z.get(inst.n, inst.n) - 1.0).abs(), f64::max);
    let ok = sol.status == SolveStatus::Optimal;
    Ok(Membership {
        member: ok && violation <= tol && fixed <= tol,
        violation: violation.max(fixed),
        status: sol.status,
        warning: if ok {
            None
        } else {
            Some(format!("solver stopped with {:?}", sol.status))
        },
    })
}

/// Recovers a vector `z` with `z zᵀ ≈ Z`, or a rank-one piece of `Z`
/// feasible for a single constraint matrix.
pub fn extract_rank_one(z: &SymMatrix, mset: &[SymMatrix], tol: f64) -> Option<DVector<f64>> {
    let spec = eig_sym(z);
    let n = z.dim();
    let s1 = spec.values[n - 1];
    if s1 <= 0.0 {
        return None;
    }
    let v1 = spec.vector(n - 1);
    let s2 = if n > 1 {
        spec.values[n - 2].max(0.0)
    } else {
        0.0
    };
    if s2 / s1 <= tol {
        return Some(v1 * s1.sqrt());
    }
    if mset.len() != 1 {
        return None;
    }
    let m = &mset[0];
    let p = v1 * s1.sqrt();
    let q = spec.vector(n - 2) * s2.sqrt();
    let target = 0.5 * (m.quad(&p) + m.quad(&q));
    // z(α) = (p + α q)/√(1+α²); zᵀMz = target is the quadratic
    // (qMq − target) α² + 2 (pMq) α + (pMp − target) = 0.
    let a = m.quad(&q) - target;
    let b = 2.0 * p.dot(&m.mul_vec(&q));
    let c = m.quad(&p) - target;
    let alpha = if a.abs() < 1e-14 * (1.0 + b.abs() + c.abs()) {
        if b.abs() < 1e-14 {
            0.0
        } else {
            -c / b
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        (-b + disc.sqrt()) / (2.0 * a)
    };
    let zv = (&p + &q * alpha) / (1.0 + alpha * alpha).sqrt();
    if m.quad(&zv) <= tol * (1.0 + m.frobenius_norm() * zv.norm_squared()) {
        Some(zv)
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    NonNeg,
    Free,
}

/// `max t s.t. base + Σ w_k M_k ⪰ t I` with optional unit-sum normalization
/// of the nonnegative weights, a box `|w_k| ≤ bound`, and a cap on `t`.
#[derive(Clone, Debug)]
pub struct MaxMinEig {
    pub base: Option<SymMatrix>,
    pub terms: Vec<(SymMatrix, WeightKind)>,
    pub unit_sum: bool,
    pub weight_bound: Option<f64>,
    pub t_cap: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxMinEigResult {
    pub weights: Vec<f64>,
    pub t: f64,
    /// Smallest eigenvalue of the combination evaluated directly at `weights`.
    pub min_eig: f64,
    pub status: SolveStatus,
}

impl MaxMinEig {
    pub fn unit_sum(mats: &[SymMatrix]) -> Self {
        MaxMinEig {
            base: None,
            terms: mats
                .iter()
                .map(|m| (m.clone(), WeightKind::NonNeg))
                .collect(),
            unit_sum: true,
            weight_bound: None,
            t_cap: None,
        }
    }

    pub fn combination(&self, w: &[f64]) -> SymMatrix {
        let d = self.dim();
        let mut acc = self.base.clone().unwrap_or_else(|| SymMatrix::zeros(d));
        for ((m, _), wk) in self.terms.iter().zip(w) {
            acc = &acc + &m.scale(*wk);
        }
        acc
    }

    fn dim(&self) -> usize {
        self.base
            .as_ref()
            .map(|b| b.dim())
            .unwrap_or_else(|| self.terms[0].0.dim())
    }

    pub fn solve(&self, eps: f64) -> MaxMinEigResult {
        let d = self.dim();
        let k = self.terms.len();
        let mut bld = ConeBuilder::new();
        let nonneg_idx: Vec<usize> = (0..k)
            .filter(|&i| self.terms[i].1 == WeightKind::NonNeg)
            .collect();
        let free_idx: Vec<usize> = (0..k)
            .filter(|&i| self.terms[i].1 == WeightKind::Free)
            .collect();
        let wn = bld.nonneg(nonneg_idx.len());
        let wf = bld.free(free_idx.len());
        let t = bld.free(1);
        let s = bld.psd(d);
        let mut var_of = vec![0; k];
        for (j, &i) in nonneg_idx.iter().enumerate() {
            var_of[i] = bld.var(wn, j);
        }
        for (j, &i) in free_idx.iter().enumerate() {
            var_of[i] = bld.var(wf, j);
        }
        let tv = bld.var(t, 0);
        for a in 0..d {
            for b in a..d {
                let mut row: Vec<(usize, f64)> = Vec::new();
                for (i, (m, _)) in self.terms.iter().enumerate() {
                    if m.get(a, b) != 0.0 {
                        row.push((var_of[i], m.get(a, b)));
                    }
                }
                if a == b {
                    row.push((tv, -1.0));
                }
                row.push(bld.entry_term(s, a, b, -1.0));
                let rhs = -self.base.as_ref().map(|m| m.get(a, b)).unwrap_or(0.0);
                bld.add_eq(row, rhs);
            }
        }
        if self.unit_sum && !nonneg_idx.is_empty() {
            bld.add_eq(nonneg_idx.iter().map(|&i| (var_of[i], 1.0)).collect(), 1.0);
        }
        if let Some(u) = self.weight_bound {
            let sl = bld.nonneg(k + free_idx.len());
            let mut j = 0;
            for (&v, term) in var_of.iter().zip(&self.terms) {
                bld.add_eq(vec![(v, 1.0), (bld.var(sl, j), 1.0)], u);
                j += 1;
                if term.1 == WeightKind::Free {
                    bld.add_eq(vec![(v, -1.0), (bld.var(sl, j), 1.0)], u);
                    j += 1;
                }
            }
        }
        if let Some(cap) = self.t_cap {
            let sl = bld.nonneg(1);
            bld.add_eq(vec![(tv, 1.0), (bld.var(sl, 0), 1.0)], cap);
        }
        bld.add_objective(vec![(tv, -1.0)]);
        let sol = solve_cone(&bld.build(), &AdmmSettings::new(eps, DEFAULT_MAX_ITER));
        let weights: Vec<f64> = (0..k)
            .map(|i| {
                let w = sol.x[var_of[i]];
                if self.terms[i].1 == WeightKind::NonNeg {
                    w.max(0.0)
                } else {
                    w
                }
            })
            .collect();
        let min_eig = self.combination(&weights).min_eigenvalue();
        MaxMinEigResult {
            weights,
            t: sol.x[tv],
            min_eig,
            status: sol.status,
        }
    }
}
