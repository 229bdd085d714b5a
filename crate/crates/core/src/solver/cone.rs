//! Vectorized conic programs `min cᵀx s.t. Ax = b, x ∈ K` over products of
//! PSD, nonnegative and free blocks, solved by an alternating-direction
//! augmented Lagrangian method on the dual.
//!
//! One iteration, for penalty `μ`:
//!
//! ```text
//! y ← (AAᵀ)⁺ (μ(b − Ax) + A(c − s))
//! V ← c − Aᵀy − μx
//! s ← Π_{K*}(V)
//! x ← (s − V)/μ
//! ```
//!
//! `x` stays in `K` and `s` in `K*` with `xᵀs = 0` after every step, so the
//! duality gap is controlled by the two feasibility residuals.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg::{eig_sym, pinv_sym, SymMatrix};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Psd(usize),
    NonNeg(usize),
    Free(usize),
}

impl Block {
    pub fn len(&self) -> usize {
        match *self {
            Block::Psd(d) => d * (d + 1) / 2,
            Block::NonNeg(k) | Block::Free(k) => k,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    InfeasibleLikely,
    UnboundedLikely,
}

#[derive(Clone, Debug)]
pub struct AdmmSettings {
    pub eps: f64,
    pub max_iter: usize,
    pub rebalance_every: usize,
    pub rebalance_ratio: f64,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        AdmmSettings {
            eps: 1e-7,
            max_iter: 50_000,
            rebalance_every: 100,
            rebalance_ratio: 10.0,
        }
    }
}

impl AdmmSettings {
    pub fn new(eps: f64, max_iter: usize) -> Self {
        AdmmSettings {
            eps,
            max_iter,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConeProgram {
    pub blocks: Vec<Block>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct ConeSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

/// Packs the upper triangle with off-diagonal entries scaled by √2, so that
/// `svec(X)·svec(Y) = ⟨X, Y⟩`.
pub fn svec(m: &SymMatrix) -> Vec<f64> {
    let d = m.dim();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for j in 0..d {
        for i in 0..=j {
            out.push(if i == j {
                m.get(i, i)
            } else {
                SQRT2 * m.get(i, j)
            });
        }
    }
    out
}

pub fn smat(v: &[f64], d: usize) -> SymMatrix {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for j in 0..d {
        for i in 0..=j {
            let val = if i == j { v[k] } else { v[k] / SQRT2 };
            m[(i, j)] = val;
            m[(j, i)] = val;
            k += 1;
        }
    }
    SymMatrix::new(m)
}

/// Position of entry `(i, j)` inside an svec vector.
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

impl ConeProgram {
    pub fn n_vars(&self) -> usize {
        self.blocks.iter().map(Block::len).sum()
    }

    fn project_dual_cone(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        let mut off = 0;
        for blk in &self.blocks {
            let len = blk.len();
            match *blk {
                Block::Free(_) => out.rows_mut(off, len).fill(0.0),
                Block::NonNeg(_) => {
                    for k in off..off + len {
                        out[k] = out[k].max(0.0);
                    }
                }
                Block::Psd(d) => {
                    let m = smat(&v.as_slice()[off..off + len], d);
                    let spec = eig_sym(&m);
                    let clipped = spec.values.map(|l| l.max(0.0));
                    let p = SymMatrix::new(
                        &spec.vectors * DMatrix::from_diagonal(&clipped) * spec.vectors.transpose(),
                    );
                    out.rows_mut(off, len).copy_from_slice(&svec(&p));
                }
            }
            off += len;
        }
        out
    }
}

struct Residuals {
    primal: f64,
    dual: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

fn residuals(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    s: &DVector<f64>,
) -> Residuals {
    let rp = (a * x - b).norm() / (1.0 + b.norm());
    let rd = (a.transpose() * y + s - c).norm() / (1.0 + c.norm());
    let pobj = c.dot(x);
    let dobj = b.dot(y);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    Residuals {
        primal: rp,
        dual: rd,
        gap,
        pobj,
        dobj,
    }
}

/// Solves `prog` to relative accuracy `settings.eps`.
pub fn solve_cone(prog: &ConeProgram, settings: &AdmmSettings) -> ConeSolution {
    let nv = prog.n_vars();
    let m = prog.a.nrows();
    assert_eq!(
        prog.a.ncols(),
        nv,
        "constraint matrix width must match the cone size"
    );
    assert_eq!(prog.b.len(), m);
    assert_eq!(prog.c.len(), nv);

    // Row equilibration and objective/rhs scaling.
    let row_scale = DVector::from_fn(m, |i, _| {
        let nrm = prog.a.row(i).norm();
        if nrm > 0.0 {
            1.0 / nrm
        } else {
            1.0
        }
    });
    let a_s = DMatrix::from_fn(m, nv, |i, j| prog.a[(i, j)] * row_scale[i]);
    let b_r = prog.b.component_mul(&row_scale);
    let eta_b = if b_r.norm() > 0.0 { b_r.norm() } else { 1.0 };
    let eta_c = if prog.c.norm() > 0.0 {
        prog.c.norm()
    } else {
        1.0
    };
    let b_s = &b_r / eta_b;
    let c_s = &prog.c / eta_c;

    let gram = SymMatrix::new(&a_s * a_s.transpose());
    let gram_inv = if m > 0 {
        pinv_sym(&gram, 1e-12)
    } else {
        DMatrix::zeros(0, 0)
    };

    let mut x = DVector::zeros(nv);
    let mut y = DVector::zeros(m);
    let mut s = DVector::zeros(nv);
    let mut mu = 1.0;
    // Each penalty change doubles the wait before the next one.
    let mut interval = settings.rebalance_every.max(1);
    let mut next_rebalance = interval;

    let unscale = |x: &DVector<f64>, y: &DVector<f64>, s: &DVector<f64>| {
        (x * eta_b, y.component_mul(&row_scale) * eta_c, s * eta_c)
    };

    let mut status = SolveStatus::MaxIter;
    let mut iterations = settings.max_iter;
    let mut last = None;
    for it in 0..settings.max_iter {
        let rhs = (&b_s - &a_s * &x) * mu + &a_s * (&c_s - &s);
        y = &gram_inv * rhs;
        let v = &c_s - a_s.transpose() * &y - &x * mu;
        s = prog.project_dual_cone(&v);
        x = (&s - &v) / mu;

        let check = it % 10 == 9 || it + 1 == settings.max_iter;
        if check {
            let (xu, yu, su) = unscale(&x, &y, &s);
            let r = residuals(&prog.a, &prog.b, &prog.c, &xu, &yu, &su);
            if r.primal <= settings.eps && r.dual <= settings.eps && r.gap <= settings.eps {
                status = SolveStatus::Optimal;
                iterations = it + 1;
                last = Some(r);
                break;
            }
            let blown = x.amax() > 1e12 || y.amax() > 1e12;
            if blown {
                status = if y.amax() > x.amax() {
                    SolveStatus::InfeasibleLikely
                } else {
                    SolveStatus::UnboundedLikely
                };
                iterations = it + 1;
                last = Some(r);
                break;
            }
            last = Some(r);
        }
        if it + 1 == next_rebalance {
            let rp = (&a_s * &x - &b_s).norm() / (1.0 + b_s.norm());
            let rd = (a_s.transpose() * &y + &s - &c_s).norm() / (1.0 + c_s.norm());
            let old = mu;
            if rp > settings.rebalance_ratio * rd {
                mu = (mu * 2.0).min(1e6);
            } else if rd > settings.rebalance_ratio * rp {
                mu = (mu * 0.5).max(1e-6);
            }
            if mu != old {
                interval *= 2;
            }
            next_rebalance += interval;
        }
    }
    let (xu, yu, su) = unscale(&x, &y, &s);
    let r = last.unwrap_or_else(|| residuals(&prog.a, &prog.b, &prog.c, &xu, &yu, &su));
    if status == SolveStatus::MaxIter {
        // Divergence patterns: a growing dual objective with small dual
        // residual suggests primal infeasibility, and symmetrically.
        let scale = 1.0 + r.pobj.abs().min(r.dobj.abs());
        if r.primal > settings.eps.sqrt() && r.dual <= settings.eps.sqrt() && r.dobj > 1e4 * scale {
            status = SolveStatus::InfeasibleLikely;
        } else if r.dual > settings.eps.sqrt()
            && r.primal <= settings.eps.sqrt()
            && r.pobj < -1e4 * scale
        {
            status = SolveStatus::UnboundedLikely;
        }
    }
    ConeSolution {
        x: xu,
        y: yu,
        s: su,
        status,
        primal_residual: r.primal,
        dual_residual: r.dual,
        gap: r.gap,
        primal_objective: r.pobj,
        dual_objective: r.dobj,
        iterations,
    }
}

/// Identifies a block inside a [`ConeBuilder`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockId(usize);

/// Incremental construction of a [`ConeProgram`] from matrix-valued and
/// scalar variables.
#[derive(Clone, Debug, Default)]
pub struct ConeBuilder {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    n_vars: usize,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
    objective: Vec<(usize, f64)>,
}

impl ConeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, b: Block) -> BlockId {
        self.blocks.push(b);
        self.offsets.push(self.n_vars);
        self.n_vars += b.len();
        BlockId(self.blocks.len() - 1)
    }

    pub fn psd(&mut self, d: usize) -> BlockId {
        self.push(Block::Psd(d))
    }

    pub fn nonneg(&mut self, k: usize) -> BlockId {
        self.push(Block::NonNeg(k))
    }

    pub fn free(&mut self, k: usize) -> BlockId {
        self.push(Block::Free(k))
    }

    /// Global index of scalar `k` of a nonnegative or free block.
    pub fn var(&self, blk: BlockId, k: usize) -> usize {
        debug_assert!(k < self.blocks[blk.0].len());
        self.offsets[blk.0] + k
    }

    /// Terms representing `⟨m, X⟩` for the PSD block `blk`.
    pub fn matrix_terms(&self, blk: BlockId, m: &SymMatrix, coeff: f64) -> Vec<(usize, f64)> {
        let off = self.offsets[blk.0];
        svec(m)
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .map(|(k, v)| (off + k, coeff * v))
            .collect()
    }

    /// Term representing the entry `X_ij` of the PSD block `blk`.
    pub fn entry_term(&self, blk: BlockId, i: usize, j: usize, coeff: f64) -> (usize, f64) {
        let off = self.offsets[blk.0];
        let scale = if i == j { 1.0 } else { 1.0 / SQRT2 };
        (off + svec_index(i, j), coeff * scale)
    }

    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push((terms, rhs));
    }

    pub fn add_objective(&mut self, terms: Vec<(usize, f64)>) {
        self.objective.extend(terms);
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn build(&self) -> ConeProgram {
        let m = self.rows.len();
        let mut a = DMatrix::zeros(m, self.n_vars);
        let mut b = DVector::zeros(m);
        for (i, (terms, rhs)) in self.rows.iter().enumerate() {
            for &(k, v) in terms {
                a[(i, k)] += v;
            }
            b[i] = *rhs;
        }
        let mut c = DVector::zeros(self.n_vars);
        for &(k, v) in &self.objective {
            c[k] += v;
        }
        ConeProgram {
            blocks: self.blocks.clone(),
            a,
            b,
            c,
        }
    }

    pub fn block_matrix(&self, x: &DVector<f64>, blk: BlockId) -> SymMatrix {
        match self.blocks[blk.0] {
            Block::Psd(d) => {
                let off = self.offsets[blk.0];
                smat(&x.as_slice()[off..off + d * (d + 1) / 2], d)
            }
            _ => panic!("block is not a matrix block"),
        }
    }

    pub fn block_values(&self, x: &DVector<f64>, blk: BlockId) -> Vec<f64> {
        let off = self.offsets[blk.0];
        x.as_slice()[off..off + self.blocks[blk.0].len()].to_vec()
    }
}
