//! Dense two-phase simplex for the small linear programs behind the
//! polyhedral checks, where a decision is taken at a 1e-7 threshold and a
//! vertex solution is needed.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    NonNeg,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: DVector<f64>,
    pub value: f64,
}

/// Sparse row `Σ a_j x_j (kind) rhs`.
type Row = (Vec<(usize, f64)>, RowKind, f64);

/// `min cᵀx` subject to row constraints and per-variable sign restrictions.
#[derive(Clone, Debug, Default)]
pub struct Lp {
    kinds: Vec<VarKind>,
    c: Vec<f64>,
    rows: Vec<Row>,
}

impl Lp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self, kind: VarKind, cost: f64) -> usize {
        self.kinds.push(kind);
        self.c.push(cost);
        self.kinds.len() - 1
    }

    pub fn vars(&mut self, count: usize, kind: VarKind, cost: f64) -> Vec<usize> {
        (0..count).map(|_| self.var(kind, cost)).collect()
    }

    pub fn row(&mut self, terms: Vec<(usize, f64)>, kind: RowKind, rhs: f64) {
        self.rows.push((terms, kind, rhs));
    }

    pub fn n_vars(&self) -> usize {
        self.kinds.len()
    }

    pub fn solve(&self) -> LpSolution {
        // Standard form columns: one per nonnegative variable, two per free
        // variable, one slack per inequality row.
        let n = self.kinds.len();
        let mut col_of = Vec::with_capacity(n);
        let mut ncols = 0;
        for k in &self.kinds {
            col_of.push(ncols);
            ncols += if *k == VarKind::Free { 2 } else { 1 };
        }
        let n_struct = ncols;
        let n_slack = self.rows.iter().filter(|r| r.1 != RowKind::Eq).count();
        ncols += n_slack;
        let m = self.rows.len();
        let mut a = DMatrix::zeros(m, ncols);
        let mut b = DVector::zeros(m);
        let mut slack = n_struct;
        for (i, (terms, kind, rhs)) in self.rows.iter().enumerate() {
            for &(v, coef) in terms {
                a[(i, col_of[v])] += coef;
                if self.kinds[v] == VarKind::Free {
                    a[(i, col_of[v] + 1)] -= coef;
                }
            }
            match kind {
                RowKind::Le => {
                    a[(i, slack)] = 1.0;
                    slack += 1;
                }
                RowKind::Ge => {
                    a[(i, slack)] = -1.0;
                    slack += 1;
                }
                RowKind::Eq => {}
            }
            b[i] = *rhs;
            if b[i] < 0.0 {
                b[i] = -b[i];
                a.row_mut(i).neg_mut();
            }
        }
        let mut cost = DVector::zeros(ncols);
        for (v, &cv) in self.c.iter().enumerate() {
            cost[col_of[v]] = cv;
            if self.kinds[v] == VarKind::Free {
                cost[col_of[v] + 1] = -cv;
            }
        }
        let (status, xs) = two_phase(&a, &b, &cost);
        let mut x = DVector::zeros(n);
        if let Some(xs) = &xs {
            for (v, k) in self.kinds.iter().enumerate() {
                x[v] = xs[col_of[v]]
                    - if *k == VarKind::Free {
                        xs[col_of[v] + 1]
                    } else {
                        0.0
                    };
            }
        }
        let value = match status {
            LpStatus::Optimal => self.c.iter().zip(x.iter()).map(|(c, x)| c * x).sum(),
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        LpSolution { status, x, value }
    }
}

struct Tableau {
    t: DMatrix<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.t[(r, col)];
        let w = self.t.ncols();
        for j in 0..w {
            self.t[(r, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i != r {
                let f = self.t[(i, col)];
                if f != 0.0 {
                    for j in 0..w {
                        let v = self.t[(r, j)];
                        self.t[(i, j)] -= f * v;
                    }
                }
            }
        }
        self.basis[r] = col;
    }

    /// Minimizes the objective held in the last row over the columns in
    /// `allowed`. Returns false on unboundedness.
    fn optimize(&mut self, allowed: usize) -> bool {
        let m = self.basis.len();
        let rhs = self.t.ncols() - 1;
        let mut degenerate_run = 0;
        for _ in 0..50_000 {
            let bland = degenerate_run > 50;
            let mut enter = None;
            let mut best = -PIVOT_TOL;
            for j in 0..allowed {
                let rc = self.t[(m, j)];
                if rc < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(col) = enter else { return true };
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for i in 0..m {
                let aij = self.t[(i, col)];
                if aij > PIVOT_TOL {
                    let r = self.t[(i, rhs)] / aij;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            r < ratio - 1e-12
                                || (r <= ratio + 1e-12 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        ratio = r;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else { return false };
            degenerate_run = if ratio.abs() < 1e-12 {
                degenerate_run + 1
            } else {
                0
            };
            self.pivot(r, col);
        }
        true
    }
}

fn two_phase(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    cost: &DVector<f64>,
) -> (LpStatus, Option<DVector<f64>>) {
    let (m, n) = a.shape();
    // Columns: structural n, artificial m, rhs.
    let mut t = DMatrix::zeros(m + 1, n + m + 1);
    t.view_mut((0, 0), (m, n)).copy_from(a);
    for i in 0..m {
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = b[i];
    }
    // Phase-one objective: sum of artificials, expressed in nonbasic terms.
    for j in 0..n {
        t[(m, j)] = -(0..m).map(|i| a[(i, j)]).sum::<f64>();
    }
    t[(m, n + m)] = -b.sum();
    let mut tab = Tableau {
        t,
        basis: (n..n + m).collect(),
    };
    tab.optimize(n + m);
    let infeas = -tab.t[(m, n + m)];
    let scale = 1.0 + b.amax();
    if infeas > FEAS_TOL * scale {
        return (LpStatus::Infeasible, None);
    }
    // Drive artificial variables out of the basis where possible.
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| tab.t[(r, j)].abs() > 1e-9) {
                tab.pivot(r, col);
            }
        }
    }
    // Phase two: install the true objective.
    for j in 0..=n + m {
        tab.t[(m, j)] = 0.0;
    }
    for j in 0..n {
        tab.t[(m, j)] = cost[j];
    }
    for r in 0..m {
        let bc = tab.basis[r];
        if bc < n {
            let f = tab.t[(m, bc)];
            if f != 0.0 {
                for j in 0..=n + m {
                    let v = tab.t[(r, j)];
                    tab.t[(m, j)] -= f * v;
                }
            }
        }
    }
    // Artificial columns are excluded from entering in phase two; rows whose
    // artificial stayed basic are redundant and sit at zero level.
    if !tab.optimize(n) {
        return (LpStatus::Unbounded, None);
    }
    let mut x = DVector::zeros(n);
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.t[(r, n + m)].max(0.0);
        }
    }
    (LpStatus::Optimal, Some(x))
}
