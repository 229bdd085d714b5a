//! Brute-force reference values at desk scale: grid minimization, sampled
//! rank-one minimization on the sphere, and sampled convex hull membership.
//! All of these are one-sided evidence.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::{QcqpInstance, QuadraticForm, Sense};
use crate::rog::LmiSet;
use crate::solver::lp::{Lp, LpStatus, RowKind, VarKind};
use crate::solver::{
    corner, dsdp_membership, relaxation_point, solve, solve_opt_sdp, ConicProgram,
    LinearConstraint, SolveStatus, DEFAULT_EPS,
};

/// Largest dimension handled by the grid oracles.
pub const GRID_MAX_DIM: usize = 3;
pub const SPHERE_FEAS_TOL: f64 = 1e-6;
pub const CONV_TOL: f64 = 1e-2;

#[derive(Clone, Debug, Serialize)]
pub struct GridResult {
    /// `+∞` when no grid point is accepted.
    pub value: f64,
    pub argmin: Option<Vec<f64>>,
    pub accepted: usize,
    pub resolution: f64,
    pub feas_tol: f64,
}

struct FormEval<'a> {
    forms: Vec<(&'a QuadraticForm, Sense)>,
}

impl<'a> FormEval<'a> {
    fn new(inst: &'a QcqpInstance) -> Self {
        FormEval {
            forms: inst.constraints().collect(),
        }
    }

    fn feasible(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.forms.iter().all(|(q, s)| {
            let v = q.eval(x);
            match s {
                Sense::Le => v <= tol,
                Sense::Eq => v.abs() <= tol,
            }
        })
    }

    /// Feasibility up to `tol` plus the first-order change `‖∇q‖·h·√n/2`
    /// within half a grid cell of spacing `h`.
    fn near_feasible(&self, x: &DVector<f64>, h: f64, tol: f64) -> bool {
        let reach = 0.5 * h * (x.len() as f64).sqrt();
        self.forms.iter().all(|(q, s)| {
            let v = q.eval(x);
            let slack = tol + q.gradient(x).norm() * reach;
            match s {
                Sense::Le => v <= slack,
                Sense::Eq => v.abs() <= slack,
            }
        })
    }
}

/// Feasibility slack `max(1e-8, n·max‖A_i‖₂·h²)` for grid spacing `h`.
pub fn grid_tolerance(inst: &QcqpInstance, res: f64) -> f64 {
    let curv = inst
        .constraints()
        .map(|(q, _)| q.a.spectral_norm())
        .fold(0.0, f64::max)
        * inst.n as f64;
    (curv * res * res).max(1e-8)
}

fn grid_axis(lo: f64, hi: f64, res: f64) -> (i64, i64) {
    (
        (lo / res - 1e-9).ceil() as i64,
        (hi / res + 1e-9).floor() as i64,
    )
}

pub(crate) fn for_each_grid_point(
    lo: &[f64],
    hi: &[f64],
    res: f64,
    mut f: impl FnMut(&DVector<f64>),
) {
    let n = lo.len();
    let axes: Vec<(i64, i64)> = (0..n).map(|j| grid_axis(lo[j], hi[j], res)).collect();
    if axes.iter().any(|(a, b)| a > b) {
        return;
    }
    let mut idx: Vec<i64> = axes.iter().map(|a| a.0).collect();
    let mut x = DVector::zeros(n);
    loop {
        for j in 0..n {
            x[j] = idx[j] as f64 * res;
        }
        f(&x);
        let mut j = 0;
        loop {
            if j == n {
                return;
            }
            idx[j] += 1;
            if idx[j] <= axes[j].1 {
                break;
            }
            idx[j] = axes[j].0;
            j += 1;
        }
    }
}

/// Exhaustive scan of the grid of integer multiples of `res` inside the box.
pub fn grid_opt(inst: &QcqpInstance, lo: &[f64], hi: &[f64], res: f64) -> Result<GridResult> {
    if inst.n > GRID_MAX_DIM {
        return Err(Error::SizeCap(format!(
            "grid oracle supports n <= {GRID_MAX_DIM}, got {}",
            inst.n
        )));
    }
    if res.is_nan() || res <= 0.0 || lo.len() != inst.n || hi.len() != inst.n {
        return Err(Error::Input(
            "grid box must match the dimension and the resolution must be positive".into(),
        ));
    }
    let tol = grid_tolerance(inst, res);
    let ev = FormEval::new(inst);
    let mut best = f64::INFINITY;
    let mut arg = None;
    let mut accepted = 0;
    for_each_grid_point(lo, hi, res, |x| {
        if ev.feasible(x, tol) {
            accepted += 1;
            let v = inst.objective.eval(x);
            if v < best {
                best = v;
                arg = Some(x.iter().copied().collect());
            }
        }
    });
    Ok(GridResult {
        value: best,
        argmin: arg,
        accepted,
        resolution: res,
        feas_tol: tol,
    })
}

/// Coarse scan of a centered box followed by finer scans around the best
/// accepted points until the spacing reaches `target_res`.
pub fn grid_opt_refined(inst: &QcqpInstance, radius: f64, target_res: f64) -> Result<GridResult> {
    let n = inst.n;
    if n == 0 {
        let feasible = FormEval::new(inst).feasible(&DVector::zeros(0), 1e-8);
        let value = if feasible {
            inst.objective.c
        } else {
            f64::INFINITY
        };
        return Ok(GridResult {
            value,
            argmin: feasible.then(Vec::new),
            accepted: feasible as usize,
            resolution: target_res,
            feas_tol: 1e-8,
        });
    }
    let budget = 2.0e6_f64;
    let per_axis = budget.powf(1.0 / n as f64);
    let mut res = aligned_res(target_res, 2.0 * radius / per_axis);
    let lo = vec![-radius; n];
    let hi = vec![radius; n];
    let coarse = grid_opt(inst, &lo, &hi, res)?;
    let mut accepted = coarse.accepted;
    // Values count only at the target spacing; coarser stages supply centers.
    let mut best = if res <= target_res * (1.0 + 1e-9) {
        coarse
    } else {
        GridResult {
            value: f64::INFINITY,
            argmin: None,
            accepted: 0,
            resolution: target_res,
            feas_tol: grid_tolerance(inst, target_res),
        }
    };
    let mut centers = top_points(inst, &lo, &hi, res, 16);
    while res > target_res * (1.0 + 1e-9) {
        let next = aligned_res(target_res, res / 5.0)
            .min(res / 2.0)
            .max(target_res);
        let next = aligned_res(target_res, next);
        let last = next <= target_res * (1.0 + 1e-9);
        let mut new_centers = Vec::new();
        for c in &centers {
            let lo: Vec<f64> = c.iter().map(|v| (v - 2.0 * res).max(-radius)).collect();
            let hi: Vec<f64> = c.iter().map(|v| (v + 2.0 * res).min(radius)).collect();
            let r = grid_opt(inst, &lo, &hi, next)?;
            accepted += r.accepted;
            if last && r.value < best.value {
                best = r.clone();
            }
            new_centers.extend(top_points(inst, &lo, &hi, next, 2));
        }
        centers = new_centers;
        res = next;
    }
    best.resolution = res;
    best.feas_tol = grid_tolerance(inst, res);
    let fine = target_res / 10.0;
    let mut starts = centers.clone();
    starts.extend(best.argmin.clone());
    for c in &starts {
        let x0 = DVector::from_column_slice(c);
        for x in kkt_polish(inst, &x0, res) {
            let v = inst.objective.eval(&x);
            if v < best.value {
                best.value = v;
                best.argmin = Some(x.iter().copied().collect());
            }
        }
    }
    for c in centers.iter().take(16) {
        let lo: Vec<f64> = c.iter().map(|v| (v - 2.0 * res).max(-radius)).collect();
        let hi: Vec<f64> = c.iter().map(|v| (v + 2.0 * res).min(radius)).collect();
        let r = grid_opt(inst, &lo, &hi, fine)?;
        accepted += r.accepted;
        if r.value < best.value {
            best = GridResult {
                resolution: fine,
                ..r
            };
        }
    }
    best.accepted = accepted;
    Ok(best)
}

const POLISH_FEAS: f64 = 1e-9;

/// Feasible points (to `1e-9`) reached by Newton's method on the Lagrange
/// system of `min q_obj` with each subset of the constraints that are nearly
/// active at `x0` held at zero.
fn kkt_polish(inst: &QcqpInstance, x0: &DVector<f64>, h: f64) -> Vec<DVector<f64>> {
    let ev = FormEval::new(inst);
    let n = inst.n;
    let reach = h * (n as f64).sqrt();
    let mut eqs = Vec::new();
    let mut near = Vec::new();
    for (i, (q, s)) in ev.forms.iter().enumerate() {
        match s {
            Sense::Eq => eqs.push(i),
            Sense::Le
                if q.eval(x0).abs() <= q.gradient(x0).norm() * reach + grid_tolerance(inst, h) =>
            {
                near.push(i)
            }
            Sense::Le => {}
        }
    }
    near.truncate(4);
    let mut out = Vec::new();
    for mask in 0..1usize << near.len() {
        let mut active = eqs.clone();
        active.extend(
            (0..near.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| near[b]),
        );
        if active.len() > n {
            continue;
        }
        if let Some(x) = lagrange_newton(inst, &ev, &active, x0) {
            if ev.feasible(&x, POLISH_FEAS) {
                out.push(x);
            }
        }
    }
    out
}

fn lagrange_newton(
    inst: &QcqpInstance,
    ev: &FormEval,
    active: &[usize],
    x0: &DVector<f64>,
) -> Option<DVector<f64>> {
    let n = inst.n;
    let k = active.len();
    let obj = &inst.objective;
    let mut x = x0.clone();
    let mut jac0 = DMatrix::zeros(n, k);
    for (j, &i) in active.iter().enumerate() {
        jac0.set_column(j, &ev.forms[i].0.gradient(&x));
    }
    let mut lam = if k == 0 {
        DVector::zeros(0)
    } else {
        jac0.svd(true, true)
            .solve(&(-obj.gradient(&x)), 1e-12)
            .ok()?
    };
    for _ in 0..50 {
        let mut hess = obj.a.matrix() * 2.0;
        let mut grad = obj.gradient(&x);
        let mut jac = DMatrix::zeros(n, k);
        for (j, &i) in active.iter().enumerate() {
            let q = ev.forms[i].0;
            let g = q.gradient(&x);
            grad += &g * lam[j];
            hess += q.a.matrix() * (2.0 * lam[j]);
            jac.set_column(j, &g);
        }
        let mut r = DVector::zeros(n + k);
        r.rows_mut(0, n).copy_from(&grad);
        for (j, &i) in active.iter().enumerate() {
            r[n + j] = ev.forms[i].0.eval(&x);
        }
        if r.amax() <= 1e-13 * (1.0 + x.amax()) {
            return Some(x);
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&hess);
        kkt.view_mut((0, n), (n, k)).copy_from(&jac);
        kkt.view_mut((n, 0), (k, n)).copy_from(&jac.transpose());
        let step = kkt.lu().solve(&(-r))?;
        x += step.rows(0, n);
        lam += step.rows(n, k);
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    Some(x)
}

/// Smallest multiple `k·target ≥ min_res` whose grid still contains the
/// integers (`k` divides `1/target` when that is integral).
fn aligned_res(target: f64, min_res: f64) -> f64 {
    if min_res <= target {
        return target;
    }
    let m = (1.0 / target).round();
    if (m * target - 1.0).abs() <= 1e-9 && m >= 1.0 {
        let m = m as u64;
        if let Some(k) = (1..=m)
            .filter(|k| m.is_multiple_of(*k))
            .find(|&k| k as f64 * target >= min_res * (1.0 - 1e-12))
        {
            return k as f64 * target;
        }
    }
    target * (min_res / target).ceil()
}

/// Best `k` grid points under a first-order feasibility slack, so that cells
/// cut by the boundary near the optimum are kept as refinement centers.
fn top_points(inst: &QcqpInstance, lo: &[f64], hi: &[f64], res: f64, k: usize) -> Vec<Vec<f64>> {
    let tol = grid_tolerance(inst, res);
    let ev = FormEval::new(inst);
    let mut pts: Vec<(f64, Vec<f64>)> = Vec::new();
    for_each_grid_point(lo, hi, res, |x| {
        if ev.near_feasible(x, res, tol) {
            let v = inst.objective.eval(x);
            if pts.len() < k || v < pts[pts.len() - 1].0 {
                let pos = pts.partition_point(|p| p.0 <= v);
                pts.insert(pos, (v, x.iter().copied().collect()));
                pts.truncate(k);
            }
        }
    });
    pts.into_iter().map(|p| p.1).collect()
}

/// Upper bound on `‖x‖` over the feasible set from the relaxation
/// `max tr X`; `None` when the relaxation does not report a finite optimum.
pub fn feasible_radius(inst: &QcqpInstance) -> Option<f64> {
    let n1 = inst.n + 1;
    let obj = SymMatrix::from_fn(n1, |i, j| if i == j && i < inst.n { -1.0 } else { 0.0 });
    let mut prog = ConicProgram::new(obj);
    for (m, s) in inst.homogenize() {
        prog.constraints.push(LinearConstraint {
            matrix: m,
            sense: s,
            rhs: 0.0,
        });
    }
    let prog = prog.eq(corner(n1), 1.0);
    let sol = solve(&prog, 1e-6, 20_000).ok()?;
    (sol.status == SolveStatus::Optimal && sol.objective_value.is_finite())
        .then(|| (-sol.objective_value).max(0.0).sqrt())
}

/// Box radius used by the comparisons: the relaxation bound when available,
/// otherwise a multiple of the relaxation point norm.
pub fn default_radius(inst: &QcqpInstance, x_sdp: Option<&DVector<f64>>) -> f64 {
    let r = match feasible_radius(inst) {
        Some(r) => 1.02 * r + 0.02,
        None => 3.0 * (1.0 + x_sdp.map(|x| x.norm()).unwrap_or(1.0)),
    };
    r.clamp(0.1, 1e3)
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub opt_grid: f64,
    pub opt_sdp: f64,
    pub gap: f64,
    pub exactness_flag: bool,
    pub grid_argmin: Option<Vec<f64>>,
    pub box_radius: f64,
    pub resolution: f64,
    pub sdp_status: SolveStatus,
    pub evidence: &'static str,
}

pub fn compare_opt(inst: &QcqpInstance) -> Result<CompareReport> {
    compare_opt_at(inst, 0.01)
}

pub fn compare_opt_at(inst: &QcqpInstance, res: f64) -> Result<CompareReport> {
    if inst.n > GRID_MAX_DIM {
        return Err(Error::SizeCap(format!(
            "grid oracle supports n <= {GRID_MAX_DIM}, got {}",
            inst.n
        )));
    }
    let sdp = solve_opt_sdp(inst, DEFAULT_EPS)?;
    let x = relaxation_point(&sdp.z);
    let radius = default_radius(inst, Some(&x));
    let grid = grid_opt_refined(inst, radius, res)?;
    let gap = grid.value - sdp.objective_value;
    let flag = grid.value.is_finite() && gap.abs() <= 1e-2 * grid.value.abs().max(1.0);
    Ok(CompareReport {
        opt_grid: grid.value,
        opt_sdp: sdp.objective_value,
        gap,
        exactness_flag: flag,
        grid_argmin: grid.argmin,
        box_radius: radius,
        resolution: grid.resolution,
        sdp_status: sdp.status,
        evidence: "ONE_SIDED",
    })
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Quasi-uniform unit vectors in `R^d` (`d ≤ 4`): a Halton sequence with a
/// seeded Cranley–Patterson shift pushed through Box–Muller and normalized.
pub fn sphere_samples(d: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    assert!(
        (1..=4).contains(&d),
        "sphere sampling supports dimension 1..=4"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
    let bases = [2u64, 3, 5, 7];
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let u: Vec<f64> = (0..4)
            .map(|k| (radical_inverse(i, bases[k]) + shift[k]).fract())
            .collect();
        i += 1;
        let r1 = (-2.0 * (1.0 - u[0]).ln()).sqrt();
        let r2 = (-2.0 * (1.0 - u[2]).ln()).sqrt();
        let t1 = std::f64::consts::TAU * u[1];
        let t2 = std::f64::consts::TAU * u[3];
        let g = [r1 * t1.cos(), r1 * t1.sin(), r2 * t2.cos(), r2 * t2.sin()];
        let v = DVector::from_column_slice(&g[..d]);
        let nrm = v.norm();
        if nrm > 1e-12 {
            out.push(v / nrm);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereMin {
    /// `+∞` when no sample is feasible.
    pub value: f64,
    pub argmin: Option<Vec<f64>>,
    pub feasible: usize,
}

/// `min zᵀCz` over sampled unit `z` with `zzᵀ ∈ S(M)` up to 1e-6.
pub fn sphere_min_rank_one(
    mset: &LmiSet,
    c: &SymMatrix,
    samples: usize,
    seed: u64,
) -> Result<SphereMin> {
    let d = c.dim();
    if d > 4 {
        return Err(Error::SizeCap(format!(
            "sphere sampling supports dimension <= 4, got {d}"
        )));
    }
    let expanded = mset.expanded();
    let mut best = f64::INFINITY;
    let mut arg = None;
    let mut feasible = 0;
    for z in sphere_samples(d, samples, seed) {
        if expanded.iter().all(|m| m.quad(&z) <= SPHERE_FEAS_TOL) {
            feasible += 1;
            let v = c.quad(&z);
            if v < best {
                best = v;
                arg = Some(z.iter().copied().collect());
            }
        }
    }
    Ok(SphereMin {
        value: best,
        argmin: arg,
        feasible,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConvVerdict {
    LikelyIn,
    NotShown,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvMembership {
    pub verdict: ConvVerdict,
    /// Smallest ℓ∞ distance from the point to the sampled hull.
    pub deviation: f64,
    pub samples: usize,
}

/// Grid-aligned and random feasible epigraph samples `(x_k, q_obj(x_k))`.
pub fn epigraph_samples(
    inst: &QcqpInstance,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Vec<(DVector<f64>, f64)> {
    let n = inst.n;
    let ev = FormEval::new(inst);
    let mut out = Vec::new();
    if n == 0 {
        if ev.feasible(&DVector::zeros(0), 1e-8) {
            out.push((DVector::zeros(0), inst.objective.c));
        }
        return out;
    }
    let per_axis = (n_samples as f64).powf(1.0 / n as f64).max(2.0);
    // Spacing 1/N keeps the integers and zero on the grid.
    let res = 1.0 / ((per_axis / (2.0 * radius)).floor().max(1.0));
    let tol = grid_tolerance(inst, res);
    let lo = vec![-radius; n];
    let hi = vec![radius; n];
    for_each_grid_point(&lo, &hi, res, |x| {
        if ev.feasible(x, tol) {
            out.push((x.clone(), inst.objective.eval(x)));
        }
    });
    boundary_points(
        inst,
        &ev,
        radius,
        res / boundary_refinement(n, n_samples, per_axis),
        tol,
        &mut out,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_samples {
        let x = DVector::from_fn(n, |_, _| rng.gen_range(-radius..=radius));
        if ev.feasible(&x, tol) {
            let v = inst.objective.eval(&x);
            out.push((x, v));
        }
    }
    out
}

/// Factor by which boundary lines are denser than the grid, keeping the line
/// count near `4·n_samples`.
fn boundary_refinement(n: usize, n_samples: usize, per_axis: f64) -> f64 {
    if n == 1 {
        return 1.0;
    }
    let k = (4.0 * n_samples as f64 / (n as f64 * per_axis.powi(n as i32 - 1)))
        .powf(1.0 / (n as f64 - 1.0));
    k.floor().clamp(1.0, 8.0)
}

/// Points where a constraint vanishes on axis-parallel lines of spacing
/// `line_res` through the box, kept when the other constraints hold.
fn boundary_points(
    inst: &QcqpInstance,
    ev: &FormEval,
    radius: f64,
    line_res: f64,
    tol: f64,
    out: &mut Vec<(DVector<f64>, f64)>,
) {
    let n = inst.n;
    for j in 0..n {
        let mut lo = vec![-radius; n];
        let mut hi = vec![radius; n];
        lo[j] = 0.0;
        hi[j] = 0.0;
        for_each_grid_point(&lo, &hi, line_res, |x0| {
            for (q, _) in &ev.forms {
                let a = q.a.get(j, j);
                let b = q.a.mul_vec(x0)[j] + q.b[j];
                let c = q.eval(x0);
                let roots = if a.abs() > 1e-14 {
                    let disc = b * b - a * c;
                    if disc < 0.0 {
                        continue;
                    }
                    let r = disc.sqrt();
                    vec![(-b + r) / a, (-b - r) / a]
                } else if b.abs() > 1e-14 {
                    vec![-c / (2.0 * b)]
                } else {
                    continue;
                };
                for t in roots.into_iter().filter(|t| t.abs() <= radius) {
                    let mut x = x0.clone();
                    x[j] = t;
                    if ev.feasible(&x, tol) {
                        out.push((x.clone(), inst.objective.eval(&x)));
                    }
                }
            }
        });
    }
}

/// `min s` such that `(x, t)` is within ℓ∞ distance `s` of
/// `conv{(x_k, q_obj(x_k))} + cone{(0, 1)}`.
pub fn hull_deviation(samples: &[(DVector<f64>, f64)], x: &DVector<f64>, t: f64) -> f64 {
    if samples.is_empty() {
        return f64::INFINITY;
    }
    let n = x.len();
    let mut lp = Lp::new();
    let lam = lp.vars(samples.len(), VarKind::NonNeg, 0.0);
    let mu = lp.var(VarKind::NonNeg, 0.0);
    let s = lp.var(VarKind::NonNeg, 1.0);
    lp.row(lam.iter().map(|&l| (l, 1.0)).collect(), RowKind::Eq, 1.0);
    for j in 0..=n {
        let mut terms: Vec<(usize, f64)> = samples
            .iter()
            .zip(&lam)
            .map(|((xk, tk), &l)| (l, if j < n { xk[j] } else { *tk }))
            .collect();
        let target = if j < n { x[j] } else { t };
        if j == n {
            terms.push((mu, 1.0));
        }
        let mut upper = terms.clone();
        upper.push((s, -1.0));
        lp.row(upper, RowKind::Le, target);
        let mut lower = terms;
        lower.push((s, 1.0));
        lp.row(lower, RowKind::Ge, target);
    }
    let sol = lp.solve();
    if sol.status == LpStatus::Optimal {
        sol.value
    } else {
        f64::INFINITY
    }
}

pub fn conv_membership_sample(
    inst: &QcqpInstance,
    x: &DVector<f64>,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ConvMembership> {
    if inst.n > GRID_MAX_DIM {
        return Err(Error::SizeCap(format!(
            "hull sampling supports n <= {GRID_MAX_DIM}, got {}",
            inst.n
        )));
    }
    let radius = default_radius(inst, Some(x)).max(x.amax() + 0.5);
    let samples = epigraph_samples(inst, radius, n_samples, seed);
    Ok(conv_membership_with(&samples, x, t))
}

/// Membership test against a precomputed sample set.
pub fn conv_membership_with(
    samples: &[(DVector<f64>, f64)],
    x: &DVector<f64>,
    t: f64,
) -> ConvMembership {
    // Only nearby samples matter for an ℓ∞ test at this tolerance; keeping
    // the nearest few hundred keeps the LP small.
    let mut near: Vec<(f64, &(DVector<f64>, f64))> =
        samples.iter().map(|s| ((&s.0 - x).amax(), s)).collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    let picked: Vec<(DVector<f64>, f64)> =
        near.iter().take(400).map(|(_, s)| (*s).clone()).collect();
    let mut deviation = hull_deviation(&picked, x, t);
    if deviation > CONV_TOL && samples.len() > picked.len() {
        deviation = deviation.min(hull_deviation(&thin(samples, 1500), x, t));
    }
    let verdict = if deviation <= CONV_TOL {
        ConvVerdict::LikelyIn
    } else {
        ConvVerdict::NotShown
    };
    ConvMembership {
        verdict,
        deviation,
        samples: samples.len(),
    }
}

fn thin(samples: &[(DVector<f64>, f64)], k: usize) -> Vec<(DVector<f64>, f64)> {
    let step = (samples.len() / k).max(1);
    samples.iter().step_by(step).cloned().collect()
}

/// Points of the projected relaxation: minimizers of random strongly convex
/// objectives over the relaxation, lifted in `t` by a random slack, kept when
/// the membership test accepts them.
pub fn sample_dsdp_points(
    inst: &QcqpInstance,
    count: usize,
    seed: u64,
) -> Result<Vec<(DVector<f64>, f64)>> {
    let n = inst.n;
    let n1 = n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < 4 * count {
        attempts += 1;
        let g = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = SymMatrix::new(&g * g.transpose() + nalgebra::DMatrix::identity(n, n) * 0.2);
        let b = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let c_obj = QuadraticForm { a, b, c: 0.0 }.embed();
        let mut prog = ConicProgram::new(c_obj);
        for (m, s) in inst.homogenize() {
            prog.constraints.push(LinearConstraint {
                matrix: m,
                sense: s,
                rhs: 0.0,
            });
        }
        let prog = prog.eq(corner(n1), 1.0);
        let sol = solve(&prog, 1e-8, 50_000)?;
        if sol.status != SolveStatus::Optimal {
            continue;
        }
        let x = relaxation_point(&sol.z);
        let t = inst.objective_matrix().inner(&sol.z) + rng.gen_range(0.0..0.5);
        if dsdp_membership(inst, &x, t, 1e-6)?.member {
            out.push((x, t));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyperbola_pair() -> QcqpInstance {
        QcqpInstance::new(
            QuadraticForm::diag(&[1.0, 1.0], 0.0),
            vec![
                QuadraticForm::diag(&[-2.0, 1.0], 1.0),
                QuadraticForm::diag(&[1.0, -2.0], 1.0),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn grid_examples() {
        let r = grid_opt(&hyperbola_pair(), &[-2.0, -2.0], &[2.0, 2.0], 0.01).unwrap();
        assert!((r.value - 2.0).abs() < 1e-2, "{}", r.value);
        let x = r.argmin.unwrap();
        assert!((x[0].abs() - 1.0).abs() < 0.02 && (x[1].abs() - 1.0).abs() < 0.02);

        let trs = QcqpInstance::new(
            QuadraticForm::diag(&[-1.0], 0.0),
            vec![QuadraticForm::diag(&[1.0], -1.0)],
            vec![],
        )
        .unwrap();
        let r = grid_opt(&trs, &[-2.0], &[2.0], 0.01).unwrap();
        assert!((r.value + 1.0).abs() < 1e-2);

        let infeasible = QcqpInstance::new(
            QuadraticForm::diag(&[1.0], 0.0),
            vec![QuadraticForm::diag(&[1.0], 1.0)],
            vec![],
        )
        .unwrap();
        assert_eq!(
            grid_opt(&infeasible, &[-2.0], &[2.0], 0.01).unwrap().value,
            f64::INFINITY
        );
    }

    #[test]
    fn refined_grid_matches_plain_grid() {
        let plain = grid_opt(&hyperbola_pair(), &[-2.0, -2.0], &[2.0, 2.0], 0.01).unwrap();
        let refined = grid_opt_refined(&hyperbola_pair(), 2.0, 0.01).unwrap();
        assert!((plain.value - refined.value).abs() < 1e-9);
    }

    #[test]
    fn radius_bound() {
        // The hyperbola pair is unbounded along x2 = ±x1.
        assert!(feasible_radius(&hyperbola_pair()).is_none());
        let ball = QcqpInstance::new(
            QuadraticForm::diag(&[1.0, 0.0], 0.0),
            vec![QuadraticForm::diag(&[1.0, 1.0], -2.0)],
            vec![],
        )
        .unwrap();
        let r = feasible_radius(&ball).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-3, "{r}");
    }

    #[test]
    fn sphere_examples() {
        let empty = LmiSet::default();
        let r = sphere_min_rank_one(&empty, &SymMatrix::identity(3), 20_000, 0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-3);

        let pair = LmiSet::equalities(vec![
            SymMatrix::diag(&[1.0, -1.0]),
            SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]),
        ]);
        assert_eq!(
            sphere_min_rank_one(&pair, &SymMatrix::identity(2), 20_000, 0)
                .unwrap()
                .value,
            f64::INFINITY
        );

        let single = LmiSet::inequalities(vec![SymMatrix::diag(&[1.0, -1.0])]);
        let r = sphere_min_rank_one(&single, &SymMatrix::diag(&[1.0, 2.0]), 20_000, 0).unwrap();
        assert!((r.value - 1.5).abs() < 1e-2, "{}", r.value);
    }

    #[test]
    fn sphere_samples_are_deterministic_unit_vectors() {
        let a = sphere_samples(3, 100, 7);
        let b = sphere_samples(3, 100, 7);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        assert_ne!(a, sphere_samples(3, 100, 8));
    }

    #[test]
    fn conv_examples() {
        let inst = hyperbola_pair();
        let x = DVector::from_vec(vec![1.0, -1.0]);
        assert_eq!(
            conv_membership_sample(&inst, &x, 2.0, 20_000, 0)
                .unwrap()
                .verdict,
            ConvVerdict::LikelyIn
        );
        let origin = DVector::zeros(2);
        assert_eq!(
            conv_membership_sample(&inst, &origin, 2.0, 20_000, 0)
                .unwrap()
                .verdict,
            ConvVerdict::LikelyIn
        );
        assert_eq!(
            conv_membership_sample(&inst, &origin, 1.5, 20_000, 0)
                .unwrap()
                .verdict,
            ConvVerdict::NotShown
        );
    }

    #[test]
    fn compare_examples() {
        let r = compare_opt(&hyperbola_pair()).unwrap();
        assert!(r.exactness_flag && (r.opt_sdp - 2.0).abs() < 1e-4);
        let convex = QcqpInstance::new(
            QuadraticForm::new(
                SymMatrix::diag(&[1.0, 2.0]),
                DVector::from_vec(vec![1.0, -1.0]),
                0.0,
            )
            .unwrap(),
            vec![QuadraticForm::diag(&[1.0, 1.0], -1.0)],
            vec![],
        )
        .unwrap();
        assert!(compare_opt(&convex).unwrap().exactness_flag);
    }

    #[test]
    fn compare_detects_gap() {
        // Triangle cut: min Σ_{i≠j} x_i x_j over x_i² = 1 is -2; the relaxation gives -3.
        let obj = QuadraticForm::new(
            SymMatrix::from_fn(3, |i, j| if i == j { 0.0 } else { 1.0 }),
            DVector::zeros(3),
            0.0,
        )
        .unwrap();
        let eqs = (0..3)
            .map(|i| {
                let mut d = [0.0; 3];
                d[i] = 1.0;
                QuadraticForm::diag(&d, -1.0)
            })
            .collect();
        let inst = QcqpInstance::new(obj, vec![], eqs).unwrap();
        let r = compare_opt(&inst).unwrap();
        assert!(!r.exactness_flag, "{r:?}");
        assert!((r.opt_grid + 2.0).abs() < 1e-9 && (r.opt_sdp + 3.0).abs() < 1e-4);
    }

    #[test]
    fn dsdp_samples_are_members() {
        let pts = sample_dsdp_points(&hyperbola_pair(), 5, 3).unwrap();
        assert_eq!(pts.len(), 5);
        for (x, t) in &pts {
            assert!(
                dsdp_membership(&hyperbola_pair(), x, *t, 1e-6)
                    .unwrap()
                    .member
            );
        }
    }
}
