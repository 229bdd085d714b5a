//! Face-based exactness conditions for polyhedral Γ: objective value
//! exactness (strong and weak forms), convex hull exactness, the diagonal
//! Burer–Ye condition, the quadratic matrix program bounds and the pointwise
//! convex hull check.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::gamma::{
    compute_vf, prepare_gamma, FaceDescriptor, FaceKind, GammaData, GammaProvenance, VERTEX_TOL,
};
use crate::linalg::{nullspace, psd_status, SymMatrix, RANK_TOL};
use crate::model::{QcqpInstance, Sense};
use crate::oracles::{compare_opt, CompareReport, GRID_MAX_DIM};
use crate::solver::lp::{Lp, LpStatus, RowKind, VarKind};
use crate::solver::{dsdp_membership, solve_opt_sdp, SolveStatus, DEFAULT_EPS};

/// Threshold for strict inequalities (definiteness, nonzero-ness).
pub const STRICT_TOL: f64 = 1e-7;
/// Tolerance used when re-verifying stored witnesses.
pub const WITNESS_TOL: f64 = 1e-6;
const QEM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConditionId {
    ObjStrong,
    ObjWeak,
    ConvexHull,
    BurerYe,
    Qmp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Holds,
    Fails,
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SubVerdict {
    Pass,
    /// Empty slice.
    PassVacuous,
    Fail,
}

impl SubVerdict {
    pub fn passes(self) -> bool {
        self != SubVerdict::Fail
    }
}

/// Outcome for one semidefinite face (or one coordinate for Burer–Ye).
#[derive(Clone, Debug, Serialize)]
pub struct FaceRecord {
    pub face_id: Option<usize>,
    pub coordinate: Option<usize>,
    pub generator_ids: Vec<usize>,
    pub classification: Option<FaceKind>,
    pub sub_verdict: SubVerdict,
    /// Direction `x'` (weak), `(v, r)` (convex hull), in original coordinates.
    pub witness: Option<Vec<f64>>,
    /// Multiplier `γ` with `(1, γ)` in the face violating the condition.
    pub multiplier: Option<Vec<f64>>,
    /// LP distance (strong) or largest nullspace norm (convex hull).
    pub value: Option<f64>,
}

impl FaceRecord {
    fn face(id: usize, f: &FaceDescriptor, sub_verdict: SubVerdict) -> Self {
        FaceRecord {
            face_id: Some(id),
            coordinate: None,
            generator_ids: f.generator_ids.clone(),
            classification: Some(f.kind),
            sub_verdict,
            witness: None,
            multiplier: None,
            value: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QmpBounds {
    pub k: usize,
    pub m: usize,
    pub nonzero_b: usize,
    pub polyhedral: bool,
    /// Smallest `k` giving convex hull exactness under the applicable bound.
    pub ch_bound: usize,
    pub ch_holds: bool,
    /// Objective exactness bound `k ≥ m` (non-polyhedral case only).
    pub obj_holds: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactnessReport {
    pub condition: ConditionId,
    pub verdict: Verdict,
    pub threshold: f64,
    pub provenance: Option<GammaProvenance>,
    pub faces: Vec<FaceRecord>,
    pub definite_faces: usize,
    pub explanation: Option<String>,
    pub qmp: Option<QmpBounds>,
}

impl ExactnessReport {
    fn new(condition: ConditionId, gd: Option<&GammaData>) -> Self {
        ExactnessReport {
            condition,
            verdict: Verdict::Holds,
            threshold: STRICT_TOL,
            provenance: gd.map(|g| g.provenance.clone()),
            faces: Vec::new(),
            definite_faces: gd
                .map(|g| g.faces.len() - g.semidefinite_faces().count())
                .unwrap_or(0),
            explanation: None,
            qmp: None,
        }
    }

    fn not_applicable(
        condition: ConditionId,
        gd: Option<&GammaData>,
        why: impl Into<String>,
    ) -> Self {
        let mut r = ExactnessReport::new(condition, gd);
        r.verdict = Verdict::NotApplicable;
        r.explanation = Some(why.into());
        r
    }

    fn finish(mut self) -> Self {
        if self.verdict != Verdict::NotApplicable {
            self.verdict = if self.faces.iter().all(|f| f.sub_verdict.passes()) {
                Verdict::Holds
            } else {
                Verdict::Fails
            };
        }
        self
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    /// Faces whose sub-verdict failed.
    pub fn failing_faces(&self) -> impl Iterator<Item = &FaceRecord> {
        self.faces.iter().filter(|f| !f.sub_verdict.passes())
    }
}

/// Γ data when the polyhedral checks apply, else the reason they do not.
fn applicable(gd: Option<&GammaData>) -> std::result::Result<&GammaData, String> {
    let gd = gd.ok_or("no polyhedral description of Γ (instance is not diagonalizable and no generators were supplied)")?;
    if !gd.definiteness.holds {
        return Err(format!(
            "no multiplier with positive definite aggregate (best smallest eigenvalue {:.3e})",
            gd.definiteness.min_eig
        ));
    }
    Ok(gd)
}

/// Projected linear terms: `Uᵀ(b_obj + b(v))` per slice vertex, `Uᵀ b(r)` per ray.
struct ProjectedSlice {
    vertices: Vec<DVector<f64>>,
    rays: Vec<DVector<f64>>,
}

fn linear_term(inst: &QcqpInstance, g0: f64, gamma: &[f64]) -> DVector<f64> {
    inst.aggregate_with_obj(g0, gamma).expect("slice length").b
}

fn project_slice(gd: &GammaData, f: &FaceDescriptor) -> ProjectedSlice {
    let u = &f.vf_basis;
    let proj = |v: DVector<f64>| u.transpose() * v;
    ProjectedSlice {
        vertices: f
            .slice
            .vertices
            .iter()
            .map(|v| proj(linear_term(&gd.instance, 1.0, v)))
            .collect(),
        rays: f
            .slice
            .rays
            .iter()
            .map(|r| proj(linear_term(&gd.instance, 0.0, r)))
            .collect(),
    }
}

/// Maps a direction in working coordinates back to the original ones.
fn to_original(gd: &GammaData, y: &DVector<f64>) -> DVector<f64> {
    match &gd.transform {
        Some(p) => p * y,
        None => y.clone(),
    }
}

fn prepared(inst: &QcqpInstance) -> (Option<GammaData>, Option<String>) {
    match prepare_gamma(inst) {
        Ok(gd) => (gd, None),
        Err(e) => (None, Some(e.to_string())),
    }
}

fn with_gamma(
    inst: &QcqpInstance,
    f: impl FnOnce(Option<&GammaData>) -> ExactnessReport,
) -> ExactnessReport {
    let (gd, err) = prepared(inst);
    let mut r = f(gd.as_ref());
    if let (Some(e), Verdict::NotApplicable) = (err, r.verdict) {
        r.explanation = Some(e);
    }
    r
}

pub fn check_obj_strong(inst: &QcqpInstance) -> ExactnessReport {
    with_gamma(inst, check_obj_strong_with)
}

/// For every semidefinite face: is `0` outside `Π_{V(F)}{b_obj + b(γ) : (1, γ) ∈ F}`?
pub fn check_obj_strong_with(gd: Option<&GammaData>) -> ExactnessReport {
    let gd = match applicable(gd) {
        Ok(g) => g,
        Err(why) => return ExactnessReport::not_applicable(ConditionId::ObjStrong, gd, why),
    };
    let mut rep = ExactnessReport::new(ConditionId::ObjStrong, Some(gd));
    for (id, f) in gd
        .faces
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == FaceKind::Semidefinite)
    {
        if f.slice.is_empty() {
            rep.faces
                .push(FaceRecord::face(id, f, SubVerdict::PassVacuous));
            continue;
        }
        let ps = project_slice(gd, f);
        let (dist, lam, mu) = distance_to_origin(&ps);
        let scale = ps
            .vertices
            .iter()
            .chain(&ps.rays)
            .map(|v| v.amax())
            .fold(1.0, f64::max);
        let mut rec = FaceRecord::face(id, f, SubVerdict::Pass);
        rec.value = Some(dist);
        if dist <= STRICT_TOL * scale {
            let mut gamma = vec![0.0; gd.instance.m()];
            for (v, l) in f.slice.vertices.iter().zip(&lam) {
                gamma.iter_mut().zip(v).for_each(|(g, x)| *g += l * x);
            }
            for (r, w) in f.slice.rays.iter().zip(&mu) {
                gamma.iter_mut().zip(r).for_each(|(g, x)| *g += w * x);
            }
            rec.sub_verdict = SubVerdict::Fail;
            rec.multiplier = Some(gamma);
        }
        rep.faces.push(rec);
    }
    rep.finish()
}

/// ℓ∞ distance from the origin to `conv(vertices) + cone(rays)` with the
/// minimizing weights.
fn distance_to_origin(ps: &ProjectedSlice) -> (f64, Vec<f64>, Vec<f64>) {
    let k = ps.vertices.first().map(|v| v.len()).unwrap_or(0);
    let mut lp = Lp::new();
    let lam = lp.vars(ps.vertices.len(), VarKind::NonNeg, 0.0);
    let mu = lp.vars(ps.rays.len(), VarKind::NonNeg, 0.0);
    let s = lp.var(VarKind::NonNeg, 1.0);
    lp.row(lam.iter().map(|&l| (l, 1.0)).collect(), RowKind::Eq, 1.0);
    for j in 0..k {
        let mut terms: Vec<(usize, f64)> = lam
            .iter()
            .zip(&ps.vertices)
            .map(|(&l, v)| (l, v[j]))
            .collect();
        terms.extend(mu.iter().zip(&ps.rays).map(|(&w, r)| (w, r[j])));
        let mut up = terms.clone();
        up.push((s, -1.0));
        lp.row(up, RowKind::Le, 0.0);
        terms.push((s, 1.0));
        lp.row(terms, RowKind::Ge, 0.0);
    }
    let sol = lp.solve();
    if sol.status != LpStatus::Optimal {
        return (f64::INFINITY, vec![], vec![]);
    }
    let pick = |ids: &[usize]| ids.iter().map(|&i| sol.x[i]).collect::<Vec<f64>>();
    (sol.value, pick(&lam), pick(&mu))
}

pub fn check_obj_weak(inst: &QcqpInstance) -> ExactnessReport {
    with_gamma(inst, check_obj_weak_with)
}

/// For every semidefinite face: a nonzero `x' ∈ V(F)` with
/// `⟨b_obj + b(v), x'⟩ ≤ 0` on slice vertices and `⟨b(r), x'⟩ ≤ 0` on rays.
pub fn check_obj_weak_with(gd: Option<&GammaData>) -> ExactnessReport {
    let gd = match applicable(gd) {
        Ok(g) => g,
        Err(why) => return ExactnessReport::not_applicable(ConditionId::ObjWeak, gd, why),
    };
    let mut rep = ExactnessReport::new(ConditionId::ObjWeak, Some(gd));
    for (id, f) in gd
        .faces
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == FaceKind::Semidefinite)
    {
        if f.slice.is_empty() {
            rep.faces
                .push(FaceRecord::face(id, f, SubVerdict::PassVacuous));
            continue;
        }
        let ps = project_slice(gd, f);
        let mut rec = FaceRecord::face(id, f, SubVerdict::Fail);
        if let Some(y) = weak_direction(&ps, f.vf_dim()) {
            rec.sub_verdict = SubVerdict::Pass;
            rec.witness = Some(
                to_original(gd, &(&f.vf_basis * y))
                    .iter()
                    .copied()
                    .collect(),
            );
        }
        rep.faces.push(rec);
    }
    rep.finish()
}

/// Tries `y_j = ±1` in turn with the other coordinates in `[−1, 1]`.
fn weak_direction(ps: &ProjectedSlice, k: usize) -> Option<DVector<f64>> {
    for j in 0..k {
        for sign in [1.0, -1.0] {
            let mut lp = Lp::new();
            let y = lp.vars(k, VarKind::Free, 0.0);
            for (i, &yi) in y.iter().enumerate() {
                if i == j {
                    lp.row(vec![(yi, 1.0)], RowKind::Eq, sign);
                } else {
                    lp.row(vec![(yi, 1.0)], RowKind::Le, 1.0);
                    lp.row(vec![(yi, 1.0)], RowKind::Ge, -1.0);
                }
            }
            for q in ps.vertices.iter().chain(&ps.rays) {
                lp.row(
                    y.iter().enumerate().map(|(i, &yi)| (yi, q[i])).collect(),
                    RowKind::Le,
                    0.0,
                );
            }
            let sol = lp.solve();
            if sol.status == LpStatus::Optimal {
                return Some(DVector::from_iterator(k, y.iter().map(|&i| sol.x[i])));
            }
        }
    }
    None
}

pub fn check_ch_polyhedral(inst: &QcqpInstance) -> ExactnessReport {
    with_gamma(inst, check_ch_polyhedral_with)
}

/// For every semidefinite face: a nonzero `v ∈ V(F)` and `r` with
/// `⟨b_obj + b(v_k), v⟩ = r` on slice vertices and `⟨b(r_l), v⟩ = 0` on rays.
pub fn check_ch_polyhedral_with(gd: Option<&GammaData>) -> ExactnessReport {
    let gd = match applicable(gd) {
        Ok(g) => g,
        Err(why) => return ExactnessReport::not_applicable(ConditionId::ConvexHull, gd, why),
    };
    let mut rep = ExactnessReport::new(ConditionId::ConvexHull, Some(gd));
    for (id, f) in gd
        .faces
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == FaceKind::Semidefinite)
    {
        if f.slice.is_empty() {
            rep.faces
                .push(FaceRecord::face(id, f, SubVerdict::PassVacuous));
            continue;
        }
        let ps = project_slice(gd, f);
        let k = f.vf_dim();
        let rows: Vec<(DVector<f64>, f64)> = ps
            .vertices
            .iter()
            .map(|q| (q.clone(), -1.0))
            .chain(ps.rays.iter().map(|q| (q.clone(), 0.0)))
            .collect();
        let mut rec = FaceRecord::face(id, f, SubVerdict::Fail);
        let (best, norm) = best_nullspace_direction(&rows, k);
        rec.value = Some(norm);
        if norm > STRICT_TOL {
            let y = best.rows(0, k).into_owned();
            let mut w: Vec<f64> = to_original(gd, &(&f.vf_basis * &y))
                .iter()
                .copied()
                .collect();
            w.push(best[k]);
            rec.sub_verdict = SubVerdict::Pass;
            rec.witness = Some(w);
        }
        rep.faces.push(rec);
    }
    rep.finish()
}

/// Null space of the rows `[qᵀ, coeff]` over `(y, s) ∈ R^k × R`; returns the
/// basis vector with the largest `y`-part, scaled so that part has unit norm.
fn best_nullspace_direction(rows: &[(DVector<f64>, f64)], k: usize) -> (DVector<f64>, f64) {
    let a = DMatrix::from_fn(rows.len(), k + 1, |i, j| {
        if j < k {
            rows[i].0[j]
        } else {
            rows[i].1
        }
    });
    let ns = nullspace(&a, RANK_TOL);
    let mut best = (DVector::zeros(k + 1), 0.0);
    for c in 0..ns.ncols() {
        let col = ns.column(c).into_owned();
        let norm = col.rows(0, k).norm();
        if norm > best.1 {
            best = (col / norm, norm);
        }
    }
    best
}

/// For a diagonal instance, checks that no `(1, γ) ∈ Γ` zeroes both
/// `(A_obj + A(γ))_jj` and `(b_obj + b(γ))_j`, coordinate by coordinate.
pub fn check_burer_ye_diag(inst: &QcqpInstance) -> ExactnessReport {
    let (gd, err) = prepared(inst);
    if !inst.is_diagonal() {
        return ExactnessReport::not_applicable(
            ConditionId::BurerYe,
            gd.as_ref(),
            "instance is not diagonal",
        );
    }
    let gd_ref = match applicable(gd.as_ref()) {
        Ok(g) => g,
        Err(why) => {
            return ExactnessReport::not_applicable(
                ConditionId::BurerYe,
                gd.as_ref(),
                err.unwrap_or(why),
            )
        }
    };
    let mut rep = ExactnessReport::new(ConditionId::BurerYe, Some(gd_ref));
    let m = inst.m();
    let diag = |i: Option<usize>, j: usize| match i {
        None => inst.objective.a.get(j, j),
        Some(i) => inst.constraint(i).a.get(j, j),
    };
    let lin = |i: Option<usize>, j: usize| match i {
        None => inst.objective.b[j],
        Some(i) => inst.constraint(i).b[j],
    };
    for j in 0..inst.n {
        let mut lp = Lp::new();
        let g: Vec<usize> = (0..m)
            .map(|i| {
                lp.var(
                    if inst.sense(i) == Sense::Le {
                        VarKind::NonNeg
                    } else {
                        VarKind::Free
                    },
                    0.0,
                )
            })
            .collect();
        let row =
            |f: &dyn Fn(Option<usize>, usize) -> f64, jj: usize| -> (Vec<(usize, f64)>, f64) {
                (
                    g.iter()
                        .enumerate()
                        .map(|(i, &v)| (v, f(Some(i), jj)))
                        .collect(),
                    -f(None, jj),
                )
            };
        for jj in 0..inst.n {
            let (t, rhs) = row(&diag, jj);
            lp.row(t, if jj == j { RowKind::Eq } else { RowKind::Ge }, rhs);
        }
        let (t, rhs) = row(&lin, j);
        lp.row(t, RowKind::Eq, rhs);
        let sol = lp.solve();
        let mut rec = FaceRecord {
            face_id: None,
            coordinate: Some(j),
            generator_ids: vec![],
            classification: None,
            sub_verdict: SubVerdict::Pass,
            witness: None,
            multiplier: None,
            value: None,
        };
        if sol.status == LpStatus::Optimal {
            rec.sub_verdict = SubVerdict::Fail;
            rec.multiplier = Some(g.iter().map(|&v| sol.x[v]).collect());
        }
        rep.faces.push(rec);
    }
    rep.finish()
}

/// Largest `k` dividing `n` with every quadratic part of the form `I_k ⊗ 𝔸`.
pub fn detect_qem(inst: &QcqpInstance) -> usize {
    let n = inst.n;
    let mats: Vec<&SymMatrix> = std::iter::once(&inst.objective.a)
        .chain(inst.constraints().map(|(q, _)| &q.a))
        .collect();
    (1..=n)
        .rev()
        .filter(|k| n.is_multiple_of(*k))
        .find(|&k| mats.iter().all(|a| is_kron_identity(a, k)))
        .unwrap_or(1)
}

fn is_kron_identity(a: &SymMatrix, k: usize) -> bool {
    let s = a.dim() / k;
    let tol = QEM_TOL * a.matrix().amax().max(1.0);
    (0..a.dim()).all(|r| {
        (0..a.dim()).all(|c| {
            let (p, i) = (r / s, r % s);
            let (q, j) = (c / s, c % s);
            let expect = if p == q { a.get(i, j) } else { 0.0 };
            (a.get(r, c) - expect).abs() <= tol
        })
    })
}

/// Symmetry bounds: with polyhedral Γ, convex hull exactness when
/// `k ≥ min(#{i : b_i ≠ 0} + 1, m)`; otherwise convex hull exactness when
/// `k ≥ m + 2` and objective exactness when `k ≥ m`.
pub fn check_qmp_bounds(inst: &QcqpInstance, polyhedral: bool) -> ExactnessReport {
    let k = detect_qem(inst);
    let m = inst.m();
    let nonzero_b = inst.constraints().filter(|(q, _)| q.b.amax() > 0.0).count();
    let ch_bound = if polyhedral {
        (nonzero_b + 1).min(m)
    } else {
        m + 2
    };
    let bounds = QmpBounds {
        k,
        m,
        nonzero_b,
        polyhedral,
        ch_bound,
        ch_holds: k >= ch_bound,
        obj_holds: (!polyhedral).then_some(k >= m),
    };
    let mut rep = ExactnessReport::new(ConditionId::Qmp, None);
    rep.verdict = if bounds.ch_holds {
        Verdict::Holds
    } else {
        Verdict::Fails
    };
    rep.explanation = Some(format!("k = {k}, convex hull bound k >= {ch_bound}"));
    rep.qmp = Some(bounds);
    rep
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PointVerdict {
    InD,
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointReport {
    pub verdict: PointVerdict,
    pub tight_generators: Vec<usize>,
    pub vf_dim: usize,
    /// `x'` in original coordinates.
    pub x_prime: Option<Vec<f64>>,
    pub t_prime: Option<f64>,
    pub provenance: GammaProvenance,
}

/// Pointwise convex hull check at `(x̂, t̂) ∈ D_SDP` using the face of Γ
/// exposed by `(q_obj(x̂) − t̂, q(x̂))`.
pub fn check_ch_general_pointwise(
    inst: &QcqpInstance,
    x: &DVector<f64>,
    t: f64,
) -> Result<PointReport> {
    check_dim(inst.n, x.len())?;
    let gd = prepare_gamma(inst)?
        .ok_or_else(|| Error::Input("no polyhedral description of Γ for this instance".into()))?;
    let mem = dsdp_membership(inst, x, t, WITNESS_TOL)?;
    if mem.status != SolveStatus::Optimal {
        return Err(Error::NonConvergence(format!(
            "relaxation membership solve ended with {:?}",
            mem.status
        )));
    }
    if !mem.member {
        return Err(Error::Input(format!(
            "point is not in the relaxation (violation {:.3e})",
            mem.violation
        )));
    }
    let work = &gd.instance;
    let y = match &gd.transform {
        Some(p) => p
            .clone()
            .lu()
            .solve(x)
            .ok_or_else(|| Error::Input("singular transform".into()))?,
        None => x.clone(),
    };
    let mut values = vec![work.objective.eval(&y) - t];
    values.extend(work.constraint_values(&y));
    let tight: Vec<usize> = gd
        .generators
        .iter()
        .enumerate()
        .filter(|(_, g)| {
            let s = g.amax().max(f64::MIN_POSITIVE);
            g.iter().zip(&values).map(|(a, v)| a * v).sum::<f64>() / s >= -STRICT_TOL
        })
        .map(|(i, _)| i)
        .collect();
    let gens: Vec<&DVector<f64>> = tight.iter().map(|&i| &gd.generators[i]).collect();
    let vf = if gens.is_empty() {
        DMatrix::identity(inst.n, inst.n)
    } else {
        compute_vf(work, &gens)
    };
    let k = vf.ncols();
    let mut rep = PointReport {
        verdict: PointVerdict::Fail,
        tight_generators: tight,
        vf_dim: k,
        x_prime: None,
        t_prime: None,
        provenance: gd.provenance.clone(),
    };
    if inst.epigraph_member(x, t, STRICT_TOL) {
        rep.verdict = PointVerdict::InD;
        return Ok(rep);
    }
    let rows: Vec<(DVector<f64>, f64)> = gens
        .iter()
        .map(|g| {
            let q = work.aggregate_stacked(g).expect("generator length");
            let grad = q.a.mul_vec(&y) + &q.b;
            let coeff = if g[0] > VERTEX_TOL { -1.0 } else { 0.0 };
            let s = if g[0] > VERTEX_TOL { g[0] } else { 1.0 };
            (vf.transpose() * grad / s, coeff)
        })
        .collect();
    let (best, norm) = best_nullspace_direction(&rows, k);
    if norm > STRICT_TOL {
        let yp = best.rows(0, k).into_owned();
        rep.verdict = PointVerdict::Pass;
        rep.x_prime = Some(to_original(&gd, &(&vf * yp)).iter().copied().collect());
        rep.t_prime = Some(best[k]);
    }
    Ok(rep)
}

/// Re-evaluates every stored witness and multiplier of a face report against
/// the original instance.
pub fn verify_witnesses(inst: &QcqpInstance, gd: &GammaData, rep: &ExactnessReport) -> bool {
    rep.faces
        .iter()
        .all(|rec| verify_record(inst, gd, rep.condition, rec))
}

fn verify_record(inst: &QcqpInstance, gd: &GammaData, cond: ConditionId, rec: &FaceRecord) -> bool {
    let face = rec.face_id.map(|i| &gd.faces[i]);
    let gens: Vec<&DVector<f64>> = face
        .map(|f| f.generator_ids.iter().map(|&i| &gd.generators[i]).collect())
        .unwrap_or_default();
    let in_vf = |x: &DVector<f64>| {
        gens.iter().all(|g| {
            let a = inst.aggregate_stacked(g).expect("generator length").a;
            (a.mul_vec(x)).amax() <= WITNESS_TOL * (1.0 + a.spectral_norm() * x.norm())
        })
    };
    let slice = face.map(|f| &f.slice);
    match cond {
        ConditionId::ObjStrong | ConditionId::BurerYe => {
            let Some(gamma) = &rec.multiplier else {
                return true;
            };
            let Ok(q) = inst.aggregate_with_obj(1.0, gamma) else {
                return false;
            };
            let signs_ok = gamma
                .iter()
                .enumerate()
                .all(|(i, g)| inst.sense(i) == Sense::Eq || *g >= -WITNESS_TOL);
            let psd = psd_status(&q.a, WITNESS_TOL).is_psd();
            let zero = match (cond, face) {
                (ConditionId::BurerYe, _) => {
                    let j = rec.coordinate.unwrap_or(0);
                    q.a.get(j, j).abs() <= WITNESS_TOL && q.b[j].abs() <= WITNESS_TOL
                }
                (_, Some(f)) => {
                    // Π_{V(F)} in working coordinates equals Pᵀ-transformed b.
                    let b = match &gd.transform {
                        Some(p) => p.transpose() * &q.b,
                        None => q.b.clone(),
                    };
                    (f.vf_basis.transpose() * b).amax() <= WITNESS_TOL * (1.0 + q.b.amax())
                }
                _ => false,
            };
            signs_ok && psd && zero
        }
        ConditionId::ObjWeak => {
            let (Some(w), Some(s)) = (&rec.witness, slice) else {
                return true;
            };
            let x = DVector::from_column_slice(w);
            let ok_v = s
                .vertices
                .iter()
                .all(|v| linear_term(inst, 1.0, v).dot(&x) <= WITNESS_TOL);
            let ok_r = s
                .rays
                .iter()
                .all(|r| linear_term(inst, 0.0, r).dot(&x) <= WITNESS_TOL);
            x.norm() > STRICT_TOL && in_vf(&x) && ok_v && ok_r
        }
        ConditionId::ConvexHull => {
            let (Some(w), Some(s)) = (&rec.witness, slice) else {
                return true;
            };
            let x = DVector::from_column_slice(&w[..inst.n]);
            let r = w[inst.n];
            let tol = WITNESS_TOL * (1.0 + x.norm() + r.abs());
            let ok_v = s
                .vertices
                .iter()
                .all(|v| (linear_term(inst, 1.0, v).dot(&x) - r).abs() <= tol);
            let ok_r = s
                .rays
                .iter()
                .all(|q| linear_term(inst, 0.0, q).dot(&x).abs() <= tol);
            x.norm() > STRICT_TOL && in_vf(&x) && ok_v && ok_r
        }
        ConditionId::Qmp => true,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SdpSummary {
    pub value: f64,
    pub status: SolveStatus,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactnessSummary {
    pub diagonal: bool,
    pub provenance: Option<GammaProvenance>,
    pub generators: Option<Vec<Vec<f64>>>,
    pub pd_combination: Option<bool>,
    pub strong: ExactnessReport,
    pub weak: ExactnessReport,
    pub ch: ExactnessReport,
    pub burer_ye: ExactnessReport,
    pub qmp: ExactnessReport,
    pub opt_sdp: Option<SdpSummary>,
    pub oracle: Option<CompareReport>,
    pub notes: Vec<String>,
}

impl ExactnessSummary {
    /// Checks the implications strong ⇒ weak, ch ⇒ weak, Burer–Ye ⇒ strong.
    pub fn implications_hold(&self) -> bool {
        (!self.strong.holds() || self.weak.holds())
            && (!self.ch.holds() || self.weak.holds())
            && (!self.burer_ye.holds() || self.strong.holds())
    }
}

/// Runs every applicable check, the relaxation and (for `n ≤ 3`) the grid oracle.
pub fn exactness_summary(inst: &QcqpInstance) -> ExactnessSummary {
    let (gd, err) = prepared(inst);
    let mut notes: Vec<String> = err.into_iter().collect();
    let g = gd.as_ref();
    let fill = |mut r: ExactnessReport| {
        if r.verdict == Verdict::NotApplicable && r.explanation.is_none() {
            r.explanation = notes.first().cloned();
        }
        r
    };
    let strong = fill(check_obj_strong_with(g));
    let weak = fill(check_obj_weak_with(g));
    let ch = fill(check_ch_polyhedral_with(g));
    let burer_ye = check_burer_ye_diag(inst);
    let qmp = check_qmp_bounds(inst, g.is_some());
    let opt_sdp = match solve_opt_sdp(inst, DEFAULT_EPS) {
        Ok(s) => Some(SdpSummary {
            value: s.objective_value,
            status: s.status,
            x: crate::solver::relaxation_point(&s.z)
                .iter()
                .copied()
                .collect(),
        }),
        Err(e) => {
            notes.push(format!("relaxation: {e}"));
            None
        }
    };
    let oracle = if inst.n <= GRID_MAX_DIM {
        match compare_opt(inst) {
            Ok(c) => Some(c),
            Err(e) => {
                notes.push(format!("oracle: {e}"));
                None
            }
        }
    } else {
        None
    };
    ExactnessSummary {
        diagonal: inst.is_diagonal(),
        provenance: g.map(|d| d.provenance.clone()),
        generators: g.map(|d| {
            d.generators
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect()
        }),
        pd_combination: g.map(|d| d.definiteness.holds),
        strong,
        weak,
        ch,
        burer_ye,
        qmp,
        opt_sdp,
        oracle,
        notes,
    }
}
