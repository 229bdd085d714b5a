//! The cone Γ of convex Lagrange multipliers `(γ_obj, γ)`:
//! `γ_obj A_obj + A(γ) ⪰ 0`, `γ_obj ≥ 0`, `γ_i ≥ 0` for inequality indices.
//!
//! For diagonal instances Γ is polyhedral with one row per diagonal entry;
//! its extreme rays come from the double description method and its faces
//! from tightness patterns of those rays.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, kernel_basis, nullspace, psd_status, SymMatrix, PSD_TOL};
use crate::model::{QcqpInstance, QuadraticForm};
use crate::solver::{MaxMinEig, DEFAULT_EPS};

/// Largest ambient dimension `m + 1` accepted by [`dd_extreme_rays`].
pub const DD_MAX_DIM: usize = 12;
/// Threshold separating vertices (`γ_obj > VERTEX_TOL`) from rays of a slice.
pub const VERTEX_TOL: f64 = 1e-9;
const TIGHT_TOL: f64 = 1e-9;

/// Polyhedral cone `{g : ⟨row, g⟩ ≥ 0 for every row}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HPolyCone {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl HPolyCone {
    pub fn contains(&self, g: &DVector<f64>, tol: f64) -> bool {
        self.rows
            .iter()
            .all(|r| dot(r, g) >= -tol * norm(r).max(1.0) * g.norm().max(1.0))
    }

    pub fn is_tight(&self, row: usize, g: &DVector<f64>) -> bool {
        let r = &self.rows[row];
        dot(r, g).abs() <= TIGHT_TOL * norm(r).max(1e-300) * g.norm().max(1.0)
    }
}

fn dot(r: &[f64], g: &DVector<f64>) -> f64 {
    r.iter().zip(g.iter()).map(|(a, b)| a * b).sum()
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Rows `Σ_k γ_k (A_k)_jj ≥ 0` for each coordinate `j`, then `γ_obj ≥ 0`,
/// then `γ_i ≥ 0` for every inequality index.
pub fn build_gamma_hrep_diag(inst: &QcqpInstance) -> Result<HPolyCone> {
    if !inst.is_diagonal() {
        return Err(Error::NotDiagonal(
            "a quadratic part has nonzero off-diagonal entries".into(),
        ));
    }
    let d = inst.m() + 1;
    let mut rows = Vec::new();
    for j in 0..inst.n {
        let mut r = vec![inst.objective.a.get(j, j)];
        r.extend((0..inst.m()).map(|i| inst.constraint(i).a.get(j, j)));
        rows.push(r);
    }
    for i in 0..=inst.m_ineq() {
        let mut r = vec![0.0; d];
        r[i] = 1.0;
        rows.push(r);
    }
    Ok(HPolyCone { dim: d, rows })
}

fn normalize_inf(v: &DVector<f64>) -> DVector<f64> {
    let s = v.amax();
    if s > 0.0 {
        v / s
    } else {
        v.clone()
    }
}

/// Extreme rays of a polyhedral cone, each scaled to unit ∞-norm. A lineality
/// space, if present, is returned as `±` pairs of basis vectors.
pub fn dd_extreme_rays(h: &HPolyCone) -> Result<Vec<DVector<f64>>> {
    let d = h.dim;
    if d > DD_MAX_DIM {
        return Err(Error::SizeCap(format!(
            "double description is limited to dimension {DD_MAX_DIM}, got {d}"
        )));
    }
    let rows: Vec<DVector<f64>> = h
        .rows
        .iter()
        .filter(|r| norm(r) > 0.0)
        .map(|r| {
            let v = DVector::from_column_slice(r);
            &v / v.norm()
        })
        .collect();
    let hm = if rows.is_empty() {
        DMatrix::zeros(0, d)
    } else {
        DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])
    };
    let lineality = if rows.is_empty() {
        DMatrix::identity(d, d)
    } else {
        nullspace(&hm, 1e-10)
    };
    let mut all_rows = rows.clone();
    for k in 0..lineality.ncols() {
        let l = lineality.column(k).into_owned();
        all_rows.push(l.clone());
        all_rows.push(-l);
    }
    let mut rays = if lineality.ncols() == d {
        Vec::new()
    } else {
        dd_pointed(&all_rows, d)?
    };
    for k in 0..lineality.ncols() {
        let l = normalize_inf(&lineality.column(k).into_owned());
        rays.push(l.clone());
        rays.push(-l);
    }
    Ok(rays)
}

/// Double description for a pointed cone given by rows spanning `R^d`.
fn dd_pointed(rows: &[DVector<f64>], d: usize) -> Result<Vec<DVector<f64>>> {
    // Initial basis: greedily pick d independent rows in the given order.
    let mut basis: Vec<usize> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let mut cand: Vec<DVector<f64>> = basis.iter().map(|&b| rows[b].clone()).collect();
        cand.push(r.clone());
        let m = DMatrix::from_fn(cand.len(), d, |a, b| cand[a][b]);
        let rank = m.svd(false, false).rank(1e-9);
        if rank == cand.len() {
            basis.push(i);
            if basis.len() == d {
                break;
            }
        }
    }
    if basis.len() < d {
        return Err(Error::Decomposition(
            "cone rows do not span the ambient space".into(),
        ));
    }
    let hb = DMatrix::from_fn(d, d, |a, b| rows[basis[a]][b]);
    let inv = hb
        .try_inverse()
        .ok_or_else(|| Error::Decomposition("singular initial basis".into()))?;
    let mut processed: Vec<usize> = basis.clone();
    let mut rays: Vec<DVector<f64>> = (0..d)
        .map(|k| normalize_inf(&inv.column(k).into_owned()))
        .collect();
    let zero_set = |ray: &DVector<f64>, processed: &[usize]| -> BTreeSet<usize> {
        processed
            .iter()
            .copied()
            .filter(|&i| rows[i].dot(ray).abs() <= TIGHT_TOL * ray.norm())
            .collect()
    };
    for (i, row) in rows.iter().enumerate() {
        if processed.contains(&i) {
            continue;
        }
        let vals: Vec<f64> = rays.iter().map(|r| row.dot(r)).collect();
        let tol = |r: &DVector<f64>| TIGHT_TOL * r.norm();
        let pos: Vec<usize> = (0..rays.len())
            .filter(|&k| vals[k] > tol(&rays[k]))
            .collect();
        let neg: Vec<usize> = (0..rays.len())
            .filter(|&k| vals[k] < -tol(&rays[k]))
            .collect();
        if neg.is_empty() {
            processed.push(i);
            continue;
        }
        let zsets: Vec<BTreeSet<usize>> = rays.iter().map(|r| zero_set(r, &processed)).collect();
        let mut next: Vec<DVector<f64>> = (0..rays.len())
            .filter(|k| !neg.contains(k))
            .map(|k| rays[k].clone())
            .collect();
        for &p in &pos {
            for &q in &neg {
                let common: BTreeSet<usize> = zsets[p].intersection(&zsets[q]).copied().collect();
                if common.len() + 2 < d {
                    continue;
                }
                let adjacent =
                    (0..rays.len()).all(|k| k == p || k == q || !common.is_subset(&zsets[k]));
                if !adjacent {
                    continue;
                }
                let r = &rays[q] * vals[p] - &rays[p] * vals[q];
                if r.amax() > 0.0 {
                    next.push(normalize_inf(&r));
                }
            }
        }
        processed.push(i);
        rays = dedup_rays(next);
    }
    Ok(rays)
}

fn dedup_rays(rays: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for r in rays {
        if !out.iter().any(|o| (o - &r).amax() <= 1e-9) {
            out.push(r);
        }
    }
    out
}

/// Checks membership of `(γ_obj, γ)` in Γ: sign conditions and PSD aggregate.
pub fn verify_generator(inst: &QcqpInstance, g: &DVector<f64>, tol: f64) -> bool {
    if g.len() != inst.m() + 1 {
        return false;
    }
    let scale = g.amax().max(1.0);
    if (0..=inst.m_ineq()).any(|i| g[i] < -tol * scale) {
        return false;
    }
    match inst.aggregate_stacked(g) {
        Ok(q) => psd_status(&q.a, tol).is_psd(),
        Err(_) => false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GammaProvenance {
    DiagonalAuto,
    /// Diagonalized by a congruence `x = P y`.
    Transformed,
    GeneratorSupplied,
}

#[derive(Clone, Debug, Serialize)]
pub struct DefinitenessWitness {
    pub holds: bool,
    /// Unit-sum combination of generators maximizing the smallest eigenvalue.
    pub gamma: Vec<f64>,
    pub min_eig: f64,
}

/// Searches for a generator combination with positive definite aggregate by
/// maximizing `t` over unit-sum combinations with aggregate `⪰ tI`.
pub fn check_definiteness_assumption(
    inst: &QcqpInstance,
    gens: &[DVector<f64>],
) -> DefinitenessWitness {
    if gens.is_empty() {
        return DefinitenessWitness {
            holds: false,
            gamma: vec![0.0; inst.m() + 1],
            min_eig: f64::NEG_INFINITY,
        };
    }
    let aggs: Vec<SymMatrix> = gens
        .iter()
        .map(|g| inst.aggregate_stacked(g).expect("generator length").a)
        .collect();
    let res = MaxMinEig::unit_sum(&aggs).solve(DEFAULT_EPS);
    let combine = |w: &[f64]| -> DVector<f64> {
        let mut acc = DVector::zeros(inst.m() + 1);
        for (g, wk) in gens.iter().zip(w) {
            acc += g * *wk;
        }
        acc
    };
    let mut gamma = combine(&res.weights);
    let mut min_eig = res.min_eig;
    // The plain average has the smallest kernel among all combinations.
    let avg = vec![1.0 / gens.len() as f64; gens.len()];
    let avg_eig = SymMatrix::linear_combination(&avg, &aggs).min_eigenvalue();
    if avg_eig > min_eig {
        gamma = combine(&avg);
        min_eig = avg_eig;
    }
    DefinitenessWitness {
        holds: min_eig > PSD_TOL,
        gamma: gamma.iter().copied().collect(),
        min_eig,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FaceKind {
    Definite,
    Semidefinite,
}

/// Vertices and rays of the slice `{γ : (1, γ) ∈ F}`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SliceVrep {
    pub vertices: Vec<Vec<f64>>,
    pub rays: Vec<Vec<f64>>,
}

impl SliceVrep {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FaceDescriptor {
    pub active_rows: Vec<usize>,
    pub generator_ids: Vec<usize>,
    pub kind: FaceKind,
    /// Orthonormal basis of V(F) as columns (empty for definite faces).
    #[serde(serialize_with = "ser_columns")]
    pub vf_basis: DMatrix<f64>,
    pub definite_witness: Option<Vec<f64>>,
    pub slice: SliceVrep,
}

pub(crate) fn ser_columns<S: serde::Serializer>(
    m: &DMatrix<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    let cols: Vec<Vec<f64>> = (0..m.ncols())
        .map(|k| m.column(k).iter().copied().collect())
        .collect();
    cols.serialize(s)
}

impl FaceDescriptor {
    pub fn vf_dim(&self) -> usize {
        self.vf_basis.ncols()
    }
}

/// Faces of `cone(gens)` cut out by tightness of the rows of `h`, each given by
/// the generators it contains. Γ itself comes first; the zero face is omitted.
pub fn enumerate_faces(h: &HPolyCone, gens: &[DVector<f64>]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let all: Vec<usize> = (0..gens.len()).collect();
    if gens.is_empty() {
        return Vec::new();
    }
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut queue = vec![all.clone()];
    seen.insert(all);
    let mut k = 0;
    while k < queue.len() {
        let face = queue[k].clone();
        k += 1;
        for r in 0..h.rows.len() {
            let sub: Vec<usize> = face
                .iter()
                .copied()
                .filter(|&g| h.is_tight(r, &gens[g]))
                .collect();
            if !sub.is_empty() && sub.len() < face.len() && seen.insert(sub.clone()) {
                queue.push(sub);
            }
        }
    }
    let mut faces: Vec<(Vec<usize>, Vec<usize>)> = queue
        .into_iter()
        .map(|f| {
            let active = (0..h.rows.len())
                .filter(|&r| f.iter().all(|&g| h.is_tight(r, &gens[g])))
                .collect();
            (f, active)
        })
        .collect();
    faces.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
    faces
}

pub fn face_slice_vrep(gens: &[&DVector<f64>]) -> SliceVrep {
    let mut out = SliceVrep::default();
    for g in gens {
        let tail: Vec<f64> = g.iter().skip(1).copied().collect();
        if g[0] > VERTEX_TOL {
            out.vertices.push(tail.iter().map(|v| v / g[0]).collect());
        } else {
            out.rays.push(tail);
        }
    }
    out
}

/// Average of the generator aggregates `γ_obj A_obj + A(γ)`; its kernel is the
/// common kernel V(F) of the face.
fn average_aggregate(inst: &QcqpInstance, gens: &[&DVector<f64>]) -> SymMatrix {
    let mut acc = SymMatrix::zeros(inst.n);
    for g in gens {
        acc = &acc + &inst.aggregate_stacked(g).expect("generator length").a;
    }
    acc.scale(1.0 / gens.len().max(1) as f64)
}

/// Common kernel of the aggregates over the face generated by `gens`.
pub fn compute_vf(inst: &QcqpInstance, gens: &[&DVector<f64>]) -> DMatrix<f64> {
    let avg = average_aggregate(inst, gens);
    let k = kernel_basis(&avg, PSD_TOL);
    if k.ncols() > 0 || avg.min_eigenvalue() > PSD_TOL {
        return k;
    }
    let spec = eig_sym(&avg);
    DMatrix::from_columns(&[spec.vector(0)])
}

/// DEFINITE when some unit-sum combination of the face generators has an
/// aggregate with smallest eigenvalue above the definiteness threshold.
pub fn classify_face(
    inst: &QcqpInstance,
    gens: &[&DVector<f64>],
) -> (FaceKind, Option<Vec<f64>>, DMatrix<f64>) {
    let avg = average_aggregate(inst, gens);
    let lmin = avg.min_eigenvalue();
    let combine = |w: &[f64]| -> Vec<f64> {
        let mut acc = DVector::zeros(inst.m() + 1);
        for (g, wk) in gens.iter().zip(w) {
            acc += *g * *wk;
        }
        acc.iter().copied().collect()
    };
    if lmin > PSD_TOL {
        let w = vec![1.0 / gens.len() as f64; gens.len()];
        return (
            FaceKind::Definite,
            Some(combine(&w)),
            DMatrix::zeros(inst.n, 0),
        );
    }
    if lmin > 0.0 {
        // Borderline: let the max-min-eigenvalue program look for a better mix.
        let aggs: Vec<SymMatrix> = gens
            .iter()
            .map(|g| inst.aggregate_stacked(g).expect("generator length").a)
            .collect();
        let res = MaxMinEig::unit_sum(&aggs).solve(DEFAULT_EPS);
        if res.min_eig > PSD_TOL {
            return (
                FaceKind::Definite,
                Some(combine(&res.weights)),
                DMatrix::zeros(inst.n, 0),
            );
        }
    }
    (FaceKind::Semidefinite, None, compute_vf(inst, gens))
}

/// Everything the polyhedral exactness checks need about Γ.
#[derive(Clone, Debug, Serialize)]
pub struct GammaData {
    pub provenance: GammaProvenance,
    /// Congruence `x = P y` applied before the diagonal construction.
    #[serde(serialize_with = "ser_opt_matrix")]
    pub transform: Option<DMatrix<f64>>,
    /// Instance in the coordinates where Γ was computed.
    #[serde(skip)]
    pub instance: QcqpInstance,
    pub hrep: HPolyCone,
    #[serde(serialize_with = "ser_vecs")]
    pub generators: Vec<DVector<f64>>,
    pub definiteness: DefinitenessWitness,
    pub faces: Vec<FaceDescriptor>,
}

fn ser_opt_matrix<S: serde::Serializer>(
    m: &Option<DMatrix<f64>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    let rows: Option<Vec<Vec<f64>>> = m.as_ref().map(|m| {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    });
    rows.serialize(s)
}

pub(crate) fn ser_vecs<S: serde::Serializer>(
    v: &[DVector<f64>],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    let rows: Vec<Vec<f64>> = v.iter().map(|g| g.iter().copied().collect()).collect();
    rows.serialize(s)
}

impl GammaData {
    pub fn semidefinite_faces(&self) -> impl Iterator<Item = &FaceDescriptor> {
        self.faces
            .iter()
            .filter(|f| f.kind == FaceKind::Semidefinite)
    }
}

/// Attempts a congruence `P` making every quadratic part diagonal: first an
/// orthogonal basis from a generic combination, then the same after whitening
/// by a positive definite objective.
pub fn simultaneous_diagonalizer(inst: &QcqpInstance) -> Option<DMatrix<f64>> {
    let mats: Vec<&SymMatrix> = std::iter::once(&inst.objective.a)
        .chain(inst.constraints().map(|(q, _)| &q.a))
        .collect();
    let try_orthogonal = |mats: &[SymMatrix]| -> Option<DMatrix<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let weights: Vec<f64> = mats.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
        let comb = SymMatrix::linear_combination(&weights, mats);
        let v = eig_sym(&comb).vectors;
        let ok = mats.iter().all(|m| {
            let t = m.congruence(&v);
            t.is_diagonal(1e-9 * m.frobenius_norm().max(1.0))
        });
        ok.then_some(v)
    };
    let owned: Vec<SymMatrix> = mats.iter().map(|m| (*m).clone()).collect();
    if let Some(v) = try_orthogonal(&owned) {
        return Some(v);
    }
    let obj = &inst.objective.a;
    let spec = eig_sym(obj);
    if spec.values[0] <= PSD_TOL * spec.spectral_norm().max(1.0) {
        return None;
    }
    let inv_sqrt = &spec.vectors
        * DMatrix::from_diagonal(&spec.values.map(|l| 1.0 / l.sqrt()))
        * spec.vectors.transpose();
    let whitened: Vec<SymMatrix> = mats.iter().map(|m| m.congruence(&inv_sqrt)).collect();
    try_orthogonal(&whitened).map(|v| inv_sqrt * v)
}

fn clean_diagonal(inst: &QcqpInstance) -> QcqpInstance {
    let clean = |q: &QuadraticForm| QuadraticForm {
        a: SymMatrix::diag(q.a.diagonal().as_slice()),
        b: q.b.clone(),
        c: q.c,
    };
    QcqpInstance {
        n: inst.n,
        objective: clean(&inst.objective),
        inequalities: inst.inequalities.iter().map(clean).collect(),
        equalities: inst.equalities.iter().map(clean).collect(),
        gamma_generators: inst.gamma_generators.clone(),
    }
}

/// Builds Γ data along the first applicable path: diagonal instance,
/// simultaneously diagonalizable instance, or user-supplied generators.
/// Returns `Ok(None)` when none applies.
pub fn prepare_gamma(inst: &QcqpInstance) -> Result<Option<GammaData>> {
    let (provenance, transform, work) = if inst.is_diagonal() {
        (GammaProvenance::DiagonalAuto, None, inst.clone())
    } else if let Some(p) = simultaneous_diagonalizer(inst) {
        let t = clean_diagonal(&inst.congruence_transform(&p)?);
        (GammaProvenance::Transformed, Some(p), t)
    } else if inst.gamma_generators.is_some() {
        (GammaProvenance::GeneratorSupplied, None, inst.clone())
    } else {
        return Ok(None);
    };
    let (hrep, generators) = if provenance == GammaProvenance::GeneratorSupplied {
        let gens: Vec<DVector<f64>> = inst.gamma_generators.clone().unwrap_or_default();
        for g in &gens {
            if !verify_generator(inst, g, PSD_TOL) {
                return Err(Error::Input(format!(
                    "supplied generator {:?} is not in the multiplier cone",
                    g.as_slice()
                )));
            }
        }
        // Facet normals of cone(gens) are the extreme rays of its dual cone.
        let dual = HPolyCone {
            dim: inst.m() + 1,
            rows: gens.iter().map(|g| g.iter().copied().collect()).collect(),
        };
        let normals = dd_extreme_rays(&dual)?;
        let h = HPolyCone {
            dim: inst.m() + 1,
            rows: normals
                .iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        };
        (h, gens)
    } else {
        let h = build_gamma_hrep_diag(&work)?;
        let rays = dd_extreme_rays(&h)?;
        (h, rays)
    };
    let definiteness = check_definiteness_assumption(&work, &generators);
    let faces = enumerate_faces(&hrep, &generators)
        .into_iter()
        .map(|(ids, active)| {
            let gs: Vec<&DVector<f64>> = ids.iter().map(|&i| &generators[i]).collect();
            let (kind, witness, vf) = classify_face(&work, &gs);
            FaceDescriptor {
                active_rows: active,
                generator_ids: ids,
                kind,
                vf_basis: vf,
                definite_witness: witness,
                slice: face_slice_vrep(&gs),
            }
        })
        .collect();
    Ok(Some(GammaData {
        provenance,
        transform,
        instance: work,
        hrep,
        generators,
        definiteness,
        faces,
    }))
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

    fn contains_ray(rays: &[DVector<f64>], r: &[f64]) -> bool {
        let t = normalize_inf(&DVector::from_column_slice(r));
        rays.iter().any(|x| (x - &t).amax() < 1e-9)
    }

    #[test]
    fn hrep_of_example() {
        let h = build_gamma_hrep_diag(&hyperbola_pair()).unwrap();
        assert_eq!(
            h.rows,
            vec![
                vec![1.0, -2.0, 1.0],
                vec![1.0, 1.0, -2.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0]
            ]
        );
    }

    #[test]
    fn hrep_rejects_dense() {
        let mut inst = hyperbola_pair();
        inst.objective.a = SymMatrix::from_row_slice(2, &[1.0, 0.1, 0.1, 1.0]);
        assert!(matches!(
            build_gamma_hrep_diag(&inst),
            Err(Error::NotDiagonal(_))
        ));
    }

    #[test]
    fn rays_of_example() {
        let rays = dd_extreme_rays(&build_gamma_hrep_diag(&hyperbola_pair()).unwrap()).unwrap();
        assert_eq!(rays.len(), 4);
        for r in [
            [1.0, 0.0, 0.0],
            [2.0, 1.0, 0.0],
            [2.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
        ] {
            assert!(contains_ray(&rays, &r), "missing {r:?}");
        }
    }

    #[test]
    fn orthant_and_lineality() {
        let h = HPolyCone {
            dim: 2,
            rows: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let rays = dd_extreme_rays(&h).unwrap();
        assert_eq!(rays.len(), 2);
        let half = HPolyCone {
            dim: 2,
            rows: vec![vec![1.0, 0.0]],
        };
        let rays = dd_extreme_rays(&half).unwrap();
        assert_eq!(rays.len(), 3);
        assert!(contains_ray(&rays, &[1.0, 0.0]));
        assert!(contains_ray(&rays, &[0.0, 1.0]) && contains_ray(&rays, &[0.0, -1.0]));
    }

    #[test]
    fn size_cap() {
        let h = HPolyCone {
            dim: 13,
            rows: vec![],
        };
        assert!(matches!(dd_extreme_rays(&h), Err(Error::SizeCap(_))));
    }

    #[test]
    fn generator_membership() {
        let inst = hyperbola_pair();
        assert!(verify_generator(
            &inst,
            &DVector::from_vec(vec![1.0, 1.0, 1.0]),
            1e-9
        ));
        assert!(verify_generator(
            &inst,
            &DVector::from_vec(vec![2.0, 1.0, 0.0]),
            1e-9
        ));
        assert!(!verify_generator(
            &inst,
            &DVector::from_vec(vec![0.0, 1.0, 0.0]),
            1e-9
        ));
        assert!(!verify_generator(
            &inst,
            &DVector::from_vec(vec![1.0, -0.1, 0.0]),
            1e-9
        ));
    }

    #[test]
    fn definiteness_of_example() {
        let inst = hyperbola_pair();
        let rays = dd_extreme_rays(&build_gamma_hrep_diag(&inst).unwrap()).unwrap();
        let w = check_definiteness_assumption(&inst, &rays);
        assert!(w.holds);
        assert!(
            (w.gamma[0] - 1.0).abs() < 1e-4 && w.gamma[1].abs() < 1e-4 && w.gamma[2].abs() < 1e-4
        );
        let ray_only = [DVector::from_vec(vec![1.0, 1.0, 1.0])];
        assert!(!check_definiteness_assumption(&inst, &ray_only).holds);
    }

    #[test]
    fn faces_of_example() {
        let data = prepare_gamma(&hyperbola_pair()).unwrap().unwrap();
        assert_eq!(data.provenance, GammaProvenance::DiagonalAuto);
        assert_eq!(data.faces.len(), 9);
        assert_eq!(data.faces[0].generator_ids.len(), 4);
        let semis: Vec<&FaceDescriptor> = data.semidefinite_faces().collect();
        assert_eq!(semis.len(), 5);
        for f in &data.faces {
            assert_eq!(f.kind == FaceKind::Semidefinite, f.vf_dim() > 0);
        }
        let apex = data
            .faces
            .iter()
            .find(|f| {
                f.generator_ids.len() == 1
                    && (data.generators[f.generator_ids[0]][1] - 1.0).abs() < 1e-12
            })
            .unwrap();
        assert_eq!(apex.vf_dim(), 2);
        assert_eq!(apex.slice.vertices, vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn supplied_generators_give_facets() {
        let mut inst = hyperbola_pair();
        inst.objective.a = SymMatrix::from_row_slice(2, &[1.0, 0.2, 0.2, 1.0]);
        inst.inequalities[0].a = SymMatrix::from_row_slice(2, &[-1.0, 0.3, 0.3, 1.0]);
        let inst = inst
            .with_generators(vec![DVector::from_vec(vec![1.0, 0.0, 0.0])])
            .unwrap();
        let data = prepare_gamma(&inst).unwrap().unwrap();
        assert_eq!(data.provenance, GammaProvenance::GeneratorSupplied);
        assert_eq!(data.faces.len(), 1);
        assert_eq!(data.faces[0].kind, FaceKind::Definite);
    }
}
