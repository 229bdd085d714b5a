//! One-sided ROG evidence: compares `min ⟨C, Z⟩` over the cone (trace one)
//! with the best sampled and polished rank-one point, for random `C`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::rules::SocCapSet;
use super::LmiSet;
use crate::error::{Error, Result};
use crate::linalg::{eig_sym, kernel_basis, SymMatrix};
use crate::oracles::{sphere_samples, SPHERE_FEAS_TOL};
use crate::solver::cone::{solve_cone, AdmmSettings, ConeBuilder};
use crate::solver::{self, ConicProgram, MaxMinEig, SolveStatus};

pub const PROBE_SAMPLES: usize = 200_000;
/// Gap above which a trial counts as evidence against ROG.
pub const GAP_TOL: f64 = 1e-3;
const POLISH_FEAS: f64 = 1e-9;
const STARTS_PER_KIND: usize = 8;
const NEAR_ACTIVE: f64 = 0.2;
const FACE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct ProbeTrial {
    pub v_sdp: f64,
    pub v_rank1: f64,
    pub gap: f64,
    pub sdp_status: SolveStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub trials: Vec<ProbeTrial>,
    pub max_gap: f64,
    pub not_rog_evidence: bool,
    /// Whether the trace-one slice of the cone was found empty.
    pub trivial_cone: bool,
    pub samples: usize,
    pub seed: u64,
    pub evidence: &'static str,
}

fn random_objective(rng: &mut ChaCha8Rng, d: usize) -> SymMatrix {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let c = SymMatrix::new((&g + g.transpose()) * 0.5);
    let n = c.frobenius_norm();
    c.scale(1.0 / n)
}

/// Residual and Jacobian of the KKT system of `min zᵀCz` on the unit sphere
/// with the members in `active` held at zero.
fn kkt_newton(
    c: &SymMatrix,
    cons: &[SymMatrix],
    active: &[usize],
    z0: &DVector<f64>,
) -> Option<DVector<f64>> {
    let d = z0.len();
    let k = active.len();
    let mut z = z0.normalize();
    // Least-squares multipliers for the stationarity equation.
    let mut cols = vec![z.clone()];
    cols.extend(active.iter().map(|&i| cons[i].mul_vec(&z)));
    let a = crate::linalg::columns_to_matrix(d, &cols);
    let rhs = -c.mul_vec(&z);
    let mut mult = a.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
    for _ in 0..40 {
        let mut h = c.matrix() + DMatrix::identity(d, d) * mult[0];
        for (j, &i) in active.iter().enumerate() {
            h += cons[i].matrix() * mult[j + 1];
        }
        let mut r = DVector::zeros(d + 1 + k);
        let g = &h * &z;
        r.rows_mut(0, d).copy_from(&g);
        r[d] = 0.5 * (z.norm_squared() - 1.0);
        for (j, &i) in active.iter().enumerate() {
            r[d + 1 + j] = 0.5 * cons[i].quad(&z);
        }
        if r.amax() <= 1e-14 {
            break;
        }
        let mut jac = DMatrix::zeros(d + 1 + k, d + 1 + k);
        jac.view_mut((0, 0), (d, d)).copy_from(&h);
        jac.view_mut((0, d), (d, 1)).copy_from(&z);
        jac.view_mut((d, 0), (1, d)).copy_from(&z.transpose());
        for (j, &i) in active.iter().enumerate() {
            let mz = cons[i].mul_vec(&z);
            jac.view_mut((0, d + 1 + j), (d, 1)).copy_from(&mz);
            jac.view_mut((d + 1 + j, 0), (1, d))
                .copy_from(&mz.transpose());
        }
        let step = jac.lu().solve(&(-r))?;
        z += step.rows(0, d);
        mult += step.rows(d, k + 1);
        if !z.iter().all(|x| x.is_finite()) {
            return None;
        }
    }
    let z = z.normalize();
    cons.iter().all(|m| m.quad(&z) <= POLISH_FEAS).then_some(z)
}

fn subsets(idx: &[usize]) -> Vec<Vec<usize>> {
    (0..1usize << idx.len())
        .map(|mask| {
            (0..idx.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| idx[b])
                .collect()
        })
        .collect()
}

/// Best feasible rank-one value from samples plus KKT polishing.
fn rank_one_min(
    c: &SymMatrix,
    cons: &[SymMatrix],
    samples: &[DVector<f64>],
    extra: &[DVector<f64>],
) -> f64 {
    let mut best = f64::INFINITY;
    let mut feasible: Vec<(f64, usize)> = Vec::new();
    let mut near: Vec<(f64, usize)> = Vec::new();
    for (k, z) in samples.iter().enumerate() {
        let viol = cons
            .iter()
            .map(|m| m.quad(z))
            .fold(f64::NEG_INFINITY, f64::max);
        let v = c.quad(z);
        if viol <= SPHERE_FEAS_TOL {
            best = best.min(v);
            feasible.push((v, k));
        } else {
            near.push((v + 10.0 * viol, k));
        }
    }
    let pick = |mut list: Vec<(f64, usize)>| {
        list.sort_by(|a, b| a.0.total_cmp(&b.0));
        list.into_iter()
            .take(STARTS_PER_KIND)
            .map(|(_, k)| samples[k].clone())
            .collect::<Vec<_>>()
    };
    let mut starts = pick(feasible);
    starts.extend(pick(near));
    starts.extend(extra.iter().cloned());
    let spec = eig_sym(c);
    starts.extend((0..c.dim()).map(|k| spec.vector(k)));
    for z0 in &starts {
        let mut near_idx: Vec<(f64, usize)> = cons
            .iter()
            .enumerate()
            .map(|(i, m)| (m.quad(z0).abs(), i))
            .filter(|(v, _)| *v <= NEAR_ACTIVE)
            .collect();
        near_idx.sort_by(|a, b| a.0.total_cmp(&b.0));
        let idx: Vec<usize> = near_idx
            .iter()
            .take(c.dim().saturating_sub(1).min(4))
            .map(|p| p.1)
            .collect();
        for act in subsets(&idx) {
            if let Some(z) = kkt_newton(c, cons, &act, z0) {
                best = best.min(c.quad(&z));
            }
        }
    }
    best
}

fn normalized_members(mats: &[SymMatrix]) -> Vec<SymMatrix> {
    mats.iter()
        .filter(|m| m.frobenius_norm() > 0.0)
        .map(|m| m.scale(1.0 / m.frobenius_norm()))
        .collect()
}

fn top_eigvecs(z: &SymMatrix) -> Vec<DVector<f64>> {
    let spec = eig_sym(z);
    let d = z.dim();
    (0..d.min(2)).map(|k| spec.vector(d - 1 - k)).collect()
}

fn finish(trials: Vec<ProbeTrial>, trivial: bool, seed: u64) -> ProbeReport {
    let max_gap = trials.iter().map(|t| t.gap).fold(0.0, f64::max);
    ProbeReport {
        not_rog_evidence: max_gap > GAP_TOL,
        max_gap,
        trials,
        trivial_cone: trivial,
        samples: PROBE_SAMPLES,
        seed,
        evidence: "ONE_SIDED",
    }
}

fn gap_of(v_rank1: f64, v_sdp: f64) -> f64 {
    if v_rank1.is_infinite() && v_sdp.is_infinite() {
        0.0
    } else {
        v_rank1 - v_sdp
    }
}

/// Orthonormal basis of a subspace containing the range of every `Z ⪰ 0` with
/// `⟨M, Z⟩ ≤ 0` for all members: repeatedly restricts to `ker P` for a nonzero
/// PSD combination `P = Σ α_i M_i`, `α ≥ 0`.
fn face_basis(cons: &[SymMatrix], dim: usize) -> DMatrix<f64> {
    let mut u = DMatrix::identity(dim, dim);
    for _ in 0..dim {
        if u.ncols() == 0 {
            break;
        }
        let reduced =
            normalized_members(&cons.iter().map(|m| m.congruence(&u)).collect::<Vec<_>>());
        if reduced.is_empty() {
            break;
        }
        let problem = MaxMinEig::unit_sum(&reduced);
        let r = problem.solve(1e-9);
        let p = problem.combination(&r.weights);
        let norm = p.frobenius_norm();
        if norm < FACE_TOL || p.min_eigenvalue() < -FACE_TOL * norm {
            break;
        }
        let ker = kernel_basis(&p.scale(1.0 / norm), FACE_TOL);
        if ker.ncols() == u.ncols() {
            break;
        }
        u = &u * ker;
    }
    u
}

/// Random-objective probe of `S(M)`; never certifies ROG.
pub fn probe_random_objectives(
    mset: &LmiSet,
    dim: usize,
    trials: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if dim > 4 {
        return Err(Error::SizeCap(format!(
            "probe supports dimension <= 4, got {dim}"
        )));
    }
    if let Some(d) = mset.dim() {
        crate::error::check_dim(dim, d)?;
    }
    let cons = normalized_members(&mset.expanded());
    let u = face_basis(&cons, dim);
    let trivial = u.ncols() == 0;
    let (face_cons, samples) = if trivial {
        (Vec::new(), Vec::new())
    } else {
        let reduced: Vec<SymMatrix> = cons.iter().map(|m| m.congruence(&u)).collect();
        (
            normalized_members(&reduced),
            sphere_samples(u.ncols(), PROBE_SAMPLES, seed),
        )
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let c = random_objective(&mut rng, dim);
        if trivial {
            out.push(ProbeTrial {
                v_sdp: f64::INFINITY,
                v_rank1: f64::INFINITY,
                gap: 0.0,
                sdp_status: SolveStatus::InfeasibleLikely,
            });
            continue;
        }
        let cf = c.congruence(&u);
        let mut prog = ConicProgram::new(cf.clone()).with_trace(1.0);
        for m in &face_cons {
            prog = prog.le(m.clone(), 0.0);
        }
        let sol = solver::solve(&prog, 1e-8, 20_000)?;
        let v_rank1 = rank_one_min(&cf, &face_cons, &samples, &top_eigvecs(&sol.z));
        let v_sdp = sol.objective_value;
        out.push(ProbeTrial {
            v_sdp,
            v_rank1,
            gap: gap_of(v_rank1, v_sdp),
            sdp_status: sol.status,
        });
    }
    Ok(finish(out, trivial, seed))
}

/// `min ⟨C, Z⟩` over the SOC cap with `tr Z = 1`, via an arrow-matrix block
/// linked to `Zc`.
fn soc_cap_sdp(cap: &SocCapSet, c: &SymMatrix) -> (f64, SymMatrix, SolveStatus) {
    let d = cap.dim();
    let spec = eig_sym(&cap.l);
    let cv = DVector::from_column_slice(&cap.c);
    let mut bld = ConeBuilder::new();
    let zb = bld.psd(d);
    let ab = bld.psd(d);
    let sl = bld.nonneg(1);
    bld.add_eq(bld.matrix_terms(zb, &SymMatrix::identity(d), 1.0), 1.0);
    let mut row = bld.matrix_terms(zb, &cap.l, 1.0);
    row.push((bld.var(sl, 0), 1.0));
    bld.add_eq(row, 0.0);
    // y = Qᵀ Z c in the eigenbasis of L: y_0 is the negative direction.
    let lin = |k: usize, bld: &ConeBuilder, coeff: f64| -> Vec<(usize, f64)> {
        let q = spec.vector(k);
        let w = SymMatrix::sym_outer(&q, &cv);
        bld.matrix_terms(zb, &w, coeff)
    };
    let sign = if DVector::from_column_slice(&cap.v).dot(&spec.vector(0)) >= 0.0 {
        1.0
    } else {
        -1.0
    };
    let t_scale = (-spec.values[0]).sqrt() * sign;
    for k in 0..d {
        let mut r = lin(0, &bld, -t_scale);
        r.push(bld.entry_term(ab, k, k, 1.0));
        bld.add_eq(r, 0.0);
    }
    for k in 1..d {
        let mut r = lin(k, &bld, -spec.values[k].sqrt());
        r.push(bld.entry_term(ab, k - 1, d - 1, 1.0));
        bld.add_eq(r, 0.0);
        for l in k..d - 1 {
            bld.add_eq(vec![bld.entry_term(ab, k - 1, l, 1.0)], 0.0);
        }
    }
    bld.add_objective(bld.matrix_terms(zb, c, 1.0));
    let sol = solve_cone(&bld.build(), &AdmmSettings::new(1e-8, 20_000));
    let z = bld.block_matrix(&sol.x, zb);
    (c.inner(&z), z, sol.status)
}

/// Random-objective probe of the SOC-cap cone.
pub fn probe_soc_cap(cap: &SocCapSet, trials: usize, seed: u64) -> Result<ProbeReport> {
    let d = cap.dim();
    if d > 4 {
        return Err(Error::SizeCap(format!(
            "probe supports dimension <= 4, got {d}"
        )));
    }
    let cons = normalized_members(&cap.rank_one_constraints().expanded());
    let samples = sphere_samples(d, PROBE_SAMPLES, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let c = random_objective(&mut rng, d);
        let (v_sdp, z, status) = soc_cap_sdp(cap, &c);
        let v_rank1 = rank_one_min(&c, &cons, &samples, &top_eigvecs(&z));
        out.push(ProbeTrial {
            v_sdp,
            v_rank1,
            gap: gap_of(v_rank1, v_sdp),
            sdp_status: status,
        });
    }
    Ok(finish(out, false, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lmi_has_no_gap() {
        let set = LmiSet::inequalities(vec![SymMatrix::diag(&[1.0, -1.0])]);
        let r = probe_random_objectives(&set, 2, 5, 0).unwrap();
        assert!(!r.not_rog_evidence, "{r:?}");
    }

    #[test]
    fn empty_set_has_no_gap() {
        let r = probe_random_objectives(&LmiSet::default(), 3, 3, 1).unwrap();
        assert!(r.max_gap <= GAP_TOL, "{r:?}");
    }

    #[test]
    fn planar_pair_gap_with_identity_objective() {
        let set = LmiSet::equalities(vec![
            SymMatrix::diag(&[1.0, -1.0]),
            SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]),
        ]);
        let cons = normalized_members(&set.expanded());
        let c = SymMatrix::identity(2);
        let mut prog = ConicProgram::new(c.clone()).with_trace(1.0);
        for m in &cons {
            prog = prog.le(m.clone(), 0.0);
        }
        // Z = I/2 is feasible; no unit z is.
        let sol = solver::solve(&prog, 1e-8, 20_000).unwrap();
        assert!(sol.objective_value <= 1.0 + 1e-6);
        let samples = sphere_samples(2, 20_000, 0);
        assert!(rank_one_min(&c, &cons, &samples, &[]).is_infinite());
        let r = probe_random_objectives(&set, 2, 3, 0).unwrap();
        assert!(r.not_rog_evidence);
    }

    #[test]
    fn soc_cap_has_no_gap() {
        let cap = SocCapSet::standard(DVector::from_column_slice(&[0.4, -0.2, 1.0])).unwrap();
        let r = probe_soc_cap(&cap, 3, 0).unwrap();
        assert!(!r.not_rog_evidence, "{r:?}");
    }
}
