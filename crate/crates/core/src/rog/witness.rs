//! Rank-two extreme rays of `T({M₁, M₂})` in dimension three.

use nalgebra::{DVector, Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::lines::null_set_lines_3d_seeded;
use super::{to_vec, Certificate, CERT_TOL};
use crate::error::{Error, Result};
use crate::linalg::{
    binary_quadratic_resultant, eig_sym, rank_eps, restrict_binary, SymMatrix, RANK_TOL,
};

/// Lower bound on `|resultant|` of the range-restricted, normalized forms.
pub const RESULTANT_TOL: f64 = 1e-9;
const MARGIN: f64 = 1e-3;
const STARTS: usize = 200;
const NEWTON_ITERS: usize = 100;
const NEWTON_TOL: f64 = 1e-10;
const W_DRAWS: usize = 1000;

#[derive(Clone, Debug, Serialize)]
pub struct Rank2Check {
    pub valid: bool,
    pub rank: usize,
    pub residuals: Vec<f64>,
    pub resultant: f64,
}

/// Checks that `Z` spans a rank-two extreme ray of `T({M₁, M₂})`.
pub fn verify_extreme_rank2(z: &SymMatrix, m1: &SymMatrix, m2: &SymMatrix) -> Rank2Check {
    let tr = z.trace();
    let invalid = |rank| Rank2Check {
        valid: false,
        rank,
        residuals: vec![],
        resultant: 0.0,
    };
    if tr.is_nan() || tr <= 0.0 || z.dim() != m1.dim() || z.dim() != m2.dim() {
        return invalid(0);
    }
    let zn = z.scale(1.0 / tr);
    let rank = rank_eps(&zn, RANK_TOL);
    let residuals: Vec<f64> = [m1, m2].iter().map(|m| m.inner(&zn)).collect();
    let spec = eig_sym(&zn);
    let d = zn.dim();
    if d < 2 {
        return invalid(rank);
    }
    let (p, q) = (spec.vector(d - 1), spec.vector(d - 2));
    let f = |m: &SymMatrix| {
        let n = m.frobenius_norm();
        restrict_binary(&m.scale(1.0 / n.max(f64::MIN_POSITIVE)), &p, &q)
    };
    let resultant = binary_quadratic_resultant(f(m1), f(m2));
    let psd = spec.values[0] >= -CERT_TOL;
    let valid = psd
        && rank == 2
        && residuals.iter().all(|r| r.abs() <= CERT_TOL)
        && resultant.abs() > RESULTANT_TOL;
    Rank2Check {
        valid,
        rank,
        residuals,
        resultant,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtremeRayWitness {
    pub z: SymMatrix,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub check: Rank2Check,
    pub lines: Vec<Vec<f64>>,
    /// Whether `w` lies within the margin of a plane spanned by two lines.
    pub w_near_line_plane: bool,
    pub seed: u64,
    pub newton_starts: usize,
}

impl ExtremeRayWitness {
    pub fn certificate(&self) -> Certificate {
        Certificate::ExtremeRayWitness {
            z: self.z.clone(),
            rank: self.check.rank,
            residuals: self.check.residuals.clone(),
            resultant: self.check.resultant,
            seed: self.seed,
        }
    }
}

fn far_from_lines(w: &DVector<f64>, lines: &[DVector<f64>]) -> bool {
    for (i, li) in lines.iter().enumerate() {
        if (w - li.scale(w.dot(li))).norm() < MARGIN {
            return false;
        }
        for lj in &lines[i + 1..] {
            let n = li.cross(lj);
            if n.norm() > 0.0 && (w.dot(&n) / n.norm()).abs() < MARGIN {
                return false;
            }
        }
    }
    true
}

fn unit_gaussian(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Minimum-norm damped Newton for `(uᵀN₁u, uᵀN₂u) = g`.
fn solve_u(n: &[SymMatrix; 2], g: [f64; 2], u0: DVector<f64>) -> Option<DVector<f64>> {
    let resid = |u: &DVector<f64>| Vector2::new(n[0].quad(u) - g[0], n[1].quad(u) - g[1]);
    let mut u = u0;
    let mut f = resid(&u);
    for _ in 0..NEWTON_ITERS {
        if f.norm() <= NEWTON_TOL {
            return Some(u);
        }
        let j1 = n[0].mul_vec(&u) * 2.0;
        let j2 = n[1].mul_vec(&u) * 2.0;
        let jjt = Matrix2::new(j1.dot(&j1), j1.dot(&j2), j2.dot(&j1), j2.dot(&j2));
        let y = jjt.lu().solve(&f)?;
        let delta = -(&j1 * y[0] + &j2 * y[1]);
        let mut step = 1.0;
        loop {
            let cand = &u + &delta * step;
            let fc = resid(&cand);
            if fc.norm() < (1.0 - 1e-4 * step) * f.norm() {
                u = cand;
                f = fc;
                break;
            }
            step *= 0.5;
            if step < 1e-10 {
                return None;
            }
        }
    }
    (f.norm() <= NEWTON_TOL).then_some(u)
}

/// Point `u` with `(uᵀN₁u, uᵀN₂u)` on the ray through `g`, found on the null
/// cone of `g₂N₁ − g₁N₂` along the line `t + s e` for an eigenvector `e`.
fn ray_point(n: &[SymMatrix; 2], g: [f64; 2], t: &DVector<f64>) -> Option<DVector<f64>> {
    let h = &n[0].scale(g[1]) - &n[1].scale(g[0]);
    let spec = eig_sym(&h);
    let d = h.dim();
    let ht = h.quad(t);
    let e = if ht < 0.0 {
        spec.vector(d - 1)
    } else {
        spec.vector(0)
    };
    let (a, b) = (h.quad(&e), h.mul_vec(t).dot(&e));
    let disc = b * b - a * ht;
    if a == 0.0 || disc < 0.0 {
        return None;
    }
    let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
    [(-b + disc.sqrt()) / a, (-b - disc.sqrt()) / a]
        .into_iter()
        .find_map(|s| {
            let v = t + &e * s;
            let along = (g[0] * n[0].quad(&v) + g[1] * n[1].quad(&v)) / gn;
            (along > 0.0).then(|| v * (gn / along).sqrt())
        })
}

/// Builds and verifies a rank-two witness for a 3×3 pair with neither a PSD combination nor a common factor.
pub fn construct_rank2_witness_3d(
    m1: &SymMatrix,
    m2: &SymMatrix,
    seed: u64,
) -> Result<ExtremeRayWitness> {
    construct(m1, m2, None, seed)
}

/// As [`construct_rank2_witness_3d`] with a caller-chosen `w`, which is used
/// even inside the margin of a line plane; the final check still applies.
pub fn construct_rank2_witness_3d_from(
    m1: &SymMatrix,
    m2: &SymMatrix,
    w: &DVector<f64>,
    seed: u64,
) -> Result<ExtremeRayWitness> {
    construct(m1, m2, Some(w.clone()), seed)
}

fn construct(
    m1: &SymMatrix,
    m2: &SymMatrix,
    fixed_w: Option<DVector<f64>>,
    seed: u64,
) -> Result<ExtremeRayWitness> {
    let lines = null_set_lines_3d_seeded(m1, m2, seed)?;
    let lv = lines.vectors();
    let n = [
        m1.scale(1.0 / m1.frobenius_norm()),
        m2.scale(1.0 / m2.frobenius_norm()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = 0;
    let mut last = String::from("no admissible w found");
    let w_rounds = if fixed_w.is_some() { 1 } else { 5 };
    for _ in 0..w_rounds {
        let w = match &fixed_w {
            Some(w) => w.clone(),
            None => match (0..W_DRAWS)
                .map(|_| unit_gaussian(&mut rng, 3))
                .find(|w| far_from_lines(w, &lv))
            {
                Some(w) => w,
                None => break,
            },
        };
        let g = [-n[0].quad(&w), -n[1].quad(&w)];
        for _ in 0..STARTS {
            starts += 1;
            let t = unit_gaussian(&mut rng, 3);
            let u0 = ray_point(&n, g, &t).unwrap_or_else(|| t * w.norm());
            let Some(u) = solve_u(&n, g, u0) else {
                last = "Newton did not converge".into();
                continue;
            };
            let z = &SymMatrix::outer(&w) + &SymMatrix::outer(&u);
            let z = z.scale(1.0 / z.trace());
            let check = verify_extreme_rank2(&z, m1, m2);
            if check.valid {
                return Ok(ExtremeRayWitness {
                    z,
                    w: to_vec(&w),
                    u: to_vec(&u),
                    check,
                    w_near_line_plane: !far_from_lines(&(&w / w.norm()), &lv),
                    lines: lines.lines,
                    seed,
                    newton_starts: starts,
                });
            }
            last = format!(
                "candidate rejected: rank {}, resultant {:.3e}",
                check.rank, check.resultant
            );
        }
    }
    Err(Error::Construction(format!(
        "{starts} Newton starts exhausted (seed {seed}); last: {last}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (SymMatrix, SymMatrix) {
        (
            SymMatrix::diag(&[1.0, -1.0, 0.0]),
            SymMatrix::diag(&[0.0, 1.0, -1.0]),
        )
    }

    #[test]
    fn worked_witness_verifies() {
        let (m1, m2) = pair();
        let w = DVector::from_column_slice(&[-1.0, 0.0, 1.0]);
        let u = DVector::from_column_slice(&[1.0, 2f64.sqrt(), 1.0]);
        let z = &SymMatrix::outer(&w) + &SymMatrix::outer(&u);
        let chk = verify_extreme_rank2(&z, &m1, &m2);
        assert!(chk.valid, "{chk:?}");
        assert!(chk.resultant.abs() > RESULTANT_TOL);
        // Unnormalized restriction to an orthonormal range basis gives -1/4.
        assert!((chk.resultant * 4.0 + 0.25).abs() < 1e-9);
    }

    #[test]
    fn rank_one_and_line_pairs_rejected() {
        let (m1, m2) = pair();
        let l1 = DVector::from_column_slice(&[1.0, 1.0, 1.0]);
        let l2 = DVector::from_column_slice(&[1.0, -1.0, 1.0]);
        assert!(!verify_extreme_rank2(&SymMatrix::outer(&l1), &m1, &m2).valid);
        let z = &SymMatrix::outer(&l1) + &SymMatrix::outer(&l2);
        let chk = verify_extreme_rank2(&z, &m1, &m2);
        assert_eq!(chk.rank, 2);
        assert!(!chk.valid);
    }

    #[test]
    fn construction_default_seed() {
        let (m1, m2) = pair();
        let wit = construct_rank2_witness_3d(&m1, &m2, 0).unwrap();
        assert!(verify_extreme_rank2(&wit.z, &m1, &m2).valid);
        let w = DVector::from_column_slice(&[-1.0, 0.0, 1.0]);
        let wit = construct_rank2_witness_3d_from(&m1, &m2, &w, 0).unwrap();
        assert!(wit.w_near_line_plane);
        let u = DVector::from_column_slice(&wit.u);
        assert!((m1.quad(&u) + m1.quad(&w)).abs() < 1e-9);
        assert!((m2.quad(&u) + m2.quad(&w)).abs() < 1e-9);
    }

    #[test]
    fn construction_precondition() {
        let (m1, _) = pair();
        assert!(construct_rank2_witness_3d(&m1, &SymMatrix::diag(&[1.0, 1.0, 0.5]), 0).is_err());
    }
}
