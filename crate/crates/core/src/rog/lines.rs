//! Common zeros of two ternary quadratic forms: the lines of `N(M)` in `R³`.

use nalgebra::{Complex, DMatrix, DVector, Matrix3, Schur, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{angular_scan, common_factor_pair, CERT_TOL};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

const LEAD_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-5;
const ANGLE_TOL: f64 = 1e-7;
const LINE_TOL: f64 = 1e-8;
const MAX_ATTEMPTS: usize = 5;

#[derive(Clone, Debug, Serialize)]
pub struct NullSetLines {
    /// Unit directions, one per line.
    pub lines: Vec<Vec<f64>>,
    pub attempts: usize,
    pub seed: u64,
}

impl NullSetLines {
    pub fn vectors(&self) -> Vec<DVector<f64>> {
        self.lines
            .iter()
            .map(|l| DVector::from_column_slice(l))
            .collect()
    }
}

type Poly = Vec<f64>;

fn padd(a: &[f64], b: &[f64]) -> Poly {
    (0..a.len().max(b.len()))
        .map(|i| a.get(i).unwrap_or(&0.0) + b.get(i).unwrap_or(&0.0))
        .collect()
}

fn pscale(a: &[f64], s: f64) -> Poly {
    a.iter().map(|x| x * s).collect()
}

fn pmul(a: &[f64], b: &[f64]) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Real roots of `Σ p_k s^k` via the companion matrix.
fn real_roots(p: &[f64]) -> Vec<f64> {
    let scale = p.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut deg = p.len() - 1;
    while deg > 0 && p[deg].abs() <= LEAD_TOL * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = p[deg];
    let mut c = DMatrix::zeros(deg, deg);
    for i in 1..deg {
        c[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        c[(i, deg - 1)] = -p[i] / lead;
    }
    let roots: Vec<Complex<f64>> = match Schur::try_new(c, f64::EPSILON, 10_000) {
        Some(schur) => schur.complex_eigenvalues().iter().copied().collect(),
        None => durand_kerner(&p[..=deg]),
    };
    roots
        .iter()
        .filter(|z| z.im.abs() <= IMAG_TOL * z.re.abs().max(1.0))
        .map(|z| z.re)
        .collect()
}

/// All complex roots of `Σ p_k s^k` (nonzero leading coefficient) by simultaneous iteration.
fn durand_kerner(p: &[f64]) -> Vec<Complex<f64>> {
    let deg = p.len() - 1;
    let lead = p[deg];
    let eval = |z: Complex<f64>| {
        p.iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c / lead)
    };
    let radius = 1.0 + p[..deg].iter().fold(0.0f64, |a, c| a.max((c / lead).abs()));
    let seed = Complex::new(0.4, 0.9);
    let mut z: Vec<Complex<f64>> = (0..deg).map(|k| seed.powu(k as u32) * radius).collect();
    for _ in 0..500 {
        let mut delta: f64 = 0.0;
        for i in 0..deg {
            let denom = (0..deg)
                .filter(|&j| j != i)
                .fold(Complex::new(1.0, 0.0), |acc, j| acc * (z[i] - z[j]));
            if denom.norm() == 0.0 {
                continue;
            }
            let step = eval(z[i]) / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta <= 1e-15 * radius {
            break;
        }
    }
    z
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    real_roots(&[c, b, a])
}

fn is_zero_poly(p: &[f64], scale: f64) -> bool {
    p.iter().all(|x| x.abs() <= LEAD_TOL * scale)
}

/// Newton polish of `(zᵀM₁z, zᵀM₂z) = 0` along the chart `z = base + s·e_s + t·e_t`.
fn polish(m: &[Matrix3<f64>; 2], z0: Vector3<f64>, free: (usize, usize)) -> Vector3<f64> {
    let mut z = z0;
    for _ in 0..30 {
        let f = [z.dot(&(m[0] * z)), z.dot(&(m[1] * z))];
        if f[0].abs().max(f[1].abs()) <= 1e-15 * z.norm_squared() {
            break;
        }
        let g = [m[0] * z * 2.0, m[1] * z * 2.0];
        let j = nalgebra::Matrix2::new(g[0][free.0], g[0][free.1], g[1][free.0], g[1][free.1]);
        let Some(step) = j.lu().solve(&nalgebra::Vector2::new(-f[0], -f[1])) else {
            break;
        };
        let mut zn = z;
        zn[free.0] += step[0];
        zn[free.1] += step[1];
        if !zn.iter().all(|x| x.is_finite()) {
            break;
        }
        z = zn;
    }
    z
}

fn on_both(m: &[Matrix3<f64>; 2], norms: [f64; 2], z: &Vector3<f64>) -> bool {
    let u = z / z.norm();
    (0..2).all(|i| u.dot(&(m[i] * u)).abs() <= LINE_TOL * norms[i].max(1.0))
}

fn push_dedup(out: &mut Vec<Vector3<f64>>, z: Vector3<f64>) {
    let mut u = z / z.norm();
    let k = u.iamax();
    if u[k] < 0.0 {
        u = -u;
    }
    if !out.iter().any(|v| v.cross(&u).norm() <= ANGLE_TOL) {
        out.push(u);
    }
}

/// Lines in one coordinate frame; `None` signals a degenerate elimination.
fn lines_in_frame(m: &[Matrix3<f64>; 2]) -> Option<Vec<Vector3<f64>>> {
    let norms = [m[0].norm(), m[1].norm()];
    let scale = norms[0].max(norms[1]);
    let mut out: Vec<Vector3<f64>> = Vec::new();

    // Chart z = (1, s, t): q_i = a_i t² + b_i(s) t + c_i(s).
    let a = [m[0][(2, 2)], m[1][(2, 2)]];
    if a[0].abs() <= LEAD_TOL * scale && a[1].abs() <= LEAD_TOL * scale {
        return None;
    }
    let b: Vec<Poly> = m
        .iter()
        .map(|mi| vec![2.0 * mi[(0, 2)], 2.0 * mi[(1, 2)]])
        .collect();
    let c: Vec<Poly> = m
        .iter()
        .map(|mi| vec![mi[(0, 0)], 2.0 * mi[(0, 1)], mi[(1, 1)]])
        .collect();
    let t1 = padd(&pscale(&c[1], a[0]), &pscale(&c[0], -a[1]));
    let t2 = padd(&pscale(&b[1], a[0]), &pscale(&b[0], -a[1]));
    let t3 = padd(&pmul(&b[0], &c[1]), &pscale(&pmul(&b[1], &c[0]), -1.0));
    let res = padd(&pmul(&t1, &t1), &pscale(&pmul(&t2, &t3), -1.0));
    if is_zero_poly(&res, scale.powi(4)) {
        return None;
    }
    for s in real_roots(&res) {
        let ev = |p: &Poly| {
            p.iter()
                .enumerate()
                .map(|(k, x)| x * s.powi(k as i32))
                .sum::<f64>()
        };
        let mut ts = Vec::new();
        let mut both_vanish = true;
        for i in 0..2 {
            let (bi, ci) = (ev(&b[i]), ev(&c[i]));
            if a[i].abs().max(bi.abs()).max(ci.abs()) > LEAD_TOL * scale {
                both_vanish = false;
                ts.extend(quadratic_roots(a[i], bi, ci));
            }
        }
        if both_vanish {
            return None;
        }
        for t in ts {
            let z = polish(m, Vector3::new(1.0, s, t), (1, 2));
            if on_both(m, norms, &z) {
                push_dedup(&mut out, z);
            }
        }
    }

    // Chart z = (0, 1, t).
    let p: Vec<Poly> = m
        .iter()
        .map(|mi| vec![mi[(1, 1)], 2.0 * mi[(1, 2)], mi[(2, 2)]])
        .collect();
    let zero = [is_zero_poly(&p[0], scale), is_zero_poly(&p[1], scale)];
    if zero[0] && zero[1] {
        return None;
    }
    let cand = if zero[0] {
        real_roots(&p[1])
    } else {
        real_roots(&p[0])
    };
    for t in cand {
        let z = Vector3::new(0.0, 1.0, t);
        let zp = polish(m, z, (0, 2));
        for w in [zp, z] {
            if w[0].abs() <= 1e-9 * w.norm() && on_both(m, norms, &w) {
                push_dedup(&mut out, Vector3::new(0.0, w[1], w[2]));
                break;
            }
        }
    }

    // Chart z = (0, 0, 1).
    let e3 = Vector3::new(0.0, 0.0, 1.0);
    if on_both(m, norms, &e3) {
        push_dedup(&mut out, e3);
    }
    Some(out)
}

fn to3(m: &SymMatrix) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m.get(i, j))
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let g: Matrix3<f64> = Matrix3::from_fn(|_, _| StandardNormal.sample(rng));
    g.qr().q()
}

/// Lines of `N({M₁, M₂})` for a pair where neither condition holds.
pub fn null_set_lines_3d(m1: &SymMatrix, m2: &SymMatrix) -> Result<NullSetLines> {
    null_set_lines_3d_seeded(m1, m2, 0)
}

pub fn null_set_lines_3d_seeded(m1: &SymMatrix, m2: &SymMatrix, seed: u64) -> Result<NullSetLines> {
    if m1.dim() != 3 || m2.dim() != 3 {
        return Err(Error::Input("null-set lines require 3x3 matrices".into()));
    }
    let (f1, f2) = (m1.frobenius_norm(), m2.frobenius_norm());
    if f1 == 0.0 || f2 == 0.0 {
        return Err(Error::Input("precondition violated: zero member".into()));
    }
    let (n1, n2) = (m1.scale(1.0 / f1), m2.scale(1.0 / f2));
    let (_, best) = angular_scan(&n1, &n2);
    if best >= -CERT_TOL {
        return Err(Error::Input(
            "precondition violated: a PSD combination exists".into(),
        ));
    }
    if common_factor_pair(m1, m2).is_some() {
        return Err(Error::Input(
            "precondition violated: a common factor exists".into(),
        ));
    }
    let base = [to3(&n1), to3(&n2)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = Matrix3::identity();
    for attempt in 1..=MAX_ATTEMPTS {
        let m = [q.transpose() * base[0] * q, q.transpose() * base[1] * q];
        if let Some(found) = lines_in_frame(&m) {
            let mut lines: Vec<Vector3<f64>> = Vec::new();
            for z in found {
                push_dedup(&mut lines, q * z);
            }
            let check = |i: usize, z: &Vector3<f64>| {
                z.dot(&(to3([m1, m2][i]) * z)).abs() <= LINE_TOL * [f1, f2][i].max(1.0)
            };
            if lines.iter().all(|z| check(0, z) && check(1, z)) {
                return Ok(NullSetLines {
                    lines: lines.iter().map(|z| z.iter().copied().collect()).collect(),
                    attempts: attempt,
                    seed,
                });
            }
        }
        q = random_rotation(&mut rng);
    }
    Err(Error::Decomposition(format!(
        "elimination stayed degenerate after {MAX_ATTEMPTS} frames"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_real_roots() {
        // (s - 1)^2 (s + 1)^2 = s^4 - 2 s^2 + 1
        let p = [1.0, 0.0, -2.0, 0.0, 1.0];
        let roots = real_roots(&p);
        assert_eq!(roots.len(), 4);
        assert!(roots.iter().all(|r| (r.abs() - 1.0).abs() < 1e-6));
        let dk = durand_kerner(&p);
        assert!(dk
            .iter()
            .all(|z| (z.norm() - 1.0).abs() < 1e-6 && z.im.abs() < 1e-6));
    }

    #[test]
    fn worked_example_lines() {
        let m1 = SymMatrix::diag(&[1.0, -1.0, 0.0]);
        let m2 = SymMatrix::diag(&[0.0, 1.0, -1.0]);
        let l = null_set_lines_3d(&m1, &m2).unwrap();
        assert_eq!(l.lines.len(), 4);
        let r = 1.0 / 3f64.sqrt();
        for signs in [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
            let target = Vector3::new(r, signs[0] * r, signs[1] * r);
            assert!(l.vectors().iter().any(|v| {
                let v = Vector3::new(v[0], v[1], v[2]);
                (v - target).norm() < 1e-7 || (v + target).norm() < 1e-7
            }));
        }
    }

    fn e(i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(3);
        v[i] = 1.0;
        v
    }

    #[test]
    fn precondition_guard() {
        let m1 = SymMatrix::sym_outer(&e(0), &e(2));
        let m2 = SymMatrix::sym_outer(&e(1), &e(2)).scale(2.0);
        assert!(null_set_lines_3d(&m1, &m2).is_err());
        assert!(
            null_set_lines_3d(&SymMatrix::diag(&[1.0, -1.0, 0.0]), &SymMatrix::identity(3))
                .is_err()
        );
    }

    #[test]
    fn mixed_factor_pair_has_three_lines() {
        let m1 = SymMatrix::diag(&[1.0, -1.0, 0.0]);
        let m2 = SymMatrix::sym_outer(&e(0), &e(2));
        let l = null_set_lines_3d(&m1, &m2).unwrap();
        assert_eq!(l.lines.len(), 3);
        for v in l.vectors() {
            assert!(m1.quad(&v).abs() <= 1e-8 && m2.quad(&v).abs() <= 1e-8);
        }
    }

    #[test]
    fn lines_survive_rotation() {
        let m1 = SymMatrix::diag(&[1.0, -1.0, 0.0]);
        let m2 = SymMatrix::from_row_slice(3, &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0]);
        let l = null_set_lines_3d(&m1, &m2).unwrap();
        assert!(l.lines.len() <= 4);
        for v in l.vectors() {
            assert!(m1.quad(&v).abs() <= 1e-8 && m2.quad(&v).abs() <= 1e-8);
        }
    }
}
