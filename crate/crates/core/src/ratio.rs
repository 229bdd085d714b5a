//! Minimizing a ratio of quadratic forms over a domain `{z̃ : z̃z̃ᵀ ∈ S(M)}`
//! through its semidefinite relaxation `min ⟨M_obj, Z⟩ s.t. Z ∈ S(M), ⟨B, Z⟩ = 1`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::Value;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{eig_sym, SymMatrix};
use crate::model::{form_from_json, QuadraticForm, Sense};
use crate::oracles::for_each_grid_point;
use crate::rog::{analyze_set, LmiSet, RogStatus};
use crate::solver::{
    extract_rank_one, solve, ConicProgram, LinearConstraint, MaxMinEig, SolveStatus, WeightKind,
};

/// Bound on `|λ|` and on the conic weights in the aggregation search.
pub const LAMBDA_BOUND: f64 = 1e6;
/// Largest accepted `σ₂/σ₁` for rank-one recovery.
pub const RANK_ONE_TOL: f64 = 1e-5;
const SDP_EPS: f64 = 1e-10;
const SDP_ITERS: usize = 200_000;
const AGG_TOL: f64 = 1e-7;
const CLOSURE_SAMPLES: usize = 2000;

#[derive(Clone, Debug, Serialize)]
pub struct RatioProblem {
    pub m_obj: SymMatrix,
    pub b: SymMatrix,
    pub mset: LmiSet,
    /// Caller asserts the closure property of the domain.
    pub closure_asserted: bool,
}

impl RatioProblem {
    pub fn new(m_obj: SymMatrix, b: SymMatrix, mset: LmiSet) -> Result<Self> {
        check_dim(m_obj.dim(), b.dim())?;
        if let Some(d) = mset.dim() {
            check_dim(m_obj.dim(), d)?;
        }
        Ok(RatioProblem {
            m_obj,
            b,
            mset,
            closure_asserted: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.m_obj.dim()
    }

    /// `z̃ᵀM_obj z̃ / z̃ᵀB z̃` (`NaN` when the denominator vanishes).
    pub fn ratio(&self, z: &DVector<f64>) -> f64 {
        let den = self.b.quad(z);
        if den == 0.0 {
            f64::NAN
        } else {
            self.m_obj.quad(z) / den
        }
    }

    /// `{"n", "objective", "B", "inequalities", "equalities"}` with forms on
    /// `R^n` embedded into `S^{n+1}`, or `{"rtls": {"A", "b", "rho"}}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value =
            serde_json::from_str(s).map_err(|e| Error::Input(format!("invalid JSON: {e}")))?;
        Self::from_json_value(&v)
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        if let Some(r) = v.get("rtls") {
            return rtls_from_json(r);
        }
        let n = v
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Input("missing positive integer `n`".into()))?
            as usize;
        let form = |key: &str| -> Result<SymMatrix> {
            Ok(form_from_json(
                v.get(key)
                    .ok_or_else(|| Error::Input(format!("missing `{key}`")))?,
                n,
            )?
            .embed())
        };
        let mut mset = LmiSet::default();
        for (key, sense) in [("inequalities", Sense::Le), ("equalities", Sense::Eq)] {
            match v.get(key) {
                None | Some(Value::Null) => {}
                Some(Value::Array(items)) => {
                    for f in items {
                        mset.push(form_from_json(f, n)?.embed(), sense)?;
                    }
                }
                Some(_) => return Err(Error::Input(format!("`{key}` must be an array"))),
            }
        }
        let mut p = RatioProblem::new(form("objective")?, form("B")?, mset)?;
        p.closure_asserted = v
            .get("closure_asserted")
            .and_then(Value::as_bool)
            .unwrap_or(false);
        Ok(p)
    }
}

fn rtls_from_json(r: &Value) -> Result<RatioProblem> {
    let rows = r
        .get("A")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Input("rtls needs matrix rows `A`".into()))?;
    let data: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| Error::Input("rtls rows must be arrays".into()))?
                .iter()
                .map(|x| {
                    x.as_f64()
                        .ok_or_else(|| Error::Input("expected a number".into()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let m = data.len();
    let n = data.first().map(|r| r.len()).unwrap_or(0);
    if m == 0 || n == 0 || data.iter().any(|r| r.len() != n) {
        return Err(Error::Input(
            "rtls `A` must be a nonempty rectangular matrix".into(),
        ));
    }
    let a = DMatrix::from_fn(m, n, |i, j| data[i][j]);
    let y = crate::model::vector_json(
        r.get("b")
            .ok_or_else(|| Error::Input("rtls needs `b`".into()))?,
        m,
    )?;
    let rho = r
        .get("rho")
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Input("rtls needs `rho`".into()))?;
    build_rtls(&a, &y, rho)
}

/// `min ‖Ax − y‖² / (‖x‖² + 1)` subject to `‖x‖² ≤ ρ²`.
pub fn build_rtls(a: &DMatrix<f64>, y: &DVector<f64>, rho: f64) -> Result<RatioProblem> {
    check_dim(a.nrows(), y.len())?;
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::Input("rho must be positive".into()));
    }
    let n = a.ncols();
    let obj = QuadraticForm::new(
        SymMatrix::new(a.transpose() * a),
        -(a.transpose() * y),
        y.norm_squared(),
    )?;
    let den = QuadraticForm::new(SymMatrix::identity(n), DVector::zeros(n), 1.0)?;
    let ball = QuadraticForm::new(SymMatrix::identity(n), DVector::zeros(n), -rho * rho)?;
    RatioProblem::new(
        obj.embed(),
        den.embed(),
        LmiSet::inequalities(vec![ball.embed()]),
    )
}

/// The two problems covering `z̃ᵀBz̃ > 0` and `z̃ᵀBz̃ < 0` (the latter with
/// `M_obj` and `B` negated).
pub fn sign_split(p: &RatioProblem) -> (RatioProblem, RatioProblem) {
    let mut neg = p.clone();
    neg.m_obj = -&p.m_obj;
    neg.b = -&p.b;
    (p.clone(), neg)
}

#[derive(Clone, Debug, Serialize)]
pub struct AggregationCheck {
    pub holds: bool,
    /// Conic weights on the members of `M`.
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub min_eig: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosureCheck {
    pub status: &'static str,
    pub asserted: bool,
    /// Sampled feasible `z` with `z_{n+1} = 0`.
    pub boundary_points: usize,
    pub approximated: usize,
    /// Boundary points for which no nearby feasible point with `z_{n+1} ≠ 0` was found.
    pub violations: usize,
    pub passes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Hypotheses {
    pub rog: RogStatus,
    pub aggregation: AggregationCheck,
    pub closure: ClosureCheck,
}

impl Hypotheses {
    pub fn all_pass(&self) -> bool {
        self.rog.is_rog() && self.aggregation.holds && self.closure.passes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RatioClaim {
    Exact,
    LowerBoundOnly,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioResult {
    pub value: f64,
    pub status: SolveStatus,
    pub z: SymMatrix,
    pub sigma_ratio: f64,
    /// Rank-one candidate `z̃`, scaled to `z̃_{n+1} = 1` when possible.
    pub candidate: Option<Vec<f64>>,
    pub candidate_value: Option<f64>,
    pub hypotheses: Hypotheses,
    pub claim: RatioClaim,
}

pub fn solve_ratio(p: &RatioProblem, seed: u64) -> Result<RatioResult> {
    let d = p.dim();
    let mut prog = ConicProgram::new(p.m_obj.clone());
    for (m, s) in p.mset.matrices.iter().zip(&p.mset.senses) {
        prog.constraints.push(LinearConstraint {
            matrix: m.clone(),
            sense: *s,
            rhs: 0.0,
        });
    }
    let prog = prog.eq(p.b.clone(), 1.0);
    let sol = solve(&prog, SDP_EPS, SDP_ITERS)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::NonConvergence(format!(
            "ratio relaxation ended with {:?}",
            sol.status
        )));
    }
    let spec = eig_sym(&sol.z);
    let s1 = spec.values[d - 1];
    let sigma_ratio = if d > 1 && s1 > 0.0 {
        spec.values[d - 2].max(0.0) / s1
    } else {
        0.0
    };
    let candidate = extract_rank_one(&sol.z, &[], RANK_ONE_TOL).map(|z| {
        let last = z[d - 1];
        if last.abs() > 1e-7 {
            z / last
        } else {
            z
        }
    });
    let hypotheses = Hypotheses {
        rog: analyze_set(&p.mset, seed)?.status,
        aggregation: aggregation_check(p),
        closure: closure_check(p, seed),
    };
    let claim = if hypotheses.all_pass() {
        RatioClaim::Exact
    } else {
        RatioClaim::LowerBoundOnly
    };
    Ok(RatioResult {
        value: sol.objective_value,
        status: sol.status,
        sigma_ratio,
        candidate_value: candidate.as_ref().map(|z| p.ratio(z)),
        candidate: candidate.map(|z| z.iter().copied().collect()),
        z: sol.z,
        hypotheses,
        claim,
    })
}

/// Searches `M* ∈ cone(M)` and `|λ| ≤ LAMBDA_BOUND` with `M_obj + M* + λB ⪰ 0`.
pub fn aggregation_check(p: &RatioProblem) -> AggregationCheck {
    let mut terms: Vec<(SymMatrix, WeightKind)> = p
        .mset
        .matrices
        .iter()
        .zip(&p.mset.senses)
        .map(|(m, s)| {
            (
                m.clone(),
                if *s == Sense::Eq {
                    WeightKind::Free
                } else {
                    WeightKind::NonNeg
                },
            )
        })
        .collect();
    terms.push((p.b.clone(), WeightKind::Free));
    let prob = MaxMinEig {
        base: Some(p.m_obj.clone()),
        terms,
        unit_sum: false,
        weight_bound: Some(LAMBDA_BOUND),
        t_cap: Some(1.0),
    };
    let r = prob.solve(1e-9);
    let k = p.mset.len();
    let tol = AGG_TOL * p.m_obj.spectral_norm().max(1.0);
    AggregationCheck {
        holds: r.min_eig >= -tol,
        weights: r.weights[..k].to_vec(),
        lambda: r.weights[k],
        min_eig: r.min_eig,
        bound: LAMBDA_BOUND,
    }
}

fn rank_one_feasible(mset: &LmiSet, z: &DVector<f64>, tol: f64) -> bool {
    mset.matrices.iter().zip(&mset.senses).all(|(m, s)| {
        let v = m.quad(z);
        let t = tol * m.frobenius_norm().max(1.0) * z.norm_squared();
        match s {
            Sense::Le => v <= t,
            Sense::Eq => v.abs() <= t,
        }
    })
}

/// Samples feasible `z` with `z_{n+1} = 0` and looks for feasible points with
/// `z_{n+1} ≠ 0` at distance `ε ∈ {1e-2, 1e-3}`.
pub fn closure_check(p: &RatioProblem, seed: u64) -> ClosureCheck {
    let d = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boundary = 0;
    let mut approximated = 0;
    for _ in 0..CLOSURE_SAMPLES {
        let mut z: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        z[d - 1] = 0.0;
        let n = z.norm();
        if n < 1e-9 || !rank_one_feasible(&p.mset, &(&z / n), 1e-12) {
            continue;
        }
        z /= n;
        boundary += 1;
        let ok = [1e-2, 1e-3].iter().all(|&eps| {
            (0..64).any(|k| {
                let mut w: DVector<f64> =
                    DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                w *= if k < 2 { 0.0 } else { eps / w.norm() };
                w[d - 1] = if k % 2 == 0 { eps } else { -eps };
                rank_one_feasible(&p.mset, &(&z + w), 1e-12)
            })
        });
        if ok {
            approximated += 1;
        }
    }
    let violations = boundary - approximated;
    ClosureCheck {
        status: "SAMPLED_ONLY",
        asserted: p.closure_asserted,
        boundary_points: boundary,
        approximated,
        violations,
        passes: p.closure_asserted || violations == 0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioGrid {
    pub value: f64,
    pub argmin: Option<Vec<f64>>,
    pub resolution: f64,
}

/// Grid minimum of the ratio over `z̃ = (x, 1)` with `‖x‖∞ ≤ radius`, refined
/// around the best coarse point.
pub fn ratio_grid(p: &RatioProblem, radius: f64, res: f64) -> Result<RatioGrid> {
    let n = p.dim() - 1;
    if n > 3 {
        return Err(Error::SizeCap(format!(
            "ratio grid supports n <= 3, got {n}"
        )));
    }
    let eval = |x: &DVector<f64>| -> Option<f64> {
        let z = x.clone().insert_row(n, 1.0);
        let den = p.b.quad(&z);
        (den > 0.0 && rank_one_feasible(&p.mset, &z, 1e-9)).then(|| p.m_obj.quad(&z) / den)
    };
    let mut best: (f64, Option<DVector<f64>>) = (f64::INFINITY, None);
    let scan = |lo: &[f64], hi: &[f64], h: f64, best: &mut (f64, Option<DVector<f64>>)| {
        for_each_grid_point(lo, hi, h, |x| {
            if let Some(v) = eval(x) {
                if v < best.0 {
                    *best = (v, Some(x.clone()));
                }
            }
        });
    };
    let coarse = (res * 5.0).max(2.0 * radius / 200.0);
    scan(&vec![-radius; n], &vec![radius; n], coarse, &mut best);
    if let Some(x) = best.1.clone() {
        let lo: Vec<f64> = x.iter().map(|v| v - 2.0 * coarse).collect();
        let hi: Vec<f64> = x.iter().map(|v| v + 2.0 * coarse).collect();
        scan(&lo, &hi, res / 10.0, &mut best);
    }
    Ok(RatioGrid {
        value: best.0,
        argmin: best.1.map(|x| x.iter().copied().collect()),
        resolution: res / 10.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn objective_equal_to_normalization() {
        let b = SymMatrix::diag(&[1.0, 2.0, 1.0]);
        let p = RatioProblem::new(
            b.clone(),
            b,
            LmiSet::inequalities(vec![SymMatrix::diag(&[1.0, 1.0, -1.0])]),
        )
        .unwrap();
        let r = solve_ratio(&p, 0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rayleigh_quotient() {
        let p = RatioProblem::new(
            SymMatrix::diag(&[2.0, 5.0, 0.0]),
            SymMatrix::diag(&[1.0, 1.0, 0.0]),
            LmiSet::default(),
        )
        .unwrap();
        let r = solve_ratio(&p, 0).unwrap();
        assert!((r.value - 2.0).abs() < 1e-6);
        let z = DVector::from_column_slice(r.candidate.as_ref().unwrap());
        assert!((p.ratio(&z) - 2.0).abs() < 1e-6);
        assert!(r.hypotheses.all_pass());
    }

    #[test]
    fn zero_and_consistent_data() {
        let p = build_rtls(&DMatrix::zeros(3, 2), &DVector::zeros(3), 1.0).unwrap();
        let r = solve_ratio(&p, 0).unwrap();
        assert!(r.value.abs() < 1e-6);
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = DVector::from_column_slice(&[0.3, -0.2]);
        let p = build_rtls(&a, &(&a * &x), 1.0).unwrap();
        let r = solve_ratio(&p, 0).unwrap();
        assert!(r.value.abs() < 1e-6);
        let z = r.candidate.unwrap();
        assert!(
            (z[0] - 0.3).abs() < 1e-3 && (z[1] + 0.2).abs() < 1e-3 && (z[2] - 1.0).abs() < 1e-12
        );
    }

    #[test]
    fn random_rtls_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(4, 2, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
        let p = build_rtls(&a, &y, 1.0).unwrap();
        let r = solve_ratio(&p, 0).unwrap();
        assert_eq!(r.claim, RatioClaim::Exact, "{:?}", r.hypotheses);
        assert!(r.sigma_ratio <= RANK_ONE_TOL, "{}", r.sigma_ratio);
        let g = ratio_grid(&p, 1.0, 0.01).unwrap();
        assert!((g.value - r.value).abs() <= 1e-2 * r.value.abs().max(1.0));
        assert!((r.candidate_value.unwrap() - r.value).abs() <= 1e-5 * r.value.abs().max(1.0));
    }

    #[test]
    fn sign_split_negates() {
        let p = build_rtls(
            &DMatrix::identity(2, 2),
            &DVector::from_column_slice(&[1.0, 0.0]),
            2.0,
        )
        .unwrap();
        let (pos, neg) = sign_split(&p);
        let z = DVector::from_column_slice(&[0.2, 0.4, 1.0]);
        assert_eq!(pos.ratio(&z), neg.ratio(&z));
        assert!(neg.b.quad(&z) < 0.0);
    }

    #[test]
    fn closure_detects_isolated_boundary() {
        // z₁z₃ ≤ 0 and −z₁z₃ ≤ 0 plus z₃² ≤ 0 force z₃ = 0: every boundary point is isolated.
        let e13 = SymMatrix::from_row_slice(3, &[0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0]);
        let p = RatioProblem::new(
            SymMatrix::identity(3),
            SymMatrix::identity(3),
            LmiSet::inequalities(vec![SymMatrix::diag(&[0.0, 0.0, 1.0]), e13.clone(), -&e13]),
        )
        .unwrap();
        let c = closure_check(&p, 0);
        assert!(c.boundary_points > 0);
        assert!(!c.passes);
        let mut asserted = p.clone();
        asserted.closure_asserted = true;
        assert!(closure_check(&asserted, 0).passes);
    }

    #[test]
    fn json_forms() {
        let p = RatioProblem::from_json_str(
            r#"{"n": 1, "objective": {"A": {"kind": "diag", "data": [2]}}, "B": {"A": {"kind": "diag", "data": [1]}, "c": 1},
                "inequalities": [{"A": {"kind": "diag", "data": [1]}, "c": -1}]}"#,
        )
        .unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.mset.len(), 1);
        let q = RatioProblem::from_json_str(
            r#"{"rtls": {"A": [[1, 0], [0, 1]], "b": [1, 1], "rho": 1}}"#,
        )
        .unwrap();
        assert_eq!(q.dim(), 3);
    }
}
