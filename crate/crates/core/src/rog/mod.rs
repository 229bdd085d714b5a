//! Rank-one generated (ROG) spectrahedral cones: the two-LMI classifier with
//! certificates, sufficient rules for larger families, rank-two witnesses in
//! dimension three, and convex-hull consequences.

pub mod clconv;
pub mod lines;
pub mod probe;
pub mod rules;
pub mod witness;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{columns_to_matrix, eig_sym, range_basis, rank_eps, SymMatrix, RANK_TOL};
use crate::model::{QcqpInstance, Sense};
use crate::solver::{self, ConicProgram};

pub use clconv::{clconv_report, ClconvConsequence, ClconvReport};
pub use lines::{null_set_lines_3d, NullSetLines};
pub use probe::{probe_random_objectives, ProbeReport};
pub use rules::{
    build_cone_constraint_set, check_common_factor, check_pairwise_sufficient, SocCapSet,
};
pub use witness::{
    construct_rank2_witness_3d, construct_rank2_witness_3d_from, verify_extreme_rank2, Rank2Check,
};

/// Tolerance used by every certificate check.
pub const CERT_TOL: f64 = 1e-7;
/// Threshold on `t*` above which the Gordan–Stiemke program yields a PD witness.
pub const GS_TOL: f64 = 1e-6;
/// `1 − |cos|` below which two factor directions count as the same.
pub const FACTOR_COS_TOL: f64 = 1e-8;
/// Relative residual below which two matrices are treated as dependent.
pub const DEPENDENCE_TOL: f64 = 1e-9;
const SCAN_POINTS: usize = 4000;
const RANK_DRAWS: usize = 100;

/// Homogeneous LMIs `⟨M, Z⟩ ≤ 0` and LMEs `⟨M, Z⟩ = 0` on `Z ⪰ 0`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LmiSet {
    pub matrices: Vec<SymMatrix>,
    pub senses: Vec<Sense>,
}

impl LmiSet {
    pub fn new(matrices: Vec<SymMatrix>, senses: Vec<Sense>) -> Result<Self> {
        if matrices.len() != senses.len() {
            return Err(Error::Input("one sense per matrix is required".into()));
        }
        if let Some(m) = matrices.first() {
            for other in &matrices {
                check_dim(m.dim(), other.dim())?;
            }
        }
        Ok(LmiSet { matrices, senses })
    }

    pub fn inequalities(matrices: Vec<SymMatrix>) -> Self {
        let senses = vec![Sense::Le; matrices.len()];
        LmiSet::new(matrices, senses).expect("inequality set with mixed dimensions")
    }

    pub fn equalities(matrices: Vec<SymMatrix>) -> Self {
        let senses = vec![Sense::Eq; matrices.len()];
        LmiSet::new(matrices, senses).expect("equality set with mixed dimensions")
    }

    /// Homogenized constraints of a QCQP instance.
    pub fn from_instance(inst: &QcqpInstance) -> Self {
        let (matrices, senses) = inst.homogenize().into_iter().unzip();
        LmiSet { matrices, senses }
    }

    /// Parses `{"dim": d, "matrices": [...], "senses": ["LE" | "EQ", ...]}`;
    /// senses default to `LE`.
    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        let d = v
            .get("dim")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| Error::Input("set needs integer `dim`".into()))?
            as usize;
        let mats = v
            .get("matrices")
            .and_then(|x| x.as_array())
            .ok_or_else(|| Error::Input("set needs `matrices`".into()))?;
        let matrices = mats
            .iter()
            .map(|m| crate::model::matrix_from_json(m, d))
            .collect::<Result<Vec<_>>>()?;
        let senses = match v.get("senses").and_then(|x| x.as_array()) {
            None => vec![Sense::Le; matrices.len()],
            Some(s) => s
                .iter()
                .map(|x| match x.as_str() {
                    Some("LE") => Ok(Sense::Le),
                    Some("EQ") => Ok(Sense::Eq),
                    _ => Err(Error::Input(format!("unknown sense {x}"))),
                })
                .collect::<Result<Vec<_>>>()?,
        };
        LmiSet::new(matrices, senses)
    }

    pub fn push(&mut self, m: SymMatrix, sense: Sense) -> Result<()> {
        if let Some(d) = self.dim() {
            check_dim(d, m.dim())?;
        }
        self.matrices.push(m);
        self.senses.push(sense);
        Ok(())
    }

    pub fn dim(&self) -> Option<usize> {
        self.matrices.first().map(|m| m.dim())
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Inequality form: every EQ member `M` contributes both `M` and `−M`.
    pub fn expanded(&self) -> Vec<SymMatrix> {
        let mut out = Vec::new();
        for (m, s) in self.matrices.iter().zip(&self.senses) {
            out.push(m.clone());
            if *s == Sense::Eq {
                out.push(-m);
            }
        }
        out
    }

    /// Whether `Z ∈ S(M)` up to `tol` (PSD and every constraint).
    pub fn contains(&self, z: &SymMatrix, tol: f64) -> bool {
        if z.min_eigenvalue() < -tol * z.spectral_norm().max(1.0) {
            return false;
        }
        self.matrices.iter().zip(&self.senses).all(|(m, s)| {
            let v = m.inner(z);
            match s {
                Sense::Le => v <= tol,
                Sense::Eq => v.abs() <= tol,
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RogStatus {
    RogCertified,
    NotRogCertified,
    RogBySufficientRule,
    Undecided,
}

impl RogStatus {
    pub fn is_rog(self) -> bool {
        matches!(
            self,
            RogStatus::RogCertified | RogStatus::RogBySufficientRule
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairWeights {
    pub i: usize,
    pub j: usize,
    pub alpha: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind")]
pub enum Certificate {
    /// `Σ α_i M_i ⪰ 0` with `‖α‖_∞ = 1`.
    AggregationWeights {
        alpha: Vec<f64>,
        min_eig: f64,
        combination_norm: f64,
    },
    /// `M_i = Sym(p_i cᵀ)` for every member.
    CommonFactor {
        c: Vec<f64>,
        partners: Vec<Vec<f64>>,
        residuals: Vec<f64>,
    },
    /// `Z ≻ 0` with `⟨M_i, Z⟩ = 0` and `tr Z = 1`.
    PdWitness {
        z: SymMatrix,
        min_eig: f64,
        residuals: Vec<f64>,
    },
    /// A combination of rank at least three rules out a common factor.
    RankRefutation {
        alpha: Vec<f64>,
        rank: usize,
        seed: u64,
        draws: usize,
    },
    /// Both members factor, with no shared direction.
    DistinctFactors {
        factors: Vec<Vec<f64>>,
        max_abs_cos: f64,
    },
    /// The joint range does not have dimension three.
    SpanNotThree { span_dim: usize },
    /// Rank-two point of `T(M)` whose range meets `N(M)` only at zero.
    ExtremeRayWitness {
        z: SymMatrix,
        rank: usize,
        residuals: Vec<f64>,
        resultant: f64,
        seed: u64,
    },
    /// Aggregation verified on every pair of members.
    PairwiseAggregation { pairs: Vec<PairWeights> },
    /// A named structural rule (empty set, single LMI or LME, SOC cap).
    Rule { rule: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct RogVerdict {
    pub status: RogStatus,
    pub certificates: Vec<Certificate>,
    pub seed: u64,
    pub span_dim: Option<usize>,
    pub diagnostics: Vec<String>,
}

impl RogVerdict {
    fn new(status: RogStatus, certificates: Vec<Certificate>, seed: u64) -> Self {
        RogVerdict {
            status,
            certificates,
            seed,
            span_dim: None,
            diagnostics: Vec::new(),
        }
    }

    fn rule(status: RogStatus, rule: &str) -> Self {
        RogVerdict::new(status, vec![Certificate::Rule { rule: rule.into() }], 0)
    }

    pub fn certificate_kinds(&self) -> Vec<&'static str> {
        self.certificates.iter().map(Certificate::kind).collect()
    }
}

impl Certificate {
    pub fn kind(&self) -> &'static str {
        match self {
            Certificate::AggregationWeights { .. } => "AggregationWeights",
            Certificate::CommonFactor { .. } => "CommonFactor",
            Certificate::PdWitness { .. } => "PdWitness",
            Certificate::RankRefutation { .. } => "RankRefutation",
            Certificate::DistinctFactors { .. } => "DistinctFactors",
            Certificate::SpanNotThree { .. } => "SpanNotThree",
            Certificate::ExtremeRayWitness { .. } => "ExtremeRayWitness",
            Certificate::PairwiseAggregation { .. } => "PairwiseAggregation",
            Certificate::Rule { .. } => "Rule",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateCheck {
    pub ok: bool,
    pub detail: String,
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn inf_normalize(alpha: &[f64]) -> Vec<f64> {
    let m = alpha.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        alpha.to_vec()
    } else {
        alpha.iter().map(|a| a / m).collect()
    }
}

/// PSD test for an aggregation with a floor tied to the input scale, so an
/// exactly cancelling combination is not rejected for its rounding noise.
fn aggregation_min_eig_ok(alpha: &[f64], mats: &[SymMatrix]) -> (bool, f64, f64) {
    let combo = SymMatrix::linear_combination(alpha, mats);
    let spec = eig_sym(&combo);
    let norm = spec.spectral_norm();
    let scale: f64 = alpha
        .iter()
        .zip(mats)
        .map(|(a, m)| a.abs() * m.spectral_norm())
        .sum();
    let lmin = spec.values[0];
    let floor = norm.max(1e-9 * scale);
    (lmin >= -CERT_TOL * floor, lmin, norm)
}

/// Re-checks a certificate against the member matrices it refers to.
pub fn verify_certificate(cert: &Certificate, mats: &[SymMatrix]) -> CertificateCheck {
    let ok = |ok: bool, detail: String| CertificateCheck { ok, detail };
    match cert {
        Certificate::AggregationWeights { alpha, .. } => {
            if alpha.len() != mats.len() {
                return ok(false, "weight count mismatch".into());
            }
            let inf = alpha.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let (psd, lmin, norm) = aggregation_min_eig_ok(alpha, mats);
            ok(
                psd && (inf - 1.0).abs() <= 1e-12,
                format!("min_eig {lmin:.3e}, norm {norm:.3e}, ‖α‖∞ {inf}"),
            )
        }
        Certificate::CommonFactor { c, partners, .. } => {
            if partners.len() != mats.len() {
                return ok(false, "partner count mismatch".into());
            }
            let c = DVector::from_column_slice(c);
            let mut worst = 0.0f64;
            for (m, p) in mats.iter().zip(partners) {
                let r = (m - &SymMatrix::sym_outer(&DVector::from_column_slice(p), &c))
                    .frobenius_norm();
                worst = worst.max(r / m.frobenius_norm().max(f64::MIN_POSITIVE));
                if r > CERT_TOL * m.frobenius_norm() {
                    return ok(false, format!("reconstruction residual {r:.3e}"));
                }
            }
            ok(true, format!("worst relative residual {worst:.3e}"))
        }
        Certificate::PdWitness { z, .. } => {
            let lmin = z.min_eigenvalue();
            let tr = z.trace();
            let res: Vec<f64> = mats.iter().map(|m| m.inner(z).abs()).collect();
            let worst = res.iter().cloned().fold(0.0, f64::max);
            ok(
                lmin > CERT_TOL && worst <= CERT_TOL && (tr - 1.0).abs() <= 1e-9,
                format!("min_eig {lmin:.3e}, worst residual {worst:.3e}, trace {tr}"),
            )
        }
        Certificate::RankRefutation { alpha, .. } => {
            let normed: Vec<SymMatrix> = mats
                .iter()
                .map(|m| m.scale(1.0 / m.frobenius_norm()))
                .collect();
            let combo = SymMatrix::linear_combination(alpha, &normed);
            let r = rank_eps(&combo, RANK_TOL);
            ok(r >= 3, format!("rank {r}"))
        }
        Certificate::DistinctFactors { .. } => {
            let f: Vec<_> = mats.iter().map(decompose_rank2_indefinite).collect();
            match (&f[..], mats.len()) {
                ([Ok(d1), Ok(d2)], 2) => {
                    let cos = max_factor_cos(d1, d2);
                    ok(1.0 - cos > FACTOR_COS_TOL, format!("max |cos| {cos}"))
                }
                _ => ok(false, "members do not both factor".into()),
            }
        }
        Certificate::SpanNotThree { span_dim } => {
            let (_, u) = joint_range_basis(mats);
            ok(
                u.ncols() == *span_dim && *span_dim != 3,
                format!("span dimension {}", u.ncols()),
            )
        }
        Certificate::ExtremeRayWitness { z, .. } => {
            if mats.len() != 2 {
                return ok(false, "extreme-ray witness needs a pair".into());
            }
            let chk = verify_extreme_rank2(z, &mats[0], &mats[1]);
            ok(
                chk.valid,
                format!("rank {}, resultant {:.3e}", chk.rank, chk.resultant),
            )
        }
        Certificate::PairwiseAggregation { pairs } => {
            for p in pairs {
                let sub = [mats[p.i].clone(), mats[p.j].clone()];
                let (psd, lmin, _) = aggregation_min_eig_ok(&p.alpha, &sub);
                if !psd {
                    return ok(false, format!("pair ({}, {}) min_eig {lmin:.3e}", p.i, p.j));
                }
            }
            ok(true, format!("{} pairs", pairs.len()))
        }
        Certificate::Rule { rule } => ok(true, rule.clone()),
    }
}

/// Rank-two factorization `M = η Sym(a bᵀ)` with unit `a`, `b`.
#[derive(Clone, Debug, Serialize)]
pub struct Rank2Factors {
    pub eta: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Rank2Factors {
    pub fn a(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.a)
    }
    pub fn b(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.b)
    }
}

pub fn decompose_rank2_indefinite(m: &SymMatrix) -> Result<Rank2Factors> {
    let spec = eig_sym(m);
    let norm = spec.spectral_norm();
    let d = m.dim();
    if norm == 0.0 || d == 0 {
        return Err(Error::Decomposition(
            "zero matrix has no factorization".into(),
        ));
    }
    let thr = RANK_TOL * norm;
    let rank = spec.values.iter().filter(|l| l.abs() > thr).count();
    if rank > 2 {
        return Err(Error::Decomposition(format!("rank {rank} exceeds two")));
    }
    let (lmin, lmax) = (spec.values[0], spec.values[d - 1]);
    let (vmin, vmax) = (spec.vector(0), spec.vector(d - 1));
    let (a, b) = if lmax > thr && lmin < -thr {
        let p = vmax.scale(lmax.sqrt());
        let q = vmin.scale((-lmin).sqrt());
        (&p + &q, &p - &q)
    } else if rank == 1 && lmax > thr {
        let p = vmax.scale(lmax.sqrt());
        (p.clone(), p)
    } else if rank == 1 {
        let p = vmin.scale((-lmin).sqrt());
        (p.clone(), -p)
    } else {
        return Err(Error::Decomposition("definite rank-two matrix".into()));
    };
    let (na, nb) = (a.norm(), b.norm());
    let f = Rank2Factors {
        eta: na * nb,
        a: to_vec(&(a / na)),
        b: to_vec(&(b / nb)),
    };
    let rec = SymMatrix::sym_outer(&f.a(), &f.b()).scale(f.eta);
    let res = (m - &rec).frobenius_norm();
    if res > 1e-8 * m.frobenius_norm() {
        return Err(Error::Decomposition(format!(
            "reconstruction residual {res:.3e}"
        )));
    }
    Ok(f)
}

fn max_factor_cos(d1: &Rank2Factors, d2: &Rank2Factors) -> f64 {
    let mut best = 0.0f64;
    for x in [d1.a(), d1.b()] {
        for y in [d2.a(), d2.b()] {
            best = best.max(x.dot(&y).abs());
        }
    }
    best
}

/// Orthonormal basis `U` of the span of all member ranges, with the
/// per-member range bases.
fn joint_range_basis(mats: &[SymMatrix]) -> (usize, DMatrix<f64>) {
    let d = mats.first().map(|m| m.dim()).unwrap_or(0);
    let cols: Vec<DVector<f64>> = mats
        .iter()
        .filter(|m| m.frobenius_norm() > 0.0)
        .flat_map(|m| {
            let r = range_basis(&m.scale(1.0 / m.frobenius_norm()), RANK_TOL);
            (0..r.ncols())
                .map(move |k| r.column(k).into_owned())
                .collect::<Vec<_>>()
        })
        .collect();
    if cols.is_empty() {
        return (d, DMatrix::zeros(d, 0));
    }
    let stacked = columns_to_matrix(d, &cols);
    let svd = stacked.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    let keep: Vec<DVector<f64>> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > RANK_TOL * smax)
        .map(|k| u.column(k).into_owned())
        .collect();
    (d, columns_to_matrix(d, &keep))
}

/// Restriction of every member to `W = Σ range(M_i)`: returns `{UᵀMU}` and `U`.
pub fn restrict_to_joint_range(mset: &LmiSet) -> (LmiSet, DMatrix<f64>) {
    let (_, u) = joint_range_basis(&mset.matrices);
    let reduced = LmiSet {
        matrices: mset.matrices.iter().map(|m| m.congruence(&u)).collect(),
        senses: mset.senses.clone(),
    };
    (reduced, u)
}

/// The set with the members in `subset` tightened to equalities.
pub fn face_program(mset: &LmiSet, subset: &[usize]) -> Result<LmiSet> {
    let mut out = mset.clone();
    for &i in subset {
        if i >= out.len() {
            return Err(Error::Input(format!("member index {i} out of range")));
        }
        out.senses[i] = Sense::Eq;
    }
    Ok(out)
}

/// `z ∈ E(Z, M)`: `⟨M, Z⟩ − tol ≤ zᵀMz ≤ tol` for every expanded member.
pub fn envelope_member(z: &DVector<f64>, zmat: &SymMatrix, mset: &LmiSet, tol: f64) -> bool {
    mset.expanded().iter().all(|m| {
        let v = m.quad(z);
        m.inner(zmat) - tol <= v && v <= tol
    })
}

/// Outcome of deciding the aggregation condition for a normalized pair.
#[derive(Clone, Debug)]
pub(crate) enum Aggregation {
    Holds(Vec<f64>),
    Fails(SymMatrix),
    Unknown(String),
}

fn verify_alpha(alpha: &[f64], mats: &[SymMatrix]) -> Option<Vec<f64>> {
    let a = inf_normalize(alpha);
    if a.iter().all(|x| *x == 0.0) {
        return None;
    }
    aggregation_min_eig_ok(&a, mats).0.then_some(a)
}

/// Best `θ` for `λ_min(cos θ M₁ + sin θ M₂)` by a grid scan and
/// golden-section refinement.
pub(crate) fn angular_scan(m1: &SymMatrix, m2: &SymMatrix) -> (f64, f64) {
    let f = |th: f64| (&m1.scale(th.cos()) + &m2.scale(th.sin())).min_eigenvalue();
    let h = std::f64::consts::TAU / SCAN_POINTS as f64;
    let (mut best, mut bv) = (0.0, f64::NEG_INFINITY);
    for k in 0..SCAN_POINTS {
        let th = k as f64 * h;
        let v = f(th);
        if v > bv {
            bv = v;
            best = th;
        }
    }
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best - h, best + h);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let th = if f1 > f2 { x1 } else { x2 };
    let v = f(th);
    if v >= bv {
        (th, v)
    } else {
        (best, bv)
    }
}

/// Projects `z` onto `{⟨N_i, Z⟩ = 0}` and rescales to unit trace.
fn polish_pd(z: &SymMatrix, mats: &[SymMatrix]) -> SymMatrix {
    let k = mats.len();
    let g = DMatrix::from_fn(k, k, |i, j| mats[i].inner(&mats[j]));
    let r = DVector::from_fn(k, |i, _| mats[i].inner(z));
    let c = g
        .clone()
        .svd(true, true)
        .solve(&r, 1e-14)
        .unwrap_or_else(|_| DVector::zeros(k));
    let mut p = z.clone();
    for i in 0..k {
        p = &p - &mats[i].scale(c[i]);
    }
    let tr = p.trace();
    p.scale(1.0 / tr)
}

/// Decides the aggregation condition for unit-Frobenius, linearly independent `n1`, `n2`.
pub(crate) fn decide_aggregation(n1: &SymMatrix, n2: &SymMatrix) -> Aggregation {
    let d = n1.dim();
    let mats = [n1.clone(), n2.clone()];
    let df = d as f64;
    let shifted = |m: &SymMatrix| &m.clone() - &SymMatrix::identity(d).scale(m.trace() / df);
    let prog = ConicProgram::new(SymMatrix::identity(d))
        .eq(shifted(n1), -n1.trace() / df)
        .eq(shifted(n2), -n2.trace() / df);
    let mut notes = Vec::new();
    match solver::solve(&prog, 1e-9, 30_000) {
        Ok(sol) => {
            let t = (1.0 - sol.z.trace()) / df;
            if t > GS_TOL {
                let z = &sol.z + &SymMatrix::identity(d).scale(t);
                let p = polish_pd(&z, &mats);
                if p.min_eigenvalue() > CERT_TOL
                    && mats.iter().all(|m| m.inner(&p).abs() <= CERT_TOL)
                {
                    return Aggregation::Fails(p);
                }
                notes.push(format!("PD witness at t = {t:.3e} failed verification"));
            } else if let Some(a) = verify_alpha(&sol.y, &mats) {
                return Aggregation::Holds(a);
            } else {
                notes.push(format!("dual weights failed verification (t = {t:.3e})"));
            }
        }
        Err(e) => notes.push(format!("Gordan–Stiemke solve failed: {e}")),
    }
    let (th, _) = angular_scan(n1, n2);
    if let Some(a) = verify_alpha(&[th.cos(), th.sin()], &mats) {
        return Aggregation::Holds(a);
    }
    notes.push("angular scan found no PSD combination".into());
    Aggregation::Unknown(notes.join("; "))
}

/// Common-factor condition for a pair: a verified common factor, if one exists.
pub(crate) fn common_factor_pair(m1: &SymMatrix, m2: &SymMatrix) -> Option<Certificate> {
    let d1 = decompose_rank2_indefinite(m1).ok()?;
    let d2 = decompose_rank2_indefinite(m2).ok()?;
    for (c, p1) in [(d1.a(), d1.b()), (d1.b(), d1.a())] {
        for (c2, p2) in [(d2.a(), d2.b()), (d2.b(), d2.a())] {
            let cos = c.dot(&c2);
            if 1.0 - cos.abs() <= FACTOR_COS_TOL {
                let partners = vec![
                    to_vec(&p1.scale(d1.eta)),
                    to_vec(&p2.scale(d2.eta * cos.signum())),
                ];
                let cert = factor_certificate(&c, partners, &[m1.clone(), m2.clone()]);
                if verify_certificate(&cert, &[m1.clone(), m2.clone()]).ok {
                    return Some(cert);
                }
            }
        }
    }
    None
}

pub(crate) fn factor_certificate(
    c: &DVector<f64>,
    partners: Vec<Vec<f64>>,
    mats: &[SymMatrix],
) -> Certificate {
    let residuals = mats
        .iter()
        .zip(&partners)
        .map(|(m, p)| {
            (m - &SymMatrix::sym_outer(&DVector::from_column_slice(p), c)).frobenius_norm()
        })
        .collect();
    Certificate::CommonFactor {
        c: to_vec(c),
        partners,
        residuals,
    }
}

fn rank_refutation(n1: &SymMatrix, n2: &SymMatrix, seed: u64) -> Option<Certificate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for draw in 1..=RANK_DRAWS {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        let alpha = inf_normalize(&[a, b]);
        let combo = &n1.scale(alpha[0]) + &n2.scale(alpha[1]);
        let rank = rank_eps(&combo, RANK_TOL);
        if rank >= 3 {
            return Some(Certificate::RankRefutation {
                alpha,
                rank,
                seed,
                draws: draw,
            });
        }
    }
    None
}

/// Classifies `T({M₁, M₂})` (equivalently `S({M₁, M₂})`).
pub fn check_pair(m1: &SymMatrix, m2: &SymMatrix) -> Result<RogVerdict> {
    check_pair_seeded(m1, m2, 0)
}

pub fn check_pair_seeded(m1: &SymMatrix, m2: &SymMatrix, seed: u64) -> Result<RogVerdict> {
    check_dim(m1.dim(), m2.dim())?;
    let mats = [m1.clone(), m2.clone()];
    let (f1, f2) = (m1.frobenius_norm(), m2.frobenius_norm());
    let mut v = RogVerdict::new(RogStatus::Undecided, Vec::new(), seed);
    v.span_dim = Some(joint_range_basis(&mats).1.ncols());

    let certify = |mut v: RogVerdict, alpha: Vec<f64>, rule: &str| {
        let cert = aggregation_certificate(&alpha, &mats);
        if verify_certificate(&cert, &mats).ok {
            v.status = RogStatus::RogCertified;
            v.certificates.push(cert);
        } else {
            v.diagnostics
                .push(format!("{rule} weights failed verification"));
        }
        v
    };

    // (a) zero or dependent members reduce to a single constraint.
    if f1 == 0.0 || f2 == 0.0 {
        let alpha = if f1 == 0.0 {
            vec![1.0, 0.0]
        } else {
            vec![0.0, 1.0]
        };
        return Ok(certify(v, alpha, "zero member"));
    }
    let kappa = m2.inner(m1) / m1.inner(m1);
    if (m2 - &m1.scale(kappa)).frobenius_norm() <= DEPENDENCE_TOL * f2 {
        return Ok(certify(v, inf_normalize(&[kappa, -1.0]), "dependence"));
    }

    // (b) the aggregation condition.
    let (n1, n2) = (m1.scale(1.0 / f1), m2.scale(1.0 / f2));
    let pd = match decide_aggregation(&n1, &n2) {
        Aggregation::Holds(a) => {
            return Ok(certify(
                v,
                inf_normalize(&[a[0] / f1, a[1] / f2]),
                "aggregation",
            ))
        }
        Aggregation::Fails(z) => Some(z),
        Aggregation::Unknown(msg) => {
            v.diagnostics.push(msg);
            None
        }
    };

    // (c) the common-factor condition.
    if let Some(cert) = common_factor_pair(m1, m2) {
        v.status = RogStatus::RogCertified;
        v.certificates.push(cert);
        return Ok(v);
    }
    let Some(z) = pd else {
        v.diagnostics
            .push("aggregation undecided and no common factor".into());
        return Ok(v);
    };

    // (d) refute both conditions.
    let residuals = mats.iter().map(|m| m.inner(&z)).collect();
    let pd_cert = Certificate::PdWitness {
        min_eig: z.min_eigenvalue(),
        z,
        residuals,
    };
    if !verify_certificate(&pd_cert, &mats).ok {
        v.diagnostics
            .push("PD witness failed verification at original scale".into());
        return Ok(v);
    }
    let refutation = rank_refutation(&n1, &n2, seed)
        .or_else(|| {
            let (d1, d2) = (
                decompose_rank2_indefinite(m1).ok()?,
                decompose_rank2_indefinite(m2).ok()?,
            );
            let cos = max_factor_cos(&d1, &d2);
            (1.0 - cos > FACTOR_COS_TOL).then(|| Certificate::DistinctFactors {
                factors: vec![d1.a, d1.b, d2.a, d2.b],
                max_abs_cos: cos,
            })
        })
        .or_else(|| {
            v.span_dim
                .filter(|&s| s != 3)
                .map(|span_dim| Certificate::SpanNotThree { span_dim })
        });
    match refutation {
        Some(r) if verify_certificate(&r, &mats).ok => {
            v.status = RogStatus::NotRogCertified;
            v.certificates.push(pd_cert);
            v.certificates.push(r);
        }
        _ => v
            .diagnostics
            .push("aggregation fails but a common factor could not be refuted".into()),
    }
    Ok(v)
}

fn aggregation_certificate(alpha: &[f64], mats: &[SymMatrix]) -> Certificate {
    let (_, min_eig, combination_norm) = aggregation_min_eig_ok(alpha, mats);
    Certificate::AggregationWeights {
        alpha: alpha.to_vec(),
        min_eig,
        combination_norm,
    }
}

/// Members collapsed to distinct lines: `(representative, sense)` where a
/// line carrying both signs or an equality becomes an equality.
fn canonical_lines(mset: &LmiSet) -> Vec<(SymMatrix, Sense)> {
    let mut lines: Vec<(SymMatrix, Sense)> = Vec::new();
    for (m, s) in mset.matrices.iter().zip(&mset.senses) {
        let f = m.frobenius_norm();
        if f == 0.0 {
            continue;
        }
        let n = m.scale(1.0 / f);
        let hit = lines.iter_mut().find(|(r, _)| {
            let k = r.inner(&n);
            (&n - &r.scale(k)).frobenius_norm() <= DEPENDENCE_TOL
        });
        match hit {
            Some((r, sense)) => {
                if *s == Sense::Eq || r.inner(&n) < 0.0 {
                    *sense = Sense::Eq;
                }
            }
            None => lines.push((n, *s)),
        }
    }
    lines
}

/// ROG analysis of an arbitrary finite set. Pairs are decided exactly;
/// larger sets only by sufficient rules.
pub fn analyze_set(mset: &LmiSet, seed: u64) -> Result<RogVerdict> {
    let lines = canonical_lines(mset);
    match lines.len() {
        0 => Ok(RogVerdict::rule(
            RogStatus::RogCertified,
            "no nonzero constraints: the PSD cone",
        )),
        1 => Ok(RogVerdict::rule(
            RogStatus::RogCertified,
            "single LMI or LME",
        )),
        2 => check_pair_seeded(&lines[0].0, &lines[1].0, seed),
        _ => {
            let pw = check_pairwise_sufficient(mset);
            if pw.status.is_rog() {
                return Ok(pw);
            }
            let cf = check_common_factor(mset);
            if cf.status.is_rog() {
                return Ok(cf);
            }
            let mut v = RogVerdict::new(RogStatus::Undecided, Vec::new(), seed);
            v.diagnostics.push(format!(
                "{} independent members and no sufficient rule applies",
                lines.len()
            ));
            Ok(v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offdiag2() -> SymMatrix {
        SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0])
    }

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn all_verify(v: &RogVerdict, mats: &[SymMatrix]) {
        for c in &v.certificates {
            let chk = verify_certificate(c, mats);
            assert!(chk.ok, "{} failed: {}", c.kind(), chk.detail);
        }
    }

    #[test]
    fn worked_pair_not_rog() {
        let m1 = SymMatrix::diag(&[1.0, -1.0, 0.0]);
        let m2 = SymMatrix::diag(&[0.0, 1.0, -1.0]);
        let v = check_pair(&m1, &m2).unwrap();
        assert_eq!(v.status, RogStatus::NotRogCertified);
        assert_eq!(v.certificate_kinds(), vec!["PdWitness", "RankRefutation"]);
        let Certificate::PdWitness { z, .. } = &v.certificates[0] else {
            panic!()
        };
        assert!((z - &SymMatrix::identity(3).scale(1.0 / 3.0)).frobenius_norm() < 1e-6);
        all_verify(&v, &[m1, m2]);
    }

    #[test]
    fn common_factor_pair_is_rog() {
        let m1 = SymMatrix::sym_outer(&e(3, 0), &e(3, 2));
        let m2 = SymMatrix::sym_outer(&e(3, 1), &e(3, 2));
        let v = check_pair(&m1, &m2).unwrap();
        assert_eq!(v.status, RogStatus::RogCertified);
        let Certificate::CommonFactor { c, .. } = &v.certificates[0] else {
            panic!("{:?}", v)
        };
        assert!((c[2].abs() - 1.0).abs() < 1e-9);
        all_verify(&v, &[m1, m2]);
    }

    #[test]
    fn planar_pair_not_rog() {
        let m1 = SymMatrix::diag(&[1.0, -1.0]);
        let v = check_pair(&m1, &offdiag2()).unwrap();
        assert_eq!(v.status, RogStatus::NotRogCertified);
        assert_eq!(v.span_dim, Some(2));
        all_verify(&v, &[m1, offdiag2()]);
    }

    #[test]
    fn psd_combination_and_dependence() {
        let m1 = SymMatrix::diag(&[1.0, -1.0, 0.0]);
        let m2 = SymMatrix::diag(&[-1.0, 2.0, 0.5]);
        let v = check_pair(&m1, &m2).unwrap();
        assert_eq!(v.status, RogStatus::RogCertified);
        all_verify(&v, &[m1.clone(), m2]);
        let v = check_pair(&m1, &m1.scale(-3.0)).unwrap();
        assert_eq!(v.status, RogStatus::RogCertified);
        all_verify(&v, &[m1.clone(), m1.scale(-3.0)]);
        // Boundary: the only PSD combination is singular.
        let m2 = SymMatrix::diag(&[-1.0, 1.0, 1.0]);
        let v = check_pair(&m1, &m2).unwrap();
        assert_eq!(v.status, RogStatus::RogCertified);
        all_verify(&v, &[m1, m2]);
    }

    #[test]
    fn decomposition_examples() {
        let f = decompose_rank2_indefinite(&SymMatrix::diag(&[1.0, -1.0])).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let dirs = [f.a(), f.b()];
        assert!(dirs
            .iter()
            .any(|v| (v[0] * s + v[1] * s).abs() > 1.0 - 1e-12));
        assert!(dirs
            .iter()
            .any(|v| (v[0] * s - v[1] * s).abs() > 1.0 - 1e-12));
        let f = decompose_rank2_indefinite(&offdiag2().scale(0.5)).unwrap();
        assert!((f.a[0].abs() - 1.0).abs() < 1e-12 || (f.a[1].abs() - 1.0).abs() < 1e-12);
        assert!(decompose_rank2_indefinite(&SymMatrix::identity(2)).is_err());
        assert!(decompose_rank2_indefinite(&SymMatrix::diag(&[1.0, -1.0, 1.0])).is_err());
        let f = decompose_rank2_indefinite(&SymMatrix::diag(&[0.0, -4.0])).unwrap();
        assert!((f.a() + f.b()).norm() < 1e-12);
    }

    #[test]
    fn restriction_examples() {
        let m = SymMatrix::sym_outer(&e(5, 0), &e(5, 1));
        let (r, u) = restrict_to_joint_range(&LmiSet::inequalities(vec![m]));
        assert_eq!(u.ncols(), 2);
        assert_eq!(r.matrices[0].dim(), 2);
        let (r, u) = restrict_to_joint_range(&LmiSet::inequalities(vec![SymMatrix::diag(&[
            1.0, -1.0, 2.0,
        ])]));
        assert_eq!(u.ncols(), 3);
        assert!((r.matrices[0].trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_examples() {
        let set = LmiSet::inequalities(vec![SymMatrix::diag(&[1.0, -1.0]), offdiag2()]);
        let z = SymMatrix::identity(2);
        assert!(envelope_member(&DVector::zeros(2), &z, &set, 1e-9));
        assert!(!envelope_member(&e(2, 0), &z, &set, 1e-9));
        let w = DVector::from_column_slice(&[1.0, -1.0]);
        let single = LmiSet::inequalities(vec![SymMatrix::diag(&[1.0, -1.0])]);
        assert!(envelope_member(&w, &SymMatrix::outer(&w), &single, 1e-9));
    }

    #[test]
    fn face_program_examples() {
        let set = LmiSet::inequalities(vec![SymMatrix::diag(&[1.0, -1.0]), offdiag2()]);
        assert_eq!(
            face_program(&set, &[]).unwrap().senses,
            vec![Sense::Le, Sense::Le]
        );
        assert_eq!(
            face_program(&set, &[0, 1]).unwrap().senses,
            vec![Sense::Eq, Sense::Eq]
        );
        assert_eq!(
            face_program(&set, &[0]).unwrap().senses,
            vec![Sense::Eq, Sense::Le]
        );
        assert!(face_program(&set, &[2]).is_err());
    }

    #[test]
    fn analyze_set_reduces_to_pairs() {
        let m1 = SymMatrix::diag(&[1.0, -1.0, 0.0]);
        let m2 = SymMatrix::diag(&[0.0, 1.0, -1.0]);
        let t = analyze_set(&LmiSet::equalities(vec![m1.clone(), m2.clone()]), 0).unwrap();
        let s = analyze_set(
            &LmiSet::inequalities(vec![m1.clone(), m2.clone(), -&m1, -&m2]),
            0,
        )
        .unwrap();
        assert_eq!(t.status, s.status);
        assert_eq!(t.status, RogStatus::NotRogCertified);
        assert_eq!(
            analyze_set(&LmiSet::default(), 0).unwrap().status,
            RogStatus::RogCertified
        );
        assert_eq!(
            analyze_set(&LmiSet::equalities(vec![m1]), 0)
                .unwrap()
                .status,
            RogStatus::RogCertified
        );
    }
}
