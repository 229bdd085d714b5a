//! Sufficient ROG rules for families with more than two members.

use nalgebra::DVector;
use serde::Serialize;

use super::{
    decide_aggregation, decompose_rank2_indefinite, factor_certificate, inf_normalize, to_vec,
    verify_certificate, Aggregation, Certificate, LmiSet, PairWeights, RogStatus, RogVerdict,
    DEPENDENCE_TOL, FACTOR_COS_TOL,
};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{eig_sym, SymMatrix};

/// Aggregation condition on every pair of expanded members.
pub fn check_pairwise_sufficient(mset: &LmiSet) -> RogVerdict {
    let mats = mset.expanded();
    let mut pairs = Vec::new();
    let mut v = RogVerdict::new(RogStatus::Undecided, Vec::new(), 0);
    for i in 0..mats.len() {
        for j in i + 1..mats.len() {
            match pair_weights(&mats[i], &mats[j]) {
                Some(alpha) => pairs.push(PairWeights { i, j, alpha }),
                None => {
                    v.diagnostics
                        .push(format!("aggregation not verified for members ({i}, {j})"));
                    return v;
                }
            }
        }
    }
    let cert = Certificate::PairwiseAggregation { pairs };
    if verify_certificate(&cert, &mats).ok {
        v.status = RogStatus::RogBySufficientRule;
        v.certificates.push(cert);
    } else {
        v.diagnostics
            .push("pairwise weights failed verification".into());
    }
    v
}

fn pair_weights(m1: &SymMatrix, m2: &SymMatrix) -> Option<Vec<f64>> {
    let (f1, f2) = (m1.frobenius_norm(), m2.frobenius_norm());
    if f1 == 0.0 {
        return Some(vec![1.0, 0.0]);
    }
    if f2 == 0.0 {
        return Some(vec![0.0, 1.0]);
    }
    let kappa = m2.inner(m1) / m1.inner(m1);
    if (m2 - &m1.scale(kappa)).frobenius_norm() <= DEPENDENCE_TOL * f2 {
        return Some(inf_normalize(&[kappa, -1.0]));
    }
    match decide_aggregation(&m1.scale(1.0 / f1), &m2.scale(1.0 / f2)) {
        Aggregation::Holds(a) => Some(inf_normalize(&[a[0] / f1, a[1] / f2])),
        _ => None,
    }
}

/// A direction `c` shared by the factorizations of all nonzero members.
pub fn check_common_factor(mset: &LmiSet) -> RogVerdict {
    let mats = mset.expanded();
    let mut v = RogVerdict::new(RogStatus::Undecided, Vec::new(), 0);
    let mut facts = Vec::new();
    for (k, m) in mats.iter().enumerate() {
        if m.frobenius_norm() == 0.0 {
            facts.push(None);
            continue;
        }
        match decompose_rank2_indefinite(m) {
            Ok(f) => facts.push(Some(f)),
            Err(e) => {
                v.diagnostics.push(format!("member {k}: {e}"));
                return v;
            }
        }
    }
    let Some(first) = facts.iter().flatten().next() else {
        v.status = RogStatus::RogBySufficientRule;
        v.certificates.push(Certificate::Rule {
            rule: "all members vanish".into(),
        });
        return v;
    };
    for c in [first.a(), first.b()] {
        let mut partners = Vec::new();
        let mut ok = true;
        for f in &facts {
            let Some(f) = f else {
                partners.push(vec![0.0; c.len()]);
                continue;
            };
            let (a, b) = (f.a(), f.b());
            let (ca, cb) = (a.dot(&c), b.dot(&c));
            let p = if 1.0 - ca.abs() <= FACTOR_COS_TOL {
                b.scale(f.eta * ca.signum())
            } else if 1.0 - cb.abs() <= FACTOR_COS_TOL {
                a.scale(f.eta * cb.signum())
            } else {
                ok = false;
                break;
            };
            partners.push(to_vec(&p));
        }
        if ok {
            let cert = factor_certificate(&c, partners, &mats);
            if verify_certificate(&cert, &mats).ok {
                v.status = RogStatus::RogBySufficientRule;
                v.certificates.push(cert);
                return v;
            }
        }
    }
    v.diagnostics
        .push("no direction common to all factorizations".into());
    v
}

/// `{Sym(−c kᵀ)}` over generators `k` of `K*`, so that `S` encodes `Zc ∈ K`.
pub fn build_cone_constraint_set(
    c: &DVector<f64>,
    dual_generators: &[DVector<f64>],
) -> Result<LmiSet> {
    let mut set = LmiSet::default();
    for k in dual_generators {
        check_dim(c.len(), k.len())?;
        set.push(SymMatrix::sym_outer(&(-c), k), crate::model::Sense::Le)?;
    }
    Ok(set)
}

/// `{Z ⪰ 0 : Zc ∈ K_L, ⟨L, Z⟩ ≤ 0}` for `L` of inertia `(n, 1)`, where
/// `K_L = {z : zᵀLz ≤ 0, vᵀz ≥ 0}` and `v` spans the negative eigenspace.
#[derive(Clone, Debug, Serialize)]
pub struct SocCapSet {
    pub l: SymMatrix,
    pub c: Vec<f64>,
    /// Orientation of the cone (the negative eigenvector of `L`).
    pub v: Vec<f64>,
}

impl SocCapSet {
    pub fn new(l: SymMatrix, c: DVector<f64>) -> Result<Self> {
        check_dim(l.dim(), c.len())?;
        let spec = eig_sym(&l);
        let d = l.dim();
        let thr = 1e-9 * spec.spectral_norm();
        if d < 2 || spec.values[0] >= -thr || spec.values[1] <= thr {
            return Err(Error::Input(
                "L must have exactly one negative eigenvalue and no kernel".into(),
            ));
        }
        let mut v = spec.vector(0);
        let k = v.iamax();
        if v[k] < 0.0 {
            v = -v;
        }
        Ok(SocCapSet {
            l,
            c: to_vec(&c),
            v: to_vec(&v),
        })
    }

    /// Standard cap: `L = Diag(1, …, 1, −1)` in dimension `d`.
    pub fn standard(c: DVector<f64>) -> Result<Self> {
        let d = c.len();
        let mut diag = vec![1.0; d];
        diag[d - 1] = -1.0;
        SocCapSet::new(SymMatrix::diag(&diag), c)
    }

    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    /// Constraints on a rank-one point `zzᵀ`: `zᵀLz ≤ 0` and `(cᵀz)(vᵀz) ≥ 0`.
    pub fn rank_one_constraints(&self) -> LmiSet {
        let c = DVector::from_column_slice(&self.c);
        let v = DVector::from_column_slice(&self.v);
        LmiSet::inequalities(vec![self.l.clone(), -&SymMatrix::sym_outer(&c, &v)])
    }

    /// Membership of `Z` up to `tol`.
    pub fn contains(&self, z: &SymMatrix, tol: f64) -> bool {
        let c = DVector::from_column_slice(&self.c);
        let v = DVector::from_column_slice(&self.v);
        let zc = z.mul_vec(&c);
        z.min_eigenvalue() >= -tol
            && self.l.inner(z) <= tol
            && self.l.quad(&zc) <= tol
            && v.dot(&zc) >= -tol
    }

    /// ROG by composing the single-LMI rule with the common-factor rule for `Zc ∈ K_L`.
    pub fn verdict(&self) -> RogVerdict {
        RogVerdict::rule(
            RogStatus::RogBySufficientRule,
            "single LMI on the cone {Z ⪰ 0 : Zc ∈ K} with K a second-order cone",
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rog::RogStatus;

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn pairwise_examples() {
        let m = SymMatrix::diag(&[1.0, -2.0, 0.5]);
        let set = LmiSet::inequalities(vec![m.clone(), m.scale(2.0), m.scale(3.0)]);
        assert_eq!(
            check_pairwise_sufficient(&set).status,
            RogStatus::RogBySufficientRule
        );
        let set = LmiSet::inequalities(vec![
            SymMatrix::diag(&[1.0, -1.0, 0.0]),
            SymMatrix::diag(&[0.0, 1.0, -1.0]),
        ]);
        assert_eq!(check_pairwise_sufficient(&set).status, RogStatus::Undecided);
        let psd = LmiSet::inequalities(vec![
            SymMatrix::diag(&[1.0, 0.0, 2.0]),
            SymMatrix::outer(&DVector::from_column_slice(&[1.0, 2.0, 3.0])),
            SymMatrix::identity(3),
        ]);
        assert_eq!(
            check_pairwise_sufficient(&psd).status,
            RogStatus::RogBySufficientRule
        );
    }

    #[test]
    fn common_factor_examples() {
        let c = e(3, 2);
        let set = LmiSet::inequalities(vec![
            SymMatrix::sym_outer(&e(3, 0), &c),
            SymMatrix::sym_outer(&e(3, 1), &c),
            SymMatrix::sym_outer(&(e(3, 0) + e(3, 1)), &c),
        ]);
        let v = check_common_factor(&set);
        assert_eq!(v.status, RogStatus::RogBySufficientRule);
        assert!(verify_certificate(&v.certificates[0], &set.expanded()).ok);

        let gens = [
            e(3, 0),
            e(3, 1),
            DVector::from_column_slice(&[1.0, 1.0, 1.0]),
        ];
        let cone = build_cone_constraint_set(&DVector::from_column_slice(&[0.3, -1.0, 2.0]), &gens)
            .unwrap();
        assert_eq!(
            check_common_factor(&cone).status,
            RogStatus::RogBySufficientRule
        );

        let set = LmiSet::inequalities(vec![
            SymMatrix::diag(&[1.0, -1.0, 0.0]),
            SymMatrix::diag(&[0.0, 1.0, -1.0]),
        ]);
        assert_eq!(check_common_factor(&set).status, RogStatus::Undecided);
    }

    #[test]
    fn cone_constraint_encodes_membership() {
        let c = DVector::from_column_slice(&[1.0, 0.0, 1.0]);
        let set = build_cone_constraint_set(&c, &[e(3, 0), e(3, 1)]).unwrap();
        let z = SymMatrix::identity(3);
        // Zc = c has nonnegative first two coordinates.
        assert!(set.contains(&z, 1e-12));
        let bad = SymMatrix::from_row_slice(3, &[1.0, 0.0, -2.0, 0.0, 1.0, 0.0, -2.0, 0.0, 5.0]);
        assert!(!set.contains(&bad, 1e-12));
    }

    #[test]
    fn soc_cap_setup() {
        let cap = SocCapSet::standard(DVector::from_column_slice(&[0.5, 0.0, 1.0])).unwrap();
        assert_eq!(cap.v, vec![0.0, 0.0, 1.0]);
        assert_eq!(cap.verdict().status, RogStatus::RogBySufficientRule);
        assert!(SocCapSet::new(SymMatrix::identity(3), DVector::zeros(3)).is_err());
        let z = SymMatrix::outer(&DVector::from_column_slice(&[0.0, 0.5, 1.0]));
        assert!(cap.contains(&z, 1e-12));
    }
}
