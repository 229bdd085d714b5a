//! Convex-hull consequences of ROG constraint cones for QCQP epigraphs.

use serde::Serialize;

use super::{RogStatus, RogVerdict};
use crate::linalg::SymMatrix;
use crate::model::{QcqpInstance, Sense};
use crate::solver::{MaxMinEig, WeightKind};

/// Threshold on the smallest eigenvalue of the aggregated quadratic block.
pub const DEFINITE_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClconvConsequence {
    ClconvEqualsDsdp,
    ClconvEqualsClDsdp,
    NoConsequence,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClconvReport {
    pub consequence: ClconvConsequence,
    /// `λ_min` of the quadratic block of the best conic combination found.
    pub min_eig: f64,
    /// Weights on the objective followed by one per constraint.
    pub weights: Vec<f64>,
    pub rog_status: RogStatus,
}

/// Looks for `M* ∈ cone({M_obj} ∪ M)` with a positive (semi)definite
/// quadratic block and combines it with the ROG verdict for `S(M)`.
pub fn clconv_report(inst: &QcqpInstance, verdict: &RogVerdict) -> ClconvReport {
    let mut terms = vec![(inst.objective.a.clone(), WeightKind::NonNeg)];
    for (q, s) in inst.constraints() {
        let kind = if s == Sense::Eq {
            WeightKind::Free
        } else {
            WeightKind::NonNeg
        };
        terms.push((q.a.clone(), kind));
    }
    let prob = MaxMinEig {
        base: None,
        terms,
        unit_sum: true,
        weight_bound: Some(1e6),
        t_cap: Some(1.0),
    };
    let r = prob.solve(1e-9);
    let block: SymMatrix = prob.combination(&r.weights);
    let min_eig = block.min_eigenvalue();
    let consequence = match (verdict.status.is_rog(), min_eig) {
        (true, t) if t > DEFINITE_TOL => ClconvConsequence::ClconvEqualsDsdp,
        (true, t) if t >= -DEFINITE_TOL => ClconvConsequence::ClconvEqualsClDsdp,
        _ => ClconvConsequence::NoConsequence,
    };
    ClconvReport {
        consequence,
        min_eig,
        weights: r.weights,
        rog_status: verdict.status,
    }
}
