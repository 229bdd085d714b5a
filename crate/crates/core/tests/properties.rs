use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use shorcert::exactness::{
    check_burer_ye_diag, check_ch_polyhedral, check_obj_strong, check_obj_weak, Verdict,
};
use shorcert::gamma::{build_gamma_hrep_diag, dd_extreme_rays, verify_generator};
use shorcert::linalg::{
    binary_quadratic_resultant, eig_sym, kernel_basis, psd_status, rank_eps, PsdStatus,
};
use shorcert::oracles::{compare_opt_at, sphere_min_rank_one};
use shorcert::ratio::{build_rtls, solve_ratio};
use shorcert::rog::{
    check_pair_seeded, restrict_to_joint_range, verify_certificate, LmiSet, RogStatus,
};
use shorcert::solver::dsdp_membership;
use shorcert::{QcqpInstance, QuadraticForm, Sense, SymMatrix};

fn sym(d: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-5.0..5.0f64, d * d).prop_map(move |v| {
        let g = DMatrix::from_row_slice(d, d, &v);
        SymMatrix::new((&g + g.transpose()) * 0.5)
    })
}

fn any_sym() -> impl Strategy<Value = SymMatrix> {
    (2usize..=8).prop_flat_map(sym)
}

fn vec_of(d: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0..2.0f64, d).prop_map(DVector::from_vec)
}

/// Diagonal instance with `m` inequalities whose origin is strictly feasible.
fn diag_instance(n: usize, m: usize) -> impl Strategy<Value = QcqpInstance> {
    let form = move |c: std::ops::Range<f64>| {
        (prop::collection::vec(-2.0..2.0f64, n), vec_of(n), c)
            .prop_map(|(d, b, c)| QuadraticForm::new(SymMatrix::diag(&d), b, c).unwrap())
    };
    (form(-1.0..1.0), prop::collection::vec(form(-2.0..-0.2), m))
        .prop_map(|(obj, cons)| QcqpInstance::new(obj, cons, vec![]).unwrap())
}

fn leading_minors_positive(s: &SymMatrix) -> bool {
    (1..=s.dim()).all(|k| s.matrix().view((0, 0), (k, k)).determinant() > 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn eig_reconstructs_and_is_orthonormal(s in any_sym()) {
        let spec = eig_sym(&s);
        let scale = s.frobenius_norm().max(1.0);
        prop_assert!((spec.reconstruct() - s.matrix()).norm() <= 1e-10 * scale);
        let d = s.dim();
        prop_assert!((spec.vectors.transpose() * &spec.vectors - DMatrix::identity(d, d)).norm() <= 1e-10);
        prop_assert!(spec.values.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn positive_definite_has_positive_minors(s in (2usize..=5).prop_flat_map(sym)) {
        let shifted = SymMatrix::new(s.matrix() * s.matrix() + DMatrix::identity(s.dim(), s.dim()) * 0.1);
        for m in [&s, &shifted] {
            if psd_status(m, 1e-9) == PsdStatus::PositiveDefinite {
                prop_assert!(leading_minors_positive(m));
            }
        }
    }

    #[test]
    fn rank_plus_kernel_is_dim(d in 2usize..=7, r in 0usize..=7, seed in any::<u64>()) {
        let r = r.min(d);
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let g = DMatrix::from_fn(d, r, |_, _| next());
        let s = SymMatrix::new(&g * g.transpose());
        let tol = 1e-7;
        prop_assert_eq!(rank_eps(&s, tol) + kernel_basis(&s, tol).ncols(), d);
    }

    #[test]
    fn resultant_vanishes_on_shared_root(r in -3i32..=3, s1 in -3i32..=3, s2 in -3i32..=3, k1 in 1i32..=3, k2 in 1i32..=3) {
        // (s - r t)(s - s1 t) and (s - r t)(s - s2 t) share the root s/t = r.
        let q = |a: f64, b: f64, k: f64| (k, -k * (a + b), k * a * b);
        let (r, s1, s2) = (r as f64, s1 as f64, s2 as f64);
        prop_assert!(binary_quadratic_resultant(q(r, s1, k1 as f64), q(r, s2, k2 as f64)).abs() < 1e-9);
        // Disjoint root sets give a nonzero resultant.
        let (a, b) = (r, r + 1.0);
        let (c, d) = (r + 2.0 + s1.abs(), r + 3.0 + s1.abs() + s2.abs());
        prop_assert!(binary_quadratic_resultant(q(a, b, 1.0), q(c, d, 1.0)).abs() > 1e-6);
    }

    #[test]
    fn aggregation_is_linear(inst in diag_instance(3, 2), g1 in prop::collection::vec(0.0..3.0f64, 3), g2 in prop::collection::vec(0.0..3.0f64, 3)) {
        let a = inst.aggregate_with_obj(g1[0], &g1[1..]).unwrap();
        let b = inst.aggregate_with_obj(g2[0], &g2[1..]).unwrap();
        let sum: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| x + y).collect();
        let ab = inst.aggregate_with_obj(sum[0], &sum[1..]).unwrap();
        let direct = a.add(&b);
        prop_assert!((ab.a.matrix() - direct.a.matrix()).amax() <= 1e-12 * 10.0);
        prop_assert!((&ab.b - &direct.b).amax() <= 1e-12 * 10.0);
        prop_assert!((ab.c - direct.c).abs() <= 1e-12 * 10.0);
    }

    #[test]
    fn json_round_trip_is_identical(inst in diag_instance(3, 2)) {
        let text = inst.to_json_string();
        let back = QcqpInstance::from_json_str(&text).unwrap();
        prop_assert_eq!(back.to_json_string(), text);
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn dd_rays_are_generators(inst in diag_instance(3, 2)) {
        let h = build_gamma_hrep_diag(&inst).unwrap();
        for r in dd_extreme_rays(&h).unwrap() {
            prop_assert!(h.contains(&r, 1e-9));
            prop_assert!(verify_generator(&inst, &r, 1e-7));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feasible_points_lie_in_relaxation(inst in diag_instance(2, 2), x in vec_of(2)) {
        let x = x * 0.3;
        prop_assume!(inst.is_feasible(&x, 0.0));
        prop_assert!(inst.epigraph_member(&x, inst.objective.eval(&x), 0.0));
        let m = dsdp_membership(&inst, &x, inst.objective.eval(&x), 1e-6).unwrap();
        prop_assert!(m.member, "violation {}", m.violation);
    }

    #[test]
    fn exactness_implications(inst in diag_instance(2, 2)) {
        let strong = check_obj_strong(&inst);
        let weak = check_obj_weak(&inst);
        let ch = check_ch_polyhedral(&inst);
        let by = check_burer_ye_diag(&inst);
        prop_assert!(strong.verdict != Verdict::Holds || weak.verdict == Verdict::Holds);
        prop_assert!(ch.verdict != Verdict::Holds || weak.verdict == Verdict::Holds);
        prop_assert!(by.verdict != Verdict::Holds || strong.verdict == Verdict::Holds);
    }

    #[test]
    fn weak_exactness_matches_oracle(inst in diag_instance(2, 1)) {
        prop_assume!(check_obj_weak(&inst).verdict == Verdict::Holds);
        let cmp = compare_opt_at(&inst, 0.01).unwrap();
        prop_assume!(cmp.opt_sdp.is_finite() && cmp.opt_grid.is_finite());
        prop_assert!(cmp.gap.abs() <= 1e-2 * cmp.opt_grid.abs().max(1.0), "{:?}", cmp);
    }

    #[test]
    fn pair_certificates_verify(m1 in sym(3), m2 in sym(3), seed in any::<u64>()) {
        let v = check_pair_seeded(&m1, &m2, seed).unwrap();
        for c in &v.certificates {
            let chk = verify_certificate(c, &[m1.clone(), m2.clone()]);
            prop_assert!(chk.ok, "{} {}", c.kind(), chk.detail);
        }
    }

    #[test]
    fn range_restriction_keeps_verdict(m1 in sym(3), m2 in sym(3), seed in 0u64..1000) {
        // Pad with a zero row and column so the joint range is a proper subspace.
        let pad = |m: &SymMatrix| {
            let mut p = DMatrix::zeros(4, 4);
            p.view_mut((0, 0), (3, 3)).copy_from(m.matrix());
            SymMatrix::new(p)
        };
        let padded = LmiSet::inequalities(vec![pad(&m1), pad(&m2)]);
        let (reduced, _) = restrict_to_joint_range(&padded);
        let a = check_pair_seeded(&padded.matrices[0], &padded.matrices[1], seed).unwrap();
        let b = check_pair_seeded(&reduced.matrices[0], &reduced.matrices[1], seed).unwrap();
        prop_assert_eq!(a.status, b.status);
    }

    #[test]
    fn equality_pair_matches_expanded_set(m1 in sym(3), m2 in sym(3)) {
        let eq = LmiSet::new(vec![m1.clone(), m2.clone()], vec![Sense::Eq, Sense::Eq]).unwrap();
        let expanded = LmiSet::inequalities(eq.expanded());
        let a = shorcert::rog::analyze_set(&eq, 0).unwrap();
        let b = shorcert::rog::analyze_set(&expanded, 0).unwrap();
        prop_assert_eq!(a.status.is_rog(), b.status.is_rog());
        prop_assert_eq!(a.status == RogStatus::NotRogCertified, b.status == RogStatus::NotRogCertified);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ratio_value_bounds_sampled_ratios(a in prop::collection::vec(-1.0..1.0f64, 8), y in vec_of(4)) {
        let a = DMatrix::from_row_slice(4, 2, &a);
        let p = build_rtls(&a, &y, 1.0).unwrap();
        let r = solve_ratio(&p, 0).unwrap();
        let samples = shorcert::oracles::sphere_samples(3, 10_000, 7);
        for z in samples {
            let z = if z[2] < 0.0 { -z } else { z };
            if p.mset.contains(&SymMatrix::outer(&z), 1e-12) && p.b.quad(&z) > 1e-9 {
                prop_assert!(r.value <= p.ratio(&z) + 1e-6 * p.ratio(&z).abs().max(1.0));
            }
        }
        if r.hypotheses.all_pass() {
            if let Some(v) = r.candidate_value {
                prop_assert!((v - r.value).abs() <= 1e-5 * r.value.abs().max(1.0));
                let z = DVector::from_vec(r.candidate.clone().unwrap());
                prop_assert!(p.b.quad(&z) > 0.0);
            }
        }
    }

    #[test]
    fn sphere_oracle_is_deterministic(m1 in sym(3), m2 in sym(3), c in sym(3), seed in any::<u64>()) {
        let set = LmiSet::inequalities(vec![m1, m2]);
        let a = sphere_min_rank_one(&set, &c, 2000, seed).unwrap();
        let b = sphere_min_rank_one(&set, &c, 2000, seed).unwrap();
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
