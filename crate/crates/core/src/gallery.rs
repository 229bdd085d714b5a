//! Bundled example instances and their runners.

use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exactness::{detect_qem, exactness_summary};
use crate::model::{matrix_from_json, QcqpInstance};
use crate::oracles::{conv_membership_sample, sample_dsdp_points, ConvVerdict};
use crate::ratio::{ratio_grid, solve_ratio, RatioProblem};
use crate::rog::{
    analyze_set, check_pair_seeded, clconv_report, construct_rank2_witness_3d,
    probe::probe_soc_cap, probe_random_objectives, verify_certificate, LmiSet, SocCapSet,
};

pub const DEFAULT_SEED: u64 = 0;
const PROBE_TRIALS: usize = 10;
const HULL_SAMPLES: usize = 20_000;

const SOURCES: &[(&str, &str)] = &[
    ("explicit_sdp", include_str!("../gallery/explicit_sdp.json")),
    ("trs_1d", include_str!("../gallery/trs_1d.json")),
    (
        "gtrs_indefinite",
        include_str!("../gallery/gtrs_indefinite.json"),
    ),
    (
        "swiss_cheese_2x2",
        include_str!("../gallery/swiss_cheese_2x2.json"),
    ),
    (
        "diag_sign_definite",
        include_str!("../gallery/diag_sign_definite.json"),
    ),
    ("centered", include_str!("../gallery/centered.json")),
    (
        "big_m_perspective",
        include_str!("../gallery/big_m_perspective.json"),
    ),
    ("qmp_k2", include_str!("../gallery/qmp_k2.json")),
    ("rog_pair_not", include_str!("../gallery/rog_pair_not.json")),
    (
        "rog_pair_3d_not",
        include_str!("../gallery/rog_pair_3d_not.json"),
    ),
    ("rog_vs_ch", include_str!("../gallery/rog_vs_ch.json")),
    (
        "lifting_non_rog",
        include_str!("../gallery/lifting_non_rog.json"),
    ),
    ("soc_cap", include_str!("../gallery/soc_cap.json")),
    ("rtls_small", include_str!("../gallery/rtls_small.json")),
];

pub fn names() -> Vec<&'static str> {
    SOURCES.iter().map(|(n, _)| *n).collect()
}

pub fn source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn item(name: &str) -> Result<Value> {
    let src = source(name).ok_or_else(|| Error::Input(format!("unknown example `{name}`")))?;
    serde_json::from_str(src).map_err(|e| Error::Input(format!("example `{name}`: {e}")))
}

/// One-line description of a bundled example.
pub fn description(name: &str) -> Option<String> {
    item(name)
        .ok()?
        .get("description")?
        .as_str()
        .map(String::from)
}

/// The QCQP instance of a `qcqp` example.
pub fn instance(name: &str) -> Result<QcqpInstance> {
    let v = item(name)?;
    QcqpInstance::from_json_value(
        v.get("instance")
            .ok_or_else(|| Error::Input(format!("`{name}` has no instance")))?,
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct Expectation {
    pub key: String,
    pub expected: Value,
    pub actual: Value,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GalleryRun {
    pub name: String,
    pub kind: String,
    pub description: String,
    pub seed: u64,
    pub report: Value,
    pub expectations: Vec<Expectation>,
}

impl GalleryRun {
    pub fn all_ok(&self) -> bool {
        self.expectations.iter().all(|e| e.ok)
    }
}

pub fn run(name: &str, seed: u64) -> Result<GalleryRun> {
    run_item(&item(name)?, seed)
}

/// Runs an example given as JSON (bundled or user-provided).
pub fn run_item(v: &Value, seed: u64) -> Result<GalleryRun> {
    let kind = v
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Input("example needs `kind`".into()))?;
    let report = match kind {
        "qcqp" => run_qcqp(v, seed)?,
        "rog_pair" => run_rog_pair(set(v, "set")?, seed)?,
        "rog_lifting" => json!({
            "original": run_rog_pair(set(v, "original")?, seed)?,
            "lifted": run_rog_pair(set(v, "lifted")?, seed)?,
        }),
        "soc_cap" => run_soc_cap(v, seed)?,
        "ratio" => run_ratio(v, seed)?,
        other => return Err(Error::Input(format!("unknown example kind `{other}`"))),
    };
    let expectations = match v.get("expect").and_then(Value::as_object) {
        Some(exp) => exp
            .iter()
            .map(|(k, e)| compare(kind, k, e, &report))
            .collect(),
        None => Vec::new(),
    };
    Ok(GalleryRun {
        name: v
            .get("name")
            .and_then(Value::as_str)
            .unwrap_or("custom")
            .to_string(),
        kind: kind.to_string(),
        description: v
            .get("description")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
        seed,
        report,
        expectations,
    })
}

fn set(v: &Value, key: &str) -> Result<LmiSet> {
    LmiSet::from_json_value(
        v.get(key)
            .ok_or_else(|| Error::Input(format!("example needs `{key}`")))?,
    )
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).unwrap_or(Value::Null)
}

fn run_qcqp(v: &Value, seed: u64) -> Result<Value> {
    let inst = QcqpInstance::from_json_value(
        v.get("instance")
            .ok_or_else(|| Error::Input("example needs `instance`".into()))?,
    )?;
    let summary = exactness_summary(&inst);
    let verdict = analyze_set(&LmiSet::from_instance(&inst), seed)?;
    let clconv = clconv_report(&inst, &verdict);
    let mut out = json!({
        "summary": to_value(&summary),
        "implications_hold": summary.implications_hold(),
        "qem": detect_qem(&inst),
        "rog": to_value(&verdict),
        "clconv": to_value(&clconv),
    });
    if let Some(k) = v.get("sample_dsdp").and_then(Value::as_u64) {
        let pts = sample_dsdp_points(&inst, k as usize, seed)?;
        let mut passed = 0;
        let mut worst: f64 = 0.0;
        for (i, (x, t)) in pts.iter().enumerate() {
            let m = conv_membership_sample(&inst, x, *t, HULL_SAMPLES, seed + i as u64)?;
            worst = worst.max(m.deviation);
            if m.verdict == ConvVerdict::LikelyIn {
                passed += 1;
            }
        }
        let frac = if pts.is_empty() {
            0.0
        } else {
            passed as f64 / pts.len() as f64
        };
        out["conv_sampling"] = json!({"points": pts.len(), "passed": passed, "fraction": frac, "max_deviation": worst});
    }
    Ok(out)
}

fn run_rog_pair(mset: LmiSet, seed: u64) -> Result<Value> {
    if mset.len() != 2 {
        return Err(Error::Input("a pair needs exactly two matrices".into()));
    }
    let (m1, m2) = (&mset.matrices[0], &mset.matrices[1]);
    let verdict = check_pair_seeded(m1, m2, seed)?;
    let mats = [m1.clone(), m2.clone()];
    let certs_ok = verdict
        .certificates
        .iter()
        .all(|c| verify_certificate(c, &mats).ok);
    let d = m1.dim();
    let probe = probe_random_objectives(&LmiSet::equalities(mats.to_vec()), d, PROBE_TRIALS, seed)?;
    let witness = if d == 3 && verdict.status == crate::rog::RogStatus::NotRogCertified {
        match construct_rank2_witness_3d(m1, m2, seed) {
            Ok(w) => to_value(&w),
            Err(e) => json!({"error": e.to_string()}),
        }
    } else {
        Value::Null
    };
    Ok(json!({
        "verdict": to_value(&verdict),
        "certificates_verified": certs_ok,
        "probe": to_value(&probe),
        "witness": witness,
    }))
}

fn run_soc_cap(v: &Value, seed: u64) -> Result<Value> {
    let c = crate::model::vector_json(
        v.get("c")
            .ok_or_else(|| Error::Input("soc_cap needs `c`".into()))?,
        vec_len(v, "c")?,
    )?;
    let cap = match v.get("L") {
        Some(l) => SocCapSet::new(matrix_from_json(l, c.len())?, c)?,
        None => SocCapSet::standard(c)?,
    };
    let probe = probe_soc_cap(&cap, PROBE_TRIALS, seed)?;
    Ok(
        json!({"set": to_value(&cap), "verdict": to_value(&cap.verdict()), "probe": to_value(&probe)}),
    )
}

fn vec_len(v: &Value, key: &str) -> Result<usize> {
    v.get(key)
        .and_then(Value::as_array)
        .map(Vec::len)
        .ok_or_else(|| Error::Input(format!("`{key}` must be an array")))
}

fn run_ratio(v: &Value, seed: u64) -> Result<Value> {
    let p = RatioProblem::from_json_value(
        v.get("problem")
            .ok_or_else(|| Error::Input("ratio example needs `problem`".into()))?,
    )?;
    let r = solve_ratio(&p, seed)?;
    let mut out = json!({"result": to_value(&r)});
    if p.dim() <= 4 {
        let radius = p
            .mset
            .matrices
            .iter()
            .map(|m| {
                let q = crate::model::QuadraticForm::from_embedded(m);
                let lo = q.a.min_eigenvalue();
                if lo > 0.0 && q.b.amax() == 0.0 {
                    (-q.c / lo).max(0.0).sqrt()
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min);
        if radius.is_finite() {
            let g = ratio_grid(&p, radius, 0.01)?;
            let matches = (g.value - r.value).abs() <= 1e-2 * r.value.abs().max(1.0);
            out["grid"] = json!({"value": g.value, "argmin": g.argmin, "matches": matches});
        }
    }
    Ok(out)
}

fn lookup<'a>(report: &'a Value, path: &[&str]) -> &'a Value {
    path.iter()
        .fold(report, |v, k| v.get(k).unwrap_or(&Value::Null))
}

fn compare(kind: &str, key: &str, expected: &Value, report: &Value) -> Expectation {
    let path: Vec<&str> = match (kind, key) {
        ("qcqp", "strong" | "weak" | "ch" | "burer_ye" | "qmp") => vec!["summary", key, "verdict"],
        ("qcqp", "opt") => vec!["summary", "opt_sdp", "value"],
        ("qcqp", "oracle_flag") => vec!["summary", "oracle", "exactness_flag"],
        ("qcqp", "rog") => vec!["rog", "status"],
        ("qcqp", "clconv") => vec!["clconv", "consequence"],
        ("qcqp", "conv_fraction") => vec!["conv_sampling", "fraction"],
        ("qcqp", "qem") => vec!["qem"],
        ("rog_pair", "status") => vec!["verdict", "status"],
        ("rog_pair", "witness") => vec!["witness", "check", "valid"],
        ("rog_lifting", "original" | "lifted") => vec![key, "verdict", "status"],
        ("soc_cap", "status") => vec!["verdict", "status"],
        ("soc_cap", "probe_gap") => vec!["probe", "max_gap"],
        ("ratio", "claim") => vec!["result", "claim"],
        ("ratio", "grid_match") => vec!["grid", "matches"],
        _ => vec![key],
    };
    let actual = lookup(report, &path).clone();
    let ok = match (expected.as_f64(), actual.as_f64()) {
        (Some(e), Some(a)) if key == "opt" => (e - a).abs() <= 1e-4 * e.abs().max(1.0),
        (Some(e), Some(a)) if key == "probe_gap" => a <= e + crate::rog::probe::GAP_TOL,
        (Some(e), Some(a)) if key == "conv_fraction" => a >= e,
        (Some(e), Some(a)) => (e - a).abs() <= 1e-9,
        _ => *expected == actual,
    };
    Expectation {
        key: key.to_string(),
        expected: expected.clone(),
        actual,
        ok,
    }
}

/// Sampled relaxation points for an example, for callers running their own checks.
pub fn dsdp_points(name: &str, count: usize, seed: u64) -> Result<Vec<(DVector<f64>, f64)>> {
    sample_dsdp_points(&instance(name)?, count, seed)
}
