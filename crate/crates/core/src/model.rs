//! QCQP instances `min q_obj(x) s.t. q_i(x) ≤ 0 (i ∈ I), q_i(x) = 0 (i ∈ E)`
//! with `q(x) = xᵀAx + 2bᵀx + c`, and their JSON encoding.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::Value;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{SymMatrix, RANK_TOL};

/// Default absolute feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sense {
    Le,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub a: SymMatrix,
    pub b: DVector<f64>,
    pub c: f64,
}

impl QuadraticForm {
    pub fn new(a: SymMatrix, b: DVector<f64>, c: f64) -> Result<Self> {
        check_dim(a.dim(), b.len())?;
        Ok(QuadraticForm { a, b, c })
    }

    pub fn zero(n: usize) -> Self {
        QuadraticForm {
            a: SymMatrix::zeros(n),
            b: DVector::zeros(n),
            c: 0.0,
        }
    }

    /// `xᵀ diag(d) x + c`.
    pub fn diag(d: &[f64], c: f64) -> Self {
        QuadraticForm {
            a: SymMatrix::diag(d),
            b: DVector::zeros(d.len()),
            c,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `xᵀAx + 2bᵀx + c`.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.a.quad(x) + 2.0 * self.b.dot(x) + self.c
    }

    /// Gradient `2(Ax + b)`.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.a.mul_vec(x) + &self.b) * 2.0
    }

    /// The `(n+1)×(n+1)` matrix `[[A, b], [bᵀ, c]]`.
    pub fn embed(&self) -> SymMatrix {
        let n = self.dim();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(self.a.matrix());
        for i in 0..n {
            m[(i, n)] = self.b[i];
            m[(n, i)] = self.b[i];
        }
        m[(n, n)] = self.c;
        SymMatrix::new(m)
    }

    /// Inverse of [`QuadraticForm::embed`].
    pub fn from_embedded(m: &SymMatrix) -> Self {
        let n = m.dim() - 1;
        let a = SymMatrix::new(m.matrix().view((0, 0), (n, n)).into_owned());
        let b = DVector::from_fn(n, |i, _| m.get(i, n));
        QuadraticForm {
            a,
            b,
            c: m.get(n, n),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        QuadraticForm {
            a: self.a.scale(s),
            b: &self.b * s,
            c: self.c * s,
        }
    }

    pub fn add(&self, other: &QuadraticForm) -> Self {
        QuadraticForm {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
            c: self.c + other.c,
        }
    }
}

pub fn eval_form(q: &QuadraticForm, x: &DVector<f64>) -> Result<f64> {
    check_dim(q.dim(), x.len())?;
    Ok(q.eval(x))
}

#[derive(Clone, Debug, PartialEq)]
pub struct QcqpInstance {
    pub n: usize,
    pub objective: QuadraticForm,
    pub inequalities: Vec<QuadraticForm>,
    pub equalities: Vec<QuadraticForm>,
    /// Optional user-supplied generators `(γ_obj, γ)` of the multiplier cone.
    pub gamma_generators: Option<Vec<DVector<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpigraphPoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl QcqpInstance {
    pub fn new(
        objective: QuadraticForm,
        inequalities: Vec<QuadraticForm>,
        equalities: Vec<QuadraticForm>,
    ) -> Result<Self> {
        let n = objective.dim();
        if n == 0 {
            return Err(Error::Input("instance dimension must be positive".into()));
        }
        for q in inequalities.iter().chain(&equalities) {
            check_dim(n, q.dim())?;
        }
        Ok(QcqpInstance {
            n,
            objective,
            inequalities,
            equalities,
            gamma_generators: None,
        })
    }

    pub fn with_generators(mut self, gens: Vec<DVector<f64>>) -> Result<Self> {
        for g in &gens {
            check_dim(self.m() + 1, g.len())?;
        }
        self.gamma_generators = Some(gens);
        Ok(self)
    }

    pub fn m_ineq(&self) -> usize {
        self.inequalities.len()
    }

    pub fn m(&self) -> usize {
        self.inequalities.len() + self.equalities.len()
    }

    /// Constraint `i` in the global order (inequalities first).
    pub fn constraint(&self, i: usize) -> &QuadraticForm {
        if i < self.m_ineq() {
            &self.inequalities[i]
        } else {
            &self.equalities[i - self.m_ineq()]
        }
    }

    pub fn sense(&self, i: usize) -> Sense {
        if i < self.m_ineq() {
            Sense::Le
        } else {
            Sense::Eq
        }
    }

    pub fn constraints(&self) -> impl Iterator<Item = (&QuadraticForm, Sense)> {
        self.inequalities
            .iter()
            .map(|q| (q, Sense::Le))
            .chain(self.equalities.iter().map(|q| (q, Sense::Eq)))
    }

    /// True when every quadratic part is diagonal.
    pub fn is_diagonal(&self) -> bool {
        std::iter::once(&self.objective)
            .chain(self.inequalities.iter())
            .chain(self.equalities.iter())
            .all(|q| q.a.is_diagonal(0.0))
    }

    /// Values `q_i(x)` in the global constraint order.
    pub fn constraint_values(&self, x: &DVector<f64>) -> Vec<f64> {
        self.constraints().map(|(q, _)| q.eval(x)).collect()
    }

    /// Largest constraint violation at `x` (0 when feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        self.constraints()
            .map(|(q, s)| {
                let v = q.eval(x);
                match s {
                    Sense::Le => v.max(0.0),
                    Sense::Eq => v.abs(),
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.n && self.max_violation(x) <= tol
    }

    pub fn epigraph_member(&self, x: &DVector<f64>, t: f64, tol: f64) -> bool {
        self.is_feasible(x, tol) && self.objective.eval(x) <= t + tol
    }

    pub fn aggregate_constraints(&self, gamma: &[f64]) -> Result<QuadraticForm> {
        check_dim(self.m(), gamma.len())?;
        let mut acc = QuadraticForm::zero(self.n);
        for (i, g) in gamma.iter().enumerate() {
            if *g != 0.0 {
                acc = acc.add(&self.constraint(i).scale(*g));
            }
        }
        Ok(acc)
    }

    pub fn aggregate_with_obj(&self, gamma_obj: f64, gamma: &[f64]) -> Result<QuadraticForm> {
        Ok(self
            .objective
            .scale(gamma_obj)
            .add(&self.aggregate_constraints(gamma)?))
    }

    /// Aggregate for a stacked multiplier `(γ_obj, γ)`.
    pub fn aggregate_stacked(&self, g: &DVector<f64>) -> Result<QuadraticForm> {
        check_dim(self.m() + 1, g.len())?;
        self.aggregate_with_obj(g[0], &g.as_slice()[1..])
    }

    pub fn objective_matrix(&self) -> SymMatrix {
        self.objective.embed()
    }

    /// Embedded constraint matrices with their senses, in the global order.
    pub fn homogenize(&self) -> Vec<(SymMatrix, Sense)> {
        self.constraints().map(|(q, s)| (q.embed(), s)).collect()
    }

    /// Maps every form `(A, b, c)` to `(PᵀAP, Pᵀb, c)`; the new variable `y`
    /// corresponds to `x = P y`.
    pub fn congruence_transform(&self, p: &DMatrix<f64>) -> Result<QcqpInstance> {
        if p.shape() != (self.n, self.n) {
            return Err(Error::Input(format!("transform must be {0}x{0}", self.n)));
        }
        let svd = p.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= RANK_TOL * smax.max(1.0) {
            return Err(Error::Input("congruence transform is singular".into()));
        }
        let tr = |q: &QuadraticForm| QuadraticForm {
            a: q.a.congruence(p),
            b: p.transpose() * &q.b,
            c: q.c,
        };
        Ok(QcqpInstance {
            n: self.n,
            objective: tr(&self.objective),
            inequalities: self.inequalities.iter().map(tr).collect(),
            equalities: self.equalities.iter().map(tr).collect(),
            gamma_generators: self.gamma_generators.clone(),
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value =
            serde_json::from_str(s).map_err(|e| Error::Input(format!("invalid JSON: {e}")))?;
        Self::from_json_value(&v)
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let n = v
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Input("missing positive integer `n`".into()))?
            as usize;
        let objective = form_from_json(
            v.get("objective")
                .ok_or_else(|| Error::Input("missing `objective`".into()))?,
            n,
        )?;
        let list = |key: &str| -> Result<Vec<QuadraticForm>> {
            match v.get(key) {
                None | Some(Value::Null) => Ok(Vec::new()),
                Some(Value::Array(items)) => items.iter().map(|f| form_from_json(f, n)).collect(),
                Some(_) => Err(Error::Input(format!("`{key}` must be an array"))),
            }
        };
        let inst = QcqpInstance::new(objective, list("inequalities")?, list("equalities")?)?;
        match v.get("gamma_generators") {
            None | Some(Value::Null) => Ok(inst),
            Some(Value::Array(rows)) => {
                let gens = rows
                    .iter()
                    .map(|r| vector_from_json(r, inst.m() + 1))
                    .collect::<Result<Vec<_>>>()?;
                inst.with_generators(gens)
            }
            Some(_) => Err(Error::Input("`gamma_generators` must be an array".into())),
        }
    }

    /// Canonical encoding: fixed key order, 17 significant digits.
    pub fn to_json_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{{\n  \"n\": {},\n  \"objective\": ", self.n));
        out.push_str(&form_to_json(&self.objective));
        for (key, forms) in [
            ("inequalities", &self.inequalities),
            ("equalities", &self.equalities),
        ] {
            out.push_str(&format!(",\n  \"{key}\": ["));
            for (k, f) in forms.iter().enumerate() {
                out.push_str(if k == 0 { "\n    " } else { ",\n    " });
                out.push_str(&form_to_json(f));
            }
            out.push_str(if forms.is_empty() { "]" } else { "\n  ]" });
        }
        if let Some(gens) = &self.gamma_generators {
            out.push_str(",\n  \"gamma_generators\": [");
            for (k, g) in gens.iter().enumerate() {
                out.push_str(if k == 0 { "\n    " } else { ",\n    " });
                out.push_str(&number_list(g.iter().copied()));
            }
            out.push_str(if gens.is_empty() { "]" } else { "\n  ]" });
        }
        out.push_str("\n}\n");
        out
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_positive() {
            "0".into()
        } else {
            "-0.0".into()
        };
    }
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{v:.0}");
    }
    format!("{v:.16e}")
}

fn number_list(it: impl Iterator<Item = f64>) -> String {
    let parts: Vec<String> = it.map(fmt_num).collect();
    format!("[{}]", parts.join(", "))
}

pub fn form_to_json(q: &QuadraticForm) -> String {
    let n = q.dim();
    let (kind, data) = if q.a.is_diagonal(0.0) {
        ("diag", number_list(q.a.diagonal().iter().copied()))
    } else {
        (
            "dense",
            number_list(
                (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| q.a.get(i, j)),
            ),
        )
    };
    format!(
        "{{\"A\": {{\"kind\": \"{kind}\", \"data\": {data}}}, \"b\": {}, \"c\": {}}}",
        number_list(q.b.iter().copied()),
        fmt_num(q.c)
    )
}

fn vector_from_json(v: &Value, len: usize) -> Result<DVector<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Input("expected a numeric array".into()))?;
    check_dim(len, arr.len())?;
    let vals = arr
        .iter()
        .map(|x| {
            x.as_f64()
                .ok_or_else(|| Error::Input("expected a number".into()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(vals))
}

/// Parses `{"kind": "diag" | "dense", "data": [...]}` (dense data row-major).
pub fn matrix_from_json(a: &Value, n: usize) -> Result<SymMatrix> {
    let kind = a.get("kind").and_then(Value::as_str).unwrap_or("dense");
    let data = a
        .get("data")
        .ok_or_else(|| Error::Input("matrix is missing `data`".into()))?;
    match kind {
        "diag" => Ok(SymMatrix::diag(vector_from_json(data, n)?.as_slice())),
        "dense" => SymMatrix::try_new(DMatrix::from_row_slice(
            n,
            n,
            vector_from_json(data, n * n)?.as_slice(),
        )),
        other => Err(Error::Input(format!("unknown matrix kind `{other}`"))),
    }
}

pub fn vector_json(v: &Value, len: usize) -> Result<DVector<f64>> {
    vector_from_json(v, len)
}

/// Parses `{"A": {"kind": ..., "data": [...]}, "b": [...], "c": v}`; `b` and `c` default to zero.
pub fn form_from_json(v: &Value, n: usize) -> Result<QuadraticForm> {
    let a = matrix_from_json(
        v.get("A")
            .ok_or_else(|| Error::Input("form is missing `A`".into()))?,
        n,
    )?;
    let b = match v.get("b") {
        None | Some(Value::Null) => DVector::zeros(n),
        Some(b) => vector_from_json(b, n)?,
    };
    let c = match v.get("c") {
        None | Some(Value::Null) => 0.0,
        Some(c) => c
            .as_f64()
            .ok_or_else(|| Error::Input("`c` must be a number".into()))?,
    };
    QuadraticForm::new(a, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn hyperbola_pair() -> QcqpInstance {
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

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(
            QuadraticForm::diag(&[1.0, 1.0], 0.0).eval(&v(&[1.0, 1.0])),
            2.0
        );
        assert_eq!(
            QuadraticForm::diag(&[-2.0, 1.0], 1.0).eval(&v(&[1.0, 1.0])),
            0.0
        );
        let q = QuadraticForm::new(SymMatrix::zeros(2), v(&[1.0, 0.0]), -3.0).unwrap();
        assert_eq!(q.eval(&v(&[2.0, 0.0])), 1.0);
        assert!(eval_form(&q, &v(&[1.0])).is_err());
    }

    #[test]
    fn aggregation_examples() {
        let inst = hyperbola_pair();
        let z = inst.aggregate_constraints(&[0.0, 0.0]).unwrap();
        assert_eq!(z, QuadraticForm::zero(2));
        let g = inst.aggregate_constraints(&[1.0, 1.0]).unwrap();
        assert_eq!(g.a, SymMatrix::diag(&[-1.0, -1.0]));
        assert_eq!(g.c, 2.0);
        assert_eq!(
            inst.aggregate_constraints(&[0.0, 1.0]).unwrap(),
            inst.inequalities[1]
        );
        assert_eq!(
            inst.aggregate_with_obj(1.0, &[1.0, 1.0]).unwrap().a,
            SymMatrix::zeros(2)
        );
        assert_eq!(
            inst.aggregate_with_obj(1.0, &[0.0, 0.0]).unwrap(),
            inst.objective
        );
        assert!(inst.aggregate_constraints(&[1.0]).is_err());
    }

    #[test]
    fn homogenize_examples() {
        let one_d = QcqpInstance::new(
            QuadraticForm::diag(&[-1.0], 0.0),
            vec![QuadraticForm::diag(&[1.0], -1.0)],
            vec![],
        )
        .unwrap();
        assert_eq!(one_d.homogenize()[0].0, SymMatrix::diag(&[1.0, -1.0]));
        assert_eq!(
            hyperbola_pair().homogenize()[0].0,
            SymMatrix::diag(&[-2.0, 1.0, 1.0])
        );
        let free = QcqpInstance::new(QuadraticForm::diag(&[1.0], 0.0), vec![], vec![]).unwrap();
        assert!(free.homogenize().is_empty());
    }

    #[test]
    fn feasibility_examples() {
        let inst = hyperbola_pair();
        assert!(inst.is_feasible(&v(&[1.0, 1.0]), FEAS_TOL));
        assert!(!inst.is_feasible(&v(&[0.0, 0.0]), FEAS_TOL));
        assert!(inst.epigraph_member(&v(&[1.0, 1.0]), 2.0, 0.0));
        assert!(!inst.epigraph_member(&v(&[1.0, 1.0]), 1.5, 0.0));
    }

    #[test]
    fn congruence_examples() {
        let inst =
            QcqpInstance::new(QuadraticForm::diag(&[1.0, 1.0], 0.0), vec![], vec![]).unwrap();
        assert_eq!(
            inst.congruence_transform(&DMatrix::identity(2, 2)).unwrap(),
            inst
        );
        let p = DMatrix::from_diagonal(&v(&[2.0, 1.0]));
        assert_eq!(
            inst.congruence_transform(&p).unwrap().objective.a,
            SymMatrix::diag(&[4.0, 1.0])
        );
        assert!(inst.congruence_transform(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut inst = hyperbola_pair();
        inst.objective.b = v(&[0.1, -1.0 / 3.0]);
        inst.equalities.push(
            QuadraticForm::new(
                SymMatrix::from_row_slice(2, &[0.0, 0.5, 0.5, 0.0]),
                v(&[1e-300, 0.0]),
                -0.0,
            )
            .unwrap(),
        );
        let text = inst.to_json_string();
        let back = QcqpInstance::from_json_str(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json_string(), text);
    }

    #[test]
    fn json_rejects_bad_input() {
        assert!(QcqpInstance::from_json_str("{\"n\": 2}").is_err());
        assert!(QcqpInstance::from_json_str(
            "{\"n\": 1, \"objective\": {\"A\": {\"kind\": \"diag\", \"data\": [1, 2]}}}"
        )
        .is_err());
        assert!(QcqpInstance::from_json_str("not json").is_err());
    }
}
