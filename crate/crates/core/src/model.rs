//! Finite discrete models with exact rational probabilities under each
//! registered parameter value.

use std::collections::{BTreeMap, HashMap};

use num::traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rational::{self, one, ratio, zero, Rational};

/// Largest support enumerated unless the caller raises the cap.
pub const DEFAULT_SUPPORT_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SupportPoint {
    pub id: usize,
    pub label: String,
    statistics: BTreeMap<String, Rational>,
}

impl SupportPoint {
    pub fn statistic(&self, name: &str) -> Option<&Rational> {
        self.statistics.get(name)
    }

    pub fn statistic_names(&self) -> impl Iterator<Item = &str> {
        self.statistics.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Rational,
}

/// A finite support with one exact pmf per parameter value.
///
/// Every pmf sums to exactly one and the null pmf is strictly positive on
/// the whole support. Models are immutable once built.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    points: Vec<SupportPoint>,
    params: Vec<Parameter>,
    pmf: Vec<Vec<Rational>>,
    null: usize,
    alternative: Option<usize>,
    priority: Option<Vec<String>>,
    by_label: HashMap<String, usize>,
}

/// Unvalidated ingredients for [`DiscreteModel::new`].
#[derive(Debug, Clone, Default)]
pub struct ModelParts {
    pub labels: Vec<String>,
    pub params: Vec<Parameter>,
    /// `pmf[j][i]` is the probability of point `i` under parameter `j`.
    pub pmf: Vec<Vec<Rational>>,
    pub null: Option<String>,
    pub alternative: Option<String>,
    pub statistics: Vec<(String, Vec<Rational>)>,
    pub priority: Option<Vec<String>>,
}

impl DiscreteModel {
    pub fn new(parts: ModelParts) -> Result<Self> {
        Self::with_cap(parts, DEFAULT_SUPPORT_CAP)
    }

    pub fn with_cap(parts: ModelParts, cap: usize) -> Result<Self> {
        let ModelParts { labels, params, pmf, null, alternative, statistics, priority } = parts;
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidModel("support is empty".into()));
        }
        if n > cap {
            return Err(Error::Capacity { requested: n as u128, cap });
        }
        if params.is_empty() {
            return Err(Error::InvalidModel("no parameters registered".into()));
        }
        if pmf.len() != params.len() {
            return Err(Error::InvalidModel(format!("{} pmf rows for {} parameters", pmf.len(), params.len())));
        }
        let mut by_label = HashMap::with_capacity(n);
        for (i, label) in labels.iter().enumerate() {
            if by_label.insert(label.clone(), i).is_some() {
                return Err(Error::InvalidModel(format!("duplicate label `{label}`")));
            }
        }
        let mut seen = HashMap::new();
        for (j, p) in params.iter().enumerate() {
            if seen.insert(p.name.clone(), j).is_some() {
                return Err(Error::InvalidModel(format!("duplicate parameter `{}`", p.name)));
            }
        }
        for (p, row) in params.iter().zip(&pmf) {
            if row.len() != n {
                return Err(Error::InvalidModel(format!(
                    "pmf for `{}` has {} entries, support has {n}",
                    p.name,
                    row.len()
                )));
            }
            if let Some(i) = row.iter().position(|q| q.is_negative()) {
                return Err(Error::InvalidModel(format!("negative probability under `{}` at `{}`", p.name, labels[i])));
            }
            let total: Rational = row.iter().sum();
            if total != one() {
                return Err(Error::InvalidModel(format!(
                    "pmf for `{}` sums to {}, not 1",
                    p.name,
                    rational::to_fraction(&total)
                )));
            }
        }
        let resolve = |name: &str| seen.get(name).copied().ok_or_else(|| Error::UnknownParameter(name.to_string()));
        let null = match null {
            Some(name) => resolve(&name)?,
            None => 0,
        };
        let alternative = match alternative {
            Some(name) => Some(resolve(&name)?),
            None => (0..params.len()).find(|&j| j != null),
        };
        if let Some(i) = pmf[null].iter().position(|q| q.is_zero()) {
            return Err(Error::InvalidModel(format!(
                "`{}` has zero probability under the null `{}`",
                labels[i], params[null].name
            )));
        }
        let mut points: Vec<SupportPoint> = labels
            .into_iter()
            .enumerate()
            .map(|(id, label)| SupportPoint { id, label, statistics: BTreeMap::new() })
            .collect();
        for (name, values) in statistics {
            if values.len() != n {
                return Err(Error::InvalidModel(format!(
                    "statistic `{name}` has {} values, support has {n}",
                    values.len()
                )));
            }
            for (pt, v) in points.iter_mut().zip(values) {
                pt.statistics.insert(name.clone(), v);
            }
        }
        if let Some(order) = &priority {
            for label in order {
                if !by_label.contains_key(label) {
                    return Err(Error::UnknownPoint(label.clone()));
                }
            }
        }
        Ok(Self { points, params, pmf, null, alternative, priority, by_label })
    }

    /// iid Bernoulli(θ) vectors of length `n`; one parameter per θ, named
    /// `theta0`, `theta1`, ... in order, the first being the null.
    ///
    /// Labels are the 0/1 vectors written as digit strings (`"01111"`) and
    /// the count of ones is cached as the statistic `sum`.
    pub fn bernoulli_product(n: u32, thetas: &[Rational]) -> Result<Self> {
        Self::bernoulli_product_capped(n, thetas, DEFAULT_SUPPORT_CAP)
    }

    pub fn bernoulli_product_capped(n: u32, thetas: &[Rational], cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        check_open_unit(thetas)?;
        let size = 1u128.checked_shl(n).unwrap_or(u128::MAX);
        if n >= 64 || size > cap as u128 {
            return Err(Error::Capacity { requested: size, cap });
        }
        let size = size as usize;
        let width = n as usize;
        let mut labels = Vec::with_capacity(size);
        let mut sums = Vec::with_capacity(size);
        for i in 0..size {
            let label = format!("{i:0width$b}");
            sums.push(label.bytes().filter(|&c| c == b'1').count() as u32);
            labels.push(label);
        }
        let mut pmf = Vec::with_capacity(thetas.len());
        for theta in thetas {
            // θ^k (1-θ)^(n-k) depends only on k.
            let by_count: Vec<Rational> = (0..=n)
                .map(|k| num::pow(theta.clone(), k as usize) * num::pow(one() - theta, (n - k) as usize))
                .collect();
            pmf.push(sums.iter().map(|&k| by_count[k as usize].clone()).collect());
        }
        let stat = sums.iter().map(|&k| rational::int(k as i64)).collect();
        Self::with_cap(
            ModelParts {
                labels,
                params: named_thetas(thetas),
                pmf,
                statistics: vec![("sum".to_string(), stat)],
                ..ModelParts::default()
            },
            cap,
        )
    }

    /// Binomial(n, θ) on `{0, ..., n}`; the count is cached as `count`.
    pub fn binomial(n: u32, thetas: &[Rational]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        check_open_unit(thetas)?;
        if n as usize + 1 > DEFAULT_SUPPORT_CAP {
            return Err(Error::Capacity { requested: n as u128 + 1, cap: DEFAULT_SUPPORT_CAP });
        }
        let mut choose = vec![rational::int(1)];
        for k in 1..=n {
            let prev = choose[k as usize - 1].clone();
            choose.push(prev * ratio((n - k + 1) as i64, k as i64));
        }
        let pmf = thetas
            .iter()
            .map(|theta| {
                (0..=n)
                    .map(|k| {
                        choose[k as usize].clone()
                            * num::pow(theta.clone(), k as usize)
                            * num::pow(one() - theta, (n - k) as usize)
                    })
                    .collect()
            })
            .collect();
        Self::new(ModelParts {
            labels: (0..=n).map(|k| k.to_string()).collect(),
            params: named_thetas(thetas),
            pmf,
            statistics: vec![("count".to_string(), (0..=n).map(|k| rational::int(k as i64)).collect())],
            ..ModelParts::default()
        })
    }

    /// Five iid Bernoulli trials, θ0 = 1/2 against θ1 = 4/5, carrying the
    /// tie-break priority that reproduces the worked ranking table.
    pub fn example1() -> Self {
        let mut model = Self::bernoulli_product(5, &[ratio(1, 2), ratio(4, 5)]).expect("example model is valid");
        model.priority = Some(example1_priority());
        model
    }

    /// Resolves a builtin model name: `example1`, `binomial:n,θ0,θ1,...` or
    /// `bernoulli:n,θ0,θ1,...`.
    pub fn builtin(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "example1" {
            return Ok(Self::example1());
        }
        let (kind, args) =
            spec.split_once(':').ok_or_else(|| Error::Config(format!("unknown builtin model `{spec}`")))?;
        let mut fields = args.split(',');
        let n: u32 = fields
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Config(format!("`{spec}`: expected a positive integer n")))?;
        let thetas = fields.map(rational::parse).collect::<Result<Vec<_>>>()?;
        if thetas.len() < 2 {
            return Err(Error::Config(format!("`{spec}`: need at least θ0 and θ1")));
        }
        match kind {
            "binomial" => Self::binomial(n, &thetas),
            "bernoulli" => Self::bernoulli_product(n, &thetas),
            _ => Err(Error::Config(format!("unknown builtin model kind `{kind}`"))),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SupportPoint] {
        &self.points
    }

    pub fn point(&self, id: usize) -> Result<&SupportPoint> {
        self.points.get(id).ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    pub fn point_by_label(&self, label: &str) -> Result<&SupportPoint> {
        self.by_label.get(label).map(|&i| &self.points[i]).ok_or_else(|| Error::UnknownPoint(label.to_string()))
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn null_name(&self) -> &str {
        &self.params[self.null].name
    }

    pub fn alternative_name(&self) -> Option<&str> {
        self.alternative.map(|j| self.params[j].name.as_str())
    }

    pub fn priority(&self) -> Option<&[String]> {
        self.priority.as_deref()
    }

    /// Finds a parameter by name, or failing that by value (`"4/5"`,
    /// `"0.8"`).
    pub fn resolve_parameter(&self, key: &str) -> Result<&str> {
        if let Some(p) = self.params.iter().find(|p| p.name == key) {
            return Ok(&p.name);
        }
        if let Ok(q) = rational::parse(key) {
            if let Some(p) = self.params.iter().find(|p| p.value == q) {
                return Ok(&p.name);
            }
        }
        Err(Error::UnknownParameter(key.to_string()))
    }

    /// Probabilities of every point under `param`, aligned with [`points`](Self::points).
    pub fn probs(&self, param: &str) -> Result<&[Rational]> {
        let j = self
            .params
            .iter()
            .position(|p| p.name == param)
            .ok_or_else(|| Error::UnknownParameter(param.to_string()))?;
        Ok(&self.pmf[j])
    }

    pub fn null_probs(&self) -> &[Rational] {
        &self.pmf[self.null]
    }

    pub fn pmf(&self, param: &str, point: usize) -> Result<&Rational> {
        let row = self.probs(param)?;
        row.get(point).ok_or_else(|| Error::UnknownPoint(point.to_string()))
    }

    pub fn event_prob<F>(&self, param: &str, mut pred: F) -> Result<Rational>
    where
        F: FnMut(&SupportPoint) -> bool,
    {
        let row = self.probs(param)?;
        Ok(self.points.iter().zip(row).filter(|(pt, _)| pred(pt)).fold(zero(), |acc, (_, q)| acc + q))
    }

    /// `Σ_x p_θ(x)·g(x)`.
    pub fn expect<F>(&self, param: &str, mut g: F) -> Result<Rational>
    where
        F: FnMut(usize) -> Rational,
    {
        let row = self.probs(param)?;
        Ok(row.iter().enumerate().fold(zero(), |acc, (i, q)| acc + q * g(i)))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_json_value(&value)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let file: ModelFile = serde_json::from_value(value.clone())?;
        file.into_model()
    }

    pub fn to_json_value(&self) -> Value {
        let mut params = serde_json::Map::new();
        let mut pmf = serde_json::Map::new();
        for (p, row) in self.params.iter().zip(&self.pmf) {
            params.insert(p.name.clone(), Value::String(rational::to_fraction(&p.value)));
            pmf.insert(
                p.name.clone(),
                Value::Array(row.iter().map(|q| Value::String(rational::to_fraction(q))).collect()),
            );
        }
        let mut stats = serde_json::Map::new();
        if let Some(first) = self.points.first() {
            for name in first.statistic_names() {
                let col =
                    self.points.iter().map(|pt| Value::String(rational::to_fraction(&pt.statistics[name]))).collect();
                stats.insert(name.to_string(), Value::Array(col));
            }
        }
        let mut out = serde_json::Map::new();
        out.insert("parameters".into(), Value::Object(params));
        out.insert("null".into(), Value::String(self.null_name().to_string()));
        if let Some(alt) = self.alternative_name() {
            out.insert("alternative".into(), Value::String(alt.to_string()));
        }
        out.insert(
            "support".into(),
            Value::Array(self.points.iter().map(|p| Value::String(p.label.clone())).collect()),
        );
        out.insert("pmf".into(), Value::Object(pmf));
        if !stats.is_empty() {
            out.insert("statistics".into(), Value::Object(stats));
        }
        if let Some(order) = &self.priority {
            out.insert("priority".into(), order.iter().cloned().map(Value::String).collect());
        }
        Value::Object(out)
    }

    /// The same model with a different attached tie-break priority.
    pub fn with_priority(mut self, priority: Option<Vec<String>>) -> Result<Self> {
        if let Some(order) = &priority {
            for label in order {
                self.point_by_label(label)?;
            }
        }
        self.priority = priority;
        Ok(self)
    }
}

/// JSON model-spec file; rationals are `"num/den"` strings.
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    parameters: serde_json::Map<String, Value>,
    #[serde(default)]
    null: Option<String>,
    #[serde(default)]
    alternative: Option<String>,
    support: Vec<String>,
    pmf: serde_json::Map<String, Value>,
    #[serde(default)]
    statistics: Option<serde_json::Map<String, Value>>,
    #[serde(default)]
    priority: Option<Vec<String>>,
}

impl ModelFile {
    fn into_model(self) -> Result<DiscreteModel> {
        let mut params = Vec::new();
        let mut pmf = Vec::new();
        for (name, v) in &self.parameters {
            let value = rational::parse(as_str(v, name)?)?;
            let row =
                self.pmf.get(name).ok_or_else(|| Error::InvalidModel(format!("no pmf for parameter `{name}`")))?;
            pmf.push(rational_array(row, name)?);
            params.push(Parameter { name: name.clone(), value });
        }
        if let Some(extra) = self.pmf.keys().find(|k| !self.parameters.contains_key(*k)) {
            return Err(Error::UnknownParameter(extra.clone()));
        }
        let statistics = match &self.statistics {
            Some(map) => map.iter().map(|(k, v)| Ok((k.clone(), rational_array(v, k)?))).collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        DiscreteModel::new(ModelParts {
            labels: self.support,
            params,
            pmf,
            null: self.null,
            alternative: self.alternative,
            statistics,
            priority: self.priority,
        })
    }
}

fn as_str<'a>(v: &'a Value, ctx: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| Error::InvalidModel(format!("`{ctx}`: rationals must be \"num/den\" strings")))
}

fn rational_array(v: &Value, ctx: &str) -> Result<Vec<Rational>> {
    let items = v.as_array().ok_or_else(|| Error::InvalidModel(format!("`{ctx}` must be an array")))?;
    items.iter().map(|x| rational::parse(as_str(x, ctx)?)).collect()
}

fn check_open_unit(thetas: &[Rational]) -> Result<()> {
    if thetas.is_empty() {
        return Err(Error::InvalidParameter("at least one θ is required".into()));
    }
    for t in thetas {
        if !t.is_positive() || *t >= one() {
            return Err(Error::InvalidParameter(format!(
                "θ = {} is not strictly between 0 and 1",
                rational::to_fraction(t)
            )));
        }
    }
    Ok(())
}

fn named_thetas(thetas: &[Rational]) -> Vec<Parameter> {
    thetas.iter().enumerate().map(|(j, v)| Parameter { name: format!("theta{j}"), value: v.clone() }).collect()
}

/// Full priority over the 32 labels of [`DiscreteModel::example1`]: the
/// first eight entries are the rows of the worked ranking table, the rest
/// follow lexicographically.
pub fn example1_priority() -> Vec<String> {
    let head = ["11111", "01111", "10111", "11011", "11101", "11110", "00111", "10011"];
    let mut order: Vec<String> = head.iter().map(|s| s.to_string()).collect();
    order.extend((0..32u32).map(|i| format!("{i:05b}")).filter(|l| !head.contains(&l.as_str())));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn example() -> DiscreteModel {
        DiscreteModel::example1()
    }

    #[test]
    fn example_null_is_uniform() {
        let m = example();
        assert_eq!(m.len(), 32);
        for i in 0..32 {
            assert_eq!(m.pmf("theta0", i).unwrap(), &ratio(1, 32));
        }
    }

    #[test]
    fn example_alternative_values() {
        let m = example();
        let all_ones = m.point_by_label("11111").unwrap().id;
        assert_eq!(m.pmf("theta1", all_ones).unwrap(), &rational::parse("0.32768").unwrap());
        let row2 = m.point_by_label("01111").unwrap().id;
        assert_eq!(m.pmf("theta1", row2).unwrap(), &rational::parse("0.08192").unwrap());
    }

    #[test]
    fn tail_events() {
        let m = example();
        let t = |pt: &SupportPoint| pt.statistic("sum").unwrap().clone();
        assert_eq!(m.event_prob("theta0", |p| t(p) >= int(5)).unwrap(), ratio(1, 32));
        assert_eq!(m.event_prob("theta0", |p| t(p) >= int(4)).unwrap(), rational::parse("0.1875").unwrap());
        assert_eq!(m.event_prob("theta1", |_| true).unwrap(), one());
    }

    #[test]
    fn single_trial() {
        let m = DiscreteModel::bernoulli_product(1, &[ratio(1, 2)]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.probs("theta0").unwrap(), &[ratio(1, 2), ratio(1, 2)]);
    }

    #[test]
    fn exchangeable_pmf() {
        let m = DiscreteModel::bernoulli_product(6, &[ratio(1, 3), ratio(5, 7)]).unwrap();
        for p in ["theta0", "theta1"] {
            let row = m.probs(p).unwrap();
            for x in m.points() {
                for y in m.points() {
                    if x.statistic("sum") == y.statistic("sum") {
                        assert_eq!(row[x.id], row[y.id]);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_theta() {
        for bad in [int(0), int(1), ratio(3, 2), ratio(-1, 2)] {
            assert!(matches!(DiscreteModel::bernoulli_product(3, &[bad]), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn enumeration_cap() {
        let err = DiscreteModel::bernoulli_product_capped(11, &[ratio(1, 2)], 1024).unwrap_err();
        assert!(matches!(err, Error::Capacity { requested: 2048, cap: 1024 }));
        assert!(matches!(DiscreteModel::bernoulli_product(21, &[ratio(1, 2)]), Err(Error::Capacity { .. })));
    }

    #[test]
    fn lookup_errors() {
        let m = example();
        assert!(matches!(m.pmf("theta9", 0), Err(Error::UnknownParameter(_))));
        assert!(matches!(m.pmf("theta0", 32), Err(Error::UnknownPoint(_))));
        assert_eq!(m.resolve_parameter("0.8").unwrap(), "theta1");
        assert_eq!(m.resolve_parameter("1/2").unwrap(), "theta0");
    }

    #[test]
    fn zero_null_mass_is_rejected() {
        let parts = ModelParts {
            labels: vec!["a".into(), "b".into()],
            params: vec![
                Parameter { name: "h0".into(), value: int(0) },
                Parameter { name: "h1".into(), value: int(1) },
            ],
            pmf: vec![vec![int(1), int(0)], vec![ratio(1, 2), ratio(1, 2)]],
            ..ModelParts::default()
        };
        assert!(matches!(DiscreteModel::new(parts), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn unnormalized_is_rejected() {
        let parts = ModelParts {
            labels: vec!["a".into(), "b".into()],
            params: vec![Parameter { name: "h0".into(), value: int(0) }],
            pmf: vec![vec![ratio(1, 2), ratio(1, 3)]],
            ..ModelParts::default()
        };
        assert!(matches!(DiscreteModel::new(parts), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn json_round_trip() {
        let m = DiscreteModel::builtin("binomial:3,1/2,3/4").unwrap();
        let text = serde_json::to_string(&m.to_json_value()).unwrap();
        let back = DiscreteModel::from_json_str(&text).unwrap();
        assert_eq!(back.points(), m.points());
        assert_eq!(back.parameters(), m.parameters());
        assert_eq!(back.null_probs(), m.null_probs());
        assert_eq!(back.alternative_name(), Some("theta1"));
    }

    #[test]
    fn json_rejects_float_probabilities() {
        let text = r#"{"parameters":{"h0":"1/2"},"support":["a","b"],"pmf":{"h0":[0.5,0.5]}}"#;
        assert!(DiscreteModel::from_json_str(text).is_err());
    }

    #[test]
    fn json_respects_null_field() {
        let text = r#"{
            "parameters": {"alt": "1", "base": "0"},
            "null": "base",
            "support": ["a", "b"],
            "pmf": {"alt": ["1/4", "3/4"], "base": ["1/2", "1/2"]}
        }"#;
        let m = DiscreteModel::from_json_str(text).unwrap();
        assert_eq!(m.null_name(), "base");
        assert_eq!(m.alternative_name(), Some("alt"));
    }

    #[test]
    fn example_priority_is_complete() {
        let order = example1_priority();
        assert_eq!(order.len(), 32);
        let mut sorted = order.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 32);
    }
}
