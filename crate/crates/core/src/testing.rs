//! Size-α test functions, decision functions and generalized p-value
//! families for statistic-based and minimally discrete constructions.
//!
//! Both constructions reduce to an ordered partition of the support into
//! extremity classes: the tie classes of a statistic (largest value first)
//! or the singletons of a ranking (rank 1 first). For a point `x` in class
//! `c`, `a(x)` is the null mass of the classes before `c` and `b(x)` the null
//! mass of `c`, so every p-value is the linear form `P(x, u) = a(x) + u·b(x)`.

use std::io::Write;

use num::traits::Signed;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DiscreteModel;
use crate::ranking::{Ranking, Statistic};
use crate::rational::{self, one, ratio, zero, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    #[serde(rename = "t")]
    TBased,
    #[serde(rename = "md")]
    MinimallyDiscrete,
}

impl FamilyKind {
    pub fn tag(self) -> &'static str {
        match self {
            FamilyKind::TBased => "t",
            FamilyKind::MinimallyDiscrete => "md",
        }
    }
}

/// What a test function or family is built from.
#[derive(Debug, Clone, Copy)]
pub enum Basis<'a> {
    Statistic(&'a Statistic),
    Ranking(&'a Ranking),
}

impl Basis<'_> {
    pub fn kind(&self) -> FamilyKind {
        match self {
            Basis::Statistic(_) => FamilyKind::TBased,
            Basis::Ranking(_) => FamilyKind::MinimallyDiscrete,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Threshold {
    /// `k(α)`, a statistic value.
    Statistic(Rational),
    /// `k*(α)`, a rank.
    Rank(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Retain,
    Reject,
}

/// Ordered partition of the support with null class masses.
#[derive(Debug, Clone)]
struct Scale {
    kind: FamilyKind,
    classes: Vec<Vec<usize>>,
    thresholds: Vec<Threshold>,
    class_of: Vec<usize>,
    mass: Vec<Rational>,
    /// `before[c]` = null mass of classes `0..c`.
    before: Vec<Rational>,
}

impl Scale {
    fn new(model: &DiscreteModel, basis: Basis<'_>) -> Result<Self> {
        let n = model.len();
        let (classes, thresholds): (Vec<Vec<usize>>, Vec<Threshold>) = match basis {
            Basis::Statistic(stat) => {
                if stat.len() != n {
                    return Err(Error::Domain(format!(
                        "statistic `{}` has {} values, model has {n} points",
                        stat.name(),
                        stat.len()
                    )));
                }
                stat.tie_classes()
                    .into_iter()
                    .map(|c| {
                        let k = Threshold::Statistic(stat.value(c[0]).clone());
                        (c, k)
                    })
                    .unzip()
            }
            Basis::Ranking(ranking) => {
                if ranking.len() != n {
                    return Err(Error::Domain(format!("ranking has {} points, model has {n}", ranking.len())));
                }
                ranking.order().iter().enumerate().map(|(r, &id)| (vec![id], Threshold::Rank(r + 1))).unzip()
            }
        };
        let p0 = model.null_probs();
        let mut class_of = vec![0; n];
        let mut mass = Vec::with_capacity(classes.len());
        let mut before = Vec::with_capacity(classes.len());
        let mut acc = zero();
        for (c, members) in classes.iter().enumerate() {
            let m: Rational = members.iter().map(|&i| &p0[i]).sum();
            for &i in members {
                class_of[i] = c;
            }
            before.push(acc.clone());
            acc += &m;
            mass.push(m);
        }
        Ok(Self { kind: basis.kind(), classes, thresholds, class_of, mass, before })
    }

    /// Scan for the least extreme class `c` with `before[c] ≤ α`; that class
    /// is randomized with `γ = (α − before[c]) / mass[c]`.
    fn test(&self, model: &DiscreteModel, alpha: &Rational) -> Result<TestFunction> {
        if !rational::in_unit_interval(alpha) {
            return Err(Error::Domain(format!("α = {} is outside [0, 1]", rational::to_fraction(alpha))));
        }
        let c = self.before.partition_point(|b| b <= alpha) - 1;
        let gamma = (alpha - &self.before[c]) / &self.mass[c];
        debug_assert!(rational::in_unit_interval(&gamma));
        let values: Vec<Rational> = self
            .class_of
            .iter()
            .map(|&k| match k.cmp(&c) {
                std::cmp::Ordering::Less => one(),
                std::cmp::Ordering::Equal => gamma.clone(),
                std::cmp::Ordering::Greater => zero(),
            })
            .collect();
        let test = TestFunction {
            kind: self.kind,
            alpha: alpha.clone(),
            threshold: self.thresholds[c].clone(),
            gamma,
            values,
        };
        let size = test.power_under(model.null_probs());
        if size != *alpha {
            return Err(Error::Invariant(format!(
                "size {} differs from α = {}",
                rational::to_fraction(&size),
                rational::to_fraction(alpha)
            )));
        }
        Ok(test)
    }
}

/// A size-α test function `φ_α` with values in `{0, γ, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    kind: FamilyKind,
    alpha: Rational,
    threshold: Threshold,
    gamma: Rational,
    values: Vec<Rational>,
}

impl TestFunction {
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn threshold(&self) -> &Threshold {
        &self.threshold
    }

    pub fn gamma(&self) -> &Rational {
        &self.gamma
    }

    /// `φ_α(x)`.
    pub fn value(&self, point: usize) -> &Rational {
        &self.values[point]
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// `E_θ[φ_α(X)]`.
    pub fn power(&self, model: &DiscreteModel, param: &str) -> Result<Rational> {
        Ok(self.power_under(model.probs(param)?))
    }

    fn power_under(&self, probs: &[Rational]) -> Rational {
        probs.iter().zip(&self.values).fold(zero(), |acc, (p, v)| acc + p * v)
    }

    /// `E_θ[δ_α(X, 1)]`: probability of a sure rejection.
    pub fn natural_power(&self, model: &DiscreteModel, param: &str) -> Result<Rational> {
        let probs = model.probs(param)?;
        Ok(probs.iter().zip(&self.values).filter(|(_, v)| **v == one()).fold(zero(), |acc, (p, _)| acc + p))
    }

    /// `δ_α(x, u) = I(u ≤ φ_α(x))`.
    pub fn decision(&self, point: usize, u: &Rational) -> Result<Decision> {
        if !rational::in_unit_interval(u) {
            return Err(Error::Domain(format!("u = {} is outside [0, 1]", rational::to_fraction(u))));
        }
        let phi = self.values.get(point).ok_or_else(|| Error::UnknownPoint(point.to_string()))?;
        Ok(if u <= phi { Decision::Reject } else { Decision::Retain })
    }

    /// Points where the decision depends on the auxiliary uniform.
    pub fn randomized_points(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter(|(_, v)| v.is_positive() && **v < one()).map(|(i, _)| i)
    }
}

pub fn size_alpha_test(model: &DiscreteModel, basis: Basis<'_>, alpha: &Rational) -> Result<TestFunction> {
    Scale::new(model, basis)?.test(model, alpha)
}

/// Test functions at several sizes sharing one scan of the support.
pub fn size_alpha_tests(model: &DiscreteModel, basis: Basis<'_>, alphas: &[Rational]) -> Result<Vec<TestFunction>> {
    let scale = Scale::new(model, basis)?;
    alphas.iter().map(|a| scale.test(model, a)).collect()
}

/// Per-point linear forms `P(x, u) = a(x) + u·b(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueFamily {
    kind: FamilyKind,
    source: String,
    a: Vec<Rational>,
    b: Vec<Rational>,
    /// 1-based extremity class of each point (the rank, for MD families).
    level: Vec<usize>,
    /// Points from most to least extreme.
    order: Vec<usize>,
}

pub fn pvalue_family(model: &DiscreteModel, basis: Basis<'_>) -> Result<PValueFamily> {
    let scale = Scale::new(model, basis)?;
    let source = match basis {
        Basis::Statistic(s) => s.name().to_string(),
        Basis::Ranking(r) => format!("rank({})", r.agrees_with()),
    };
    let a = scale.class_of.iter().map(|&c| scale.before[c].clone()).collect();
    let b = scale.class_of.iter().map(|&c| scale.mass[c].clone()).collect();
    let level = scale.class_of.iter().map(|&c| c + 1).collect();
    let order = scale.classes.into_iter().flatten().collect();
    Ok(PValueFamily { kind: scale.kind, source, a, b, level, order })
}

impl PValueFamily {
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn a(&self, point: usize) -> &Rational {
        &self.a[point]
    }

    pub fn b(&self, point: usize) -> &Rational {
        &self.b[point]
    }

    pub fn level(&self, point: usize) -> usize {
        self.level[point]
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn value(&self, point: usize, u: &Rational) -> Rational {
        &self.a[point] + u * &self.b[point]
    }

    pub fn natural(&self, point: usize) -> Rational {
        &self.a[point] + &self.b[point]
    }

    pub fn mid(&self, point: usize) -> Rational {
        &self.a[point] + &self.b[point] / rational::int(2)
    }

    /// Fuzzy interval `[P(x, 0), P(x, 1)]`.
    pub fn interval(&self, point: usize) -> (Rational, Rational) {
        (self.a[point].clone(), self.natural(point))
    }

    /// Attained endpoints `a(x)` and `a(x) + b(x)`, sorted and distinct,
    /// together with 0 and 1: the null tail probabilities at which the
    /// associated test function changes form.
    pub fn breakpoints(&self) -> Vec<Rational> {
        let mut pts: Vec<Rational> = self.a.iter().cloned().chain((0..self.len()).map(|i| self.natural(i))).collect();
        pts.push(zero());
        pts.push(one());
        pts.sort();
        pts.dedup();
        pts
    }
}

/// Union of breakpoints of several families, optionally with the midpoint
/// of every consecutive pair.
pub fn breakpoint_grid(families: &[&PValueFamily], midpoints: bool) -> Vec<Rational> {
    let mut pts: Vec<Rational> = families.iter().flat_map(|f| f.breakpoints()).collect();
    pts.sort();
    pts.dedup();
    if midpoints {
        let mids: Vec<Rational> = pts.windows(2).map(|w| (&w[0] + &w[1]) / rational::int(2)).collect();
        pts.extend(mids);
        pts.sort();
    }
    pts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomizedDraw {
    pub u: f64,
    pub value: f64,
}

/// `a(x) + u·b(x)` with `u` drawn uniformly from the caller's stream.
pub fn draw_randomized_pvalue<R: Rng + ?Sized>(family: &PValueFamily, point: usize, rng: &mut R) -> RandomizedDraw {
    let u: f64 = rng.gen();
    let value = rational::to_f64(family.a(point)) + u * rational::to_f64(family.b(point));
    RandomizedDraw { u, value: value.clamp(0.0, 1.0) }
}

/// Checks `I(P(x, u) ≤ α) = δ_α(x, u)` for every point, `α` and `u`.
///
/// `u = 0` is excluded by the caller: `I(0 ≤ φ)` is identically one, so the
/// identity can only hold almost surely.
pub fn coherence_mismatch(
    model: &DiscreteModel,
    basis: Basis<'_>,
    alphas: &[Rational],
    us: &[Rational],
) -> Result<Option<String>> {
    let family = pvalue_family(model, basis)?;
    let tests = size_alpha_tests(model, basis, alphas)?;
    for test in &tests {
        for x in 0..model.len() {
            for u in us {
                let by_pvalue = family.value(x, u) <= *test.alpha();
                let by_decision = test.decision(x, u)? == Decision::Reject;
                if by_pvalue != by_decision {
                    return Ok(Some(format!(
                        "x = {}, u = {}, α = {}: p-value says {}, decision says {}",
                        model.points()[x].label,
                        rational::to_fraction(u),
                        rational::to_fraction(test.alpha()),
                        by_pvalue,
                        by_decision
                    )));
                }
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasednessViolation {
    pub parameter: String,
    #[serde(with = "rational::serde_fraction")]
    pub alpha: Rational,
    #[serde(with = "rational::serde_fraction")]
    pub power: Rational,
}

/// Audits `E_θ[φ_α(X)] ≥ α` over the given parameters and sizes.
pub fn audit_unbiasedness(
    model: &DiscreteModel,
    basis: Basis<'_>,
    params: &[&str],
    alphas: &[Rational],
) -> Result<Vec<UnbiasednessViolation>> {
    let tests = size_alpha_tests(model, basis, alphas)?;
    let mut out = Vec::new();
    for &p in params {
        for t in &tests {
            let power = t.power(model, p)?;
            if power < *t.alpha() {
                out.push(UnbiasednessViolation { parameter: p.to_string(), alpha: t.alpha().clone(), power });
            }
        }
    }
    Ok(out)
}

/// CSV with columns `label, rank, statistic, a, b, natural, mid` as exact
/// `num/den`, followed by 6-place decimal renderings of the statistic and
/// of both p-values. Rows run from most to least extreme.
pub fn write_pvalue_table<W: Write>(
    model: &DiscreteModel,
    family: &PValueFamily,
    stat: &Statistic,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label",
        "rank",
        "statistic",
        "a",
        "b",
        "natural",
        "mid",
        "statistic_decimal",
        "natural_decimal",
        "mid_decimal",
    ])?;
    for &x in family.order() {
        let nat = family.natural(x);
        let mid = family.mid(x);
        w.write_record([
            model.points()[x].label.clone(),
            family.level(x).to_string(),
            rational::to_fraction(stat.value(x)),
            rational::to_fraction(family.a(x)),
            rational::to_fraction(family.b(x)),
            rational::to_fraction(&nat),
            rational::to_fraction(&mid),
            rational::to_decimal(stat.value(x), 6),
            rational::to_decimal(&nat, 6),
            rational::to_decimal(&mid, 6),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A rational grid `k / (points − 1)` for `k = 0..points`.
pub fn uniform_grid(points: usize) -> Vec<Rational> {
    match points {
        0 => Vec::new(),
        1 => vec![zero()],
        _ => (0..points).map(|k| ratio(k as i64, (points - 1) as i64)).collect(),
    }
}
