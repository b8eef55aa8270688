//! Test statistics and one-to-one rankings that agree with them.
//!
//! Larger statistic values are stronger evidence against the null; rank 1
//! is the most extreme point. A ranking agrees with a statistic when a
//! strictly larger value never receives a larger rank.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DiscreteModel;
use crate::rational::{one, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct Statistic {
    name: String,
    values: Vec<Rational>,
}

impl Statistic {
    pub fn new(name: impl Into<String>, values: Vec<Rational>) -> Self {
        Self { name: name.into(), values }
    }

    /// A statistic cached on the model's support points.
    pub fn from_model(model: &DiscreteModel, name: &str) -> Result<Self> {
        let values = model
            .points()
            .iter()
            .map(|pt| {
                pt.statistic(name).cloned().ok_or_else(|| Error::Config(format!("model has no statistic `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(name, values))
    }

    /// `λ(x) = p_alt(x) / p_null(x)`, exactly.
    pub fn likelihood_ratio(model: &DiscreteModel, null: &str, alt: &str) -> Result<Self> {
        let p0 = model.probs(null)?;
        let p1 = model.probs(alt)?;
        let values = p0
            .iter()
            .zip(p1)
            .map(|(q0, q1)| {
                if num::Zero::is_zero(q0) {
                    Err(Error::Domain(format!("null `{null}` has a zero-probability point")))
                } else {
                    Ok(q1 / q0)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(format!("lr({alt}/{null})"), values))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn value(&self, point: usize) -> &Rational {
        &self.values[point]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    /// Whether no other point shares the value at `point`.
    pub fn is_unique_at(&self, point: usize) -> bool {
        let v = &self.values[point];
        self.values.iter().enumerate().all(|(i, w)| i == point || w != v)
    }

    /// Points grouped by value, most extreme (largest) class first; each
    /// class lists point ids in increasing order.
    pub fn tie_classes(&self) -> Vec<Vec<usize>> {
        let mut ids: Vec<usize> = (0..self.values.len()).collect();
        ids.sort_by(|&a, &b| self.values[b].cmp(&self.values[a]).then(a.cmp(&b)));
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for id in ids {
            match classes.last_mut() {
                Some(last) if self.values[last[0]] == self.values[id] => last.push(id),
                _ => classes.push(vec![id]),
            }
        }
        classes
    }

    /// `λ ≡ 1` check used when both hypotheses coincide.
    pub fn is_identically_one(&self) -> bool {
        self.values.iter().all(|v| *v == one())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TieBreak {
    /// Ties ordered by label.
    Lexicographic,
    /// Ties ordered by position in a list that must name every point.
    Priority(Vec<String>),
    /// Ties shuffled by a ChaCha8 stream seeded with the given value.
    SeededShuffle(u64),
}

impl TieBreak {
    /// `lexicographic`, `priority` (the list attached to the model) or
    /// `shuffle:SEED`.
    pub fn parse(spec: &str, model: &DiscreteModel) -> Result<Self> {
        match spec {
            "lexicographic" | "lex" => Ok(TieBreak::Lexicographic),
            "priority" => model
                .priority()
                .map(|p| TieBreak::Priority(p.to_vec()))
                .ok_or_else(|| Error::Config("model has no priority list attached".into())),
            _ => match spec.strip_prefix("shuffle:") {
                Some(seed) => seed
                    .parse()
                    .map(TieBreak::SeededShuffle)
                    .map_err(|_| Error::Config(format!("bad shuffle seed `{seed}`"))),
                None => Err(Error::Config(format!("unknown tie-break policy `{spec}`"))),
            },
        }
    }

    /// The model's priority list when it has one, labels otherwise.
    pub fn default_for(model: &DiscreteModel) -> Self {
        match model.priority() {
            Some(p) => TieBreak::Priority(p.to_vec()),
            None => TieBreak::Lexicographic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreakKind {
    Lexicographic,
    UserPriority,
    SeededShuffle,
    /// Supplied directly rather than built from a statistic.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    agrees_with: String,
    policy: TieBreakKind,
    /// 1-based rank of each point id.
    ranks: Vec<usize>,
    /// Point ids by rank; `order[0]` has rank 1.
    order: Vec<usize>,
}

impl Ranking {
    /// Builds a bijective ranking agreeing with `stat`: classes of strictly
    /// larger values come first, ties are ordered by `policy`.
    pub fn build(model: &DiscreteModel, stat: &Statistic, policy: &TieBreak) -> Result<Self> {
        if stat.len() != model.len() {
            return Err(Error::Domain(format!(
                "statistic `{}` has {} values, model has {} points",
                stat.name(),
                stat.len(),
                model.len()
            )));
        }
        let label = |i: usize| model.points()[i].label.as_str();
        let mut classes = stat.tie_classes();
        let kind = match policy {
            TieBreak::Lexicographic => {
                for class in &mut classes {
                    class.sort_by(|&a, &b| label(a).cmp(label(b)));
                }
                TieBreakKind::Lexicographic
            }
            TieBreak::Priority(list) => {
                let mut position = HashMap::with_capacity(list.len());
                for (i, l) in list.iter().enumerate() {
                    let id = model
                        .point_by_label(l)
                        .map_err(|_| Error::Config(format!("priority names unknown point `{l}`")))?
                        .id;
                    if position.insert(id, i).is_some() {
                        return Err(Error::Config(format!("priority lists `{l}` twice")));
                    }
                }
                for class in &mut classes {
                    if class.len() > 1 {
                        if let Some(&missing) = class.iter().find(|id| !position.contains_key(id)) {
                            return Err(Error::Config(format!(
                                "priority does not order tied point `{}`",
                                label(missing)
                            )));
                        }
                        class.sort_by_key(|id| position[id]);
                    }
                }
                TieBreakKind::UserPriority
            }
            TieBreak::SeededShuffle(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                for class in &mut classes {
                    class.sort_by(|&a, &b| label(a).cmp(label(b)));
                    class.shuffle(&mut rng);
                }
                TieBreakKind::SeededShuffle
            }
        };
        let order: Vec<usize> = classes.into_iter().flatten().collect();
        Ok(Self::from_order_ids(stat.name(), kind, order))
    }

    /// A ranking given explicitly as labels from rank 1 downwards.
    pub fn from_labels(model: &DiscreteModel, agrees_with: &str, labels: &[String]) -> Result<Self> {
        if labels.len() != model.len() {
            return Err(Error::Config(format!("ranking lists {} points, model has {}", labels.len(), model.len())));
        }
        let mut seen = vec![false; model.len()];
        let mut order = Vec::with_capacity(labels.len());
        for l in labels {
            let id = model.point_by_label(l)?.id;
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::Config(format!("ranking lists `{l}` twice")));
            }
            order.push(id);
        }
        Ok(Self::from_order_ids(agrees_with, TieBreakKind::Explicit, order))
    }

    fn from_order_ids(agrees_with: &str, policy: TieBreakKind, order: Vec<usize>) -> Self {
        let mut ranks = vec![0; order.len()];
        for (r, &id) in order.iter().enumerate() {
            ranks[id] = r + 1;
        }
        Self { agrees_with: agrees_with.to_string(), policy, ranks, order }
    }

    /// The same ranking with the points holding ranks `r1` and `r2` exchanged.
    pub fn with_swapped_ranks(&self, r1: usize, r2: usize) -> Result<Self> {
        let n = self.order.len();
        if r1 == 0 || r2 == 0 || r1 > n || r2 > n {
            return Err(Error::Domain(format!("ranks must lie in 1..={n}")));
        }
        let mut order = self.order.clone();
        order.swap(r1 - 1, r2 - 1);
        Ok(Self::from_order_ids(&self.agrees_with, TieBreakKind::Explicit, order))
    }

    pub fn agrees_with(&self) -> &str {
        &self.agrees_with
    }

    pub fn policy(&self) -> TieBreakKind {
        self.policy
    }

    pub fn rank(&self, point: usize) -> usize {
        self.ranks[point]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Agreement {
    pub agrees: bool,
    /// Witness `(x, y)` with `T(x) > T(y)` but `R(x) > R(y)`.
    pub witness: Option<(usize, usize)>,
}

/// Checks that `ranking` is a bijection onto `1..=N` and that
/// `T(x) > T(y)` implies `R(x) < R(y)` for every pair.
///
/// The implication on strict inequalities is the only form an injective
/// ranking can satisfy once the statistic has ties. Scanning the points in
/// rank order suffices: agreement holds iff the statistic never increases
/// along that order, and the first increase is a witness.
pub fn verify_agreement(stat: &Statistic, ranking: &Ranking) -> Result<Agreement> {
    let n = stat.len();
    if ranking.len() != n {
        return Err(Error::Domain(format!("statistic has {n} points, ranking has {}", ranking.len())));
    }
    let mut seen = vec![false; n];
    for &r in ranking.ranks() {
        if r == 0 || r > n || std::mem::replace(&mut seen[r - 1], true) {
            return Err(Error::Domain("ranking is not a bijection onto 1..=N".into()));
        }
    }
    for w in ranking.order().windows(2) {
        let (better, worse) = (w[0], w[1]);
        if stat.value(worse).cmp(stat.value(better)) == Ordering::Greater {
            return Ok(Agreement { agrees: false, witness: Some((worse, better)) });
        }
    }
    Ok(Agreement { agrees: true, witness: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::example1_priority;
    use crate::rational::{self, int, ratio};

    fn example_lr() -> (DiscreteModel, Statistic) {
        let m = DiscreteModel::example1();
        let lr = Statistic::likelihood_ratio(&m, "theta0", "theta1").unwrap();
        (m, lr)
    }

    #[test]
    fn likelihood_ratio_values() {
        let (m, lr) = example_lr();
        let id = |l: &str| m.point_by_label(l).unwrap().id;
        assert_eq!(lr.value(id("11111")), &rational::parse("10.48576").unwrap());
        for l in ["01111", "10111", "11011", "11101", "11110"] {
            assert_eq!(lr.value(id(l)), &rational::parse("2.62144").unwrap());
        }
        assert_eq!(lr.value(id("00111")), &rational::parse("0.65536").unwrap());
    }

    #[test]
    fn identical_hypotheses_give_unit_ratio() {
        let m = DiscreteModel::bernoulli_product(3, &[ratio(1, 3), ratio(1, 3)]).unwrap();
        let lr = Statistic::likelihood_ratio(&m, "theta0", "theta1").unwrap();
        assert!(lr.is_identically_one());
    }

    #[test]
    fn table_priority_reproduces_published_ranks() {
        let (m, lr) = example_lr();
        let r = Ranking::build(&m, &lr, &TieBreak::Priority(example1_priority())).unwrap();
        let expected = ["11111", "01111", "10111", "11011", "11101", "11110", "00111", "10011"];
        for (k, l) in expected.iter().enumerate() {
            assert_eq!(r.rank(m.point_by_label(l).unwrap().id), k + 1, "{l}");
        }
        assert!(verify_agreement(&lr, &r).unwrap().agrees);
    }

    #[test]
    fn lexicographic_orders_ties_by_label() {
        let (m, lr) = example_lr();
        let r = Ranking::build(&m, &lr, &TieBreak::Lexicographic).unwrap();
        let labels: Vec<&str> = r.order()[..7].iter().map(|&i| m.points()[i].label.as_str()).collect();
        assert_eq!(labels, ["11111", "01111", "10111", "11011", "11101", "11110", "00111"]);
        assert_eq!(r, Ranking::build(&m, &lr, &TieBreak::Lexicographic).unwrap());
    }

    #[test]
    fn distinct_values_ignore_policy() {
        let m = DiscreteModel::binomial(4, &[ratio(1, 2), ratio(2, 3)]).unwrap();
        let stat = Statistic::from_model(&m, "count").unwrap();
        let lex = Ranking::build(&m, &stat, &TieBreak::Lexicographic).unwrap();
        let shuf = Ranking::build(&m, &stat, &TieBreak::SeededShuffle(99)).unwrap();
        assert_eq!(lex.order(), shuf.order());
        assert_eq!(lex.order(), &[4, 3, 2, 1, 0]);
    }

    #[test]
    fn seeded_shuffle_is_reproducible() {
        let (m, lr) = example_lr();
        let a = Ranking::build(&m, &lr, &TieBreak::SeededShuffle(7)).unwrap();
        let b = Ranking::build(&m, &lr, &TieBreak::SeededShuffle(7)).unwrap();
        assert_eq!(a, b);
        assert!(verify_agreement(&lr, &a).unwrap().agrees);
        let others: Vec<_> = (0..16).map(|s| Ranking::build(&m, &lr, &TieBreak::SeededShuffle(s)).unwrap()).collect();
        assert!(others.iter().any(|o| o.order() != a.order()));
    }

    #[test]
    fn incomplete_priority_is_a_config_error() {
        let (m, lr) = example_lr();
        let partial = vec!["01111".to_string(), "11110".to_string()];
        assert!(matches!(Ranking::build(&m, &lr, &TieBreak::Priority(partial)), Err(Error::Config(_))));
    }

    #[test]
    fn constant_statistic_accepts_any_bijection() {
        let (m, _) = example_lr();
        let constant = Statistic::new("c", vec![int(3); m.len()]);
        let labels: Vec<String> = m.points().iter().map(|p| p.label.clone()).collect();
        let identity = Ranking::from_labels(&m, "c", &labels).unwrap();
        assert!(verify_agreement(&constant, &identity).unwrap().agrees);
    }

    #[test]
    fn swapping_across_classes_breaks_agreement() {
        let (m, lr) = example_lr();
        let r = Ranking::build(&m, &lr, &TieBreak::Priority(example1_priority())).unwrap();
        let bad = r.with_swapped_ranks(1, 7).unwrap();
        let check = verify_agreement(&lr, &bad).unwrap();
        assert!(!check.agrees);
        let (x, y) = check.witness.unwrap();
        assert!(lr.value(x) > lr.value(y));
        assert!(bad.rank(x) > bad.rank(y));
    }

    #[test]
    fn mismatched_lengths_are_domain_errors() {
        let (m, lr) = example_lr();
        let r = Ranking::build(&m, &lr, &TieBreak::Lexicographic).unwrap();
        let short = Statistic::new("s", vec![int(1); 3]);
        assert!(matches!(verify_agreement(&short, &r), Err(Error::Domain(_))));
    }
}
