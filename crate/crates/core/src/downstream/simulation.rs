//! Seeded Monte Carlo of multiple-testing and combination procedures fed
//! with exact discrete p-values.
//!
//! Each replicate draws `M` independent datasets, the first `⌊π₀·M⌋` from
//! the null and the rest from the alternative. Random numbers come from
//! ChaCha8 substreams keyed by `(master seed, purpose, hypothesis,
//! replicate)` through a splitmix64 mix, so replicates can run in parallel
//! and still fold to the same report.

use std::io::Write;
use std::path::Path;

use num::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::procedures::{bh_threshold, bonferroni, fisher_test, geometric_mean_combination};
use crate::error::{Error, Result};
use crate::model::DiscreteModel;
use crate::ranking::{Ranking, Statistic, TieBreak};
use crate::rational::{self, Rational};
use crate::testing::{pvalue_family, Basis, FamilyKind, PValueFamily};

pub const MAX_HYPOTHESES: usize = 1 << 20;
pub const MAX_REPLICATES: usize = 1 << 24;

pub const RNG_DESCRIPTION: &str =
    "ChaCha8 (rand_chacha 0.3) per (purpose, hypothesis, replicate), seeded by splitmix64 mixing of the master seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UPolicy {
    Natural,
    Mid,
    Randomized,
}

impl UPolicy {
    pub fn tag(self) -> &'static str {
        match self {
            UPolicy::Natural => "natural",
            UPolicy::Mid => "mid",
            UPolicy::Randomized => "randomized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Bh,
    Bonferroni,
    Fisher,
    GeometricMean,
}

impl Procedure {
    pub fn tag(self) -> &'static str {
        match self {
            Procedure::Bh => "bh",
            Procedure::Bonferroni => "bonferroni",
            Procedure::Fisher => "fisher",
            Procedure::GeometricMean => "geometric_mean",
        }
    }

    /// Whether the procedure makes one decision about the global null.
    pub fn is_global(self) -> bool {
        matches!(self, Procedure::Fisher | Procedure::GeometricMean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub hypotheses: usize,
    #[serde(with = "rational::serde_fraction")]
    pub pi0: Rational,
    /// Builtin model name or a path to a model JSON file.
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<String>,
    /// Cached statistic name; the likelihood ratio when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break: Option<String>,
    pub family: FamilyKind,
    pub u_policy: UPolicy,
    pub procedure: Procedure,
    #[serde(with = "rational::serde_fraction")]
    pub alpha: Rational,
    pub replicates: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hypotheses == 0 {
            return Err(Error::Config("hypotheses must be at least 1".into()));
        }
        if self.hypotheses > MAX_HYPOTHESES {
            return Err(Error::Config(format!("{} hypotheses exceeds the cap {MAX_HYPOTHESES}", self.hypotheses)));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.replicates > MAX_REPLICATES {
            return Err(Error::Config(format!("{} replicates exceeds the cap {MAX_REPLICATES}", self.replicates)));
        }
        if !rational::in_unit_interval(&self.pi0) {
            return Err(Error::Config(format!("pi0 = {} is outside [0, 1]", rational::to_fraction(&self.pi0))));
        }
        if !rational::in_unit_interval(&self.alpha) {
            return Err(Error::Config(format!("alpha = {} is outside [0, 1]", rational::to_fraction(&self.alpha))));
        }
        Ok(())
    }

    /// `⌊π₀·M⌋`.
    pub fn null_count(&self) -> usize {
        (&self.pi0 * Rational::from_integer(self.hypotheses.into())).floor().to_integer().to_usize().unwrap_or(0)
    }
}

/// Loads a builtin model, or a JSON model file resolved against `base`.
pub fn resolve_model(spec: &str, base: Option<&Path>) -> Result<DiscreteModel> {
    if let Ok(model) = DiscreteModel::builtin(spec) {
        return Ok(model);
    }
    let path = match base {
        Some(dir) if Path::new(spec).is_relative() => dir.join(spec),
        _ => Path::new(spec).to_path_buf(),
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("model `{spec}` is neither builtin nor readable: {e}")))?;
    DiscreteModel::from_json_str(&text)
}

const DATA: u64 = 0x6461_7461;
const U: u64 = 0x75;
const U_REGEN: u64 = 0x7572_6567;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the substream for one purpose, hypothesis and replicate.
pub fn substream_seed(master: u64, purpose: u64, hypothesis: usize, replicate: usize) -> u64 {
    let s = splitmix64(master ^ splitmix64(purpose));
    let s = splitmix64(s ^ hypothesis as u64);
    splitmix64(s ^ (replicate as u64).rotate_left(32))
}

fn substream(master: u64, purpose: u64, hypothesis: usize, replicate: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, purpose, hypothesis, replicate))
}

/// Per-replicate tallies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateOutcome {
    pub rejections: usize,
    pub false_discoveries: usize,
    pub true_discoveries: usize,
    pub fdp: f64,
    /// `None` when every hypothesis is null.
    pub tdp: Option<f64>,
    pub threshold: f64,
    /// Fraction of decisions that changed when `u` was redrawn.
    pub flipped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub null_parameter: String,
    pub alternative_parameter: Option<String>,
    pub statistic: String,
    pub null_hypotheses: usize,
    pub alternative_hypotheses: usize,
    pub rng: String,
    pub fdr: f64,
    pub fdr_mcse: f64,
    pub power: Option<f64>,
    pub power_mcse: Option<f64>,
    pub mean_rejections: f64,
    pub total_rejections: u64,
    pub total_false_discoveries: u64,
    pub dep_rate: f64,
    pub dep_rate_mcse: f64,
    pub mean_threshold: f64,
}

/// A config bound to a model with every per-point quantity precomputed.
#[derive(Debug)]
pub struct Simulation {
    config: SimulationConfig,
    null_parameter: String,
    alternative_parameter: Option<String>,
    statistic: String,
    nulls: usize,
    null_cdf: Vec<f64>,
    alt_cdf: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    fixed: Option<Vec<f64>>,
}

fn cumulative(probs: &[Rational]) -> Vec<f64> {
    let mut acc = Rational::zero();
    probs
        .iter()
        .map(|p| {
            acc += p;
            rational::to_f64(&acc)
        })
        .collect()
}

fn sample(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    cdf.partition_point(|c| *c <= u).min(cdf.len() - 1)
}

impl Simulation {
    pub fn prepare(config: &SimulationConfig, model: &DiscreteModel) -> Result<Self> {
        config.validate()?;
        let null = model.null_name().to_string();
        let alternative = match &config.alternative {
            Some(key) => Some(model.resolve_parameter(key)?.to_string()),
            None => model.alternative_name().map(str::to_string),
        };
        let nulls = config.null_count();
        if nulls < config.hypotheses && alternative.is_none() {
            return Err(Error::Config("alternatives requested but the model has no alternative parameter".into()));
        }
        let stat = match (&config.statistic, &alternative) {
            (Some(name), _) => Statistic::from_model(model, name)?,
            (None, Some(alt)) => Statistic::likelihood_ratio(model, &null, alt)?,
            (None, None) => return Err(Error::Config("no statistic given and no alternative to build one".into())),
        };
        let family = match config.family {
            FamilyKind::TBased => pvalue_family(model, Basis::Statistic(&stat))?,
            FamilyKind::MinimallyDiscrete => {
                let policy = match &config.tie_break {
                    Some(spec) => TieBreak::parse(spec, model)?,
                    None => TieBreak::default_for(model),
                };
                let ranking = Ranking::build(model, &stat, &policy)?;
                pvalue_family(model, Basis::Ranking(&ranking))?
            }
        };
        let alt_cdf = match &alternative {
            Some(alt) => cumulative(model.probs(alt)?),
            None => Vec::new(),
        };
        Ok(Self {
            config: config.clone(),
            null_parameter: null,
            alternative_parameter: alternative,
            statistic: stat.name().to_string(),
            nulls,
            null_cdf: cumulative(model.null_probs()),
            alt_cdf,
            a: (0..family.len()).map(|x| rational::to_f64(family.a(x))).collect(),
            b: (0..family.len()).map(|x| rational::to_f64(family.b(x))).collect(),
            fixed: fixed_pvalues(&family, config.u_policy),
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    fn pvalues(&self, points: &[usize], replicate: usize, purpose: u64) -> Vec<f64> {
        match &self.fixed {
            Some(fixed) => points.iter().map(|&x| fixed[x]).collect(),
            None => points
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let u: f64 = substream(self.config.seed, purpose, i, replicate).gen();
                    (self.a[x] + u * self.b[x]).min(1.0)
                })
                .collect(),
        }
    }

    /// Per-hypothesis decisions (one entry for global procedures) and the
    /// threshold used.
    fn decide(&self, pvalues: &[f64]) -> Result<(Vec<bool>, f64)> {
        let alpha = rational::to_f64(&self.config.alpha);
        let mask = |rejected: &[usize]| {
            let mut d = vec![false; pvalues.len()];
            for &i in rejected {
                d[i] = true;
            }
            d
        };
        Ok(match self.config.procedure {
            Procedure::Bh => {
                let r = bh_threshold(pvalues, alpha)?;
                (mask(&r.rejected), r.threshold)
            }
            Procedure::Bonferroni => {
                let r = bonferroni(pvalues, alpha)?;
                (mask(&r.rejected), r.threshold)
            }
            Procedure::Fisher => {
                if alpha <= 0.0 || alpha >= 1.0 {
                    (vec![alpha >= 1.0], if alpha >= 1.0 { 0.0 } else { f64::INFINITY })
                } else {
                    let r = fisher_test(pvalues, alpha)?;
                    (vec![r.reject], r.critical_value)
                }
            }
            Procedure::GeometricMean => {
                let r = geometric_mean_combination(pvalues, None, alpha)?;
                (vec![r.reject], r.cutoff)
            }
        })
    }

    pub fn run_replicate(&self, replicate: usize) -> Result<ReplicateOutcome> {
        let m = self.config.hypotheses;
        let points: Vec<usize> = (0..m)
            .map(|i| {
                let cdf = if i < self.nulls { &self.null_cdf } else { &self.alt_cdf };
                sample(cdf, &mut substream(self.config.seed, DATA, i, replicate))
            })
            .collect();
        let (decisions, threshold) = self.decide(&self.pvalues(&points, replicate, U))?;
        let flipped = if self.fixed.is_none() {
            let (again, _) = self.decide(&self.pvalues(&points, replicate, U_REGEN))?;
            let changed = decisions.iter().zip(&again).filter(|(a, b)| a != b).count();
            changed as f64 / decisions.len() as f64
        } else {
            0.0
        };
        let alternatives = m - self.nulls;
        let (rejections, false_discoveries, true_discoveries) = if self.config.procedure.is_global() {
            let r = decisions[0] as usize;
            if alternatives == 0 {
                (r, r, 0)
            } else {
                (r, 0, r)
            }
        } else {
            let v = decisions[..self.nulls].iter().filter(|d| **d).count();
            let s = decisions[self.nulls..].iter().filter(|d| **d).count();
            (v + s, v, s)
        };
        let tdp = match (self.config.procedure.is_global(), alternatives) {
            (_, 0) => None,
            (true, _) => Some(true_discoveries as f64),
            (false, k) => Some(true_discoveries as f64 / k as f64),
        };
        Ok(ReplicateOutcome {
            rejections,
            false_discoveries,
            true_discoveries,
            fdp: false_discoveries as f64 / rejections.max(1) as f64,
            tdp,
            threshold,
            flipped,
        })
    }

    /// All replicates, in replicate order.
    pub fn run_replicates(&self) -> Result<Vec<ReplicateOutcome>> {
        (0..self.config.replicates).into_par_iter().map(|r| self.run_replicate(r)).collect()
    }

    pub fn summarize(&self, outcomes: &[ReplicateOutcome]) -> SimulationReport {
        let fdp: Vec<f64> = outcomes.iter().map(|o| o.fdp).collect();
        let tdp: Vec<f64> = outcomes.iter().filter_map(|o| o.tdp).collect();
        let flips: Vec<f64> = outcomes.iter().map(|o| o.flipped).collect();
        let rejections: Vec<f64> = outcomes.iter().map(|o| o.rejections as f64).collect();
        let thresholds: Vec<f64> = outcomes.iter().map(|o| o.threshold).collect();
        let (power, power_mcse) = if tdp.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_and_mcse(&tdp);
            (Some(m), Some(s))
        };
        let (fdr, fdr_mcse) = mean_and_mcse(&fdp);
        let (dep_rate, dep_rate_mcse) = mean_and_mcse(&flips);
        SimulationReport {
            config: self.config.clone(),
            null_parameter: self.null_parameter.clone(),
            alternative_parameter: self.alternative_parameter.clone(),
            statistic: self.statistic.clone(),
            null_hypotheses: self.nulls,
            alternative_hypotheses: self.config.hypotheses - self.nulls,
            rng: RNG_DESCRIPTION.to_string(),
            fdr,
            fdr_mcse,
            power,
            power_mcse,
            mean_rejections: mean_and_mcse(&rejections).0,
            total_rejections: outcomes.iter().map(|o| o.rejections as u64).sum(),
            total_false_discoveries: outcomes.iter().map(|o| o.false_discoveries as u64).sum(),
            dep_rate,
            dep_rate_mcse,
            mean_threshold: mean_and_mcse(&thresholds).0,
        }
    }
}

fn fixed_pvalues(family: &PValueFamily, policy: UPolicy) -> Option<Vec<f64>> {
    let f = match policy {
        UPolicy::Natural => PValueFamily::natural,
        UPolicy::Mid => PValueFamily::mid,
        UPolicy::Randomized => return None,
    };
    Some((0..family.len()).map(|x| rational::to_f64(&f(family, x))).collect())
}

/// Sample mean and `sd/√n`, folded in index order.
pub fn mean_and_mcse(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn simulate(config: &SimulationConfig, model: &DiscreteModel) -> Result<SimulationReport> {
    let sim = Simulation::prepare(config, model)?;
    let outcomes = sim.run_replicates()?;
    Ok(sim.summarize(&outcomes))
}

/// Summary rows `procedure, family, u_policy, alpha, fdr, fdr_mcse, power, dep_rate`.
pub fn write_summary_csv<W: Write>(reports: &[SimulationReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["procedure", "family", "u_policy", "alpha", "fdr", "fdr_mcse", "power", "dep_rate"])?;
    for r in reports {
        w.write_record([
            r.config.procedure.tag().to_string(),
            r.config.family.tag().to_string(),
            r.config.u_policy.tag().to_string(),
            rational::to_fraction(&r.config.alpha),
            r.fdr.to_string(),
            r.fdr_mcse.to_string(),
            r.power.map(|p| p.to_string()).unwrap_or_default(),
            r.dep_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
