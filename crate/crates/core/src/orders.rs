//! Exact verification of the orderings between statistic-based and
//! minimally discrete p-values.
//!
//! Every claim is universally quantified over sizes `α` or cut points `t`.
//! All the functions being compared are piecewise linear (or piecewise
//! quadratic against a linear bound) between the breakpoints of the two
//! families, so each check runs on the breakpoint grid, midpoints and, where
//! a quadratic reference is involved, the interior critical points. The
//! grid used is recorded on every report.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use num::traits::Signed;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DiscreteModel;
use crate::ranking::{verify_agreement, Ranking, Statistic};
use crate::rational::{self, one, ratio, zero, Rational};
use crate::testing::{
    breakpoint_grid, pvalue_family, size_alpha_tests, uniform_grid, Basis, PValueFamily, TestFunction,
};

/// Right-continuous step CDF on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf {
    jumps: Vec<Rational>,
    cumulative: Vec<Rational>,
}

impl StepCdf {
    /// Aggregates point masses; zero masses add no jump.
    pub fn from_masses<I>(masses: I) -> Self
    where
        I: IntoIterator<Item = (Rational, Rational)>,
    {
        let mut agg: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (loc, m) in masses {
            if m.is_positive() {
                *agg.entry(loc).or_insert_with(zero) += m;
            }
        }
        let mut acc = zero();
        let mut jumps = Vec::with_capacity(agg.len());
        let mut cumulative = Vec::with_capacity(agg.len());
        for (loc, m) in agg {
            acc += m;
            jumps.push(loc);
            cumulative.push(acc.clone());
        }
        Self { jumps, cumulative }
    }

    pub fn jumps(&self) -> &[Rational] {
        &self.jumps
    }

    pub fn cumulative(&self) -> &[Rational] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        match self.jumps.partition_point(|j| j <= t) {
            0 => zero(),
            k => self.cumulative[k - 1].clone(),
        }
    }

    /// `∫₀^s F(α) dα` as a sum of rectangles between consecutive jumps.
    pub fn integrated(&self, s: &Rational) -> Rational {
        let mut total = zero();
        for (k, (loc, height)) in self.jumps.iter().zip(&self.cumulative).enumerate() {
            if loc >= s {
                break;
            }
            let right = match self.jumps.get(k + 1) {
                Some(next) if next < s => next,
                _ => s,
            };
            total += (right - loc) * height;
        }
        total
    }

    /// CSV rows `t, F, t_exact, F_exact`, one per jump.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_knots(self.jumps.iter().cloned().zip(self.cumulative.iter().cloned()), out)
    }
}

/// CSV rows `t, F, t_exact, F_exact`.
pub fn write_knots<W: Write, I>(knots: I, out: W) -> Result<()>
where
    I: IntoIterator<Item = (Rational, Rational)>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "F", "t_exact", "F_exact"])?;
    for (t, f) in knots {
        w.write_record([
            rational::to_decimal(&t, 6),
            rational::to_decimal(&f, 6),
            rational::to_fraction(&t),
            rational::to_fraction(&f),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The exact law of `P(X, u)` under `param` for a fixed `u`.
pub fn pvalue_cdf(model: &DiscreteModel, param: &str, family: &PValueFamily, u: &Rational) -> Result<StepCdf> {
    check_unit("u", u)?;
    let probs = model.probs(param)?;
    Ok(StepCdf::from_masses((0..family.len()).map(|x| (family.value(x, u), probs[x].clone()))))
}

/// `Pr_θ{P(X, U) ≤ t}` with `U` uniform: `Σ_x p_θ(x)·clamp((t − a(x))/b(x), 0, 1)`.
pub fn randomized_pvalue_cdf_at(
    model: &DiscreteModel,
    param: &str,
    family: &PValueFamily,
    t: &Rational,
) -> Result<Rational> {
    check_unit("t", t)?;
    let probs = model.probs(param)?;
    Ok(randomized_cdf(probs, family, t))
}

fn randomized_cdf(probs: &[Rational], family: &PValueFamily, t: &Rational) -> Rational {
    (0..family.len()).fold(zero(), |acc, x| {
        let frac = rational::clamp_unit((t - family.a(x)) / family.b(x));
        acc + &probs[x] * frac
    })
}

/// Knots of the piecewise-linear randomized CDF, for export.
pub fn randomized_cdf_knots(
    model: &DiscreteModel,
    param: &str,
    family: &PValueFamily,
) -> Result<Vec<(Rational, Rational)>> {
    let probs = model.probs(param)?;
    Ok(family
        .breakpoints()
        .into_iter()
        .map(|t| {
            let f = randomized_cdf(probs, family, &t);
            (t, f)
        })
        .collect())
}

pub fn integrated_cdf(cdf: &StepCdf, s: &Rational) -> Rational {
    cdf.integrated(s)
}

/// `Var(P(x, U) | X = x) = b(x)²/12`.
pub fn conditional_variance(family: &PValueFamily, point: usize) -> Rational {
    let b = family.b(point);
    b * b / rational::int(12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Claim {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
}

impl Claim {
    pub const ALL: [Claim; 9] =
        [Claim::C1, Claim::C2, Claim::C3, Claim::C4, Claim::C5, Claim::C6, Claim::C7, Claim::C8, Claim::C9];

    pub fn describe(self) -> &'static str {
        match self {
            Claim::C1 => "MD natural decisions are at least as powerful",
            Claim::C2 => "natural decisions sandwiched below α under the null",
            Claim::C3 => "MD natural p-value stochastically smaller",
            Claim::C4 => "natural p-value CDFs sandwiched below the diagonal",
            Claim::C5 => "randomized p-values exactly uniform under the null",
            Claim::C6 => "randomized decisions equal in power (sufficient statistic)",
            Claim::C7 => "MR conditional variance is no larger",
            Claim::C8 => "MD test is a mean-preserving spread of the statistic test",
            Claim::C9 => "mid-p integrated CDFs chained below the uniform",
        }
    }
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub claim: Claim,
    pub verdict: Verdict,
    /// Description of the grid the claim was discharged on.
    pub grid: String,
    pub points_checked: usize,
    /// Smallest signed slack seen; negative exactly when the claim fails.
    #[serde(with = "rational::serde_fraction::option")]
    pub worst_margin: Option<Rational>,
    pub witness: Option<String>,
    pub notes: Vec<String>,
}

impl OrderReport {
    pub fn skipped(claim: Claim, note: impl Into<String>) -> Self {
        Self {
            claim,
            verdict: Verdict::Skipped,
            grid: String::new(),
            points_checked: 0,
            worst_margin: None,
            witness: None,
            notes: vec![note.into()],
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Running minimum of signed margins with the witness at the worst one.
#[derive(Debug, Default)]
struct Margins {
    worst: Option<Rational>,
    witness: Option<String>,
    checked: usize,
}

impl Margins {
    fn observe(&mut self, margin: Rational, witness: impl FnOnce() -> String) {
        self.checked += 1;
        let worse = match &self.worst {
            None => true,
            Some(w) => margin < *w,
        };
        if worse {
            if margin.is_negative() {
                self.witness = Some(witness());
            }
            self.worst = Some(margin);
        }
    }

    fn equal(&mut self, lhs: &Rational, rhs: &Rational, witness: impl FnOnce() -> String) {
        self.observe(-(lhs - rhs).abs(), witness);
    }

    fn merge(&mut self, other: Margins) {
        self.checked += other.checked;
        if let Some(m) = other.worst {
            let worse = self.worst.as_ref().is_none_or(|w| m < *w);
            if worse {
                self.worst = Some(m);
                self.witness = other.witness;
            }
        }
    }

    fn report(self, claim: Claim, grid: impl Into<String>) -> OrderReport {
        let verdict = match &self.worst {
            Some(w) if w.is_negative() => Verdict::Fail,
            _ => Verdict::Pass,
        };
        OrderReport {
            claim,
            verdict,
            grid: grid.into(),
            points_checked: self.checked,
            worst_margin: self.worst,
            witness: self.witness,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum UpperBound<'a> {
    Cdf(&'a StepCdf),
    Diagonal,
}

/// Checks `lower(t) ≤ upper(t)` at every jump of either CDF and at 1.
/// Both sides are right-continuous steps (or the diagonal, which only rises
/// between jumps), so the jumps are where the slack is smallest.
pub fn check_usual_order(claim: Claim, lower: &StepCdf, upper: UpperBound<'_>) -> OrderReport {
    let (m, n) = usual_order_margins(lower, upper);
    m.report(claim, format!("{n} jump points"))
}

fn usual_order_margins(lower: &StepCdf, upper: UpperBound<'_>) -> (Margins, usize) {
    let mut pts: Vec<Rational> = lower.jumps().to_vec();
    if let UpperBound::Cdf(u) = upper {
        pts.extend_from_slice(u.jumps());
    }
    pts.push(one());
    pts.sort();
    pts.dedup();
    let mut m = Margins::default();
    for t in &pts {
        let lo = lower.eval(t);
        let hi = match upper {
            UpperBound::Cdf(u) => u.eval(t),
            UpperBound::Diagonal => t.clone(),
        };
        m.observe(&hi - &lo, || {
            format!("t = {}: {} > {}", rational::to_fraction(t), rational::to_fraction(&lo), rational::to_fraction(&hi))
        });
    }
    let n = pts.len();
    (m, n)
}

/// Integrated-CDF chain `∫F_T-mid ≤ ∫F_MD-mid ≤ s²/2` under the null, with
/// both means exactly 1/2. Probe convex functions are evaluated as
/// diagnostics and reported in the notes only.
pub fn check_convex_order_chain(model: &DiscreteModel, stat: &Statistic, ranking: &Ranking) -> Result<OrderReport> {
    require_agreement(stat, ranking)?;
    let t_family = pvalue_family(model, Basis::Statistic(stat))?;
    let md_family = pvalue_family(model, Basis::Ranking(ranking))?;
    Ok(convex_chain(model, &t_family, &md_family))
}

fn convex_chain(model: &DiscreteModel, t_family: &PValueFamily, md_family: &PValueFamily) -> OrderReport {
    let half = ratio(1, 2);
    let p0 = model.null_probs();
    let t_cdf = mid_cdf(p0, t_family);
    let md_cdf = mid_cdf(p0, md_family);

    let mut grid: Vec<Rational> = t_cdf.jumps().iter().chain(md_cdf.jumps()).cloned().collect();
    grid.push(one());
    // Between jumps ∫F_MD − s²/2 is concave with its peak at s = F_MD.
    for (k, (loc, height)) in md_cdf.jumps().iter().zip(md_cdf.cumulative()).enumerate() {
        let right = md_cdf.jumps().get(k + 1).cloned().unwrap_or_else(one);
        if height > loc && *height < right {
            grid.push(height.clone());
        }
    }
    grid.sort();
    grid.dedup();

    let mut m = Margins::default();
    let mut strictly_between = 0usize;
    for s in &grid {
        let it = t_cdf.integrated(s);
        let imd = md_cdf.integrated(s);
        let iu = s * s / rational::int(2);
        if it < imd && imd < iu {
            strictly_between += 1;
        }
        m.observe(&imd - &it, || {
            format!(
                "s = {}: ∫F_T = {} exceeds ∫F_MD = {}",
                rational::to_fraction(s),
                rational::to_fraction(&it),
                rational::to_fraction(&imd)
            )
        });
        m.observe(&iu - &imd, || {
            format!(
                "s = {}: ∫F_MD = {} exceeds s²/2 = {}",
                rational::to_fraction(s),
                rational::to_fraction(&imd),
                rational::to_fraction(&iu)
            )
        });
    }
    let mean = |f: &PValueFamily| (0..f.len()).fold(zero(), |acc, x| acc + &p0[x] * f.mid(x));
    let (mean_t, mean_md) = (mean(t_family), mean(md_family));
    m.equal(&mean_t, &half, || format!("E0[P_T mid] = {}", rational::to_fraction(&mean_t)));
    m.equal(&mean_md, &half, || format!("E0[P_MD mid] = {}", rational::to_fraction(&mean_md)));

    let n = grid.len();
    let mut report =
        m.report(Claim::C9, format!("{n} integration limits (jumps of both mid-p CDFs, critical points, 1)"));
    report.notes.push(format!("integrated MD CDF strictly between at {strictly_between} limits"));
    report.notes.extend(probe_notes(p0, t_family, md_family));
    report
}

fn mid_cdf(p0: &[Rational], family: &PValueFamily) -> StepCdf {
    StepCdf::from_masses((0..family.len()).map(|x| (family.mid(x), p0[x].clone())))
}

fn probe_notes(p0: &[Rational], t_family: &PValueFamily, md_family: &PValueFamily) -> Vec<String> {
    let expect = |f: &PValueFamily, h: &dyn Fn(&Rational) -> Rational| {
        (0..f.len()).fold(zero(), |acc, x| acc + &p0[x] * h(&f.mid(x)))
    };
    let mut hinge_violations = 0;
    let cs: Vec<Rational> = (0..=20).map(|k| ratio(k, 20)).collect();
    for c in &cs {
        let h = |p: &Rational| {
            let d = p - c;
            if d.is_positive() {
                d
            } else {
                zero()
            }
        };
        let u = (one() - c) * (one() - c) / rational::int(2);
        let (et, emd) = (expect(t_family, &h), expect(md_family, &h));
        if !(et <= emd && emd <= u) {
            hinge_violations += 1;
        }
    }
    let sq = |p: &Rational| p * p;
    let (sq_t, sq_md) = (expect(t_family, &sq), expect(md_family, &sq));
    let sq_ok = sq_t <= sq_md && sq_md <= ratio(1, 3);

    const FLOOR: f64 = 1e-12;
    let neglog = |f: &PValueFamily| {
        (0..f.len()).map(|x| rational::to_f64(&p0[x]) * -2.0 * rational::to_f64(&f.mid(x)).max(FLOOR).ln()).sum::<f64>()
    };
    let (lt, lmd, lu) = (neglog(t_family), neglog(md_family), 2.0 * (1.0 - FLOOR));
    let tol = 1e-9;
    let log_ok = lt <= lmd + tol && lmd <= lu + tol;
    vec![
        format!("probe (x-c)+ over c = k/20: {hinge_violations} of {} out of order", cs.len()),
        format!(
            "probe x^2: {} ≤ {} ≤ 1/3 {}",
            rational::to_decimal(&sq_t, 6),
            rational::to_decimal(&sq_md, 6),
            if sq_ok { "holds" } else { "VIOLATED" }
        ),
        format!("probe -2 log x: {lt:.6} ≤ {lmd:.6} ≤ {lu:.6} {}", if log_ok { "holds" } else { "VIOLATED" }),
    ]
}

/// Groups the support by the value of `φ^T_α` and checks
/// `E0[φ^MD_α | φ^T_α = v] = v` on every group; on the sure groups
/// (`v ∈ {0, 1}`) this forces pointwise equality.
pub fn check_martingale_projection(
    model: &DiscreteModel,
    t_test: &TestFunction,
    md_test: &TestFunction,
) -> Result<OrderReport> {
    if t_test.alpha() != md_test.alpha() {
        return Err(Error::Domain("tests were built at different sizes".into()));
    }
    let mut notes = Vec::new();
    let m = martingale_margins(model, t_test, md_test, &mut notes);
    let mut report = m.report(Claim::C8, format!("α = {}", rational::to_fraction(t_test.alpha())));
    report.notes = notes;
    Ok(report)
}

fn martingale_margins(
    model: &DiscreteModel,
    t_test: &TestFunction,
    md_test: &TestFunction,
    notes: &mut Vec<String>,
) -> Margins {
    let p0 = model.null_probs();
    let mut groups: BTreeMap<&Rational, (Rational, Rational, Vec<usize>)> = BTreeMap::new();
    for (x, p) in p0.iter().enumerate() {
        let g = groups.entry(t_test.value(x)).or_insert_with(|| (zero(), zero(), Vec::new()));
        g.0 += p;
        g.1 += p * md_test.value(x);
        g.2.push(x);
    }
    let alpha = rational::to_fraction(t_test.alpha());
    let mut m = Margins::default();
    for (v, (mass, weighted, members)) in groups {
        if mass == zero() {
            notes.push(format!("α = {alpha}: group φ_T = {} has zero null mass", rational::to_fraction(v)));
            continue;
        }
        let avg = weighted / &mass;
        m.equal(&avg, v, || {
            let stray = members
                .iter()
                .find(|&&x| md_test.value(x) != v)
                .map(|&x| {
                    format!(", e.g. φ_MD({}) = {}", model.points()[x].label, rational::to_fraction(md_test.value(x)))
                })
                .unwrap_or_default();
            format!(
                "α = {alpha}: E0[φ_MD | φ_T = {}] = {}{stray}",
                rational::to_fraction(v),
                rational::to_fraction(&avg)
            )
        });
    }
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sufficiency {
    pub sufficient: bool,
    pub witness: Option<String>,
}

/// Whether the law of `X` given each level set `[T = t]` is the same under
/// every listed parameter. Level sets with zero mass under a parameter
/// impose no constraint for it.
pub fn check_sufficiency(model: &DiscreteModel, stat: &Statistic, params: &[&str]) -> Result<Sufficiency> {
    let rows = params.iter().map(|p| Ok((*p, model.probs(p)?))).collect::<Result<Vec<_>>>()?;
    for class in stat.tie_classes() {
        let masses: Vec<Rational> = rows.iter().map(|(_, row)| class.iter().map(|&x| &row[x]).sum()).collect();
        let live: Vec<usize> = (0..rows.len()).filter(|&j| masses[j].is_positive()).collect();
        let Some((&base, rest)) = live.split_first() else { continue };
        for &j in rest {
            for &x in &class {
                // p_j(x)/P_j(C) = p_base(x)/P_base(C), cross-multiplied.
                if &rows[j].1[x] * &masses[base] != &rows[base].1[x] * &masses[j] {
                    let cond = |k: usize| rational::to_fraction(&(&rows[k].1[x] / &masses[k]));
                    return Ok(Sufficiency {
                        sufficient: false,
                        witness: Some(format!(
                            "Pr(X = {} | T = {}) is {} under {} but {} under {}",
                            model.points()[x].label,
                            rational::to_fraction(stat.value(x)),
                            cond(base),
                            rows[base].0,
                            cond(j),
                            rows[j].0
                        )),
                    });
                }
            }
        }
    }
    Ok(Sufficiency { sufficient: true, witness: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaGrid {
    Breakpoints,
    BreakpointsAndMidpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SuiteConfig {
    pub alpha_grid: AlphaGrid,
    /// Size of the rational `k/(n−1)` grid used for the uniformity claim,
    /// on top of the breakpoints.
    pub uniform_points: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { alpha_grid: AlphaGrid::BreakpointsAndMidpoints, uniform_points: 1000 }
    }
}

/// Runs C1 through C9 and returns one report per claim, in order.
///
/// `theta_grid` lists the parameters for the claims quantified over θ;
/// the null is always used for the null-only claims.
pub fn verify_all_claims(
    model: &DiscreteModel,
    stat: &Statistic,
    ranking: &Ranking,
    theta_grid: &[&str],
    config: &SuiteConfig,
) -> Result<Vec<OrderReport>> {
    require_agreement(stat, ranking)?;
    let null = model.null_name().to_string();
    for p in theta_grid {
        model.probs(p)?;
    }
    let t_family = pvalue_family(model, Basis::Statistic(stat))?;
    let md_family = pvalue_family(model, Basis::Ranking(ranking))?;
    let alphas = breakpoint_grid(&[&t_family, &md_family], config.alpha_grid == AlphaGrid::BreakpointsAndMidpoints);
    let t_tests = size_alpha_tests(model, Basis::Statistic(stat), &alphas)?;
    let md_tests = size_alpha_tests(model, Basis::Ranking(ranking), &alphas)?;
    let alpha_desc = match config.alpha_grid {
        AlphaGrid::Breakpoints => format!("{} breakpoint sizes α", alphas.len()),
        AlphaGrid::BreakpointsAndMidpoints => format!("{} breakpoint and midpoint sizes α", alphas.len()),
    };
    let theta_desc = theta_grid.join(", ");
    let no_grid = "θ-grid is empty";
    let mut reports = Vec::with_capacity(9);

    // C1
    if theta_grid.is_empty() {
        reports.push(OrderReport::skipped(Claim::C1, no_grid));
    } else {
        let mut m = Margins::default();
        for &theta in theta_grid {
            for (t, md) in t_tests.iter().zip(&md_tests) {
                let (pt, pmd) = (t.natural_power(model, theta)?, md.natural_power(model, theta)?);
                m.observe(&pmd - &pt, || {
                    format!("θ = {theta}, α = {}: MD {} < T {}", frac(t.alpha()), frac(&pmd), frac(&pt))
                });
            }
        }
        reports.push(m.report(Claim::C1, format!("{alpha_desc} × θ ∈ {{{theta_desc}}}")));
    }

    // C2
    {
        let mut m = Margins::default();
        for (t, md) in t_tests.iter().zip(&md_tests) {
            let (pt, pmd) = (t.natural_power(model, &null)?, md.natural_power(model, &null)?);
            m.observe(&pmd - &pt, || format!("α = {}: MD {} < T {}", frac(t.alpha()), frac(&pmd), frac(&pt)));
            m.observe(t.alpha() - &pmd, || format!("α = {}: MD level {} exceeds α", frac(t.alpha()), frac(&pmd)));
        }
        reports.push(m.report(Claim::C2, alpha_desc.clone()));
    }

    let one_q = one();
    // C3
    if theta_grid.is_empty() {
        reports.push(OrderReport::skipped(Claim::C3, no_grid));
    } else {
        let mut m = Margins::default();
        let mut pts = 0;
        for &theta in theta_grid {
            let ft = pvalue_cdf(model, theta, &t_family, &one_q)?;
            let fmd = pvalue_cdf(model, theta, &md_family, &one_q)?;
            let (mm, n) = usual_order_margins(&ft, UpperBound::Cdf(&fmd));
            pts += n;
            m.merge(tag_witness(mm, theta));
        }
        reports.push(m.report(Claim::C3, format!("{pts} jump points over θ ∈ {{{theta_desc}}}")));
    }

    // C4
    {
        let ft = pvalue_cdf(model, &null, &t_family, &one_q)?;
        let fmd = pvalue_cdf(model, &null, &md_family, &one_q)?;
        let (mut m, n1) = usual_order_margins(&ft, UpperBound::Cdf(&fmd));
        let (m2, n2) = usual_order_margins(&fmd, UpperBound::Diagonal);
        m.merge(m2);
        reports.push(m.report(Claim::C4, format!("{} jump points", n1 + n2)));
    }

    // C5
    {
        let mut ts = uniform_grid(config.uniform_points);
        ts.extend(alphas.iter().cloned());
        ts.sort();
        ts.dedup();
        let p0 = model.null_probs();
        let mut m = Margins::default();
        for fam in [&t_family, &md_family] {
            for t in &ts {
                let f = randomized_cdf(p0, fam, t);
                m.equal(&f, t, || format!("{} family: F({}) = {}", fam.kind().tag(), frac(t), frac(&f)));
            }
        }
        reports.push(m.report(Claim::C5, format!("{} cut points t per family", ts.len())));
    }

    let mut suff_params: Vec<&str> = vec![null.as_str()];
    suff_params.extend(theta_grid.iter().copied().filter(|p| *p != null));
    let sufficiency = check_sufficiency(model, stat, &suff_params)?;
    let unmet = |claim: Claim| {
        OrderReport::skipped(
            claim,
            format!(
                "hypothesis unmet: `{}` is not sufficient over {{{}}}: {}",
                stat.name(),
                suff_params.join(", "),
                sufficiency.witness.clone().unwrap_or_default()
            ),
        )
    };

    // C6
    if theta_grid.is_empty() {
        reports.push(OrderReport::skipped(Claim::C6, no_grid));
    } else if !sufficiency.sufficient {
        reports.push(unmet(Claim::C6));
    } else {
        let mut m = Margins::default();
        for &theta in theta_grid {
            for (t, md) in t_tests.iter().zip(&md_tests) {
                let (pt, pmd) = (t.power(model, theta)?, md.power(model, theta)?);
                m.equal(&pmd, &pt, || {
                    format!("θ = {theta}, α = {}: MD {} ≠ T {}", frac(t.alpha()), frac(&pmd), frac(&pt))
                });
            }
        }
        reports.push(m.report(Claim::C6, format!("{alpha_desc} × θ ∈ {{{theta_desc}}}")));
    }

    // C7
    {
        let mut m = Margins::default();
        let mut strict = 0;
        for x in 0..model.len() {
            let (vt, vmd) = (conditional_variance(&t_family, x), conditional_variance(&md_family, x));
            let label = &model.points()[x].label;
            m.observe(&vt - &vmd, || format!("x = {label}: MD variance {} > T variance {}", frac(&vmd), frac(&vt)));
            // Equality exactly where the statistic is unique.
            let unique = stat.is_unique_at(x);
            if unique != (vt == vmd) {
                m.observe(rational::int(-1), || {
                    format!("x = {label}: variances equal = {} but statistic unique = {unique}", vt == vmd)
                });
            }
            if vmd < vt {
                strict += 1;
            }
        }
        let mut r = m.report(Claim::C7, format!("{} support points", model.len()));
        r.notes.push(format!("strict variance reduction at {strict} points"));
        reports.push(r);
    }

    // C8
    {
        let mut notes = Vec::new();
        let mut m = Margins::default();
        for (t, md) in t_tests.iter().zip(&md_tests) {
            m.merge(martingale_margins(model, t, md, &mut notes));
        }
        if sufficiency.sufficient {
            let mut r = m.report(Claim::C8, alpha_desc.clone());
            r.notes = notes;
            reports.push(r);
        } else {
            let probe = m.report(Claim::C8, alpha_desc.clone());
            let mut r = unmet(Claim::C8);
            r.notes.push(format!(
                "empirical probe without the hypothesis: {:?} (worst margin {})",
                probe.verdict,
                probe.worst_margin.as_ref().map(frac).unwrap_or_default()
            ));
            reports.push(r);
        }
    }

    // C9
    reports.push(convex_chain(model, &t_family, &md_family));
    Ok(reports)
}

fn tag_witness(mut m: Margins, theta: &str) -> Margins {
    if let Some(w) = m.witness.take() {
        m.witness = Some(format!("θ = {theta}, {w}"));
    }
    m
}

fn require_agreement(stat: &Statistic, ranking: &Ranking) -> Result<()> {
    let check = verify_agreement(stat, ranking)?;
    if check.agrees {
        return Ok(());
    }
    let detail = match check.witness {
        Some((x, y)) => format!(
            "point {x} has the larger statistic {} but rank {} > {}",
            frac(stat.value(x)),
            ranking.rank(x),
            ranking.rank(y)
        ),
        None => "not a bijection".into(),
    };
    Err(Error::Disagreement { statistic: stat.name().to_string(), detail })
}

fn check_unit(what: &str, q: &Rational) -> Result<()> {
    if rational::in_unit_interval(q) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} = {} is outside [0, 1]", frac(q))))
    }
}

fn frac(q: &Rational) -> String {
    rational::to_fraction(q)
}

/// Human-readable report table.
pub fn render_table(reports: &[OrderReport]) -> String {
    let mut out = String::from("claim  verdict  worst margin      points  grid\n");
    for r in reports {
        let margin = r.worst_margin.as_ref().map(|m| rational::to_decimal(m, 9)).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<6} {:<8} {:<17} {:<7} {}\n",
            r.claim.to_string(),
            format!("{:?}", r.verdict).to_lowercase(),
            margin,
            r.points_checked,
            r.grid
        ));
        if let Some(w) = &r.witness {
            out.push_str(&format!("       witness: {w}\n"));
        }
        for n in &r.notes {
            out.push_str(&format!("       note: {n}\n"));
        }
    }
    out
}
