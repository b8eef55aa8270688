//! Command implementations behind the `discretep` binary.
//!
//! Each command writes its outputs into the `--out` directory together with
//! a `<command>.manifest.json` that records every setting needed to rerun
//! it bit for bit. Manifests carry no timestamps or absolute paths.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use discretep::downstream::{resolve_model, simulate, write_summary_csv, SimulationConfig, SimulationReport};
use discretep::model::example1_priority;
use discretep::orders::{
    pvalue_cdf, randomized_cdf_knots, render_table, verify_all_claims, write_knots, AlphaGrid, SuiteConfig,
};
use discretep::rational::{self, one, ratio};
use discretep::testing::{pvalue_family, uniform_grid, write_pvalue_table};
use discretep::{Basis, DiscreteModel, FamilyKind, OrderReport, Ranking, Rational, Statistic, TieBreak, Verdict};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "discretep", version, about = "Exact natural, mid, randomized and minimally discrete p-values")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// The Example 1 table of p-values under the priority ranking.
    Table1(OutArgs),
    /// Exact CDF of a p-value family at every jump.
    Cdf(CdfArgs),
    /// Run the claim suite.
    Verify(VerifyArgs),
    /// Monte Carlo of a multiple-testing or combination procedure.
    Simulate(SimulateArgs),
    /// Per-point p-value table.
    Pvalues(PvaluesArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    T,
    Md,
}

impl From<FamilyArg> for FamilyKind {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::T => FamilyKind::TBased,
            FamilyArg::Md => FamilyKind::MinimallyDiscrete,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UArg {
    Natural,
    Mid,
    Rand,
}

/// Model and basis selection shared by the exact commands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Builtin (`example1`, `binomial:n,θ0,θ1,…`, `bernoulli:n,θ0,θ1,…`) or a model JSON file.
    #[arg(long, default_value = "example1")]
    pub model: String,
    /// `lr` for the likelihood ratio of the alternative against the null, or a cached statistic.
    #[arg(long, default_value = "lr")]
    pub statistic: String,
    /// `lexicographic`, `priority` or `shuffle:SEED`; the model's priority list when omitted.
    #[arg(long)]
    pub tie_break: Option<String>,
    /// File listing every label in tie-break priority order.
    #[arg(long)]
    pub priority: Option<PathBuf>,
    /// File listing every label in rank order; overrides tie-breaking.
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    /// Seed for `--tie-break shuffle` when no seed is given inline.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CdfArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Parameter to evaluate under, by name or value; the null when omitted.
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long, value_enum, default_value = "md")]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value = "natural")]
    pub u: UArg,
    /// Emit the diagonal at `N` evenly spaced points instead.
    #[arg(long)]
    pub uniform: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated parameters for the claims quantified over θ; every
    /// non-null parameter when omitted, none when empty.
    #[arg(long)]
    pub grid: Option<String>,
    /// Also check midpoints between consecutive breakpoints.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub midpoints: bool,
    /// Points of the rational grid for the uniformity claim.
    #[arg(long, default_value_t = 1000)]
    pub uniform_points: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Simulation config JSON.
    #[arg(long)]
    #[serde(skip)]
    pub config: PathBuf,
    /// Replaces the master seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replaces the replicate count of the config.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PvaluesArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "md")]
    pub family: FamilyArg,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutArgs,
}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    ClaimFailure,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::ClaimFailure => 1,
        }
    }
}

/// 0 pass, 1 claim failure, 2 usage or input error.
pub fn exit_code(result: &Result<Status>) -> i32 {
    match result {
        Ok(s) => s.code(),
        Err(_) => 2,
    }
}

pub fn run(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Table1(a) => cmd_table1(a).map(|_| Status::Pass),
        Command::Cdf(a) => cmd_cdf(a).map(|_| Status::Pass),
        Command::Verify(a) => {
            let v = cmd_verify(a)?;
            print!("{}", render_table(&v.reports));
            Ok(v.status)
        }
        Command::Simulate(a) => {
            let r = cmd_simulate(a)?;
            println!(
                "{} {} {} α={}: FDR {:.5} ± {:.5}, power {}, dependence {:.5}",
                r.config.procedure.tag(),
                r.config.family.tag(),
                r.config.u_policy.tag(),
                rational::to_fraction(&r.config.alpha),
                r.fdr,
                r.fdr_mcse,
                r.power.map(|p| format!("{p:.5}")).unwrap_or_else(|| "-".into()),
                r.dep_rate
            );
            Ok(Status::Pass)
        }
        Command::Pvalues(a) => cmd_pvalues(a).map(|_| Status::Pass),
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    arguments: Value,
    model: Value,
    seed: Option<u64>,
    grids: Value,
    outputs: Vec<String>,
}

fn prepare_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = out.join(name);
    let f = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_manifest(
    out: &Path,
    command: &str,
    arguments: Value,
    model: Value,
    seed: Option<u64>,
    grids: Value,
    outputs: &[&str],
) -> Result<PathBuf> {
    let name = format!("{command}.manifest.json");
    let manifest = Manifest {
        tool: "discretep",
        version: env!("CARGO_PKG_VERSION"),
        command,
        arguments,
        model,
        seed,
        grids,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    write_json(out, &name, &manifest)?;
    Ok(out.join(name))
}

fn read_labels(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).with_context(|| format!("parsing {} as a JSON label list", path.display()));
    }
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
}

/// Model, statistic and ranking resolved from the shared flags.
pub struct Setup {
    pub model: DiscreteModel,
    pub stat: Statistic,
    pub ranking: Ranking,
}

impl ModelArgs {
    pub fn load(&self) -> Result<Setup> {
        let model = resolve_model(&self.model, None)?;
        let stat = if self.statistic == "lr" {
            let alt =
                model.alternative_name().context("model has no alternative parameter for the likelihood ratio")?;
            Statistic::likelihood_ratio(&model, model.null_name(), alt)?
        } else {
            Statistic::from_model(&model, &self.statistic)?
        };
        let ranking = match &self.ranking {
            Some(path) => Ranking::from_labels(&model, stat.name(), &read_labels(path)?)?,
            None => Ranking::build(&model, &stat, &self.tie_break_policy(&model)?)?,
        };
        Ok(Setup { model, stat, ranking })
    }

    fn tie_break_policy(&self, model: &DiscreteModel) -> Result<TieBreak> {
        if let Some(path) = &self.priority {
            return Ok(TieBreak::Priority(read_labels(path)?));
        }
        Ok(match (self.tie_break.as_deref(), self.seed) {
            (Some("shuffle"), Some(seed)) => TieBreak::SeededShuffle(seed),
            (Some("shuffle"), None) => bail!("`--tie-break shuffle` needs `--seed` or `shuffle:SEED`"),
            (Some(spec), _) => TieBreak::parse(spec, model)?,
            (None, _) => TieBreak::default_for(model),
        })
    }

    fn shuffle_seed(&self) -> Option<u64> {
        match self.tie_break.as_deref() {
            Some("shuffle") => self.seed,
            Some(spec) => spec.strip_prefix("shuffle:").and_then(|s| s.parse().ok()),
            None => None,
        }
    }
}

fn family(setup: &Setup, kind: FamilyArg) -> Result<discretep::PValueFamily> {
    Ok(match kind {
        FamilyArg::T => pvalue_family(&setup.model, Basis::Statistic(&setup.stat))?,
        FamilyArg::Md => pvalue_family(&setup.model, Basis::Ranking(&setup.ranking))?,
    })
}

/// One row of the Example 1 table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub label: String,
    pub p0: Rational,
    pub p1: Rational,
    pub lambda: Rational,
    pub rank: usize,
    pub p_md: Rational,
    pub p_lambda: Rational,
}

/// Rows of the Example 1 table in rank order.
pub fn table1_rows() -> Result<Vec<Table1Row>> {
    let model = DiscreteModel::example1();
    let lr = Statistic::likelihood_ratio(&model, "theta0", "theta1")?;
    let ranking = Ranking::build(&model, &lr, &TieBreak::Priority(example1_priority()))?;
    let t = pvalue_family(&model, Basis::Statistic(&lr))?;
    let md = pvalue_family(&model, Basis::Ranking(&ranking))?;
    let (p0, p1) = (model.probs("theta0")?, model.probs("theta1")?);
    Ok(ranking
        .order()
        .iter()
        .map(|&x| Table1Row {
            label: model.points()[x].label.clone(),
            p0: p0[x].clone(),
            p1: p1[x].clone(),
            lambda: lr.value(x).clone(),
            rank: ranking.rank(x),
            p_md: md.natural(x),
            p_lambda: t.natural(x),
        })
        .collect())
}

pub fn cmd_table1(out: &OutArgs) -> Result<PathBuf> {
    prepare_dir(&out.out)?;
    let rows = table1_rows()?;
    let mut w = csv::Writer::from_writer(create(&out.out, "table1.csv")?);
    let cols = ["p0", "p1", "lambda"];
    let mut header: Vec<String> = (1..=5).map(|i| format!("x{i}")).collect();
    header.extend(cols.iter().map(|s| s.to_string()));
    header.extend(["R", "P_MD", "P_lambda"].iter().map(|s| s.to_string()));
    header.extend(["p0", "p1", "lambda", "P_MD", "P_lambda"].iter().map(|s| format!("{s}_exact")));
    w.write_record(&header)?;
    for r in &rows {
        let mut rec: Vec<String> = r.label.chars().map(|c| c.to_string()).collect();
        for q in [&r.p0, &r.p1, &r.lambda] {
            rec.push(rational::to_decimal(q, 5));
        }
        rec.push(r.rank.to_string());
        rec.push(rational::to_decimal(&r.p_md, 5));
        rec.push(rational::to_decimal(&r.p_lambda, 5));
        for q in [&r.p0, &r.p1, &r.lambda, &r.p_md, &r.p_lambda] {
            rec.push(rational::to_fraction(q));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let model = DiscreteModel::example1();
    write_manifest(
        &out.out,
        "table1",
        json!({}),
        model.to_json_value(),
        None,
        json!({"ranking": "example1 priority"}),
        &["table1.csv"],
    )?;
    Ok(out.out.join("table1.csv"))
}

pub fn cmd_cdf(args: &CdfArgs) -> Result<PathBuf> {
    let out = &args.out.out;
    prepare_dir(out)?;
    let setup = args.model.load()?;
    let theta = match &args.theta {
        Some(key) => setup.model.resolve_parameter(key)?.to_string(),
        None => setup.model.null_name().to_string(),
    };
    let grid_desc;
    let knots: Vec<(Rational, Rational)> = if let Some(n) = args.uniform {
        grid_desc = format!("diagonal at {n} points");
        uniform_grid(n).into_iter().map(|t| (t.clone(), t)).collect()
    } else {
        let fam = family(&setup, args.family)?;
        match args.u {
            UArg::Natural | UArg::Mid => {
                let u = if args.u == UArg::Natural { one() } else { ratio(1, 2) };
                let cdf = pvalue_cdf(&setup.model, &theta, &fam, &u)?;
                grid_desc = format!("{} jumps", cdf.len());
                cdf.jumps().iter().cloned().zip(cdf.cumulative().iter().cloned()).collect()
            }
            UArg::Rand => {
                let k = randomized_cdf_knots(&setup.model, &theta, &fam)?;
                grid_desc = format!("{} knots of the piecewise-linear CDF", k.len());
                k
            }
        }
    };
    write_knots(knots, create(out, "cdf.csv")?)?;
    let mut arguments = serde_json::to_value(args)?;
    arguments["theta"] = json!(theta);
    write_manifest(
        out,
        "cdf",
        arguments,
        setup.model.to_json_value(),
        args.model.shuffle_seed(),
        json!({ "points": grid_desc }),
        &["cdf.csv"],
    )?;
    Ok(out.join("cdf.csv"))
}

#[derive(Debug)]
pub struct VerifyOutcome {
    pub reports: Vec<OrderReport>,
    pub status: Status,
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyOutcome> {
    let out = &args.out.out;
    prepare_dir(out)?;
    let setup = args.model.load()?;
    let null = setup.model.null_name().to_string();
    let grid: Vec<String> = match &args.grid {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|k| Ok(setup.model.resolve_parameter(k)?.to_string()))
            .collect::<Result<_>>()?,
        None => setup.model.parameters().iter().map(|p| p.name.clone()).filter(|p| *p != null).collect(),
    };
    let grid_refs: Vec<&str> = grid.iter().map(String::as_str).collect();
    let config = SuiteConfig {
        alpha_grid: if args.midpoints { AlphaGrid::BreakpointsAndMidpoints } else { AlphaGrid::Breakpoints },
        uniform_points: args.uniform_points,
    };
    let reports = verify_all_claims(&setup.model, &setup.stat, &setup.ranking, &grid_refs, &config)?;
    let table = render_table(&reports);
    write_json(out, "verify.json", &reports)?;
    let mut w = create(out, "verify.txt")?;
    w.write_all(table.as_bytes())?;
    w.flush()?;
    let status = if reports.iter().any(|r| r.verdict == Verdict::Fail) { Status::ClaimFailure } else { Status::Pass };
    let mut arguments = serde_json::to_value(args)?;
    arguments["grid"] = json!(grid);
    write_manifest(
        out,
        "verify",
        arguments,
        setup.model.to_json_value(),
        args.model.shuffle_seed(),
        json!({
            "theta": grid,
            "alpha": config.alpha_grid,
            "uniform_points": config.uniform_points,
            "per_claim": reports.iter().map(|r| json!({"claim": r.claim, "grid": r.grid, "points": r.points_checked})).collect::<Vec<_>>(),
        }),
        &["verify.json", "verify.txt"],
    )?;
    Ok(VerifyOutcome { reports, status })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimulationReport> {
    let out = &args.out.out;
    prepare_dir(out)?;
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = SimulationConfig::from_json_str(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(r) = args.replicates {
        config.replicates = r;
    }
    config.validate()?;
    let model = resolve_model(&config.model, args.config.parent())?;
    let report = simulate(&config, &model)?;
    write_json(out, "simulate.json", &report)?;
    let mut w = create(out, "simulate.csv")?;
    write_summary_csv(std::slice::from_ref(&report), &mut w)?;
    w.flush()?;
    write_manifest(
        out,
        "simulate",
        json!({ "config": config }),
        model.to_json_value(),
        Some(config.seed),
        json!({ "replicates": config.replicates, "rng": report.rng }),
        &["simulate.json", "simulate.csv"],
    )?;
    Ok(report)
}

pub fn cmd_pvalues(args: &PvaluesArgs) -> Result<PathBuf> {
    let out = &args.out.out;
    prepare_dir(out)?;
    let setup = args.model.load()?;
    let fam = family(&setup, args.family)?;
    let mut w = create(out, "pvalues.csv")?;
    write_pvalue_table(&setup.model, &fam, &setup.stat, &mut w)?;
    w.flush()?;
    write_manifest(
        out,
        "pvalues",
        serde_json::to_value(args)?,
        setup.model.to_json_value(),
        args.model.shuffle_seed(),
        json!({}),
        &["pvalues.csv"],
    )?;
    Ok(out.join("pvalues.csv"))
}
