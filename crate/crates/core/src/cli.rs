//! `olp` command line: generate instances, run policies, benchmark, sample-solve
//! and check capacity conditions.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{
    AdwordsSpec, BidDist, BudgetRule, GenSpec, RewardDist, RoutingSpec, SecretarySpec, YieldSpec,
};
use crate::harness::{
    column_sample_solve, offline_opt_workload, run_algo, run_trials_with_opt, Algo,
};
use crate::io::{read_workload, results_writer, workload_to_string, write_trial_rows};
use crate::model::{DualPrice, Workload};
use crate::multi::{check_multi_condition, run_dpa_multi, MultiInstance};
use crate::online::{check_input_condition, run_dpa, run_ola, ConditionVariant};

#[derive(Debug, Parser)]
#[command(
    name = "olp",
    version,
    about = "Online linear programming with learned dual prices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Run one policy on one arrival order.
    Run(RunArgs),
    /// Repeated random-order trials over an eps grid; writes the results CSV.
    Bench(BenchArgs),
    /// Approximate the offline LP by column sampling.
    SampleLp(SampleLpArgs),
    /// Evaluate the capacity conditions.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Routing,
    Secretary,
    Adwords,
    Yield,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RewardKind {
    Uniform,
    Pareto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BudgetKind {
    Fixed,
    Satisfy,
    Violate,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Number of arrivals; for yield, the expected number when --rate is absent.
    #[arg(long)]
    pub n: Option<usize>,
    /// Rows (edges, bidders, resources).
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Secretary capacity.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short = 'o', long)]
    pub output: PathBuf,
    /// Routing path density.
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// Routing edge capacity, yield resource capacity.
    #[arg(long, default_value_t = 100.0)]
    pub capacity: f64,
    #[arg(long, default_value_t = 0.0)]
    pub pi_lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub pi_hi: f64,
    #[arg(long, value_enum, default_value_t = RewardKind::Uniform)]
    pub reward_dist: RewardKind,
    #[arg(long, default_value_t = 1.5)]
    pub pareto_shape: f64,
    #[arg(long, default_value_t = 0.0)]
    pub bid_lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bid_hi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bid_density: f64,
    #[arg(long, value_enum, default_value_t = BudgetKind::Fixed)]
    pub budget_rule: BudgetKind,
    #[arg(long, default_value_t = 10.0)]
    pub budget: f64,
    /// Yield horizon length.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Yield arrival rate; defaults to n / horizon.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub products: usize,
    /// Eps for the summary's condition checks and condition-sized budgets.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(short = 'i', long)]
    pub input: PathBuf,
    #[arg(long, default_value = "dpa")]
    pub algo: String,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Shuffle the arrivals with this seed before running.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the run as a one-row results CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(short = 'i', long)]
    pub input: PathBuf,
    #[arg(short = 'o', long)]
    pub output: PathBuf,
    /// Comma-separated algorithms.
    #[arg(long, value_delimiter = ',', default_value = "ola,dpa,greedy")]
    pub algos: Vec<String>,
    /// Comma-separated eps grid.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Record wall-clock runtime per trial (otherwise the column is 0).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SampleLpArgs {
    #[arg(short = 'i', long)]
    pub input: PathBuf,
    #[arg(short = 'o', long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Ola,
    Dpa,
    Corollary,
    PerRow,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(short = 'i', long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::All)]
    pub variant: VariantArg,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eps {eps} outside (0, 1)")))
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", items.join(", "))
}

fn gen_spec(args: &GenArgs) -> Result<GenSpec> {
    let n = || {
        args.n
            .ok_or_else(|| Error::InvalidArgument("--n is required for this kind".into()))
    };
    Ok(match args.kind {
        Kind::Routing => GenSpec::Routing(RoutingSpec {
            m: args.m,
            n: n()?,
            q: args.q,
            pi_lo: args.pi_lo,
            pi_hi: args.pi_hi,
            capacity: args.capacity,
            seed: args.seed,
        }),
        Kind::Secretary => GenSpec::Secretary(SecretarySpec {
            n: n()?,
            k: args
                .k
                .ok_or_else(|| Error::BadSpec("secretary needs --k".into()))?,
            rewards: match args.reward_dist {
                RewardKind::Uniform => RewardDist::Uniform {
                    lo: args.pi_lo,
                    hi: args.pi_hi,
                },
                RewardKind::Pareto => RewardDist::Pareto {
                    scale: if args.pi_lo > 0.0 { args.pi_lo } else { 1.0 },
                    shape: args.pareto_shape,
                },
            },
            seed: args.seed,
        }),
        Kind::Adwords => GenSpec::Adwords(AdwordsSpec {
            n: n()?,
            m: args.m,
            bids: if args.bid_lo == args.bid_hi {
                BidDist::Constant { value: args.bid_hi }
            } else {
                BidDist::Uniform {
                    lo: args.bid_lo,
                    hi: args.bid_hi,
                    density: args.bid_density,
                }
            },
            budgets: match args.budget_rule {
                BudgetKind::Fixed => BudgetRule::Fixed {
                    budget: args.budget,
                },
                BudgetKind::Satisfy => BudgetRule::Condition {
                    eps: args.eps,
                    satisfy: true,
                },
                BudgetKind::Violate => BudgetRule::Condition {
                    eps: args.eps,
                    satisfy: false,
                },
            },
            seed: args.seed,
        }),
        Kind::Yield => {
            let rate = match args.rate {
                Some(r) => r,
                None => n()? as f64 / args.horizon,
            };
            GenSpec::Yield(YieldSpec::random_catalog(
                args.products,
                args.m,
                args.capacity,
                args.horizon,
                rate,
                args.seed,
            ))
        }
    })
}

fn write_conditions(out: &mut dyn Write, w: &Workload, eps: f64, only: VariantArg) -> Result<()> {
    match w {
        Workload::Scalar(inst) => {
            let all = [
                (VariantArg::Ola, ConditionVariant::Ola, "ola"),
                (VariantArg::Dpa, ConditionVariant::Dpa, "dpa"),
                (
                    VariantArg::Corollary,
                    ConditionVariant::Corollary,
                    "corollary",
                ),
                (VariantArg::PerRow, ConditionVariant::PerRow, "per_row"),
            ];
            for (arg, variant, name) in all {
                if only != VariantArg::All && only != arg {
                    continue;
                }
                match check_input_condition(inst, eps, variant) {
                    Ok(r) => writeln!(
                        out,
                        "condition {name}: lhs={} rhs={} satisfied={}",
                        r.lhs, r.rhs, r.satisfied
                    )?,
                    Err(Error::NonpositiveReward(t)) if only == VariantArg::All => {
                        writeln!(out, "condition {name}: n/a (column {t} has zero reward)")?
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Workload::Multi(inst) => {
            if !matches!(only, VariantArg::All | VariantArg::PerRow) {
                return Err(Error::InvalidArgument(
                    "multi-option instances only support the per_row condition".into(),
                ));
            }
            let r = check_multi_condition(inst, eps)?;
            writeln!(
                out,
                "condition per_row (k={}): lhs={} rhs={} satisfied={}",
                inst.k, r.lhs, r.rhs, r.satisfied
            )?;
        }
    }
    Ok(())
}

pub fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> Result<()> {
    check_eps(args.eps)?;
    let w = gen_spec(args)?.generate()?;
    std::fs::write(&args.output, workload_to_string(&w))?;
    let min_b = w.b().iter().copied().fold(f64::INFINITY, f64::min);
    writeln!(out, "wrote {}", args.output.display())?;
    write!(out, "m={} n={}", w.m(), w.n())?;
    if let Workload::Multi(inst) = &w {
        write!(out, " k={}", inst.k)?;
    }
    writeln!(out, " B={min_b}")?;
    writeln!(
        out,
        "row max consumption: {}",
        fmt_vec(&w.row_max_consumption())
    )?;
    write_conditions(out, &w, args.eps, VariantArg::All)
}

fn prices_line(prices: &[(usize, DualPrice)]) -> String {
    let items: Vec<String> = prices
        .iter()
        .map(|(ell, p)| format!("{ell}:{}", fmt_vec(&p.p)))
        .collect();
    items.join(" ")
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    check_eps(args.eps)?;
    let algo = Algo::parse(&args.algo)?;
    let mut w = read_workload(&args.input)?;
    let opt = offline_opt_workload(&w)?;
    if let Some(seed) = args.seed {
        w = crate::generators::shuffle_workload(&w, seed);
    }
    let (objective, fill, prices, decisions) = match (&w, algo) {
        (Workload::Scalar(inst), Algo::Ola | Algo::Dpa) => {
            let r = if algo == Algo::Ola {
                run_ola(inst, args.eps)?
            } else {
                run_dpa(inst, args.eps)?
            };
            let d: String = r.decisions.iter().map(|d| char::from(b'0' + d)).collect();
            (r.objective, r.fill, r.prices_used, d)
        }
        (Workload::Scalar(_), Algo::DpaMulti) | (Workload::Multi(_), Algo::DpaMulti) => {
            let multi = match &w {
                Workload::Scalar(i) => MultiInstance::from_scalar(i),
                Workload::Multi(i) => i.clone(),
            };
            let r = run_dpa_multi(&multi, args.eps)?;
            let d: Vec<String> = r
                .decisions
                .iter()
                .map(|d| d.choice.map_or("-".to_string(), |c| c.to_string()))
                .collect();
            (r.objective, r.fill, r.prices_used, d.join(","))
        }
        _ => {
            let o = run_algo(&w, algo, args.eps)?;
            let (fill, _, _) = crate::harness::audit(&w, &o.choices);
            let d: Vec<String> = o
                .choices
                .iter()
                .map(|d| d.map_or("-".to_string(), |c| c.to_string()))
                .collect();
            (o.objective, fill, Vec::new(), d.join(","))
        }
    };
    let ratio = if opt > 0.0 { objective / opt } else { 1.0 };
    writeln!(out, "algo={algo} eps={}", args.eps)?;
    writeln!(out, "objective={objective}")?;
    writeln!(out, "opt={opt}")?;
    writeln!(out, "ratio={ratio}")?;
    writeln!(out, "fill={}", fmt_vec(&fill))?;
    writeln!(out, "capacity={}", fmt_vec(w.b()))?;
    writeln!(out, "prices_used={}", prices_line(&prices))?;
    writeln!(out, "decisions={decisions}")?;
    if let Some(path) = &args.csv {
        let violations = fill.iter().zip(w.b()).filter(|(f, b)| f > b).count();
        let mut csv = results_writer(BufWriter::new(File::create(path)?))?;
        csv.write_record([
            algo.name().to_string(),
            args.eps.to_string(),
            "1".into(),
            args.seed.unwrap_or(0).to_string(),
            objective.to_string(),
            opt.to_string(),
            ratio.to_string(),
            violations.to_string(),
            "0".into(),
        ])?;
        csv.flush()?;
    }
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    if args.trials == 0 {
        return Err(Error::InvalidArgument("--trials must be at least 1".into()));
    }
    for &e in &args.eps {
        check_eps(e)?;
    }
    let algos = args
        .algos
        .iter()
        .map(|a| Algo::parse(a.trim()))
        .collect::<Result<Vec<_>>>()?;
    let w = read_workload(&args.input)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let mut csv = results_writer(BufWriter::new(File::create(&args.output)?))?;
    let opt = offline_opt_workload(&w)?;
    for algo in algos {
        if !algo.supports(&w) {
            writeln!(out, "skipping {algo}: not defined for this instance")?;
            continue;
        }
        for &eps in &args.eps {
            let stats =
                pool.install(|| run_trials_with_opt(&w, algo, eps, args.trials, args.seed, opt))?;
            write_trial_rows(&mut csv, &stats, args.timing)?;
            writeln!(
                out,
                "{algo} eps={eps}: mean={:.4} std={:.4} min={:.4} max={:.4} violations={}",
                stats.mean, stats.std, stats.min, stats.max, stats.violation_count
            )?;
        }
    }
    csv.flush()?;
    writeln!(out, "wrote {}", args.output.display())?;
    Ok(())
}

#[derive(Serialize)]
struct SampleLpReport<'a> {
    x: &'a [u8],
    objective: f64,
    opt: f64,
    fill: &'a [f64],
    price: &'a [f64],
    sample_size: usize,
    guard_zeroed: usize,
    feasible: bool,
}

pub fn cmd_sample_lp(args: &SampleLpArgs, out: &mut dyn Write) -> Result<()> {
    check_eps(args.eps)?;
    let inst = match read_workload(&args.input)? {
        Workload::Scalar(i) => i,
        Workload::Multi(m) => m.to_scalar()?,
    };
    let r = column_sample_solve(&inst, args.eps, args.seed)?;
    let opt = crate::harness::offline_opt(&inst)?.opt;
    let report = SampleLpReport {
        x: &r.x,
        objective: r.objective,
        opt,
        fill: &r.fill,
        price: &r.price.p,
        sample_size: r.sample.len(),
        guard_zeroed: r.guard_zeroed,
        feasible: r.feasible,
    };
    let mut text = serde_json::to_string(&report)?;
    text.push('\n');
    std::fs::write(&args.output, text)?;
    writeln!(out, "objective={} opt={opt}", r.objective)?;
    writeln!(
        out,
        "sample_size={} guard_zeroed={} feasible={}",
        r.sample.len(),
        r.guard_zeroed,
        r.feasible
    )?;
    writeln!(out, "wrote {}", args.output.display())?;
    Ok(())
}

pub fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> Result<()> {
    check_eps(args.eps)?;
    let w = read_workload(&args.input)?;
    write_conditions(out, &w, args.eps, args.variant)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::SampleLp(a) => cmd_sample_lp(a, out),
        Command::Check(a) => cmd_check(a, out),
    }
}

/// Parses arguments and runs; returns the process exit code
/// (0 ok, 2 usage, 3 data error, 4 internal error).
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "{line}");
            return 2;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::InvalidArgument(_) => 2,
                other => other.exit_code(),
            }
        }
    }
}
