//! Command-line front end: synthetic data generation, ensemble selection on
//! CSV data, threshold-bound queries, the minimal-threshold sweep, the
//! score-model simulator, and the two experiment protocols.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use stabsel::bounds::{self, BoundQuery};
use stabsel::dataset::{Dataset, ResponseColumn};
use stabsel::engine::{self, EngineConfig};
use stabsel::harness::{self, BaseKind, ExperimentSpec, Method, TauPolicy};
use stabsel::scoremodel::{self, NoiseLaw, ScoreModelConfig, DEFAULT_DIMS};
use stabsel::synth::{DesignKind, DesignSampler, DesignSpec, NoiseKind};
use stabsel::BaseSelector;

#[derive(Parser)]
#[command(
    name = "stabsel",
    about = "Extended stability selection: subsampled ensemble variable selection with false-positive bounds",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic design as a dataset CSV plus a ground-truth CSV.
    Gen(GenArgs),
    /// Run the selection-frequency ensemble on a CSV dataset.
    Select(SelectArgs),
    /// Evaluate the frequency-threshold bounds for one query.
    Bounds(BoundsArgs),
    /// Sweep base selection sizes and report the smallest certified threshold.
    TauMin(TauMinArgs),
    /// Estimate argmax error frequencies under the noisy score model.
    SimulateScores(SimulateArgs),
    /// Run a synthetic-data experiment protocol.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Args)]
struct DesignArgs {
    /// four-blocks | toeplitz | toeplitz-grouped | ten-factors | correlated-informative
    #[arg(long)]
    design: String,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    d: usize,
    /// Number of nonzero coefficients.
    #[arg(long, default_value_t = 20)]
    informative: usize,
    /// gaussian | student-t<df>
    #[arg(long, default_value = "gaussian")]
    noise: String,
}

impl DesignArgs {
    fn spec(&self, snr: f64, seed: u64) -> Result<DesignSpec> {
        let kind = parse_design(&self.design)?;
        let mut spec = DesignSpec::new(kind, self.n, self.d, snr, seed);
        spec.n_informative = self.informative;
        spec.noise = parse_model_noise(&self.noise)?;
        Ok(spec)
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, default_value_t = 2.0)]
    snr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset CSV path.
    #[arg(long, default_value = "data.csv")]
    out: PathBuf,
    /// Ground-truth CSV path (index,beta).
    #[arg(long, default_value = "truth.csv")]
    truth_out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    /// Input dataset CSV.
    #[arg(long)]
    input: PathBuf,
    /// Response column name, or 0-based column index.
    #[arg(long, default_value = "y")]
    response: String,
    /// lasso | cmim
    #[arg(long, default_value = "lasso")]
    selector: String,
    /// Covariates selected per base call.
    #[arg(long, default_value_t = 20)]
    q: usize,
    /// Score-update horizon for cmim (unbounded when omitted).
    #[arg(long)]
    horizon: Option<usize>,
    /// Discretization bins for cmim.
    #[arg(long, default_value_t = 2)]
    bins: usize,
    /// Partition redraws (T).
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    /// Disjoint observation subsamples per iteration (L).
    #[arg(long, default_value_t = 2)]
    subsamples: usize,
    /// Disjoint covariate subsets per iteration (V).
    #[arg(long, default_value_t = 1)]
    subsets: usize,
    /// Selection-frequency threshold.
    #[arg(long, default_value_t = 0.6)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Max concurrent base calls (0 = one per core).
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
    /// Frequency CSV (index,name,frequency,selected_flag); - for stdout.
    #[arg(long, default_value = "-")]
    out: String,
    /// JSON run summary path.
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, short = 'l')]
    subsamples: usize,
    #[arg(long)]
    tau: f64,
    /// Base selection-probability cutoff; alternatively derive it from --q and --d.
    #[arg(long)]
    theta: Option<f64>,
    /// Expected base selection size (with --d, sets theta = q/d).
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    /// Noise covariate count for the expected-false-positive bound.
    #[arg(long)]
    n_noise: Option<usize>,
}

#[derive(Args)]
struct TauMinArgs {
    /// Comma-separated subsample counts, e.g. 2,4,8.
    #[arg(long, short = 'l', default_value = "2,4,8")]
    subsamples: String,
    #[arg(long, default_value_t = 100)]
    q_max: usize,
    #[arg(long, default_value_t = 1000)]
    d: usize,
    /// Defaults to d - 20.
    #[arg(long)]
    n_noise: Option<usize>,
    /// Expected false positives to certify.
    #[arg(long, default_value_t = 1.0)]
    target: f64,
    /// Output CSV (subsamples,q,tau_min); - for stdout.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct SimulateArgs {
    /// Comma-separated noise laws: gaussian | cauchy | student-t<df>.
    #[arg(long, default_value = "gaussian,cauchy,student-t3,student-t5,student-t10")]
    noise: String,
    /// Comma-separated dimension sweep; defaults to a geometric sweep to 10000.
    #[arg(long)]
    dims: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (noise,d,error_frequency); - for stdout.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Top-k precision across a sweep of base selection sizes.
    Precision(PrecisionArgs),
    /// False/true positives at the bound-certified threshold.
    Fptp(FptpArgs),
}

#[derive(Args)]
struct CommonExperimentArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// lasso | cmim
    #[arg(long, default_value = "lasso")]
    base: String,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 2)]
    bins: usize,
    #[arg(long, default_value_t = 2)]
    subsamples: usize,
    #[arg(long, default_value_t = 1)]
    subsets: usize,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    /// Sweep of base selection sizes: a..b or comma-separated values.
    #[arg(long, default_value = "1..100")]
    q_sweep: String,
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-cell long CSV; - for stdout.
    #[arg(long, default_value = "-")]
    out_long: String,
    /// Aggregated CSV (means and standard errors).
    #[arg(long)]
    out_summary: Option<PathBuf>,
}

#[derive(Args)]
struct PrecisionArgs {
    #[command(flatten)]
    common: CommonExperimentArgs,
    /// plain-lasso | sfs
    #[arg(long, default_value = "sfs")]
    method: String,
    #[arg(long, default_value_t = 2.0)]
    snr: f64,
    /// Ranking cutoff.
    #[arg(long, default_value_t = 20)]
    k: usize,
}

#[derive(Args)]
struct FptpArgs {
    #[command(flatten)]
    common: CommonExperimentArgs,
    #[arg(long, default_value_t = 8.0)]
    snr: f64,
    /// Expected false positives to certify per sweep value.
    #[arg(long, default_value_t = 1.0)]
    target_efp: f64,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(args) => cmd_gen(args),
        Command::Select(args) => cmd_select(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::TauMin(args) => cmd_tau_min(args),
        Command::SimulateScores(args) => cmd_simulate(args),
        Command::Experiment(ExperimentCommand::Precision(args)) => cmd_precision(args),
        Command::Experiment(ExperimentCommand::Fptp(args)) => cmd_fptp(args),
    }
}

fn parse_design(s: &str) -> Result<DesignKind> {
    Ok(match s {
        "four-blocks" => DesignKind::FourBlocks,
        "toeplitz" => DesignKind::Toeplitz,
        "toeplitz-grouped" => DesignKind::ToeplitzGrouped,
        "ten-factors" => DesignKind::TenFactors,
        "correlated-informative" => DesignKind::CorrelatedInformative,
        other => bail!("unknown design {other:?}"),
    })
}

fn parse_model_noise(s: &str) -> Result<NoiseKind> {
    if s == "gaussian" {
        return Ok(NoiseKind::Gaussian);
    }
    if let Some(df) = s.strip_prefix("student-t") {
        let df: f64 = df.parse().with_context(|| format!("bad student-t df in {s:?}"))?;
        return Ok(NoiseKind::StudentT { df });
    }
    bail!("unknown noise kind {s:?}")
}

fn parse_score_noise(s: &str) -> Result<NoiseLaw> {
    match s {
        "gaussian" => Ok(NoiseLaw::Gaussian),
        "cauchy" => Ok(NoiseLaw::Cauchy),
        other => {
            if let Some(df) = other.strip_prefix("student-t") {
                let df: f64 =
                    df.parse().with_context(|| format!("bad student-t df in {other:?}"))?;
                Ok(NoiseLaw::StudentT { df })
            } else {
                bail!("unknown noise law {other:?}")
            }
        }
    }
}

fn parse_response(s: &str) -> ResponseColumn {
    match s.parse::<usize>() {
        Ok(i) => ResponseColumn::Index(i),
        Err(_) => ResponseColumn::Name(s.to_string()),
    }
}

/// "a..b" (inclusive) or "v1,v2,...".
fn parse_sweep(s: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().with_context(|| format!("bad sweep start in {s:?}"))?;
        let b: usize = b.trim().parse().with_context(|| format!("bad sweep end in {s:?}"))?;
        if a == 0 || b < a {
            bail!("sweep {s:?} must be a nonempty range of positive values");
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad sweep value {t:?}")))
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad value {t:?}")))
        .collect()
}

/// Writer to a path, or stdout for "-".
fn open_out(path: &str) -> Result<Box<dyn Write>> {
    if path == "-" {
        Ok(Box::new(std::io::stdout().lock()))
    } else {
        let f = std::fs::File::create(path).with_context(|| format!("cannot create {path}"))?;
        Ok(Box::new(f))
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = args.design.spec(args.snr, args.seed)?;
    let (ds, truth) = DesignSampler::new(spec)?.draw(args.seed)?;
    ds.write_csv(&args.out, "y")?;
    truth.write_csv(&args.truth_out)?;
    eprintln!(
        "wrote {} ({} x {}) and {} ({} informative)",
        args.out.display(),
        ds.n(),
        ds.d(),
        args.truth_out.display(),
        truth.informative().len()
    );
    Ok(())
}

fn cmd_select(args: SelectArgs) -> Result<()> {
    let ds = Dataset::load_csv(&args.input, &parse_response(&args.response))?;
    let selector = match args.selector.as_str() {
        "lasso" => BaseSelector::Lasso { q: args.q },
        "cmim" => BaseSelector::Cmim { q: args.q, horizon: args.horizon, bins: args.bins },
        other => bail!("unknown selector {other:?}"),
    };
    let mut cfg = EngineConfig::new(
        args.iterations,
        args.subsamples,
        args.subsets,
        args.tau,
        selector,
        args.seed,
    );
    cfg.parallelism = args.parallelism;

    let start = Instant::now();
    let result = engine::run(&ds, &cfg)?;
    let wall = start.elapsed().as_secs_f64();

    let mut w = csv::Writer::from_writer(open_out(&args.out)?);
    w.write_record(["index", "name", "frequency", "selected_flag"])?;
    for d in 0..ds.d() {
        let name = ds.names().map_or(String::new(), |ns| ns[d].clone());
        let selected = result.selected.binary_search(&d).is_ok();
        w.write_record([
            d.to_string(),
            name,
            result.table.pi(d).to_string(),
            u8::from(selected).to_string(),
        ])?;
    }
    w.flush()?;

    if let Some(path) = &args.summary_out {
        let summary = serde_json::json!({
            "config": result.config,
            "runs": result.table.runs,
            "failures": result.table.failures,
            "selected": result.selected,
            "wall_time_seconds": wall,
        });
        std::fs::write(path, serde_json::to_string_pretty(&summary)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    eprintln!(
        "{} base calls, {} failures, {} covariates selected in {wall:.2}s",
        result.table.runs,
        result.table.failures,
        result.selected.len()
    );
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<()> {
    let theta = match (args.theta, args.q, args.d) {
        (Some(t), _, _) => t,
        (None, Some(q), Some(d)) => q / d as f64,
        _ => bail!("provide --theta, or both --q and --d"),
    };
    let query = BoundQuery { subsamples: args.subsamples, tau: args.tau, theta };
    println!("query: subsamples={} tau={} theta={}", args.subsamples, args.tau, theta);

    let show = |name: &str, r: Result<bounds::Bound, bounds::BoundsError>| match r {
        Ok(b) => {
            let tag = if b.vacuous { " (vacuous)" } else { "" };
            println!("{name}: {:.6e} at l0={}{tag}", b.value, b.l0);
        }
        Err(e) => println!("{name}: n/a ({e})"),
    };
    show("false-positive rate bound", bounds::fp_rate_bound(&query));
    show("false positives vs one base call", bounds::fp_vs_base_bound(&query));
    show("false-negative rate bound", bounds::fn_rate_bound(&query));
    show("false negatives vs one base call", bounds::fn_vs_base_bound(&query));

    if let (Some(q), Some(d)) = (args.q, args.d) {
        let n_noise = args.n_noise.unwrap_or_else(|| d.saturating_sub(20));
        show(
            &format!("expected false positives ({n_noise} exchangeable noise covariates)"),
            bounds::expected_false_positives(args.subsamples, args.tau, q, d, n_noise),
        );
        match bounds::pinned_candidate_rate(args.subsamples, args.tau, q, d) {
            Ok(rate) => println!(
                "pinned-candidate rate (tau*L integral): {:.6e} (x {n_noise} = {:.6e})",
                rate,
                rate * n_noise as f64
            ),
            Err(e) => println!("pinned-candidate rate: n/a ({e})"),
        }
    }
    Ok(())
}

fn cmd_tau_min(args: TauMinArgs) -> Result<()> {
    let ls = parse_usize_list(&args.subsamples)?;
    let n_noise = args.n_noise.unwrap_or_else(|| args.d.saturating_sub(20));
    let mut w = csv::Writer::from_writer(open_out(&args.out)?);
    w.write_record(["subsamples", "q", "tau_min"])?;
    for &l in &ls {
        for q in 1..=args.q_max {
            let value = bounds::tau_min(l, q as f64, args.d, n_noise, args.target)?;
            let cell = match value {
                Some(tau) => tau.to_string(),
                None => "infeasible".to_string(),
            };
            w.write_record([l.to_string(), q.to_string(), cell])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let laws: Vec<(String, NoiseLaw)> = args
        .noise
        .split(',')
        .map(|t| {
            let t = t.trim();
            parse_score_noise(t).map(|law| (t.to_string(), law))
        })
        .collect::<Result<_>>()?;
    let dims = match &args.dims {
        Some(s) => parse_usize_list(s)?,
        None => DEFAULT_DIMS.to_vec(),
    };
    let mut w = csv::Writer::from_writer(open_out(&args.out)?);
    w.write_record(["noise", "d", "error_frequency"])?;
    for (name, law) in laws {
        let mut cfg = ScoreModelConfig::new(law, args.seed);
        cfg.dims = dims.clone();
        cfg.trials = args.trials;
        cfg.noise_scale = args.noise_scale;
        for row in scoremodel::error_frequency(&cfg)? {
            w.write_record([name.clone(), row.dim.to_string(), row.frequency.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn experiment_method(common: &CommonExperimentArgs, method: &str) -> Result<Method> {
    let base = match common.base.as_str() {
        "lasso" => BaseKind::Lasso,
        "cmim" => BaseKind::Cmim { horizon: common.horizon, bins: common.bins },
        other => bail!("unknown base method {other:?}"),
    };
    Ok(match method {
        "plain-lasso" => Method::PlainLasso,
        "sfs" => Method::Sfs {
            subsamples: common.subsamples,
            subsets: common.subsets,
            iterations: common.iterations,
            base,
        },
        other => bail!("unknown method {other:?}"),
    })
}

fn method_columns(method: &Method) -> (String, String, String) {
    match method {
        Method::PlainLasso => ("plain_lasso".into(), String::new(), String::new()),
        Method::Sfs { subsamples, subsets, .. } => {
            ("sfs".into(), subsamples.to_string(), subsets.to_string())
        }
    }
}

fn write_long_header(w: &mut csv::Writer<Box<dyn Write>>) -> Result<()> {
    w.write_record(["design", "method", "subsamples", "subsets", "q", "repetition", "metric", "value"])?;
    Ok(())
}

fn write_summary(
    path: &PathBuf,
    design: &str,
    method: &Method,
    groups: &[(&str, &[harness::Aggregate])],
) -> Result<()> {
    let (m, l, v) = method_columns(method);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["design", "method", "subsamples", "subsets", "q", "metric", "mean", "std_error", "n"])?;
    for (metric, aggs) in groups {
        for a in *aggs {
            w.write_record([
                design.to_string(),
                m.clone(),
                l.clone(),
                v.clone(),
                a.q.to_string(),
                (*metric).to_string(),
                a.mean.to_string(),
                a.std_error.to_string(),
                a.n.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_precision(args: PrecisionArgs) -> Result<()> {
    let common = &args.common;
    let method = experiment_method(common, &args.method)?;
    let spec = ExperimentSpec {
        design: common.design.spec(args.snr, common.seed)?,
        method,
        q_sweep: parse_sweep(&common.q_sweep)?,
        k: args.k,
        repetitions: common.repetitions,
        tau_policy: TauPolicy::Fixed(0.5),
        seed: common.seed,
    };
    let result = harness::run_precision(&spec)?;

    let (m, l, v) = method_columns(&method);
    let mut w = csv::Writer::from_writer(open_out(&common.out_long)?);
    write_long_header(&mut w)?;
    for r in &result.records {
        w.write_record([
            common.design.design.clone(),
            m.clone(),
            l.clone(),
            v.clone(),
            r.q.to_string(),
            r.repetition.to_string(),
            "precision_at_k".to_string(),
            r.hits.to_string(),
        ])?;
    }
    w.flush()?;
    if let Some(path) = &common.out_summary {
        write_summary(
            path,
            &common.design.design,
            &method,
            &[("precision_at_k", &result.summary)],
        )?;
    }
    Ok(())
}

fn cmd_fptp(args: FptpArgs) -> Result<()> {
    let common = &args.common;
    let method = experiment_method(common, "sfs")?;
    let spec = ExperimentSpec {
        design: common.design.spec(args.snr, common.seed)?,
        method,
        q_sweep: parse_sweep(&common.q_sweep)?,
        k: 20.min(common.design.d),
        repetitions: common.repetitions,
        tau_policy: TauPolicy::FromFpBound { target_efp: args.target_efp },
        seed: common.seed,
    };
    let result = harness::run_fp_tp(&spec)?;
    for q in &result.skipped {
        eprintln!("q={q}: no feasible threshold at target {} -- skipped", args.target_efp);
    }

    let (m, l, v) = method_columns(&method);
    let mut w = csv::Writer::from_writer(open_out(&common.out_long)?);
    write_long_header(&mut w)?;
    for r in &result.records {
        for (metric, value) in [
            ("false_positives", r.false_positives.to_string()),
            ("true_positives", r.true_positives.to_string()),
            ("tau", r.tau.to_string()),
        ] {
            w.write_record([
                common.design.design.clone(),
                m.clone(),
                l.clone(),
                v.clone(),
                r.q.to_string(),
                r.repetition.to_string(),
                metric.to_string(),
                value,
            ])?;
        }
    }
    w.flush()?;
    if let Some(path) = &common.out_summary {
        write_summary(
            path,
            &common.design.design,
            &method,
            &[
                ("false_positives", &result.fp_summary),
                ("true_positives", &result.tp_summary),
            ],
        )?;
    }
    Ok(())
}
