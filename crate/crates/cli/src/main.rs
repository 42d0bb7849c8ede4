use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::seq::index::sample as sample_indices;
use stable_sse::harness::{
    format_table, rmse_curve, run_experiment, write_aggregates, write_curve, write_records,
    Estimator, ExperimentSpec,
};
use stable_sse::mqe::{
    build_mqe_table, default_alphas, default_betas, MqeTable, DEFAULT_MC_SIZE, DEFAULT_TABLE_SEED,
};
use stable_sse::seed::substream;
use stable_sse::split::{boundary_rate, sse_estimate, SplitConfig, DEFAULT_B, DEFAULT_K};
use stable_sse::stable::{sample_stable, StableParams};
use stable_sse::{permutation_count, Error, TGrid};

const EXIT_USAGE: u8 = 2;
const EXIT_ALL_FAILED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "stable-sse", version, about = "Split-sample estimation of the stable index alpha")]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "STABLE_SSE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate alpha from a data file.
    Estimate(EstimateArgs),
    /// Monte-Carlo bias/RMSE experiment for one configuration.
    Simulate(SimulateArgs),
    /// RMSE against alpha over a sweep.
    Curve(CurveArgs),
    /// Build the McCulloch lookup table.
    MqeTable(MqeTableArgs),
    /// Count the distinct X/Y splits of n + 2m observations.
    PermCount(PermCountArgs),
    /// Draw stable variates.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Newline-delimited values; lines starting with `#` are ignored.
    #[arg(long, short)]
    input: PathBuf,
    /// X-sample size (default: total - 2m).
    #[arg(long)]
    n: Option<usize>,
    /// Number of Y pairs (default: total / 3).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "B", default_value_t = DEFAULT_B)]
    b_splits: usize,
    /// Quantile levels j/(k+1); `--k 3` is more robust for very heavy tails.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the per-split scale estimates here as CSV.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Total sample size n + 2m, split with m = size / 3.
    #[arg(long, default_value_t = 300)]
    size: usize,
    #[arg(long = "B", default_value_t = DEFAULT_B)]
    b_splits: usize,
    /// Split-sample variants, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "9")]
    k: Vec<usize>,
    /// Replications.
    #[arg(long = "N", default_value_t = 500)]
    replications: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Any of `sse`, `mqe`.
    #[arg(long, value_delimiter = ',', default_value = "sse")]
    estimators: Vec<String>,
    /// McCulloch table file (default: the bundled table).
    #[arg(long)]
    mqe_table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    alpha: f64,
    #[command(flatten)]
    design: DesignArgs,
    /// Directory for records.csv and aggregates.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MqeTableArgs {
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MC_SIZE)]
    mc_size: usize,
    #[arg(long, default_value_t = DEFAULT_TABLE_SEED)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PermCountArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: u64,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 300)]
    count: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Curve(a) => cmd_curve(a),
        Command::MqeTable(a) => cmd_mqe_table(a),
        Command::PermCount(a) => cmd_perm_count(a),
        Command::Sample(a) => cmd_sample(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_values(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| match l.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Failure::usage(format!(
                "{}:{}: not a finite number: {l:?}",
                path.display(),
                i + 1
            ))),
        })
        .collect()
}

fn cmd_estimate(args: EstimateArgs) -> CmdResult {
    let mut data = read_values(&args.input)?;
    let len = data.len();
    let m = args.m.unwrap_or(len / 3);
    let n = args.n.unwrap_or_else(|| len.saturating_sub(2 * m));
    let needed = n + 2 * m;
    if len < needed {
        return Err(Failure::usage(format!(
            "{} holds {len} values but n + 2m = {needed}",
            args.input.display()
        )));
    }
    let mut notes = String::new();
    if len > needed {
        let mut rng = substream(args.seed, u64::MAX);
        let mut keep = sample_indices(&mut rng, len, needed).into_vec();
        keep.sort_unstable();
        data = keep.into_iter().map(|i| data[i]).collect();
        let _ = writeln!(notes, "subsampled {needed} of {len} values at random");
    }
    let grid = TGrid::equispaced(args.k)?;
    let config = SplitConfig::new(n, m, args.b_splits, grid, args.seed)?;
    let est = match sse_estimate(&data, &config) {
        Ok(est) => est,
        Err(Error::Estimation(msg)) => {
            return Err(Failure {
                code: EXIT_ALL_FAILED,
                message: msg,
            })
        }
        Err(e) => return Err(e.into()),
    };

    let mut sorted = est.sigma_hats.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let (at0, at2) = boundary_rate(&est)?;
    let mut report = notes;
    let _ = writeln!(report, "observations   {needed} (n = {n}, m = {m})");
    let _ = writeln!(report, "splits         B = {}, k = {}, seed = {}", args.b_splits, args.k, args.seed);
    let _ = writeln!(report, "failed splits  {}", est.failures);
    let _ = writeln!(report, "alpha1         {:.6}", est.alpha1);
    let _ = writeln!(report, "alpha2         {:.6}", est.alpha2);
    let _ = writeln!(report, "alpha3         {:.6}", est.alpha3);
    let _ = writeln!(
        report,
        "sigma_hat      mean {:.6}, median {:.6}, min {:.6}, max {:.6}",
        est.sigma_bar,
        sorted[(sorted.len() - 1) / 2],
        sorted[0],
        sorted[sorted.len() - 1]
    );
    let _ = writeln!(report, "boundary       at 0: {:.2}%, at 2: {:.2}%", 100.0 * at0, 100.0 * at2);
    if est.unreliable {
        let _ = writeln!(report, "warning        more than half of the splits failed");
    }
    print!("{report}");

    if let Some(path) = args.output {
        let mut out = String::from("split,sigma_hat,alpha_hat\n");
        for (i, (s, a)) in est.sigma_hats.iter().zip(&est.alpha_hats).enumerate() {
            let _ = writeln!(out, "{i},{s},{a}");
        }
        std::fs::write(&path, out)?;
    }
    Ok(())
}

fn estimators(design: &DesignArgs) -> Result<Vec<Estimator>, Failure> {
    let mut out = Vec::new();
    for name in &design.estimators {
        match name.trim() {
            "sse" => out.extend(design.k.iter().map(|&k| Estimator::Sse { k })),
            "mqe" => out.push(Estimator::Mqe),
            other => return Err(Failure::usage(format!("unknown estimator {other:?}"))),
        }
    }
    Ok(out)
}

fn build_spec(alpha: f64, design: &DesignArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = ExperimentSpec::new(
        alpha,
        design.beta,
        design.size,
        design.b_splits,
        estimators(design)?,
        design.replications,
        design.seed,
    )?;
    if let Some(path) = &design.mqe_table {
        spec.mqe_table = Some(MqeTable::load(path)?);
    }
    Ok(spec)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", path.display())))
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult {
    let spec = build_spec(args.alpha, &args.design)?;
    let result = run_experiment(&spec)?;
    print!("{}", format_table(&result));
    if let Some(dir) = args.out_dir {
        std::fs::create_dir_all(&dir)?;
        write_records(&result.records, create(&dir.join("records.csv"))?)?;
        write_aggregates(&result.config_id, &result.aggregates, create(&dir.join("aggregates.csv"))?)?;
    }
    Ok(())
}

fn cmd_curve(args: CurveArgs) -> CmdResult {
    let mut spec = build_spec(args.alphas[0], &args.design)?;
    spec.alpha_sweep = Some(args.alphas.clone());
    let rows = rmse_curve(&spec)?;
    match args.output {
        Some(path) => write_curve(&rows, create(&path)?)?,
        None => write_curve(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_mqe_table(args: MqeTableArgs) -> CmdResult {
    let table = build_mqe_table(&default_alphas(), &default_betas(), args.mc_size, args.seed)?;
    table.save(&args.output)?;
    println!(
        "wrote {} ({} x {} cells, mc_size = {})",
        args.output.display(),
        table.alphas().len(),
        table.betas().len(),
        args.mc_size
    );
    Ok(())
}

/// `d.dd x 10^e` rendering of a decimal digit string.
fn scientific(digits: &str) -> String {
    let exp = digits.len() - 1;
    let lead: u64 = digits[..digits.len().min(4)].parse().unwrap_or(0);
    let lead = lead * 10u64.pow(4 - digits.len().min(4) as u32);
    let mut mantissa = (lead + 5) / 10;
    let mut exp = exp;
    if mantissa >= 1000 {
        mantissa /= 10;
        exp += 1;
    }
    format!("{}.{:02}e{exp}", mantissa / 100, mantissa % 100)
}

fn cmd_perm_count(args: PermCountArgs) -> CmdResult {
    if args.m == 0 {
        return Err(Failure::usage("m must be at least 1"));
    }
    let digits = permutation_count(args.n, args.m).to_string();
    println!("{digits}");
    println!("{}", scientific(&digits));
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> CmdResult {
    let params = StableParams::new(args.alpha, args.beta, args.gamma, args.delta)?;
    let values = sample_stable(&params, args.count, &mut substream(args.seed, 0))?;
    let mut out = String::new();
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    match args.output {
        Some(path) => std::fs::write(path, out)?,
        None => print!("{out}"),
    }
    Ok(())
}
