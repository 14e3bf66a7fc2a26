use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gqldgm::bounds::{beta_for, binary_entropy};
use gqldgm::code::{generate_regular, load_code, save_code, LdgmCode, QuantizerMap};
use gqldgm::decimation::{quantize, DecimationParams, PercentageBase};
use gqldgm::experiment::{
    bernoulli_source, cmd_bounds, preset, preset_bounds, read_csv, write_csv, write_plot,
    ExperimentConfig, ExperimentRecord,
};
use gqldgm::oracle::{enumerate_generalized, exact_marginals, optimal_distortion, OracleParams};
use gqldgm::{Error, Result};

#[derive(Parser)]
#[command(
    name = "gqldgm",
    version,
    about = "Lossy binary source coding with GF(q)-quantized LDGM codes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print rate, one-density, p_s, distortion bounds and beta as JSON.
    Bounds(BoundsArgs),
    /// Generate a random regular code and save it.
    GenCode(GenCodeArgs),
    /// Quantize one source block and print a JSON record.
    Quantize(QuantizeArgs),
    /// Run a batch experiment and write a CSV of records.
    Experiment(ExperimentArgs),
    /// Exhaustive optimum and exact marginals for a tiny code.
    Oracle(OracleArgs),
    /// Convert experiment CSV into whitespace-separated plot data.
    EmitPlot(EmitPlotArgs),
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, conflicts_with_all = ["q", "qm", "d_c", "d_v"])]
    preset: Option<String>,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    qm: Option<u32>,
    #[arg(long)]
    d_c: Option<usize>,
    #[arg(long)]
    d_v: Option<usize>,
    /// Source probability; derived from the quantizer density when omitted.
    #[arg(long)]
    p_s: Option<f64>,
}

#[derive(Args)]
struct GenCodeArgs {
    #[arg(long)]
    q: u32,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d_c: usize,
    #[arg(long)]
    d_v: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SourceArgs {
    /// Text file of 0/1 characters; whitespace is ignored.
    #[arg(long, conflicts_with = "random")]
    source: Option<PathBuf>,
    /// Draw an i.i.d. source with this probability of ones.
    #[arg(long)]
    random: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TuningArgs {
    #[arg(long)]
    beta: Option<f64>,
    /// Source probability used to derive beta when --beta is absent.
    #[arg(long)]
    p_s: Option<f64>,
    #[arg(long)]
    w_i: Option<f64>,
    #[arg(long)]
    w_s: Option<f64>,
    #[arg(long)]
    mp_th: Option<f64>,
    #[arg(long)]
    mp_max: Option<usize>,
    #[arg(long)]
    b_m: Option<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, value_parser = parse_base)]
    percentage_base: Option<PercentageBase>,
}

fn parse_base(s: &str) -> std::result::Result<PercentageBase, String> {
    match s {
        "original" => Ok(PercentageBase::Original),
        "remaining" => Ok(PercentageBase::Remaining),
        _ => Err(format!("expected original or remaining, got {s:?}")),
    }
}

#[derive(Args)]
struct QuantizeArgs {
    #[arg(long)]
    code: PathBuf,
    #[command(flatten)]
    source: SourceArgs,
    /// Quantizer threshold Q_m.
    #[arg(long)]
    qm: u32,
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long)]
    emit_z: Option<PathBuf>,
    #[arg(long)]
    emit_xhat: Option<PathBuf>,
    /// Also run the exhaustive optimum and report the gap.
    #[arg(long)]
    oracle_check: bool,
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON configuration file.
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Block length for --preset runs.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    codes: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the summary JSON here; it is always printed.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    code: PathBuf,
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    qm: u32,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.10f64.exp())]
    w_s: f64,
    #[arg(long, default_value_t = 0.05f64.exp())]
    w_i: f64,
    /// Also enumerate generalized codewords and print exact marginals.
    #[arg(long)]
    marginals: bool,
    #[arg(long, default_value_t = 10_000_000)]
    budget: u64,
}

#[derive(Args)]
struct EmitPlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Rate at which the bound curves are drawn.
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Bounds(a) => bounds(a),
        Command::GenCode(a) => {
            let code = generate_regular(a.q, a.n, a.d_c, a.d_v, a.seed)?;
            save_code(&code, &a.out)?;
            log::info!(
                "wrote n = {}, m = {} to {}",
                code.n(),
                code.m(),
                a.out.display()
            );
            Ok(())
        }
        Command::Quantize(a) => quantize_cmd(a),
        Command::Experiment(a) => experiment(a),
        Command::Oracle(a) => oracle(a),
        Command::EmitPlot(a) => {
            let input = File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
            let records = read_csv(input)?;
            let out = create(&a.out)?;
            write_plot(out, &records, a.rate)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn bounds(a: BoundsArgs) -> Result<()> {
    let point = match a.preset {
        Some(name) => {
            let p = preset(&name)?;
            match a.p_s {
                Some(p_s) => cmd_bounds(p.q, p.qm, p.d_c, p.d_v, Some(p_s))?,
                None => preset_bounds(&p)?,
            }
        }
        None => {
            let need = |v: Option<usize>, what: &str| {
                v.ok_or_else(|| Error::Usage(format!("--{what} is required without --preset")))
            };
            let q = need(a.q.map(|v| v as usize), "q")? as u32;
            let qm = need(a.qm.map(|v| v as usize), "qm")? as u32;
            cmd_bounds(q, qm, need(a.d_c, "d-c")?, need(a.d_v, "d-v")?, a.p_s)?
        }
    };
    print_json(&point)
}

/// Reads a 0/1 text file.
fn read_source(path: &Path) -> Result<Vec<u8>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.chars()
        .filter(|c| !c.is_whitespace())
        .enumerate()
        .map(|(k, c)| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::Parse {
                context: path.display().to_string(),
                message: format!("symbol {k} is {c:?}, expected 0 or 1"),
            }),
        })
        .collect()
}

fn load_source(a: &SourceArgs, n: usize) -> Result<Vec<u8>> {
    let s = match (&a.source, a.random) {
        (Some(path), None) => read_source(path)?,
        (None, Some(p)) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Usage(format!("--random {p} is not a probability")));
            }
            bernoulli_source(n, p, a.seed)
        }
        _ => {
            return Err(Error::Usage(
                "give exactly one of --source or --random".into(),
            ))
        }
    };
    if s.len() != n {
        return Err(Error::Usage(format!(
            "source has {} symbols but the code has n = {n}",
            s.len()
        )));
    }
    Ok(s)
}

fn write_symbols(path: &Path, values: &[u32]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    for v in values {
        writeln!(out, "{v}").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[derive(Serialize)]
struct QuantizeReport {
    #[serde(flatten)]
    record: ExperimentRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_distortion: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_gap: Option<f64>,
}

fn decimation_params(
    t: &TuningArgs,
    code: &LdgmCode,
    source: &[u8],
    random: Option<f64>,
) -> Result<(DecimationParams, f64)> {
    // p_s: explicit, else the generator probability, else the empirical
    // density folded into (0, 1/2]
    let p_s = t.p_s.or(random).unwrap_or_else(|| {
        let ones = source.iter().filter(|&&b| b == 1).count() as f64 / source.len().max(1) as f64;
        ones.min(1.0 - ones)
    });
    let beta = match t.beta {
        Some(b) => b,
        None => {
            if binary_entropy(p_s) <= code.rate() {
                return Err(Error::Config(format!(
                    "rate {:.4} is at least H(p_s) for p_s = {p_s:.4}; pass --beta",
                    code.rate()
                )));
            }
            beta_for(code.rate(), p_s)?
        }
    };
    let mut params = DecimationParams::new(beta);
    params.w_i = t.w_i.unwrap_or(params.w_i);
    params.w_s = t.w_s.unwrap_or(params.w_s);
    params.mp_threshold = t.mp_th.unwrap_or(params.mp_threshold);
    params.mp_max_iterations = t.mp_max.unwrap_or(params.mp_max_iterations);
    params.bias_threshold = t.b_m.unwrap_or(params.bias_threshold);
    params.min_fraction = t.r_min.unwrap_or(params.min_fraction);
    params.max_fraction = t.r_max.unwrap_or(params.max_fraction);
    params.percentage_base = t.percentage_base.unwrap_or(params.percentage_base);
    params.validate()?;
    Ok((params, p_s))
}

fn quantize_cmd(a: QuantizeArgs) -> Result<()> {
    let code = load_code(&a.code)?;
    let qm = QuantizerMap::new(code.q(), a.qm).map_err(|e| Error::Config(e.to_string()))?;
    let source = load_source(&a.source, code.n())?;
    let (params, p_s) = decimation_params(&a.tuning, &code, &source, a.source.random)?;

    let start = Instant::now();
    let out = quantize(&code, &qm, &source, &params)?;
    let seconds = start.elapsed().as_secs_f64();

    if let Some(path) = &a.emit_z {
        write_symbols(path, &out.z)?;
    }
    if let Some(path) = &a.emit_xhat {
        write_symbols(path, &out.x_hat)?;
    }
    let oracle_distortion = if a.oracle_check {
        Some(optimal_distortion(&code, &qm, &source, a.budget)?.1)
    } else {
        None
    };
    let report = QuantizeReport {
        record: ExperimentRecord {
            set_id: "custom".into(),
            code_id: 0,
            run_id: 0,
            n: code.n(),
            q: code.q(),
            qm: a.qm,
            rate: code.rate(),
            p_s,
            beta: params.beta,
            distortion: Some(out.distortion),
            bp_iterations: Some(out.stats.bp_iterations),
            rounds: Some(out.stats.rounds),
            degeneracies: Some(out.stats.degeneracies),
            seconds: Some(seconds),
            seed: a.source.seed,
            error: String::new(),
        },
        oracle_distortion,
        oracle_gap: oracle_distortion.map(|d| out.distortion - d),
    };
    print_json(&report)
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut config = match (&a.config, &a.preset) {
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::from_preset(name, a.n),
        _ => return Err(Error::Usage("give a config file or --preset".into())),
    };
    config.num_codes = a.codes.or(config.num_codes);
    config.runs_per_code = a.runs.or(config.runs_per_code);
    config.master_seed = a.seed.unwrap_or(config.master_seed);
    let experiment = config.resolve()?;
    let records = experiment.run();
    write_csv(create(&a.out)?, &records)?;
    let summary = experiment.summarize(&records);
    if let Some(path) = &a.summary {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &summary)?;
        writeln!(out).map_err(|e| Error::io(path, e))?;
    }
    print_json(&summary)
}

#[derive(Serialize)]
struct OracleReport {
    z: Vec<u32>,
    distortion: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    generalized_codewords: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    marginals: Option<Vec<MarginalRow>>,
}

#[derive(Serialize)]
struct MarginalRow {
    star: f64,
    symbols: Vec<f64>,
}

fn oracle(a: OracleArgs) -> Result<()> {
    let code = load_code(&a.code)?;
    let qm = QuantizerMap::new(code.q(), a.qm).map_err(|e| Error::Config(e.to_string()))?;
    let source = load_source(&a.source, code.n())?;
    let (z, distortion) = optimal_distortion(&code, &qm, &source, a.budget)?;
    let mut report = OracleReport {
        z,
        distortion,
        generalized_codewords: None,
        marginals: None,
    };
    if a.marginals {
        let params = OracleParams {
            beta: a.beta,
            w_s: a.w_s,
            w_i: a.w_i,
        };
        let en = enumerate_generalized(&code, &qm, &source, params, a.budget)?;
        report.generalized_codewords = Some(en.entries.len());
        report.marginals = Some(
            exact_marginals(&en)?
                .into_iter()
                .map(|m| MarginalRow {
                    star: m.p_star,
                    symbols: m.p_symbol,
                })
                .collect(),
        );
    }
    print_json(&report)
}
