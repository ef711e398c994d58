use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use layercert::bench::run_all;
use layercert::format::{
    load_network, load_points, network_to_json, read_records, write_points, write_records, Point, RecordFormat,
};
use layercert::gen::{parse_arch, random_points, seeded_network};
use layercert::idx::read_idx;
use layercert::profile::profile;
use layercert_core::{
    brute_force_over, enumerate_regions_with_cap, Method, Norm, RestrictionMode, SearchConfig, SeenPolicy, DEFAULT_CAP,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "layercert", version, about = "Exact lp robustness verification of ReLU classifiers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify every input of a points file and write one record per input.
    Verify(VerifyArgs),
    /// Write a random network with seeded weights.
    GenNet(GenNetArgs),
    /// Write random input points.
    GenPoints(GenPointsArgs),
    /// Enumerate all regions of a small network and compute exact distances.
    Oracle(OracleArgs),
    /// Cumulative solved-instance curves from record files.
    Profile(ProfileArgs),
    /// Convert IDX image (and label) files to a points CSV.
    Idx2csv(IdxArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    points: PathBuf,
    #[arg(long, default_value = "layercert-both", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value = "inf", value_parser = parse_norm)]
    norm: Norm,
    /// Defaults to 0.3 for inf and 3.0 otherwise.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = 1800.0)]
    time_limit: f64,
    /// Defaults to `initial` for the crown and both methods, `none` otherwise.
    #[arg(long, value_parser = parse_restriction)]
    restriction: Option<RestrictionMode>,
    #[arg(long, default_value = "push", value_parser = parse_seen)]
    seen_policy: SeenPolicy,
    /// Keep every region constraint instead of dropping those outside the ball.
    #[arg(long)]
    no_domain_pruning: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(clap::Args)]
struct GenNetArgs {
    /// Hidden layers, e.g. `2x[10]` or `[10,5]`.
    #[arg(long)]
    arch: String,
    #[arg(long)]
    input_dim: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GenPointsArgs {
    /// Labels each point with the network's prediction; also fixes the dimension.
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    low: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    high: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct OracleArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long, default_value = "2", value_parser = parse_norm)]
    norm: Norm,
    /// Largest total hidden neuron count to enumerate.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ProfileArgs {
    /// Record files (CSV or JSON); records are grouped by method.
    #[arg(required = true)]
    records: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct IdxArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
        format!("unknown method {s:?}; expected one of {}", names.join(", "))
    })
}

fn parse_norm(s: &str) -> Result<Norm, String> {
    Norm::parse(s).ok_or_else(|| format!("unknown norm {s:?}; expected 1, 2 or inf"))
}

fn parse_restriction(s: &str) -> Result<RestrictionMode, String> {
    RestrictionMode::parse(s).ok_or_else(|| format!("unknown restriction {s:?}; expected none, initial or every-node"))
}

fn parse_seen(s: &str) -> Result<SeenPolicy, String> {
    SeenPolicy::parse(s).ok_or_else(|| format!("unknown seen policy {s:?}; expected push or pop"))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn cmd_verify(a: VerifyArgs) -> Result<ExitCode> {
    let net = load_network(&a.net).with_context(|| format!("loading {}", a.net.display()))?;
    let points = load_points(&a.points, net.input_dim()).with_context(|| format!("loading {}", a.points.display()))?;
    let mut cfg = SearchConfig::new(a.method, a.norm);
    cfg.time_limit = a.time_limit;
    cfg.seen_policy = a.seen_policy;
    cfg.domain_pruning = !a.no_domain_pruning;
    if let Some(r) = a.restriction {
        cfg.restriction = r;
    }
    cfg.validate().map_err(anyhow::Error::msg)?;
    let radius = a.radius.unwrap_or(if a.norm == Norm::Linf { 0.3 } else { 3.0 });
    if !(radius > 0.0 && radius.is_finite()) {
        bail!("radius must be positive and finite");
    }
    for (i, p) in points.iter().enumerate() {
        if let Some(label) = p.label {
            let predicted = net.classify(&p.x)?;
            if predicted != label {
                eprintln!(
                    "warning: input {i} is labelled {label} but classified as {predicted}; verifying the prediction"
                );
            }
        }
    }
    let inputs: Vec<Vec<f64>> = points.into_iter().map(|p| p.x).collect();
    let outcomes = run_all(&net, &inputs, radius, &cfg, a.jobs);
    let mut records = Vec::with_capacity(outcomes.len());
    for o in &outcomes {
        match o.record(&cfg) {
            Some(r) => records.push(r),
            None => bail!("input {}: {}", o.input_id, o.result.as_ref().unwrap_err()),
        }
    }
    let format = match a.format {
        FormatArg::Csv => RecordFormat::Csv,
        FormatArg::Json => RecordFormat::Json,
    };
    let mut out = output(a.out.as_deref())?;
    write_records(&mut out, &records, format)?;
    out.flush()?;
    if outcomes.iter().any(|o| o.is_numerical_failure()) {
        return Ok(ExitCode::from(2));
    }
    if outcomes.iter().any(|o| o.timed_out()) {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_net(a: GenNetArgs) -> Result<ExitCode> {
    let widths = parse_arch(&a.arch)?;
    if a.input_dim == 0 {
        bail!("input dimension must be positive");
    }
    if a.classes < 2 {
        bail!("need at least two classes");
    }
    let net = seeded_network(a.seed, a.input_dim, &widths, a.classes);
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "{}", network_to_json(&net))?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_points(a: GenPointsArgs) -> Result<ExitCode> {
    let net = a.net.as_deref().map(load_network).transpose()?;
    let dim = match (&net, a.dim) {
        (Some(n), Some(d)) if n.input_dim() != d => {
            bail!("--dim {d} differs from the network input dimension {}", n.input_dim())
        }
        (Some(n), _) => n.input_dim(),
        (None, Some(d)) => d,
        (None, None) => bail!("give --net or --dim"),
    };
    if !(a.low <= a.high) {
        bail!("--low must not exceed --high");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut points = Vec::with_capacity(a.count);
    for x in random_points(&mut rng, dim, a.count, a.low, a.high) {
        let label = net.as_ref().map(|n| n.classify(&x)).transpose()?;
        points.push(Point { x, label });
    }
    let mut out = output(a.out.as_deref())?;
    write_points(&mut out, &points)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct OracleInput {
    input_id: usize,
    class: usize,
    /// `null` when no region contains a decision boundary.
    distance: Option<f64>,
    point: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct OracleReport {
    norm: String,
    neurons: usize,
    regions: usize,
    inputs: Vec<OracleInput>,
}

fn cmd_oracle(a: OracleArgs) -> Result<ExitCode> {
    let net = load_network(&a.net)?;
    let points = match &a.points {
        Some(p) => load_points(p, net.input_dim())?,
        None => Vec::new(),
    };
    let catalog = enumerate_regions_with_cap(&net, a.cap).map_err(anyhow::Error::msg)?;
    let mut inputs = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let y = net.classify(&p.x)?;
        let bf = brute_force_over(&net, &catalog, &p.x, y, a.norm).map_err(anyhow::Error::msg)?;
        inputs.push(OracleInput {
            input_id: i,
            class: y,
            distance: bf.distance.is_finite().then_some(bf.distance),
            point: bf.point,
        });
    }
    let report =
        OracleReport { norm: a.norm.name().to_string(), neurons: net.total_neurons(), regions: catalog.len(), inputs };
    let mut out = output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_profile(a: ProfileArgs) -> Result<ExitCode> {
    let mut records = Vec::new();
    for p in &a.records {
        let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        records.extend(read_records(f).with_context(|| format!("reading {}", p.display()))?);
    }
    let prof = profile(&records)?;
    let mut out = output(a.out.as_deref())?;
    out.write_all(prof.to_csv().as_bytes())?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_idx2csv(a: IdxArgs) -> Result<ExitCode> {
    let images = read_idx(File::open(&a.images).with_context(|| format!("opening {}", a.images.display()))?)?;
    let labels = match &a.labels {
        Some(p) => Some(read_idx(File::open(p).with_context(|| format!("opening {}", p.display()))?)?),
        None => None,
    };
    if let Some(l) = &labels {
        if l.items() != images.items() {
            bail!("{} images but {} labels", images.items(), l.items());
        }
    }
    let n = a.limit.map_or(images.items(), |k| k.min(images.items()));
    let points: Vec<Point> =
        (0..n).map(|i| Point { x: images.scaled(i), label: labels.as_ref().map(|l| usize::from(l.data[i])) }).collect();
    let mut out = output(a.out.as_deref())?;
    write_points(&mut out, &points)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::GenNet(a) => cmd_gen_net(a),
        Cmd::GenPoints(a) => cmd_gen_points(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Profile(a) => cmd_profile(a),
        Cmd::Idx2csv(a) => cmd_idx2csv(a),
    };
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
