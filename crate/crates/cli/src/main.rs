//! `shc`: significance testing of hierarchical clustering from the command line.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 on data
//! or I/O errors. `SHC_THREADS` caps the worker count; results do not depend
//! on it.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shc::engine::{PValueKind, ShcConfig, ShcVariant};
use shc::io::{read_expression, read_matrix, write_expression, Orientation};
use shc::preprocess::{preprocess, PreprocessConfig};
use shc::report::{to_json, write_report, ReportFormat};
use shc::sim::{emit_table, run_study, summarize, DesignKind, MixtureDesign, Spike};
use shc::{EigenMethod, LinkageKind, ShcError};

#[derive(Parser, Debug)]
#[command(name = "shc", version, about = "Statistical significance of hierarchical clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cluster a data matrix and test every eligible node of the dendrogram.
    Test(TestArgs),
    /// Normalize, log-transform and filter a genes-by-samples expression matrix.
    Preprocess(PreprocessArgs),
    /// Run a simulation study and write a one-row summary table.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct TestOptions {
    /// Test variant: shc1, shc2-l or shc2-2.
    #[arg(long, default_value = "shc2-2", value_parser = parse::<ShcVariant>)]
    variant: ShcVariant,
    /// Linkage: ward, single, complete or average.
    #[arg(long, default_value = "ward", value_parser = parse::<LinkageKind>)]
    linkage: LinkageKind,
    /// Family-wise significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Monte Carlo null datasets per tested node.
    #[arg(long, default_value_t = 100)]
    n_sim: usize,
    /// Nodes with fewer observations are not tested.
    #[arg(long, default_value_t = 10)]
    n_min: usize,
    /// Which p-value drives rejection: empirical or gaussian.
    #[arg(long = "p-value", default_value = "empirical", value_parser = parse::<PValueKind>)]
    p_value: PValueKind,
    /// Master random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TestOptions {
    fn config(&self, eigen_method: EigenMethod) -> ShcConfig {
        ShcConfig {
            variant: self.variant,
            n_sim: self.n_sim,
            alpha: self.alpha,
            n_min: self.n_min,
            eigen_method,
            linkage: self.linkage,
            seed: self.seed,
            p_value: self.p_value,
            ..ShcConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct TestArgs {
    /// CSV or TSV matrix (delimiter chosen by extension).
    matrix: PathBuf,
    #[command(flatten)]
    opts: TestOptions,
    /// Null eigenvalue estimator: soft, hard or sample.
    #[arg(long, default_value = "soft", value_parser = parse::<EigenMethod>)]
    eigen: EigenMethod,
    /// Whether file rows are observations or genes (genes-by-samples input).
    #[arg(long, default_value = "observations", value_parser = parse::<Orientation>)]
    rows_are: Orientation,
    /// JSON report path; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG dendrogram path.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Newick tree path.
    #[arg(long)]
    newick: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    /// Genes-by-samples matrix with gene ids in the first column.
    matrix: PathBuf,
    /// Upper-quartile normalize each sample.
    #[arg(long)]
    uq: bool,
    /// Replace zeros by the smallest nonzero value.
    #[arg(long)]
    replace_zeros: bool,
    /// Skip the log2 transform.
    #[arg(long)]
    no_log: bool,
    /// Keep only the most variable genes by MAD.
    #[arg(long)]
    top_genes: Option<usize>,
    /// Select genes before rather than after the log transform.
    #[arg(long)]
    filter_before_log: bool,
    /// Output path.
    #[arg(long, default_value = "processed.tsv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Design: spike-null, two, line3, triangle3, square4, tetra4, rectangle4, stretched-tetra4.
    #[arg(long, value_parser = parse::<DesignKind>)]
    design: DesignKind,
    /// Dimension.
    #[arg(long)]
    p: usize,
    /// Distance between neighboring component means.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Observations per component.
    #[arg(long, default_value_t = 50)]
    n_per_k: usize,
    /// Spiked coordinates for the spike-null design.
    #[arg(long, default_value_t = 1)]
    spike_w: usize,
    /// Variance of the spiked coordinates.
    #[arg(long, default_value_t = 100.0)]
    spike_v: f64,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    /// Null eigenvalue estimator; soft when p exceeds the sample size, sample otherwise.
    #[arg(long, value_parser = parse::<EigenMethod>)]
    eigen: Option<EigenMethod>,
    #[command(flatten)]
    opts: TestOptions,
    /// Record zero wall times so the table is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
}

fn parse<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr<Err = ShcError>,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("shc: {e}");
        return ExitCode::from(1);
    }
    let outcome = match cli.command {
        Command::Test(args) => cmd_test(&args),
        Command::Preprocess(args) => cmd_preprocess(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("shc: {e}");
            match e {
                ShcError::InvalidConfig(_) | ShcError::InvalidDesign(_) | ShcError::InvalidK { .. } => {
                    ExitCode::from(1)
                }
                _ => ExitCode::from(2),
            }
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SHC_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SHC_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn cmd_test(args: &TestArgs) -> shc::Result<()> {
    let config = args.opts.config(args.eigen);
    config.validate()?;
    let data = read_matrix::<f64>(&args.matrix, args.rows_are)?;
    let report = shc::run_shc(&data, &config)?;

    match &args.out {
        Some(path) => write_report(&report, ReportFormat::Json, path)?,
        None => {
            let json = to_json(&report)?;
            std::io::stdout()
                .write_all(json.as_bytes())
                .map_err(|e| ShcError::Io { path: "<stdout>".into(), source: e })?;
        }
    }
    if let Some(path) = &args.svg {
        write_report(&report, ReportFormat::Svg, path)?;
    }
    if let Some(path) = &args.newick {
        write_report(&report, ReportFormat::Newick, path)?;
    }
    let tested = report.results.values().filter(|r| r.tested).count();
    eprintln!(
        "{}: N={} p={} tested={} significant={:?} K_hat={}",
        display(&args.matrix),
        data.n_obs(),
        data.n_vars(),
        tested,
        report.significant,
        report.k_hat
    );
    Ok(())
}

fn cmd_preprocess(args: &PreprocessArgs) -> shc::Result<()> {
    let config = PreprocessConfig {
        uq_normalize: args.uq,
        replace_zeros: args.replace_zeros,
        log_transform: !args.no_log,
        top_genes: args.top_genes,
        filter_before_log: args.filter_before_log,
    };
    let expr = read_expression::<f64>(&args.matrix)?;
    let processed = preprocess(&expr, &config)?;
    write_expression(&args.out, &processed)?;
    eprintln!(
        "{}: {} genes x {} samples -> {} genes",
        display(&args.matrix),
        expr.n_genes(),
        expr.n_samples(),
        processed.n_genes()
    );
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> shc::Result<()> {
    let design = match args.design {
        DesignKind::SpikeNull => MixtureDesign {
            spike: Some(Spike { w: args.spike_w, v: args.spike_v }),
            ..MixtureDesign::new(DesignKind::SpikeNull, args.p, args.n_per_k, 0.0)
        },
        kind => MixtureDesign::new(kind, args.p, args.n_per_k, args.delta),
    };
    design.validate()?;
    let eigen = args.eigen.unwrap_or_else(|| design.default_eigen_method());
    let config = args.opts.config(eigen);
    config.validate()?;
    let mut study = run_study(&design, config.variant, args.replicates, &config)?;
    if args.no_timing {
        for o in &mut study.outcomes {
            o.wall_time_sec = 0.0;
        }
        study.summary = summarize(&study.design, study.p_value, &study.outcomes);
    }
    emit_table(std::slice::from_ref(&study), &args.out)?;
    eprintln!(
        "{} p={} delta={} {}: {}/{} correct, mean root p {:.4}",
        design.kind.name(),
        design.p,
        design.delta,
        config.variant.name(),
        study.summary.count_correct_k,
        args.replicates,
        study.summary.mean_p
    );
    Ok(())
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
