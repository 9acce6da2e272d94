//! `egc`: feature extraction, cross-validated experiments, probability
//! import, fusion sweeps and rank statistics.
//!
//! Exit status: 0 on success, 1 when a computation fails, 2 on bad input,
//! configuration or usage.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use egc_core::config::ExperimentConfig;
use egc_core::dataset::{extract_features, Dataset};
use egc_core::evaluation::run_experiment;
use egc_core::fusion::{sweep, sweep_csv, sweep_table, FusionRule};
use egc_core::io::write_file;
use egc_core::stats::{friedman_avg_ranks, ranks_table, wilcoxon_signed_rank, ScoreTable};
use egc_core::workspace::Workspace;
use egc_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "egc", version, about = "Texture-feature classification of enteric glial cell micrographs")]
struct Cli {
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the configuration's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-process and describe every image; writes features.csv and manifest.json.
    Extract {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate one classifier and store its outputs in a workspace.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Workspace directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Register an external probability CSV (sample_id,fold,p_C,p_S).
    ImportProba {
        /// Workspace directory holding the fold plan.
        #[arg(long)]
        out: PathBuf,
        /// Identifier for the imported classifier.
        #[arg(long)]
        id: String,
        csv: PathBuf,
    },
    /// Fuse every subset of at least two members under each rule.
    Fuse {
        /// Workspace directory.
        #[arg(long)]
        out: PathBuf,
        /// Members to combine (default: all registered).
        #[arg(long, value_delimiter = ',')]
        members: Vec<String>,
        /// Rules among max, sum, product (default: all).
        #[arg(long, value_delimiter = ',')]
        rules: Vec<FusionRule>,
    },
    /// Rank statistics and signed-rank tests.
    #[command(subcommand)]
    Stats(StatsCommand),
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Average ranks of methods over a score table (`[group,]row,m1,m2,…`).
    Ranks {
        table: PathBuf,
        /// Also write ranks.json into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-sided test that column `a` exceeds column `b` (`a,b` CSV).
    Wilcoxon {
        pairs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    let bytes = egc_core::io::read_file(&args.config)?;
    let mut config = ExperimentConfig::from_json(&bytes)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    log::info!(
        "event=config path={} id={} seed={} fingerprint={}",
        args.config.display(),
        config.id,
        config.seed,
        config.fingerprint()?
    );
    Ok(config)
}

fn json_line(value: &impl serde::Serialize) -> Result<String, Failure> {
    Ok(serde_json::to_string(value).map_err(Error::from)?)
}

fn pretty(value: &impl serde::Serialize) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn extract(args: &ConfigArgs, out: &Path) -> Result<(), Failure> {
    let config = load_config(args)?;
    let (Some(ds), Some(descriptor)) = (&config.dataset, &config.descriptor) else {
        return Err(Failure::Usage("extract needs a dataset and a descriptor in the config".into()));
    };
    let dataset = Dataset::ingest(&ds.root, ds.name)?;
    let manifest = dataset.manifest();
    log::info!(
        "event=ingested dataset={} control={} sick={}",
        ds.name,
        manifest.control,
        manifest.sick
    );
    let table = extract_features(&dataset, &config.preprocessing, descriptor)?;
    let fingerprint = config.fingerprint()?;
    table.write_csv(&out.join("features.csv"), Some(&fingerprint))?;
    let record = serde_json::json!({
        "config_fingerprint": fingerprint,
        "dataset": ds.name,
        "descriptor": descriptor.name(),
        "dim": table.dim(),
        "counts": {"C": manifest.control, "S": manifest.sick},
    });
    write_file(&out.join("manifest.json"), &pretty(&record)?)?;
    println!("{}", json_line(&record)?);
    Ok(())
}

fn run(args: &ConfigArgs, out: &Path) -> Result<(), Failure> {
    let config = load_config(args)?;
    let result = run_experiment(&config)?;
    let mut ws = Workspace::for_result(out, &result)?;
    ws.add_experiment(&config, &result)?;
    let m = &result.metrics;
    println!(
        "id={} f_measure={:.4} precision={:.4} recall={:.4} accuracy={:.4} macro_f1={:.4} fingerprint={}",
        result.classifier_id, m.f_measure, m.precision, m.recall, m.accuracy, m.macro_f1, result.config_fingerprint
    );
    Ok(())
}

fn import(out: &Path, id: &str, csv: &Path) -> Result<(), Failure> {
    let mut ws = Workspace::open(out)?;
    let report = ws.import_probabilities(id, csv)?;
    println!(
        "id={id} rows={} renormalized_silently={} renormalized_with_warning={}",
        report.rows, report.renormalized_silently, report.renormalized_with_warning
    );
    Ok(())
}

fn fuse(out: &Path, members: &[String], rules: &[FusionRule]) -> Result<(), Failure> {
    let ws = Workspace::open(out)?;
    let ids: Vec<String> = if members.is_empty() {
        ws.registry().members.iter().map(|m| m.id.clone()).collect()
    } else {
        members.to_vec()
    };
    if ids.len() < 2 {
        return Err(Failure::Usage(format!("fusion needs at least 2 members, got {}", ids.len())));
    }
    let rules = if rules.is_empty() { FusionRule::ALL.to_vec() } else { rules.to_vec() };
    let loaded = ids.iter().map(|id| ws.load_member(id)).collect::<Result<Vec<_>, _>>()?;
    let entries = sweep(&loaded, &rules, &ws.truth())?;
    let fingerprint = &ws.registry().fold_plan_fingerprint;
    write_file(&out.join("fusion/report.csv"), &sweep_csv(&entries, Some(fingerprint))?)?;
    let table = sweep_table(&entries);
    write_file(&out.join("fusion/report.txt"), table.as_bytes())?;
    log::info!("event=fusion_sweep members={} evaluations={}", ids.len(), entries.len());
    print!("{table}");
    Ok(())
}

fn stats(cmd: &StatsCommand) -> Result<(), Failure> {
    match cmd {
        StatsCommand::Ranks { table, out } => {
            let t = ScoreTable::read_csv(table)?;
            let ranks = friedman_avg_ranks(&t);
            let text = ranks_table(&t, &ranks);
            if let Some(dir) = out {
                write_file(&dir.join("ranks.json"), &pretty(&ranks)?)?;
                write_file(&dir.join("ranks.txt"), text.as_bytes())?;
            }
            print!("{text}");
        }
        StatsCommand::Wilcoxon { pairs, out } => {
            let t = ScoreTable::read_csv(pairs).or_else(|_| read_pairs(pairs))?;
            let (a, b): (Vec<f64>, Vec<f64>) = t.values.iter().map(|r| (r[0], r[1])).unzip();
            let result = wilcoxon_signed_rank(&a, &b)?;
            if let Some(dir) = out {
                write_file(&dir.join("wilcoxon.json"), &pretty(&result)?)?;
            }
            println!(
                "n={} statistic={} p_value={:.6} method={} z={:.4} p_normal_uncorrected={:.4} degenerate={}",
                result.n_effective,
                result.statistic,
                result.p_value,
                json_line(&result.method)?.trim_matches('"'),
                result.z,
                result.p_normal_uncorrected,
                result.degenerate
            );
        }
    }
    Ok(())
}

/// A bare two-column `a,b` file without row labels.
fn read_pairs(path: &Path) -> Result<ScoreTable, Failure> {
    let text = String::from_utf8(egc_core::io::read_file(path)?)
        .map_err(|_| Error::MalformedTable(format!("{} is not UTF-8", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::MalformedTable("empty pairs file".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header.len() != 2 {
        return Err(Error::MalformedTable("pairs file needs exactly two columns".into()).into());
    }
    let mut values = Vec::new();
    for line in lines {
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|_| Error::MalformedTable(format!("{f:?} is not a number"))))
            .collect::<Result<Vec<_>, _>>()?;
        values.push(row);
    }
    let rows = (0..values.len()).map(|i| i.to_string()).collect();
    Ok(ScoreTable::new(None, rows, header, values)?)
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| {
            writeln!(buf, "level={} target={} {}", record.level().as_str().to_lowercase(), record.target(), record.args())
        })
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::error!("event=thread_pool error=\"{e}\"");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Extract { config, out } => extract(config, out),
        Command::Run { config, out } => run(config, out),
        Command::ImportProba { out, id, csv } => import(out, id, csv),
        Command::Fuse { out, members, rules } => fuse(out, members, rules),
        Command::Stats(cmd) => stats(cmd),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Computation => ExitCode::from(1),
                ErrorKind::Input => ExitCode::from(2),
            }
        }
    }
}
