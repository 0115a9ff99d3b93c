//! `lookdown` command line.
//!
//! Exit codes: 0 success, 1 a verification test failed, 2 configuration or
//! usage error, 3 the particle cap was hit.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use log::info;
use lookdown::engine::{replicate_map, summarize};
use lookdown::genealogy::{coalescence_statistics, export_newick, extract_tree};
use lookdown::output::{read_lineage, read_manifest, read_snapshots, replicate_dir, write_manifest, write_replicate, write_summaries};
use lookdown::poisson_oracle::{all_checks, default_specs, IdentityReport};
use lookdown::rng::stream;
use lookdown::stats::genealogy_suite::lowest_ids;
use lookdown::stats::{reports_tsv, run_suite, SuiteOptions, TestReport, SUITES};
use lookdown::Error;

#[derive(Parser)]
#[command(name = "lookdown", version, about = "Lookdown particle simulations and their verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the replicate count.
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicates of a configured model and write a run directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite; exits 1 if any test fails.
    Verify {
        /// One of poisson-identities, uniformity, projection, generator,
        /// lambda-convergence, genealogy, slfv, performance, all.
        suite: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run every mechanism in its deliberately broken form.
        #[arg(long)]
        mutant: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Trees of the lowest-level particles at the final time of each replicate.
    Genealogy {
        /// Run directory written by `simulate`.
        #[arg(long)]
        run: PathBuf,
        /// Sample size.
        #[arg(short = 'n', long)]
        sample_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo checks of the Poisson random measure identities.
    Identities {
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Tests(usize),
    Usage(anyhow::Error),
    Cap(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

/// Sorts library errors into exit codes.
fn classify(e: Error) -> Failure {
    match e {
        Error::PopulationCap { .. } => Failure::Cap(e.into()),
        Error::Io(_) => Failure::Other(e.into()),
        _ => Failure::Usage(e.into()),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

type Outcome = std::result::Result<(), Failure>;

/// `--out`, then the configured directory, then `$LOOKDOWN_OUT/<name>`, then `runs/<name>`.
fn output_dir(flag: Option<&PathBuf>, configured: Option<&PathBuf>, name: &str) -> PathBuf {
    if let Some(p) = flag.or(configured) {
        return p.clone();
    }
    match std::env::var_os("LOOKDOWN_OUT") {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(name),
        _ => PathBuf::from("runs").join(name),
    }
}

fn load_config(path: &Path) -> std::result::Result<config::RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    config::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string()
}

fn simulate(path: &Path, common: &Common) -> Outcome {
    let cfg = load_config(path)?;
    let seed = common.seed.unwrap_or(cfg.spec.seed);
    let reps = common.reps.unwrap_or(cfg.engine.replicates);
    if reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let workers = common.workers.or(cfg.engine.workers);
    let dir = output_dir(common.out.as_ref(), cfg.outputs.dir.as_ref(), &stem(path));
    let opts = cfg.outputs.options();
    let spec = cfg.spec.with_seed(seed);
    info!("{reps} replicates into {}", dir.display());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let results = replicate_map(&spec, reps, seed, workers, |i, t| -> lookdown::Result<_> {
        write_replicate(&dir, i, &t, &opts)?;
        Ok(summarize(i, &t))
    })
    .map_err(classify)?;
    let summaries = results.into_iter().collect::<lookdown::Result<Vec<_>>>().map_err(classify)?;
    write_manifest(&dir, &spec, seed, reps).map_err(classify)?;
    write_summaries(&dir, &summaries).map_err(classify)?;
    let events: u64 = summaries.iter().map(|s| s.n_events).sum();
    println!("{reps} replicates, {events} events -> {}", dir.display());
    Ok(())
}

fn write_reports(dir: &Path, stem: &str, reports: &[TestReport]) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.tsv")), reports_tsv(reports))?;
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(reports)? + "\n")?;
    Ok(())
}

fn report_outcome(reports: &[TestReport]) -> Outcome {
    for r in reports {
        println!("{}\t{}\tstatistic={:.6e}\tthreshold={}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.statistic, r.threshold);
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} of {} passed", reports.len() - failed, reports.len());
    if failed > 0 {
        Err(Failure::Tests(failed))
    } else {
        Ok(())
    }
}

fn verify(suite: Option<&str>, config: Option<&Path>, mutant: bool, common: &Common) -> Outcome {
    let cfg = config.map(load_config).transpose()?;
    let v = cfg.as_ref().map(|c| c.verify.clone()).unwrap_or_default();
    let name = suite.map(str::to_string).or(v.suite.clone()).ok_or_else(|| usage("no suite given"))?;
    if !SUITES.contains(&name.as_str()) {
        return Err(usage(format!("unknown suite {name:?}; expected one of {}", SUITES.join(", "))));
    }
    let mut opts = SuiteOptions { mutant, ..SuiteOptions::default() };
    if let Some(s) = common.seed.or(v.seed) {
        opts.seed = s;
    }
    opts.reps = common.reps.or(v.reps);
    opts.workers = common.workers.or(cfg.as_ref().and_then(|c| c.engine.workers));
    if let Some(a) = v.alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(usage("[verify] alpha must lie in (0, 1)"));
        }
        opts.alpha = a;
    }
    let reports = run_suite(&name, &opts).map_err(classify)?;
    let dir = output_dir(common.out.as_ref(), cfg.as_ref().and_then(|c| c.outputs.dir.as_ref()), &format!("verify-{name}"));
    write_reports(&dir, "reports", &reports)?;
    report_outcome(&reports)
}

fn genealogy(run: &Path, n: usize, out: Option<&PathBuf>) -> Outcome {
    if n == 0 {
        return Err(usage("sample size must be at least 1"));
    }
    let manifest = read_manifest(run).map_err(|e| usage(format!("{}: not a run directory ({e})", run.display())))?;
    let t_end = manifest.spec.t_end;
    let mut trees = Vec::with_capacity(manifest.replicates);
    let mut newick = String::new();
    for i in 0..manifest.replicates {
        let rd = replicate_dir(run, i);
        let log = read_lineage(&rd).map_err(|e| usage(format!("{}: lineage log unavailable ({e})", rd.display())))?;
        let snaps = read_snapshots(&rd).map_err(classify)?;
        let last = snaps.last().filter(|c| c.time == t_end).ok_or_else(|| usage(format!("{}: no snapshot at the final time", rd.display())))?;
        if n > last.len() {
            return Err(usage(format!("replicate {i}: sample size {n} exceeds the population {}", last.len())));
        }
        let tree = extract_tree(&log, &lowest_ids(last, n), t_end).map_err(classify)?;
        newick.push_str(&export_newick(&tree));
        newick.push('\n');
        trees.push(tree);
    }
    let dir = out.cloned().unwrap_or_else(|| run.join("genealogy"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("trees.nwk"), newick).context("writing trees")?;
    let stats = coalescence_statistics(&trees).map_err(classify)?;
    let mut tsv = String::from("pair_time\n");
    for t in &stats.pair_times {
        tsv.push_str(&format!("{t}\n"));
    }
    fs::write(dir.join("pair_times.tsv"), tsv).context("writing pair times")?;
    fs::write(dir.join("coalescence.json"), serde_json::to_string_pretty(&stats).map_err(anyhow::Error::from)? + "\n")
        .context("writing coalescence summary")?;
    println!(
        "{} trees, {} pair merges, {} censored, rate MLE {} -> {}",
        trees.len(),
        stats.pair_times.len(),
        stats.n_censored,
        stats.rate_mle,
        dir.display()
    );
    Ok(())
}

fn identities(common: &Common) -> Outcome {
    let n = common.reps.unwrap_or(100_000);
    let seed = common.seed.unwrap_or(SuiteOptions::default().seed);
    let mut all: Vec<IdentityReport> = Vec::new();
    for (i, spec) in default_specs().iter().enumerate() {
        let mut rng = stream(seed, 100 + i as u64);
        all.extend(all_checks(spec, n, &mut rng).map_err(classify)?);
    }
    let mut tsv = String::from(IdentityReport::tsv_header());
    tsv.push('\n');
    for r in &all {
        tsv.push_str(&r.tsv_row());
        tsv.push('\n');
        println!("{}\t{}/{}\tmc={}\tanalytic={}\tse={}", if r.pass { "PASS" } else { "FAIL" }, r.spec, r.identity, r.mc, r.analytic, r.std_err);
    }
    let dir = output_dir(common.out.as_ref(), None, "identities");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("identities.tsv"), tsv).context("writing identities")?;
    fs::write(dir.join("identities.json"), serde_json::to_string_pretty(&all).map_err(anyhow::Error::from)? + "\n")
        .context("writing identities")?;
    let failed = all.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        Err(Failure::Tests(failed))
    } else {
        Ok(())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { config, common } => simulate(config, common),
        Command::Verify { suite, config, mutant, common } => verify(suite.as_deref(), config.as_deref(), *mutant, common),
        Command::Genealogy { run, sample_size, out } => genealogy(run, *sample_size, out.as_ref()),
        Command::Identities { common } => identities(common),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Tests(n)) => {
            eprintln!("{n} test(s) failed");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Cap(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
