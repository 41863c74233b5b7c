use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use abq_lab::analysis::{fit_rate, OracleMutation, DEFAULT_N_MIN};
use abq_lab::exec::{self, Mode};
use abq_lab::harness::config::{self, Overrides};
use abq_lab::harness::experiment::{self, parse_rate_token};
use abq_lab::harness::suite::{self, VerifyOptions};
use abq_lab::harness::{matrix_width, run_all};
use abq_lab::AbqError;

#[derive(Parser)]
#[command(
    name = "abq-lab",
    version,
    about = "Adaptive Bayesian quadrature experiments and theory checks"
)]
struct Cli {
    /// Disable data-parallel evaluation.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments described by a config file.
    Run {
        config: PathBuf,
        /// Output root; each experiment writes to <out>/<name>/.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the certificate grid size.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Run the builtin property suite, plus every *.json config in DIR.
    Verify {
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        grid: Option<usize>,
        /// Comma-separated subset of tags to run.
        #[arg(long, value_delimiter = ',')]
        tags: Vec<String>,
        /// Corrupt the projection oracle to check that the suite notices.
        #[arg(long, hide = true)]
        inject_bug: bool,
    },
    /// Re-fit convergence rates from existing trace files.
    Rates {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// `exponential:<power>` or `polynomial:<exponent>`; defaults to the
        /// model recorded in each trace.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value_t = DEFAULT_N_MIN)]
        n_min: usize,
        #[arg(long)]
        n_max: Option<usize>,
    },
}

fn fail(e: &AbqError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run(
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    grid: Option<usize>,
) -> Result<ExitCode, AbqError> {
    let mut cfgs = config::load(&config)?;
    let o = Overrides {
        seed,
        grid,
        output: None,
    };
    cfgs.iter_mut().for_each(|c| c.apply(&o));
    let resolved = cfgs
        .iter()
        .map(experiment::resolve)
        .collect::<Result<Vec<_>, _>>()?;
    let outputs = run_all(&resolved, matrix_width());
    let mut first_err = None;
    for (r, out_) in resolved.iter().zip(outputs) {
        match out_ {
            Ok(o) => {
                let dir = experiment::artifact_dir(r, out.as_deref());
                experiment::write_artifacts(&o, &dir)?;
                println!(
                    "{}: {} iterations, e_n {:.3e} -> {:.3e}, {} finding(s), artifacts in {}",
                    r.name,
                    o.report.run.iterations,
                    o.report.run.e_first,
                    o.report.run.e_last,
                    o.report.findings.len(),
                    dir.display()
                );
                for f in &o.report.findings {
                    println!("  [{}] {}", f.tag, f.message);
                }
            }
            Err(e) => {
                eprintln!("{}: {e}", r.name);
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Ok(ExitCode::from(e.exit_code() as u8)),
        None => Ok(ExitCode::SUCCESS),
    }
}

fn verify(
    dir: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    grid: Option<usize>,
    tags: Vec<String>,
    inject_bug: bool,
) -> Result<ExitCode, AbqError> {
    if let Some(t) = tags.iter().find(|t| !suite::TAGS.contains(&t.as_str())) {
        return Err(AbqError::Config(format!(
            "unknown tag {t:?}; known: {}",
            suite::TAGS.join(", ")
        )));
    }
    let mut experiments = Vec::new();
    if let Some(dir) = dir {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for p in paths {
            experiments.extend(config::load(&p)?);
        }
    }
    let mut opts = VerifyOptions {
        width: matrix_width(),
        grid,
        experiments,
        out,
        tags,
        mutation: if inject_bug {
            OracleMutation::DropNodeWeight
        } else {
            OracleMutation::None
        },
        ..VerifyOptions::default()
    };
    if let Some(s) = seed {
        opts.seed = s;
    }
    let summary = suite::verify(&opts);
    println!("experiments: {}", summary.experiments);
    for f in &summary.experiment_failures {
        println!("experiment failed: {f}");
    }
    for t in &summary.tags {
        println!(
            "{:<16} {}  ({:.1}s)  {}",
            t.tag,
            if t.passed { "PASS" } else { "FAIL" },
            t.seconds,
            t.detail
        );
    }
    let aborted = summary.tags.iter().any(|t| t.detail.starts_with("aborted"));
    Ok(if summary.passed() {
        ExitCode::SUCCESS
    } else if aborted {
        ExitCode::from(3)
    } else {
        ExitCode::from(1)
    })
}

fn rates(
    traces: Vec<PathBuf>,
    model: Option<String>,
    n_min: usize,
    n_max: Option<usize>,
) -> Result<ExitCode, AbqError> {
    let forced = model
        .as_deref()
        .map(parse_rate_token)
        .transpose()?
        .flatten();
    for path in traces {
        let text = std::fs::read_to_string(&path)?;
        let t = experiment::parse_trace(&text, &path.display().to_string())?;
        let Some(m) = forced.or(t.rate) else {
            println!("{}: no rate model recorded; pass --model", path.display());
            continue;
        };
        match fit_rate(&t.e_series, m, n_min, n_max) {
            Ok(f) => println!(
                "{}",
                serde_json::json!({ "trace": path.display().to_string(), "fit": f })
            ),
            Err(e) => println!("{}: {e}", path.display()),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    exec::set_mode(if cli.sequential {
        Mode::Sequential
    } else {
        Mode::Parallel
    });
    let r = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            grid,
        } => run(config, out, seed, grid),
        Command::Verify {
            dir,
            out,
            seed,
            grid,
            tags,
            inject_bug,
        } => verify(dir, out, seed, grid, tags, inject_bug),
        Command::Rates {
            traces,
            model,
            n_min,
            n_max,
        } => rates(traces, model, n_min, n_max),
    };
    r.unwrap_or_else(|e| fail(&e))
}
