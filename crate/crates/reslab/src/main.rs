use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use reslab::config::Config;
use reslab::csvio::write_text;
use reslab::runners::{self, RunContext};

const USAGE: &str = "\
usage: reslab <subcommand> --config PATH [--out DIR] [--workers N] [--seed N]

subcommands:
  t-search        resonance search for simultaneous large values on a t-grid
  moments         measured vs predicted moments of the resonator against L-values
  diagnostics     prime-sum scans, window sums, and ladder spot checks
  harper          block decomposition of the prime-sum surrogate for log|L|
  family-modq     two fixed forms twisted across the characters mod q
  family-quad     two fixed forms twisted across real quadratic characters
  dump-resonator  resolve the resonator support and write it out

flags:
  --config PATH   key = value text config (required)
  --out DIR       where the report and CSV artifacts go (default: alongside stdout only)
  --workers N     thread count for grid and coefficient fills (default: run.workers or 1)
  --seed N        accepted for compatibility with randomized harnesses; every
                  pipeline here is deterministic, so it is ignored

environment:
  RESLAB_CAP_MB   byte budget for the prime sieve, in megabytes
";

struct Args {
    tool: String,
    config: PathBuf,
    out: Option<PathBuf>,
    workers: Option<usize>,
}

fn parse_args(argv: &[String]) -> Result<Args> {
    if argv.is_empty() {
        bail!("missing subcommand\n\n{USAGE}");
    }
    let tool = argv[0].clone();
    if tool == "--help" || tool == "-h" || tool == "help" {
        bail!("{USAGE}");
    }
    if !runners::TOOLS.contains(&tool.as_str()) {
        bail!("unknown subcommand {tool:?}\n\n{USAGE}");
    }
    let mut config = None;
    let mut out = None;
    let mut workers = None;
    let mut it = argv[1..].iter();
    while let Some(flag) = it.next() {
        let mut value = || {
            it.next()
                .with_context(|| format!("flag {flag} needs a value"))
                .cloned()
        };
        match flag.as_str() {
            "--config" => config = Some(PathBuf::from(value()?)),
            "--out" => out = Some(PathBuf::from(value()?)),
            "--workers" => {
                let v = value()?;
                let n: usize = v.parse().with_context(|| format!("--workers {v:?}"))?;
                if n == 0 {
                    bail!("--workers must be at least 1");
                }
                workers = Some(n);
            }
            "--seed" => {
                let v = value()?;
                let _: u64 = v.parse().with_context(|| format!("--seed {v:?}"))?;
            }
            other => bail!("unknown flag {other:?}\n\n{USAGE}"),
        }
    }
    let config = config.context("--config PATH is required")?;
    Ok(Args { tool, config, out, workers })
}

fn cap_bytes() -> Result<Option<u64>> {
    match std::env::var("RESLAB_CAP_MB") {
        Ok(v) => {
            let mb: u64 = v
                .parse()
                .with_context(|| format!("RESLAB_CAP_MB={v:?} is not a whole number"))?;
            Ok(Some(mb.saturating_mul(1024 * 1024)))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context("RESLAB_CAP_MB"),
    }
}

fn run() -> Result<bool> {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let args = parse_args(&argv)?;
    let cfg = Config::load(&args.config)?;
    let workers = match args.workers {
        Some(n) => n,
        None => cfg.u64_or("run.workers", 1)?.max(1) as usize,
    };
    let config_dir = args
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));

    let started = Instant::now();
    let ctx = RunContext {
        config: &cfg,
        config_dir: &config_dir,
        workers,
        cap_bytes: cap_bytes()?,
    };
    let output = runners::run(&args.tool, &ctx)?;
    let text = output.report.render();
    // timing goes to stderr only; the report must be byte-stable across runs
    eprintln!("reslab {}: {:.3}s", args.tool, started.elapsed().as_secs_f64());

    print!("{text}");
    if let Some(dir) = &args.out {
        write_text(&dir.join("report.txt"), &text)?;
        for (name, body) in &output.artifacts {
            write_text(&dir.join(name), body)?;
        }
    } else if !output.artifacts.is_empty() {
        eprintln!(
            "reslab {}: {} artifact(s) not written; pass --out DIR to keep them",
            args.tool,
            output.artifacts.len()
        );
    }
    for failure in &output.hard_failures {
        eprintln!("reslab {}: hard assertion failed: {failure}", args.tool);
    }
    Ok(output.hard_failures.is_empty())
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("reslab: error: {e:#}");
            ExitCode::from(2)
        }
    }
}
