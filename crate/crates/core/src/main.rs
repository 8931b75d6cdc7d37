use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use phireg::cli::{self, ScenarioConfig, PROTOCOLS};
use phireg::conformal::{read_scores, run_stream};
use phireg::hardness::{int_plus_threshold, shrink_threshold, small_norm_threshold, FkInstance, Graph};
use phireg::{Error, Result};

#[derive(Parser)]
#[command(name = "phireg", version, about = "Phi-regret experiments, audits and certificates")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario config and write its CSV.
    Run {
        config: PathBuf,
        /// Exit with status 4 when an acceptance check fails.
        #[arg(long)]
        check: bool,
        /// Output path; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a recorded trajectory against a deviation spec (inline JSON or file).
    Audit { trajectory: PathBuf, spec: String },
    /// Clique data, f_k thresholds and probe results for a graph.
    Hardness {
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the threshold learner on a score file (one score per line).
    Conformal {
        scores: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 0.0)]
        theta1: f64,
    },
    /// List shipped scenario configs and available protocols.
    ListScenarios {
        #[arg(long, default_value = "scenarios")]
        dir: PathBuf,
    },
}

enum Status {
    Ok,
    ChecksFailed,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Ok(n) = std::env::var("PHIREG_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: thread pool: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: PHIREG_THREADS must be a positive integer, got `{n}`");
                return ExitCode::from(2);
            }
        }
    }
    match dispatch(args.cmd) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ChecksFailed) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<Status> {
    match cmd {
        Cmd::Run { config, check, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let outcome = cli::run_scenario(&cfg)?;
            let path = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.id)));
            cli::emit_csv(&outcome.records, &path)?;
            println!("{}: wrote {} rows to {}", cfg.id, outcome.records.len(), path.display());
            for c in &outcome.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if check && !outcome.passed() { Status::ChecksFailed } else { Status::Ok })
        }
        Cmd::Audit { trajectory, spec } => {
            let traj = cli::load_trajectory(&trajectory)?;
            let spec = cli::parse_audit_spec(&spec)?;
            let lines = cli::audit(&traj, &spec)?;
            println!("{}", serde_json::to_string_pretty(&lines)?);
            Ok(Status::Ok)
        }
        Cmd::Hardness { graph, k, delta, samples, seed } => {
            let text = std::fs::read_to_string(&graph)?;
            let g = Graph::parse(&text)?;
            let inst = FkInstance::new(g, k)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut improved = 0usize;
            let mut int_plus = 0usize;
            for _ in 0..samples {
                let x = inst.domain.sample(&mut rng);
                if inst.probe_local_maximizer(&x, delta)?.is_some() {
                    improved += 1;
                }
                if inst.probe_int_plus(&x, delta)?.is_some() {
                    int_plus += 1;
                }
            }
            let d = inst.d();
            let report = json!({
                "d": d,
                "k": k,
                "omega": inst.omega,
                "clique": inst.clique,
                "thresholds": {
                    "shrink": shrink_threshold(d, delta),
                    "small_norm": small_norm_threshold(d, delta),
                    "int_plus": int_plus_threshold(d, delta),
                },
                "samples": samples,
                "improving_local": improved,
                "improving_int_plus": int_plus,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(Status::Ok)
        }
        Cmd::Conformal { scores, alpha, eta, theta1 } => {
            let s = read_scores(&scores)?;
            if s.is_empty() {
                return Err(Error::Input("score file is empty".into()));
            }
            let st = run_stream(&s, theta1, eta, alpha)?;
            let report = json!({
                "rounds": st.rounds,
                "misses": st.misses,
                "theta": st.theta,
                "miscoverage": st.miscoverage()?,
                "gap": st.coverage_gap()?,
                "identity_gap": st.identity_gap()?,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(Status::Ok)
        }
        Cmd::ListScenarios { dir } => {
            if dir.is_dir() {
                for (path, cfg) in cli::list_scenarios(&dir)? {
                    println!("{:<28} {:<20} {:<16} {}", cfg.id, cfg.protocol, format!("{:?}", cfg.kind), path.display());
                }
            } else {
                println!("no scenario directory at {}", dir.display());
            }
            println!();
            println!("protocols:");
            for p in PROTOCOLS {
                println!("  {:<20} {}", p.name, p.summary);
            }
            Ok(Status::Ok)
        }
    }
}
