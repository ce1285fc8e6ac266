use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use myoe::run::{self, EvalOptions};
use myoe::{exit_code, selfcheck};
use myoe_core::config::RunConfig;
use myoe_core::harness::{format_pm, mean_std, EvalSummary};
use myoe_core::{Error, Result};

#[derive(Parser)]
#[command(name = "myoe", version, about = "Train and evaluate MYOE agents and baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write scripted demonstrations as NDJSON.
    DemoGen {
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        /// none, shake or noise.
        #[arg(long, default_value = "none")]
        perturb: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from a TOML config or a named preset.
    Train {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Comma-separated seeds, one run directory each.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// myoe, mbc, mbc-rnn, mbc-vae or ppo-bc.
        #[arg(long)]
        agent: Option<String>,
        /// Override the number of environment steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Stamp log records with elapsed seconds.
        #[arg(long)]
        wall_clock: bool,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluate on a different environment with the same interface.
        #[arg(long)]
        env: Option<String>,
        /// Append eval_episode records to this log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run the numerical self-checks.
    Selfcheck,
    /// Print a preset as TOML.
    Preset { name: String },
}

fn print_summary(label: &str, s: &EvalSummary) {
    print!(
        "{label}success {} over {} episodes, return {:.3}, discounted {:.3}, length {:.1}",
        s.success_cell(),
        s.episodes,
        s.mean_return,
        s.mean_discounted_return,
        s.mean_len
    );
    match s.mean_mixture_entropy {
        Some(h) => println!(", mixture entropy {h:.3}"),
        None => println!(),
    }
}

/// Exit status on success paths: selfcheck failures report 3.
fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::DemoGen { env, episodes, perturb, seed, out } => {
            let p = run::perturbation_named(&perturb, &env)?;
            run::demo_gen(&env, episodes, p, seed, &out)?;
            println!("wrote {episodes} episodes to {}", out.display());
        }
        Command::Train { config, preset, seed, seeds, out, agent, steps, wall_clock } => {
            let mut c = match (config, preset) {
                (Some(path), _) => run::load_config(&path)?,
                (None, Some(name)) => RunConfig::preset(&name)?,
                (None, None) => return Err(Error::Config("need --config or --preset".into())),
            };
            if let Some(tag) = agent {
                c.agent = run::variant_named(&tag)?;
            }
            if let Some(s) = steps {
                c.train.total_steps = s;
            }
            c.validate()?;
            let seeds = if !seeds.is_empty() { seeds } else { vec![seed.unwrap_or(c.seed)] };
            let root = out.unwrap_or_else(|| PathBuf::from(&c.output_dir));
            let trials = run::train_trials(&c, &seeds, &root, wall_clock)?;
            for t in &trials {
                print_summary(&format!("seed {} ({}): ", t.seed, t.dir.display()), &t.summary);
            }
            if trials.len() > 1 {
                let (m, s) = mean_std(&trials.iter().map(|t| t.summary.success_rate).collect::<Vec<_>>());
                println!("{} over {} seeds: success {}", c.agent.tag(), trials.len(), format_pm(m, s));
            }
        }
        Command::Eval { checkpoint, episodes, seed, env, log } => {
            let s = run::evaluate_checkpoint(&checkpoint, episodes, seed, &EvalOptions { env, log })?;
            print_summary("", &s);
        }
        Command::Selfcheck => {
            let checks = selfcheck::run_all();
            for c in &checks {
                println!("{}", c.line());
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} checks, {failed} failed", checks.len());
            if failed > 0 {
                return Ok(3);
            }
        }
        Command::Preset { name } => print!("{}", run::config_to_toml(&RunConfig::preset(&name)?)?),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
