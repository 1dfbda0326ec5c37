use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adp_core::bench::{run_benchmark, MethodSpec};
use adp_core::config::{generate_worlds, save_worlds, ExperimentConfig, WorldSource};
use adp_core::env::{run_episode, EnvConfig, EpisodeMode};
use adp_core::planner::PlannerVariant;
use adp_core::rl::load_checkpoint;
use adp_core::train::{env_from_meta, evaluate, prepare, train, PreparedWorld};
use adp_core::{barn_score, render_svg, CaParams, OccupancyWorld, ScoreInput};
use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "adp", version, about = "Adaptive-fidelity local planning experiments")]
struct Cli {
    /// Experiment file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate seeded worlds into a directory.
    GenWorlds {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        width: usize,
        #[arg(long, default_value_t = 30)]
        height: usize,
        #[arg(long, default_value_t = 0.15)]
        resolution: f64,
    },
    /// Train a schedule policy; writes final.ckpt and train_log.csv.
    Train {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Training world directory, overriding the config.
        #[arg(long)]
        worlds: Option<PathBuf>,
    },
    /// Evaluate a policy without exploration noise and write per-episode records.
    Eval {
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long)]
        worlds: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the trimmed benchmark and write the report CSV.
    Bench {
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long)]
        worlds: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        trim: Option<usize>,
        #[arg(long)]
        v_max: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read `success,actual_time,optimal_time` rows from stdin and print scores.
    Score,
    /// Draw a world, and optionally one episode's path, as SVG.
    Render {
        #[arg(long)]
        world: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct MethodArgs {
    /// Fixed schedule (ddp, uniform, inc) or a learned checkpoint.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Trained checkpoint; implies `--method learned`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_parser = parse_planner)]
    planner: Option<PlannerVariant>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Ddp,
    Uniform,
    Inc,
    Learned,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

fn parse_planner(s: &str) -> std::result::Result<PlannerVariant, String> {
    s.parse().map_err(|e: adp_core::AdpError| e.to_string())
}

fn usage_error(msg: &str) -> ! {
    Cli::command().error(ErrorKind::ArgumentConflict, msg).exit()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

struct Loaded {
    cfg: ExperimentConfig,
    base: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<Loaded> {
    match path {
        Some(p) => {
            let cfg = ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok(Loaded { cfg, base })
        }
        None => Ok(Loaded {
            cfg: ExperimentConfig::default(),
            base: PathBuf::new(),
        }),
    }
}

fn resolve_worlds(dir: Option<&Path>, source: &WorldSource, base: &Path) -> Result<Vec<OccupancyWorld>> {
    let worlds = match dir {
        Some(d) => WorldSource::from_dir(d).resolve(Path::new(""))?,
        None => source.resolve(base)?,
    };
    Ok(worlds)
}

/// Method label, schedule policy and environment. Learned policies take
/// their environment from the checkpoint so observation shapes match.
fn resolve_method(args: &MethodArgs, env: &EnvConfig) -> Result<MethodSpec> {
    let method = match (args.method, &args.checkpoint) {
        (None, Some(_)) => Method::Learned,
        (None, None) => usage_error("one of --method or --checkpoint is required"),
        (Some(Method::Learned), None) => usage_error("--method learned needs --checkpoint"),
        (Some(m), Some(_)) if m != Method::Learned => usage_error("--checkpoint only applies to --method learned"),
        (Some(m), _) => m,
    };
    let mut spec = match method {
        Method::Ddp => MethodSpec::builtin("ddp", env.clone())?,
        Method::Uniform => MethodSpec::builtin("uniform", env.clone())?,
        Method::Inc => MethodSpec::builtin("inc", env.clone())?,
        Method::Learned => {
            let path = args.checkpoint.as_ref().expect("checked above");
            let ckpt = load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
            let env = env_from_meta(&ckpt.meta)?;
            let actor = ckpt.net("actor").cloned().context("checkpoint has no actor network")?;
            MethodSpec::learned("learned", actor, env)
        }
    };
    if let Some(p) = args.planner {
        spec.env.planner.variant = p;
    }
    Ok(spec)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::GenWorlds {
            seed,
            count,
            out,
            width,
            height,
            resolution,
        } => {
            let ca = match config {
                Some(_) => load_config(config)?.cfg.worlds.ca,
                None => CaParams::default(),
            };
            let worlds = generate_worlds(seed, count, width, height, resolution, &ca)?;
            for p in save_worlds(&out, &worlds)? {
                println!("{}", p.display());
            }
        }
        Command::Train { seed, out, worlds } => {
            let Loaded { mut cfg, base } = load_config(config)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            let train_worlds = resolve_worlds(worlds.as_deref(), &cfg.worlds, &base)?;
            let eval_worlds = match &cfg.eval_worlds {
                Some(src) => src.resolve(&base)?,
                None => Vec::new(),
            };
            let outcome = train(&cfg.train, &train_worlds, &eval_worlds, Some(&out))?;
            for row in &outcome.log {
                eprintln!(
                    "cycle {:>5}  success {:.3}  reward {:>9.3}",
                    row.cycle, row.eval_success_rate, row.eval_mean_reward
                );
            }
            println!("{}", out.join("final.ckpt").display());
        }
        Command::Eval {
            method,
            worlds,
            episodes,
            seed,
            format,
            out,
        } => {
            if episodes == 0 {
                usage_error("--episodes must be at least 1");
            }
            let Loaded { cfg, base } = load_config(config)?;
            let spec = resolve_method(&method, &cfg.train.env)?;
            let source = cfg.eval_worlds.as_ref().unwrap_or(&cfg.worlds);
            let prepared = prepare(
                &resolve_worlds(worlds.as_deref(), source, &base)?,
                spec.env.planner.robot_radius,
            );
            let seed = seed.unwrap_or(cfg.train.seed);
            let (success, reward, records) = evaluate(&spec.policy, &prepared, &spec.env, episodes, seed)?;
            let text = match format {
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    for r in &records {
                        w.serialize(r)?;
                    }
                    String::from_utf8(w.into_inner()?)?
                }
                Format::Json => serde_json::to_string_pretty(&records)? + "\n",
            };
            write_output(out.as_deref(), &text)?;
            eprintln!(
                "{}: success {:.3}, mean reward {:.3} over {} episodes",
                spec.label,
                success,
                reward,
                records.len()
            );
        }
        Command::Bench {
            method,
            worlds,
            runs,
            trim,
            v_max,
            seed,
            out,
        } => {
            let Loaded { cfg, base } = load_config(config)?;
            let spec = resolve_method(&method, &cfg.train.env)?;
            let mut settings = cfg.bench;
            settings.runs_per_world = runs.unwrap_or(settings.runs_per_world);
            settings.trim = trim.unwrap_or(settings.trim);
            settings.v_max = v_max.unwrap_or(settings.v_max);
            settings.seed = seed.unwrap_or(settings.seed);
            if settings.runs_per_world <= 2 * settings.trim {
                usage_error("--runs must exceed twice --trim");
            }
            let source = cfg.eval_worlds.as_ref().unwrap_or(&cfg.worlds);
            let prepared: Vec<PreparedWorld> = prepare(
                &resolve_worlds(worlds.as_deref(), source, &base)?,
                spec.env.planner.robot_radius,
            );
            let report = run_benchmark(&spec, &prepared, &settings)?;
            write_output(out.as_deref(), &report.to_csv()?)?;
            if let Some(agg) = report.aggregate() {
                eprintln!(
                    "{} ({}): success {:.1}%  time {:.2} s  score {:.4}",
                    spec.label,
                    spec.env.planner.variant.label(),
                    agg.success_pct,
                    agg.avg_time_s,
                    agg.avg_score
                );
            }
        }
        Command::Score => {
            let mut input = String::new();
            std::io::stdin().read_to_string(&mut input)?;
            let mut out = String::new();
            for (i, line) in input.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                match parse_score_row(line) {
                    Some(row) => {
                        let s = barn_score(&row).with_context(|| format!("line {}", i + 1))?;
                        out.push_str(&format!("{s}\n"));
                    }
                    None if i == 0 => continue,
                    None => bail!(
                        "line {}: expected `success,actual_time,optimal_time`, got `{line}`",
                        i + 1
                    ),
                }
            }
            std::io::stdout().write_all(out.as_bytes())?;
        }
        Command::Render {
            world,
            method,
            seed,
            out,
        } => {
            let w = OccupancyWorld::load(&world).with_context(|| format!("loading world {}", world.display()))?;
            let path = if method.method.is_some() || method.checkpoint.is_some() {
                let Loaded { cfg, .. } = load_config(config)?;
                let spec = resolve_method(&method, &cfg.train.env)?;
                let prepared = PreparedWorld::new(w.clone(), spec.env.planner.robot_radius);
                let mut env = prepared.env(&spec.env)?;
                let ep = run_episode(&mut env, &spec.policy, EpisodeMode::Eval, seed)?;
                let r = &ep.record;
                eprintln!(
                    "success {} collided {} time {:.2} s",
                    r.success, r.collided, r.traversal_time
                );
                ep.path
            } else {
                Vec::new()
            };
            write_output(Some(&out), &render_svg(&w, &path))?;
        }
    }
    Ok(())
}

fn parse_score_row(line: &str) -> Option<ScoreInput> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 3 {
        return None;
    }
    let success = match fields[0].to_ascii_lowercase().as_str() {
        "1" | "true" => true,
        "0" | "false" => false,
        _ => return None,
    };
    Some(ScoreInput {
        success,
        actual_time: fields[1].parse().ok()?,
        optimal_time: fields[2].parse().ok()?,
    })
}
