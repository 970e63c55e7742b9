use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use ri_switch::check::check_trace;
use ri_switch::controllers::SteeringKind;
use ri_switch::experiments::{self, ExperimentPlan, ScalingConfig};
use ri_switch::policies::{self, GROUP_ORDER};
use ri_switch::sim::{run_scenario, ControlMode, Scenario};
use ri_switch::tracelog::{read_records, traces_by_car, write_records};
use ri_switch::vdta::expr::MinFront;
use ri_switch::vdta::dot::to_dot;
use ri_switch::vdta::lint::lint_overlaps;
use ri_switch::vdta::{BuiltinRegistry, Policy};

#[derive(Parser)]
#[command(name = "ri-switch", version, about = "Runtime interchange of controllers under timed policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Bare,
    Ri,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bank {
    Mlp,
    Geometric,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run the crash-rate and mode-occupancy grid and write CSV tables.
    RunTables {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Override the plan's trials per cell.
        #[arg(long)]
        trials: Option<u64>,
        /// 1000 trials per cell.
        #[arg(long)]
        full_scale: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Measure manager time against controller time.
    Overhead {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        #[arg(long, value_enum, default_value = "both")]
        bank: Bank,
        /// 1000 trials per cell.
        #[arg(long)]
        full_scale: bool,
    },
    /// Time per tick as the shipped policies are duplicated.
    Scaling {
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        ticks: Option<u64>,
        /// 1..4 × 10⁵ copies.
        #[arg(long)]
        full_scale: bool,
    },
    /// Check a JSONL tick log against the manager constraints.
    CheckTrace {
        trace: PathBuf,
        /// Policy files or directories of `.vdta` files. Defaults to the
        /// shipped policies.
        #[arg(long, num_args = 1..)]
        policies: Vec<PathBuf>,
        /// Policy names in group order, when loading from directories.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<String>>,
        #[arg(long, default_value_t = 230.0)]
        fov: f64,
    },
    /// Run one scenario and print its result as JSON.
    Simulate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ri")]
        mode: Mode,
        #[arg(long, env = experiments::SEED_ENV)]
        seed: Option<u64>,
    },
    /// Print a policy as a Graphviz graph.
    DumpDot {
        policy: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Report overlapping guards that may make a policy non-deterministic.
    Lint { policies: Vec<PathBuf> },
}

fn registry(fov: f64) -> BuiltinRegistry {
    let mut reg = BuiltinRegistry::default();
    reg.register(Arc::new(MinFront { fov_deg: fov, ..MinFront::default() }));
    reg
}

fn load_plan(path: Option<&Path>) -> Result<ExperimentPlan> {
    let plan = match path {
        Some(p) => ExperimentPlan::load(p).with_context(|| format!("reading plan {}", p.display()))?,
        None => ExperimentPlan::default(),
    };
    Ok(plan.with_env_seed()?)
}

fn load_policies(paths: &[PathBuf], order: Option<&[String]>, reg: &BuiltinRegistry) -> Result<Vec<Policy>> {
    if paths.is_empty() {
        return Ok(policies::shipped(reg)?);
    }
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "vdta"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    let mut loaded = Vec::new();
    for f in &files {
        let src = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        loaded.push(Policy::from_source(&src, reg).with_context(|| format!("in {}", f.display()))?);
    }
    let default_order: Vec<String> = GROUP_ORDER.iter().map(|s| s.to_string()).collect();
    let order = match order {
        Some(o) => Some(o.to_vec()),
        None if paths.iter().any(|p| p.is_dir()) && loaded.len() == GROUP_ORDER.len() => Some(default_order),
        None => None,
    };
    if let Some(order) = order {
        let mut sorted = Vec::with_capacity(order.len());
        for name in &order {
            let i = loaded.iter().position(|p| p.name() == name).with_context(|| format!("no policy named `{name}`"))?;
            sorted.push(loaded.swap_remove(i));
        }
        if !loaded.is_empty() {
            bail!("policies not listed in the order: {}", loaded.iter().map(|p| p.name()).collect::<Vec<_>>().join(", "));
        }
        return Ok(sorted);
    }
    Ok(loaded)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::RunTables { plan, out, trials, full_scale, threads } => {
            let mut plan = load_plan(plan.as_deref())?;
            if full_scale {
                plan = plan.full_scale();
            }
            if let Some(t) = trials {
                plan.trials = t;
            }
            if threads.is_some() {
                plan.threads = threads;
            }
            info!("running {} cells x {} modes x {} trials", plan.cells().len(), plan.modes.len(), plan.trials);
            let tables = experiments::run_tables(&plan)?;
            tables.write_all(&out)?;
            print!("{tables}");
            info!("wrote {}", out.display());
            let failures: u64 = tables.cells.iter().map(|c| c.audit_failures).sum();
            if failures > 0 {
                eprintln!("{failures} ri trials failed the trace audit");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Overhead { plan, trials, bank, full_scale } => {
            let mut plan = load_plan(plan.as_deref())?;
            plan.trials = trials;
            if full_scale {
                plan = plan.full_scale();
            }
            let kinds = match bank {
                Bank::Mlp => vec![SteeringKind::Mlp],
                Bank::Geometric => vec![SteeringKind::Geometric],
                Bank::Both => vec![SteeringKind::Mlp, SteeringKind::Geometric],
            };
            for kind in kinds {
                println!("{}", experiments::measure_overhead(&plan, kind)?);
            }
        }
        Command::Scaling { counts, repeats, ticks, full_scale } => {
            let mut cfg = ScalingConfig::default();
            if full_scale {
                cfg = cfg.full_scale();
            }
            if let Some(c) = counts {
                cfg.counts = c;
            }
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            if let Some(t) = ticks {
                cfg.scenario.max_ticks = t;
            }
            println!("{}", experiments::run_scaling(&cfg)?);
        }
        Command::CheckTrace { trace, policies, order, fov } => {
            let reg = registry(fov);
            let policies = load_policies(&policies, order.as_deref(), &reg)?;
            let file = File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let records = read_records(BufReader::new(file))?;
            let mut ok = true;
            for run in traces_by_car(&records)? {
                if run.histories.len() != policies.len() {
                    bail!("trace has {} groups but {} policies were given", run.histories.len(), policies.len());
                }
                let report = check_trace(&policies, &run.released, &run.histories);
                let who = run.car.map_or("trace".to_string(), |c| format!("car {c}"));
                println!("{who}: {} ticks", run.released.len());
                println!("{report}");
                ok &= report.all_pass();
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Simulate { scenario, trace, mode, seed } => {
            let mut sc = match &scenario {
                Some(p) => Scenario::from_toml(&std::fs::read_to_string(p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => Scenario::default(),
            };
            if let Some(s) = seed {
                sc.seed = s;
            }
            sc.record_trace |= trace.is_some();
            let mode = match mode {
                Mode::Bare => ControlMode::Bare,
                Mode::Ri => ControlMode::Ri,
            };
            let result = match run_scenario(&sc, mode) {
                Ok(r) => r,
                Err(ri_switch::sim::SimError::Manager { seed, tick, car, source, dump }) => {
                    if let Some(path) = &trace {
                        write_records(BufWriter::new(File::create(path)?), &dump)?;
                        eprintln!("wrote the failing car's trace to {}", path.display());
                    }
                    bail!("seed {seed}, tick {tick}, car {car}: {source}");
                }
                Err(e) => return Err(e.into()),
            };
            if let Some(path) = &trace {
                let mut w = BufWriter::new(File::create(path)?);
                write_records(&mut w, &result.trace)?;
                w.flush()?;
            }
            println!("{}", serde_json::to_string_pretty(&result)?);
            if !result.audit_ok() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::DumpDot { policy, out } => {
            let src = std::fs::read_to_string(&policy).with_context(|| format!("reading {}", policy.display()))?;
            let p = Policy::from_source(&src, &registry(230.0))?;
            let dot = to_dot(&p.vdta);
            match out {
                Some(path) => std::fs::write(path, dot)?,
                None => print!("{dot}"),
            }
        }
        Command::Lint { policies } => {
            let mut clean = true;
            for path in &policies {
                let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let ast = ri_switch::dsl::parse_policy(&src).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
                for w in lint_overlaps(&ast) {
                    println!("{}: {w}", path.display());
                    clean = false;
                }
            }
            if !clean {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
