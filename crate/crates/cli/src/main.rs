//! Command-line front end.
//!
//! Exit codes: 0 success (optimal), 1 internal error, 2 usage or parse
//! error, 3 infeasible, 4 heuristic or budget-truncated result.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use sfc_reconfig::io::{load_instance, load_solution, load_state, save_instance, save_solution, save_state};
use sfc_reconfig::milp::{build_milp, export_lp, sidecar};
use sfc_reconfig::solver::{solve, SolveResult, SolverMode, SolverOptions};
use sfc_reconfig::sweep::{parse_grid, run_sweep, DEFAULT_GRID};
use sfc_reconfig::{generate_scenario, initial_state, validate, CandidateSet, Error, ScenarioSize};

const OUT_ENV: &str = "SFC_RECONF_OUT";

#[derive(Parser)]
#[command(name = "sfc-reconfig", version, about = "SFC placement reconfiguration optimizer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a scenario: writes instance.json and state.json
    Generate {
        #[arg(long)]
        size: ScenarioSize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Solve at one alpha and write the solution JSON
    Solve {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        alpha: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: Output,
    },
    /// Solve over an alpha grid and write CSV results
    Sweep {
        #[command(flatten)]
        input: Input,
        /// start:stop:step or a comma list
        #[arg(long, default_value = DEFAULT_GRID)]
        grid: String,
        #[command(flatten)]
        solver: SolverArgs,
        /// Worker threads, 0 for one per core
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Export the MILP at one alpha as an LP file plus a variable map
    ExportLp {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 4)]
        k_paths: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Check a state (or a solution against the state) for feasibility
    Validate {
        #[command(flatten)]
        input: Input,
        /// Solution file to check; migrations are taken relative to the state
        #[arg(long)]
        solution: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    state: PathBuf,
}

#[derive(Args)]
struct Output {
    /// Output path; defaults to a file (or directory) under $SFC_RECONF_OUT
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
    /// Overwrite existing files
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "exact")]
    solver: SolverMode,
    #[arg(long, default_value_t = 4)]
    k_paths: usize,
    /// Wall-clock budget per solve, seconds
    #[arg(long)]
    budget_s: Option<f64>,
    /// Seed of the annealing heuristic
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            mode: self.solver,
            k_paths: self.k_paths,
            budget_s: self.budget_s,
            seed: self.seed,
            ..SolverOptions::default()
        }
    }
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn usage(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, err: err.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Infeasible { .. } => 3,
            Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Reference { .. }
            | Error::InvalidState(_)
            | Error::LpParse { .. }
            | Error::Json(_)
            | Error::InvalidTopology(_)
            | Error::SpaceTooLarge { .. } => 2,
            _ => 1,
        };
        let mut err = anyhow!("{e}");
        if let Error::Infeasible {
            report: Some(report), ..
        } = &e
        {
            err = err.context(report.to_string());
        }
        Failure { code, err }
    }
}

type Outcome = Result<u8, Failure>;

impl Output {
    fn resolve(&self, default_name: &str) -> PathBuf {
        self.output.clone().unwrap_or_else(|| {
            let base = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
            base.join(default_name)
        })
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)
}

fn write(path: &Path, text: &str, force: bool) -> Result<(), Failure> {
    if path.exists() && !force {
        return Err(usage(anyhow!("{} exists (use --force to overwrite)", path.display())));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(|err| Failure { code: 1, err })?;
    }
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(|err| Failure { code: 1, err })
}

/// `foo.csv` -> `foo.<suffix>`
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn load_input(input: &Input) -> Result<(sfc_reconfig::Instance, sfc_reconfig::NetworkState), Failure> {
    let inst = load_instance(&read(&input.instance)?)
        .map_err(|e| usage(anyhow!("{}: {e}", input.instance.display())))?;
    let state =
        load_state(&read(&input.state)?).map_err(|e| usage(anyhow!("{}: {e}", input.state.display())))?;
    Ok((inst, state))
}

fn print_summary(r: &SolveResult) {
    let b = &r.solution.breakdown;
    println!("alpha          {}", b.alpha);
    println!("objective      {:.9}", r.objective);
    println!("cost_np        {:.9}  ({} W on)", b.cost_np, b.energy_w);
    println!("cost_rec       {:.9}", b.cost_rec);
    println!("migrations     {}", b.migrations);
    println!("rule changes   {}", b.raw.u);
    println!("term    raw              normalized");
    let names = ["u", "v", "w", "x", "y", "z"];
    for ((n, raw), norm) in names.iter().zip(b.raw.as_array()).zip(b.normalized.as_array()) {
        println!("{n:<7} {raw:<16.9} {norm:.9}");
    }
    println!(
        "optimality     {:?} ({} nodes, {} assignments, {:.3} s)",
        r.optimality, r.nodes_explored, r.assignments_evaluated, r.wall_time_s
    );
}

fn run(cli: Cli) -> Outcome {
    match cli.cmd {
        Cmd::Generate { size, seed, out } => {
            let dir = out.resolve(&format!("{size}-{seed}"));
            let inst = generate_scenario(size, seed, None)?;
            let state = initial_state(&inst)?;
            let (ip, sp) = (dir.join("instance.json"), dir.join("state.json"));
            for p in [&ip, &sp] {
                if p.exists() && !out.force {
                    return Err(usage(anyhow!("{} exists (use --force to overwrite)", p.display())));
                }
            }
            write(&ip, &save_instance(&inst)?, out.force)?;
            write(&sp, &save_state(&state)?, out.force)?;
            println!("wrote {} and {}", ip.display(), sp.display());
            Ok(0)
        }
        Cmd::Solve {
            input,
            alpha,
            solver,
            out,
        } => {
            let (inst, state) = load_input(&input)?;
            let r = solve(&inst, &state, alpha, &solver.options())?;
            let path = out.resolve("solution.json");
            let mut doc: serde_json::Value = serde_json::from_str(&save_solution(&r.solution)?).map_err(Error::from)?;
            doc["solver"] = serde_json::json!({
                "options": solver.options(),
                "optimality": r.optimality,
                "objective": r.objective,
                "decision": r.decision,
                "nodes_explored": r.nodes_explored,
                "assignments_evaluated": r.assignments_evaluated,
            });
            let mut text = serde_json::to_string_pretty(&doc).map_err(Error::from)?;
            text.push('\n');
            write(&path, &text, out.force)?;
            print_summary(&r);
            println!("wrote {}", path.display());
            Ok(if r.is_optimal() { 0 } else { 4 })
        }
        Cmd::Sweep {
            input,
            grid,
            solver,
            jobs,
            out,
        } => {
            let (inst, state) = load_input(&input)?;
            let grid = parse_grid(&grid)?;
            let res = run_sweep(&inst, &state, &grid, &solver.options(), jobs)?;
            let path = out.resolve("sweep.csv");
            let delta = sibling(&path, "delta.csv");
            let meta = sibling(&path, "meta.json");
            let source = serde_json::json!({
                "instance": input.instance,
                "state": input.state,
            });
            let mut meta_text = serde_json::to_string_pretty(&res.meta(source)).map_err(Error::from)?;
            meta_text.push('\n');
            for p in [&path, &delta, &meta] {
                if p.exists() && !out.force {
                    return Err(usage(anyhow!("{} exists (use --force to overwrite)", p.display())));
                }
            }
            write(&path, &res.to_csv(), out.force)?;
            write(&delta, &res.delta_csv(), out.force)?;
            write(&meta, &meta_text, out.force)?;
            print!("{}", res.to_csv());
            let failed = res.rows.iter().filter(|r| r.outcome.is_err()).count();
            for r in res.rows.iter().filter(|r| r.outcome.is_err()) {
                eprintln!("alpha {}: {}", r.alpha, r.outcome.as_ref().unwrap_err());
            }
            Ok(if failed > 0 {
                3
            } else if res.all_optimal() {
                0
            } else {
                4
            })
        }
        Cmd::ExportLp {
            input,
            alpha,
            k_paths,
            out,
        } => {
            let (inst, state) = load_input(&input)?;
            let cands = CandidateSet::build(&inst, &state, k_paths)?;
            let model = build_milp(&inst, &state, alpha, &cands)?;
            let path = out.resolve("model.lp");
            let vars = sibling(&path, "vars.json");
            let mut vars_text = serde_json::to_string_pretty(&sidecar(&model)?).map_err(Error::from)?;
            vars_text.push('\n');
            for p in [&path, &vars] {
                if p.exists() && !out.force {
                    return Err(usage(anyhow!("{} exists (use --force to overwrite)", p.display())));
                }
            }
            write(&path, &export_lp(&model)?, out.force)?;
            write(&vars, &vars_text, out.force)?;
            println!(
                "wrote {} ({} variables, {} constraints) and {}",
                path.display(),
                model.vars.len(),
                model.constraints.len(),
                vars.display()
            );
            Ok(0)
        }
        Cmd::Validate { input, solution } => {
            let (inst, state) = load_input(&input)?;
            let report = match &solution {
                Some(p) => {
                    let sol = load_solution(&read(p)?).map_err(|e| usage(anyhow!("{}: {e}", p.display())))?;
                    validate(&inst, &sol.config, Some(&state))
                }
                None => validate(&inst, &state, None),
            };
            print!("{report}");
            Ok(if report.is_feasible() { 0 } else { 3 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
