//! `setflow`: run, audit and reproduce shrinking-set evolutions.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use setflow_core::energy::mickey_shape;
use setflow_core::error::Error;
use setflow_core::evolution::{k_sweep, run};
use setflow_core::geometry::{rasterize, read_mask, write_mask, GridSpec, PerimeterScheme};
use setflow_core::grid_solver::{single_step, StepProblem};
use setflow_core::scenario_io::{
    emit_audits, emit_grid, emit_profile, emit_step, load_scenario, mask_overlay_svg, run_profile, sha256_hex,
    GridRun, LoadedScenario, ProfileRun,
};
use setflow_core::verify::{
    audit_trajectory, check_density, check_stability, AuditReport, AuditStatus, StabilityOptions,
};
use setflow_core::{oracle, Mode};

#[derive(Parser)]
#[command(name = "setflow", version, about = "Rate-independent shrinking evolution of planar sets")]
struct Cli {
    /// Worker threads for the k-sweep (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (JSON).
    config: PathBuf,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the first incremental step of a grid scenario.
    Step(RunArgs),
    /// Run a scenario (grid evolution or profile problem) with audits.
    Evolve {
        #[command(flatten)]
        run: RunArgs,
        /// Skip the audits.
        #[arg(long)]
        no_audit: bool,
    },
    /// Audit a scenario run, or a single mask with --mask.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Audit this mask instead of running the scenario.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Time at which the mask is audited.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
    /// Print the closed-form reference constants as JSON.
    Oracle {
        #[arg(long, default_value_t = 5.0)]
        a: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare adhesive runs for several k with the brittle run.
    SweepK {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated k values; defaults to the config's `sweep_k`, then 1,4,16,64.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<f64>>,
    },
    /// Run a named preset from the presets directory.
    ReproduceFig {
        id: String,
        #[arg(long, default_value = "presets")]
        presets: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit codes: 0 ok, 1 other failure, 2 configuration, 3 non-convergence,
/// 4 audit failure.
enum Outcome {
    Ok,
    AuditFailed,
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>().map(Error::root) {
        Some(Error::NonConvergence { .. }) => 3,
        Some(
            Error::Config { .. }
            | Error::InvalidParameter { .. }
            | Error::InvalidGrid(_)
            | Error::InfeasibleStart { .. }
            | Error::NonMonotoneForcing { .. }
            | Error::Json(_)
            | Error::Format { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::AuditFailed) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn load(config: &Path) -> anyhow::Result<LoadedScenario> {
    // An unreadable configuration is a configuration error, unlike later I/O.
    load_scenario(config).map_err(|e| match e {
        Error::Io { path, source } => anyhow::Error::from(Error::Config {
            pointer: "/".into(),
            message: format!("cannot read {}: {source}", path.display()),
        }),
        e => e.into(),
    })
}

fn out_dir(loaded: &LoadedScenario, over: &Option<PathBuf>) -> PathBuf {
    over.clone()
        .unwrap_or_else(|| loaded.config().outputs.directory.clone())
}

fn print_manifest(dir: &Path, hash: &str) {
    println!("{}  {}", hash, dir.join("manifest.json").display());
}

fn report_audits(reports: &[AuditReport]) -> Outcome {
    let mut failed = false;
    for r in reports {
        let tag = match r.status {
            AuditStatus::Pass => "pass",
            AuditStatus::Fail => "FAIL",
            AuditStatus::Indeterminate => "indeterminate",
        };
        eprintln!("audit {:<24} {tag:<13} worst {:.3e}", r.check, r.worst);
        failed |= r.failed();
    }
    if failed {
        Outcome::AuditFailed
    } else {
        Outcome::Ok
    }
}

fn grid_only(loaded: LoadedScenario, what: &str) -> anyhow::Result<GridRun> {
    match loaded {
        LoadedScenario::Grid(g) => Ok(g),
        LoadedScenario::Profile(_) => Err(Error::Config {
            pointer: "/kind".into(),
            message: format!("`{what}` needs a grid scenario"),
        }
        .into()),
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<Outcome> {
    match cmd {
        Command::Step(args) => {
            let loaded = load(&args.config)?;
            let dir = out_dir(&loaded, &args.out);
            let g = grid_only(loaded, "step")?;
            let s = &g.scenario;
            let t = s.times[1];
            let forced = s.forcing.open_set(t, &s.grid);
            let problem = match s.mode {
                Mode::Adhesive { k } => StepProblem::adhesive(&s.initial, &s.forcing.sample(t, &s.grid), k, s.a, s.scheme)?,
                Mode::Brittle => StepProblem::brittle(&s.initial, &forced, s.a, s.scheme)?,
            };
            let outcome = single_step(&problem, &s.solver)?;
            let m = emit_step(&g.config, &s.initial, &forced, &outcome, &dir)?;
            print_manifest(&dir, &m.hash());
            Ok(Outcome::Ok)
        }
        Command::Evolve { run: args, no_audit } => {
            let loaded = load(&args.config)?;
            let dir = out_dir(&loaded, &args.out);
            match loaded {
                LoadedScenario::Grid(g) => evolve_grid(&g, &dir, !no_audit),
                LoadedScenario::Profile(p) => evolve_profile(&p, &dir),
            }
        }
        Command::Verify { run: args, mask, time } => {
            let loaded = load(&args.config)?;
            let dir = out_dir(&loaded, &args.out);
            let g = grid_only(loaded, "verify")?;
            let s = &g.scenario;
            let reports = match mask {
                None => {
                    let traj = run(s)?;
                    audit_trajectory(&traj, s, &g.audits)?
                }
                Some(path) => {
                    let z = read_mask(&path).with_context(|| format!("reading {}", path.display()))?;
                    if z.grid() != &s.grid {
                        anyhow::bail!(Error::Config {
                            pointer: "/domain".into(),
                            message: "mask grid differs from the scenario domain".into(),
                        });
                    }
                    let opts = StabilityOptions {
                        seed: g.audits.seed,
                        random: g.audits.stability_random,
                        ..Default::default()
                    };
                    let mut r = vec![check_stability(time, &z, s.mode, s.a, &s.forcing, s.scheme, &opts)?];
                    if s.mode.is_brittle() {
                        r.push(check_density(&z, &g.audits.density_params(s.a)));
                    }
                    r
                }
            };
            let m = emit_audits(&g.config, &reports, &dir)?;
            print_manifest(&dir, &m.hash());
            Ok(report_audits(&reports))
        }
        Command::Oracle { a, out } => {
            let c = oracle::constants(a)?;
            let text = serde_json::to_string_pretty(&c)? + "\n";
            match out {
                Some(p) => std::fs::write(&p, &text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(Outcome::Ok)
        }
        Command::SweepK { run: args, ks } => {
            let loaded = load(&args.config)?;
            let dir = out_dir(&loaded, &args.out);
            let g = grid_only(loaded, "sweep-k")?;
            let ks = ks
                .or_else(|| g.config.sweep_k.clone())
                .unwrap_or_else(|| vec![1.0, 4.0, 16.0, 64.0]);
            let report = k_sweep(&g.scenario, &ks)?;
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let bytes = serde_json::to_vec_pretty(&report)?;
            let path = dir.join("sweep.json");
            std::fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
            println!("{}  {}", sha256_hex(&bytes), path.display());
            for row in &report.rows {
                eprintln!(
                    "k = {:<6} penalty(T) = {:.6e}  symdiff(T) = {:.6e}",
                    row.k,
                    row.penalty.last().copied().unwrap_or(0.0),
                    row.symdiff.last().copied().unwrap_or(0.0)
                );
            }
            eprintln!(
                "penalty nonincreasing: {}, symdiff nonincreasing: {}",
                report.penalty_nonincreasing, report.symdiff_nonincreasing
            );
            Ok(if report.penalty_nonincreasing && report.symdiff_nonincreasing {
                Outcome::Ok
            } else {
                Outcome::AuditFailed
            })
        }
        Command::ReproduceFig { id, presets, out } => {
            if id == "mickey" {
                let dir = out.unwrap_or_else(|| PathBuf::from("out/mickey"));
                return mickey_figure(&dir);
            }
            let path = presets.join(format!("{id}.json"));
            if !path.exists() {
                anyhow::bail!(Error::Config {
                    pointer: "/".into(),
                    message: format!("no preset `{id}` in {}", presets.display()),
                });
            }
            let loaded = load(&path)?;
            let dir = out_dir(&loaded, &out);
            match loaded {
                LoadedScenario::Grid(g) => evolve_grid(&g, &dir, true),
                LoadedScenario::Profile(p) => evolve_profile(&p, &dir),
            }
        }
    }
}

fn evolve_grid(g: &GridRun, dir: &Path, audit: bool) -> anyhow::Result<Outcome> {
    let traj = run(&g.scenario)?;
    let reports = if audit {
        audit_trajectory(&traj, &g.scenario, &g.audits)?
    } else {
        Vec::new()
    };
    let m = emit_grid(g, &traj, &reports, dir)?;
    print_manifest(dir, &m.hash());
    Ok(report_audits(&reports))
}

fn evolve_profile(p: &ProfileRun, dir: &Path) -> anyhow::Result<Outcome> {
    let results = run_profile(p)?;
    for r in &results {
        eprintln!(
            "a = {:<5} objective {:.9}  stationarity {:.2e}  contact length {:.3}",
            r.a, r.solution.objective, r.solution.stationarity, r.contact_length
        );
    }
    let m = emit_profile(p, &results, dir)?;
    print_manifest(dir, &m.hash());
    Ok(Outcome::Ok)
}

/// The rounded square with both ears, as a static rasterized figure.
fn mickey_figure(dir: &Path) -> anyhow::Result<Outcome> {
    let a = 5.0;
    let grid = GridSpec::square([-1.0, -1.0], 2.0, 256)?;
    let z = rasterize(&mickey_shape(a, [0.0, 0.0], 2), &grid);
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_mask(&z, &dir.join("mickey.pgm"))?;
    std::fs::write(dir.join("mickey.svg"), mask_overlay_svg(&[&z], None))
        .with_context(|| format!("writing {}", dir.display()))?;
    let angle = oracle::mickey_angle();
    let info = serde_json::json!({
        "a": a,
        "angle": angle.angle,
        "chord_over_radius": angle.chord(a) * a,
        "perimeter_crofton": setflow_core::geometry::perimeter_estimate(&z, PerimeterScheme::Crofton),
        "area": setflow_core::geometry::volume(&z),
    });
    let bytes = serde_json::to_vec_pretty(&info)?;
    std::fs::write(dir.join("mickey.json"), &bytes).with_context(|| format!("writing {}", dir.display()))?;
    println!("{}  {}", sha256_hex(&bytes), dir.join("mickey.json").display());
    Ok(Outcome::Ok)
}
