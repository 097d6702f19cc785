//! `edchrom`: run a column simulation from a scenario file or a preset.
//!
//! Exit status: 0 on success, 1 when the simulation fails numerically or its
//! output cannot be written, 2 for invalid flags or configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser};
use edchrom::diagnostics::{operating_line_check, operating_line_slope};
use edchrom::integrate::{run, BoundarySampling, RunConfig, SchemeKind};
use edchrom::output::write_run;
use edchrom::scenario::{displacer, parse_scenario, presets, Scenario, ScenarioError};
use edchrom::spatial::Grid;

#[derive(Debug, Parser)]
#[command(name = "edchrom", version, about = "Equilibrium-dispersive column simulator")]
#[command(group(ArgGroup::new("source").args(["scenario", "preset"])))]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Built-in scenario; see --list-presets.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Number of cells.
    #[arg(long)]
    m: Option<usize>,
    /// Time step over cell width.
    #[arg(long, value_name = "RATIO")]
    dt_over_dz: Option<f64>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<SchemeKind>,
    /// Final time; requested snapshots past it are dropped.
    #[arg(long, value_name = "T")]
    t_final: Option<f64>,
    #[arg(long, value_parser = parse_sampling)]
    boundary_sampling: Option<BoundarySampling>,
    /// Explicit stability constant.
    #[arg(long)]
    c0: Option<f64>,
    /// IMEX stability constant.
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Print the explicit and IMEX step bounds and exit.
    #[arg(long)]
    check_stability: bool,
    /// Print the effective scenario as TOML and exit.
    #[arg(long)]
    emit_scenario: bool,
    #[arg(long)]
    list_presets: bool,
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    s.parse()
}

fn parse_sampling(s: &str) -> Result<BoundarySampling, String> {
    match s {
        "step-start" => Ok(BoundarySampling::StepStart),
        "midpoint" => Ok(BoundarySampling::Midpoint),
        _ => Err(format!("unknown boundary sampling `{s}`, expected step-start or midpoint")),
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(cli: &Cli) -> Result<(String, Scenario), Failure> {
    match (&cli.scenario, &cli.preset) {
        (Some(path), None) => {
            let (scenario, _) = parse_scenario(path)?;
            let stem = path
                .file_stem()
                .map_or("run".to_string(), |s| s.to_string_lossy().into_owned());
            let name = scenario.name.clone().unwrap_or(stem);
            Ok((name, scenario))
        }
        (None, Some(name)) => Ok((name.clone(), presets::get(name)?)),
        _ => Err(Failure::Config(
            "one of --scenario or --preset is required".into(),
        )),
    }
}

fn apply_overrides(cli: &Cli, s: &mut Scenario) {
    if let Some(m) = cli.m {
        s.grid.m = m;
    }
    if let Some(r) = cli.dt_over_dz {
        s.time.dt_over_dz = r;
    }
    if let Some(k) = cli.scheme {
        s.scheme.kind = k;
    }
    if let Some(t) = cli.t_final {
        s.time.t_final = t;
        s.time.snapshots.retain(|&x| x <= t);
    }
    if let Some(b) = cli.boundary_sampling {
        s.scheme.boundary_sampling = b;
    }
    if let Some(c0) = cli.c0 {
        s.scheme.c0 = c0;
    }
    if let Some(c1) = cli.c1 {
        s.scheme.c1 = c1;
    }
}

fn print_stability(config: &RunConfig) {
    let explicit = config.explicit_bound();
    let imex = config.imex_bound();
    println!("explicit bound {explicit:.4}");
    println!("IMEX bound {imex:.4}");
    let r = config.dt_over_dz;
    let limit = match config.scheme {
        SchemeKind::ImexRk2 => imex,
        _ => explicit,
    };
    let verdict = if r <= limit { "within" } else { "exceeds" };
    println!("dt/dz {r:.4} {verdict} the bound for {}", config.scheme);
}

fn print_operating_lines(config: &RunConfig) {
    let Some((d, c_d)) = displacer(config) else {
        return;
    };
    let slope = operating_line_slope(&config.isotherm, d, c_d);
    println!(
        "operating line: displacer component {} at c = {c_d}, slope {slope:.4}",
        d + 1
    );
    for (i, flag) in operating_line_check(&config.isotherm, d, c_d)
        .into_iter()
        .enumerate()
    {
        if i != d {
            let verdict = if flag { "plateau expected" } else { "no plateau" };
            println!("  component {}: a = {}, {verdict}", i + 1, config.isotherm.a()[i]);
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if cli.list_presets {
        for name in presets::NAMES {
            println!("{name}");
        }
        return Ok(());
    }
    let (name, mut scenario) = load(cli)?;
    apply_overrides(cli, &mut scenario);
    let config = scenario.to_config()?;

    if cli.emit_scenario {
        print!("{}", Scenario::from_config(&config, Some(&name)).to_toml());
        return Ok(());
    }
    if cli.check_stability {
        print_stability(&config);
        return Ok(());
    }
    print_operating_lines(&config);

    let output = run(&config).map_err(|e| Failure::Runtime(e.to_string()))?;
    let grid: Grid = config.grid;
    let files = write_run(&cli.out_dir, &name, &grid, &output)
        .map_err(|e| Failure::Runtime(format!("writing output: {e}")))?;

    let stats = &output.stats;
    println!("{name}: {} steps, {} files in {}", stats.steps, files.len(), cli.out_dir.display());
    if stats.implicit_stages > 0 {
        println!(
            "newton: {} stages, at most {} iterations",
            stats.implicit_stages, stats.max_newton_iterations
        );
    }
    for snap in &output.snapshots {
        let mass: Vec<String> = snap
            .diagnostics
            .total_mass
            .iter()
            .map(|m| format!("{m:.6}"))
            .collect();
        println!(
            "t = {}: mass [{}], oscillation index {:.2e}",
            snap.time,
            mass.join(", "),
            snap.diagnostics.oscillation_index
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
