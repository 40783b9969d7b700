use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use bcs_radar::dictionary::unit_power_basis;
use bcs_radar::experiments::{
    allocate, bench, measurement_count, parse_methods, prepare, run_trial, sweep, AllocEngine, ExperimentConfig,
    SuccessMode, SweepAxis,
};
use bcs_radar::io::{hex, load_phi, load_scenario, save_phi, scenario_hash, PhiSidecar};
use bcs_radar::measurement::{build_design_problem, design_f, extract_phi};
use bcs_radar::numerics::eig_sym;
use bcs_radar::power::{build_coupling, PowerAllocation};
use bcs_radar::scene::Scenario;
use bcs_radar::Result;

/// Block compressive sensing for distributed MIMO radar.
#[derive(Parser)]
#[command(name = "bcsradar", version)]
struct Cli {
    /// Scenario JSON file; the built-in 2×2 reference scene with 4 pulses when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial per method and print what happened.
    Simulate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Trial index within the seed's stream.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Monte-Carlo success-rate curves.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Gnuplot data file, one indexed block per method.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Fill the mean_runtime_ms column (makes the CSV timing-dependent).
        #[arg(long)]
        runtime: bool,
    },
    /// Solve the measurement design problem and write φ plus a JSON sidecar.
    DesignPhi {
        /// Measurement percentage.
        #[arg(long, default_value_t = 60.0)]
        percent: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Allocate transmitter energy against a stored φ.
    AllocatePower {
        /// φ file written by `design-phi`.
        #[arg(long)]
        phi: PathBuf,
        #[arg(long, default_value = "direct")]
        alloc: AllocEngine,
        /// JSON output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-method recovery time normalized by BMP, plus preprocessing costs.
    Bench {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// JSON output; a table on stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Comma-separated methods, e.g. BMP,BOMP,BOMP-EM.
    #[arg(long, default_value = "BMP,BOMP,BMP-E,BOMP-E,BMP-M,BOMP-M")]
    methods: String,
    #[arg(long = "sweep", default_value = "percent")]
    axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', default_value = "35,40,45,50,55,60")]
    values: Vec<f64>,
    /// Measurement percentage held fixed while sweeping ENR.
    #[arg(long, default_value_t = 60.0)]
    percent: f64,
    /// ENR (dB) held fixed while sweeping the percentage; the scenario's when omitted.
    #[arg(long)]
    enr: Option<f64>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value = "direct")]
    alloc: AllocEngine,
    #[arg(long, default_value = "on_grid")]
    success: SuccessMode,
}

impl ExperimentArgs {
    fn config(&self, mut scenario: Scenario<f64>, seed: u64) -> Result<ExperimentConfig<f64>> {
        if let Some(enr) = self.enr {
            scenario.enr_db = enr;
        }
        let mut c = ExperimentConfig::new(scenario, self.values.clone());
        c.methods = parse_methods(&self.methods)?;
        c.axis = self.axis;
        c.percent = self.percent;
        c.trials = self.trials;
        c.base_seed = seed;
        c.alloc = self.alloc;
        c.success = self.success;
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let scenario = match &cli.scenario {
        Some(path) => load_scenario::<f64>(path)?,
        None => Scenario::reference(4),
    };
    match cli.command {
        Command::Simulate { exp, trial } => simulate(exp.config(scenario, cli.seed)?, trial),
        Command::Sweep { exp, out, plot, runtime } => {
            let mut config = exp.config(scenario, cli.seed)?;
            config.record_runtime = runtime;
            let curve = sweep(&config)?;
            curve.write_csv(output(out.as_deref())?)?;
            if let Some(path) = plot {
                curve.write_gnuplot(BufWriter::new(File::create(path)?))?;
            }
            Ok(())
        }
        Command::DesignPhi { percent, out } => design(&scenario, percent, &out),
        Command::AllocatePower { phi, alloc, out } => allocate_power(&scenario, &phi, alloc, out.as_deref()),
        Command::Bench { exp, out } => {
            let report = bench(&exp.config(scenario, cli.seed)?)?;
            match out {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path)?);
                    serde_json::to_writer_pretty(&mut w, &report)?;
                    writeln!(w)?;
                }
                None => {
                    println!("M = {}, {} trials", report.measurements, report.trials);
                    println!("{:<10} {:>12} {:>11}", "method", "mean ms", "normalized");
                    for r in &report.rows {
                        println!("{:<10} {:>12.4} {:>11.3}", r.method, r.mean_ms, r.normalized);
                    }
                    println!("design {:.1} ms, allocation {:.3} ms", report.design_ms, report.allocation_ms);
                }
            }
            Ok(())
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate(config: ExperimentConfig<f64>, trial: usize) -> Result<()> {
    let prepared = prepare(&config)?;
    let value = config.values[0];
    let truth = match config.success {
        SuccessMode::OnGrid => config.scenario.target_blocks()?,
        SuccessMode::OffGrid => config.scenario.nearest_blocks(),
    };
    println!("{} = {value}, trial {trial}, true blocks {truth:?}", config.axis.column_name());
    for &method in &config.methods {
        let o = run_trial(&config, &prepared, method, value, trial)?;
        let amps: Vec<String> = o.amplitudes.iter().map(|p| format!("{p:.4}")).collect();
        println!(
            "{method:<8} M={} p=[{}] selected={:?} residuals={:?} {} ({:.3} ms)",
            o.measurements,
            amps.join(", "),
            o.solution.selected_blocks,
            o.solution.residual_norms,
            if o.success { "hit" } else { "miss" },
            o.runtime.as_secs_f64() * 1e3,
        );
        for &b in &o.solution.selected_blocks {
            let g = config.scenario.grid.point(b);
            log::debug!("  block {b}: position {:?} velocity {:?}", g.position, g.velocity);
        }
    }
    Ok(())
}

fn design(scenario: &Scenario<f64>, percent: f64, out: &Path) -> Result<()> {
    let m = measurement_count(percent, &scenario.waveform, &scenario.geometry);
    let unit = unit_power_basis(scenario)?;
    let problem = build_design_problem(&unit);
    log::info!("design LP: {} variables, {} constraints", problem.variables(), problem.constraints());
    let designed = design_f(&problem)?;
    let phi = extract_phi(&designed.f, m)?;
    let spectrum = eig_sym(designed.f.view()).values.to_vec();
    let sidecar = PhiSidecar {
        rows: phi.rows(),
        cols: phi.cols(),
        scenario_hash: hex(&scenario_hash(scenario)),
        kind: phi.kind.clone(),
        objective: Some(designed.objective),
        max_violation: Some(designed.max_violation),
        spectrum: Some(spectrum),
        solver: Some(designed.report),
    };
    save_phi(out, &phi, scenario, &sidecar)?;
    log::info!("wrote {}×{} φ to {}", phi.rows(), phi.cols(), out.display());
    Ok(())
}

fn allocate_power(scenario: &Scenario<f64>, phi_path: &Path, engine: AllocEngine, out: Option<&Path>) -> Result<()> {
    let phi = load_phi::<f64>(phi_path, scenario)?;
    let unit = unit_power_basis(scenario)?;
    let coupling = build_coupling(&unit, &phi)?;
    let total = scenario.powers.total_energy();
    let uniform = PowerAllocation::uniform(scenario.geometry.mt(), total);
    let defaults = ExperimentConfig::new(scenario.clone(), vec![100.0]);
    let p = allocate(engine, &unit, &phi, total, defaults.p_min, defaults.floor_frac)?;
    let doc = json!({
        "p": p.amplitudes(),
        "cost_before": coupling.cost(uniform.amplitudes()),
        "cost_after": coupling.cost(p.amplitudes()),
        "method": engine.to_string(),
    });
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    Ok(())
}
