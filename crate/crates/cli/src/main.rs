use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use wlip_core::config::ScenarioConfig;
use wlip_core::design::{design_nlp_grid, solve_moment_arms, DesignGrid, DesignParams, LinkLengths};
use wlip_core::robot::RobotParams;
use wlip_core::scenario::{run_scenario, Event};
use wlip_core::trajopt::{
    solve_ocp, study_point, sweep_factors, ModelParams, OcpModel, OcpSolution, OcpSpec, SATURATION_TOL,
};

#[derive(Parser)]
#[command(name = "wlip", version, about = "Wheeled-bipedal balancing: scenarios, leg design and the deceleration study")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop scenario and write its CSV log.
    Sim {
        /// Scenario configuration (TOML).
        config: PathBuf,
        /// Output directory; overrides `output_dir` of the config (default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for terrain phase and initial-state noise.
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated time in seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Compare WIP and wLIP deceleration with torque-limited trajectory optimization.
    ToStudy {
        #[arg(long, value_enum, default_value_t = ModelChoice::Both)]
        model: ModelChoice,
        /// Also run the ±50 % sweep over (m_c, m_w, l).
        #[arg(long)]
        sweep: bool,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Moment-arm split and link-length grid search.
    Design {
        /// Points per link-length axis of the grid.
        #[arg(long, default_value_t = 5)]
        grid: usize,
        /// Relative half-width of each grid axis around the preset lengths.
        #[arg(long, default_value_t = 0.3)]
        spread: f64,
        /// Evaluate only the preset leg (a one-point grid).
        #[arg(long)]
        preset: bool,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelChoice {
    Both,
    Wip,
    Wlip,
}

/// Failure classes mapped to the exit status.
enum Failure {
    Config(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Run(_) => 2,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| config_err(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn write_events(dir: &Path, name: &str, events: &[Event]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(create(dir, name)?);
    w.write_record(["t", "kind", "wheel", "detail"]).map_err(config_err)?;
    for e in events {
        let (t, kind, wheel, detail) = match e {
            Event::FrictionViolation { t, wheel, ratio } => (*t, "friction-violation", Some(*wheel), format!("{ratio}")),
            Event::Touchdown { t, wheel } => (*t, "touchdown", Some(*wheel), String::new()),
            Event::Release { t, wheel } => (*t, "release", Some(*wheel), String::new()),
            Event::Fall { t, reason } => (*t, "fall", None, reason.clone()),
            Event::ControllerFailure { t, reason } => (*t, "controller-failure", None, reason.clone()),
        };
        let wheel = wheel.map(|w| w.to_string()).unwrap_or_default();
        w.write_record([t.to_string(), kind.into(), wheel, detail]).map_err(config_err)?;
    }
    w.flush().map_err(config_err)
}

fn cmd_sim(config: &Path, out: Option<PathBuf>, seed: Option<u64>, duration: Option<f64>) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::from_file(config).map_err(config_err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if duration.is_some() {
        cfg.duration = duration;
    }
    cfg.validate().map_err(config_err)?;
    let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run_scenario(&cfg).map_err(config_err)?;
    let name = cfg.scenario.name();
    outcome
        .log
        .write_csv(create(&dir, &format!("{name}.csv"))?)
        .map_err(config_err)?;
    write_events(&dir, &format!("{name}_events.csv"), &outcome.events)?;

    let s = &outcome.summary;
    println!("scenario          {} (seed {})", s.scenario, s.seed);
    println!("simulated         {:.3} s", s.simulated);
    println!("final ‖x̄‖         {:.4e}", s.final_error_norm);
    println!("peak joint torque {:.3} N·m", s.peak_joint_torque);
    println!("peak wheel torque {:.3} N·m", s.peak_wheel_torque);
    println!("max CLF slack     {:.3e}", s.max_slack);
    println!("friction events   {}", s.friction_violations);
    println!("log               {}", dir.join(format!("{name}.csv")).display());
    match &s.failure {
        Some(f) => Err(Failure::Run(f.clone())),
        None => Ok(()),
    }
}

fn describe(sol: &OcpSolution, params: &ModelParams, limit: f64) -> String {
    let window = sol
        .saturation_window(limit, SATURATION_TOL)
        .map(|(a, b)| format!("[{a:.3}, {b:.3}] s"))
        .unwrap_or_else(|| "none".into());
    format!(
        "{:<5} stop {:.4} m  v(T) {:+.4} m/s  saturated {window}  cost {:.6}  iters {}",
        sol.model.name(),
        sol.stopping_distance,
        sol.terminal_com_velocity(params),
        sol.cost,
        sol.iterations
    )
}

fn cmd_to_study(model: ModelChoice, sweep: bool, out: &Path) -> Result<(), Failure> {
    let params = ModelParams::default();
    let models: &[OcpModel] = match model {
        ModelChoice::Both => &[OcpModel::Wlip, OcpModel::Wip],
        ModelChoice::Wip => &[OcpModel::Wip],
        ModelChoice::Wlip => &[OcpModel::Wlip],
    };
    let mut solved = Vec::new();
    for &m in models {
        let spec = OcpSpec::study(m, params);
        let sol = solve_ocp(&spec).map_err(|e| Failure::Run(e.to_string()))?;
        if !sol.converged {
            return Err(Failure::Run(format!(
                "{} did not converge: {}",
                m.name(),
                sol.warning.clone().unwrap_or_default()
            )));
        }
        sol.write_csv(create(out, &format!("to_{}.csv", m.name()))?, &params)
            .map_err(config_err)?;
        println!("{}", describe(&sol, &params, spec.input_limit));
        solved.push(sol);
    }
    let mut w = csv::Writer::from_writer(create(out, "to_summary.csv")?);
    w.write_record(["model", "stopping_distance", "terminal_com_velocity", "saturation_start", "saturation_end", "cost"])
        .map_err(config_err)?;
    for sol in &solved {
        let lim = OcpSpec::study(sol.model, params).input_limit;
        let (a, b) = sol.saturation_window(lim, SATURATION_TOL).unwrap_or((f64::NAN, f64::NAN));
        w.write_record([
            sol.model.name().to_string(),
            sol.stopping_distance.to_string(),
            sol.terminal_com_velocity(&params).to_string(),
            a.to_string(),
            b.to_string(),
            sol.cost.to_string(),
        ])
        .map_err(config_err)?;
    }
    w.flush().map_err(config_err)?;
    if let [a, b] = solved.as_slice() {
        let shorter = if a.stopping_distance < b.stopping_distance { a } else { b };
        println!("shorter stopping distance: {}", shorter.model.name());
    }

    if sweep {
        let mut w = csv::Writer::from_writer(create(out, "to_sweep.csv")?);
        w.write_record([
            "f_mc", "f_mw", "f_l", "wlip_distance", "wip_distance", "wlip_v_end", "wip_v_end", "saturates", "stops",
            "shorter", "pass",
        ])
        .map_err(config_err)?;
        println!("{:>5} {:>5} {:>5} {:>9} {:>9} {:>4} {:>5} {:>7} verdict", "m_c", "m_w", "l", "d_wlip", "d_wip", "sat", "stop", "shorter");
        let mut passed = 0;
        for f in sweep_factors() {
            let (v, _, _) = study_point(params, f).map_err(|e| Failure::Run(e.to_string()))?;
            passed += v.passed() as usize;
            println!(
                "{:>5} {:>5} {:>5} {:>9.4} {:>9.4} {:>4} {:>5} {:>7} {}",
                f[0],
                f[1],
                f[2],
                v.wlip_distance,
                v.wip_distance,
                v.saturates,
                v.stops,
                v.shorter,
                if v.passed() { "pass" } else { "fail" }
            );
            let mut rec: Vec<String> = f.iter().map(|x| x.to_string()).collect();
            rec.extend(
                [v.wlip_distance, v.wip_distance, v.wlip_terminal_velocity, v.wip_terminal_velocity]
                    .iter()
                    .map(|x| x.to_string()),
            );
            rec.extend([v.saturates, v.stops, v.shorter, v.passed()].iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(config_err)?;
        }
        w.flush().map_err(config_err)?;
        println!("{passed}/{} sweep points pass every check", sweep_factors().len());
    }
    Ok(())
}

fn cmd_design(grid_points: usize, spread: f64, preset: bool, out: &Path) -> Result<(), Failure> {
    let robot = RobotParams::preset();
    let lengths = LinkLengths::of(&robot);
    let design = DesignParams::of(&robot).map_err(config_err)?;
    let (a, b) = solve_moment_arms(design.thigh_mass, design.base_mass).map_err(config_err)?;
    println!("L1/LH = {a:.2}  L2/LH = {b:.2}  (m = {} kg, M = {} kg)", design.thigh_mass, design.base_mass);

    let n = if preset { 1 } else { grid_points };
    if n == 0 {
        return Err(Failure::Config("--grid needs at least one point".into()));
    }
    let grid = DesignGrid::around(&lengths, n, spread);
    let report = design_nlp_grid(&grid, &design).map_err(config_err)?;
    let mut w = csv::Writer::from_writer(create(out, "design_grid.csv")?);
    w.write_record(["pelvis", "thigh", "shank", "cost", "workspace", "excluded"])
        .map_err(config_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in &report.candidates {
        w.write_record([
            c.lengths.pelvis.to_string(),
            c.lengths.thigh.to_string(),
            c.lengths.shank.to_string(),
            opt(c.cost),
            opt(c.workspace),
            c.excluded.clone().unwrap_or_default(),
        ])
        .map_err(config_err)?;
    }
    w.flush().map_err(config_err)?;

    let reference = design_nlp_grid(&DesignGrid::around(&lengths, 1, 0.0), &design).map_err(config_err)?;
    let preset_cost = reference.best().and_then(|c| c.cost);
    match preset_cost {
        Some(c) => println!(
            "preset (l_p, l_h, l_k) = ({}, {}, {}) cost {c:.6}, lower-cost fraction {:.3}",
            lengths.pelvis,
            lengths.thigh,
            lengths.shank,
            report.rank_fraction(c)
        ),
        None => println!("preset leg is excluded by the grid constraints"),
    }
    if let Some(best) = report.best() {
        println!(
            "best   (l_p, l_h, l_k) = ({:.4}, {:.4}, {:.4}) cost {:.6} of {} candidates",
            best.lengths.pelvis,
            best.lengths.thigh,
            best.lengths.shank,
            best.cost.unwrap_or(f64::NAN),
            report.candidates.len()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sim {
            config,
            out,
            seed,
            duration,
        } => cmd_sim(&config, out, seed, duration),
        Command::ToStudy { model, sweep, out } => cmd_to_study(model, sweep, &out),
        Command::Design {
            grid,
            spread,
            preset,
            out,
        } => cmd_design(grid, spread, preset, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(m) | Failure::Run(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
