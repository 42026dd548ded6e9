use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use thetanav::chip_io::{calibrate, select_units, write_calibration_csv};
use thetanav::harness::{emit, emit_field_map, field_map, run_track, sweep_seeds, PathScript, Rig, RunConfig};
use thetanav::theta_core::{sample_population, VelocityVector};
use thetanav::vector_net::{total_nodes, TargetLocation};
use thetanav::{Error, Result};

#[derive(Parser)]
#[command(name = "thetanav", version, about = "Theta-oscillator localization simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Population seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a population, run the calibration sweep and write the fit report.
    Calibrate {
        #[arg(long, default_value = "calibration.csv")]
        out: PathBuf,
    },
    /// Compile lookup tables for grid targets.
    Compile {
        /// Target cell as `x,y`; repeatable. Defaults to the four cardinal cells.
        #[arg(long = "target", value_parser = parse_pair)]
        targets: Vec<(i32, i32)>,
        #[arg(long, default_value = "tables")]
        out: PathBuf,
    },
    /// Run a path script and write trail, traces, snapshots and manifest.
    Track {
        /// Built-in script name or path to a TOML script.
        #[arg(long, default_value = "path2_detour")]
        script: String,
        #[arg(long, default_value = "track_out")]
        out: PathBuf,
    },
    /// Run one network per grid cell under constant velocity.
    FieldMap {
        #[arg(long, allow_hyphen_values = true, default_value_t = 2.0)]
        vx: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        vy: f64,
        /// Also write a snapshot every this many ticks.
        #[arg(long)]
        snapshot_every: Option<usize>,
        #[arg(long, default_value = "field_out")]
        out: PathBuf,
    },
    /// Repeat a path script over consecutive population seeds.
    Sweep {
        #[arg(long, default_value = "path2_detour")]
        script: String,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Success fraction below which the exit code is nonzero.
        #[arg(long, default_value_t = 1.0)]
        min_success: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Node count of a shared interference network.
    Nodes {
        #[arg(short = 'M', default_value_t = 80)]
        m: u64,
        #[arg(short = 'N', default_value_t = 2)]
        n: u32,
        #[arg(short = 'K', default_value_t = 4)]
        k: u64,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

fn parse_pair(s: &str) -> std::result::Result<(i32, i32), String> {
    let (a, b) = s.split_once(',').ok_or("expected x,y")?;
    Ok((
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run(cli: Cli) -> Result<bool> {
    if let Command::Nodes { m, n, k } = cli.command {
        println!("{}", total_nodes(m, n, k)?);
        return Ok(true);
    }
    if let Command::DefaultConfig = cli.command {
        print!("{}", RunConfig::default().to_toml_string());
        return Ok(true);
    }
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Calibrate { out } => {
            let pop = sample_population(&cfg.population_spec())?;
            let fits = calibrate(&pop, cfg.scan, &cfg.calibration)?;
            write_calibration_csv(&out, &fits)?;
            let admitted = fits
                .iter()
                .filter(|f| f.r2 > cfg.calibration.r2_threshold && f.beta_hat > 0.0)
                .count();
            println!("{} units fitted, {admitted} admitted -> {}", fits.len(), out.display());
            select_units(&fits, cfg.calibration.r2_threshold)?;
        }
        Command::Compile { targets, out } => {
            let rig = Rig::build(&cfg)?;
            let targets = if targets.is_empty() {
                vec![(1, 0), (0, 1), (-1, 0), (0, -1)]
            } else {
                targets
            };
            create_dir(&out)?;
            for (x, y) in targets {
                let table = rig.compile(TargetLocation::from_grid(x, y))?;
                let p = out.join(format!("mux_{x}_{y}.csv"));
                fs::write(&p, table.to_text()).map_err(|e| Error::io(&p, e))?;
                println!("({x},{y}): {} active groups -> {}", table.active_groups(), p.display());
            }
        }
        Command::Track { script, out } => {
            let script = PathScript::resolve(&script, cfg.network.speed)?;
            let result = run_track(&cfg, &script)?;
            emit(&result, &cfg, &script, &out)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let (x, y) = result.final_location;
            println!("{}: {} events, final ({x},{y})", script.name, result.events.len());
            if let Some(expected) = script.expected_final() {
                if expected != result.final_location {
                    eprintln!("expected final ({},{})", expected.0, expected.1);
                    return Ok(false);
                }
            }
        }
        Command::FieldMap {
            vx,
            vy,
            snapshot_every,
            out,
        } => {
            let map = field_map(&cfg, VelocityVector::new(vx, vy))?;
            emit_field_map(&map, &out, snapshot_every)?;
            for w in &map.warnings {
                eprintln!("warning: {w}");
            }
            for row in map.occupancy() {
                let line: String = row.iter().map(|&v| if v == 1 { '#' } else { '.' }).collect();
                println!("{line}");
            }
        }
        Command::Sweep {
            script,
            seeds,
            min_success,
            out,
        } => {
            if seeds == 0 {
                return Err(Error::InvalidArgument("--seeds must be at least 1".into()));
            }
            let script = PathScript::resolve(&script, cfg.network.speed)?;
            let report = sweep_seeds(&cfg, &script, seeds);
            for o in &report.outcomes {
                match &o.cause {
                    None => println!("seed {}: ok", o.seed),
                    Some(c) => println!("seed {}: failed, {c}", o.seed),
                }
            }
            println!(
                "{}: {}/{} succeeded",
                report.script,
                report.successes(),
                report.outcomes.len()
            );
            if let Some(p) = out {
                let text = serde_json::to_string_pretty(&report)?;
                fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            }
            return Ok(report.success_fraction() >= min_success);
        }
        Command::Nodes { .. } | Command::DefaultConfig => unreachable!(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
