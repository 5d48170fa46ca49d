use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use boselat::config::{
    AreaUnits, ConfigError, Fig2Section, GateName, LeakageScanSection, PhaseSubtraction, ScenarioConfig, ScenarioKind, SectorSection,
};
use boselat::scenario::{dim_cap_from_env, run_scenario, ScenarioError, ScenarioResult};

#[derive(Parser)]
#[command(name = "boselat", version, about = "Dual-rail bosonic lattice gate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the Fock sector of L modes holding N bosons.
    Sector {
        #[arg(long)]
        modes: usize,
        #[arg(long)]
        particles: u32,
        /// Also write sector.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectrum of the Hamiltonian described by a config.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize and simulate one gate.
    Gate {
        #[arg(value_parser = parse_gate)]
        name: GateName,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Controlled-phase trajectory of |11> under constant tunneling.
    Fig2 {
        #[arg(long)]
        m1: u32,
        #[arg(long)]
        m2: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
        /// Divide out exp(-3 i eps t) instead of exp(-2 i eps t).
        #[arg(long)]
        subtract_sector_phase: bool,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Leakage out of the logical levels for Gaussian tunneling pulses.
    LeakageScan {
        #[arg(long)]
        n: u32,
        /// Comma-separated rotation angles (pulse areas with --pulse-areas).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        areas: Vec<f64>,
        /// Comma-separated Gaussian widths as fractions of the window.
        #[arg(long, value_delimiter = ',')]
        sigma_frac: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8.0)]
        duration: f64,
        #[arg(long, default_value_t = 1.0)]
        eps1: f64,
        #[arg(long, default_value_t = 1.0)]
        eps2: f64,
        /// Treat --areas as raw pulse integrals.
        #[arg(long)]
        pulse_areas: bool,
        /// Add a rectangular pulse of equal area for comparison.
        #[arg(long)]
        compare_step: bool,
        #[arg(long, default_value_t = 0.5)]
        step_width_frac: f64,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run any scenario config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_gate(s: &str) -> Result<GateName, String> {
    s.parse().map_err(|e: ConfigError| e.to_string())
}

fn expect_kind(cfg: &ScenarioConfig, kind: ScenarioKind) -> ScenarioResult<()> {
    if cfg.kind != kind {
        return Err(ConfigError::Invalid(format!("config has kind {:?}, expected {kind:?}", cfg.kind)).into());
    }
    Ok(())
}

fn output_dir(flag: Option<PathBuf>, cfg: &ScenarioConfig) -> ScenarioResult<PathBuf> {
    flag.or_else(|| cfg.output.clone())
        .ok_or_else(|| ConfigError::Invalid("no output directory: pass --out or set `output`".into()).into())
}

fn execute(cli: Cli) -> ScenarioResult<String> {
    let cap = dim_cap_from_env()?;
    let (cfg, out) = match cli.command {
        Command::Sector { modes, particles, out } => {
            let mut cfg = ScenarioConfig::new(ScenarioKind::Sector);
            cfg.sector = Some(SectorSection { modes, particles });
            match out {
                Some(dir) => (cfg, dir),
                None => return print_sector(modes, particles, cap),
            }
        }
        Command::Spectrum { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            expect_kind(&cfg, ScenarioKind::Spectrum)?;
            let out = output_dir(out, &cfg)?;
            (cfg, out)
        }
        Command::Gate { name, config, out } => {
            let mut cfg = ScenarioConfig::load_unvalidated(&config)?;
            expect_kind(&cfg, ScenarioKind::Gate)?;
            let g = cfg
                .gate
                .as_mut()
                .ok_or_else(|| ConfigError::Invalid("gate config needs a [gate] section".into()))?;
            match g.name {
                Some(existing) if existing != name => {
                    return Err(ConfigError::Invalid(format!("config describes gate {existing:?}, not {name:?}")).into())
                }
                _ => g.name = Some(name),
            }
            (cfg, out)
        }
        Command::Fig2 {
            m1,
            m2,
            eps,
            out,
            subtract_sector_phase,
            stride,
            dt,
        } => {
            let mut cfg = ScenarioConfig::new(ScenarioKind::Fig2);
            cfg.fig2 = Some(Fig2Section {
                m1,
                m2,
                eps,
                subtract: if subtract_sector_phase {
                    PhaseSubtraction::Derivation
                } else {
                    PhaseSubtraction::Caption
                },
            });
            cfg.numerics.trajectory_stride = stride;
            cfg.numerics.dt = dt;
            (cfg, out)
        }
        Command::LeakageScan {
            n,
            areas,
            sigma_frac,
            out,
            duration,
            eps1,
            eps2,
            pulse_areas,
            compare_step,
            step_width_frac,
            dt,
        } => {
            let mut cfg = ScenarioConfig::new(ScenarioKind::LeakageScan);
            cfg.leakage_scan = Some(LeakageScanSection {
                particles: n,
                areas,
                sigma_fracs: sigma_frac,
                duration,
                eps1,
                eps2,
                area_units: if pulse_areas { AreaUnits::Pulse } else { AreaUnits::Rotation },
                compare_step,
                step_width_fraction: step_width_frac,
            });
            cfg.numerics.dt = dt;
            (cfg, out)
        }
        Command::Run { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let out = output_dir(out, &cfg)?;
            (cfg, out)
        }
    };
    let outcome = run_scenario(&cfg, &out, cap)?;
    Ok(outcome.summary)
}

fn print_sector(modes: usize, particles: u32, cap: usize) -> ScenarioResult<String> {
    let sector = boselat::fock::enumerate_sector_capped(modes, particles, cap).map_err(ScenarioError::from)?;
    let mut text = format!("dimension {}\n", sector.dimension());
    for (k, state) in sector.basis().iter().enumerate() {
        text.push_str(&format!("{k} {state}\n"));
    }
    text.pop();
    Ok(text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
