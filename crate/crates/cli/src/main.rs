mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonFlags, InitFlags, IntegratorFlags, ModelFlags, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "rfcw",
    version,
    about = "Dissipative Curie-Weiss model with a random field"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

fn parse_serde<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Exact finite-N stochastic simulation.
    Simulate {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        init: InitFlags,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        record_dt: Option<f64>,
        /// full_spin or order_param_only.
        #[arg(long, value_parser = parse_serde::<rfcw::microsim::SimMode>)]
        mode: Option<rfcw::microsim::SimMode>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Integrate one of the limit systems.
    Integrate {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        init: InitFlags,
        #[command(flatten)]
        integrator: IntegratorFlags,
        /// full3d, planar or lienard.
        #[arg(long, value_parser = parse_serde::<rfcw::odeflow::System>)]
        system: Option<rfcw::odeflow::System>,
        /// forward or backward.
        #[arg(long, value_parser = parse_serde::<rfcw::odeflow::Direction>)]
        direction: Option<rfcw::odeflow::Direction>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        record_dt: Option<f64>,
        /// Also record this many upward crossings of λ = 0.
        #[arg(long)]
        crossings: Option<usize>,
    },
    /// Spectrum, Lyapunov coefficient and zeros of g at one point.
    Stability {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Zeros of g and the separation curve.
    Gamma {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Stable and unstable limit cycles.
    Cycle {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Bracket the saddle-node of cycles for one field intensity.
    Betastar {
        #[command(flatten)]
        common: CommonFlags,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Classify an (h, beta) grid.
    Scan {
        #[command(flatten)]
        common: CommonFlags,
        /// start:step:end
        #[arg(long = "h")]
        h_range: Option<String>,
        /// start:step:end
        #[arg(long = "beta")]
        beta_range: Option<String>,
        #[arg(long)]
        boundary_tol: Option<f64>,
    },
    /// Distance between finite-N runs and the limit ODE.
    Lln {
        #[command(flatten)]
        common: CommonFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        init: InitFlags,
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long)]
        seeds_per_n: Option<usize>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        record_dt: Option<f64>,
        #[arg(long, value_parser = parse_serde::<rfcw::microsim::SimMode>)]
        mode: Option<rfcw::microsim::SimMode>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Second Lyapunov number at the tricritical point.
    Lyapunov2 {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Re-run a command from its manifest.json.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Simulate { .. } => "simulate",
            Cmd::Integrate { .. } => "integrate",
            Cmd::Stability { .. } => "stability",
            Cmd::Gamma { .. } => "gamma",
            Cmd::Cycle { .. } => "cycle",
            Cmd::Betastar { .. } => "betastar",
            Cmd::Scan { .. } => "scan",
            Cmd::Lln { .. } => "lln",
            Cmd::Lyapunov2 { .. } => "lyapunov2",
            Cmd::Replay { .. } => "replay",
        }
    }

    /// Flag values as a sparse settings overlay, plus the config file path.
    fn flags(&self) -> (Option<PathBuf>, Settings) {
        let mut s = Settings::default();
        let common = match self {
            Cmd::Simulate {
                common,
                model,
                init,
                n,
                t_end,
                record_dt,
                mode,
                seed,
            } => {
                model.apply(&mut s);
                init.apply(&mut s);
                s.n = *n;
                s.t_end = *t_end;
                s.record_dt = *record_dt;
                s.mode = *mode;
                s.seed = *seed;
                common
            }
            Cmd::Integrate {
                common,
                model,
                init,
                integrator,
                system,
                direction,
                t_end,
                record_dt,
                crossings,
            } => {
                model.apply(&mut s);
                init.apply(&mut s);
                integrator.apply(&mut s);
                s.system = *system;
                s.direction = *direction;
                s.t_end = *t_end;
                s.record_dt = *record_dt;
                s.crossings = *crossings;
                common
            }
            Cmd::Stability { common, model }
            | Cmd::Gamma { common, model }
            | Cmd::Cycle { common, model } => {
                model.apply(&mut s);
                common
            }
            Cmd::Betastar { common, h, tol } => {
                s.h = *h;
                s.tol = *tol;
                common
            }
            Cmd::Scan {
                common,
                h_range,
                beta_range,
                boundary_tol,
            } => {
                s.h_range.clone_from(h_range);
                s.beta_range.clone_from(beta_range);
                s.boundary_tol = *boundary_tol;
                common
            }
            Cmd::Lln {
                common,
                model,
                init,
                n_list,
                seeds_per_n,
                t_end,
                record_dt,
                mode,
                seed,
            } => {
                model.apply(&mut s);
                init.apply(&mut s);
                s.n_list.clone_from(n_list);
                s.seeds_per_n = *seeds_per_n;
                s.t_end = *t_end;
                s.record_dt = *record_dt;
                s.mode = *mode;
                s.seed = *seed;
                common
            }
            Cmd::Lyapunov2 { common } => common,
            Cmd::Replay { output_dir, .. } => {
                s.output_dir.clone_from(output_dir);
                return (None, s);
            }
        };
        let mut c = Settings::default();
        common.apply(&mut c);
        s.overlay(&c);
        (common.config.clone(), s)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.cmd {
        Cmd::Replay { manifest, .. } => {
            let (_, overrides) = cli.cmd.flags();
            commands::replay(manifest, &overrides)
        }
        cmd => {
            let (file, flags) = cmd.flags();
            match Settings::resolve(file.as_deref(), &flags) {
                Ok(settings) => commands::dispatch(cmd.name(), &settings),
                Err(e) => Err(commands::Failure::Usage(e)),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
