use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rfcw::bifurcation::{self, CycleSearch};
use rfcw::microsim::{self, LlnSettings, SimConfig, SimInit};
use rfcw::odeflow::{self, IntegratorConfig, System};
use rfcw::{output, seeds, stability, LienardState, ModelParams, OrderState, PlanarState};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{parse_range, Settings};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, unreadable config, I/O.
    Usage(anyhow::Error),
    /// The computation itself failed.
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Numerical(e) => e,
        }
    }
}

type Outcome<T> = Result<T, Failure>;

trait Classify<T> {
    fn usage(self) -> Outcome<T>;
    fn numerical(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Outcome<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn numerical(self) -> Outcome<T> {
        self.map_err(|e| Failure::Numerical(e.into()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Settings,
    pub outputs: Vec<String>,
}

macro_rules! get {
    ($s:ident . $f:ident) => {
        $s.$f
            .clone()
            .expect(concat!("unresolved setting ", stringify!($f)))
    };
}

/// Collects artifacts into the output directory and writes the manifest last.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Outcome<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))
            .usage()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write<F>(&mut self, name: &str, body: F) -> Outcome<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path)
            .with_context(|| format!("creating {}", path.display()))
            .usage()?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .with_context(|| format!("writing {}", path.display()))
            .usage()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Outcome<()> {
        let text = serde_json::to_string_pretty(value).usage()?;
        self.write(name, |w| writeln!(w, "{text}"))
    }

    fn finish(self, command: &str, config: &Settings) -> Outcome<()> {
        let manifest = Manifest {
            tool: "rfcw".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            outputs: self.files,
        };
        let text = serde_json::to_string_pretty(&manifest).usage()?;
        let path = self.dir.join(MANIFEST);
        fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .usage()
    }
}

fn params(s: &Settings) -> Outcome<ModelParams> {
    ModelParams::new(get!(s.beta), get!(s.h)).usage()
}

fn order_init(s: &Settings) -> OrderState {
    OrderState::new(get!(s.m0), get!(s.m_eta0), get!(s.lambda0))
}

fn integrator(s: &Settings) -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: get!(s.rel_tol),
        abs_tol: get!(s.abs_tol),
        max_step: get!(s.max_step),
        direction: get!(s.direction),
    }
}

pub fn dispatch(command: &str, s: &Settings) -> Outcome<()> {
    let threads = get!(s.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))
        .usage()?;
    let mut out = Outputs::new(&get!(s.output_dir))?;
    pool.install(|| match command {
        "simulate" => simulate(s, &mut out),
        "integrate" => integrate(s, &mut out),
        "stability" => stability_cmd(s, &mut out),
        "gamma" => gamma(s, &mut out),
        "cycle" => cycle(s, &mut out),
        "betastar" => betastar(s, &mut out),
        "scan" => scan(s, &mut out),
        "lln" => lln(s, &mut out),
        "lyapunov2" => lyapunov2(&mut out),
        other => Err(Failure::Usage(anyhow!("unknown command '{other}'"))),
    })?;
    out.finish(command, s)
}

pub fn replay(manifest: &Path, overrides: &Settings) -> Outcome<()> {
    let text = fs::read_to_string(manifest)
        .with_context(|| format!("reading {}", manifest.display()))
        .usage()?;
    let m: Manifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", manifest.display()))
        .usage()?;
    let mut config = Settings::defaults();
    config.overlay(&m.config);
    config.overlay(overrides);
    dispatch(&m.command, &config)
}

fn simulate(s: &Settings, out: &mut Outputs) -> Outcome<()> {
    let p = params(s)?;
    let n = get!(s.n);
    let cfg = SimConfig {
        n,
        t_end: get!(s.t_end),
        seed: get!(s.seed),
        record_dt: get!(s.record_dt),
        mode: get!(s.mode),
    };
    cfg.validate().usage()?;
    let eta =
        microsim::sample_disorder(n, seeds::derive(cfg.seed, &[seeds::STREAM_DISORDER])).usage()?;
    let traj = microsim::simulate(&cfg, &p, &SimInit::Nearest(order_init(s)), &eta).numerical()?;
    out.write("trajectory.csv", |w| output::write_trajectory(w, &traj))
}

fn integrate(s: &Settings, out: &mut Outputs) -> Outcome<()> {
    let p = params(s)?;
    let cfg = integrator(s);
    cfg.tolerances().validate().usage()?;
    let t_end = get!(s.t_end);
    let dt = get!(s.record_dt);
    let init = order_init(s);
    let planar = init.planar();
    match get!(s.system) {
        System::Full3D => {
            let sol = odeflow::integrate_dense(&p, init, t_end, &cfg).numerical()?;
            out.write("trajectory.csv", |w| {
                output::write_trajectory(w, &sol.sample(dt))
            })?;
        }
        System::Planar => {
            let sol = odeflow::integrate_dense(&p, planar, t_end, &cfg).numerical()?;
            out.write("trajectory.csv", |w| {
                output::write_trajectory(w, &sol.sample(dt))
            })?;
        }
        System::Lienard => {
            let sol =
                odeflow::integrate_dense(&p, planar.to_lienard(p.beta), t_end, &cfg).numerical()?;
            out.write("trajectory.csv", |w| {
                output::write_trajectory(w, &sol.sample(dt))
            })?;
        }
    }
    let count = get!(s.crossings);
    if count > 0 {
        let start: LienardState = PlanarState::to_lienard(planar, p.beta);
        let cr = odeflow::poincare_crossings(&p, start, count, &cfg).numerical()?;
        out.write("crossings.csv", |w| output::write_crossings(w, &cr))?;
    }
    Ok(())
}

fn stability_cmd(s: &Settings, out: &mut Outputs) -> Outcome<()> {
    let p = params(s)?;
    let report = stability::stability_report(&p);
    println!("{}", serde_json::to_string_pretty(&report).usage()?);
    out.json("stability.json", &report)
}

fn gamma(s: &Settings, out: &mut Outputs) -> Outcome<()> {
    let p = params(s)?;
    let analysis = stability::analyze_gamma(&p);
    let tangency = stability::beta_t_with_point(p.h).ok();
    let value = json!({
        "h": p.h,
        "beta": p.beta,
        "analysis": analysis,
        "beta_t": tangency.map(|t| t.0),
        "lambda_star": tangency.map(|t| t.1),
    });
    out.json("gamma.json", &value)
}

fn cycle(s: &Settings, out: &mut Outputs) -> Outcome<()> {
    let p = params(s)?;
    let stable = bifurcation::find_stable_cycle(&p).numerical()?;
    let unstable = if p.origin_stable() {
        bifurcation::find_unstable_cycle_with(
            &p,
            stable.map(|c| c.section_point),
            &CycleSearch::default(),
        )
        .numerical()?
    } else {
        None
    };
    let value = json!({
        "h": p.h,
        "beta": p.beta,
        "beta_c": p.beta_c(),
        "origin_stable": p.origin_stable(),
        "stable": stable,
        "unstable": unstable,
    });
    println!("{}", serde_json::to_string_pretty(&value).usage()?);
    out.json("cycles.json", &value)
}

fn betastar(s: &Settings, out: &mut Outputs) -> Outcome<()> {
    let h = get!(s.h);
    let tol = get!(s.tol);
    if h <= rfcw::H_TC || tol < 1e-6 {
        return Err(Failure::Usage(anyhow!(
            "betastar needs h > {} and tol >= 1e-6",
            rfcw::H_TC
        )));
    }
    let bracket = bifurcation::beta_star(h, tol).numerical()?;
    println!("{} {}", output::num(bracket.lo), output::num(bracket.hi));
    out.json("beta_star.json", &bracket)?;
    let sample = bifurcation::BetaStarSample {
        h,
        bracket: Some(bracket),
        error: None,
    };
    out.write("beta_star.csv", |w| {
        output::write_beta_star(w, std::slice::from_ref(&sample))
    })
}

fn scan(s: &Settings, out: &mut Outputs) -> Outcome<()> {
    let hs = parse_range(&get!(s.h_range)).usage()?;
    let betas = parse_range(&get!(s.beta_range)).usage()?;
    if hs.iter().any(|h| *h < 0.0) || betas.iter().any(|b| *b <= 0.0) {
        return Err(Failure::Usage(anyhow!("scan needs h >= 0 and beta > 0")));
    }
    let result = bifurcation::scan_phase_diagram(&hs, &betas, get!(s.boundary_tol));
    out.write("phase.csv", |w| output::write_phase(w, &result))?;
    out.write("beta_star.csv", |w| {
        output::write_beta_star(w, &result.beta_star)
    })
}

fn lln(s: &Settings, out: &mut Outputs) -> Outcome<()> {
    let p = params(s)?;
    let settings = LlnSettings {
        t_end: get!(s.t_end),
        record_dt: get!(s.record_dt),
        seeds_per_n: get!(s.seeds_per_n),
        root_seed: get!(s.seed),
        mode: get!(s.mode),
    };
    let rows = microsim::lln_convergence_report(&p, order_init(s), &get!(s.n_list), &settings)
        .numerical()?;
    out.write("lln.csv", |w| output::write_lln(w, &rows))
}

fn lyapunov2(out: &mut Outputs) -> Outcome<()> {
    let l2 = stability::second_lyapunov_tricritical().numerical()?;
    println!("{:.8}", l2.ell2);
    out.json("lyapunov2.json", &l2)
}
