use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use mcfs::config::{ConfigError, RunConfig};
use mcfs::geometry::{FormOptions, FundamentalForms};
use mcfs::models::AnalyticProfile;
use mcfs::pinching::{classify_pinching, pinching_q, PinchingConstants};
use mcfs::{pipeline, verify};

#[derive(Parser)]
#[command(name = "mcfs", version, about = "Mean curvature flow with surgery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fundamental forms and pinching at one point of a model.
    Probe {
        #[arg(value_enum)]
        model: ProbeModel,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Profile parameter: height on the cylinder, polar angle on the sphere.
        #[arg(long)]
        at: Option<f64>,
        /// Print only the JSON record.
        #[arg(long)]
        json: bool,
    },
    /// Run a verification suite.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Full flow with surgery from a config file or a shipped preset.
    Flow {
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Override the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the derived parameter cascade.
    Params {
        config: Option<PathBuf>,
        #[arg(long, default_value = "dumbbell", conflicts_with = "config")]
        preset: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeModel {
    Cylinder,
    Sphere,
}

enum Failure {
    Assertion(String),
    Config(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Assertion(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Assertion(s) | Failure::Config(s) | Failure::Numerical(s) => s,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Probe {
            model,
            n,
            m,
            radius,
            at,
            json,
        } => probe(model, n, m, radius, at, json),
        Command::Verify {
            suite,
            seed,
            samples,
        } => run_verify(&suite, seed, samples),
        Command::Flow {
            config,
            preset,
            output,
        } => flow(config, preset, output),
        Command::Params { config, preset } => params(config, &preset),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn probe(
    model: ProbeModel,
    n: usize,
    m: usize,
    radius: f64,
    at: Option<f64>,
    json_only: bool,
) -> Result<(), Failure> {
    if n < 2 {
        return Err(Failure::Config(format!("n = {n}, need n >= 2")));
    }
    if m < 1 {
        return Err(Failure::Config(format!("m = {m}, need m >= 1")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Failure::Config(format!(
            "radius = {radius}, need a positive radius"
        )));
    }
    let (profile, u) = match model {
        ProbeModel::Cylinder => (AnalyticProfile::cylinder(n, m, radius), at.unwrap_or(0.0)),
        ProbeModel::Sphere => {
            let u = at.unwrap_or(std::f64::consts::FRAC_PI_2);
            if !(u > 0.0 && u < std::f64::consts::PI) {
                return Err(Failure::Config(format!(
                    "polar angle {u} must lie strictly between the poles"
                )));
            }
            (AnalyticProfile::sphere(n, m, radius), u)
        }
    };
    let ff = profile
        .forms(u, &FormOptions::default())
        .map_err(|e| Failure::Numerical(e.to_string()))?;
    let record = probe_record(&ff, n);
    if !json_only {
        print_human(&ff, &record);
    }
    println!("{record}");
    Ok(())
}

fn probe_record(ff: &FundamentalForms, n: usize) -> serde_json::Value {
    let k = PinchingConstants::new(n);
    let class = classify_pinching(ff, &k).ok().map(|c| format!("{c:?}"));
    let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    };
    json!({
        "n": ff.n,
        "m": ff.m,
        "metric": rows(&ff.metric),
        "second_form": ff.second_form.iter().map(|v| v.as_slice().to_vec()).collect::<Vec<_>>(),
        "mean_curvature": ff.mean_curv.as_slice(),
        "norm_h": ff.norm_h(),
        "norm_a2": ff.norm_a2,
        "ratio": ff.ratio(),
        "weingarten_nu_eigenvalues": ff.weingarten_nu_eigenvalues(),
        "torsion_norm": ff.torsion.as_ref().map(|t| t.norm()),
        "pinching": {
            "c_cylindrical": k.c_cylindrical,
            "c_spherical": k.c_spherical,
            "q_cylindrical": pinching_q(ff, k.c_cylindrical, 0.0),
            "q_spherical": pinching_q(ff, k.c_spherical, 0.0),
            "class": class,
        },
    })
}

fn print_human(ff: &FundamentalForms, record: &serde_json::Value) {
    println!("n = {}, m = {}", ff.n, ff.m);
    println!("metric diagonal = {:?}", ff.metric.diagonal().as_slice());
    println!("H = {:?}", ff.mean_curv.as_slice());
    println!("|H| = {:.12}", ff.norm_h());
    println!("|A|^2 = {:.12}", ff.norm_a2);
    match ff.ratio() {
        Some(r) => println!("ratio |A|^2/|H|^2 = {r:.12}"),
        None => println!("ratio |A|^2/|H|^2 undefined (H = 0)"),
    }
    if let Some(ev) = ff.weingarten_nu_eigenvalues() {
        println!("principal curvatures along nu = {ev:?}");
    }
    let p = &record["pinching"];
    let f = |key: &str| p[key].as_f64().unwrap_or(f64::NAN);
    println!(
        "Q(c_cyl = {:.6}) = {:.6e}, Q(c_sph = {:.6}) = {:.6e}, class {}",
        f("c_cylindrical"),
        f("q_cylindrical"),
        f("c_spherical"),
        f("q_spherical"),
        p["class"]
    );
}

fn run_verify(suite: &str, seed: u64, samples: usize) -> Result<(), Failure> {
    let report =
        verify::run_suite(suite, seed, samples).map_err(|e| Failure::Config(e.to_string()))?;
    print!("{}", report.render());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Assertion(format!("suite {suite} failed")))
    }
}

fn load(config: Option<PathBuf>, preset: Option<&str>) -> Result<RunConfig, ConfigError> {
    match (config, preset) {
        (Some(path), _) => RunConfig::load(&path),
        (None, Some(name)) => RunConfig::preset(name),
        (None, None) => Err(ConfigError::Invalid("no config or preset given".into())),
    }
}

fn flow(
    config: Option<PathBuf>,
    preset: Option<String>,
    output: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut cfg = load(config, preset.as_deref())?;
    if let Some(out) = output {
        cfg.run.output = out;
    }
    match pipeline::run(&cfg) {
        Ok(summary) => {
            println!(
                "{} steps, final t = {:.6}, {} surgeries, diffeotype {}",
                summary.steps, summary.final_time, summary.surgeries, summary.diffeotype
            );
            println!("outputs in {}", cfg.run.output.display());
            Ok(())
        }
        Err(e) => {
            let msg = e.to_string();
            Err(match e.exit_code() {
                1 => Failure::Assertion(msg),
                2 => Failure::Config(msg),
                _ => Failure::Numerical(msg),
            })
        }
    }
}

fn params(config: Option<PathBuf>, preset: &str) -> Result<(), Failure> {
    let cfg = load(config, Some(preset))?;
    let c = cfg.cascade()?;
    let th = cfg.threshold_set()?;
    println!("n        = {}", cfg.run.n);
    println!("eta0     = {}", cfg.detection.eta0);
    println!("c#       = {}", cfg.detection.c_sharp);
    println!("alpha0   = {}", c.alpha0);
    println!("gamma0   = {}", c.gamma0);
    println!("H1       = {}", c.h1);
    println!("H2       = {}", c.h2);
    println!("H3       = {}", c.h3);
    println!("Theta    = {}", c.big_theta);
    println!("theta2   = {:e}", c.theta2);
    println!(
        "run thresholds: H1 = {}, H2 = {}, H3 = {}",
        th.h1, th.h2, th.h3
    );
    Ok(())
}
