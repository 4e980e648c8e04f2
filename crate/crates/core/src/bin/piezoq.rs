use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use piezoq::cli::{
    cmd_eta_map, cmd_extract_q, cmd_fit, cmd_predict_q, load_config, Config, ExtractConfig, Overrides,
    Report, Run,
};
use piezoq::fit::{ModelFamily, Objective};
use piezoq::selftest::{run_selftest, TOLERANCE_ENV};
use piezoq::Error;

const CONFIG_HELP: &str = "\
Config file (TOML) sections and keys. Relative paths resolve against the
config file's directory; flags override keys.

[general]    output_dir, threads, seed, clamp
[eta_map]    piezo, metal (material files); piezo_cut (e.g. \"X-cut YZ30\")
             or piezo_euler_deg = [phi, theta, psi]; film_thickness_m;
             coverage (0.5); mesh_nx (16); mesh_nz_film (4);
             mesh_nz_metal (2); h_over_lambda = [...]; tm_over_h = [...];
             n_modes (12); polarization (x | y | sh | z);
             velocity_window_m_s = [lo, hi]; output (\"eta_map\")
[predict_q]  eta_map; loss_model (TOML file) or inline [predict_q.model];
             frequency_hz (1e9); axis (h_over_lambda | tm_over_lambda);
             output (\"predict_q\")
[extract_q]  inputs = [files or directories of .s1p / .csv];
             fit_mbvd (true); output (\"extracted\")
[fit]        records (measured-set CSV); eta_map; output (\"fit\")
[fit.spec]   family (constant-qpiezo | constant-plus-qni);
             objective (least-squares | envelope); envelope_bins (8);
             residual_scale (log | linear); restarts (8); ni_f_ref_hz;
             q_piezo, fq, q_ni, ni_exponent = { initial, free, lower, upper }

Exit codes: 0 success, 1 runtime failure, 2 configuration or input error.";

#[derive(Parser)]
#[command(name = "piezoq", version, about = "Acoustic loss characterization for piezoelectric resonators", after_help = CONFIG_HELP)]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for fit restarts.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Clamp η-map queries to the grid edge instead of failing.
    #[arg(long, global = true)]
    clamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the unit cell and write the η map with its plot.
    EtaMap {
        #[arg(long)]
        piezo: Option<PathBuf>,
        #[arg(long)]
        metal: Option<PathBuf>,
        #[arg(long)]
        output: Option<String>,
    },
    /// Predict Q_m over the η map for a loss model.
    PredictQ {
        #[arg(long)]
        eta_map: Option<PathBuf>,
        #[arg(long)]
        loss_model: Option<PathBuf>,
        #[arg(long)]
        frequency_hz: Option<f64>,
        #[arg(long)]
        output: Option<String>,
    },
    /// Extract resonance, Q_3dB and de-embedded Q_m from traces.
    ExtractQ {
        /// Trace files or directories; replaces the configured inputs.
        inputs: Vec<PathBuf>,
        #[arg(long)]
        no_mbvd: bool,
        #[arg(long)]
        output: Option<String>,
    },
    /// Fit loss-model parameters to a measured set.
    Fit {
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        eta_map: Option<PathBuf>,
        /// constant-qpiezo | constant-plus-qni
        #[arg(long, value_parser = parse_family)]
        family: Option<ModelFamily>,
        /// least-squares | envelope
        #[arg(long, value_parser = parse_objective)]
        objective: Option<Objective>,
        #[arg(long)]
        output: Option<String>,
    },
    /// Run the analytic-oracle checks.
    Selftest,
}

fn parse_family(s: &str) -> Result<ModelFamily, String> {
    match s {
        "constant-qpiezo" => Ok(ModelFamily::ConstantQpiezo),
        "constant-plus-qni" => Ok(ModelFamily::ConstantPlusQni),
        _ => Err(format!("unknown model family '{s}'")),
    }
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    match s {
        "least-squares" => Ok(Objective::LeastSquares),
        "envelope" => Ok(Objective::Envelope),
        _ => Err(format!("unknown objective '{s}'")),
    }
}

fn missing(section: &str, key: &str) -> Error {
    Error::Validation(format!("no [{section}] section in the config and no --{key} given"))
}

fn apply(cli: &Cli, mut config: Config) -> Result<Config, Error> {
    match &cli.command {
        Command::EtaMap { piezo, metal, output } => {
            if piezo.is_some() || metal.is_some() || output.is_some() {
                let c = config.eta_map.as_mut().ok_or_else(|| missing("eta_map", "config"))?;
                if let Some(p) = piezo {
                    c.piezo = p.clone();
                }
                if let Some(m) = metal {
                    c.metal = m.clone();
                }
                if let Some(o) = output {
                    c.output = o.clone();
                }
            }
        }
        Command::PredictQ {
            eta_map,
            loss_model,
            frequency_hz,
            output,
        } => {
            if config.predict_q.is_none() {
                let Some(e) = eta_map else {
                    return Err(missing("predict_q", "eta-map"));
                };
                config.predict_q = Some(toml::from_str(&format!("eta_map = {:?}", e.display().to_string()))
                    .map_err(|err| Error::Validation(err.to_string()))?);
            }
            let c = config.predict_q.as_mut().expect("set above");
            if let Some(e) = eta_map {
                c.eta_map = e.clone();
            }
            if let Some(l) = loss_model {
                c.loss_model = Some(l.clone());
                c.model = None;
            }
            if let Some(f) = frequency_hz {
                c.frequency_hz = *f;
            }
            if let Some(o) = output {
                c.output = o.clone();
            }
        }
        Command::ExtractQ { inputs, no_mbvd, output } => {
            let c = config.extract_q.get_or_insert_with(|| ExtractConfig {
                inputs: Vec::new(),
                fit_mbvd: true,
                output: "extracted".into(),
            });
            if !inputs.is_empty() {
                c.inputs = inputs.clone();
            }
            if *no_mbvd {
                c.fit_mbvd = false;
            }
            if let Some(o) = output {
                c.output = o.clone();
            }
        }
        Command::Fit {
            records,
            eta_map,
            family,
            objective,
            output,
        } => {
            if config.fit.is_none() {
                let (Some(r), Some(e)) = (records, eta_map) else {
                    return Err(missing("fit", "records and --eta-map"));
                };
                let text = format!(
                    "records = {:?}\neta_map = {:?}",
                    r.display().to_string(),
                    e.display().to_string()
                );
                config.fit = Some(toml::from_str(&text).map_err(|err| Error::Validation(err.to_string()))?);
            }
            let c = config.fit.as_mut().expect("set above");
            if let Some(r) = records {
                c.records = r.clone();
            }
            if let Some(e) = eta_map {
                c.eta_map = e.clone();
            }
            if let Some(f) = family {
                c.spec.family = *f;
            }
            if let Some(o) = objective {
                c.spec.objective = *o;
            }
            if let Some(o) = output {
                c.output = o.clone();
            }
        }
        Command::Selftest => {}
    }
    Ok(config)
}

fn selftest() -> ExitCode {
    let scale = match std::env::var(TOLERANCE_ENV) {
        Ok(v) => match v.parse::<f64>() {
            Ok(s) if s.is_finite() && s >= 0.0 => {
                println!("{TOLERANCE_ENV}={v}: tolerances scaled by {s}");
                s
            }
            _ => {
                eprintln!("error: {TOLERANCE_ENV} must be a nonnegative number, got '{v}'");
                return ExitCode::from(2);
            }
        },
        Err(_) => 1.0,
    };
    let checks = run_selftest(scale);
    for c in &checks {
        println!(
            "[{}] {}: error {:.3e} (tolerance {:.3e}) {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.error,
            c.tolerance,
            c.detail
        );
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    println!("{passed}/{} checks passed", checks.len());
    if passed == checks.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn execute(cli: &Cli) -> Result<Report, Error> {
    let config = match &cli.config {
        Some(p) => load_config(p)?,
        None => Config::default(),
    };
    let config = apply(cli, config)?;
    let run = Run::new(
        config,
        &Overrides {
            output_dir: cli.output_dir.clone(),
            threads: cli.threads,
            seed: cli.seed,
            clamp: cli.clamp,
        },
    );
    if run.threads == Some(0) {
        return Err(Error::Validation("--threads must be at least 1".into()));
    }
    match cli.command {
        Command::EtaMap { .. } => cmd_eta_map(&run),
        Command::PredictQ { .. } => cmd_predict_q(&run),
        Command::ExtractQ { .. } => cmd_extract_q(&run),
        Command::Fit { .. } => cmd_fit(&run),
        Command::Selftest => unreachable!("handled before config loading"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if matches!(cli.command, Command::Selftest) {
        return selftest();
    }
    match execute(&cli) {
        Ok(rep) => {
            for m in &rep.messages {
                eprintln!("{m}");
            }
            for f in &rep.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
