use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acceptorloss::commands::{run, Command};
use acceptorloss::config::ConfigTree;
use acceptorloss::error::CliError;
use acceptorloss::formats::{curve_path, write_curve};
use acceptorloss::record::{RecordError, ResultRecord};
use acceptorloss::sweep::{run_sweep, write_sweep_csv};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "acceptorloss",
    version,
    about = "Acceptor-induced dielectric loss in superconducting resonators"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for records and curves.
    #[arg(long, global = true, env = "ACCEPTORLOSS_OUT", default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps and strain maps.
    #[arg(long, global = true, default_value_t = default_workers())]
    workers: usize,
    /// Config override, `dotted.key=value`. Repeatable; applied after flags.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Fit a notch-type S21 trace.
    FitS21 {
        /// CSV with freq_hz,re,im or freq_hz,mag_db,phase_rad.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        resonator: ResonatorFlags,
    },
    /// Photon number from drive power and resonator parameters.
    PhotonCalib {
        #[command(flatten)]
        resonator: ResonatorFlags,
    },
    /// Steady state of the driven four-level model.
    SimulateSteady {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        resonator: ResonatorFlags,
    },
    /// Critical drive amplitudes with and without a field.
    CriticalRabi {
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Ratio of critical drive powers, zero field over finite field.
    SaturationRatio {
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Loss tangent and Q from a participation density or a strain map.
    LossEstimate {
        #[command(flatten)]
        loss: LossFlags,
        /// Strain map CSV.
        #[arg(long)]
        strain_map: Option<PathBuf>,
    },
    /// Binned participation spectrum from a strain map.
    SpectrumBuild {
        /// Strain map CSV; the synthetic edge profile is used when absent.
        #[arg(long)]
        strain_map: Option<PathBuf>,
    },
    /// Fit Q ∝ 1/ρ to (concentration_cm3, q) pairs.
    DopingFit {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Joint log-log saturation fit of zero-field and in-field data.
    SatFit {
        #[arg(long)]
        zero_field: Option<PathBuf>,
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Run the `[sweep]` block of the config.
    Sweep,
}

#[derive(Args, Debug, Default)]
struct ResonatorFlags {
    #[arg(long)]
    f0_ghz: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    qe: Option<f64>,
    /// Source power; the attenuation is subtracted.
    #[arg(long, allow_hyphen_values = true)]
    pin_dbm: Option<f64>,
    #[arg(long)]
    attenuation_db: Option<f64>,
    #[arg(long)]
    temperature_k: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct ModelFlags {
    #[arg(long)]
    nbar: Option<f64>,
    #[arg(long)]
    gamma_prime: Option<f64>,
    #[arg(long)]
    gamma_tilde: Option<f64>,
    /// Drive amplitude |Ω|, rad/s.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta_big: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta_small: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    field_gauss: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct LossFlags {
    #[arg(long)]
    concentration_cm3: Option<f64>,
    #[arg(long)]
    p_per_ghz: Option<f64>,
    #[arg(long)]
    dipole_debye: Option<f64>,
}

type Sets = Vec<(&'static str, toml::Value)>;

fn num(sets: &mut Sets, key: &'static str, v: Option<f64>) {
    if let Some(v) = v {
        sets.push((key, toml::Value::Float(v)));
    }
}

fn path(sets: &mut Sets, key: &'static str, p: &Option<PathBuf>) -> Result<(), CliError> {
    if let Some(p) = p {
        let abs = std::path::absolute(p).map_err(|source| CliError::Io {
            path: p.clone(),
            source,
        })?;
        sets.push((key, toml::Value::String(abs.to_string_lossy().into_owned())));
    }
    Ok(())
}

impl ResonatorFlags {
    fn push(&self, s: &mut Sets) {
        num(s, "resonator.f0_ghz", self.f0_ghz);
        num(s, "resonator.q", self.q);
        num(s, "resonator.qe", self.qe);
        num(s, "resonator.pin_dbm", self.pin_dbm);
        num(s, "resonator.attenuation_db", self.attenuation_db);
        num(s, "resonator.temperature_k", self.temperature_k);
    }
}

impl ModelFlags {
    fn push(&self, s: &mut Sets) {
        num(s, "lindblad.nbar", self.nbar);
        num(s, "lindblad.gamma_prime_per_s", self.gamma_prime);
        num(s, "lindblad.gamma_tilde_per_s", self.gamma_tilde);
        num(s, "lindblad.omega_rad_per_s", self.omega);
        num(s, "lindblad.delta_big_rad_per_s", self.delta_big);
        num(s, "lindblad.delta_small_rad_per_s", self.delta_small);
        num(s, "lindblad.field_gauss", self.field_gauss);
    }
}

/// The command to run and the config keys its flags set.
fn flag_settings(cmd: &Cmd) -> Result<(Option<Command>, Sets), CliError> {
    let mut s = Sets::new();
    let command = match cmd {
        Cmd::FitS21 { input, resonator } => {
            path(&mut s, "files.s21_csv", input)?;
            resonator.push(&mut s);
            Command::FitS21
        }
        Cmd::PhotonCalib { resonator } => {
            resonator.push(&mut s);
            Command::PhotonCalib
        }
        Cmd::SimulateSteady { model, resonator } => {
            model.push(&mut s);
            resonator.push(&mut s);
            Command::SimulateSteady
        }
        Cmd::CriticalRabi { model } => {
            model.push(&mut s);
            Command::CriticalRabi
        }
        Cmd::SaturationRatio { model } => {
            model.push(&mut s);
            Command::SaturationRatio
        }
        Cmd::LossEstimate { loss, strain_map } => {
            num(&mut s, "dopant.concentration_cm3", loss.concentration_cm3);
            num(&mut s, "dopant.dipole_debye", loss.dipole_debye);
            num(&mut s, "loss.p_per_ghz", loss.p_per_ghz);
            path(&mut s, "files.strain_map", strain_map)?;
            Command::LossEstimate
        }
        Cmd::SpectrumBuild { strain_map } => {
            path(&mut s, "files.strain_map", strain_map)?;
            Command::SpectrumBuild
        }
        Cmd::DopingFit { input } => {
            path(&mut s, "files.doping_csv", input)?;
            Command::DopingFit
        }
        Cmd::SatFit { zero_field, field } => {
            path(&mut s, "files.saturation_zero_field_csv", zero_field)?;
            path(&mut s, "files.saturation_field_csv", field)?;
            Command::SatFit
        }
        Cmd::Sweep => return Ok((None, s)),
    };
    Ok((Some(command), s))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut tree = match &cli.config {
        Some(p) => ConfigTree::load(p)?,
        None => ConfigTree::default(),
    };
    tree.ensure_schema_version();
    let (command, sets) = flag_settings(&cli.command)?;
    for (key, value) in sets {
        tree.set(key, value)?;
    }
    for o in &cli.overrides {
        tree.set_override(o)?;
    }
    fs::create_dir_all(&cli.out).map_err(|source| CliError::Io {
        path: cli.out.clone(),
        source,
    })?;
    let workers = cli.workers.max(1);

    let Some(command) = command else {
        let records = run_sweep(&tree, workers)?;
        let json = serde_json::to_string_pretty(&records).expect("records serialize");
        write(&cli.out.join("sweep.json"), &json)?;
        write_sweep_csv(&cli.out.join("sweep.csv"), &records)?;
        let failed = records.iter().filter(|r| r.error.is_some()).count();
        println!("{} sweep points, {failed} failed", records.len());
        return Ok(());
    };

    let cfg = tree.resolve()?;
    let mut record = ResultRecord::new(command.name(), &cfg);
    let result = run(command, &cfg, workers);
    let outcome = match result {
        Ok(out) => {
            for curve in &out.curves {
                let p = curve_path(&cli.out, command.name(), curve);
                write_curve(&p, curve)?;
                record.curves.push(
                    p.file_name()
                        .expect("file name")
                        .to_string_lossy()
                        .into_owned(),
                );
            }
            record.outputs = out.outputs;
            record.warnings = out.warnings;
            Ok(())
        }
        Err(e) => {
            record.error = Some(RecordError::from(&e));
            Err(e)
        }
    };
    let json = record.to_json();
    write(&cli.out.join(format!("{}.json", command.name())), &json)?;
    if outcome.is_ok() {
        println!("{json}");
    }
    for w in &record.warnings {
        eprintln!("warning: {w}");
    }
    outcome
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
