use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use golay_das::codes::{generate_golay_set, verify_golay_set};
use golay_das::config::{ExperimentConfig, SeedPolicy};
use golay_das::experiment::{run_to_dir, sweep_to_dir, SweepParam};

#[derive(Parser)]
#[command(name = "golay-das", version, about = "Simulator and estimator for Golay-coded FBG array interrogation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedArg {
    Fixed,
    Increment,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Overrides [output] directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the experiment once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// code_length (N_G), signal_power_dbm, lead_fiber_length (m),
        /// stimulus_amplitude (Vpp) or stimulus_frequency (Hz).
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        /// Defaults to [run] seed_policy.
        #[arg(long, value_enum)]
        seed_policy: Option<SeedArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the code set for N_G and check its correlation identities.
    VerifyCodes {
        #[arg(long)]
        ng: usize,
        /// Also write the four sequences here.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, String> {
    ExperimentConfig::load(path).map_err(|e| match e.line {
        Some(l) => format!("{}:{l}: {}", path.display(), e.message),
        None => format!("{}: {}", path.display(), e.message),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
            let result = run_to_dir(&cfg, &dir).map_err(|e| e.to_string())?;
            println!("{}", result.summary());
        }
        Command::Sweep {
            config,
            param,
            values,
            seed_policy,
            out,
        } => {
            let cfg = load(&config)?;
            let param: SweepParam = param.parse().map_err(|e: golay_das::Error| e.to_string())?;
            let policy = match seed_policy {
                Some(SeedArg::Fixed) => SeedPolicy::Fixed,
                Some(SeedArg::Increment) => SeedPolicy::Increment,
                None => cfg.run.seed_policy,
            };
            let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
            let points = sweep_to_dir(&cfg, param, &values, policy, &dir).map_err(|e| e.to_string())?;
            for p in &points {
                println!("{param}={} mean_std_rad={:.6e} unwrap_flags={}", p.value, p.report.mean_std, p.report.unwrap_flags);
            }
        }
        Command::VerifyCodes { ng, dump } => {
            let set = generate_golay_set(ng).map_err(|e| e.to_string())?;
            let report = verify_golay_set(&set);
            println!(
                "n_g={ng} complementary_1={} complementary_2={} mutual_a={} mutual_b={} max_sidelobe={}",
                report.complementary_1, report.complementary_2, report.mutual_a, report.mutual_b, report.max_sidelobe
            );
            if let Some(path) = dump {
                let f = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                set.write_dump(std::io::BufWriter::new(f)).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            if !report.is_valid() {
                return Err(format!("code set for n_g={ng} violates its correlation identities"));
            }
        }
    }
    Ok(())
}
