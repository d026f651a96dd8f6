use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sac_core::geometry::{plan_parameters, CarrierConfig, Numerology, OrbitGeometry, PayloadModel};
use sac_sim::config::{Mode, ScenarioConfig};
use sac_sim::output::{self, Manifest};
use sac_sim::{run_sweep, Scenario};

#[derive(Parser)]
#[command(name = "sac", version, about = "Synthetic aperture uplink link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sac,
    Nosac,
}

#[derive(Subcommand)]
enum Command {
    /// Run a transmit-power sweep and write bler.csv, azimuth_profile.csv and manifest.json.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Only write the azimuth profile snapshot.
        #[arg(long)]
        profile_only: bool,
    },
    /// Size an aperture for a cross-range resolution (600 km, 3.5 GHz).
    Plan {
        #[arg(long)]
        resolution: f64,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
        mu: u8,
    },
    /// Parse and check a config, then print it resolved.
    Validate { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ScenarioConfig::parse(&text).with_context(|| format!("in {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out, trials, seed, workers, mode, profile_only } => {
            let mut cfg = load(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = mode {
                cfg.mode = match m {
                    ModeArg::Sac => Mode::Sac,
                    ModeArg::Nosac => Mode::NoSac,
                };
            }
            cfg.validate()?;
            let scenario = Scenario::new(&cfg)?;
            let dir = output::ensure_dir(&out)?;
            let profile = scenario.profile_snapshot(scenario.config().profile_ptx_dbm)?;
            output::write_profile(&dir.join(output::PROFILE_CSV), &profile)?;
            let curve = if profile_only {
                None
            } else {
                let curve = run_sweep(&scenario, workers)?;
                output::write_bler(&dir.join(output::BLER_CSV), &curve)?;
                Some(curve)
            };
            let code = scenario.code().config();
            let manifest = Manifest::new(&cfg, scenario.config(), curve.as_ref(), code.k_info, code.rate(), |p| {
                scenario.predicted_snr_db(p)
            });
            manifest.write(&dir.join(output::MANIFEST_JSON))?;
            if let Some(curve) = &curve {
                for p in curve.mean() {
                    println!("{:>8.2} dBm  BLER {:.4}  [{:.4}, {:.4}]", p.ptx_dbm, p.bler, p.ci_lo, p.ci_hi);
                }
                match manifest.measured_threshold_dbm {
                    Some(t) => println!(
                        "BLER 0.1 at {t:.2} dBm (link-budget SNR there {:.2} dB)",
                        manifest.predicted_snr_at_threshold_db.unwrap_or(f64::NAN)
                    ),
                    None => println!("BLER 0.1 not crossed inside the sweep"),
                }
            }
            println!("wrote {}", dir.display());
        }
        Command::Plan { resolution, mu } => {
            let orbit = OrbitGeometry::leo_600km();
            let carrier = CarrierConfig::new(3.5e9)?;
            let numerology = Numerology::reference(mu)?;
            let plan = plan_parameters(resolution, &numerology, &orbit, &carrier, &PayloadModel::default())?;
            println!("mu                 {mu}");
            println!("spacing            {} kHz", numerology.subcarrier_spacing_hz() / 1e3);
            println!("bandwidth          {} MHz", numerology.bandwidth_hz / 1e6);
            println!("aperture needed    {:.2} m", plan.required_aperture_m);
            println!("symbols M          {}", plan.min_symbols);
            println!("processing gain    {:.2} dB", plan.processing_gain_db);
            println!("net bit rate       {:.2} kbit/s", plan.net_bit_rate_bps / 1e3);
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let scenario = Scenario::new(&cfg)?;
            print!("{}", cfg.to_text());
            let res = scenario.geometry().resolution();
            println!("# cross-range resolution {:.2} m", res.cross_range_resolution_m);
            println!("# link-budget SNR at {} dBm: {:.2} dB", cfg.profile_ptx_dbm, scenario.predicted_snr_db(cfg.profile_ptx_dbm));
        }
    }
    Ok(())
}
