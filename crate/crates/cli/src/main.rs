use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

/// Fit and compare extended Rapp amplifier models over supply voltage and
/// carrier frequency.
#[derive(Debug, Parser)]
#[command(name = "rappsurf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output location. Relative paths resolve against the default output
    /// directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Default output directory.
    #[arg(long, env = "RAPPSURF_OUT", default_value = ".", hide_env_values = true)]
    out_dir: PathBuf,

    /// Replace an existing campaign directory.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a measurement campaign from a ground-truth model.
    Synth {
        /// Ground-truth model file; defaults to the bundled SYNTH-2534 amplifier.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Supply voltages: `start:step:stop` or a comma list, volts.
        #[arg(long, default_value = rappsurf::io::SYNTH_2534_VSUP)]
        vsup: String,
        /// Carrier frequencies: `start:step:stop` or a comma list, GHz.
        #[arg(long, default_value = rappsurf::io::SYNTH_2534_FREQ)]
        freq: String,
        /// Noise power relative to the output, dB (`-inf` for none).
        #[arg(long, default_value_t = -45.0, allow_negative_numbers = true)]
        noise_db: f64,
        /// Largest injected delay, samples.
        #[arg(long, default_value_t = 64)]
        max_delay: u32,
        /// Do not rotate the output by a random phase.
        #[arg(long)]
        no_phase: bool,
        /// RMS amplitude of the OFDM stimulus, volts.
        #[arg(long, default_value_t = rappsurf::io::SYNTH_2534_TARGET_RMS)]
        rms: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Amplifier identifier stored in the manifest.
        #[arg(long)]
        id: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Fit the extended model (or only per-point parameters with --basic).
    Fit {
        /// Campaign directory.
        campaign: PathBuf,
        /// Write per-point parameter heatmaps instead of a model file.
        #[arg(long)]
        basic: bool,
        /// Gain surface: `log-product`, `log-product-no-f2`, or monomials like `v1f0,v0f1`.
        #[arg(long, default_value = "log-product")]
        gain: String,
        /// Smoothness surface form.
        #[arg(long, default_value = "v1f0,v0f1,v2f0,v0f2")]
        smoothness: String,
        /// Saturation-voltage surface form.
        #[arg(long, default_value = "v1f0,v1f1,v0f2,v1f2")]
        vsat: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Backward elimination of polynomial terms for one parameter surface.
    Select {
        /// Campaign directory or parameter-map CSV (`vsup,freq,value`).
        input: PathBuf,
        /// Parameter to model when the input is a campaign: g, p or vsat.
        #[arg(long, default_value = "vsat")]
        param: String,
        /// Cap on the starting total degree.
        #[arg(long, default_value_t = 5)]
        max_degree: u32,
        /// Start from this total degree instead of choosing one.
        #[arg(long)]
        start_degree: Option<u32>,
        /// Allowed rmse growth factor over the full-basis fit.
        #[arg(long, default_value_t = rappsurf::select::DEFAULT_PLATEAU)]
        plateau: f64,
        #[arg(long, default_value_t = 1)]
        min_terms: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Score basic, extended and frequency-blind models against a campaign.
    Compare {
        /// Campaign directory.
        campaign: PathBuf,
        /// Extended model file; fitted from the campaign when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Reference frequency for the frequency-blind model, GHz (default: median).
        #[arg(long)]
        ref_freq: Option<f64>,
        /// Write AM/AM overlay data at `vsup:freq`; repeatable.
        #[arg(long = "overlay")]
        overlays: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write parameter heatmaps from a campaign or from a model file.
    ExportHeatmap {
        /// Campaign directory (per-point fits) unless --model is given.
        campaign: Option<PathBuf>,
        /// Evaluate this model's surfaces instead of fitting a campaign.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Grid for --model: supply voltages.
        #[arg(long, default_value = rappsurf::io::SYNTH_2534_VSUP)]
        vsup: String,
        /// Grid for --model: frequencies.
        #[arg(long, default_value = rappsurf::io::SYNTH_2534_FREQ)]
        freq: String,
        /// g, p, vsat or all.
        #[arg(long, default_value = "all")]
        param: String,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the error chain, skipping causes whose text the previous message
/// already includes.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !last.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        last = msg;
    }
    out
}
