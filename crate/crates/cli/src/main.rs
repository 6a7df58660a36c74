use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use cmbrbg::entropy::fips;
use cmbrbg::rng::derive_seed;
use cmbrbg_cli::pipeline::{self, MatrixInput, V_TAG};
use cmbrbg_cli::RunConfig;

/// Random bit generation from simulated CMB maps and Vernam encryption.
#[derive(Parser)]
#[command(name = "cmbrbg", version)]
struct Cli {
    /// Run configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. --set lmax=48.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Print the FIPS 140-2 thresholds and exit.
    #[arg(long)]
    show_thresholds: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one sky seen by every detector and write the maps.
    Simulate,
    /// Compute auto- and cross-pseudo-spectra of the maps.
    Analyze {
        #[arg(long, num_args = 1..)]
        maps: Vec<PathBuf>,
        #[arg(long)]
        lmax: Option<usize>,
    },
    /// Bin the spectra.
    Bin {
        #[arg(long, num_args = 1..)]
        spectra: Vec<PathBuf>,
        /// Bin ranges such as "2-10,11-20" or "2-32/4".
        #[arg(long)]
        bins: Option<String>,
        #[arg(long)]
        f_sky: Option<f64>,
    },
    /// Binned and exact likelihoods plus the noise estimate.
    Likelihood {
        #[arg(long, num_args = 1..)]
        binned: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        spectra: Vec<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Quantize binned spectra into a bitstream.
    Extract {
        #[arg(long, num_args = 1..)]
        binned: Vec<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the FIPS 140-2 tests on the first 20 000 bits of a stream.
    Fips {
        stream: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Combine W with V into the key K = V xor W.
    Keygen {
        /// Harvested stream W.
        #[arg(long)]
        w: Option<PathBuf>,
        /// Second stream V; the reference generator is used when absent.
        #[arg(long)]
        v: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write a pad store usable by encrypt/decrypt.
        #[arg(long)]
        pad_out: Option<PathBuf>,
    },
    /// Build the substitution matrix from a key string or a bitstream.
    Matrix {
        #[arg(long, conflicts_with = "stream")]
        key: Option<String>,
        #[arg(long)]
        stream: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Encrypt a file with the next unused pad bits.
    Encrypt {
        input: PathBuf,
        #[arg(long)]
        pad: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        offset: Option<u64>,
    },
    /// Decrypt a file against the receiver's copy of the pad store.
    Decrypt {
        input: PathBuf,
        #[arg(long)]
        pad: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        offset: Option<u64>,
    },
    /// Compare Alice's harvest with an eavesdropper observing the same sky.
    Eve,
}

enum Outcome {
    Pass,
    StatFail,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for s in &cli.set {
        cfg.apply(s)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn or_listed(given: &[PathBuf], dir: PathBuf, ext: &str, stage: &str) -> Result<Vec<PathBuf>> {
    if given.is_empty() {
        pipeline::list_files(&dir, ext, stage)
    } else {
        Ok(given.to_vec())
    }
}

fn or_default(given: &Option<PathBuf>, default: PathBuf, stage: &str) -> Result<PathBuf> {
    let path = given.clone().unwrap_or(default);
    pipeline::require_file(&path, stage)?;
    Ok(path)
}

fn emit(text: &str, report: Option<&Path>) -> Result<()> {
    print!("{text}");
    if let Some(p) = report {
        std::fs::write(p, text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome> {
    let cfg = load_config(&cli)?;
    if cli.print_config {
        print!("{cfg}");
        return Ok(Outcome::Pass);
    }
    if cli.show_thresholds {
        print!("{}", fips::thresholds_text());
        return Ok(Outcome::Pass);
    }
    let Some(command) = &cli.command else {
        bail!("no command given; see --help");
    };
    let out = cfg.out.as_path();
    match command {
        Command::Simulate => {
            let maps = pipeline::cmd_simulate(&cfg)?;
            println!("wrote {} maps to {}", maps.len(), pipeline::maps_dir(out).display());
        }
        Command::Analyze { maps, lmax } => {
            let maps = or_listed(maps, pipeline::maps_dir(out), "bin", "simulate")?;
            let spectra = pipeline::cmd_analyze(&maps, lmax.unwrap_or(cfg.lmax), out)?;
            println!("wrote {} spectra to {}", spectra.len(), pipeline::spectra_dir(out).display());
        }
        Command::Bin { spectra, bins, f_sky } => {
            let spectra = or_listed(spectra, pipeline::spectra_dir(out), "txt", "analyze")?;
            let scheme = match bins {
                Some(b) => cmbrbg::harmonics::make_binning(&cmbrbg_cli::config::parse_ranges(b)?)?,
                None => cfg.binning()?,
            };
            let f_sky = match f_sky {
                Some(f) => *f,
                None => pipeline::f_sky(&cfg)?,
            };
            let binned = pipeline::cmd_bin(&spectra, &scheme, f_sky, out)?;
            println!("wrote {} binned spectra to {}", binned.len(), pipeline::binned_dir(out).display());
        }
        Command::Likelihood { binned, spectra, model, report } => {
            let binned = or_listed(binned, pipeline::binned_dir(out), "txt", "bin")?;
            let spectra = or_listed(spectra, pipeline::spectra_dir(out), "txt", "analyze")?;
            let model = or_default(model, pipeline::fiducial_path(out), "simulate")?;
            let r = pipeline::cmd_likelihood(&binned, &spectra, &model)?;
            let report = report.clone().unwrap_or(out.join("likelihood.txt"));
            emit(&r.text, Some(&report))?;
        }
        Command::Extract { binned, model, output } => {
            let binned = or_listed(binned, pipeline::binned_dir(out), "txt", "bin")?;
            let model = or_default(model, pipeline::fiducial_path(out), "simulate")?;
            let output = output.clone().unwrap_or(out.join("harvest.bit"));
            let prov = pipeline::harvest_provenance(&cfg)?;
            let h = pipeline::cmd_extract(&binned, &model, &cfg.policy()?, &prov.source, prov.seeds, &output)?;
            println!("wrote {} bits to {}", h.stream.len(), output.display());
            if h.degenerate {
                eprintln!("warning: some bins had zero model variance and were skipped");
            }
        }
        Command::Fips { stream, report } => {
            let stream = or_default(stream, out.join("harvest.bit"), "extract")?;
            let r = pipeline::cmd_fips(&stream)?;
            emit(&r.text, report.as_deref())?;
            if !r.pass {
                return Ok(Outcome::StatFail);
            }
        }
        Command::Keygen { w, v, output, pad_out } => {
            let w = or_default(w, out.join("harvest.bit"), "extract")?;
            let output = output.clone().unwrap_or(out.join("key.bit"));
            let v_seed = derive_seed(cfg.seed, V_TAG, 0);
            let k = pipeline::cmd_keygen(&w, v.as_deref(), v_seed, &output, pad_out.as_deref())?;
            println!("wrote {} key bits to {}", k.len(), output.display());
        }
        Command::Matrix { key, stream, n, output } => {
            let n = n.unwrap_or(cfg.matrix_n);
            let output = output.clone().unwrap_or(out.join("matrix.txt"));
            let input = match (key, stream) {
                (Some(k), _) => MatrixInput::Key(k),
                (None, Some(s)) => MatrixInput::Stream(s),
                (None, None) => bail!("matrix needs --key or --stream"),
            };
            let m = pipeline::cmd_matrix(input, n, &output)?;
            if let Some((sum, base)) = m.key_sum {
                println!("key sum = {sum} (base {base})");
            }
            println!("wrote {n}x{n} matrix to {}", output.display());
        }
        Command::Encrypt { input, pad, output, offset } | Command::Decrypt { input, pad, output, offset } => {
            let at = pipeline::cmd_vernam(input, pad, output, *offset)?;
            println!("pad offset = {at}");
        }
        Command::Eve => {
            let r = pipeline::cmd_eve(&cfg)?;
            print!("{}", r.text);
            if !r.pass {
                return Ok(Outcome::StatFail);
            }
        }
    }
    Ok(Outcome::Pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::StatFail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
