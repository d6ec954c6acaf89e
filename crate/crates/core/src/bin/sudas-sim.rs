use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sudas::harness::{run_to_file, ExperimentSpec, Preset, SystemSpec};

/// Monte Carlo sweeps of the SUDAS energy-efficiency solver and its baselines.
#[derive(Parser, Debug)]
#[command(name = "sudas-sim", version)]
struct Args {
    /// TOML experiment file; its keys override the preset it names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// convergence, ee_vs_pt, time_split_vs_pt, tput_vs_pt, ee_vs_m, tput_vs_m or custom.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed; trial t uses seed ⊕ splitmix(t).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; the CSV is written to <out>/<preset>.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// 64 subcarriers (floors scaled alike) and 200 trials unless --trials is given.
    #[arg(long)]
    desk_scale: bool,
    /// Comma-separated `system[:objective]`, e.g. `sudas_optimal,no_sudas:tp_max`.
    #[arg(long, value_delimiter = ',')]
    systems: Option<Vec<String>>,
    /// Worker threads; 0 picks one per core.
    #[arg(long)]
    workers: Option<usize>,
}

fn build(args: &Args) -> sudas::Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| sudas::Error::Io(format!("{}: {e}", path.display())))?;
            ExperimentSpec::from_toml(&text, &path.display().to_string())?
        }
        None => ExperimentSpec::preset(Preset::Custom),
    };
    if let Some(name) = &args.preset {
        let preset = Preset::parse(name)?;
        if args.config.is_none() || preset != spec.preset {
            let keep = (spec.master_seed, spec.out.clone(), spec.workers, spec.solver.clone());
            spec = ExperimentSpec::preset(preset);
            (spec.master_seed, spec.out, spec.workers, spec.solver) = keep;
        }
    }
    if args.desk_scale {
        spec = spec.desk_scale();
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(s) = args.seed {
        spec.master_seed = s;
    }
    if let Some(o) = &args.out {
        spec.out = o.clone();
    }
    if let Some(list) = &args.systems {
        spec.systems = list.iter().map(|s| SystemSpec::parse(s.trim())).collect::<sudas::Result<_>>()?;
    }
    if let Some(w) = args.workers {
        spec.workers = w;
    }
    spec.validate()?;
    Ok(spec)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match build(&args).and_then(|spec| run_to_file(&spec)) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sudas-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
