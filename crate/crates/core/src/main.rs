use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nhtai::config::{parse_config, ConfigError, RunConfig};
use nhtai::ensemble::{derive_seed, run_point, run_sweep, AxisParam, SweepOptions};
use nhtai::lattice::{build_hamiltonian, sample_disorder, Boundary};
use nhtai::observables::density_profile;
use nhtai::output::{
    emit_results, write_loclen_csv, write_profiles_csv, write_roots_csv, write_spectrum_csv,
};
use nhtai::spectral::decompose;
use nhtai::validate::run_suite;

#[derive(Parser)]
#[command(name = "nhtai", version, about = "Disordered non-Hermitian SSH chains")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Continue from the checkpoint of an interrupted sweep.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Phase diagram over the configured grid.
    Sweep,
    /// Full record at the model section's (gamma, W).
    Point,
    /// Averaged middle-of-spectrum eigenvalues along the W axis.
    Spectrum,
    /// Density profiles of one eigenstate.
    States {
        /// One-based eigenstate index in canonical order; defaults to L/2.
        #[arg(long)]
        state: Option<usize>,
        /// Realization index used for the single-sample profiles.
        #[arg(long, default_value_t = 0)]
        realization: u64,
    },
    /// Analytic inverse localization length on the (gamma, W) grid.
    Loclen,
    /// Run the self-check suite.
    Validate,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<nhtai::Error> for Failure {
    fn from(e: nhtai::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        cfg.ensemble.master_seed = seed;
    }
    Ok(cfg)
}

fn create(cfg: &RunConfig, name: &str) -> Result<(PathBuf, BufWriter<File>), Failure> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join(format!("{}_{name}", cfg.output.prefix));
    let f = File::create(&path)?;
    Ok((path, BufWriter::new(f)))
}

fn axis_values(cfg: &RunConfig, param: AxisParam) -> Option<&[f64]> {
    [&cfg.grid.axis1, &cfg.grid.axis2]
        .into_iter()
        .find(|a| a.param == param)
        .map(|a| a.values.as_slice())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Run(e.to_string()))?;
    }
    if let Command::Validate = cli.command {
        let results = run_suite();
        for r in &results {
            println!("{r}");
        }
        return if results.iter().all(|r| r.passed) {
            Ok(())
        } else {
            Err(Failure::Run("self-check failed".into()))
        };
    }

    let cfg = load(&cli.common)?;
    match cli.command {
        Command::Sweep => {
            std::fs::create_dir_all(&cfg.output.dir)?;
            let opts = SweepOptions {
                checkpoint: cfg
                    .output
                    .checkpoint
                    .then(|| cfg.output.dir.join(format!("{}.checkpoint.jsonl", cfg.output.prefix))),
                resume: cli.common.resume,
                stop_after: None,
            };
            let result = run_sweep(&cfg.grid, &cfg.ensemble, &cfg.winding, &opts)?;
            for path in emit_results(&result, &cfg.output.dir, &cfg.output.prefix, cfg.output.format)? {
                println!("{}", path.display());
            }
            let failed = result.points.iter().filter(|p| p.record.failed).count();
            if failed > 0 {
                eprintln!("{failed} grid points failed");
            }
        }
        Command::Point => {
            let out = run_point(&cfg.spec, &cfg.ensemble, &cfg.winding, 0)?;
            let json = serde_json::to_string_pretty(&out.record).map_err(|e| Failure::Run(e.to_string()))?;
            let (path, mut f) = create(&cfg, "point.json")?;
            writeln!(f, "{json}")?;
            f.flush()?;
            println!("{json}");
            eprintln!("{}", path.display());
        }
        Command::Spectrum => {
            let ws = axis_values(&cfg, AxisParam::W)
                .ok_or_else(|| Failure::Config("spectrum needs a W axis in the grid".into()))?;
            let mut rows = Vec::with_capacity(ws.len());
            for (k, &w) in ws.iter().enumerate() {
                let mut spec = cfg.spec;
                cfg.linkage.apply(&mut spec, w);
                rows.push((w, run_point(&spec, &cfg.ensemble, &cfg.winding, k as u64)?.record));
            }
            let (path, mut f) = create(&cfg, "spectrum.csv")?;
            write_spectrum_csv("W", &rows, &mut f)?;
            f.flush()?;
            println!("{}", path.display());
        }
        Command::States { state, realization } => {
            let n_sites = cfg.spec.n_sites();
            let n = state.unwrap_or(n_sites / 2);
            if n == 0 || n > n_sites {
                return Err(Failure::Config(format!("state {n} outside 1..={n_sites}")));
            }
            let seed = derive_seed(cfg.ensemble.master_seed, 0, realization, 0);
            let mut columns: Vec<(&str, Vec<f64>)> = Vec::new();
            for (name, boundary) in [("density_obc", Boundary::Open), ("density_pbc", Boundary::Periodic)] {
                let spec = cfg.spec.with_boundary(boundary);
                let h = build_hamiltonian(&spec, &sample_disorder(&spec, seed))?;
                let d = decompose(&h, cfg.ensemble.tolerance)?;
                columns.push((name, density_profile(&d, n - 1)?));
            }
            if n == n_sites / 2 {
                let avg = run_point(&cfg.spec, &cfg.ensemble, &cfg.winding, 0)?;
                columns.push(("density_obc_avg", avg.density_mid));
            }
            let refs: Vec<(&str, &[f64])> = columns.iter().map(|(n, v)| (*n, v.as_slice())).collect();
            let (path, mut f) = create(&cfg, "states.csv")?;
            write_profiles_csv(&refs, &mut f)?;
            f.flush()?;
            println!("{}", path.display());
        }
        Command::Loclen => {
            let gammas = axis_values(&cfg, AxisParam::Gamma)
                .ok_or_else(|| Failure::Config("loclen needs a gamma axis in the grid".into()))?;
            let ws = axis_values(&cfg, AxisParam::W)
                .ok_or_else(|| Failure::Config("loclen needs a W axis in the grid".into()))?;
            let (path, mut f) = create(&cfg, "loclen.csv")?;
            write_loclen_csv(cfg.spec.t_prime, gammas, ws, cfg.linkage, &mut f)?;
            f.flush()?;
            println!("{}", path.display());
            let (path, mut f) = create(&cfg, "roots.csv")?;
            write_roots_csv(cfg.spec.t_prime, gammas, &mut f)?;
            f.flush()?;
            println!("{}", path.display());
        }
        Command::Validate => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
