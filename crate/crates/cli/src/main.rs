use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use llr::harness::{
    compare_best_fixed, parse_config, parse_hessian, parse_model, quadratic_diagnostic, run, write_comparison, write_quadratic_csv,
    ConfigOverrides, ExperimentConfig, QuadraticConfig,
};
use llr::oracles::{certify, write_certification_csv, CertifyConfig};
use llr::{LlrError, Result};

/// Experiments with self-tuning stochastic gradient step sizes.
#[derive(Parser, Debug)]
#[command(name = "llr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep algorithms and initial step sizes, writing one trace per run.
    Run(Common),
    /// Check the online derivative against exact and finite-difference oracles.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Times at which to certify (repeatable).
        #[arg(long = "time")]
        times: Vec<usize>,
        /// Half-width of the finite difference in log step size.
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
    },
    /// Step-size diagnostic on a deterministic quadratic.
    Quadratic(Common),
    /// Best fixed step size on the grid against the adaptive counterpart.
    Compare(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Key-value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian, bernoulli, regression or quadratic.
    #[arg(long)]
    model: Option<String>,
    /// Curvature of the quadratic model.
    #[arg(long)]
    alpha: Option<f64>,
    /// Algorithm (repeatable): sg, svrg, sg-sg, sg-ag, svrg-ag, gen-sg, memory.
    #[arg(long = "algo")]
    algorithms: Vec<String>,
    /// Initial step size (repeatable).
    #[arg(long = "eta0")]
    eta0: Vec<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// free or exact.
    #[arg(long)]
    hessian: Option<String>,
    /// Memory length of the discounted variant.
    #[arg(long)]
    tau: Option<f64>,
    /// Starting value of every parameter coordinate.
    #[arg(long)]
    theta0: Option<f64>,
    /// Move the SVRG base point every this many steps.
    #[arg(long)]
    refresh: Option<usize>,
    /// Also write full parameter vectors.
    #[arg(long)]
    full_theta: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Result<ConfigOverrides> {
        let file = match &self.config {
            Some(path) => parse_config(&fs::read_to_string(path)?)?,
            None => ConfigOverrides::default(),
        };
        let cli = ConfigOverrides {
            model: self.model.clone(),
            alpha: self.alpha,
            algorithms: if self.algorithms.is_empty() {
                None
            } else {
                Some(self.algorithms.iter().map(|a| a.parse()).collect::<Result<_>>()?)
            },
            eta_grid: (!self.eta0.is_empty()).then(|| self.eta0.clone()),
            steps: self.steps,
            seed: self.seed,
            hessian: self.hessian.as_deref().map(parse_hessian).transpose()?,
            tau: self.tau,
            out_dir: self.out.clone(),
            theta0: self.theta0,
            svrg_refresh: self.refresh,
            full_theta: self.full_theta.then_some(true),
        };
        Ok(file.merge(cli))
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        self.overrides()?.build()
    }
}

fn run_sweep(common: &Common) -> Result<()> {
    let config = common.experiment()?;
    for s in run(&config)? {
        let status = s.diverged_at.map_or("ok".to_string(), |t| format!("diverged at t = {t}"));
        println!("{}\t{:e}\tR_T = {:.6e}\t{status}\t{}", s.algorithm, s.eta0, s.final_regret, s.path.display());
    }
    Ok(())
}

fn run_certify(common: &Common, times: &[usize], eps: f64) -> Result<()> {
    let o = common.overrides()?;
    let mut config = CertifyConfig { eps, ..CertifyConfig::default() };
    if let Some(name) = &o.model {
        config.models = vec![parse_model(name, o.alpha.or(Some(1.0)))?];
    }
    if let Some(grid) = o.eta_grid {
        config.etas = grid;
    }
    if !times.is_empty() {
        config.times = times.to_vec();
    }
    if let Some(seed) = o.seed {
        config.seed = seed;
    }
    let rows = certify(&config)?;
    let dir = o.out_dir.unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    let path = dir.join("certification.csv");
    write_certification_csv(&rows, BufWriter::new(File::create(&path)?))?;
    let worst = rows.iter().filter(|r| !r.diverged).map(|r| r.rel_err_fd).fold(0.0, f64::max);
    let diverged = rows.iter().filter(|r| r.diverged).count();
    println!("{} cells, {diverged} diverged, max finite-difference relative error {worst:.3e}", rows.len());
    println!("{}", path.display());
    Ok(())
}

fn run_quadratic(common: &Common) -> Result<()> {
    let o = common.overrides()?;
    if o.model.as_deref().is_some_and(|m| !m.eq_ignore_ascii_case("quadratic")) {
        return Err(LlrError::Config("the quadratic diagnostic only runs on the quadratic model".into()));
    }
    let alpha = o.alpha.unwrap_or(1e8);
    let base = QuadraticConfig::new(alpha);
    let algorithms = o.algorithms.clone().unwrap_or(vec![base.algorithm]);
    let grid = o.eta_grid.clone().unwrap_or(vec![base.eta0]);
    let mut settings = base.settings.clone();
    settings.hessian = o.hessian.unwrap_or_default();
    settings.tau = o.tau.unwrap_or(settings.tau);
    settings.svrg_refresh = o.svrg_refresh;
    let dir = o.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    for algorithm in algorithms {
        for &eta0 in &grid {
            let config = QuadraticConfig {
                algorithm,
                eta0,
                theta0: o.theta0.unwrap_or(base.theta0),
                steps: o.steps.unwrap_or(base.steps),
                settings: settings.clone(),
                ..base.clone()
            };
            let rows = quadratic_diagnostic(&config)?;
            let path = dir.join(format!("quadratic_alpha{alpha:e}_{algorithm}_eta{eta0:e}.csv"));
            write_quadratic_csv(&rows, BufWriter::new(File::create(&path)?))?;
            let last = rows.iter().rev().find_map(|r| r.log10_ratio());
            let diverged = rows.iter().position(|r| r.diverged);
            println!("{algorithm}\t{eta0:e}\tfinal log10 ratio {last:?}\tdiverged at {diverged:?}\t{}", path.display());
        }
    }
    Ok(())
}

fn run_compare(common: &Common) -> Result<()> {
    let config = common.experiment()?;
    let report = compare_best_fixed(&config)?;
    let path = write_comparison(&report, &config.out_dir)?;
    let w = &report.winner;
    println!("winner\t{}\t{:e}\tR_T = {:.6e}", w.algorithm, w.eta0, w.final_regret);
    for e in [&report.low, &report.high] {
        println!("{}\t{}\t{:e}\tR_T = {:.6e}\tratio {:.3}", e.role, e.algorithm, e.eta0, e.final_regret, e.final_regret / w.final_regret);
    }
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run_sweep(c),
        Command::Certify { common, times, eps } => run_certify(common, times, *eps),
        Command::Quadratic(c) => run_quadratic(c),
        Command::Compare(c) => run_compare(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
