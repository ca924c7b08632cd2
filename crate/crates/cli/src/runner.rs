//! `run <config>`: sample (or load) the ensemble, compute the reports and
//! write every artifact once, from the calling thread.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use mallows_lab::assoc::{estimate_covariances, CovarianceSummary, CovarianceTable, Stationarity};
use mallows_lab::gibbs::{mixing_diagnostic, sample_ensemble, ChainModel};
use mallows_lab::limit::report::fmt_f64;
use mallows_lab::limit::{block_diagnostics, convergence_curve_with, BlockScheme, ConvergenceReport, SumMode};
use mallows_lab::{Execution, NormalLaw, ReplicaEnsemble};

use crate::cache::{cache_key, resolve_dir, EnsembleCache};
use crate::config::{self, ExperimentConfig};
use crate::{CliError, BUILD_ID};

/// Sweeps of the pilot chain behind the mixing diagnostic.
pub const PILOT_SWEEPS: usize = 200;

pub const SEED_RULE: &str = "replica r draws from ChaCha8Rng::seed_from_u64(seed) with stream r; \
                             the mixing pilot chain uses stream 2^64-1";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub no_cache: bool,
    pub sequential: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub cache_hit: bool,
    pub artifacts: Vec<PathBuf>,
    pub slow_mixing: bool,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
        path: path.to_path_buf(),
        source,
    })?;
    config::parse(&text).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

/// Everything computed for one run, before any file is written.
struct Products {
    report: ConvergenceReport,
    covariance: String,
    blocks: String,
    plots: Vec<(String, String)>,
    chi: Vec<(usize, CovarianceSummary)>,
}

fn covariance_csv(cov: &CovarianceSummary, offsets: &[usize], lo: usize) -> String {
    let mut out = String::new();
    match &cov.table {
        CovarianceTable::Stationary(lags) => {
            out.push_str("lag,cov,se\n");
            for (j, (c, se)) in lags.values.iter().zip(&lags.se).enumerate() {
                let _ = writeln!(out, "{j},{},{}", fmt_f64(*c), fmt_f64(*se));
            }
        }
        CovarianceTable::NonStationary(sites) => {
            out.push_str("k,lag,cov,se\n");
            for (s, &k) in offsets.iter().enumerate() {
                debug_assert_eq!(sites.sites[s], k - lo);
                for (idx, (c, se)) in sites.values[s].iter().zip(&sites.se[s]).enumerate() {
                    if let (Some(c), Some(se)) = (c, se) {
                        let lag = idx as i64 - sites.max_lag as i64;
                        let _ = writeln!(out, "{k},{lag},{},{}", fmt_f64(*c), fmt_f64(*se));
                    }
                }
            }
        }
    }
    out
}

const BLOCKS_HEADER: &str = "k,n,block_len,blocks,remainder,sigma2_window,sigma2_window_se,sigma2_mblocks,\
sigma2_mblocks_se,s2,s2_se,ratio_window_mblocks,ratio_window_mblocks_se,ratio_mblocks_s2,ratio_mblocks_s2_se,\
c_hat,v0_hat,c_star_hat,sandwich";

fn blocks_csv(ens: &ReplicaEnsemble, cfg: &ExperimentConfig) -> Result<String, CliError> {
    let mut out = String::from(BLOCKS_HEADER);
    out.push('\n');
    for &k in &cfg.analysis.offsets {
        for &n in &cfg.analysis.lengths {
            let scheme = BlockScheme::new(n, cfg.analysis.delta)?;
            let d = block_diagnostics(ens, &scheme, k)?;
            let _ = write!(out, "{k},{n},{},{},{}", scheme.block_len, scheme.blocks, scheme.remainder);
            for e in [
                &d.sigma2_window,
                &d.sigma2_mblocks,
                &d.s2_sum,
                &d.ratio_window_mblocks,
                &d.ratio_mblocks_s2,
            ] {
                let _ = write!(out, ",{},{}", fmt_f64(e.value), fmt_f64(e.se));
            }
            let _ = writeln!(
                out,
                ",{},{},{},{}",
                fmt_f64(d.c_hat),
                fmt_f64(d.v0_hat),
                fmt_f64(d.c_star_hat),
                d.sandwich_holds(3.0)
            );
        }
    }
    Ok(out)
}

fn plot_name(r: f64, k: usize, several: bool) -> String {
    if several {
        format!("plotdata_r{r}_k{k}.tsv")
    } else {
        format!("plotdata_r{r}.tsv")
    }
}

fn compute(ens: &ReplicaEnsemble, cfg: &ExperimentConfig, exec: Execution) -> Result<Products, CliError> {
    let a = &cfg.analysis;
    let (lo, width) = cfg.analysis_window();
    let window = ens.window(lo, width)?;

    let stationarity = match a.mode {
        SumMode::Stationary => Stationarity::Stationary,
        SumMode::NonStationary => Stationarity::NonStationary {
            sites: a.offsets.iter().map(|k| k - lo).collect(),
        },
    };
    let cov = estimate_covariances(&window, &stationarity, a.max_lag)?;
    if cov.zero_variance_warning() {
        let sites: Vec<String> = cov.zero_variance_sites.iter().map(|s| (s + lo).to_string()).collect();
        return Err(CliError::Guard(format!("zero-variance sites {}", sites.join(", "))));
    }

    let law = NormalLaw::standard();
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    let mut chi = Vec::new();
    for &k in &a.offsets {
        let spec = cfg.sum_spec(k);
        let report = convergence_curve_with(ens, &spec, &law, exec)?;
        if cfg.output.tsv {
            for &r in &a.r_values {
                let mut body = String::from("# n\td_r\n");
                for row in report.series(r) {
                    let _ = writeln!(body, "{}\t{}", row.n, fmt_f64(row.d_r));
                }
                plots.push((plot_name(r, k, a.offsets.len() > 1), body));
            }
        }
        if a.mode == SumMode::Stationary {
            let sub = ens.window(k, spec.max_len())?;
            chi.push((k, estimate_covariances(&sub, &Stationarity::Stationary, a.max_lag)?));
        }
        rows.extend(report.rows);
    }
    Ok(Products {
        report: ConvergenceReport { rows },
        covariance: covariance_csv(&cov, &a.offsets, lo),
        blocks: blocks_csv(ens, cfg)?,
        plots,
        chi,
    })
}

fn write_artifact(dir: &Path, name: &str, body: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, body).map_err(CliError::io(format!("writing {}", tmp.display())))?;
    fs::rename(&tmp, &path).map_err(CliError::io(format!("renaming to {}", path.display())))?;
    Ok(path)
}

pub fn run_experiment(config_path: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut cfg = load_config(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.model.seed = seed;
    }
    if let Some(dir) = &opts.out_dir {
        cfg.output.directory = dir.clone();
    }
    let exec = if opts.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let m = &cfg.model;
    let model = ChainModel::new(m.coupling.clone(), m.spins, m.volume, m.boundary.clone(), m.r_cut)?;
    let mixing = mixing_diagnostic(&model, m.burn_in, PILOT_SWEEPS, m.seed)?;
    if mixing.slow_mixing {
        eprintln!(
            "warning: burn-in {} is shorter than 20 integrated autocorrelation times (tau_int = {:.3})",
            m.burn_in, mixing.tau_int
        );
    }

    let key = cache_key(m);
    let cache = (!opts.no_cache).then(|| EnsembleCache::new(resolve_dir(opts.cache_dir.as_deref())));
    let cached = match &cache {
        Some(c) => c.load(&key).map_err(CliError::io(format!("reading cache {}", c.path_for(&key).display())))?,
        None => None,
    };
    let cache_hit = cached.is_some();
    let ens = match cached {
        Some(ens) => ens,
        None => {
            let ens = sample_ensemble(&model, &m.plan(), exec)?;
            if let Some(c) = &cache {
                c.store(&key, &ens).map_err(CliError::io(format!("writing cache in {}", c.dir().display())))?;
            }
            ens
        }
    };
    if ens.replicas() != m.replicas || ens.len() != m.volume {
        return Err(CliError::Internal(format!(
            "cached ensemble is {}×{}, config wants {}×{}",
            ens.replicas(),
            ens.len(),
            m.replicas,
            m.volume
        )));
    }

    let products = compute(&ens, &cfg, exec)?;

    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
    let mut artifacts = Vec::new();
    if cfg.output.csv {
        artifacts.push(write_artifact(&dir, "report.csv", &products.report.to_csv(&m.name, m.seed))?);
        artifacts.push(write_artifact(&dir, "covariance.csv", &products.covariance)?);
        artifacts.push(write_artifact(&dir, "blocks.csv", &products.blocks)?);
    }
    for (name, body) in &products.plots {
        artifacts.push(write_artifact(&dir, name, body)?);
    }

    let mut manifest = String::from("# mallows-lab run manifest\n");
    let _ = writeln!(manifest, "build = {BUILD_ID}");
    let _ = writeln!(manifest, "config_path = {}", config_path.display());
    let _ = writeln!(manifest, "started_unix = {started_unix}");
    let _ = writeln!(manifest, "wall_clock_seconds = {:.3}", started.elapsed().as_secs_f64());
    let _ = writeln!(manifest, "execution = {exec:?}");
    let _ = writeln!(manifest, "seed = {}", m.seed);
    let _ = writeln!(manifest, "seed_rule = {SEED_RULE}");
    let cache_state = match (&cache, cache_hit) {
        (None, _) => "disabled",
        (Some(_), true) => "hit",
        (Some(_), false) => "miss",
    };
    let _ = writeln!(manifest, "cache = {cache_state} {key}");
    let _ = writeln!(
        manifest,
        "interaction_radius = {}\ntail_mass = {}\nretained_mass = {}",
        model.radius(),
        fmt_f64(model.tail_mass()),
        fmt_f64(model.retained_mass())
    );
    let _ = writeln!(
        manifest,
        "mixing = tau_int {} window {} pilot_sweeps {} slow_mixing {}",
        fmt_f64(mixing.tau_int),
        mixing.window,
        mixing.pilot_sweeps,
        mixing.slow_mixing
    );
    for (k, c) in &products.chi {
        let _ = writeln!(
            manifest,
            "chi_hat k={k} = {} se {} truncation_lag {} truncation_bias {}",
            fmt_f64(c.susceptibility),
            fmt_f64(c.susceptibility_se),
            c.truncation_lag,
            c.truncation_bias
        );
    }
    let _ = writeln!(manifest, "kolmogorov_bound_holds = {}", products.report.kolmogorov_bound_holds());
    for a in &artifacts {
        let _ = writeln!(manifest, "artifact = {}", a.file_name().and_then(|n| n.to_str()).unwrap_or(""));
    }
    manifest.push_str("\n# effective config\n");
    manifest.push_str(&config::serialize(&cfg));
    artifacts.push(write_artifact(&dir, "manifest.txt", &manifest)?);

    Ok(RunSummary {
        out_dir: dir,
        cache_hit,
        artifacts,
        slow_mixing: mixing.slow_mixing,
    })
}
