use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mallows_lab::limit::decreasing_trend;
use mallows_lab::transport::mallows_vs_normal;
use mallows_lab::{DistanceOrder, EmpiricalDF, NormalLaw, SortedSample};
use mallows_lab_cli::{run_experiment, RunOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_mallows-lab");

const PRODUCT_NORMAL: &str = "\
[model]
name = product_normal
coupling = zero
spins = normal
spin_mean = 0
spin_stddev = 1
volume = 300
boundary = free
burn_in = 20
thin = 1
replicas = 1500
seed = 1

[analysis]
offsets = 16
lengths = 16, 64, 256
r_values = 1, 2
centering = known
mean = 0
scaling = theoretical
sigma = 1

[output]
directory = unused
";

const FINITE_RANGE: &str = "\
[model]
name = finite_range_interval
coupling = finite_range
j = 0.2
range = 1
spins = interval
volume = 300
boundary = free
burn_in = 40
thin = 1
replicas = 2000
seed = 2

[analysis]
offsets = 8, 24
lengths = 4, 16, 64, 256
r_values = 1, 2, 3
max_lag = 16

[output]
directory = unused
";

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Sandbox {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn opts(&self, out: &str) -> RunOptions {
        RunOptions {
            out_dir: Some(self.path(out)),
            cache_dir: Some(self.path("cache")),
            ..Default::default()
        }
    }
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

/// Every artifact except the manifest, which carries the wall clock.
fn numeric_artifacts(dir: &Path) -> Vec<(String, String)> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.txt")
        .collect();
    names.sort();
    names.into_iter().map(|n| { let body = read(dir, &n); (n, body) }).collect()
}

struct Row {
    k: i64,
    n: usize,
    r: f64,
    d_r: f64,
    d_r_se: f64,
    d_k: f64,
}

fn report_rows(dir: &Path) -> Vec<Row> {
    let text = read(dir, "report.csv");
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model,k,n,r,d_r,d_r_se,d_K,mom_emp,mom_target,var_ratio,be_bound,replicas,seed"
    );
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 13, "{l}");
            Row {
                k: f[1].parse().unwrap(),
                n: f[2].parse().unwrap(),
                r: f[3].parse().unwrap(),
                d_r: f[4].parse().unwrap(),
                d_r_se: f[5].parse().unwrap(),
                d_k: f[6].parse().unwrap(),
            }
        })
        .collect()
}

#[test]
fn reruns_are_byte_identical() {
    let sb = Sandbox::new();
    let cfg = sb.config("fr.ini", FINITE_RANGE);
    let fresh = |out: &str, sequential: bool| {
        let opts = RunOptions {
            no_cache: true,
            sequential,
            ..sb.opts(out)
        };
        run_experiment(&cfg, &opts).unwrap();
        numeric_artifacts(&sb.path(out))
    };
    let a = fresh("a", false);
    let b = fresh("b", false);
    let c = fresh("c", true);
    assert_eq!(a, b);
    assert_eq!(a, c, "execution policy changed the output");
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    for want in ["report.csv", "covariance.csv", "blocks.csv", "plotdata_r2_k8.tsv", "plotdata_r3_k24.tsv"] {
        assert!(names.contains(&want), "{want} missing from {names:?}");
    }
}

#[test]
fn cached_ensembles_reproduce_fresh_reports() {
    let sb = Sandbox::new();
    let cfg = sb.config("fr.ini", FINITE_RANGE);
    let first = run_experiment(&cfg, &sb.opts("miss")).unwrap();
    let second = run_experiment(&cfg, &sb.opts("hit")).unwrap();
    assert!(!first.cache_hit);
    assert!(second.cache_hit);
    let fresh = RunOptions {
        no_cache: true,
        ..sb.opts("fresh")
    };
    run_experiment(&cfg, &fresh).unwrap();
    let hit = numeric_artifacts(&sb.path("hit"));
    assert_eq!(hit, numeric_artifacts(&sb.path("miss")));
    assert_eq!(hit, numeric_artifacts(&sb.path("fresh")));
    assert!(read(&sb.path("hit"), "manifest.txt").contains("cache = hit "));

    // A new seed is a new cache key and a different ensemble.
    let reseeded = RunOptions {
        seed: Some(99),
        ..sb.opts("reseeded")
    };
    assert!(!run_experiment(&cfg, &reseeded).unwrap().cache_hit);
    assert_ne!(read(&sb.path("reseeded"), "report.csv"), read(&sb.path("fresh"), "report.csv"));
    assert!(read(&sb.path("reseeded"), "manifest.txt").contains("\nseed = 99\n"));
}

#[test]
fn artifact_layout() {
    let sb = Sandbox::new();
    let cfg = sb.config("fr.ini", FINITE_RANGE);
    run_experiment(&cfg, &sb.opts("out")).unwrap();
    let out = sb.path("out");

    let rows = report_rows(&out);
    assert_eq!(rows.len(), 2 * 4 * 3);
    assert!(rows.iter().all(|r| r.k == 8 || r.k == 24));

    let tsv = read(&out, "plotdata_r2_k24.tsv");
    let mut lines = tsv.lines();
    assert_eq!(lines.next().unwrap(), "# n\td_r");
    let ns: Vec<usize> = lines
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            assert_eq!(cols.len(), 2);
            cols[1].parse::<f64>().unwrap();
            cols[0].parse().unwrap()
        })
        .collect();
    assert_eq!(ns, vec![4, 16, 64, 256]);

    let cov = read(&out, "covariance.csv");
    assert!(cov.starts_with("lag,cov,se\n"));
    assert_eq!(cov.lines().count(), 1 + 17);

    let blocks = read(&out, "blocks.csv");
    assert_eq!(blocks.lines().count(), 1 + 2 * 4);
    assert!(blocks.lines().skip(1).all(|l| l.ends_with(",true")), "{blocks}");

    let manifest = read(&out, "manifest.txt");
    for key in ["build = v", "wall_clock_seconds = ", "seed_rule = ", "mixing = tau_int", "chi_hat k=8 = ", "[model]", "[analysis]"] {
        assert!(manifest.contains(key), "manifest lacks `{key}`:\n{manifest}");
    }
}

#[test]
fn nonstationary_covariances_are_per_site() {
    let sb = Sandbox::new();
    let text = FINITE_RANGE.replace("max_lag = 16", "max_lag = 3\nmode = nonstationary");
    let cfg = sb.config("ns.ini", &text);
    run_experiment(&cfg, &sb.opts("out")).unwrap();
    let cov = read(&sb.path("out"), "covariance.csv");
    let mut lines = cov.lines();
    assert_eq!(lines.next().unwrap(), "k,lag,cov,se");
    let keys: Vec<(usize, i64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    // Site 8 sits at the window's left edge, so only nonnegative lags.
    assert_eq!(keys.iter().filter(|k| k.0 == 8).count(), 4);
    assert_eq!(keys.iter().filter(|k| k.0 == 24).count(), 7);
}

/// d_2 of `size` exact N(0,1) draws against Φ, over `trials` seeds.
fn normal_noise_floor(size: usize, trials: u64) -> Vec<f64> {
    let two = DistanceOrder::new(2.0).unwrap();
    (0..trials)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + t);
            let xs: Vec<f64> = (0..size).map(|_| rng.sample(StandardNormal)).collect();
            mallows_vs_normal(&EmpiricalDF::new(SortedSample::new(xs).unwrap()), &NormalLaw::standard(), two)
        })
        .collect()
}

#[test]
fn product_normal_sits_at_the_noise_floor() {
    let sb = Sandbox::new();
    let cfg = sb.config("ex1.ini", PRODUCT_NORMAL);
    run_experiment(&cfg, &sb.opts("out")).unwrap();
    let rows = report_rows(&sb.path("out"));
    let mut floor = normal_noise_floor(1500, 200);
    floor.sort_by(f64::total_cmp);
    let q99 = floor[197];
    for row in rows.iter().filter(|r| r.r == 2.0) {
        assert!(row.d_r <= q99, "n = {}: d_2 {} above the 99% noise quantile {q99}", row.n, row.d_r);
    }
}

#[test]
fn finite_range_d2_trends_down() {
    let sb = Sandbox::new();
    let cfg = sb.config("fr.ini", FINITE_RANGE);
    run_experiment(&cfg, &sb.opts("out")).unwrap();
    let rows = report_rows(&sb.path("out"));
    for k in [8, 24] {
        let series: Vec<&Row> = rows.iter().filter(|r| r.k == k && r.r == 2.0).collect();
        let d: Vec<f64> = series.iter().map(|r| r.d_r).collect();
        let se: Vec<f64> = series.iter().map(|r| r.d_r_se).collect();
        assert!(decreasing_trend(&d, &se, 3.0).decreasing_within_margin, "k = {k}: {d:?} ± {se:?}");
        assert!(d[0] > d[d.len() - 1], "k = {k}: {d:?}");
    }
    // Kolmogorov bound, recomputed from the CSV columns.
    for row in rows.iter().filter(|r| r.r == 1.0) {
        let bound = 2.0 * (row.d_r / (2.0 * std::f64::consts::PI).sqrt()).sqrt();
        assert!(row.d_k <= bound, "n = {}: {} > {bound}", row.n, row.d_k);
    }
}

fn run_bin(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn malformed_config_exits_2_with_a_line_number() {
    let sb = Sandbox::new();
    let cases = [
        (FINITE_RANGE.replace("j = 0.2", "j = 0.2x"), "line 4"),
        (FINITE_RANGE.replace("range = 1", "range = 1\nwobble = 3"), "line 6"),
        (FINITE_RANGE.replace("offsets = 8, 24", "offsets = 8, 100"), "line 15"),
        (FINITE_RANGE.replace("[output]", "[outputs]"), "line 20"),
    ];
    for (i, (text, want)) in cases.iter().enumerate() {
        let cfg = sb.config(&format!("bad{i}.ini"), text);
        let (code, _, err) = run_bin(&["run", cfg.to_str().unwrap(), "--no-cache"]);
        assert_eq!(code, 2, "{err}");
        assert!(err.contains(want), "expected `{want}` in {err}");
    }
    let (code, _, err) = run_bin(&["run", sb.path("missing.ini").to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn tail_mass_guard_exits_3() {
    let sb = Sandbox::new();
    let text = FINITE_RANGE
        .replace("coupling = finite_range\nj = 0.2\nrange = 1", "coupling = long_range\nbeta = 0.05\nalpha = 1.5")
        .replace("spins = interval", "spins = plus_minus")
        .replace("seed = 2", "seed = 2\nr_cut = 4");
    let cfg = sb.config("tail.ini", &text);
    let out = sb.path("out");
    let (code, _, err) = run_bin(&["run", cfg.to_str().unwrap(), "--no-cache", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("tail mass"), "{err}");
    assert!(!out.exists(), "no artifacts on a guard failure");
}

#[test]
fn binary_run_and_cache_clear() {
    let sb = Sandbox::new();
    let cfg = sb.config("ex1.ini", PRODUCT_NORMAL);
    let cache = sb.path("cache");
    let out = sb.path("out");
    let args = [
        "--threads",
        "2",
        "--cache-dir",
        cache.to_str().unwrap(),
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ];
    let (code, stdout, err) = run_bin(&args);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("cache miss"));
    assert!(run_bin(&args).1.contains("cache hit"));
    let (code, stdout, _) = run_bin(&["--cache-dir", cache.to_str().unwrap(), "cache", "--clear"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("removed 1 cached"), "{stdout}");
    assert!(run_bin(&args).1.contains("cache miss"));
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = mallows_lab_cli::runner::load_config(&path).unwrap();
        let text = mallows_lab_cli::config::serialize(&cfg);
        assert_eq!(mallows_lab_cli::config::parse(&text).unwrap(), cfg, "{}", path.display());
        seen += 1;
    }
    assert_eq!(seen, 4);
}
