//! Experiment configuration: flat `[section]` headers with `key = value`
//! lines. `#` or `;` start a comment. Floats are written with 17
//! significant digits so a parse → serialize → parse cycle is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use mallows_lab::gibbs::{Boundary, CouplingFamily, RealLaw, SamplingPlan, SpinSpace};
use mallows_lab::limit::{Centering, PartialSumSpec, Scaling, SumMode};
use thiserror::Error;

/// A malformed or out-of-domain configuration. `line` is 1-based; 0 means
/// the problem is not tied to one line (e.g. a missing section).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

/// Centering of the partial sums. `Auto` uses the known mean 0 for
/// flip-symmetric models and the empirical mean otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CenteringChoice {
    Auto,
    Known(f64),
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    pub name: String,
    pub coupling: CouplingFamily,
    pub spins: SpinSpace,
    pub volume: usize,
    pub boundary: Boundary,
    pub burn_in: usize,
    pub thin: usize,
    pub replicas: usize,
    pub seed: u64,
    pub r_cut: Option<usize>,
}

impl ModelSection {
    pub fn plan(&self) -> SamplingPlan {
        SamplingPlan {
            burn_in: self.burn_in,
            thin: self.thin,
            replicas: self.replicas,
            seed: self.seed,
        }
    }

    /// Mean 0 holds exactly: flip-symmetric spins, couplings and ends.
    pub fn is_flip_symmetric(&self) -> bool {
        self.spins.is_flip_symmetric() && !matches!(self.boundary, Boundary::Frozen(w) if w != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSection {
    pub offsets: Vec<usize>,
    pub lengths: Vec<usize>,
    pub r_values: Vec<f64>,
    pub delta: f64,
    pub centering: CenteringChoice,
    pub scaling: Scaling,
    pub mode: SumMode,
    /// Lag depth of `covariance.csv` and of the susceptibility fit.
    pub max_lag: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub csv: bool,
    pub tsv: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Partial-sum specification for one offset `k`.
    pub fn sum_spec(&self, k: usize) -> PartialSumSpec {
        let a = &self.analysis;
        let mut spec = PartialSumSpec::new(k, a.lengths.clone(), a.r_values.clone());
        spec.centering = match a.centering {
            CenteringChoice::Known(mu) => Centering::KnownMean(mu),
            CenteringChoice::Empirical => Centering::EmpiricalMean,
            CenteringChoice::Auto if self.model.is_flip_symmetric() => Centering::KnownMean(0.0),
            CenteringChoice::Auto => Centering::EmpiricalMean,
        };
        spec.scaling = a.scaling;
        spec.mode = a.mode;
        spec.delta = a.delta;
        spec.chi_max_lag = a.max_lag;
        spec
    }

    /// Smallest window covering every offset and length.
    pub fn analysis_window(&self) -> (usize, usize) {
        let lo = *self.analysis.offsets.iter().min().expect("validated");
        let hi = self.analysis.offsets.iter().max().expect("validated") + self.analysis.lengths.last().expect("validated");
        (lo, hi - lo)
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
    used: bool,
}

#[derive(Debug, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

struct Sections {
    map: BTreeMap<String, Section>,
}

const SECTIONS: [&str; 3] = ["model", "analysis", "output"];

impl Sections {
    fn lex(text: &str) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return err(line, format!("unterminated section header `{content}`"));
                };
                let name = name.trim().to_ascii_lowercase();
                if !SECTIONS.contains(&name.as_str()) {
                    return err(line, format!("unknown section [{name}]; expected one of [model], [analysis], [output]"));
                }
                if map.contains_key(&name) {
                    return err(line, format!("section [{name}] appears twice"));
                }
                map.insert(name.clone(), Section { line, ..Default::default() });
                current = Some(name);
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return err(line, format!("expected `key = value`, found `{content}`"));
            };
            let Some(section) = &current else {
                return err(line, "key outside of any section");
            };
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return err(line, "empty key");
            }
            let entries = &mut map.get_mut(section).expect("inserted above").entries;
            if let Some(prev) = entries.get(&key) {
                return err(line, format!("duplicate key `{key}` (first set on line {})", prev.line));
            }
            entries.insert(
                key,
                Entry {
                    value: value.trim().to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(Sections { map })
    }

    fn section(&mut self, name: &str) -> Result<Cursor<'_>, ConfigError> {
        match self.map.get_mut(name) {
            Some(section) => Ok(Cursor { name: name.to_string(), section }),
            None => err(0, format!("missing section [{name}]")),
        }
    }

    /// Rejects keys nobody read.
    fn finish(&self) -> Result<(), ConfigError> {
        let mut stray: Vec<(&String, &String, &Entry)> = self
            .map
            .iter()
            .flat_map(|(s, sec)| sec.entries.iter().map(move |(k, e)| (s, k, e)))
            .filter(|(_, _, e)| !e.used)
            .collect();
        stray.sort_by_key(|(_, _, e)| e.line);
        match stray.first() {
            Some((s, k, e)) => err(e.line, format!("unknown or inapplicable key `{k}` in [{s}]")),
            None => Ok(()),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let trimmed = line.trim_start();
    if trimmed.starts_with('#') || trimmed.starts_with(';') {
        return "";
    }
    // Inline comments need whitespace before the marker.
    let bytes = line.as_bytes();
    for i in 1..bytes.len() {
        if (bytes[i] == b'#' || bytes[i] == b';') && bytes[i - 1].is_ascii_whitespace() {
            return &line[..i];
        }
    }
    line
}

struct Cursor<'a> {
    name: String,
    section: &'a mut Section,
}

impl Cursor<'_> {
    fn header(&self) -> usize {
        self.section.line
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.section.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn required(&mut self, key: &str) -> Result<(String, usize), ConfigError> {
        match self.raw(key) {
            Some(v) => Ok(v),
            None => err(self.header(), format!("[{}] is missing required key `{key}`", self.name)),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<(T, usize), ConfigError> {
        let (v, line) = self.required(key)?;
        match v.parse() {
            Ok(x) => Ok((x, line)),
            Err(_) => err(line, format!("`{key}` must be {what}, found `{v}`")),
        }
    }

    fn parse_or<T: std::str::FromStr>(&mut self, key: &str, what: &str, default: T) -> Result<(T, usize), ConfigError> {
        if self.section.entries.contains_key(key) {
            self.parse(key, what)
        } else {
            Ok((default, self.header()))
        }
    }

    fn float(&mut self, key: &str) -> Result<(f64, usize), ConfigError> {
        let (x, line): (f64, usize) = self.parse(key, "a number")?;
        if !x.is_finite() {
            return err(line, format!("`{key}` must be finite"));
        }
        Ok((x, line))
    }

    fn int(&mut self, key: &str) -> Result<(usize, usize), ConfigError> {
        self.parse(key, "a nonnegative integer")
    }

    fn positive(&mut self, key: &str) -> Result<usize, ConfigError> {
        let (x, line) = self.int(key)?;
        if x == 0 {
            return err(line, format!("`{key}` must be at least 1"));
        }
        Ok(x)
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<(Vec<T>, usize), ConfigError> {
        let (v, line) = self.required(key)?;
        let mut out = Vec::new();
        for item in v.split(',').map(str::trim) {
            match item.parse() {
                Ok(x) => out.push(x),
                Err(_) => return err(line, format!("`{key}` must be a comma-separated list of {what}, found `{item}`")),
            }
        }
        Ok((out, line))
    }

    fn word(&mut self, key: &str, choices: &[&str]) -> Result<(String, usize), ConfigError> {
        let (v, line) = self.required(key)?;
        let v = v.to_ascii_lowercase();
        if !choices.contains(&v.as_str()) {
            return err(line, format!("`{key}` must be one of {}, found `{v}`", choices.join(", ")));
        }
        Ok((v, line))
    }

    fn word_or(&mut self, key: &str, choices: &[&str], default: &str) -> Result<(String, usize), ConfigError> {
        if self.section.entries.contains_key(key) {
            self.word(key, choices)
        } else {
            Ok((default.to_string(), self.header()))
        }
    }
}

fn lab<T>(line: usize, r: mallows_lab::Result<T>) -> Result<T, ConfigError> {
    r.or_else(|e| err(line, e.to_string()))
}

fn parse_model(sections: &mut Sections) -> Result<ModelSection, ConfigError> {
    let mut c = sections.section("model")?;
    let name = c.raw("name").map(|(v, _)| v).unwrap_or_else(|| "experiment".into());
    if name.is_empty() || name.contains(',') || name.contains(char::is_whitespace) {
        return err(c.header(), "`name` must be a nonempty word without commas or spaces");
    }
    let (kind, kind_line) = c.word("coupling", &["zero", "finite_range", "long_range", "perturbed"])?;
    let coupling = match kind.as_str() {
        "zero" => CouplingFamily::Zero,
        "finite_range" => {
            let (j, _) = c.float("j")?;
            let range = c.positive("range")?;
            lab(kind_line, CouplingFamily::finite_range(j, range))?
        }
        "long_range" => {
            let (beta, _) = c.float("beta")?;
            let (alpha, _) = c.float("alpha")?;
            lab(kind_line, CouplingFamily::long_range(beta, alpha))?
        }
        _ => {
            let (beta, _) = c.parse_or("beta", "a number", 1.0)?;
            let (alpha, _) = c.float("alpha")?;
            let (c1, _) = c.float("c1")?;
            let (c2, _) = c.float("c2")?;
            let (seed, _) = c.parse("perturbation_seed", "a nonnegative integer")?;
            lab(kind_line, CouplingFamily::perturbed_scaled(beta, alpha, c1, c2, seed))?
        }
    };
    let (spin_kind, spin_line) = c.word("spins", &["plus_minus", "interval", "normal", "uniform", "exponential"])?;
    let spins = match spin_kind.as_str() {
        "plus_minus" => SpinSpace::PlusMinus,
        "interval" => SpinSpace::Interval,
        "normal" => SpinSpace::RealLaw(RealLaw::Normal {
            mean: c.float("spin_mean")?.0,
            stddev: c.float("spin_stddev")?.0,
        }),
        "uniform" => SpinSpace::RealLaw(RealLaw::Uniform {
            lo: c.float("spin_lo")?.0,
            hi: c.float("spin_hi")?.0,
        }),
        _ => SpinSpace::RealLaw(RealLaw::Exponential {
            rate: c.float("spin_rate")?.0,
        }),
    };
    if let SpinSpace::RealLaw(law) = &spins {
        lab(spin_line, law.validate())?;
    }
    let volume = c.positive("volume")?;
    let (b, _) = c.word("boundary", &["free", "periodic", "frozen"])?;
    let boundary = match b.as_str() {
        "free" => Boundary::Free,
        "periodic" => Boundary::Periodic,
        _ => {
            let (w, line) = c.float("frozen_value")?;
            if !spins.contains(w) {
                return err(line, format!("`frozen_value` {w} lies outside the {} spin space", spins.name()));
            }
            Boundary::Frozen(w)
        }
    };
    if matches!(spins, SpinSpace::RealLaw(_)) && !coupling.is_zero() {
        return err(spin_line, "real-valued spins are only supported with `coupling = zero`");
    }
    let burn_in = c.positive("burn_in")?;
    let thin = c.positive("thin")?;
    let (replicas, replicas_line) = c.int("replicas")?;
    if replicas < 4 {
        return err(replicas_line, "`replicas` must be at least 4");
    }
    let (seed, _) = c.parse("seed", "a nonnegative integer")?;
    let r_cut = match c.raw("r_cut") {
        None => None,
        Some((v, _)) if v.eq_ignore_ascii_case("none") => None,
        Some((v, line)) => match v.parse::<usize>() {
            Ok(0) | Err(_) => return err(line, format!("`r_cut` must be a positive integer or `none`, found `{v}`")),
            Ok(r) => Some(r),
        },
    };
    Ok(ModelSection {
        name,
        coupling,
        spins,
        volume,
        boundary,
        burn_in,
        thin,
        replicas,
        seed,
        r_cut,
    })
}

fn parse_analysis(sections: &mut Sections, volume: usize) -> Result<AnalysisSection, ConfigError> {
    let mut c = sections.section("analysis")?;
    let (offsets, offsets_line) = c.list::<usize>("offsets", "nonnegative integers")?;
    if !offsets.windows(2).all(|w| w[0] < w[1]) {
        return err(offsets_line, "`offsets` must be strictly increasing");
    }
    let (lengths, lengths_line) = c.list::<usize>("lengths", "positive integers")?;
    if lengths.contains(&0) || !lengths.windows(2).all(|w| w[0] < w[1]) {
        return err(lengths_line, "`lengths` must be positive and strictly increasing");
    }
    let max_len = *lengths.last().expect("split yields one item");
    if let Some(k) = offsets.iter().find(|&&k| k + max_len > volume) {
        return err(
            offsets_line,
            format!("window [{k}, {}) does not fit the volume {volume}", k + max_len),
        );
    }
    let (r_values, r_line) = c.list::<f64>("r_values", "numbers")?;
    if r_values.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return err(r_line, "`r_values` must be positive");
    }
    let (delta, delta_line) = c.parse_or("delta", "a number", 0.2)?;
    if !(delta > 0.0 && delta < 0.25) {
        return err(delta_line, format!("`delta` must lie in (0, 1/4), found {delta}"));
    }
    let (centering, _) = c.word_or("centering", &["auto", "known", "empirical"], "auto")?;
    let centering = match centering.as_str() {
        "auto" => CenteringChoice::Auto,
        "empirical" => CenteringChoice::Empirical,
        _ => CenteringChoice::Known(c.float("mean")?.0),
    };
    let (scaling, _) = c.word_or("scaling", &["empirical", "theoretical"], "empirical")?;
    let scaling = match scaling.as_str() {
        "empirical" => Scaling::EmpiricalSigma,
        _ => {
            let (sigma, line) = c.float("sigma")?;
            if sigma <= 0.0 {
                return err(line, "`sigma` must be positive");
            }
            Scaling::TheoreticalSigma(sigma)
        }
    };
    let (mode, _) = c.word_or("mode", &["stationary", "nonstationary"], "stationary")?;
    let mode = if mode == "stationary" {
        SumMode::Stationary
    } else {
        SumMode::NonStationary
    };
    let (max_lag, _) = c.parse_or("max_lag", "a nonnegative integer", 32usize)?;
    Ok(AnalysisSection {
        offsets,
        lengths,
        r_values,
        delta,
        centering,
        scaling,
        mode,
        max_lag,
    })
}

fn parse_output(sections: &mut Sections) -> Result<OutputSection, ConfigError> {
    let mut c = sections.section("output")?;
    let (directory, _) = c.required("directory")?;
    if directory.is_empty() {
        return err(c.header(), "`directory` must not be empty");
    }
    let (formats, line) = match c.raw("formats") {
        Some(v) => v,
        None => ("csv, tsv".to_string(), c.header()),
    };
    let mut out = OutputSection {
        directory: PathBuf::from(directory),
        csv: false,
        tsv: false,
    };
    for f in formats.split(',').map(|s| s.trim().to_ascii_lowercase()) {
        match f.as_str() {
            "csv" => out.csv = true,
            "tsv" => out.tsv = true,
            _ => return err(line, format!("unknown output format `{f}`; expected csv, tsv")),
        }
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut sections = Sections::lex(text)?;
    let model = parse_model(&mut sections)?;
    let analysis = parse_analysis(&mut sections, model.volume)?;
    let output = parse_output(&mut sections)?;
    sections.finish()?;
    Ok(ExperimentConfig { model, analysis, output })
}

// ---------------------------------------------------------------------------
// Serialization

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn join<T>(xs: &[T], f: impl Fn(&T) -> String) -> String {
    xs.iter().map(f).collect::<Vec<_>>().join(", ")
}

/// Canonical `[model]` section; also the ensemble cache key material.
pub fn serialize_model(m: &ModelSection) -> String {
    let mut s = String::from("[model]\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("name", m.name.clone());
    kv("coupling", m.coupling.name().into());
    match m.coupling {
        CouplingFamily::Zero => {}
        CouplingFamily::FiniteRange { j, range } => {
            kv("j", fmt_float(j));
            kv("range", range.to_string());
        }
        CouplingFamily::LongRange { beta, alpha } => {
            kv("beta", fmt_float(beta));
            kv("alpha", fmt_float(alpha));
        }
        CouplingFamily::Perturbed { beta, alpha, c1, c2, seed } => {
            kv("beta", fmt_float(beta));
            kv("alpha", fmt_float(alpha));
            kv("c1", fmt_float(c1));
            kv("c2", fmt_float(c2));
            kv("perturbation_seed", seed.to_string());
        }
    }
    match m.spins {
        SpinSpace::PlusMinus => kv("spins", "plus_minus".into()),
        SpinSpace::Interval => kv("spins", "interval".into()),
        SpinSpace::RealLaw(RealLaw::Normal { mean, stddev }) => {
            kv("spins", "normal".into());
            kv("spin_mean", fmt_float(mean));
            kv("spin_stddev", fmt_float(stddev));
        }
        SpinSpace::RealLaw(RealLaw::Uniform { lo, hi }) => {
            kv("spins", "uniform".into());
            kv("spin_lo", fmt_float(lo));
            kv("spin_hi", fmt_float(hi));
        }
        SpinSpace::RealLaw(RealLaw::Exponential { rate }) => {
            kv("spins", "exponential".into());
            kv("spin_rate", fmt_float(rate));
        }
    }
    kv("volume", m.volume.to_string());
    match m.boundary {
        Boundary::Free => kv("boundary", "free".into()),
        Boundary::Periodic => kv("boundary", "periodic".into()),
        Boundary::Frozen(w) => {
            kv("boundary", "frozen".into());
            kv("frozen_value", fmt_float(w));
        }
    }
    kv("burn_in", m.burn_in.to_string());
    kv("thin", m.thin.to_string());
    kv("replicas", m.replicas.to_string());
    kv("seed", m.seed.to_string());
    kv("r_cut", m.r_cut.map_or("none".into(), |r| r.to_string()));
    s
}

pub fn serialize(c: &ExperimentConfig) -> String {
    let mut s = serialize_model(&c.model);
    let a = &c.analysis;
    s.push_str("\n[analysis]\n");
    let _ = writeln!(s, "offsets = {}", join(&a.offsets, |k| k.to_string()));
    let _ = writeln!(s, "lengths = {}", join(&a.lengths, |n| n.to_string()));
    let _ = writeln!(s, "r_values = {}", join(&a.r_values, |r| fmt_float(*r)));
    let _ = writeln!(s, "delta = {}", fmt_float(a.delta));
    match a.centering {
        CenteringChoice::Auto => s.push_str("centering = auto\n"),
        CenteringChoice::Empirical => s.push_str("centering = empirical\n"),
        CenteringChoice::Known(mu) => {
            let _ = writeln!(s, "centering = known\nmean = {}", fmt_float(mu));
        }
    }
    match a.scaling {
        Scaling::EmpiricalSigma => s.push_str("scaling = empirical\n"),
        Scaling::TheoreticalSigma(sigma) => {
            let _ = writeln!(s, "scaling = theoretical\nsigma = {}", fmt_float(sigma));
        }
    }
    let _ = writeln!(
        s,
        "mode = {}",
        if a.mode == SumMode::Stationary { "stationary" } else { "nonstationary" }
    );
    let _ = writeln!(s, "max_lag = {}", a.max_lag);
    let o = &c.output;
    let formats: Vec<&str> = [(o.csv, "csv"), (o.tsv, "tsv")].iter().filter(|f| f.0).map(|f| f.1).collect();
    let _ = write!(s, "\n[output]\ndirectory = {}\nformats = {}\n", o.directory.display(), formats.join(", "));
    s
}
