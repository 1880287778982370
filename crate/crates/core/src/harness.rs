//! Random ensembles, the weak-RSP phase experiment and config-driven
//! certify → solve → bound pipelines with JSON and CSV output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::certify::{self, PropertyReport, PropertySet};
use crate::error::{Error, Result};
use crate::hoffman::{self, MagnitudeLaw, StabilityConfig, StabilityReport, Theorem};
use crate::io;
use crate::linops::{DenseMatrix, DesignMatrix};
use crate::solvers::{L2Options, NormKind};

/// Draws per matrix before giving up on full row rank.
pub const RANK_RETRIES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Gaussian,
    Bernoulli,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    None,
    #[default]
    InvSqrtM,
}

impl FromStr for Normalize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalize::None),
            "inv_sqrt_m" => Ok(Normalize::InvSqrtM),
            _ => Err(Error::InvalidInput(format!("unknown normalization `{s}` (expected none or inv_sqrt_m)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub count: usize,
    pub seed: u64,
    pub normalize: Normalize,
}

impl EnsembleSpec {
    pub fn gaussian(m: usize, n: usize, k: usize, count: usize, seed: u64) -> Self {
        Self { kind: EnsembleKind::Gaussian, m, n, k, count, seed, normalize: Normalize::InvSqrtM }
    }

    pub fn bernoulli(m: usize, n: usize, k: usize, count: usize, seed: u64) -> Self {
        Self { kind: EnsembleKind::Bernoulli, ..Self::gaussian(m, n, k, count, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, EnsembleKind::File(_)) {
            return if self.k >= 1 { Ok(()) } else { Err(Error::InvalidInput("k must be at least 1".into())) };
        }
        if self.m == 0 || self.m >= self.n {
            return Err(Error::InvalidInput(format!("need 0 < m < n, got m = {}, n = {}", self.m, self.n)));
        }
        if self.k == 0 || self.count == 0 {
            return Err(Error::InvalidInput("k and count must be at least 1".into()));
        }
        Ok(())
    }
}

fn draw(kind: &EnsembleKind, m: usize, n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    match kind {
        EnsembleKind::Bernoulli => DenseMatrix::from_fn(m, n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 }),
        _ => DenseMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng)),
    }
}

/// Matrix `index` of the ensemble, drawn from its own stream so that the
/// ensemble can be regenerated one matrix at a time.
pub fn gen_one(spec: &EnsembleSpec, index: usize) -> Result<DesignMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let scale = match spec.normalize {
        Normalize::None => 1.0,
        Normalize::InvSqrtM => 1.0 / (spec.m as f64).sqrt(),
    };
    for _ in 0..RANK_RETRIES {
        let a = draw(&spec.kind, spec.m, spec.n, &mut rng) * scale;
        match DesignMatrix::new(a) {
            Ok(d) => return Ok(d),
            Err(Error::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RankRetryExhausted(RANK_RETRIES))
}

pub fn gen_matrix(spec: &EnsembleSpec) -> Result<Vec<DesignMatrix>> {
    spec.validate()?;
    if let EnsembleKind::File(path) = &spec.kind {
        return Ok(vec![DesignMatrix::new(io::read_matrix(path)?)?]);
    }
    (0..spec.count).map(|i| gen_one(spec, i)).collect()
}

/// Two-sided 95% quantile of the standard normal.
const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `hits` out of `trials`.
pub fn wilson_interval(hits: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub m: usize,
    pub trials: usize,
    pub holds: usize,
    pub frequency: f64,
    pub std_error: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurve {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub points: Vec<PhasePoint>,
    /// Frequencies never drop by more than the combined Wilson half-widths.
    pub nondecreasing_within_noise: bool,
}

/// Frequency with which Gaussian `m × n` matrices have the weak RSP of order `k`.
pub fn phase_experiment(n: usize, k: usize, ms: &[usize], per_point: usize, seed: u64) -> Result<PhaseCurve> {
    if per_point == 0 || k == 0 {
        return Err(Error::InvalidInput("per_point and k must be at least 1".into()));
    }
    let mut points = Vec::with_capacity(ms.len());
    for &m in ms {
        if m == 0 || m > n {
            return Err(Error::InvalidInput(format!("m = {m} outside 1..={n}")));
        }
        let spec = EnsembleSpec { seed: seed ^ ((m as u64) << 32), ..EnsembleSpec::gaussian(m, n, k, per_point, seed) };
        let mut holds = 0;
        for i in 0..per_point {
            if certify::certify_weak_rsp(&gen_one(&spec, i)?, k)?.holds() {
                holds += 1;
            }
        }
        let p = holds as f64 / per_point as f64;
        let (lo, hi) = wilson_interval(holds, per_point);
        points.push(PhasePoint {
            m,
            trials: per_point,
            holds,
            frequency: p,
            std_error: (p * (1.0 - p) / per_point as f64).sqrt(),
            wilson_low: lo,
            wilson_high: hi,
        });
    }
    let nondecreasing_within_noise = points.windows(2).all(|w| w[1].wilson_high >= w[0].wilson_low);
    Ok(PhaseCurve { n, k, seed, points, nondecreasing_within_noise })
}

pub fn phase_csv(curve: &PhaseCurve) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["m", "trials", "holds", "frequency", "std_error", "wilson_low", "wilson_high"]).map_err(csv_err)?;
    for p in &curve.points {
        w.write_record([
            p.m.to_string(),
            p.trials.to_string(),
            p.holds.to_string(),
            p.frequency.to_string(),
            p.std_error.to_string(),
            p.wilson_low.to_string(),
            p.wilson_high.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |g| g.to_string())
}

/// Flat per-trial rows: `trial, sigma_k, epsilon, distance, bound_factor,
/// empirical_gamma, feasible`, led by `instance` when requested.
pub fn reports_csv(reports: &[StabilityReport], with_instance: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["trial", "sigma_k", "epsilon", "distance", "bound_factor", "empirical_gamma", "feasible"];
    if with_instance {
        header.insert(0, "instance");
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in reports {
        let mut row = vec![
            r.trial.to_string(),
            r.sigma_k.to_string(),
            r.epsilon.to_string(),
            r.measured_distance.to_string(),
            r.bound_factor.to_string(),
            opt_num(r.empirical_gamma),
            r.feasible.to_string(),
        ];
        if with_instance {
            row.insert(0, r.instance.to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Fully parsed experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub ensemble: EnsembleSpec,
    pub theorem: Theorem,
    pub trials: usize,
    pub perturbation: f64,
    pub epsilon: f64,
    pub magnitudes: MagnitudeLaw,
    pub force: bool,
    pub properties: String,
    pub rho: f64,
    pub schedule: Vec<usize>,
    /// Also write `<name>_plot.csv` with `x,y` columns.
    pub plot: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            ensemble: EnsembleSpec::gaussian(4, 8, 1, 1, 0),
            theorem: Theorem::Bp,
            trials: 10,
            perturbation: 0.0,
            epsilon: 0.0,
            magnitudes: MagnitudeLaw::Mixed,
            force: false,
            properties: "weak-rsp,rsp".into(),
            rho: 0.9,
            schedule: L2Options::default().schedule,
            plot: false,
        }
    }
}

fn cfg_err(field: &str, line: Option<usize>, msg: impl fmt::Display) -> Error {
    Error::Config { field: field.to_string(), line, msg: msg.to_string() }
}

fn parse_field<T: FromStr>(field: &str, line: Option<usize>, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| cfg_err(field, line, format!("cannot parse `{value}`: {e}")))
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative matrix paths
    /// resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| cfg_err("", Some(i + 1), "expected `key = value`"))?;
            seen.insert(key.trim().to_string(), i + 1);
            cfg.set(key.trim(), value.trim(), Some(i + 1), base)?;
        }
        cfg.finish(&seen)
    }

    /// Applies `key=value` overrides on top of a parsed config.
    pub fn with_overrides(mut self, overrides: &[String]) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for o in overrides {
            let (key, value) = o.split_once('=').ok_or_else(|| cfg_err(o, None, "override must be `key=value`"))?;
            self.set(key.trim(), value.trim(), None, None)?;
            seen.insert(key.trim().to_string(), 0);
        }
        self.finish(&seen)
    }

    fn set(&mut self, key: &str, value: &str, line: Option<usize>, base: Option<&Path>) -> Result<()> {
        let e = &mut self.ensemble;
        match key {
            "name" => {
                if value.is_empty() || value.contains(['/', '\\']) {
                    return Err(cfg_err(key, line, "name must be a plain file stem"));
                }
                self.name = value.to_string();
            }
            "matrix" => {
                let p = PathBuf::from(value);
                let p = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p,
                };
                e.kind = EnsembleKind::File(p);
                e.count = 1;
            }
            "ensemble" => {
                e.kind = match value {
                    "gaussian" => EnsembleKind::Gaussian,
                    "bernoulli" => EnsembleKind::Bernoulli,
                    _ => return Err(cfg_err(key, line, format!("unknown ensemble `{value}` (expected gaussian or bernoulli)"))),
                }
            }
            "m" => e.m = parse_field(key, line, value)?,
            "n" => e.n = parse_field(key, line, value)?,
            "k" => e.k = parse_field(key, line, value)?,
            "count" => e.count = parse_field(key, line, value)?,
            "seed" => e.seed = parse_field(key, line, value)?,
            "normalize" => e.normalize = parse_field(key, line, value)?,
            "theorem" => self.theorem = parse_field(key, line, value)?,
            "norm" => {
                let kind: NormKind = parse_field(key, line, value)?;
                self.theorem = Theorem::ALL.into_iter().find(|t| t.kind() == kind).expect("every kind has a theorem");
            }
            "trials" => self.trials = parse_field(key, line, value)?,
            "perturbation" => self.perturbation = parse_field(key, line, value)?,
            "epsilon" => self.epsilon = parse_field(key, line, value)?,
            "magnitudes" => {
                self.magnitudes = match value {
                    "mixed" => MagnitudeLaw::Mixed,
                    "unit" => MagnitudeLaw::Unit,
                    "log_uniform" => MagnitudeLaw::LogUniform,
                    _ => return Err(cfg_err(key, line, format!("unknown magnitude law `{value}`"))),
                }
            }
            "force" => self.force = parse_field(key, line, value)?,
            "plot" => self.plot = parse_field(key, line, value)?,
            "properties" => {
                PropertySet::parse(value).map_err(|err| cfg_err(key, line, err))?;
                self.properties = value.to_string();
            }
            "rho" => self.rho = parse_field(key, line, value)?,
            "schedule" => {
                self.schedule = value.split(',').map(|s| parse_field(key, line, s.trim())).collect::<Result<_>>()?;
            }
            _ => return Err(cfg_err(key, line, "unknown key")),
        }
        Ok(())
    }

    fn finish(self, seen: &BTreeMap<String, usize>) -> Result<Self> {
        let at = |f: &str| seen.get(f).copied().filter(|&l| l > 0);
        let eps_needed = self.theorem != Theorem::Bp;
        if eps_needed && !(self.epsilon > 0.0) {
            return Err(cfg_err("epsilon", at("epsilon"), format!("theorem {} needs epsilon > 0", self.theorem)));
        }
        if !eps_needed && self.epsilon != 0.0 {
            return Err(cfg_err("epsilon", at("epsilon"), "theorem 3.2 takes epsilon = 0"));
        }
        if !(self.perturbation >= 0.0) {
            return Err(cfg_err("perturbation", at("perturbation"), "must be nonnegative"));
        }
        if self.trials == 0 {
            return Err(cfg_err("trials", at("trials"), "must be at least 1"));
        }
        if self.schedule.is_empty() {
            return Err(cfg_err("schedule", at("schedule"), "must list at least one level"));
        }
        self.ensemble.validate().map_err(|e| cfg_err("ensemble", None, e))?;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub index: usize,
    pub properties: PropertyReport,
    pub weak_rsp: bool,
    pub ran: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear-interpolation quantiles; `None` for an empty sample.
pub fn quantiles(values: &[f64]) -> Option<Quantiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some(Quantiles { min: v[0], q25: q(0.25), median: q(0.5), q75: q(0.75), max: v[v.len() - 1] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub matrices: usize,
    pub weak_rsp_frequency: f64,
    pub trials: usize,
    pub feasible_frequency: f64,
    pub exact_recovery_frequency: f64,
    pub distance: Option<Quantiles>,
    pub empirical_gamma: Option<Quantiles>,
}

impl Aggregate {
    /// Recomputes the row-level aggregates from the CSV reports, what the JSON carries.
    pub fn from_rows(reports: &[StabilityReport], matrices: usize, weak_rsp_hits: usize) -> Self {
        let frac = |c: usize, t: usize| if t == 0 { 0.0 } else { c as f64 / t as f64 };
        let distances: Vec<f64> = reports.iter().map(|r| r.measured_distance).collect();
        let gammas: Vec<f64> = reports.iter().filter_map(|r| r.empirical_gamma).collect();
        Self {
            matrices,
            weak_rsp_frequency: frac(weak_rsp_hits, matrices),
            trials: reports.len(),
            feasible_frequency: frac(reports.iter().filter(|r| r.feasible).count(), reports.len()),
            exact_recovery_frequency: frac(reports.iter().filter(|r| r.measured_distance <= 1e-6).count(), reports.len()),
            distance: quantiles(&distances),
            empirical_gamma: quantiles(&gammas),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub matrices: Vec<MatrixSummary>,
    pub reports: Vec<StabilityReport>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrittenFiles {
    pub json: PathBuf,
    pub csv: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Certifies each matrix, runs the stability trials on those that pass (or
/// all of them under `force`), and aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let mats = gen_matrix(&cfg.ensemble)?;
    let k = cfg.ensemble.k;
    let props = PropertySet::parse(&cfg.properties)?;
    let props = PropertySet { weak_rsp: true, ..props };
    let mut summaries = Vec::with_capacity(mats.len());
    let mut reports = Vec::new();
    for (index, a) in mats.iter().enumerate() {
        let pr = certify::certify_properties(a, k, props, cfg.rho, cfg.ensemble.seed)?;
        let weak = pr.weak_rsp.as_ref().is_some_and(|w| w.holds());
        let ran = weak || cfg.force;
        if ran {
            let sc = StabilityConfig {
                trials: cfg.trials,
                seed: cfg.ensemble.seed.wrapping_add(index as u64),
                perturbation: cfg.perturbation,
                epsilon: cfg.epsilon,
                magnitudes: cfg.magnitudes,
                force: true,
                l2: L2Options { schedule: cfg.schedule.clone(), ..L2Options::default() },
                ..StabilityConfig::new(cfg.theorem, k)
            };
            reports.extend(hoffman::stability_experiment(a, &sc, index)?);
        }
        summaries.push(MatrixSummary { index, properties: pr, weak_rsp: weak, ran });
    }
    let hits = summaries.iter().filter(|s| s.weak_rsp).count();
    let aggregate = Aggregate::from_rows(&reports, summaries.len(), hits);
    Ok(ExperimentResult { config: cfg.clone(), matrices: summaries, reports, aggregate })
}

/// `x,y` rows: the driving term (`σ_k` for theorem 3.2, `ε` otherwise) against the distance.
pub fn plot_csv(result: &ExperimentResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y"]).map_err(csv_err)?;
    for r in &result.reports {
        let x = if r.theorem == Theorem::Bp { r.sigma_k } else { r.epsilon };
        w.write_record([x.to_string(), r.measured_distance.to_string()]).map_err(csv_err)?;
    }
    finish_csv(w)
}

pub fn write_outputs(result: &ExperimentResult, out_dir: &Path) -> Result<WrittenFiles> {
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let name = &result.config.name;
    let write = |file: String, body: String| -> Result<PathBuf> {
        let p = out_dir.join(file);
        fs::write(&p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        Ok(p)
    };
    let json = serde_json::to_string_pretty(result).map_err(|e| Error::Io(e.to_string()))?;
    let files = WrittenFiles {
        json: write(format!("{name}.json"), json + "\n")?,
        csv: write(format!("{name}.csv"), reports_csv(&result.reports, true)?)?,
        plot: if result.config.plot { Some(write(format!("{name}_plot.csv"), plot_csv(result)?)?) } else { None },
    };
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_reproducible() {
        let spec = EnsembleSpec::gaussian(3, 8, 1, 2, 7);
        let a = gen_matrix(&spec).unwrap();
        let b = gen_matrix(&spec).unwrap();
        assert_eq!(a[0].a(), b[0].a());
        assert_ne!(a[0].a(), a[1].a());
        let other = gen_matrix(&EnsembleSpec { seed: 8, ..spec }).unwrap();
        assert!((a[0].a() - other[0].a()).amax() > 0.0);
    }

    #[test]
    fn bernoulli_values() {
        let spec = EnsembleSpec::bernoulli(4, 9, 1, 3, 1);
        let s = 0.5;
        for a in gen_matrix(&spec).unwrap() {
            assert!(a.a().iter().all(|&x| x == s || x == -s));
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(EnsembleSpec::gaussian(8, 8, 1, 1, 0).validate().is_err());
        assert!(EnsembleSpec::gaussian(3, 8, 0, 1, 0).validate().is_err());
        assert!(EnsembleSpec::gaussian(3, 8, 1, 0, 0).validate().is_err());
    }

    #[test]
    fn wilson_shrinks_with_trials() {
        let (a, b) = wilson_interval(5, 10);
        let (c, d) = wilson_interval(10, 20);
        assert!(d - c < b - a);
        assert!(a <= 0.5 && 0.5 <= b);
    }

    #[test]
    fn phase_extremes() {
        let curve = phase_experiment(6, 1, &[1, 5], 20, 3).unwrap();
        assert!(curve.points[0].frequency <= 0.2, "{:?}", curve.points[0]);
        assert!(curve.points[1].frequency >= 0.8, "{:?}", curve.points[1]);
    }

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::parse("# demo\nm = 3\nn = 7\nk = 1\ncount = 2\ntheorem = 4.2\nepsilon = 0.1\n", None).unwrap();
        assert_eq!(cfg.theorem, Theorem::Linf);
        assert_eq!(cfg.ensemble.n, 7);
        let err = ExperimentConfig::parse("m = 3\nn = 7\nnorm = l3\n", None).unwrap_err();
        assert!(matches!(&err, Error::Config { field, line: Some(3), .. } if field == "norm"), "{err}");
        assert!(err.is_usage());
        let err = ExperimentConfig::parse("theorem = 4.4\n", None).unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "epsilon"));
        let o = cfg.with_overrides(&["trials=3".into()]).unwrap();
        assert_eq!(o.trials, 3);
    }

    #[test]
    fn experiment_is_deterministic_and_aggregates_match_rows() {
        let cfg = ExperimentConfig { trials: 3, ensemble: EnsembleSpec::gaussian(4, 8, 1, 2, 5), ..ExperimentConfig::default() };
        let r1 = run_experiment(&cfg).unwrap();
        let r2 = run_experiment(&cfg).unwrap();
        assert_eq!(reports_csv(&r1.reports, true).unwrap(), reports_csv(&r2.reports, true).unwrap());
        assert_eq!(r1.aggregate.trials, r1.reports.len());
        assert!((0.0..=1.0).contains(&r1.aggregate.weak_rsp_frequency));
        let ran = r1.matrices.iter().filter(|m| m.ran).count();
        assert_eq!(r1.reports.len(), 3 * ran);
    }
}
