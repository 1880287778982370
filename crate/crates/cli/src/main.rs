use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use l1stab::certify::{self, PropertySet};
use l1stab::geometry;
use l1stab::harness::{self, ExperimentConfig};
use l1stab::hoffman::{self, StabilityConfig, Theorem};
use l1stab::io;
use l1stab::linops::DesignMatrix;
use l1stab::solvers::{self, L2Options, MeasurementModel, NormKind};
use l1stab::{Error, Result};

#[derive(Parser)]
#[command(name = "l1stab", version, about = "Certify sparse-recovery properties, solve l1 problems and measure their stability")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory that relative --json/--csv paths (and `run` outputs) go to.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Write the full result as JSON (`-` for stdout).
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Write flat rows as CSV (`-` for stdout).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check weak RSP, RSP, NSP and related properties of a matrix.
    Certify {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        k: usize,
        /// Comma list of weak-rsp, rsp, nsp, rip, mu1, robust.
        #[arg(long, default_value = "weak-rsp,rsp,nsp,mu1")]
        properties: String,
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
    },
    /// Solve one of the four l1 recovery problems.
    Solve {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// eq, inf, one or two.
        #[arg(long, default_value = "eq")]
        norm: String,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Normal counts of the polytope ladder for `two`.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<usize>>,
    },
    /// Build a polytope approximating the unit ball and report its Hausdorff distance.
    Polytope {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        /// Add the ±e_i normals.
        #[arg(long)]
        augment: bool,
    },
    /// Measure solution-set distances against a stability bound.
    Bound {
        #[arg(long)]
        theorem: String,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0.0)]
        perturbation: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Run even if the matrix lacks the weak RSP.
        #[arg(long)]
        force: bool,
    },
    /// Weak-RSP frequency of Gaussian matrices as the number of rows grows.
    Phase {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Row counts, e.g. `1,2,3` or `1..5`.
        #[arg(long)]
        m: String,
        #[arg(long, default_value_t = 20)]
        per_point: usize,
    },
    /// Run a key=value experiment config.
    Run {
        config: PathBuf,
        /// Extra `key=value` overrides.
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
}

fn resolve(common: &Common, p: &Path) -> PathBuf {
    match &common.out_dir {
        Some(d) if p.is_relative() && p != Path::new("-") => d.join(p),
        _ => p.to_path_buf(),
    }
}

fn emit(common: &Common, target: &Option<PathBuf>, body: &str) -> Result<()> {
    let Some(p) = target else { return Ok(()) };
    if p == Path::new("-") {
        print!("{body}");
        return Ok(());
    }
    let p = resolve(common, p);
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&p, body)?;
    Ok(())
}

fn emit_json(common: &Common, value: &serde_json::Value) -> Result<()> {
    let body = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    emit(common, &common.json, &(body + "\n"))
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))
}

fn load(path: &Path) -> Result<DesignMatrix> {
    DesignMatrix::new(io::read_matrix(path)?)
}

fn parse_ms(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidInput(format!("cannot parse row counts `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let seed = c.seed.unwrap_or(0);
    match cli.cmd {
        Cmd::Certify { matrix, k, properties, rho } => {
            let a = load(&matrix)?;
            let props = PropertySet::parse(&properties)?;
            let report = certify::certify_properties(&a, k, props, rho, seed)?;
            let chain = report.chain_violations();
            println!("matrix {}x{}, k = {k}", a.rows(), a.cols());
            if let Some(w) = &report.weak_rsp {
                println!("weak RSP: {}", if w.holds() { "holds".to_string() } else { format!("violated ({w:?})") });
            }
            if let Some(r) = &report.rsp {
                println!("RSP: {}", if r.holds() { "holds" } else { "violated" });
            }
            if let Some(n) = &report.nsp {
                println!("NSP: {} (rho = {})", if n.holds() { "holds" } else { "violated" }, n.rho().value());
            }
            if !chain.is_empty() {
                println!("implication chain violated: {}", chain.join(", "));
            }
            emit_json(c, &json!({ "k": k, "report": to_json(&report)?, "chain_violations": chain }))?;
        }
        Cmd::Solve { matrix, y, norm, eps, schedule } => {
            let a = load(&matrix)?;
            let y = io::read_vector(&y)?;
            let kind: NormKind = norm.parse()?;
            let model = MeasurementModel::new(y.iter().copied().collect(), eps, kind)?;
            let l2 = L2Options { schedule: schedule.unwrap_or_else(|| L2Options::default().schedule), seed: c.seed.unwrap_or(L2Options::default().seed), ..L2Options::default() };
            let sol = solvers::solve(&a, &model, &l2)?;
            println!("{kind}: value {:.12}, duality gap {:.3e}, KKT residual {:.3e}", sol.value, sol.duality_gap(), sol.kkt_residual_linf);
            println!("x* = {}", io::format_vector(sol.x_star.as_slice()).trim_end().replace('\n', " "));
            let mut out = json!({
                "kind": kind,
                "x_star": sol.x_star.as_slice(),
                "value": sol.value,
                "dual_value": sol.dual_value,
                "kkt_residual_linf": sol.kkt_residual_linf,
            });
            if let Some(r) = &sol.relaxation {
                println!("relaxation interval [{:.12}, {:.12}], converged {}", r.interval.0, r.interval.1, r.converged);
                out["ladder"] = to_json(&r.ladder)?;
                out["interval"] = json!([r.interval.0, r.interval.1]);
                out["converged"] = json!(r.converged);
            }
            emit_json(c, &out)?;
        }
        Cmd::Polytope { m, k, augment } => {
            let mut p = geometry::dudley_polytope(m, k, seed)?;
            if augment {
                p = geometry::augment_with_axes(&p);
            }
            let h = geometry::hausdorff_to_ball(&p)?;
            println!("{} normals in R^{m}, Hausdorff distance to the ball {:.12e} ({})", p.len(), h.value, if h.exact { "exact" } else { "estimate" });
            emit_json(c, &json!({ "polytope": to_json(&p)?, "hausdorff": h.value, "exact": h.exact }))?;
            let mut rows = String::from("normal,".to_string() + &(0..m).map(|i| format!("a{i}")).collect::<Vec<_>>().join(",") + "\n");
            for (i, a) in p.normals.iter().enumerate() {
                rows += &format!("{i},{}\n", a.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
            }
            emit(c, &c.csv, &rows)?;
        }
        Cmd::Bound { theorem, matrix, k, trials, perturbation, epsilon, force } => {
            let theorem: Theorem = theorem.parse()?;
            let a = load(&matrix)?;
            let mut cfg = StabilityConfig { trials, seed, perturbation, force, ..StabilityConfig::new(theorem, k) };
            if let Some(e) = epsilon {
                cfg.epsilon = e;
            }
            let reports = hoffman::stability_experiment(&a, &cfg, 0)?;
            let gmax = reports.iter().filter_map(|r| r.empirical_gamma).reduce(f64::max);
            let dmax = reports.iter().map(|r| r.measured_distance).fold(0.0, f64::max);
            println!("theorem {theorem}: {trials} trials, max distance {dmax:.3e}, max empirical gamma {}", gmax.map_or("n/a".into(), |g| format!("{g:.4}")));
            emit(c, &c.csv, &harness::reports_csv(&reports, false)?)?;
            emit_json(c, &to_json(&reports)?)?;
        }
        Cmd::Phase { n, k, m, per_point } => {
            let curve = harness::phase_experiment(n, k, &parse_ms(&m)?, per_point, seed)?;
            for p in &curve.points {
                println!("m = {:>3}  frequency {:.3}  [{:.3}, {:.3}]", p.m, p.frequency, p.wilson_low, p.wilson_high);
            }
            emit(c, &c.csv, &harness::phase_csv(&curve)?)?;
            emit_json(c, &to_json(&curve)?)?;
        }
        Cmd::Run { config, overrides } => {
            let text = fs::read_to_string(&config).map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
            let mut cfg = ExperimentConfig::parse(&text, config.parent())?;
            let mut all = overrides;
            if let Some(s) = c.seed {
                all.push(format!("seed={s}"));
            }
            if !all.is_empty() {
                cfg = cfg.with_overrides(&all)?;
            }
            let result = harness::run_experiment(&cfg)?;
            let dir = c.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let files = harness::write_outputs(&result, &dir)?;
            println!(
                "{} matrices, {} trials, weak RSP frequency {:.3}; wrote {} and {}",
                result.aggregate.matrices,
                result.aggregate.trials,
                result.aggregate.weak_rsp_frequency,
                files.json.display(),
                files.csv.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
