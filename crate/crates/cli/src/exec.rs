//! Mode execution and artifact emission.
//!
//! Every run writes its artifacts under `out_dir`:
//! - descent runs: `potential_target.txt` (when the target is a coefficient
//!   potential), `bands_target.csv`, `potential_final.txt`,
//!   `bands_final.csv`, `convergence.csv`, `summary.json`;
//! - oracle sweeps: `dispersion.csv`, `summary.json`;
//! - estimator validation: `deltas.csv`, `summary.json`.
//!
//! `summary.json` embeds the fully resolved configuration, so a summary
//! alone suffices to re-run bitwise-identically in single-threaded mode.

use crate::config::{Mode, RunConfig, StartSpec, TargetSpec};
use hillband::adaptive::{run_adaptive, AdaptiveConfig, DEFAULT_MAX_OUTER_PASSES};
use hillband::bloch::{band_sweep, QGrid};
use hillband::estimator::{default_kappa, delta_report, ApostConfig, DeltaReport};
use hillband::fourier::{MeasurePotential, PotentialCoeffs};
use hillband::objective::TargetBands;
use hillband::optim::{run_naive, NaiveConfig, RunRecord, DEFAULT_MAX_ITERS};
use hillband::oracle::{comb_first_band_flatness, dirac_dispersion_q0};
use hillband::rng::seeded_potential;
use hillband::TrigPotential64;
use serde_json::json;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// CLI failure, split by exit code: configuration problems exit with 2,
/// numerical or I/O failures with 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(hillband::Error),
}

impl From<hillband::Error> for CliError {
    fn from(e: hillband::Error) -> Self {
        CliError::Run(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
    {
        log::debug!("thread pool already configured: {e}");
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(hillband::Error::from)?;
    match cfg.mode {
        Mode::Naive | Mode::Adaptive => run_descent(cfg),
        Mode::Oracle => run_oracle(cfg),
        Mode::EstimatorValidate => run_validate(cfg),
    }
}

/// The target as actual objects: band samples plus the coefficient
/// potential behind them, when there is one.
fn resolve_target(
    cfg: &RunConfig,
    grid: &QGrid<f64>,
) -> Result<(TargetBands<f64>, Option<TrigPotential64>), CliError> {
    let trig = match &cfg.target {
        TargetSpec::Random => Some(seeded_potential(cfg.p_t, cfg.seed)),
        TargetSpec::File(path) => Some(TrigPotential64::load(path)?),
        TargetSpec::Inline(pot) => Some(pot.clone()),
        TargetSpec::Comb { .. } => None,
    };
    let bands = match (&cfg.target, &trig) {
        (TargetSpec::Comb { lambda, shift }, _) => {
            let comb = MeasurePotential::new(*lambda, *shift)?;
            TargetBands::from_potential(&comb, grid, cfg.m_bands, cfg.s_t)?
        }
        (_, Some(pot)) => TargetBands::from_potential(pot, grid, cfg.m_bands, cfg.s_t)?,
        _ => unreachable!("non-comb targets always carry a potential"),
    };
    Ok((bands, trig))
}

fn resolve_start(
    cfg: &RunConfig,
    target: &Option<TrigPotential64>,
) -> Result<TrigPotential64, CliError> {
    let p_start = match cfg.mode {
        Mode::Adaptive => cfg.p0,
        _ => cfg.p,
    };
    Ok(match &cfg.w0 {
        StartSpec::Seeded => seeded_potential(p_start, cfg.seed.wrapping_add(1)),
        StartSpec::Zero => TrigPotential64::zero(p_start),
        StartSpec::Target => target.clone().ok_or_else(|| {
            CliError::Config("w0=target requires a coefficient-potential target".into())
        })?,
        StartSpec::File(path) => TrigPotential64::load(path)?,
        StartSpec::Inline(pot) => pot.clone(),
    })
}

fn run_descent(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = QGrid::uniform(cfg.q_count)?;
    let (targets, target_pot) = resolve_target(cfg, &grid)?;
    let w0 = resolve_start(cfg, &target_pot)?;

    let mut kappa_effective = None;
    let rec: RunRecord<f64> = match cfg.mode {
        Mode::Naive => run_naive(
            &w0,
            &targets,
            &NaiveConfig {
                method: cfg.method,
                s: cfg.s,
                p: cfg.p,
                nu: cfg.nu,
                max_iters: DEFAULT_MAX_ITERS,
            },
        )?,
        Mode::Adaptive => {
            let kappa = match cfg.kappa {
                Some(k) => k,
                None => default_kappa(&w0, cfg.s_ref)?,
            };
            kappa_effective = Some(kappa);
            run_adaptive(
                &w0,
                &targets,
                &AdaptiveConfig {
                    s0: cfg.s0,
                    p0: cfg.p0,
                    eta: cfg.eta,
                    nu: cfg.nu,
                    apost: ApostConfig {
                        s_ref: cfg.s_ref,
                        theta: cfg.theta,
                        kappa,
                    },
                    method: cfg.method,
                    max_inner_iters: DEFAULT_MAX_ITERS,
                    max_outer_passes: DEFAULT_MAX_OUTER_PASSES,
                },
            )?
        }
        _ => unreachable!("run_descent only handles descent modes"),
    };

    let last = rec.rows.last().expect("runs record at least one row");
    let (s_final, p_final) = (last.s, last.p);

    if let Some(pot) = &target_pot {
        pot.save(cfg.out_dir.join("potential_target.txt"))?;
    }
    write_artifact(cfg, "bands_target.csv", |w| targets.write_csv(w))?;
    rec.final_potential
        .save(cfg.out_dir.join("potential_final.txt"))?;
    let final_sheet = band_sweep(&rec.final_potential, &grid, cfg.m_bands, s_final)?;
    write_artifact(cfg, "bands_final.csv", |w| final_sheet.write_csv(w))?;
    write_artifact(cfg, "convergence.csv", |w| rec.write_csv(w))?;

    let summary = json!({
        "mode": cfg.mode.name(),
        "J": rec.final_cost(),
        "gnorm": rec.final_gnorm(),
        "N": rec.iterations(),
        "s_N": s_final,
        "p_N": p_final,
        "elapsed_s": last.elapsed_s,
        "termination": rec.termination.to_string(),
        "kappa_effective": kappa_effective,
        "config": cfg.echo(),
    });
    write_summary(cfg, &summary)?;
    println!(
        "{}: J={:e} gnorm={:e} N={} s_N={} p_N={} termination={}",
        cfg.mode.name(),
        rec.final_cost(),
        rec.final_gnorm(),
        rec.iterations(),
        s_final,
        p_final,
        rec.termination
    );
    Ok(())
}

fn run_oracle(cfg: &RunConfig) -> Result<(), CliError> {
    let t0 = Instant::now();
    let grid = QGrid::uniform(cfg.q_count)?;
    let mut rows = Vec::new();
    for &lambda in &cfg.lambdas {
        let root = dirac_dispersion_q0(lambda, (1e-8, 0.5))?;
        let flatness = comb_first_band_flatness(lambda, &grid, cfg.s)?;
        println!(
            "lambda={lambda:e}: omega={:.17e} eps={:.17e} residual={:.3e} flatness={:.3e}",
            root.omega, root.eps, root.residual, flatness
        );
        rows.push((lambda, root, flatness));
    }
    write_artifact(cfg, "dispersion.csv", |w| {
        writeln!(w, "lambda,omega,eps,residual,flatness")?;
        for (lambda, root, flatness) in &rows {
            writeln!(
                w,
                "{lambda},{:.16e},{:.16e},{:.16e},{:.16e}",
                root.omega, root.eps, root.residual, flatness
            )?;
        }
        Ok(())
    })?;
    let summary = json!({
        "mode": cfg.mode.name(),
        "elapsed_s": t0.elapsed().as_secs_f64(),
        "config": cfg.echo(),
    });
    write_summary(cfg, &summary)
}

fn run_validate(cfg: &RunConfig) -> Result<(), CliError> {
    let t0 = Instant::now();
    let grid = QGrid::uniform(cfg.q_count)?;
    let apost = |kappa| ApostConfig {
        s_ref: cfg.s_ref,
        theta: cfg.theta,
        kappa,
    };
    let (report, kappa_effective): (DeltaReport<f64>, f64) = match &cfg.target {
        TargetSpec::Comb { lambda, shift } => {
            let comb = MeasurePotential::new(*lambda, *shift)?;
            let kappa = resolve_kappa(cfg, &comb)?;
            (
                delta_report(&comb, &grid, cfg.m_bands, cfg.s, &apost(kappa))?,
                kappa,
            )
        }
        _ => {
            let pot = match &cfg.target {
                TargetSpec::Random => seeded_potential(cfg.p_t, cfg.seed),
                TargetSpec::File(path) => TrigPotential64::load(path)?,
                TargetSpec::Inline(pot) => pot.clone(),
                TargetSpec::Comb { .. } => unreachable!(),
            };
            let kappa = resolve_kappa(cfg, &pot)?;
            (
                delta_report(&pot, &grid, cfg.m_bands, cfg.s, &apost(kappa))?,
                kappa,
            )
        }
    };

    write_artifact(cfg, "deltas.csv", |w| report.write_csv(w))?;
    let mut certified = 0usize;
    let mut min_margin = f64::INFINITY;
    for row in report.rows() {
        let margin = row.delta - (row.eps_s - row.eps_ref);
        if margin >= 0.0 {
            certified += 1;
        }
        min_margin = min_margin.min(margin);
    }
    let summary = json!({
        "mode": cfg.mode.name(),
        "rows": report.rows().len(),
        "rows_certified": certified,
        "min_margin": min_margin,
        "kappa_effective": kappa_effective,
        "elapsed_s": t0.elapsed().as_secs_f64(),
        "config": cfg.echo(),
    });
    write_summary(cfg, &summary)?;
    println!(
        "estimator-validate: rows={} certified={certified} min_margin={min_margin:e}",
        report.rows().len()
    );
    Ok(())
}

fn resolve_kappa<P: PotentialCoeffs<f64>>(cfg: &RunConfig, pot: &P) -> Result<f64, CliError> {
    Ok(match cfg.kappa {
        Some(k) => k,
        None => default_kappa(pot, cfg.s_ref)?,
    })
}

/// τ (relative CPU time) between two run summaries: elapsed(a)/elapsed(b).
pub fn compare(a: &Path, b: &Path) -> Result<(), CliError> {
    let read = |path: &Path| -> Result<serde_json::Value, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("summary {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("summary {}: {e}", path.display())))
    };
    let field = |v: &serde_json::Value, name: &str, path: &Path| -> Result<f64, CliError> {
        v.get(name).and_then(|x| x.as_f64()).ok_or_else(|| {
            CliError::Config(format!("summary {}: missing field {name}", path.display()))
        })
    };
    let (va, vb) = (read(a)?, read(b)?);
    let (ea, eb) = (field(&va, "elapsed_s", a)?, field(&vb, "elapsed_s", b)?);
    for (label, v, path) in [("a", &va, a), ("b", &vb, b)] {
        println!(
            "{label} = {}: J={} N={} elapsed_s={}",
            path.display(),
            v.get("J").unwrap_or(&serde_json::Value::Null),
            v.get("N").unwrap_or(&serde_json::Value::Null),
            v.get("elapsed_s").unwrap_or(&serde_json::Value::Null),
        );
    }
    println!("tau = {}", ea / eb);
    Ok(())
}

fn write_artifact<F>(cfg: &RunConfig, name: &str, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> hillband::Result<()>,
{
    let path: PathBuf = cfg.out_dir.join(name);
    let mut w = BufWriter::new(File::create(&path).map_err(hillband::Error::from)?);
    body(&mut w)?;
    w.flush().map_err(hillband::Error::from)?;
    Ok(())
}

fn write_summary(cfg: &RunConfig, summary: &serde_json::Value) -> Result<(), CliError> {
    let path = cfg.out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| CliError::Config(format!("summary serialization: {e}")))?;
    std::fs::write(&path, text + "\n").map_err(hillband::Error::from)?;
    Ok(())
}
