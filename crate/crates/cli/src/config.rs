//! Run configuration: protocol defaults, flat `key=value` config files
//! with `#` comments, flag overrides, and the target/start selector
//! strings.
//!
//! Precedence is defaults < config file < flags. File parsing is strict:
//! an unknown key is a usage error naming the offender, so typos never
//! silently fall back to a default.

use clap::Args;
use hillband::optim::Method;
use hillband::TrigPotential64;
use serde_json::json;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

/// What a run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Fixed-discretization descent.
    Naive,
    /// Descent with on-the-fly refinement of s and p.
    Adaptive,
    /// Comb dispersion sweep against the closed-form relation.
    Oracle,
    /// A posteriori certification of the target potential's bands.
    EstimatorValidate,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Naive => "naive",
            Mode::Adaptive => "adaptive",
            Mode::Oracle => "oracle",
            Mode::EstimatorValidate => "estimator-validate",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "naive" => Ok(Mode::Naive),
            "adaptive" => Ok(Mode::Adaptive),
            "oracle" => Ok(Mode::Oracle),
            "estimator-validate" => Ok(Mode::EstimatorValidate),
            other => Err(format!(
                "unknown mode {other:?} (expected naive, adaptive, oracle, or estimator-validate)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the target bands come from.
#[derive(Clone, Debug)]
pub enum TargetSpec {
    /// Seeded random potential of degree p_t (coefficients uniform on
    /// [−1, 1] from the pinned SplitMix64 stream).
    Random,
    /// Potential text file.
    File(PathBuf),
    /// Dirac comb with the given amplitude and shift.
    Comb { lambda: f64, shift: f64 },
    /// Coefficients given directly: `c0,c1,…` optionally `;d1,d2,…`.
    Inline(TrigPotential64),
}

impl TargetSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "random" {
            return Ok(TargetSpec::Random);
        }
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err("file: needs a path".into());
            }
            return Ok(TargetSpec::File(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("comb:") {
            let mut parts = rest.split(',');
            let lambda = parse_f64("comb lambda", parts.next().unwrap_or(""))?;
            let shift = match parts.next() {
                Some(v) => parse_f64("comb shift", v)?,
                None => 0.0,
            };
            if parts.next().is_some() {
                return Err("comb: takes at most lambda,shift".into());
            }
            return Ok(TargetSpec::Comb { lambda, shift });
        }
        if let Some(rest) = s.strip_prefix("inline:") {
            return Ok(TargetSpec::Inline(parse_inline(rest)?));
        }
        Err(format!(
            "unknown target {s:?} (expected random, file:PATH, comb:LAMBDA[,SHIFT], or inline:...)"
        ))
    }

    /// Canonical string form, re-parseable by [`parse`](Self::parse).
    pub fn render(&self) -> String {
        match self {
            TargetSpec::Random => "random".into(),
            TargetSpec::File(p) => format!("file:{}", p.display()),
            TargetSpec::Comb { lambda, shift } => format!("comb:{lambda},{shift}"),
            TargetSpec::Inline(pot) => format!("inline:{}", render_inline(pot)),
        }
    }
}

/// Where the initial iterate comes from.
#[derive(Clone, Debug)]
pub enum StartSpec {
    /// Seeded random potential in the starting coefficient space, drawn
    /// from seed+1 so it never coincides with a `random` target. This is
    /// the default: a constant start (including zero) is a stationary
    /// point of the misfit, with bitwise-zero derivatives toward every
    /// higher mode, and descent would never leave it.
    Seeded,
    /// The zero potential (stalls at the stationary plateau; see above).
    Zero,
    /// Copy the target potential (self-target diagnostics).
    Target,
    /// Potential text file.
    File(PathBuf),
    /// Coefficients given directly, like inline targets.
    Inline(TrigPotential64),
}

impl StartSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "seeded" => return Ok(StartSpec::Seeded),
            "zero" => return Ok(StartSpec::Zero),
            "target" => return Ok(StartSpec::Target),
            _ => {}
        }
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err("file: needs a path".into());
            }
            return Ok(StartSpec::File(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("inline:") {
            return Ok(StartSpec::Inline(parse_inline(rest)?));
        }
        Err(format!(
            "unknown w0 {s:?} (expected seeded, zero, target, file:PATH, or inline:...)"
        ))
    }

    pub fn render(&self) -> String {
        match self {
            StartSpec::Seeded => "seeded".into(),
            StartSpec::Zero => "zero".into(),
            StartSpec::Target => "target".into(),
            StartSpec::File(p) => format!("file:{}", p.display()),
            StartSpec::Inline(pot) => format!("inline:{}", render_inline(pot)),
        }
    }
}

fn parse_inline(rest: &str) -> Result<TrigPotential64, String> {
    let mut halves = rest.split(';');
    let c = parse_f64_list("inline cosine coefficients", halves.next().unwrap_or(""))?;
    let d = match halves.next() {
        Some(part) => parse_f64_list("inline sine coefficients", part)?,
        None => vec![0.0; c.len().saturating_sub(1)],
    };
    if halves.next().is_some() {
        return Err("inline: takes at most one `;`".into());
    }
    TrigPotential64::new(c, d).map_err(|e| e.to_string())
}

fn render_inline(pot: &TrigPotential64) -> String {
    let c: Vec<String> = pot.cos_coeffs().iter().map(|x| x.to_string()).collect();
    let d: Vec<String> = pot.sin_coeffs().iter().map(|x| x.to_string()).collect();
    if d.is_empty() {
        c.join(",")
    } else {
        format!("{};{}", c.join(","), d.join(","))
    }
}

fn parse_f64(what: &str, v: &str) -> Result<f64, String> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("{what}: bad float {v:?}"))?;
    if !x.is_finite() {
        return Err(format!("{what}: must be finite"));
    }
    Ok(x)
}

fn parse_f64_list(what: &str, v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|f| parse_f64(what, f)).collect()
}

/// Command-line overrides; every field mirrors a config-file key of the
/// same name and wins over it.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// Flat key=value config file (# comments allowed).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// naive | adaptive | oracle | estimator-validate.
    #[arg(long)]
    pub mode: Option<String>,
    /// sd | pr | bfgs.
    #[arg(long)]
    pub method: Option<String>,
    /// Bands fitted per grid node.
    #[arg(long = "M")]
    pub m_bands: Option<usize>,
    /// Nodes in the quasi-momentum grid.
    #[arg(long = "Q")]
    pub q_count: Option<usize>,
    /// Mode cutoff of fixed-discretization runs.
    #[arg(long)]
    pub s: Option<usize>,
    /// Coefficient-space degree of fixed-discretization runs.
    #[arg(long)]
    pub p: Option<usize>,
    /// Starting cutoff of adaptive runs.
    #[arg(long)]
    pub s0: Option<usize>,
    /// Starting degree of adaptive runs.
    #[arg(long)]
    pub p0: Option<usize>,
    /// Cutoff at which target bands are sampled.
    #[arg(long = "s_t")]
    pub s_t: Option<usize>,
    /// Degree of `random` targets.
    #[arg(long = "p_t")]
    pub p_t: Option<usize>,
    /// Gradient-norm stopping tolerance.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Refinement threshold for both estimators.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Shift fraction of the a posteriori bound.
    #[arg(long)]
    pub theta: Option<f64>,
    /// A priori lower bound on the first band (defaults to the reference
    /// fiber's trace bound).
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    /// Reference cutoff of the a posteriori bound.
    #[arg(long = "s_ref")]
    pub s_ref: Option<usize>,
    /// Seed for `random` targets and the seeded start.
    #[arg(long)]
    pub seed: Option<u64>,
    /// random | file:PATH | comb:LAMBDA[,SHIFT] | inline:c0,c1,..[;d1,..].
    #[arg(long)]
    pub target: Option<String>,
    /// seeded | zero | target | file:PATH | inline:... .
    #[arg(long)]
    pub w0: Option<String>,
    /// Directory the artifacts are written to.
    #[arg(long = "out_dir")]
    pub out_dir: Option<PathBuf>,
    /// Threads for the inner q-parallelism (1 = fully sequential).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Comma-separated comb amplitudes for oracle sweeps.
    #[arg(long)]
    pub lambdas: Option<String>,
}

/// Fully resolved run description.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    pub method: Method,
    pub m_bands: usize,
    pub q_count: usize,
    pub s: usize,
    pub p: usize,
    pub s0: usize,
    pub p0: usize,
    pub s_t: usize,
    pub p_t: usize,
    pub nu: f64,
    pub eta: f64,
    pub theta: f64,
    pub kappa: Option<f64>,
    pub s_ref: usize,
    pub seed: u64,
    pub target: TargetSpec,
    pub w0: StartSpec,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub lambdas: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Naive,
            method: Method::Bfgs,
            m_bands: 3,
            q_count: 25,
            s: 20,
            p: 1,
            s0: 1,
            p0: 1,
            s_t: 20,
            p_t: 1,
            nu: 1e-5,
            eta: 1e-6,
            theta: 0.01,
            kappa: None,
            s_ref: 60,
            seed: 42,
            target: TargetSpec::Random,
            w0: StartSpec::Seeded,
            out_dir: PathBuf::from("out"),
            threads: 1,
            lambdas: vec![1.0, 10.0, 100.0, 1000.0],
        }
    }
}

impl RunConfig {
    /// Defaults, then the config file (if any), then the flags. A
    /// subcommand that implies a mode passes it as `forced_mode`; it wins
    /// over both and participates in validation.
    pub fn resolve(ov: &Overrides, forced_mode: Option<Mode>) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &ov.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("config {}: {e}", path.display()))?;
            cfg.apply_file(&text)?;
        }
        cfg.apply_flags(ov)?;
        if let Some(mode) = forced_mode {
            cfg.mode = mode;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| format!("config line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "mode" => self.mode = value.parse()?,
            "method" => self.method = value.parse().map_err(|e| format!("{e}"))?,
            "M" => self.m_bands = parse_usize(key, value)?,
            "Q" => self.q_count = parse_usize(key, value)?,
            "s" => self.s = parse_usize(key, value)?,
            "p" => self.p = parse_usize(key, value)?,
            "s0" => self.s0 = parse_usize(key, value)?,
            "p0" => self.p0 = parse_usize(key, value)?,
            "s_t" => self.s_t = parse_usize(key, value)?,
            "p_t" => self.p_t = parse_usize(key, value)?,
            "nu" => self.nu = parse_f64(key, value)?,
            "eta" => self.eta = parse_f64(key, value)?,
            "theta" => self.theta = parse_f64(key, value)?,
            "kappa" => self.kappa = Some(parse_f64(key, value)?),
            "s_ref" => self.s_ref = parse_usize(key, value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| format!("seed: bad integer {value:?}"))?
            }
            "target" => self.target = TargetSpec::parse(value)?,
            "w0" => self.w0 = StartSpec::parse(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "threads" => self.threads = parse_usize(key, value)?,
            "lambdas" => self.lambdas = parse_f64_list(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    fn apply_flags(&mut self, ov: &Overrides) -> Result<(), String> {
        if let Some(v) = &ov.mode {
            self.mode = v.parse()?;
        }
        if let Some(v) = &ov.method {
            self.method = v.parse().map_err(|e| format!("{e}"))?;
        }
        if let Some(v) = ov.m_bands {
            self.m_bands = v;
        }
        if let Some(v) = ov.q_count {
            self.q_count = v;
        }
        if let Some(v) = ov.s {
            self.s = v;
        }
        if let Some(v) = ov.p {
            self.p = v;
        }
        if let Some(v) = ov.s0 {
            self.s0 = v;
        }
        if let Some(v) = ov.p0 {
            self.p0 = v;
        }
        if let Some(v) = ov.s_t {
            self.s_t = v;
        }
        if let Some(v) = ov.p_t {
            self.p_t = v;
        }
        if let Some(v) = ov.nu {
            self.nu = v;
        }
        if let Some(v) = ov.eta {
            self.eta = v;
        }
        if let Some(v) = ov.theta {
            self.theta = v;
        }
        if let Some(v) = ov.kappa {
            self.kappa = Some(v);
        }
        if let Some(v) = ov.s_ref {
            self.s_ref = v;
        }
        if let Some(v) = ov.seed {
            self.seed = v;
        }
        if let Some(v) = &ov.target {
            self.target = TargetSpec::parse(v)?;
        }
        if let Some(v) = &ov.w0 {
            self.w0 = StartSpec::parse(v)?;
        }
        if let Some(v) = &ov.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = ov.threads {
            self.threads = v;
        }
        if let Some(v) = &ov.lambdas {
            self.lambdas = parse_f64_list("lambdas", v)?;
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), String> {
        let positive = [
            ("M", self.m_bands),
            ("Q", self.q_count),
            ("s", self.s),
            ("p", self.p),
            ("s0", self.s0),
            ("p0", self.p0),
            ("s_t", self.s_t),
            ("p_t", self.p_t),
            ("threads", self.threads),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(format!("{name} must be ≥ 1"));
            }
        }
        if !(self.nu > 0.0) {
            return Err("nu must be positive".into());
        }
        if !(self.eta > 0.0) {
            return Err("eta must be positive".into());
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err("theta must lie in (0, 1]".into());
        }
        if let Some(k) = self.kappa {
            if !k.is_finite() {
                return Err("kappa must be finite".into());
            }
        }
        let s_used = match self.mode {
            Mode::Adaptive => self.s0,
            _ => self.s,
        };
        if matches!(self.mode, Mode::Adaptive | Mode::EstimatorValidate) && self.s_ref <= s_used {
            return Err(format!(
                "s_ref = {} must exceed the working cutoff {s_used}",
                self.s_ref
            ));
        }
        if self.lambdas.is_empty() {
            return Err("lambdas must name at least one amplitude".into());
        }
        Ok(())
    }

    /// All fields in config-file form, embedded in every summary so the
    /// run can be reproduced from the summary alone.
    pub fn echo(&self) -> serde_json::Value {
        json!({
            "mode": self.mode.name(),
            "method": self.method.name(),
            "M": self.m_bands,
            "Q": self.q_count,
            "s": self.s,
            "p": self.p,
            "s0": self.s0,
            "p0": self.p0,
            "s_t": self.s_t,
            "p_t": self.p_t,
            "nu": self.nu,
            "eta": self.eta,
            "theta": self.theta,
            "kappa": self.kappa,
            "s_ref": self.s_ref,
            "seed": self.seed,
            "target": self.target.render(),
            "w0": self.w0.render(),
            "out_dir": self.out_dir.display().to_string(),
            "threads": self.threads,
            "lambdas": self.lambdas,
        })
    }
}

fn parse_usize(what: &str, v: &str) -> Result<usize, String> {
    v.parse().map_err(|_| format!("{what}: bad integer {v:?}"))
}
