//! Descent methods for the band misfit: steepest descent, Polak–Ribière,
//! and BFGS, sharing one strong-Wolfe line search, plus the
//! fixed-discretization driver.
//!
//! The optimizer works on the stacked coefficient vector
//! (d_p, …, d_1, c_0, c_1, …, c_p) and only needs a value-and-gradient
//! closure, so the same core drives both the fixed and the adaptive
//! experiments.

use nalgebra::{DMatrix, DVector};
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::fourier::TrigPotential;
use crate::objective::{cost_and_gradient, potential_to_vec, vec_to_potential, TargetBands};
use crate::{fl, fmt17, Error, Result, Scalar};

/// Descent direction recipe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Sd,
    Pr,
    Bfgs,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sd => "sd",
            Method::Pr => "pr",
            Method::Bfgs => "bfgs",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sd" => Ok(Method::Sd),
            "pr" => Ok(Method::Pr),
            "bfgs" => Ok(Method::Bfgs),
            other => Err(Error::InvalidArg(format!(
                "unknown method {other:?} (expected sd, pr, or bfgs)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Gradient norm reached the requested tolerance (and, for the adaptive
    /// driver, both estimators cleared their thresholds).
    Converged,
    /// Inner iteration budget exhausted.
    IterationBudget,
    /// Line search failed even along the steepest-descent fallback.
    LineSearchFailure,
    /// Adaptive outer-pass budget exhausted.
    OuterBudget,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::IterationBudget => "iteration_budget",
            Termination::LineSearchFailure => "line_search_failure",
            Termination::OuterBudget => "outer_budget",
        })
    }
}

/// One accepted iterate in a run.
#[derive(Clone, Debug)]
pub struct IterRow<T: Scalar> {
    pub iter: usize,
    pub j: T,
    pub gnorm: T,
    pub s: usize,
    pub p: usize,
    pub elapsed_s: f64,
    /// Refinement annotation (adaptive runs only).
    pub event: Option<String>,
}

/// Full history of an optimization run plus the final iterate.
#[derive(Clone, Debug)]
pub struct RunRecord<T: Scalar> {
    pub rows: Vec<IterRow<T>>,
    pub final_potential: TrigPotential<T>,
    pub termination: Termination,
    /// Whether the CSV carries the `event` column (adaptive runs).
    pub with_events: bool,
}

impl<T: Scalar> RunRecord<T> {
    pub fn final_cost(&self) -> T {
        self.rows.last().expect("runs record at least one row").j
    }

    pub fn final_gnorm(&self) -> T {
        self.rows.last().expect("runs record at least one row").gnorm
    }

    /// Number of accepted descent steps (excludes the initial row and
    /// refinement re-evaluations).
    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }

    /// Writes `iter,J,gnorm,s,p,elapsed_s` rows, plus an `event` column when
    /// the run refines its discretization.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        if self.with_events {
            writeln!(w, "iter,J,gnorm,s,p,elapsed_s,event")?;
        } else {
            writeln!(w, "iter,J,gnorm,s,p,elapsed_s")?;
        }
        for r in &self.rows {
            write!(
                w,
                "{},{},{},{},{},{:.3}",
                r.iter,
                fmt17(r.j),
                fmt17(r.gnorm),
                r.s,
                r.p,
                r.elapsed_s
            )?;
            if self.with_events {
                write!(w, ",{}", r.event.as_deref().unwrap_or(""))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Strong-Wolfe constants and evaluation budget.
#[derive(Clone, Copy, Debug)]
pub struct WolfeParams<T: Scalar> {
    pub c1: T,
    pub c2: T,
    pub max_evals: usize,
}

impl<T: Scalar> WolfeParams<T> {
    /// c1 = 1e−4 for all methods; c2 = 0.9 except 0.4 for Polak–Ribière,
    /// whose conjugacy needs a tighter curvature condition.
    pub fn for_method(method: Method) -> Self {
        Self {
            c1: fl(1e-4),
            c2: fl(if method == Method::Pr { 0.4 } else { 0.9 }),
            max_evals: 40,
        }
    }
}

pub(crate) struct LineSearchHit<T: Scalar> {
    pub t: T,
    pub x: DVector<T>,
    pub j: T,
    pub g: DVector<T>,
}

struct ProbePoint<T: Scalar> {
    t: T,
    f: T,
    slope: T,
}

/// Strong-Wolfe line search (bracket then zoom with cubic interpolation).
/// `slope0 = ⟨g0, dir⟩` must be negative.
pub(crate) fn wolfe_search<T, F>(
    eval: &mut F,
    x0: &DVector<T>,
    dir: &DVector<T>,
    j0: T,
    slope0: T,
    t0: T,
    params: &WolfeParams<T>,
) -> Result<LineSearchHit<T>>
where
    T: Scalar,
    F: FnMut(&DVector<T>) -> Result<(T, DVector<T>)>,
{
    if !(slope0 < T::zero()) {
        return Err(Error::LineSearch {
            evals: 0,
            slope: slope0.to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut evals = 0usize;
    let fail = |evals: usize| Error::LineSearch {
        evals,
        slope: slope0.to_f64().unwrap_or(f64::NAN),
    };
    let mut probe = |t: T, evals: &mut usize| -> Result<(T, DVector<T>, T)> {
        *evals += 1;
        let x = x0 + dir * t;
        let (f, g) = eval(&x)?;
        if !f.is_finite() {
            return Err(Error::NonFinite {
                context: "cost during line search",
            });
        }
        let slope = g.dot(dir);
        Ok((f, g, slope))
    };
    let armijo = |t: T, f: T| f <= j0 + params.c1 * t * slope0;
    let curvature = |slope: T| slope.abs() <= -params.c2 * slope0;
    // Near a minimizer the sufficient-decrease test loses meaning once value
    // differences drop below rounding error; fall back to derivative-only
    // acceptance (Hager–Zhang approximate Wolfe), insisting the value not
    // increase so accepted steps stay monotone.
    let accept = move |t: T, f: T, slope: T| {
        (armijo(t, f) && curvature(slope))
            || (f <= j0
                && slope >= params.c2 * slope0
                && slope <= (fl::<T>(2.0) * params.c1 - T::one()) * slope0)
    };

    // Bracketing phase: expand until the minimum is straddled.
    let mut prev = ProbePoint {
        t: T::zero(),
        f: j0,
        slope: slope0,
    };
    let mut t = t0.max(fl(1e-12));
    let mut bracket: Option<(ProbePoint<T>, ProbePoint<T>)> = None;
    while evals < params.max_evals {
        let (f, g, slope) = probe(t, &mut evals)?;
        if accept(t, f, slope) {
            return Ok(LineSearchHit {
                t,
                x: x0 + dir * t,
                j: f,
                g,
            });
        }
        if !armijo(t, f) || (evals > 1 && f >= prev.f) {
            bracket = Some((prev, ProbePoint { t, f, slope }));
            break;
        }
        if slope >= T::zero() {
            bracket = Some((ProbePoint { t, f, slope }, prev));
            break;
        }
        prev = ProbePoint { t, f, slope };
        t *= fl(2.0);
        if t > fl(1e12) {
            return Err(fail(evals));
        }
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| fail(evals))?;

    // Zoom phase: cubic-interpolate inside [lo, hi], falling back to
    // bisection whenever the model step is unusable.
    while evals < params.max_evals {
        let width = (hi.t - lo.t).abs();
        if width <= T::default_epsilon() * T::one().max(lo.t.abs()) {
            return Err(fail(evals));
        }
        let t = cubic_step(&lo, &hi).unwrap_or_else(|| (lo.t + hi.t) * fl(0.5));
        let (f, g, slope) = probe(t, &mut evals)?;
        if accept(t, f, slope) {
            return Ok(LineSearchHit {
                t,
                x: x0 + dir * t,
                j: f,
                g,
            });
        }
        if !armijo(t, f) || f >= lo.f {
            hi = ProbePoint { t, f, slope };
        } else {
            if slope * (hi.t - lo.t) >= T::zero() {
                hi = ProbePoint {
                    t: lo.t,
                    f: lo.f,
                    slope: lo.slope,
                };
            }
            lo = ProbePoint { t, f, slope };
        }
    }
    Err(fail(evals))
}

/// Minimizer of the cubic Hermite model through two probed points, or None
/// when the model is degenerate or steps outside the safe interior.
fn cubic_step<T: Scalar>(a: &ProbePoint<T>, b: &ProbePoint<T>) -> Option<T> {
    let d1 = a.slope + b.slope - fl::<T>(3.0) * (a.f - b.f) / (a.t - b.t);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < T::zero() {
        return None;
    }
    let sign = if b.t >= a.t { T::one() } else { -T::one() };
    let d2 = sign * disc.sqrt();
    let denom = b.slope - a.slope + d2 * fl(2.0);
    if denom == T::zero() {
        return None;
    }
    let t = b.t - (b.t - a.t) * (b.slope + d2 - d1) / denom;
    // Keep a safety margin inside the bracket.
    let (left, right) = if a.t <= b.t { (a.t, b.t) } else { (b.t, a.t) };
    let margin = (right - left) * fl(0.05);
    if t <= left + margin || t >= right - margin || !t.is_finite() {
        None
    } else {
        Some(t)
    }
}

/// Per-method direction memory. PR remembers the previous gradient and
/// direction; BFGS carries an inverse-Hessian approximation.
pub(crate) struct DirectionState<T: Scalar> {
    method: Method,
    prev_g: Option<DVector<T>>,
    prev_dir: Option<DVector<T>>,
    h_inv: Option<DMatrix<T>>,
}

impl<T: Scalar> DirectionState<T> {
    pub fn new(method: Method, dim: usize) -> Self {
        Self {
            method,
            prev_g: None,
            prev_dir: None,
            h_inv: match method {
                Method::Bfgs => Some(DMatrix::identity(dim, dim)),
                _ => None,
            },
        }
    }

    /// Next descent direction; guaranteed ⟨g, dir⟩ < 0 by resetting to −g
    /// whenever the method's formula loses descent.
    pub fn direction(&mut self, g: &DVector<T>) -> DVector<T> {
        let candidate = match self.method {
            Method::Sd => -g,
            Method::Pr => match (&self.prev_g, &self.prev_dir) {
                (Some(pg), Some(pd)) => {
                    let denom = pg.norm_squared();
                    let beta = if denom > T::zero() {
                        (g.dot(g) - g.dot(pg)) / denom
                    } else {
                        T::zero()
                    };
                    -g + pd * beta.max(T::zero())
                }
                _ => -g,
            },
            Method::Bfgs => -(self.h_inv.as_ref().expect("allocated") * g),
        };
        if candidate.dot(g) < T::zero() {
            candidate
        } else {
            log::debug!("direction lost descent; resetting to steepest descent");
            if let Some(h) = self.h_inv.as_mut() {
                h.fill_with_identity();
            }
            -g
        }
    }

    /// Records an accepted step x → x + step with gradients g_old → g_new.
    pub fn after_step(
        &mut self,
        step: &DVector<T>,
        g_old: &DVector<T>,
        g_new: &DVector<T>,
        dir_used: &DVector<T>,
    ) {
        if self.method == Method::Pr {
            self.prev_g = Some(g_old.clone());
            self.prev_dir = Some(dir_used.clone());
        }
        if let Some(h) = self.h_inv.as_mut() {
            let y = g_new - g_old;
            let ys = y.dot(step);
            if ys <= fl(1e-12) {
                log::debug!("curvature ⟨y,s⟩ = {:?} too small; resetting BFGS", ys.to_f64());
                h.fill_with_identity();
                return;
            }
            let rho = T::one() / ys;
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let n = h.nrows();
            let mut left = DMatrix::identity(n, n);
            left.ger(-rho, step, &y, T::one());
            let mut updated = &left * &*h * left.transpose();
            updated.ger(rho, step, step, T::one());
            *h = updated;
        }
    }
}

/// Options for the closure-level minimizer.
#[derive(Clone, Copy, Debug)]
pub struct MinimizeOptions<T: Scalar> {
    pub method: Method,
    /// Stop once the gradient norm is ≤ nu.
    pub nu: T,
    pub max_iters: usize,
}

/// Final state of a closure-level minimization.
pub struct Minimized<T: Scalar> {
    pub x: DVector<T>,
    pub j: T,
    pub g: DVector<T>,
    pub iterations: usize,
    pub termination: Termination,
}

/// Drives `method` on `f` from `x0` until ‖g‖ ≤ nu or a budget trips.
/// `on_iter(k, J, ‖g‖)` fires at k = 0 and after every accepted step. A
/// failed line search retries once along −g before giving up.
pub fn minimize<T, F, C>(
    mut f: F,
    x0: DVector<T>,
    opts: &MinimizeOptions<T>,
    mut on_iter: C,
) -> Result<Minimized<T>>
where
    T: Scalar,
    F: FnMut(&DVector<T>) -> Result<(T, DVector<T>)>,
    C: FnMut(usize, T, T),
{
    let params = WolfeParams::for_method(opts.method);
    let mut x = x0;
    let (mut j, mut g) = f(&x)?;
    if !j.is_finite() {
        return Err(Error::NonFinite {
            context: "cost at the initial iterate",
        });
    }
    let mut gnorm = g.norm();
    on_iter(0, j, gnorm);
    let mut state = DirectionState::new(opts.method, x.len());
    let mut iterations = 0usize;
    let mut prev_j: Option<T> = None;
    let mut last_t: Option<T> = None;

    let termination = loop {
        if gnorm <= opts.nu {
            break Termination::Converged;
        }
        if iterations >= opts.max_iters {
            break Termination::IterationBudget;
        }
        let mut dir = state.direction(&g);
        let mut slope = g.dot(&dir);
        let mut t0 = initial_step(opts.method, prev_j, j, slope, last_t);
        let mut hit = wolfe_search(&mut f, &x, &dir, j, slope, t0, &params);
        if hit.is_err() && opts.method != Method::Sd {
            log::warn!("line search failed; retrying along steepest descent");
            dir = -&g;
            slope = g.dot(&dir);
            t0 = initial_step(Method::Sd, prev_j, j, slope, last_t);
            hit = wolfe_search(&mut f, &x, &dir, j, slope, t0, &params);
        }
        let hit = match hit {
            Ok(h) => h,
            Err(Error::LineSearch { .. }) => break Termination::LineSearchFailure,
            Err(e) => return Err(e),
        };
        let step = &hit.x - &x;
        state.after_step(&step, &g, &hit.g, &dir);
        prev_j = Some(j);
        last_t = Some(hit.t);
        x = hit.x;
        j = hit.j;
        g = hit.g;
        gnorm = g.norm();
        iterations += 1;
        on_iter(iterations, j, gnorm);
    };
    Ok(Minimized {
        x,
        j,
        g,
        iterations,
        termination,
    })
}

/// First trial step: 1 for BFGS (Newton scaling); otherwise the quadratic
/// guess 2(J_k − J_{k−1})/⟨g, dir⟩, clamped to a sane range. When the guess
/// degenerates (value differences below rounding), reuse the last accepted
/// step length.
fn initial_step<T: Scalar>(
    method: Method,
    prev_j: Option<T>,
    j: T,
    slope: T,
    last_t: Option<T>,
) -> T {
    match (method, prev_j) {
        (Method::Bfgs, _) | (_, None) => T::one(),
        (_, Some(pj)) => {
            let guess = fl::<T>(2.0) * (j - pj) / slope;
            if guess.is_finite() && guess > T::zero() {
                guess.clamp(fl(1e-12), fl(1e10))
            } else {
                last_t.unwrap_or_else(T::one)
            }
        }
    }
}

/// Fixed-discretization run configuration.
#[derive(Clone, Debug)]
pub struct NaiveConfig<T: Scalar> {
    pub method: Method,
    /// Mode cutoff for every misfit evaluation.
    pub s: usize,
    /// Coefficient-space degree the iterates live in.
    pub p: usize,
    /// Gradient-norm stopping tolerance.
    pub nu: T,
    pub max_iters: usize,
}

/// Default inner iteration budget; generous enough for slow steepest
/// descent on oscillatory targets.
pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// Minimizes the misfit against `targets` at fixed cutoff and degree,
/// recording every accepted iterate.
pub fn run_naive<T: Scalar>(
    w0: &TrigPotential<T>,
    targets: &TargetBands<T>,
    cfg: &NaiveConfig<T>,
) -> Result<RunRecord<T>> {
    if w0.degree() > cfg.p {
        return Err(Error::InvalidArg(format!(
            "initial potential has degree {} > p = {}",
            w0.degree(),
            cfg.p
        )));
    }
    let start = Instant::now();
    let x0 = potential_to_vec(&w0.extend(cfg.p));
    let mut rows: Vec<IterRow<T>> = Vec::new();
    let eval = |x: &DVector<T>| -> Result<(T, DVector<T>)> {
        let v = vec_to_potential(x)?;
        let (j, grad) = cost_and_gradient(&v, targets, cfg.s, cfg.p)?;
        Ok((j, grad.to_dvector()))
    };
    let opts = MinimizeOptions {
        method: cfg.method,
        nu: cfg.nu,
        max_iters: cfg.max_iters,
    };
    let done = minimize(eval, x0, &opts, |iter, j, gnorm| {
        rows.push(IterRow {
            iter,
            j,
            gnorm,
            s: cfg.s,
            p: cfg.p,
            elapsed_s: start.elapsed().as_secs_f64(),
            event: None,
        });
    })?;
    Ok(RunRecord {
        rows,
        final_potential: vec_to_potential(&done.x)?,
        termination: done.termination,
        with_events: false,
    })
}
