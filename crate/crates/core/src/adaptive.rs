//! Adaptive driver: interleaves inner descent loops with refinement of the
//! mode cutoff s (triggered by the discretization estimator 𝒮) and
//! enlargement of the coefficient space degree p (triggered by the
//! doubled-space gradient 𝒫).
//!
//! Each outer pass descends to the gradient tolerance at the current
//! (s, p), then checks 𝒮 and 𝒫 against η; exactly one parameter changes per
//! pass (s before p), and the run terminates once the gradient, 𝒮, and 𝒫
//! tests all pass at the same iterate.

use nalgebra::DVector;
use std::time::Instant;

use crate::estimator::{s_estimator, ApostConfig};
use crate::fourier::TrigPotential;
use crate::objective::{
    cost_and_gradient, gradient, potential_to_vec, vec_to_potential, GradientVector, TargetBands,
};
use crate::optim::{minimize, IterRow, Method, MinimizeOptions, RunRecord, Termination};
use crate::{fl, fmt17, Error, Result, Scalar};

/// Parameters of an adaptive run.
#[derive(Clone, Copy, Debug)]
pub struct AdaptiveConfig<T: Scalar> {
    /// Initial mode cutoff.
    pub s0: usize,
    /// Initial coefficient-space degree.
    pub p0: usize,
    /// Threshold for both estimators (𝒮 and 𝒫).
    pub eta: T,
    /// Inner gradient-norm tolerance.
    pub nu: T,
    /// A posteriori bound parameters (reference cutoff, θ, κ).
    pub apost: ApostConfig<T>,
    /// Descent method for the inner loops.
    pub method: Method,
    /// Total inner-iteration budget across all passes.
    pub max_inner_iters: usize,
    /// Maximum number of outer passes (each pass is one inner loop plus one
    /// refinement decision).
    pub max_outer_passes: usize,
}

/// Default outer-pass budget; far above any observed refinement count.
pub const DEFAULT_MAX_OUTER_PASSES: usize = 200;

impl<T: Scalar> AdaptiveConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.s0 < 1 || self.p0 < 1 {
            return Err(Error::InvalidArg(format!(
                "initial cutoffs must be ≥ 1, got s0 = {}, p0 = {}",
                self.s0, self.p0
            )));
        }
        if !(self.eta > T::zero()) || !(self.nu > T::zero()) {
            return Err(Error::InvalidArg(
                "eta and nu must be positive".into(),
            ));
        }
        self.apost.validate(self.s0)
    }
}

/// 𝒮 with the documented collision handling: a shift c_δ landing on a
/// reference eigenvalue is resolved by nudging θ and retrying.
fn s_with_collision_retry<T: Scalar>(
    w: &TrigPotential<T>,
    targets: &TargetBands<T>,
    s: usize,
    apost: &ApostConfig<T>,
) -> Result<T> {
    let mut attempt_cfg = *apost;
    for _ in 0..3 {
        match s_estimator(w, targets, s, &attempt_cfg) {
            Err(Error::ShiftCollision { c_delta, dist }) => {
                log::warn!(
                    "shift collision (c_delta = {c_delta:e}, dist = {dist:e}); perturbing theta"
                );
                attempt_cfg.theta *= fl::<T>(1.0) + fl(1e-6);
            }
            other => return other,
        }
    }
    s_estimator(w, targets, s, &attempt_cfg)
}

/// Picks the new degree when the space must grow: the p̄ ∈ (p, 2p] whose
/// coefficient pair has the largest derivative magnitude, smallest index on
/// ties.
pub fn grow_p<T: Scalar>(
    w: &TrigPotential<T>,
    targets: &TargetBands<T>,
    s: usize,
    p: usize,
) -> Result<usize> {
    let g2 = gradient(w, targets, s, 2 * p)?;
    grow_p_from(&g2, p)
}

fn grow_p_from<T: Scalar>(g2: &GradientVector<T>, p: usize) -> Result<usize> {
    debug_assert_eq!(g2.p(), 2 * p);
    let mut best_k = 0usize;
    let mut best = T::zero();
    for k in p + 1..=2 * p {
        let score = g2.max_pair_abs(k);
        if score > best {
            best = score;
            best_k = k;
        }
    }
    if best_k == 0 {
        return Err(Error::Internal(
            "space-enlargement indicator exceeded its threshold but every \
             out-of-space derivative is zero"
                .into(),
        ));
    }
    Ok(best_k)
}

/// Runs the adaptive loop from `w0` (degree ≤ p0). The record carries one
/// row per accepted descent step plus one annotated row per refinement
/// (where J and ‖g‖ are re-evaluated at the new discretization, so J may
/// step up across events).
pub fn run_adaptive<T: Scalar>(
    w0: &TrigPotential<T>,
    targets: &TargetBands<T>,
    cfg: &AdaptiveConfig<T>,
) -> Result<RunRecord<T>> {
    cfg.validate()?;
    if w0.degree() > cfg.p0 {
        return Err(Error::InvalidArg(format!(
            "initial potential has degree {} > p0 = {}",
            w0.degree(),
            cfg.p0
        )));
    }
    let start = Instant::now();
    let mut s = cfg.s0;
    let mut p = cfg.p0;
    let mut w = w0.extend(cfg.p0);
    let mut rows: Vec<IterRow<T>> = Vec::new();
    let mut global_iter = 0usize;
    let mut pending_event: Option<String> = None;
    let mut inner_used = 0usize;
    // Inner tolerance: ν normally; tightened to η at a fixed (s, p) when 𝒫
    // exceeds η purely from in-space gradient mass a ν-level loop leaves
    // behind (termination needs ‖∇|_{Y_p}‖ ≤ 𝒫 ≤ η anyway, and growing p on
    // in-space mass would loop without progress).
    let mut nu_eff = cfg.nu;
    let mut termination = Termination::OuterBudget;

    for _pass in 0..cfg.max_outer_passes {
        let remaining = cfg.max_inner_iters.saturating_sub(inner_used);
        let x0 = potential_to_vec(&w);
        let (cur_s, cur_p) = (s, p);
        let eval = |x: &DVector<T>| -> Result<(T, DVector<T>)> {
            let v = vec_to_potential(x)?;
            let (j, g) = cost_and_gradient(&v, targets, cur_s, cur_p)?;
            Ok((j, g.to_dvector()))
        };
        let opts = MinimizeOptions {
            method: cfg.method,
            nu: nu_eff,
            max_iters: remaining,
        };
        let done = minimize(eval, x0, &opts, |k, j, gnorm| {
            if k == 0 {
                // Re-evaluation row at a refinement (or the very first row).
                if pending_event.is_some() || rows.is_empty() {
                    rows.push(IterRow {
                        iter: global_iter,
                        j,
                        gnorm,
                        s: cur_s,
                        p: cur_p,
                        elapsed_s: start.elapsed().as_secs_f64(),
                        event: pending_event.take(),
                    });
                }
            } else {
                global_iter += 1;
                rows.push(IterRow {
                    iter: global_iter,
                    j,
                    gnorm,
                    s: cur_s,
                    p: cur_p,
                    elapsed_s: start.elapsed().as_secs_f64(),
                    event: None,
                });
            }
        })?;
        inner_used += done.iterations;
        w = vec_to_potential(&done.x)?;
        match done.termination {
            Termination::Converged => {}
            other => {
                termination = other;
                break;
            }
        }

        let s_val = s_with_collision_retry(&w, targets, s, &cfg.apost)?;
        if s_val > cfg.eta {
            s += 1;
            nu_eff = cfg.nu;
            pending_event = Some(format!("s->{s} S={}", fmt17(s_val)));
            continue;
        }
        let g2 = gradient(&w, targets, s, 2 * p)?;
        let p_val = g2.norm();
        if p_val > cfg.eta {
            if g2.restricted_norm(p) > cfg.eta && nu_eff > cfg.eta {
                nu_eff = cfg.eta;
                continue;
            }
            let p_new = grow_p_from(&g2, p)?;
            p = p_new;
            w = w.extend(p);
            nu_eff = cfg.nu;
            pending_event = Some(format!("p->{p} P={}", fmt17(p_val)));
            continue;
        }
        termination = Termination::Converged;
        break;
    }
    Ok(RunRecord {
        rows,
        final_potential: w,
        termination,
        with_events: true,
    })
}
