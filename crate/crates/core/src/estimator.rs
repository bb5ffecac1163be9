//! A posteriori eigenvalue error bounds and the refinement indicators built
//! on them.
//!
//! For a Galerkin eigenpair (ε_N, u_N) computed at cutoff s and lifted into
//! the reference space at cutoff s_ref, the bound
//!
//! Δ = Σ_i |⟨φ_i, r⟩|² (λ_i − d_δ)/(λ_i − c_δ)²,  r = (A_ref − ε_N) u_N,
//!
//! with shifts c_δ = ε_N + δ, d_δ = λ_m + δ, δ = max(0, θ(ε_N − κ)), and
//! λ_m a trace-based lower bound on the m-th reference eigenvalue,
//! certifies ε_N − ε_m^ref ≤ Δ whenever the underlying gap hypothesis
//! holds (it is checked and logged, not enforced — the deployment is a
//! heuristic at coarse cutoffs).
//!
//! Two aggregates drive the adaptive driver: 𝒮 bounds the misfit change
//! under discretization refinement, and 𝒫 measures the gradient norm on the
//! doubled coefficient space Y_2p.

use nalgebra::DVector;
use rayon::prelude::*;
use std::io::Write;

use crate::bloch::{assemble_fiber, band_sweep, EigenDecomp, FiberMatrix, QGrid};
use crate::fourier::{PotentialCoeffs, TrigPotential};
use crate::objective::{gradient, TargetBands};
use crate::{fl, fmt17, Cplx, Error, Result, Scalar};

/// Parameters of the a posteriori bound.
#[derive(Clone, Copy, Debug)]
pub struct ApostConfig<T: Scalar> {
    /// Reference cutoff; must exceed the working cutoff.
    pub s_ref: usize,
    /// Shift fraction θ ∈ (0, 1] in δ = θ(ε_N − κ).
    pub theta: T,
    /// A priori lower bound on the first band (κ); the shift δ is clamped
    /// at 0 when ε_N < κ.
    pub kappa: T,
}

impl<T: Scalar> ApostConfig<T> {
    /// Checks internal consistency against the working cutoff `s`.
    pub fn validate(&self, s: usize) -> Result<()> {
        if self.s_ref <= s {
            return Err(Error::InvalidArg(format!(
                "reference cutoff {} must exceed the working cutoff {s}",
                self.s_ref
            )));
        }
        if !(self.theta > T::zero()) {
            return Err(Error::InvalidArg(format!(
                "theta must be positive, got {:?}",
                self.theta.to_f64()
            )));
        }
        if !self.kappa.is_finite() {
            return Err(Error::NonFinite { context: "kappa" });
        }
        Ok(())
    }
}

/// One (q, m) entry of a bound sweep. Bands are numbered from 1 here, as in
/// the underlying eigenvalue indexing of the bound.
#[derive(Clone, Debug)]
pub struct DeltaRow<T: Scalar> {
    pub q: T,
    pub m: usize,
    /// Band energy at the working cutoff.
    pub eps_s: T,
    /// Band energy at the reference cutoff.
    pub eps_ref: T,
    /// The bound Δ ≥ 0.
    pub delta: T,
    /// Trace-based lower bound λ_m used in the shift d_δ.
    pub lambda_m: T,
    /// ‖(A_ref − ε_N) u_N‖ in the reference space.
    pub residual_norm: T,
    /// Whether the bound's gap hypothesis held for this entry
    /// (0 < ε_N − ε_m^ref < distance from ε_N to the rest of the reference
    /// spectrum).
    pub gap_ok: bool,
}

/// Bound sweep over a q-grid and band range, plus the θ it was run at.
#[derive(Clone, Debug)]
pub struct DeltaReport<T: Scalar> {
    theta: T,
    rows: Vec<DeltaRow<T>>,
}

impl<T: Scalar> DeltaReport<T> {
    pub fn theta(&self) -> T {
        self.theta
    }

    /// Rows in grid-major order (all bands of node 0, then node 1, …).
    pub fn rows(&self) -> &[DeltaRow<T>] {
        &self.rows
    }

    /// Writes `q,m,eps_s,eps_ref,true_err,delta,theta` records, one per
    /// (q, m), where true_err = eps_s − eps_ref.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "q,m,eps_s,eps_ref,true_err,delta,theta")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt17(r.q),
                r.m,
                fmt17(r.eps_s),
                fmt17(r.eps_ref),
                fmt17(r.eps_s - r.eps_ref),
                fmt17(r.delta),
                fmt17(self.theta)
            )?;
        }
        Ok(())
    }
}

/// Trace-based lower bound on the m-th smallest eigenvalue (1-based):
/// λ_m ≥ μ − σ·sqrt((N − m)/m) with μ = Tr A/N and σ² = Tr A²/N − μ².
pub fn lambda_lower_bound<T: Scalar>(a: &FiberMatrix<T>, m: usize) -> Result<T> {
    let n = a.size();
    if n < 2 {
        return Err(Error::InvalidArg(format!(
            "trace bound needs a matrix of size ≥ 2, got {n}"
        )));
    }
    if m < 1 || m > n {
        return Err(Error::InvalidArg(format!(
            "eigenvalue index {m} outside 1..={n}"
        )));
    }
    let nf = fl::<T>(n as f64);
    let mu = a.trace() / nf;
    let sigma2 = a.trace_sq() / nf - mu * mu;
    let sigma = if sigma2 < T::zero() {
        if sigma2 < fl(-1e-12) {
            return Err(Error::NegativeVariance {
                sigma2: sigma2.to_f64().unwrap_or(f64::NAN),
            });
        }
        T::zero()
    } else {
        sigma2.sqrt()
    };
    Ok(mu - (fl::<T>((n - m) as f64) / fl(m as f64)).sqrt() * sigma)
}

/// Lifts a mode-coefficient vector from cutoff `s_from` to `s_to` by zero
/// padding (frequency k keeps its coefficient; new frequencies get 0).
pub fn zero_pad<T: Scalar>(
    u: &DVector<Cplx<T>>,
    s_from: usize,
    s_to: usize,
) -> Result<DVector<Cplx<T>>> {
    if u.len() != 2 * s_from + 1 {
        return Err(Error::InvalidArg(format!(
            "vector length {} does not match cutoff {s_from}",
            u.len()
        )));
    }
    if s_to < s_from {
        return Err(Error::InvalidArg(format!(
            "cannot pad from cutoff {s_from} down to {s_to}"
        )));
    }
    let mut out = DVector::from_element(2 * s_to + 1, Cplx::new(T::zero(), T::zero()));
    let offset = s_to - s_from;
    for i in 0..u.len() {
        out[i + offset] = u[i];
    }
    Ok(out)
}

/// The a posteriori bound for one eigenpair: `eps_n` and `u_pad` are the
/// Galerkin eigenvalue and its eigenvector already lifted to the reference
/// space of `a_ref`; `m` is the 1-based band index.
pub fn delta<T: Scalar>(
    a_ref: &FiberMatrix<T>,
    eps_n: T,
    u_pad: &DVector<Cplx<T>>,
    m: usize,
    cfg: &ApostConfig<T>,
) -> Result<T> {
    if u_pad.len() != a_ref.size() {
        return Err(Error::InvalidArg(format!(
            "lifted vector length {} does not match the reference dimension {}",
            u_pad.len(),
            a_ref.size()
        )));
    }
    let norm = u_pad.norm();
    if (norm - T::one()).abs() > fl(1e-6) {
        return Err(Error::InvalidArg(format!(
            "eigenvector must be unit norm, got ‖u‖ = {:?}",
            norm.to_f64()
        )));
    }
    let decomp = a_ref.eigen_full()?;
    let lambda_m = lambda_lower_bound(a_ref, m)?;
    let (value, _residual) = delta_from_decomp(&decomp, eps_n, u_pad, lambda_m, cfg)?;
    Ok(value)
}

/// Core of the bound given a ready reference decomposition; returns
/// (Δ, ‖r‖). The sum is floored at zero: outside the gap hypothesis its
/// sign is not guaranteed, while the reported bound must stay ≥ 0.
fn delta_from_decomp<T: Scalar>(
    decomp: &EigenDecomp<T>,
    eps_n: T,
    u_pad: &DVector<Cplx<T>>,
    lambda_m: T,
    cfg: &ApostConfig<T>,
) -> Result<(T, T)> {
    let shift = (cfg.theta * (eps_n - cfg.kappa)).max(T::zero());
    let c_delta = eps_n + shift;
    let d_delta = lambda_m + shift;
    let n = decomp.values.len();
    let mut sum = T::zero();
    let mut res_sq = T::zero();
    for i in 0..n {
        let lam = decomp.values[i];
        let dist = (lam - c_delta).abs();
        if dist < fl(1e-12) {
            return Err(Error::ShiftCollision {
                c_delta: c_delta.to_f64().unwrap_or(f64::NAN),
                dist: dist.to_f64().unwrap_or(f64::NAN),
            });
        }
        // ⟨φ_i, r⟩ = (λ_i − ε_N)⟨φ_i, u⟩ since r = (A − ε_N)u.
        let w = decomp.vectors.column(i).dotc(u_pad);
        let r_sq = w.norm_sqr() * (lam - eps_n) * (lam - eps_n);
        res_sq += r_sq;
        sum += r_sq * (lam - d_delta) / ((lam - c_delta) * (lam - c_delta));
    }
    if sum < T::zero() {
        log::debug!(
            "a posteriori sum {:?} negative (gap hypothesis violated); flooring at 0",
            sum.to_f64()
        );
        sum = T::zero();
    }
    Ok((sum, res_sq.sqrt()))
}

/// Runs the bound for every node of `grid` and band m = 1..=m_bands of the
/// potential's band structure at cutoff `s`, against references at
/// `cfg.s_ref`.
pub fn delta_report<T, P>(
    pot: &P,
    grid: &QGrid<T>,
    m_bands: usize,
    s: usize,
    cfg: &ApostConfig<T>,
) -> Result<DeltaReport<T>>
where
    T: Scalar,
    P: PotentialCoeffs<T> + Sync,
{
    cfg.validate(s)?;
    if m_bands == 0 {
        return Err(Error::InvalidArg("band count must be ≥ 1".into()));
    }
    let sheet = band_sweep(pot, grid, m_bands, s)?;
    let per_node: Vec<Vec<DeltaRow<T>>> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let q = grid.node(j);
            let fiber_ref = assemble_fiber(pot, q, cfg.s_ref);
            let decomp = fiber_ref.eigen_full()?;
            let mut rows = Vec::with_capacity(m_bands);
            for m in 1..=m_bands {
                let eps_n = sheet.eps(j, m - 1);
                let u_pad = zero_pad(sheet.vector(j, m - 1), s, cfg.s_ref)?;
                let lambda_m = lambda_lower_bound(&fiber_ref, m)?;
                let (value, residual_norm) =
                    delta_from_decomp(&decomp, eps_n, &u_pad, lambda_m, cfg)?;
                let eps_ref = decomp.values[m - 1];
                let true_err = eps_n - eps_ref;
                let others = decomp
                    .values
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != m - 1)
                    .map(|(_, lam)| (*lam - eps_n).abs())
                    .fold(T::max_value().expect("scalar has a max"), T::min);
                let gap_ok = true_err > T::zero() && true_err < others;
                if !gap_ok {
                    log::debug!(
                        "gap hypothesis fails at q = {:?}, m = {m}: err = {:?}, dist = {:?}",
                        q.to_f64(),
                        true_err.to_f64(),
                        others.to_f64()
                    );
                }
                rows.push(DeltaRow {
                    q,
                    m,
                    eps_s: eps_n,
                    eps_ref,
                    delta: value,
                    lambda_m,
                    residual_norm,
                    gap_ok,
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(DeltaReport {
        theta: cfg.theta,
        rows: per_node.into_iter().flatten().collect(),
    })
}

/// Discretization estimator: 𝒮 = (1/Q) Σ_{q,m} (2|b_m(q) − ε_{q,m}| + Δ)·Δ,
/// which bounds the misfit change when every Δ certifies its eigenvalue
/// error.
pub fn s_estimator<T, P>(
    pot: &P,
    targets: &TargetBands<T>,
    s: usize,
    cfg: &ApostConfig<T>,
) -> Result<T>
where
    T: Scalar,
    P: PotentialCoeffs<T> + Sync,
{
    let report = delta_report(pot, targets.grid(), targets.band_count(), s, cfg)?;
    s_from_report(&report, targets)
}

/// Aggregates a ready bound sweep into 𝒮 against `targets`.
pub fn s_from_report<T: Scalar>(report: &DeltaReport<T>, targets: &TargetBands<T>) -> Result<T> {
    let m_bands = targets.band_count();
    let q_count = targets.grid().len();
    if report.rows.len() != q_count * m_bands {
        return Err(Error::InvalidArg(format!(
            "report has {} rows, targets imply {}",
            report.rows.len(),
            q_count * m_bands
        )));
    }
    let mut total = T::zero();
    for (idx, row) in report.rows.iter().enumerate() {
        let j = idx / m_bands;
        let b = targets.value(j, row.m - 1);
        let misfit = (b - row.eps_s).abs();
        total += (fl::<T>(2.0) * misfit + row.delta) * row.delta;
    }
    Ok(total / fl(q_count as f64))
}

/// Space-enlargement estimator: the misfit gradient norm on the doubled
/// coefficient space Y_2p (a vector of length 4p+1).
pub fn p_estimator<T: Scalar>(
    pot: &TrigPotential<T>,
    targets: &TargetBands<T>,
    s: usize,
) -> Result<T> {
    Ok(gradient(pot, targets, s, 2 * pot.degree())?.norm())
}

/// Default κ when no a priori bound on the first band is supplied: the
/// trace bound of the potential's q = 0 fiber at the reference cutoff.
/// Cheap (no eigensolve) and guaranteed below ε_1; note it is very loose
/// for large reference fibers, and the shift δ is clamped at 0 regardless.
pub fn default_kappa<T, P>(pot: &P, s_ref: usize) -> Result<T>
where
    T: Scalar,
    P: PotentialCoeffs<T>,
{
    lambda_lower_bound(&assemble_fiber(pot, T::zero(), s_ref), 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::QGrid;
    use crate::objective::cost;
    use crate::rng::{seeded_potential, SplitMix64};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn diag_fiber(entries: &[f64]) -> FiberMatrix<f64> {
        let n = entries.len();
        let mat = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                Cplx::new(entries[r], 0.0)
            } else {
                Cplx::new(0.0, 0.0)
            }
        });
        FiberMatrix::from_raw(0.0, n / 2, mat)
    }

    /// Potential used throughout as a nontrivial validation case: complex
    /// exponential coefficients v_0 = 2, v_1 = v_2 = 1 + 0.5i.
    fn validation_potential() -> TrigPotential<f64> {
        TrigPotential::new(vec![2.0, 2.0, 2.0], vec![-1.0, -1.0]).unwrap()
    }

    fn cfg(theta: f64) -> ApostConfig<f64> {
        ApostConfig {
            s_ref: 60,
            theta,
            kappa: 0.0,
        }
    }

    #[test]
    fn trace_bound_matches_frozen_diagonal_values() {
        let a = diag_fiber(&[0.0, 1.0, 2.0]);
        assert_abs_diff_eq!(
            lambda_lower_bound(&a, 1).unwrap(),
            -0.15470053837925168,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            lambda_lower_bound(&a, 2).unwrap(),
            0.42264973081037416,
            epsilon = 1e-15
        );
        assert_eq!(lambda_lower_bound(&a, 3).unwrap(), 1.0);
    }

    #[test]
    fn trace_bound_is_exact_on_flat_spectra() {
        let a = diag_fiber(&[2.5, 2.5, 2.5, 2.5]);
        for m in 1..=4 {
            assert_eq!(lambda_lower_bound(&a, m).unwrap(), 2.5);
        }
    }

    #[test]
    fn trace_bound_rejects_bad_indices() {
        let a = diag_fiber(&[0.0, 1.0, 2.0]);
        assert!(lambda_lower_bound(&a, 0).is_err());
        assert!(lambda_lower_bound(&a, 4).is_err());
        assert!(lambda_lower_bound(&diag_fiber(&[1.0]), 1).is_err());
    }

    #[test]
    fn trace_bound_sits_below_every_tested_eigenvalue() {
        let mut rng = SplitMix64::new(2024);
        let n = 20;
        let mut mat = DMatrix::from_element(n, n, Cplx::new(0.0, 0.0));
        for r in 0..n {
            mat[(r, r)] = Cplx::new(3.0 * rng.next_symmetric(), 0.0);
            for c in (r + 1)..n {
                let z = Cplx::new(rng.next_symmetric(), rng.next_symmetric());
                mat[(r, c)] = z;
                mat[(c, r)] = z.conj();
            }
        }
        let a = FiberMatrix::from_raw(0.0, 0, mat);
        let exact = a.eigen_full().unwrap();
        for m in 1..=5 {
            let bound = lambda_lower_bound(&a, m).unwrap();
            assert!(
                bound <= exact.values[m - 1] + 1e-12,
                "m = {m}: bound {bound} above eigenvalue {}",
                exact.values[m - 1]
            );
        }
    }

    #[test]
    fn zero_padding_places_frequencies_correctly() {
        let u = DVector::from_column_slice(&[
            Cplx::new(1.0, 0.0),
            Cplx::new(2.0, -1.0),
            Cplx::new(3.0, 0.5),
        ]);
        let padded = zero_pad::<f64>(&u, 1, 3).unwrap();
        assert_eq!(padded.len(), 7);
        assert_eq!(padded[2], u[0]);
        assert_eq!(padded[3], u[1]);
        assert_eq!(padded[4], u[2]);
        assert_eq!(padded[0].norm_sqr(), 0.0);
        assert_eq!(padded[6].norm_sqr(), 0.0);
        assert!(zero_pad::<f64>(&u, 2, 3).is_err());
        assert!(zero_pad::<f64>(&u, 1, 0).is_err());
    }

    #[test]
    fn delta_vanishes_for_an_exact_reference_eigenvector() {
        let v = validation_potential();
        let fiber = assemble_fiber(&v, 0.3, 8);
        let decomp = fiber.eigen_full().unwrap();
        let u = decomp.vectors.column(0).into_owned();
        let cfg = ApostConfig {
            s_ref: 8,
            theta: 0.5,
            kappa: 0.0,
        };
        let d = delta(&fiber, decomp.values[0], &u, 1, &cfg).unwrap();
        assert!(d.abs() <= 1e-20, "delta = {d}");
    }

    #[test]
    fn delta_matches_a_frozen_hand_case() {
        let a = diag_fiber(&[0.0, 1.0, 4.0]);
        let u = DVector::from_column_slice(&[
            Cplx::new(0.6, 0.0),
            Cplx::new(0.8, 0.0),
            Cplx::new(0.0, 0.0),
        ]);
        let cfg = ApostConfig {
            s_ref: 3,
            theta: 0.5,
            kappa: 0.0,
        };
        let d = delta(&a, 0.64, &u, 1, &cfg).unwrap();
        assert_abs_diff_eq!(d, 73.52577754941815, epsilon = 1e-10);
    }

    #[test]
    fn delta_rejects_shift_collisions() {
        let a = diag_fiber(&[0.0, 1.0, 4.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = DVector::from_column_slice(&[
            Cplx::new(h, 0.0),
            Cplx::new(h, 0.0),
            Cplx::new(0.0, 0.0),
        ]);
        let cfg = ApostConfig {
            s_ref: 3,
            theta: 1.0,
            kappa: 0.0,
        };
        // c_δ = 0.5 + 1.0·0.5 = 1.0 collides with the middle eigenvalue.
        assert!(matches!(
            delta(&a, 0.5, &u, 1, &cfg),
            Err(Error::ShiftCollision { .. })
        ));
    }

    #[test]
    fn delta_requires_unit_vectors() {
        let a = diag_fiber(&[0.0, 1.0, 4.0]);
        let u = DVector::from_column_slice(&[
            Cplx::new(1.0, 0.0),
            Cplx::new(1.0, 0.0),
            Cplx::new(0.0, 0.0),
        ]);
        assert!(delta(&a, 0.5, &u, 1, &cfg(0.5)).is_err());
    }

    #[test]
    fn validation_potential_is_certified_at_desk_scale() {
        let v = validation_potential();
        let grid = QGrid::uniform(5).unwrap();
        for theta in [0.1, 1.0] {
            let report = delta_report(&v, &grid, 3, 6, &cfg(theta)).unwrap();
            assert_eq!(report.rows().len(), 15);
            for row in report.rows() {
                let true_err = row.eps_s - row.eps_ref;
                assert!(row.delta >= 0.0);
                assert!(row.gap_ok, "gap hypothesis failed at q={}, m={}", row.q, row.m);
                assert!(
                    row.delta >= true_err - 1e-12,
                    "uncertified at q={}, m={}: delta={} err={}",
                    row.q,
                    row.m,
                    row.delta,
                    true_err
                );
            }
        }
    }

    #[test]
    fn s_bounds_the_cost_gap_between_cutoffs() {
        let v = validation_potential();
        let grid = QGrid::uniform(5).unwrap();
        let vt: TrigPotential<f64> = seeded_potential(2, 9);
        let targets = TargetBands::from_potential(&vt, &grid, 3, 30).unwrap();
        let j_ref = cost(&v, &targets, 60).unwrap();
        let j_s = cost(&v, &targets, 6).unwrap();
        let s_val = s_estimator(&v, &targets, 6, &cfg(0.1)).unwrap();
        assert!(
            s_val >= (j_ref - j_s).abs(),
            "S = {s_val} below cost gap {}",
            (j_ref - j_s).abs()
        );
    }

    #[test]
    fn s_is_monotone_in_delta_and_zero_without_error() {
        let v = validation_potential();
        let grid = QGrid::uniform(3).unwrap();
        let vt: TrigPotential<f64> = seeded_potential(1, 5);
        let targets = TargetBands::from_potential(&vt, &grid, 2, 30).unwrap();
        let report = delta_report(&v, &grid, 2, 6, &cfg(0.5)).unwrap();
        let s1 = s_from_report(&report, &targets).unwrap();
        let mut doubled = report.clone();
        for row in &mut doubled.rows {
            row.delta *= 2.0;
        }
        assert!(s_from_report(&doubled, &targets).unwrap() >= s1);
        let mut zeroed = report;
        for row in &mut zeroed.rows {
            row.delta = 0.0;
        }
        assert_eq!(s_from_report(&zeroed, &targets).unwrap(), 0.0);
    }

    #[test]
    fn p_dominates_the_in_space_gradient_norm() {
        let v: TrigPotential<f64> = seeded_potential(2, 11);
        let grid = QGrid::uniform(5).unwrap();
        let vt: TrigPotential<f64> = seeded_potential(2, 12);
        let targets = TargetBands::from_potential(&vt, &grid, 2, 10).unwrap();
        let in_space = gradient(&v, &targets, 10, v.degree()).unwrap().norm();
        let p_val = p_estimator(&v, &targets, 10).unwrap();
        assert!(p_val >= in_space);

        // At an exact global minimizer every band residual vanishes, so the
        // doubled-space gradient is identically zero.
        let self_targets = TargetBands::from_potential(&v, &grid, 2, 10).unwrap();
        assert_eq!(p_estimator(&v, &self_targets, 10).unwrap(), 0.0);
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        assert!(ApostConfig {
            s_ref: 6,
            theta: 0.1,
            kappa: 0.0
        }
        .validate(6)
        .is_err());
        assert!(ApostConfig {
            s_ref: 60,
            theta: 0.0,
            kappa: 0.0
        }
        .validate(6)
        .is_err());
        assert!(ApostConfig {
            s_ref: 60,
            theta: 0.1,
            kappa: 0.0
        }
        .validate(6)
        .is_ok());
    }

    #[test]
    fn validation_csv_lists_every_pair_with_theta() {
        let v = validation_potential();
        let grid = QGrid::uniform(3).unwrap();
        let report = delta_report(&v, &grid, 2, 6, &cfg(0.1)).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "q,m,eps_s,eps_ref,true_err,delta,theta");
        assert_eq!(lines.len(), 1 + 3 * 2);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[1], "1");
        assert_abs_diff_eq!(fields[6].parse::<f64>().unwrap(), 0.1);
        let true_err: f64 = fields[4].parse().unwrap();
        let eps_s: f64 = fields[2].parse().unwrap();
        let eps_ref: f64 = fields[3].parse().unwrap();
        assert_abs_diff_eq!(true_err, eps_s - eps_ref, epsilon = 1e-15);
    }
}
