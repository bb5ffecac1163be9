//! Least-squares band misfit and its exact gradient in potential
//! coefficients.
//!
//! Given target bands b_m sampled on a Brillouin-zone grid, the misfit of a
//! potential V at cutoff s is
//! J(V) = (1/Q) Σ_{q} Σ_{m=1}^{M} |b_m(q) − ε_{q,m}|².
//! Each eigenvalue's derivative in a coefficient comes from the
//! Hellmann–Feynman theorem: ∂_{c_k} ε = ⟨u, cos(kx) u⟩ and
//! ∂_{d_k} ε = ⟨u, sin(kx) u⟩, both lag-k mode correlations of the Bloch
//! state u, so one eigensolve per grid node yields the full gradient.

use nalgebra::DVector;
use std::io::Write;

use crate::bloch::{band_sweep, BandSheet, QGrid};
use crate::fourier::{PotentialCoeffs, TrigPotential};
use crate::{fl, fmt17, Cplx, Error, Result, Scalar};

/// Target band samples b_m on a grid, frozen once at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetBands<T: Scalar> {
    grid: QGrid<T>,
    m_bands: usize,
    /// Grid-major: entry j·m_bands + m is b_m at node j (m 0-based).
    samples: Vec<T>,
}

impl<T: Scalar> TargetBands<T> {
    /// Wraps explicit samples (grid-major, band-minor). Rejects shape
    /// mismatches and samples that are not even in q.
    pub fn from_samples(grid: QGrid<T>, m_bands: usize, samples: Vec<T>) -> Result<Self> {
        if m_bands == 0 {
            return Err(Error::InvalidArg("need at least one target band".into()));
        }
        if samples.len() != grid.len() * m_bands {
            return Err(Error::InvalidArg(format!(
                "expected {} target samples, got {}",
                grid.len() * m_bands,
                samples.len()
            )));
        }
        if !samples.iter().all(|b| b.is_finite()) {
            return Err(Error::InvalidArg("non-finite target sample".into()));
        }
        let t = Self {
            grid,
            m_bands,
            samples,
        };
        t.validate_evenness()?;
        t.warn_on_monotonicity_defects();
        Ok(t)
    }

    /// Samples the closed-form bands `f(q, m)` (m 0-based) on the grid.
    pub fn from_fn(
        grid: QGrid<T>,
        m_bands: usize,
        f: impl Fn(T, usize) -> T,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(grid.len() * m_bands);
        for j in 0..grid.len() {
            for m in 0..m_bands {
                samples.push(f(grid.node(j), m));
            }
        }
        Self::from_samples(grid, m_bands, samples)
    }

    /// Freezes the Galerkin bands of `pot` at cutoff `s_t` as targets. The
    /// samples never change afterwards, whatever cutoff later evaluations
    /// use.
    pub fn from_potential<P: PotentialCoeffs<T> + Sync>(
        pot: &P,
        grid: &QGrid<T>,
        m_bands: usize,
        s_t: usize,
    ) -> Result<Self> {
        Ok(Self::from_sheet(&band_sweep(pot, grid, m_bands, s_t)?))
    }

    /// Adopts the energies of an already-computed sheet.
    pub fn from_sheet(sheet: &BandSheet<T>) -> Self {
        let t = Self {
            grid: sheet.grid().clone(),
            m_bands: sheet.band_count(),
            samples: sheet.energies().to_vec(),
        };
        debug_assert!(t.validate_evenness().is_ok());
        t.warn_on_monotonicity_defects();
        t
    }

    pub fn grid(&self) -> &QGrid<T> {
        &self.grid
    }

    pub fn band_count(&self) -> usize {
        self.m_bands
    }

    /// Target value b_m at grid node `j` (m 0-based).
    pub fn value(&self, j: usize, m: usize) -> T {
        debug_assert!(m < self.m_bands);
        self.samples[j * self.m_bands + m]
    }

    /// Largest |b_m(q) − b_m(−q)| over paired grid nodes.
    pub fn max_evenness_defect(&self) -> T {
        let mut worst = T::zero();
        for j in 0..self.grid.len() {
            let jm = self.grid.mirror_index(j);
            for m in 0..self.m_bands {
                worst = worst.max((self.value(j, m) - self.value(jm, m)).abs());
            }
        }
        worst
    }

    fn validate_evenness(&self) -> Result<()> {
        let scale = self
            .samples
            .iter()
            .fold(T::one(), |a, b| a.max(b.abs()));
        let defect = self.max_evenness_defect();
        if defect > fl::<T>(1e-10) * scale {
            return Err(Error::InvalidArg(format!(
                "target bands are not even in q (defect {:e})",
                defect.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(())
    }

    /// Worst violation of the expected shape of band `m` on q ∈ [0, 1/2):
    /// bands alternate increasing (m = 0, 2, …) and decreasing (m = 1, 3, …).
    pub fn monotonicity_defect(&self, m: usize) -> T {
        let q_count = self.grid.len();
        let start = q_count.div_ceil(2); // first node with q ≥ 0
        let mut worst = T::zero();
        for j in start..q_count.saturating_sub(1) {
            let step = self.value(j + 1, m) - self.value(j, m);
            let violation = if m % 2 == 0 { -step } else { step };
            worst = worst.max(violation);
        }
        worst
    }

    fn warn_on_monotonicity_defects(&self) {
        for m in 0..self.m_bands {
            let defect = self.monotonicity_defect(m);
            if defect > fl::<T>(1e-10) {
                log::warn!(
                    "target band {m} bends against the expected direction on [0, 1/2) \
                     (defect {:e})",
                    defect.to_f64().unwrap_or(f64::NAN)
                );
            }
        }
    }

    /// Writes `q,m,eps` rows like a band sheet (band index 0-based).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "q,m,eps")?;
        for j in 0..self.grid.len() {
            for m in 0..self.m_bands {
                writeln!(
                    w,
                    "{},{},{}",
                    fmt17(self.grid.node(j)),
                    m,
                    fmt17(self.value(j, m))
                )?;
            }
        }
        Ok(())
    }
}

/// Gradient of the misfit in coefficient space Y_p, stored in the order
/// (∂_{d_p}, …, ∂_{d_1}, ∂_{c_0}, ∂_{c_1}, …, ∂_{c_p}) — index i carries
/// frequency i − p, negative for sine terms.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector<T: Scalar> {
    p: usize,
    entries: Vec<T>,
}

impl<T: Scalar> GradientVector<T> {
    pub fn zero(p: usize) -> Self {
        Self {
            p,
            entries: vec![T::zero(); 2 * p + 1],
        }
    }

    /// Builds a gradient from its stored entry layout (length must be 2p+1).
    pub fn from_entries(p: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != 2 * p + 1 {
            return Err(Error::InvalidArg(format!(
                "gradient for degree {p} needs {} entries, got {}",
                2 * p + 1,
                entries.len()
            )));
        }
        Ok(Self { p, entries })
    }

    /// Coefficient-space degree p; the vector has 2p+1 entries.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// ∂J/∂c_k, 0 ≤ k ≤ p.
    pub fn entry_c(&self, k: usize) -> T {
        debug_assert!(k <= self.p);
        self.entries[self.p + k]
    }

    /// ∂J/∂d_k, 1 ≤ k ≤ p.
    pub fn entry_d(&self, k: usize) -> T {
        debug_assert!((1..=self.p).contains(&k));
        self.entries[self.p - k]
    }

    /// max(|∂c_k|, |∂d_k|) for one frequency (|∂d_0| taken as 0).
    pub fn max_pair_abs(&self, k: usize) -> T {
        let c = self.entry_c(k).abs();
        if k == 0 {
            c
        } else {
            c.max(self.entry_d(k).abs())
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.entries
    }

    pub fn to_dvector(&self) -> DVector<T> {
        DVector::from_column_slice(&self.entries)
    }

    /// Euclidean norm over all 2p+1 entries.
    pub fn norm(&self) -> T {
        self.entries
            .iter()
            .fold(T::zero(), |a, g| a + *g * *g)
            .sqrt()
    }

    /// Norm of the sub-vector restricted to frequencies ≤ `p_sub`.
    pub fn restricted_norm(&self, p_sub: usize) -> T {
        let p_sub = p_sub.min(self.p);
        self.entries[self.p - p_sub..=self.p + p_sub]
            .iter()
            .fold(T::zero(), |a, g| a + *g * *g)
            .sqrt()
    }
}

/// Stacks a potential into the gradient ordering (d_p, …, d_1, c_0, …, c_p).
pub fn potential_to_vec<T: Scalar>(v: &TrigPotential<T>) -> DVector<T> {
    let p = v.degree();
    DVector::from_fn(2 * p + 1, |i, _| {
        if i < p {
            v.sin_coeff(p - i)
        } else {
            v.cos_coeff(i - p)
        }
    })
}

/// Inverse of [`potential_to_vec`]; `x` must have odd length 2p+1.
pub fn vec_to_potential<T: Scalar>(x: &DVector<T>) -> Result<TrigPotential<T>> {
    if x.len() % 2 == 0 {
        return Err(Error::InvalidArg(format!(
            "coefficient vector needs odd length, got {}",
            x.len()
        )));
    }
    let p = x.len() / 2;
    let c = (0..=p).map(|k| x[p + k]).collect();
    let d = (1..=p).map(|k| x[p - k]).collect();
    TrigPotential::new(c, d)
}

/// Which harmonic a Hellmann–Feynman derivative differentiates against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Harmonic {
    Cos,
    Sin,
}

/// Lag correlations S_k = Σ_j conj(u_j) u_{j−k} for k = 0..=k_max.
fn scan_lags<T: Scalar>(u: &DVector<Cplx<T>>, k_max: usize) -> Vec<Cplx<T>> {
    let n = u.len();
    (0..=k_max)
        .map(|k| {
            let mut s = Cplx::new(T::zero(), T::zero());
            for j in k..n {
                s += u[j].conj() * u[j - k];
            }
            s
        })
        .collect()
}

/// ⟨u, cos(kx) u⟩ or ⟨u, sin(kx) u⟩ for a unit Bloch state in mode
/// coordinates: the real (cos) or imaginary (sin) part of the lag-k
/// correlation. k = 0 with [`Harmonic::Cos`] returns ‖u‖² = 1.
pub fn hf_derivative<T: Scalar>(u: &DVector<Cplx<T>>, k: usize, kind: Harmonic) -> T {
    let s = scan_lags(u, k)[k];
    match kind {
        Harmonic::Cos => s.re,
        Harmonic::Sin => s.im,
    }
}

fn check_compatible<T: Scalar>(sheet: &BandSheet<T>, targets: &TargetBands<T>) -> Result<()> {
    if sheet.grid() != targets.grid() || sheet.band_count() != targets.band_count() {
        return Err(Error::InvalidArg(
            "band sheet and targets disagree on grid or band count".into(),
        ));
    }
    Ok(())
}

/// Misfit J of an already-computed sheet against targets.
pub fn cost_from_sheet<T: Scalar>(sheet: &BandSheet<T>, targets: &TargetBands<T>) -> Result<T> {
    check_compatible(sheet, targets)?;
    let grid = sheet.grid();
    let mut acc = T::zero();
    for j in 0..grid.len() {
        for m in 0..sheet.band_count() {
            let r = targets.value(j, m) - sheet.eps(j, m);
            acc += r * r;
        }
    }
    Ok(acc / fl::<T>(grid.len() as f64))
}

/// Gradient of the misfit of a sheet, reported on frequencies 0..=p_out.
/// Frequencies above the sheet's mode range contribute zero.
pub fn gradient_from_sheet<T: Scalar>(
    sheet: &BandSheet<T>,
    targets: &TargetBands<T>,
    p_out: usize,
) -> Result<GradientVector<T>> {
    check_compatible(sheet, targets)?;
    let grid = sheet.grid();
    let inv_q = T::one() / fl::<T>(grid.len() as f64);
    let mut g = GradientVector::zero(p_out);
    for j in 0..grid.len() {
        for m in 0..sheet.band_count() {
            let w = fl::<T>(2.0) * (sheet.eps(j, m) - targets.value(j, m)) * inv_q;
            let lags = scan_lags(sheet.vector(j, m), p_out);
            g.entries[p_out] += w * lags[0].re;
            for k in 1..=p_out {
                g.entries[p_out + k] += w * lags[k].re;
                g.entries[p_out - k] += w * lags[k].im;
            }
        }
    }
    Ok(g)
}

/// Misfit of `v` against `targets` at cutoff `s`.
pub fn cost<T: Scalar>(v: &TrigPotential<T>, targets: &TargetBands<T>, s: usize) -> Result<T> {
    let sheet = band_sweep(v, targets.grid(), targets.band_count(), s)?;
    cost_from_sheet(&sheet, targets)
}

/// Misfit and gradient of `v` at cutoff `s` from a single band sweep.
/// `p_out` may exceed v's degree to probe unused frequencies.
pub fn cost_and_gradient<T: Scalar>(
    v: &TrigPotential<T>,
    targets: &TargetBands<T>,
    s: usize,
    p_out: usize,
) -> Result<(T, GradientVector<T>)> {
    let sheet = band_sweep(v, targets.grid(), targets.band_count(), s)?;
    Ok((
        cost_from_sheet(&sheet, targets)?,
        gradient_from_sheet(&sheet, targets, p_out)?,
    ))
}

/// Gradient of the misfit of `v` at cutoff `s` on frequencies 0..=p_out.
pub fn gradient<T: Scalar>(
    v: &TrigPotential<T>,
    targets: &TargetBands<T>,
    s: usize,
    p_out: usize,
) -> Result<GradientVector<T>> {
    Ok(cost_and_gradient(v, targets, s, p_out)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::assemble_fiber;
    use crate::oracle::free_band;
    use crate::rng::{seeded_potential, SplitMix64};
    use approx::assert_abs_diff_eq;

    fn unit_random_state(n: usize, seed: u64) -> DVector<Cplx<f64>> {
        let mut rng = SplitMix64::new(seed);
        let mut u = DVector::from_fn(n, |_, _| {
            Cplx::new(rng.next_symmetric(), rng.next_symmetric())
        });
        let norm = u.norm();
        u /= Cplx::new(norm, 0.0);
        u
    }

    #[test]
    fn self_target_has_zero_cost_and_gradient() {
        let v: TrigPotential<f64> = seeded_potential(2, 17);
        let grid = QGrid::uniform(5).unwrap();
        let t = TargetBands::from_potential(&v, &grid, 2, 8).unwrap();
        assert_eq!(cost(&v, &t, 8).unwrap(), 0.0);
        let g = gradient(&v, &t, 8, 2).unwrap();
        assert_eq!(g.as_slice(), &[0.0; 5]);
    }

    #[test]
    fn unit_offset_costs_one_and_steers_c0() {
        let v: TrigPotential<f64> = TrigPotential::zero(1);
        let grid = QGrid::uniform(5).unwrap();
        let t = TargetBands::from_fn(grid, 1, |q, m| free_band(q, m + 1) + 1.0).unwrap();
        let (j, g) = cost_and_gradient(&v, &t, 8, 1).unwrap();
        assert_abs_diff_eq!(j, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.entry_c(0), -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.entry_c(1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.entry_d(1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cost_matches_a_double_loop_recomputation() {
        let vt: TrigPotential<f64> = seeded_potential(1, 3);
        let v: TrigPotential<f64> = TrigPotential::zero(1);
        let grid = QGrid::uniform(25).unwrap();
        let (m_bands, s) = (3, 20);
        let t = TargetBands::from_potential(&vt, &grid, m_bands, s).unwrap();
        let got = cost(&v, &t, s).unwrap();

        let mut want = 0.0;
        for j in 0..grid.len() {
            let (vals, _) = assemble_fiber(&v, grid.node(j), s)
                .eigen_lowest(m_bands)
                .unwrap();
            for m in 0..m_bands {
                want += (t.value(j, m) - vals[m]).powi(2);
            }
        }
        want /= grid.len() as f64;
        assert_abs_diff_eq!(got, want, epsilon = 1e-12 * want.max(1.0));
    }

    #[test]
    fn hf_normalization_and_orthogonality() {
        let u = unit_random_state(9, 5);
        assert_abs_diff_eq!(hf_derivative(&u, 0, Harmonic::Cos), 1.0, epsilon = 1e-12);
        // A pure mode has no lag correlation.
        let mut pure = DVector::from_element(9, Cplx::new(0.0, 0.0));
        pure[4] = Cplx::new(1.0, 0.0);
        assert_eq!(hf_derivative(&pure, 1, Harmonic::Cos), 0.0);
        assert_eq!(hf_derivative(&pure, 1, Harmonic::Sin), 0.0);
    }

    #[test]
    fn hf_matches_a_quadrature_oracle() {
        // u(x) = (2π)^{−1/2} Σ_j u_j e^{i(j−s)x}; compare the lag formula
        // against trapezoidal quadrature of ∫ cos/sin(2x) |u(x)|² dx.
        let s = 4usize;
        let u = unit_random_state(2 * s + 1, 77);
        let nodes = 2048;
        let (mut want_cos, mut want_sin) = (0.0, 0.0);
        for i in 0..nodes {
            let x = 2.0 * std::f64::consts::PI * i as f64 / nodes as f64;
            let mut ux = Cplx::new(0.0, 0.0);
            for j in 0..u.len() {
                let k = j as f64 - s as f64;
                ux += u[j] * Cplx::new(0.0, k * x).exp();
            }
            let density = ux.norm_sqr() / nodes as f64; // 2π/nodes · |u|²/2π
            want_cos += (2.0 * x).cos() * density;
            want_sin += (2.0 * x).sin() * density;
        }
        assert_abs_diff_eq!(hf_derivative(&u, 2, Harmonic::Cos), want_cos, epsilon = 1e-10);
        assert_abs_diff_eq!(hf_derivative(&u, 2, Harmonic::Sin), want_sin, epsilon = 1e-10);
    }

    #[test]
    fn hf_is_phase_invariant() {
        let u = unit_random_state(7, 12);
        let rotated = u.map(|z| z * Cplx::new(0.0, 0.83).exp());
        for k in 0..3 {
            for kind in [Harmonic::Cos, Harmonic::Sin] {
                assert_abs_diff_eq!(
                    hf_derivative(&u, k, kind),
                    hf_derivative(&rotated, k, kind),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let v: TrigPotential<f64> = seeded_potential(3, 8);
        let vt: TrigPotential<f64> = seeded_potential(3, 9);
        let grid = QGrid::uniform(7).unwrap();
        let (m_bands, s, p) = (2, 10, 3);
        let t = TargetBands::from_potential(&vt, &grid, m_bands, s).unwrap();
        let g = gradient(&v, &t, s, p).unwrap();

        let x0 = potential_to_vec(&v);
        let h = 1e-6;
        let scale = g.as_slice().iter().fold(1.0f64, |a, b| a.max(b.abs()));
        for i in 0..2 * p + 1 {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[i] += h;
            xm[i] -= h;
            let jp = cost(&vec_to_potential(&xp).unwrap(), &t, s).unwrap();
            let jm = cost(&vec_to_potential(&xm).unwrap(), &t, s).unwrap();
            let fd = (jp - jm) / (2.0 * h);
            assert!(
                (g.as_slice()[i] - fd).abs() <= 1e-5 * scale,
                "entry {i}: analytic {} vs fd {fd}",
                g.as_slice()[i]
            );
        }
    }

    #[test]
    fn widening_the_gradient_space_keeps_shared_entries() {
        let v: TrigPotential<f64> = seeded_potential(2, 31);
        let vt: TrigPotential<f64> = seeded_potential(2, 32);
        let grid = QGrid::uniform(5).unwrap();
        let t = TargetBands::from_potential(&vt, &grid, 2, 9).unwrap();
        let narrow = gradient(&v, &t, 9, 2).unwrap();
        let wide = gradient(&v, &t, 9, 4).unwrap();
        assert_eq!(narrow.entry_c(0), wide.entry_c(0));
        for k in 1..=2 {
            assert_eq!(narrow.entry_c(k), wide.entry_c(k));
            assert_eq!(narrow.entry_d(k), wide.entry_d(k));
        }
    }

    #[test]
    fn coefficient_vector_round_trips() {
        let v: TrigPotential<f64> = seeded_potential(3, 44);
        let x = potential_to_vec(&v);
        assert_eq!(x.len(), 7);
        assert_eq!(x[3], v.cos_coeff(0));
        assert_eq!(x[0], v.sin_coeff(3));
        assert_eq!(x[6], v.cos_coeff(3));
        assert_eq!(vec_to_potential(&x).unwrap(), v);
        assert!(vec_to_potential(&DVector::<f64>::zeros(4)).is_err());
    }

    #[test]
    fn uneven_targets_are_rejected() {
        let grid: QGrid<f64> = QGrid::uniform(4).unwrap();
        // b(q) = q is odd, not even.
        assert!(matches!(
            TargetBands::from_fn(grid, 1, |q, _| q),
            Err(Error::InvalidArg(_))
        ));
    }

    #[test]
    fn bent_bands_are_flagged_not_rejected() {
        let grid: QGrid<f64> = QGrid::uniform(8).unwrap();
        // −q² decreases on [0, 1/2): wrong direction for the first band.
        let t = TargetBands::from_fn(grid, 1, |q, _| -q * q).unwrap();
        assert!(t.monotonicity_defect(0) > 0.0);
        let good = TargetBands::from_fn(t.grid().clone(), 1, |q, _| q * q).unwrap();
        assert_eq!(good.monotonicity_defect(0), 0.0);
    }

    #[test]
    fn target_csv_mirrors_the_sheet_format() {
        let grid: QGrid<f64> = QGrid::uniform(2).unwrap();
        let t = TargetBands::from_fn(grid, 1, |q, _| q * q).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("q,m,eps\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn sheet_and_potential_constructors_agree() {
        let v: TrigPotential<f64> = seeded_potential(2, 50);
        let grid = QGrid::uniform(6).unwrap();
        let a = TargetBands::from_potential(&v, &grid, 2, 7).unwrap();
        let b = TargetBands::from_sheet(&band_sweep(&v, &grid, 2, 7).unwrap());
        assert_eq!(a, b);
    }
}
