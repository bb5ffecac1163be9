//! Closed-form references: free-operator bands and the Kronig–Penney
//! (Dirac-comb) dispersion relation at q = 0.
//!
//! For the comb potential λ Σ_k δ_{2πk}, a first-band Bloch energy ε = ω²
//! at q = 0 satisfies 1 = cos(2πω) + (λ/2)·sin(2πω)/ω. The root in
//! (0, 1/2) is found by bisection, independent of any matrix
//! discretization, and serves to certify the Galerkin solver. As λ → ∞
//! the root ω → 1/2, i.e. the first band flattens onto ε = 1/4.

use crate::bloch::{assemble_fiber, band_sweep, QGrid};
use crate::fourier::MeasurePotential;
use crate::{fl, Error, Result, Scalar};

/// A certified root of the comb dispersion relation at q = 0.
#[derive(Clone, Copy, Debug)]
pub struct DispersionRoot<T: Scalar> {
    /// Comb amplitude λ.
    pub lambda: T,
    /// Quasi-momentum of the relation (always 0 here).
    pub q: T,
    /// Root ω of the dispersion equation, in the supplied bracket.
    pub omega: T,
    /// Band energy ε = ω².
    pub eps: T,
    /// |f(ω)| at the returned root. Bisection runs to a one-ulp bracket,
    /// so this floor scales like λ·ulp(1): ≲ 1e−12 for λ up to ~10³,
    /// a few times that at λ = 10⁴.
    pub residual: T,
}

/// Dispersion defect f(ω) = cos(2πω) + (λ/2)·sin(2πω)/ω − 1; roots are
/// first-band energies ω² of the amplitude-λ comb at q = 0.
pub fn dispersion_defect<T: Scalar>(lambda: T, omega: T) -> T {
    let two_pi_w = T::two_pi() * omega;
    two_pi_w.cos() + lambda / fl::<T>(2.0) * two_pi_w.sin() / omega - T::one()
}

/// Bisects f on `bracket` (which must straddle a sign change) down to a
/// one-ulp interval; for the first band use the bracket (1e−8, 1/2).
pub fn dirac_dispersion_q0<T: Scalar>(lambda: T, bracket: (T, T)) -> Result<DispersionRoot<T>> {
    let (mut a, mut b) = bracket;
    let mut fa = dispersion_defect(lambda, a);
    let fb = dispersion_defect(lambda, b);
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::NonFinite {
            context: "dispersion defect at bracket endpoints",
        });
    }
    if fa * fb > T::zero() {
        return Err(Error::NoSignChange {
            lambda: lambda.to_f64().unwrap_or(f64::NAN),
        });
    }
    // Track the endpoint with the smallest defect; bisection stops once the
    // bracket is resolution-limited.
    let (mut best_w, mut best_f) = if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..200 {
        let mid = (a + b) * fl::<T>(0.5);
        if mid <= a || mid >= b {
            break;
        }
        let fm = dispersion_defect(lambda, mid);
        if fm.abs() < best_f.abs() {
            best_w = mid;
            best_f = fm;
        }
        if fm == T::zero() {
            break;
        }
        if (fa > T::zero()) == (fm > T::zero()) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(DispersionRoot {
        lambda,
        q: T::zero(),
        omega: best_w,
        eps: best_w * best_w,
        residual: best_f.abs(),
    })
}

/// The m-th smallest free-operator eigenvalue (m ≥ 1) at quasi-momentum q:
/// the m-th value of {(k+q)² : k ∈ ℤ}.
pub fn free_band<T: Scalar>(q: T, m: usize) -> T {
    assert!(m >= 1, "bands are numbered from 1");
    let reach = m as i64 + 1;
    let mut vals: Vec<T> = (-reach..=reach)
        .map(|k| {
            let kq = fl::<T>(k as f64) + q;
            kq * kq
        })
        .collect();
    vals.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    vals[m - 1]
}

/// First Galerkin band of the amplitude-λ comb at q = 0 and cutoff s.
pub fn comb_first_band_q0<T: Scalar>(lambda: T, s: usize) -> Result<T> {
    let comb = MeasurePotential::new(lambda, T::zero())?;
    let (vals, _) = assemble_fiber(&comb, T::zero(), s).eigen_lowest(1)?;
    Ok(vals[0])
}

/// max_q |ε_{q,1} − ε_{0,1}| of the amplitude-λ comb over `grid` at cutoff
/// s. Shrinks toward 0 as λ grows (the flat-band limit); equals 1/4 for
/// λ = 0 on a grid containing ±1/2.
pub fn comb_first_band_flatness<T: Scalar>(lambda: T, grid: &QGrid<T>, s: usize) -> Result<T> {
    let comb = MeasurePotential::new(lambda, T::zero())?;
    let eps0 = comb_first_band_q0(lambda, s)?;
    let sheet = band_sweep(&comb, grid, 1, s)?;
    let mut worst = T::zero();
    for j in 0..grid.len() {
        worst = worst.max((sheet.eps(j, 0) - eps0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const BRACKET: (f64, f64) = (1e-8, 0.5);

    // Frozen from an independent bisection of the dispersion relation.
    const OMEGA_1: f64 = 0.3191611311671475;
    const OMEGA_10: f64 = 0.47015664890486975;
    const OMEGA_100: f64 = 0.49683714062263007;
    const OMEGA_1000: f64 = 0.49968189273309327;
    const OMEGA_1E4: f64 = 0.49996817103778235;

    #[test]
    fn dispersion_roots_match_reference_values() {
        for (lambda, want) in [
            (1.0, OMEGA_1),
            (10.0, OMEGA_10),
            (100.0, OMEGA_100),
            (1000.0, OMEGA_1000),
            (1e4, OMEGA_1E4),
        ] {
            let root = dirac_dispersion_q0(lambda, BRACKET).unwrap();
            assert_abs_diff_eq!(root.omega, want, epsilon = 1e-12);
            assert_eq!(root.eps, root.omega * root.omega);
            assert_eq!(root.q, 0.0);
        }
    }

    #[test]
    fn dispersion_residual_is_tiny() {
        // One ulp of ω moves f by about 2πλ·ulp(1), so the achievable
        // residual floor grows linearly in λ.
        for lambda in [1.0, 10.0, 100.0, 1000.0] {
            let root = dirac_dispersion_q0(lambda, BRACKET).unwrap();
            assert!(root.residual <= 1e-12, "λ={lambda}: {}", root.residual);
        }
        let big = dirac_dispersion_q0(1e4, BRACKET).unwrap();
        assert!(big.residual <= 1e-11, "λ=1e4: {}", big.residual);
    }

    #[test]
    fn omega_increases_toward_one_half() {
        let mut prev = 0.0;
        for lambda in [1.0, 10.0, 100.0, 1000.0, 1e4] {
            let w = dirac_dispersion_q0(lambda, BRACKET).unwrap().omega;
            assert!(w > prev && w < 0.5, "λ={lambda}: ω={w}");
            prev = w;
        }
        assert!(prev > 0.4999);
    }

    #[test]
    fn missing_sign_change_is_reported() {
        // λ = 0 makes f ≤ 0 on the whole bracket.
        assert!(matches!(
            dirac_dispersion_q0(0.0, BRACKET),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn free_bands_match_the_shifted_parabolas() {
        assert_abs_diff_eq!(free_band(0.3, 1), 0.09, epsilon = 1e-15);
        assert_abs_diff_eq!(free_band(0.5, 1), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(free_band(0.5, 2), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(free_band(0.0, 2), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn free_bands_agree_with_the_galerkin_solver() {
        use crate::fourier::TrigPotential;
        let v: TrigPotential<f64> = TrigPotential::zero(0);
        let grid: QGrid<f64> = QGrid::uniform(6).unwrap();
        let sheet = band_sweep(&v, &grid, 5, 8).unwrap();
        for j in 0..grid.len() {
            for m in 1..=5 {
                assert_abs_diff_eq!(
                    sheet.eps(j, m - 1),
                    free_band(grid.node(j), m),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn flatness_of_the_free_band_is_a_quarter() {
        let grid: QGrid<f64> = QGrid::uniform(8).unwrap();
        let flat = comb_first_band_flatness(0.0, &grid, 10).unwrap();
        assert_abs_diff_eq!(flat, 0.25, epsilon = 1e-13);
    }

    #[test]
    fn flatness_shrinks_as_lambda_grows() {
        let grid: QGrid<f64> = QGrid::uniform(8).unwrap();
        let f10 = comb_first_band_flatness(10.0, &grid, 30).unwrap();
        let f100 = comb_first_band_flatness(100.0, &grid, 30).unwrap();
        assert!(f100 < f10, "flatness rose: {f100} vs {f10}");
    }

    #[test]
    fn strong_comb_pins_the_band_at_a_quarter() {
        let grid: QGrid<f64> = QGrid::uniform(16).unwrap();
        let flat = comb_first_band_flatness(1e4, &grid, 60).unwrap();
        assert!(flat <= 1e-2, "flatness {flat}");
        let eps0: f64 = comb_first_band_q0(1e4, 60).unwrap();
        assert!((eps0 - 0.25).abs() <= 2e-2, "ε_0 = {eps0}");
        // The discretized band sits near the dispersion-relation energy.
        let disp = dirac_dispersion_q0(1e4, BRACKET).unwrap().eps;
        assert!((eps0 - disp).abs() <= 2e-2);
    }

    #[test]
    fn shifted_comb_band_respects_the_zone_edge_lower_bound() {
        // With shift −B the first band at q = 1/2 stays above 1/4 − B.
        let b = 2.0;
        let comb = MeasurePotential::new(5.0f64, -b).unwrap();
        let (vals, _) = assemble_fiber(&comb, 0.5, 40).eigen_lowest(1).unwrap();
        assert!(vals[0] >= 0.25 - b - 1e-10, "ε = {}", vals[0]);
    }
}
