//! Real 2π-periodic potentials and their Fourier representations.
//!
//! A degree-p trigonometric potential is
//! V(x) = c_0 + Σ_{k=1}^{p} (c_k cos kx + d_k sin kx),
//! equivalently V(x) = Σ_{|n| ≤ p} v_n e^{inx} with v_0 = c_0 and
//! v_{±n} = (c_n ∓ i d_n)/2 for n ≥ 1. V is real exactly when
//! v_{−n} = conj(v_n). The Dirac comb λ Σ_k δ_{2πk} (plus an optional
//! constant shift) is carried as a separate type: its exponential
//! coefficients are λ/(2π) at every frequency and never truncate.

use std::io::{self, BufRead, Write};
use std::path::Path;

use nalgebra::Normed;

use crate::{fl, Cplx, Error, Result, Scalar};

/// Anything that can hand out exponential Fourier coefficients v_n of a real
/// periodic potential (or measure), for assembling Bloch fibers.
pub trait PotentialCoeffs<T: Scalar> {
    /// Coefficient of e^{inx}; zero outside the carrier.
    fn fourier_coeff(&self, n: i64) -> Cplx<T>;

    /// Largest |n| with a nonzero coefficient, or `None` when unbounded
    /// (measures). Used to restrict assembly to the populated band.
    fn max_degree(&self) -> Option<usize>;
}

/// Real trigonometric potential of degree p: coefficients c_0..c_p, d_1..d_p.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPotential<T: Scalar> {
    c: Vec<T>,
    d: Vec<T>,
}

impl<T: Scalar> TrigPotential<T> {
    /// Builds a potential from cosine coefficients c_0..c_p and sine
    /// coefficients d_1..d_p. Requires `c.len() == d.len() + 1` and finite
    /// entries.
    pub fn new(c: Vec<T>, d: Vec<T>) -> Result<Self> {
        if c.is_empty() || c.len() != d.len() + 1 {
            return Err(Error::InvalidPotential(format!(
                "coefficient shape mismatch: {} cosine vs {} sine terms",
                c.len(),
                d.len()
            )));
        }
        if !c.iter().chain(d.iter()).all(|x| x.is_finite()) {
            return Err(Error::InvalidPotential("non-finite coefficient".into()));
        }
        Ok(Self { c, d })
    }

    /// Zero potential of degree p.
    pub fn zero(p: usize) -> Self {
        Self {
            c: vec![T::zero(); p + 1],
            d: vec![T::zero(); p],
        }
    }

    /// Polynomial degree p (largest carried frequency).
    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    /// Cosine coefficient c_k, 0 ≤ k ≤ p.
    pub fn cos_coeff(&self, k: usize) -> T {
        self.c[k]
    }

    /// Sine coefficient d_k, 1 ≤ k ≤ p; d_0 is identically zero.
    pub fn sin_coeff(&self, k: usize) -> T {
        if k == 0 {
            T::zero()
        } else {
            self.d[k - 1]
        }
    }

    pub fn cos_coeffs(&self) -> &[T] {
        &self.c
    }

    pub fn sin_coeffs(&self) -> &[T] {
        &self.d
    }

    /// Pointwise evaluation V(x).
    pub fn evaluate(&self, x: T) -> T {
        let mut v = self.c[0];
        for k in 1..=self.degree() {
            let kx = fl::<T>(k as f64) * x;
            v += self.c[k] * kx.cos() + self.d[k - 1] * kx.sin();
        }
        v
    }

    /// Same potential viewed in degree `p_new ≥ p`; new coefficients are zero.
    ///
    /// # Panics
    /// If `p_new < self.degree()` — shrinking is a caller bug; use
    /// [`truncate`](Self::truncate) to drop modes deliberately.
    pub fn extend(&self, p_new: usize) -> Self {
        assert!(
            p_new >= self.degree(),
            "extend cannot shrink the degree ({} -> {})",
            self.degree(),
            p_new
        );
        let mut c = self.c.clone();
        let mut d = self.d.clone();
        c.resize(p_new + 1, T::zero());
        d.resize(p_new, T::zero());
        Self { c, d }
    }

    /// Drops every mode above `p_new`.
    pub fn truncate(&self, p_new: usize) -> Self {
        let p = p_new.min(self.degree());
        Self {
            c: self.c[..=p].to_vec(),
            d: self.d[..p].to_vec(),
        }
    }

    /// Writes the text format: header `p=<int>`, then one line per frequency
    /// `k c_k d_k` (`d_0` absent on the k = 0 line).
    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "p={}", self.degree())?;
        writeln!(w, "0 {}", num_traits::ToPrimitive::to_f64(&self.c[0]).unwrap())?;
        for k in 1..=self.degree() {
            writeln!(
                w,
                "{} {} {}",
                k,
                num_traits::ToPrimitive::to_f64(&self.c[k]).unwrap(),
                num_traits::ToPrimitive::to_f64(&self.d[k - 1]).unwrap()
            )?;
        }
        Ok(())
    }

    /// Parses the text format written by [`write_text`](Self::write_text).
    /// Blank lines and `#` comments are skipped.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            lines.push((i + 1, t.to_string()));
        }
        let bad = |line: usize, msg: &str| Error::PotentialFile {
            line,
            msg: msg.to_string(),
        };
        let (hline, header) = lines
            .first()
            .ok_or_else(|| bad(1, "empty file"))?
            .clone();
        let p: usize = header
            .strip_prefix("p=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad(hline, "expected header `p=<int>`"))?;
        if lines.len() != p + 2 {
            return Err(bad(hline, &format!("expected {} coefficient lines", p + 1)));
        }
        let mut c = vec![T::zero(); p + 1];
        let mut d = vec![T::zero(); p];
        for (k, (lno, text)) in lines[1..].iter().enumerate() {
            let fields: Vec<&str> = text.split_whitespace().collect();
            let expect = if k == 0 { 2 } else { 3 };
            if fields.len() != expect {
                return Err(bad(*lno, &format!("expected {expect} fields")));
            }
            let idx: usize = fields[0]
                .parse()
                .map_err(|_| bad(*lno, "bad frequency index"))?;
            if idx != k {
                return Err(bad(*lno, &format!("expected frequency {k}")));
            }
            let parse = |f: &str| -> Result<T> {
                let x: f64 = f.parse().map_err(|_| bad(*lno, "bad float"))?;
                T::from_f64(x).ok_or_else(|| bad(*lno, "value out of range"))
            };
            c[k] = parse(fields[1])?;
            if k > 0 {
                d[k - 1] = parse(fields[2])?;
            }
        }
        Self::new(c, d)
    }

    /// Writes the potential to a file in the text format.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_text(&mut f)
    }

    /// Reads a potential from a text-format file.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let f = io::BufReader::new(std::fs::File::open(path)?);
        Self::read_text(f)
    }
}

impl<T: Scalar> PotentialCoeffs<T> for TrigPotential<T> {
    fn fourier_coeff(&self, n: i64) -> Cplx<T> {
        let k = n.unsigned_abs() as usize;
        if k > self.degree() {
            return Cplx::new(T::zero(), T::zero());
        }
        if k == 0 {
            return Cplx::new(self.c[0], T::zero());
        }
        let half = fl::<T>(0.5);
        let re = self.c[k] * half;
        let im = self.d[k - 1] * half;
        // v_{+k} = (c_k − i d_k)/2, v_{−k} = conj(v_{+k}).
        if n > 0 {
            Cplx::new(re, -im)
        } else {
            Cplx::new(re, im)
        }
    }

    fn max_degree(&self) -> Option<usize> {
        Some(self.degree())
    }
}

/// Exponential Fourier coefficients v_{−p}..v_{p}.
///
/// The container does not enforce the Hermitian symmetry of a real potential;
/// [`exp_to_trig`] checks it and rejects corrupted data.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpCoeffs<T: Scalar> {
    v: Vec<Cplx<T>>,
}

impl<T: Scalar> ExpCoeffs<T> {
    /// Builds from coefficients in frequency order −p..p (odd length).
    pub fn new(v: Vec<Cplx<T>>) -> Result<Self> {
        if v.len() % 2 == 0 || v.is_empty() {
            return Err(Error::InvalidPotential(format!(
                "exponential coefficients need odd length, got {}",
                v.len()
            )));
        }
        if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidPotential("non-finite coefficient".into()));
        }
        Ok(Self { v })
    }

    pub fn degree(&self) -> usize {
        (self.v.len() - 1) / 2
    }

    /// Coefficient v_n (zero outside |n| ≤ p).
    pub fn coeff(&self, n: i64) -> Cplx<T> {
        let p = self.degree() as i64;
        if n.abs() > p {
            Cplx::new(T::zero(), T::zero())
        } else {
            self.v[(n + p) as usize]
        }
    }

    /// Largest deviation from the real-potential symmetry v_{−n} = conj(v_n),
    /// including |Im v_0|.
    pub fn hermitian_defect(&self) -> T {
        let p = self.degree() as i64;
        let mut worst = self.coeff(0).im.abs();
        for n in 1..=p {
            let dev = (self.coeff(-n) - self.coeff(n).conj()).norm();
            worst = worst.max(dev);
        }
        worst
    }
}

impl<T: Scalar> PotentialCoeffs<T> for ExpCoeffs<T> {
    fn fourier_coeff(&self, n: i64) -> Cplx<T> {
        self.coeff(n)
    }

    fn max_degree(&self) -> Option<usize> {
        Some(self.degree())
    }
}

/// Dirac comb λ Σ_k δ_{2πk} plus a constant shift: the Kronig–Penney
/// potential. Its exponential coefficients are λ/(2π) at every frequency
/// (plus the shift at n = 0), so fibers fill densely regardless of s.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurePotential<T: Scalar> {
    lambda: T,
    shift: T,
}

impl<T: Scalar> MeasurePotential<T> {
    /// Comb of amplitude `lambda ≥ 0` shifted by the constant `shift`.
    pub fn new(lambda: T, shift: T) -> Result<Self> {
        if !(lambda.is_finite() && shift.is_finite()) {
            return Err(Error::InvalidPotential("non-finite comb parameter".into()));
        }
        if lambda < T::zero() {
            return Err(Error::InvalidPotential(format!(
                "comb amplitude must be nonnegative, got {}",
                lambda.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self { lambda, shift })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn shift(&self) -> T {
        self.shift
    }
}

impl<T: Scalar> PotentialCoeffs<T> for MeasurePotential<T> {
    fn fourier_coeff(&self, n: i64) -> Cplx<T> {
        let base = self.lambda / T::two_pi();
        let re = if n == 0 { base + self.shift } else { base };
        Cplx::new(re, T::zero())
    }

    fn max_degree(&self) -> Option<usize> {
        None
    }
}

/// Trigonometric → exponential coefficients: v_0 = c_0,
/// v_{±n} = (c_n ∓ i d_n)/2.
pub fn trig_to_exp<T: Scalar>(pot: &TrigPotential<T>) -> ExpCoeffs<T> {
    let p = pot.degree() as i64;
    let v = (-p..=p).map(|n| pot.fourier_coeff(n)).collect();
    ExpCoeffs::new(v).expect("conversion preserves finiteness")
}

/// Exponential → trigonometric coefficients. Rejects input that fails the
/// Hermitian symmetry of a real potential beyond rounding noise.
pub fn exp_to_trig<T: Scalar>(exp: &ExpCoeffs<T>) -> Result<TrigPotential<T>> {
    let p = exp.degree();
    let scale = (0..=p as i64)
        .map(|n| exp.coeff(n).norm())
        .fold(T::one(), |a, b| a.max(b));
    let tol = T::default_epsilon() * fl::<T>(256.0) * scale;

    let im0 = exp.coeff(0).im.abs();
    if im0 > tol {
        return Err(Error::NonHermitian {
            index: 0,
            deviation: im0.to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut c = vec![T::zero(); p + 1];
    let mut d = vec![T::zero(); p];
    c[0] = exp.coeff(0).re;
    let two = fl::<T>(2.0);
    for n in 1..=p {
        let pos = exp.coeff(n as i64);
        let dev = (exp.coeff(-(n as i64)) - pos.conj()).norm();
        if dev > tol {
            return Err(Error::NonHermitian {
                index: n,
                deviation: dev.to_f64().unwrap_or(f64::NAN),
            });
        }
        c[n] = two * pos.re;
        d[n - 1] = -two * pos.im;
    }
    TrigPotential::new(c, d)
}
