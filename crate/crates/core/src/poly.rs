//! Real-coefficient polynomials and rational transfer functions.
//!
//! Polynomials store coefficients in ascending powers of s. Rational
//! transfer functions are numerator/denominator pairs evaluated on the
//! imaginary axis with complex Horner recursion. Composition never
//! cancels common factors; cancellation detection is a separate concern
//! (see `hbeta::cancellation_check`).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative trim tolerance: coefficients below `EPS_TRIM * max|c|` are dropped
/// from the leading end so scaling a transfer function never changes its degree.
pub const EPS_TRIM: f64 = 1e-12;

/// On-axis pole detection threshold for `RationalTf::eval`.
pub const EPS_DIV: f64 = 1e-9;

/// Hurwitz margin: a polynomial is Hurwitz iff max Re(root) < -EPS_HURWITZ.
pub const EPS_HURWITZ: f64 = 1e-9;

/// Real polynomial, coefficients in ascending powers of s.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Build from ascending coefficients, trimming near-zero leading terms.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Polynomial { coeffs };
        p.trim();
        p
    }

    /// Build without trimming, for exactly-known coefficients whose
    /// magnitudes legitimately span more than the trim window (delay
    /// approximants scale like T^j). Leading zeros are still dropped.
    pub fn new_exact(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// The monomial s.
    pub fn s() -> Self {
        Polynomial {
            coeffs: vec![0.0, 1.0],
        }
    }

    fn trim(&mut self) {
        let max_abs = self.coeffs.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let tol = EPS_TRIM * max_abs;
        while self.coeffs.len() > 1 {
            let last = *self.coeffs.last().unwrap();
            if last.abs() <= tol {
                self.coeffs.pop();
            } else {
                break;
            }
        }
        if self.coeffs.is_empty() || (self.coeffs.len() == 1 && self.coeffs[0].abs() <= tol) {
            self.coeffs = vec![0.0];
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    /// Horner evaluation at an arbitrary complex point.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    /// Evaluation at s = j*omega.
    pub fn eval_jw(&self, omega: f64) -> Complex64 {
        self.eval(Complex64::new(0.0, omega))
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Polynomial::new(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn scale(&self, k: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Roots via balanced companion-matrix eigenvalues.
    ///
    /// Returns an empty list for constants.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::DegenerateResult);
        }
        let n = self.degree();
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.leading();
        // companion matrix of the monic polynomial, subdiagonal ones,
        // last column -c_i / c_n
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            m[(i, n - 1)] = -self.coeffs[i] / lead;
        }
        balance_in_place(&mut m);
        let schur = nalgebra::linalg::Schur::try_new(m, 1e-14, 0).ok_or(Error::EigenFailure)?;
        Ok(schur.complex_eigenvalues().iter().copied().collect())
    }
}

/// Diagonal similarity balancing (powers of two), applied before the
/// eigenvalue sweep so wide coefficient ranges do not wreck accuracy.
fn balance_in_place(m: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c > 0.0 && r > 0.0 {
                let mut f = 1.0;
                let s = c + r;
                let mut c2 = c;
                let mut r2 = r;
                while c2 < r2 / RADIX {
                    c2 *= RADIX;
                    r2 /= RADIX;
                    f *= RADIX;
                }
                while c2 >= r2 * RADIX {
                    c2 /= RADIX;
                    r2 *= RADIX;
                    f /= RADIX;
                }
                if (c2 + r2) < 0.95 * s {
                    converged = false;
                    for j in 0..n {
                        m[(i, j)] /= f;
                    }
                    for j in 0..n {
                        m[(j, i)] *= f;
                    }
                }
            }
        }
        if converged {
            break;
        }
    }
}

/// Hurwitz test via companion eigenvalues.
///
/// Returns `(hurwitz, margin)` where margin is the largest real part over
/// all roots. Constants carry no roots and count as Hurwitz with margin
/// `-inf`.
pub fn is_hurwitz(p: &Polynomial) -> Result<(bool, f64)> {
    let roots = p.roots()?;
    if roots.is_empty() {
        return Ok((true, f64::NEG_INFINITY));
    }
    let margin = roots.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok((margin < -EPS_HURWITZ, margin))
}

/// Rational transfer function num(s)/den(s).
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTf {
    pub num: Polynomial,
    pub den: Polynomial,
}

/// How two transfer functions are combined by [`compose`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComposeKind {
    Series,
    Parallel,
    /// `feedback(a, b)` closes the loop a/(1 + a*b).
    Feedback,
}

impl RationalTf {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DegenerateResult);
        }
        Ok(RationalTf { num, den })
    }

    /// From ascending coefficient slices.
    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        RationalTf::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn constant(k: f64) -> Self {
        RationalTf {
            num: Polynomial::constant(k),
            den: Polynomial::constant(1.0),
        }
    }

    pub fn one() -> Self {
        RationalTf::constant(1.0)
    }

    pub fn zero() -> Self {
        RationalTf {
            num: Polynomial::zero(),
            den: Polynomial::constant(1.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// deg(den) - deg(num); negative for improper inputs (reported, not clamped).
    pub fn relative_degree(&self) -> i64 {
        self.den.degree() as i64 - self.num.degree() as i64
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0
    }

    /// Evaluate at s = j*omega.
    ///
    /// Fails with `PoleOnAxis` when the denominator magnitude falls below
    /// [`EPS_DIV`]: the caller must refine the grid or reject the system.
    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        let d = self.den.eval_jw(omega);
        if d.norm() < EPS_DIV {
            return Err(Error::PoleOnAxis {
                omega,
                magnitude: d.norm(),
            });
        }
        Ok(self.num.eval_jw(omega) / d)
    }

    /// Evaluate at an arbitrary complex point (no pole guard).
    pub fn eval_s(&self, s: Complex64) -> Complex64 {
        self.num.eval(s) / self.den.eval(s)
    }
}

/// Compose two transfer functions. Common factors are never cancelled.
pub fn compose(kind: ComposeKind, a: &RationalTf, b: &RationalTf) -> Result<RationalTf> {
    let (num, den) = match kind {
        ComposeKind::Series => (a.num.mul(&b.num), a.den.mul(&b.den)),
        ComposeKind::Parallel => (a.num.mul(&b.den).add(&b.num.mul(&a.den)), a.den.mul(&b.den)),
        ComposeKind::Feedback => (a.num.mul(&b.den), a.den.mul(&b.den).add(&a.num.mul(&b.num))),
    };
    if den.is_zero() {
        return Err(Error::DegenerateResult);
    }
    RationalTf::new(num, den)
}

pub fn series(a: &RationalTf, b: &RationalTf) -> Result<RationalTf> {
    compose(ComposeKind::Series, a, b)
}

pub fn parallel(a: &RationalTf, b: &RationalTf) -> Result<RationalTf> {
    compose(ComposeKind::Parallel, a, b)
}

pub fn feedback(a: &RationalTf, b: &RationalTf) -> Result<RationalTf> {
    compose(ComposeKind::Feedback, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(num: &[f64], den: &[f64]) -> RationalTf {
        RationalTf::from_coeffs(num, den).unwrap()
    }

    #[test]
    fn trim_is_relative_to_magnitude() {
        let p = Polynomial::new(vec![1e6, 2e6, 1e-8]);
        assert_eq!(p.degree(), 1);
        let q = Polynomial::new(vec![1e-12, 2e-12, 1e-26]);
        assert_eq!(q.degree(), 1);
    }

    #[test]
    fn eval_msd_plant() {
        // 900/(s^2 + 12 s + 900)
        let g = tf(&[900.0], &[900.0, 12.0, 1.0]);
        let dc = g.eval(0.0).unwrap();
        assert!((dc - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let res = g.eval(30.0).unwrap();
        assert!((res - Complex64::new(0.0, -2.5)).norm() < 1e-12);
    }

    #[test]
    fn eval_integrator() {
        let g = tf(&[1.0], &[0.0, 1.0]);
        let v = g.eval(2.0).unwrap();
        assert!((v - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!(matches!(g.eval(0.0), Err(Error::PoleOnAxis { .. })));
    }

    #[test]
    fn compose_examples() {
        let int = tf(&[1.0], &[0.0, 1.0]);
        let s2 = series(&int, &int).unwrap();
        assert_eq!(s2.num.coeffs(), &[1.0]);
        assert_eq!(s2.den.coeffs(), &[0.0, 0.0, 1.0]);

        let a = tf(&[1.0], &[1.0, 1.0]);
        let p = parallel(&a, &RationalTf::one()).unwrap();
        assert_eq!(p.num.coeffs(), &[2.0, 1.0]);
        assert_eq!(p.den.coeffs(), &[1.0, 1.0]);

        let k = 3.0;
        let ks = tf(&[k], &[0.0, 1.0]);
        let f = feedback(&ks, &RationalTf::one()).unwrap();
        assert_eq!(f.num.coeffs(), &[3.0]);
        assert_eq!(f.den.coeffs(), &[3.0, 1.0]);
    }

    #[test]
    fn compose_keeps_common_factors() {
        // (s+1)/(s+2) in series with (s+2)/(s+3): the (s+2) factors stay.
        let a = tf(&[1.0, 1.0], &[2.0, 1.0]);
        let b = tf(&[2.0, 1.0], &[3.0, 1.0]);
        let s = series(&a, &b).unwrap();
        assert_eq!(s.num.degree(), 2);
        assert_eq!(s.den.degree(), 2);
    }

    #[test]
    fn relative_degree_examples() {
        assert_eq!(tf(&[900.0], &[900.0, 12.0, 1.0]).relative_degree(), 2);
        assert_eq!(tf(&[1.0, 1.0], &[2.0, 1.0]).relative_degree(), 0);
        // improper inputs report a negative value
        assert_eq!(tf(&[0.0, 0.0, 1.0], &[1.0, 1.0]).relative_degree(), -1);
    }

    #[test]
    fn hurwitz_basics() {
        let (ok, m) = is_hurwitz(&Polynomial::new(vec![1.0, 1.0])).unwrap();
        assert!(ok);
        assert!((m + 1.0).abs() < 1e-10);

        let (ok, m) = is_hurwitz(&Polynomial::new(vec![-1.0, 0.0, 1.0])).unwrap();
        assert!(!ok);
        assert!((m - 1.0).abs() < 1e-10);
    }

    #[test]
    fn roots_wide_dynamic_range() {
        // (s + 1e-3)(s + 1e3) = s^2 + 1000.001 s + 1
        let p = Polynomial::new(vec![1.0, 1000.001, 1.0]);
        let mut roots = p.roots().unwrap();
        roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((roots[0].re + 1e3).abs() < 1e-6);
        assert!((roots[1].re + 1e-3).abs() < 1e-9);
    }

    #[test]
    fn conjugate_symmetry() {
        let g = tf(&[2.0, 0.5, 1.0], &[900.0, 12.0, 1.0]);
        for &w in &[0.1, 1.0, 17.3, 400.0] {
            let a = g.eval(w).unwrap();
            let b = g.eval(-w).unwrap();
            assert!((a.conj() - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }
}
