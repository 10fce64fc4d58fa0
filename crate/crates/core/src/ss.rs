//! State-space realizations and rational delay approximants.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::{Polynomial, RationalTf};

/// Real state-space quadruple (A, B, C, D).
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n
            || b.nrows() != n
            || c.ncols() != n
            || d.nrows() != c.nrows()
            || d.ncols() != b.ncols()
        {
            return Err(Error::BadParams(
                "inconsistent state-space dimensions".into(),
            ));
        }
        Ok(StateSpace { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Frequency response C (jwI - A)^-1 B + D for the SISO case.
    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        let n = self.order();
        if n == 0 {
            return Ok(Complex64::new(self.d[(0, 0)], 0.0));
        }
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(-self.a[(i, j)], 0.0);
            }
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        let b = DVector::<Complex64>::from_iterator(
            n,
            self.b.column(0).iter().map(|&v| Complex64::new(v, 0.0)),
        );
        let x = m.lu().solve(&b).ok_or(Error::SingularResolvent { omega })?;
        let mut y = Complex64::new(self.d[(0, 0)], 0.0);
        for j in 0..n {
            y += Complex64::new(self.c[(0, j)], 0.0) * x[j];
        }
        Ok(y)
    }
}

/// Controllable canonical realization of a proper transfer function.
///
/// Strictly proper inputs get D = 0; biproper inputs are split into a
/// feedthrough plus the strictly proper residual.
pub fn to_state_space(tf: &RationalTf) -> Result<StateSpace> {
    let rd = tf.relative_degree();
    if rd < 0 {
        return Err(Error::ImproperTf {
            num_deg: tf.num.degree(),
            den_deg: tf.den.degree(),
        });
    }
    let n = tf.den.degree();
    let lead = tf.den.leading();
    // monic denominator coefficients a_0 .. a_{n-1}
    let den: Vec<f64> = tf.den.coeffs().iter().map(|c| c / lead).collect();
    let num: Vec<f64> = tf.num.coeffs().iter().map(|c| c / lead).collect();

    let d_value = if tf.num.degree() == n && !tf.num.is_zero() {
        num[n]
    } else {
        0.0
    };

    // strictly proper residual num - D * den
    let mut res = vec![0.0; n.max(1)];
    for (i, item) in res.iter_mut().enumerate().take(n) {
        let nc = num.get(i).copied().unwrap_or(0.0);
        *item = nc - d_value * den[i];
    }

    if n == 0 {
        return StateSpace::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 1),
            DMatrix::zeros(1, 0),
            DMatrix::from_element(1, 1, d_value),
        );
    }

    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -den[j];
    }
    let mut b = DMatrix::<f64>::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    let mut c = DMatrix::<f64>::zeros(1, n);
    for j in 0..n {
        c[(0, j)] = res[j];
    }
    StateSpace::new(a, b, c, DMatrix::from_element(1, 1, d_value))
}

/// Pure transport delay of `t` seconds with a chosen rational approximation order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub t: f64,
    pub pade_order: u32,
}

impl DelayModel {
    pub fn new(t: f64, pade_order: u32) -> Result<Self> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::BadParams(
                "delay time must be finite and >= 0".into(),
            ));
        }
        Ok(DelayModel { t, pade_order })
    }

    /// Exact frequency response e^{-j omega T}; magnitude is exactly 1.
    pub fn exact_response(&self, omega: f64) -> Complex64 {
        let x = omega * self.t;
        Complex64::new(x.cos(), -x.sin())
    }

    pub fn to_tf(&self) -> RationalTf {
        pade_delay(self.t, self.pade_order)
    }
}

fn pade_coefficients(k: usize) -> Vec<f64> {
    // c_0 = 1, c_{j+1} = c_j * (k - j) / ((2k - j)(j + 1))
    let mut c = vec![0.0f64; k + 1];
    c[0] = 1.0;
    for j in 0..k {
        c[j + 1] = c[j] * (k - j) as f64 / (((2 * k - j) * (j + 1)) as f64);
    }
    c
}

/// Diagonal (k, k) Pade approximant of e^{-Ts}.
///
/// All poles sit strictly in the left half plane and |approx(jw)| = 1 for
/// every omega since the numerator is the denominator's paraconjugate.
/// T = 0 collapses to the identity for any order. The coefficients scale
/// like T^j and are kept exactly: trimming them would truncate the
/// approximant.
pub fn pade_delay(t: f64, k: u32) -> RationalTf {
    if t == 0.0 || k == 0 {
        return RationalTf::one();
    }
    let k = k as usize;
    let c = pade_coefficients(k);
    let mut num = vec![0.0f64; k + 1];
    let mut den = vec![0.0f64; k + 1];
    let mut tp = 1.0;
    for j in 0..=k {
        num[j] = c[j] * tp * if j % 2 == 0 { 1.0 } else { -1.0 };
        den[j] = c[j] * tp;
        tp *= t;
    }
    RationalTf::new(Polynomial::new_exact(num), Polynomial::new_exact(den))
        .expect("pade denominator is nonzero")
}

/// State-space realization of the (k, k) Pade delay, built in the
/// time-normalized variable x = T s and rescaled. The raw companion form of
/// the unnormalized polynomial mixes coefficient scales T^j across the
/// matrix; this keeps entries near 1/c_k instead.
pub fn realize_delay(t: f64, k: u32) -> Result<StateSpace> {
    if t == 0.0 || k == 0 {
        return StateSpace::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 1),
            DMatrix::zeros(1, 0),
            DMatrix::from_element(1, 1, 1.0),
        );
    }
    let ku = k as usize;
    let c = pade_coefficients(ku);
    let num: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
        .collect();
    let normalized = RationalTf::new(Polynomial::new_exact(num), Polynomial::new_exact(c))?;
    let ss = to_state_space(&normalized)?;
    // H(s) = H'(T s): A = A'/T, B = B'/T, C = C'
    Ok(StateSpace {
        a: ss.a / t,
        b: ss.b / t,
        c: ss.c,
        d: ss.d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly;

    #[test]
    fn realize_first_order() {
        let tf = RationalTf::from_coeffs(&[1.0], &[2.0, 1.0]).unwrap();
        let ss = to_state_space(&tf).unwrap();
        assert_eq!(ss.order(), 1);
        assert!((ss.a[(0, 0)] + 2.0).abs() < 1e-15);
        assert!((ss.b[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((ss.c[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(ss.d[(0, 0)], 0.0);
    }

    #[test]
    fn realize_biproper_split() {
        // (s+1)/(s+3) = 1 - 2/(s+3)
        let tf = RationalTf::from_coeffs(&[1.0, 1.0], &[3.0, 1.0]).unwrap();
        let ss = to_state_space(&tf).unwrap();
        assert_eq!(ss.d[(0, 0)], 1.0);
        assert!((ss.c[(0, 0)] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn realize_rejects_improper() {
        let tf = RationalTf::from_coeffs(&[0.0, 0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(matches!(to_state_space(&tf), Err(Error::ImproperTf { .. })));
    }

    #[test]
    fn realization_matches_direct_eval() {
        // random degree-4 transfer functions, FRF match on a wide grid
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let num: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut den: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            if den[4].abs() < 0.2 {
                den[4] = 1.0;
            }
            let tf = RationalTf::from_coeffs(&num, &den).unwrap();
            if tf.den.degree() != 4 {
                continue;
            }
            let ss = to_state_space(&tf).unwrap();
            for i in 0..100 {
                let w = 1e-2 * (10f64).powf(4.0 * i as f64 / 99.0);
                let (Ok(direct), Ok(real)) = (tf.eval(w), ss.eval(w)) else {
                    continue;
                };
                assert!(
                    (direct - real).norm() <= 1e-10 * direct.norm().max(1.0),
                    "mismatch at omega = {w}: {direct} vs {real}"
                );
            }
        }
    }

    #[test]
    fn pade_first_order_canonical() {
        let tf = pade_delay(0.0015, 1);
        assert_eq!(tf.num.coeffs(), &[1.0, -0.00075]);
        assert_eq!(tf.den.coeffs(), &[1.0, 0.00075]);
    }

    #[test]
    fn pade_zero_delay_is_identity() {
        for k in [1, 3, 7] {
            assert_eq!(pade_delay(0.0, k), RationalTf::one());
        }
    }

    #[test]
    fn pade_phase_tracks_exact_delay() {
        let t = 0.0015;
        let tf = pade_delay(t, 3);
        let w = 100.0;
        let v = tf.eval(w).unwrap();
        let exact = Complex64::new(0.0, -w * t).exp();
        assert!((v - exact).norm() < 1e-6);
        assert!((v.arg() - (-w * t)).abs() < 1e-6);
    }

    #[test]
    fn pade_unit_magnitude_and_stable_poles() {
        for k in [1u32, 2, 5, 10] {
            let tf = pade_delay(0.01, k);
            for i in 0..50 {
                let w = 1e-1 * (10f64).powf(5.0 * i as f64 / 49.0);
                assert!((tf.eval(w).unwrap().norm() - 1.0).abs() < 1e-12);
            }
            let (hurwitz, _) = poly::is_hurwitz(&tf.den).unwrap();
            assert!(hurwitz, "pade({k}) has an unstable pole");
        }
    }
}
