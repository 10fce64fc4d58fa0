//! Reset elements, loop composition, and the hybrid closed-loop state space.
//!
//! The loop architecture: the tracking error r - y feeds C1; its output u_1
//! drives the reset element and, in parallel, C3; the summed branch output
//! u_r + C3 u_1 goes through C2 into the plant G (optionally behind a
//! transport delay). The shaping filter Cs filters u_1 into the reset
//! trigger signal e_r. With Cs = 1 the trigger is u_1 itself.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frf::{PlantKind, PlantModel};
use crate::poly::{Polynomial, RationalTf};
use crate::ss::{pade_delay, realize_delay, to_state_space, StateSpace};

/// First-order reset element (A_r, B_r, C_r, D_r) with after-reset value gamma.
///
/// The flow is a first-order lag; on a trigger the single state jumps to
/// gamma times its pre-jump value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResetElement {
    pub a_r: f64,
    pub b_r: f64,
    pub c_r: f64,
    pub d_r: f64,
    pub gamma: f64,
}

/// Classification by pole location and feedthrough.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetElementKind {
    /// Reset integrator: omega_r = 0, D_r = 0.
    CleggIntegrator,
    /// Clegg integrator with a parallel proportional path (D_r != 0).
    Pci,
    /// Generalized first-order reset element: omega_r != 0.
    Gfore,
}

impl ResetElement {
    pub fn from_raw(a_r: f64, b_r: f64, c_r: f64, d_r: f64, gamma: f64) -> Self {
        ResetElement {
            a_r,
            b_r,
            c_r,
            d_r,
            gamma,
        }
    }

    /// GFORE with the conventional scaling B_r = 1, C_r = omega_k.
    pub fn gfore(omega_r: f64, omega_k: f64, d_r: f64, gamma: f64) -> Self {
        ResetElement {
            a_r: -omega_r,
            b_r: 1.0,
            c_r: omega_k,
            d_r,
            gamma,
        }
    }

    /// Clegg integrator with gain omega_k.
    pub fn ci(omega_k: f64, gamma: f64) -> Self {
        ResetElement {
            a_r: 0.0,
            b_r: 1.0,
            c_r: omega_k,
            d_r: 0.0,
            gamma,
        }
    }

    /// Proportional + Clegg integrator: the proportional path rides on D_r.
    pub fn pci(omega_k: f64, parallel_gain: f64, gamma: f64) -> Self {
        ResetElement {
            a_r: 0.0,
            b_r: 1.0,
            c_r: omega_k,
            d_r: parallel_gain,
            gamma,
        }
    }

    pub fn omega_r(&self) -> f64 {
        -self.a_r
    }

    /// omega_k = B_r C_r, positive for every admissible element.
    pub fn omega_k(&self) -> f64 {
        self.b_r * self.c_r
    }

    pub fn kind(&self) -> ResetElementKind {
        if self.omega_r() != 0.0 {
            ResetElementKind::Gfore
        } else if self.d_r != 0.0 {
            ResetElementKind::Pci
        } else {
            ResetElementKind::CleggIntegrator
        }
    }

    /// Base linear transfer function R(s) = omega_k/(s + omega_r) + D_r,
    /// i.e. the element with resets disabled.
    pub fn base_linear_tf(&self) -> RationalTf {
        let wr = self.omega_r();
        let wk = self.omega_k();
        RationalTf::new(
            Polynomial::new(vec![wk + self.d_r * wr, self.d_r]),
            Polynomial::new(vec![wr, 1.0]),
        )
        .expect("denominator s + omega_r is nonzero")
    }
}

/// Everything that defines one reset control loop.
#[derive(Debug, Clone)]
pub struct LoopComponents {
    pub c1: RationalTf,
    pub c2: RationalTf,
    pub c3: RationalTf,
    pub cs: RationalTf,
    pub plant: PlantModel,
    pub reset: ResetElement,
}

impl LoopComponents {
    /// L(s) = C1 C2 G for rational plants, composed without cancellation.
    pub fn loop_gain_tf(&self) -> Option<RationalTf> {
        let g = self.plant.rational_tf()?;
        let l = crate::poly::series(&self.c1, &self.c2).ok()?;
        crate::poly::series(&l, g).ok()
    }

    /// L(s) Cs(s) for rational plants.
    pub fn l_cs_tf(&self) -> Option<RationalTf> {
        let l = self.loop_gain_tf()?;
        crate::poly::series(&l, &self.cs).ok()
    }

    /// Causality checks: C1..Cs proper, rational plants strictly proper.
    pub fn validate_components(&self) -> Result<()> {
        for (name, tf) in [
            ("C1", &self.c1),
            ("C2", &self.c2),
            ("C3", &self.c3),
            ("Cs", &self.cs),
        ] {
            if !tf.is_proper() {
                return Err(Error::ImproperComponent {
                    name,
                    detail: format!("relative degree {}", tf.relative_degree()),
                });
            }
        }
        if let Some(g) = self.plant.rational_tf() {
            if g.relative_degree() < 1 {
                return Err(Error::ImproperComponent {
                    name: "plant",
                    detail: "relative degree must be >= 1".into(),
                });
            }
        }
        Ok(())
    }
}

/// Parameters of the worked controller family: C2 = kp wi (kg + 1/s)
/// ((s/wd + 1)/(s/wt + 1)), C3 = s/((kg s + 1) wi), C1 = Cs = 1, with a
/// GFORE(omega_r, omega_k) reset element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    pub k_p: f64,
    pub omega_i: f64,
    pub omega_d: f64,
    pub omega_t: f64,
    /// Derived from (gamma, omega_r) when absent.
    pub k_g: Option<f64>,
    pub gamma: f64,
    pub d_r: f64,
    pub omega_r: f64,
    pub omega_k: f64,
}

/// kg = 1 / (omega_r |1 + (4j/pi)(1 - gamma)/(1 + gamma)|).
///
/// The magnitude is the describing-function gain correction of the reset
/// element; gamma = 1 collapses it to 1/omega_r.
pub fn compute_kg(gamma: f64, omega_r: f64) -> Result<f64> {
    if !omega_r.is_finite() || omega_r <= 0.0 {
        return Err(Error::BadParams("compute_kg needs omega_r > 0".into()));
    }
    if gamma == -1.0 {
        return Err(Error::BadParams(
            "compute_kg undefined at gamma = -1".into(),
        ));
    }
    let ratio = (1.0 - gamma) / (1.0 + gamma);
    let z = Complex64::new(1.0, 4.0 / std::f64::consts::PI * ratio);
    Ok(1.0 / (omega_r * z.norm()))
}

/// Expand the parametric family into loop components around a given plant.
pub fn build_example_controller(
    params: &ControllerParams,
    plant: PlantModel,
) -> Result<LoopComponents> {
    for (name, v) in [
        ("k_p", params.k_p),
        ("omega_i", params.omega_i),
        ("omega_d", params.omega_d),
        ("omega_t", params.omega_t),
        ("omega_k", params.omega_k),
    ] {
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::BadParams(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if params.omega_r < 0.0 || params.omega_r.is_nan() {
        return Err(Error::BadParams("omega_r must be >= 0".into()));
    }
    if !(params.gamma > -1.0 && params.gamma < 1.0) {
        return Err(Error::BadParams(format!(
            "gamma must lie in (-1, 1), got {}",
            params.gamma
        )));
    }
    let k_g = match params.k_g {
        Some(v) if v > 0.0 && v.is_finite() => v,
        Some(v) => return Err(Error::BadParams(format!("k_g must be positive, got {v}"))),
        None => compute_kg(params.gamma, params.omega_r)?,
    };

    // (kg + 1/s) = (kg s + 1)/s
    let pi_part = RationalTf::new(
        Polynomial::new(vec![1.0, k_g]),
        Polynomial::new(vec![0.0, 1.0]),
    )?;
    let lead = RationalTf::new(
        Polynomial::new(vec![1.0, 1.0 / params.omega_d]),
        Polynomial::new(vec![1.0, 1.0 / params.omega_t]),
    )?;
    let c2 = crate::poly::series(
        &crate::poly::series(&RationalTf::constant(params.k_p * params.omega_i), &pi_part)?,
        &lead,
    )?;
    let c3 = RationalTf::new(
        Polynomial::new(vec![0.0, 1.0]),
        Polynomial::new(vec![params.omega_i, k_g * params.omega_i]),
    )?;
    Ok(LoopComponents {
        c1: RationalTf::one(),
        c2,
        c3,
        cs: RationalTf::one(),
        plant,
        reset: ResetElement::gfore(params.omega_r, params.omega_k, params.d_r, params.gamma),
    })
}

/// How the plant delay enters a state-space realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayRealization {
    /// Ignore the delay (exact-delay studies stay on the FRF path).
    Omit,
    /// Realize the diagonal (k, k) Pade rational in series with the plant.
    Pade(u32),
}

/// Block sizes of the realized loop, in state order
/// [x_r; x_G; x_C2; x_C3; x_Cs; x_C1; x_pade].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n_g: usize,
    pub n_c2: usize,
    pub n_c3: usize,
    pub n_cs: usize,
    pub n_c1: usize,
    pub n_pade: usize,
}

impl StateLayout {
    pub fn n_lti(&self) -> usize {
        self.n_g + self.n_c2 + self.n_c3 + self.n_cs + self.n_c1 + self.n_pade
    }
}

/// The LTI interconnect seen by the reset element: inputs u_r and w = [r d],
/// outputs y, u_1 (reset input) and e_r (trigger signal).
#[derive(Debug, Clone)]
pub struct LtiParts {
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_w: DMatrix<f64>,
    pub c_y: DMatrix<f64>,
    pub c_u: DMatrix<f64>,
    pub d_u: DMatrix<f64>,
    pub c_e: DMatrix<f64>,
    pub d_e: DMatrix<f64>,
}

impl LtiParts {
    /// Transfer u_r -> u_1 with w = 0: C_u (jwI - A)^-1 B_u.
    pub fn ur_to_u1(&self, omega: f64) -> Result<Complex64> {
        siso_response(&self.a, &self.b_u, &self.c_u, omega)
    }

    /// Transfer u_r -> e_r with w = 0.
    pub fn ur_to_er(&self, omega: f64) -> Result<Complex64> {
        siso_response(&self.a, &self.b_u, &self.c_e, omega)
    }
}

fn siso_response(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    omega: f64,
) -> Result<Complex64> {
    let n = a.nrows();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = Complex64::new(-a[(i, j)], 0.0);
        }
        m[(i, i)] += Complex64::new(0.0, omega);
    }
    let rhs = nalgebra::DVector::<Complex64>::from_iterator(
        n,
        b.column(0).iter().map(|&v| Complex64::new(v, 0.0)),
    );
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularResolvent { omega })?;
    let mut y = Complex64::new(0.0, 0.0);
    for j in 0..n {
        y += Complex64::new(c[(0, j)], 0.0) * x[j];
    }
    Ok(y)
}

/// Hybrid closed loop: flow x' = A x + B w, jump x+ = A_rho x on the reset
/// surface e_r = 0 with (I - A_rho) x != 0. State = [x_r; x_l].
#[derive(Debug, Clone)]
pub struct ClosedLoopHybrid {
    pub a_bar: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    pub c_bar: DMatrix<f64>,
    pub ce_bar: DMatrix<f64>,
    pub de_bar: DMatrix<f64>,
    pub cu_bar: DMatrix<f64>,
    pub du_bar: DMatrix<f64>,
    pub reset: ResetElement,
    pub layout: StateLayout,
    pub lti: LtiParts,
}

impl ClosedLoopHybrid {
    pub fn n_states(&self) -> usize {
        self.a_bar.nrows()
    }

    /// Jump matrix diag(gamma, I).
    pub fn a_rho(&self) -> DMatrix<f64> {
        let n = self.n_states();
        let mut m = DMatrix::<f64>::identity(n, n);
        m[(0, 0)] = self.reset.gamma;
        m
    }

    pub fn flow_eigenvalues(&self) -> Result<Vec<Complex64>> {
        let schur = nalgebra::linalg::Schur::try_new(self.a_bar.clone(), 1e-13, 0)
            .ok_or(Error::EigenFailure)?;
        Ok(schur.complex_eigenvalues().iter().copied().collect())
    }
}

struct Signal {
    row: DMatrix<f64>, // 1 x n_l
    ur: f64,
    r: f64,
    d: f64,
}

impl Signal {
    fn zero(n: usize) -> Self {
        Signal {
            row: DMatrix::zeros(1, n),
            ur: 0.0,
            r: 0.0,
            d: 0.0,
        }
    }

    fn scaled(&self, k: f64) -> Self {
        Signal {
            row: &self.row * k,
            ur: self.ur * k,
            r: self.r * k,
            d: self.d * k,
        }
    }

    fn add_block_output(&mut self, c: &DMatrix<f64>, offset: usize) {
        for j in 0..c.ncols() {
            self.row[(0, offset + j)] += c[(0, j)];
        }
    }
}

/// Realize the loop components and assemble the hybrid closed loop.
///
/// Only rational plants are realizable; exact delay is reserved for the
/// FRF analysis path, so any nonzero delay must come in as a Pade order.
pub fn assemble_closed_loop(
    lc: &LoopComponents,
    delay: DelayRealization,
) -> Result<ClosedLoopHybrid> {
    let g_tf = match &lc.plant.kind {
        PlantKind::Rational(tf) => tf,
        PlantKind::Measured(_) => return Err(Error::NotRealizable),
    };
    lc.validate_components()?;

    let g = to_state_space(g_tf)?;
    let c2 = to_state_space(&lc.c2)?;
    let c3 = to_state_space(&lc.c3)?;
    let cs = to_state_space(&lc.cs)?;
    let c1 = to_state_space(&lc.c1)?;
    let pd = match delay {
        DelayRealization::Omit => realize_delay(0.0, 0)?,
        DelayRealization::Pade(k) => realize_delay(lc.plant.delay_t, k)?,
    };

    let layout = StateLayout {
        n_g: g.order(),
        n_c2: c2.order(),
        n_c3: c3.order(),
        n_cs: cs.order(),
        n_c1: c1.order(),
        n_pade: pd.order(),
    };
    let n_l = layout.n_lti();
    let off_g = 0;
    let off_c2 = off_g + layout.n_g;
    let off_c3 = off_c2 + layout.n_c2;
    let off_cs = off_c3 + layout.n_c3;
    let off_c1 = off_cs + layout.n_cs;
    let off_pd = off_c1 + layout.n_c1;

    // scalar signals as affine functions of (x_l, u_r, r, d)
    let mut y = Signal::zero(n_l);
    y.add_block_output(&g.c, off_g); // G strictly proper: no feedthrough to y

    let mut e = y.scaled(-1.0);
    e.r += 1.0;

    let mut u1 = e.scaled(c1.d[(0, 0)]);
    u1.add_block_output(&c1.c, off_c1);

    let mut er = u1.scaled(cs.d[(0, 0)]);
    er.add_block_output(&cs.c, off_cs);

    let mut c3out = u1.scaled(c3.d[(0, 0)]);
    c3out.add_block_output(&c3.c, off_c3);

    let v = Signal {
        row: c3out.row.clone(),
        ur: c3out.ur + 1.0,
        r: c3out.r,
        d: c3out.d,
    };

    let mut up = v.scaled(c2.d[(0, 0)]);
    up.add_block_output(&c2.c, off_c2);
    up.d += 1.0; // input disturbance enters at the plant

    let mut g_in = up.scaled(pd.d[(0, 0)]);
    g_in.add_block_output(&pd.c, off_pd);

    debug_assert_eq!(u1.ur, 0.0, "no feedthrough u_r -> u_1");
    debug_assert_eq!(er.ur, 0.0, "no feedthrough u_r -> e_r");

    let mut a = DMatrix::<f64>::zeros(n_l, n_l);
    let mut b_u = DMatrix::<f64>::zeros(n_l, 1);
    let mut b_w = DMatrix::<f64>::zeros(n_l, 2);

    let mut wire = |ss: &StateSpace, offset: usize, input: &Signal| {
        let n = ss.order();
        for i in 0..n {
            for j in 0..n {
                a[(offset + i, offset + j)] += ss.a[(i, j)];
            }
            let bi = ss.b[(i, 0)];
            for j in 0..n_l {
                a[(offset + i, j)] += bi * input.row[(0, j)];
            }
            b_u[(offset + i, 0)] += bi * input.ur;
            b_w[(offset + i, 0)] += bi * input.r;
            b_w[(offset + i, 1)] += bi * input.d;
        }
    };
    wire(&g, off_g, &g_in);
    wire(&c2, off_c2, &v);
    wire(&c3, off_c3, &u1);
    wire(&cs, off_cs, &u1);
    wire(&c1, off_c1, &e);
    wire(&pd, off_pd, &up);

    let lti = LtiParts {
        a,
        b_u,
        b_w,
        c_y: y.row.clone(),
        c_u: u1.row.clone(),
        d_u: DMatrix::from_row_slice(1, 2, &[u1.r, u1.d]),
        c_e: er.row.clone(),
        d_e: DMatrix::from_row_slice(1, 2, &[er.r, er.d]),
    };

    // lift per the jump-system structure: state [x_r; x_l]
    let r = &lc.reset;
    let n = 1 + n_l;
    let mut a_bar = DMatrix::<f64>::zeros(n, n);
    a_bar[(0, 0)] = r.a_r;
    for j in 0..n_l {
        a_bar[(0, 1 + j)] = r.b_r * lti.c_u[(0, j)];
    }
    for i in 0..n_l {
        a_bar[(1 + i, 0)] = lti.b_u[(i, 0)] * r.c_r;
        for j in 0..n_l {
            a_bar[(1 + i, 1 + j)] = lti.a[(i, j)] + lti.b_u[(i, 0)] * r.d_r * lti.c_u[(0, j)];
        }
    }
    let mut b_bar = DMatrix::<f64>::zeros(n, 2);
    for k in 0..2 {
        b_bar[(0, k)] = r.b_r * lti.d_u[(0, k)];
        for i in 0..n_l {
            b_bar[(1 + i, k)] = lti.b_w[(i, k)] + lti.b_u[(i, 0)] * r.d_r * lti.d_u[(0, k)];
        }
    }
    let mut c_bar = DMatrix::<f64>::zeros(1, n);
    let mut ce_bar = DMatrix::<f64>::zeros(1, n);
    let mut cu_bar = DMatrix::<f64>::zeros(1, n);
    for j in 0..n_l {
        c_bar[(0, 1 + j)] = lti.c_y[(0, j)];
        ce_bar[(0, 1 + j)] = lti.c_e[(0, j)];
        cu_bar[(0, 1 + j)] = lti.c_u[(0, j)];
    }

    Ok(ClosedLoopHybrid {
        a_bar,
        b_bar,
        c_bar,
        ce_bar,
        de_bar: lti.d_e.clone(),
        cu_bar,
        du_bar: lti.d_u.clone(),
        reset: *r,
        layout,
        lti,
    })
}

/// Characteristic polynomial of the base-linear closed loop, i.e. the
/// numerator of 1 + L (R + C3) over the common denominator, with the delay
/// realized per `delay`.
///
/// Polynomial products re-trim their coefficients, which truncates the
/// wide-range Pade terms; with a realized delay prefer the eigenvalues of
/// the assembled flow matrix over this symbolic route.
pub fn base_linear_char_poly(lc: &LoopComponents, delay: DelayRealization) -> Result<Polynomial> {
    let g = lc.plant.rational_tf().ok_or(Error::NotRealizable)?;
    let pade_tf = match delay {
        DelayRealization::Omit => RationalTf::one(),
        DelayRealization::Pade(k) => pade_delay(lc.plant.delay_t, k),
    };
    let l = crate::poly::series(
        &crate::poly::series(&crate::poly::series(&lc.c1, &lc.c2)?, g)?,
        &pade_tf,
    )?;
    let r = lc.reset.base_linear_tf();
    // den_L den_R den_C3 + num_L (num_R den_C3 + num_C3 den_R)
    let den = l.den.mul(&r.den).mul(&lc.c3.den);
    let num = l
        .num
        .mul(&r.num.mul(&lc.c3.den).add(&lc.c3.num.mul(&r.den)));
    Ok(den.add(&num))
}
