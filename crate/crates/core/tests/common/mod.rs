//! Shared fixtures: the mass-spring-damper loop (zeta = 0.2, omega_n = 30)
//! with the worked controller family.

use num_complex::Complex64;

use rcstab_core::frf::{make_density_grid, FrequencyGrid, FrfData, PlantModel};
use rcstab_core::poly::RationalTf;
use rcstab_core::reset::{
    build_example_controller, ControllerParams, LoopComponents, ResetElement,
};

pub const MSD_OMEGA_R: f64 = 42.66;
pub const MSD_OMEGA_K: f64 = 42.66;

pub fn msd_tf() -> RationalTf {
    // 900 / (s^2 + 12 s + 900)
    RationalTf::from_coeffs(&[900.0], &[900.0, 12.0, 1.0]).unwrap()
}

pub fn msd_params() -> ControllerParams {
    ControllerParams {
        k_p: 6.5,
        omega_i: 38.71,
        omega_d: 50.0,
        omega_t: 450.0,
        k_g: None,
        gamma: 0.0,
        d_r: 0.0,
        omega_r: MSD_OMEGA_R,
        omega_k: MSD_OMEGA_K,
    }
}

pub fn msd_lc(delay_t: f64) -> LoopComponents {
    let plant = PlantModel::rational(msd_tf(), delay_t).unwrap();
    build_example_controller(&msd_params(), plant).unwrap()
}

/// Same loop with the reset element swapped for a reset integrator.
pub fn msd_ci_lc(delay_t: f64) -> LoopComponents {
    let mut lc = msd_lc(delay_t);
    lc.reset = ResetElement::ci(MSD_OMEGA_K, 0.0);
    lc
}

/// The rational plant sampled as measured data across the analysis band.
pub fn msd_measured_lc(per_decade: f64) -> LoopComponents {
    let tf = msd_tf();
    let grid = make_density_grid(1e-2, 1e6, per_decade).unwrap();
    let values: Vec<Complex64> = grid.points().iter().map(|&w| tf.eval(w).unwrap()).collect();
    let frf = FrfData::new(grid.points().to_vec(), values).unwrap();
    let mut lc = msd_lc(0.0);
    lc.plant = PlantModel::measured(frf, 0.0).unwrap();
    lc
}

/// Default analysis grid: 400 points per decade over [1e-2, 1e6] rad/s.
pub fn default_grid() -> FrequencyGrid {
    make_density_grid(1e-2, 1e6, 400.0).unwrap()
}
