//! Measured frequency-response data, frequency grids, and uniform plant
//! evaluation for rational and measured plants.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::RationalTf;
use crate::ss::{pade_delay, DelayModel};

/// How a transport delay enters frequency-domain evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayMode {
    /// Multiply by e^{-j omega T} (cos - j sin), magnitude exactly 1.
    Exact,
    /// Multiply by the diagonal (k, k) Pade rational.
    Pade(u32),
}

/// CSV header for FRF files. One sample per line, LF or CRLF.
pub const FRF_CSV_HEADER: &str = "omega_rad_s,real,imag";

/// Measured plant FRF samples on a strictly increasing frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FrfData {
    omegas: Vec<f64>,
    values: Vec<Complex64>,
}

impl FrfData {
    pub fn new(omegas: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if omegas.len() < 2 || omegas.len() != values.len() {
            return Err(Error::TooShort);
        }
        for (i, w) in omegas.iter().enumerate() {
            if !w.is_finite() || !values[i].re.is_finite() || !values[i].im.is_finite() {
                return Err(Error::ParseError {
                    line: i + 2,
                    message: "non-finite sample".into(),
                });
            }
            if i > 0 && omegas[i] <= omegas[i - 1] {
                return Err(Error::NonMonotone { line: i + 2 });
            }
        }
        Ok(FrfData { omegas, values })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn band(&self) -> (f64, f64) {
        (self.omegas[0], *self.omegas.last().unwrap())
    }

    /// Load from the CSV schema `omega_rad_s,real,imag`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == FRF_CSV_HEADER => {}
            Some((_, header)) => {
                return Err(Error::ParseError {
                    line: 1,
                    message: format!(
                        "expected header `{FRF_CSV_HEADER}`, got `{}`",
                        header.trim()
                    ),
                })
            }
            None => return Err(Error::TooShort),
        }
        let mut omegas = Vec::new();
        let mut values = Vec::new();
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let mut next = |name: &str| -> Result<f64> {
                fields
                    .next()
                    .ok_or_else(|| Error::ParseError {
                        line: line_no,
                        message: format!("missing field `{name}`"),
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::ParseError {
                        line: line_no,
                        message: format!("bad {name}: {e}"),
                    })
            };
            let w = next("omega_rad_s")?;
            let re = next("real")?;
            let im = next("imag")?;
            if fields.next().is_some() {
                return Err(Error::ParseError {
                    line: line_no,
                    message: "too many fields".into(),
                });
            }
            if let Some(&prev) = omegas.last() {
                if w <= prev {
                    return Err(Error::NonMonotone { line: line_no });
                }
            }
            omegas.push(w);
            values.push(Complex64::new(re, im));
        }
        FrfData::new(omegas, values)
    }

    /// Write the CSV schema. Floats are printed with the shortest
    /// round-trippable representation so load(save(x)) == x bitwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(FRF_CSV_HEADER);
        out.push('\n');
        for (w, v) in self.omegas.iter().zip(&self.values) {
            out.push_str(&format!("{},{},{}\n", w, v.re, v.im));
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Interpolate at `omega`.
    ///
    /// Node hits return the stored sample exactly. Between nodes the real
    /// and imaginary parts are interpolated independently, linear in
    /// log(omega); this avoids phase-unwrap artifacts near resonances at
    /// the cost of some magnitude accuracy on sparse grids.
    pub fn interp(&self, omega: f64) -> Result<Complex64> {
        let (lo, hi) = self.band();
        if omega < lo || omega > hi {
            return Err(Error::OutOfRange { omega, lo, hi });
        }
        match self
            .omegas
            .binary_search_by(|w| w.partial_cmp(&omega).unwrap())
        {
            Ok(i) => Ok(self.values[i]),
            Err(i) => {
                let (w0, w1) = (self.omegas[i - 1], self.omegas[i]);
                let (v0, v1) = (self.values[i - 1], self.values[i]);
                let t = if w0 > 0.0 && w1 > 0.0 {
                    (omega.ln() - w0.ln()) / (w1.ln() - w0.ln())
                } else {
                    (omega - w0) / (w1 - w0)
                };
                Ok(Complex64::new(
                    v0.re + t * (v1.re - v0.re),
                    v0.im + t * (v1.im - v0.im),
                ))
            }
        }
    }
}

/// Plant description: parametric or measured, plus an output transport delay.
#[derive(Debug, Clone)]
pub enum PlantKind {
    Rational(RationalTf),
    Measured(FrfData),
}

#[derive(Debug, Clone)]
pub struct PlantModel {
    pub kind: PlantKind,
    pub delay_t: f64,
}

impl PlantModel {
    pub fn rational(tf: RationalTf, delay_t: f64) -> Result<Self> {
        if delay_t < 0.0 || !delay_t.is_finite() {
            return Err(Error::BadParams(
                "delay time must be finite and >= 0".into(),
            ));
        }
        Ok(PlantModel {
            kind: PlantKind::Rational(tf),
            delay_t,
        })
    }

    pub fn measured(frf: FrfData, delay_t: f64) -> Result<Self> {
        if delay_t < 0.0 || !delay_t.is_finite() {
            return Err(Error::BadParams(
                "delay time must be finite and >= 0".into(),
            ));
        }
        Ok(PlantModel {
            kind: PlantKind::Measured(frf),
            delay_t,
        })
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.kind, PlantKind::Rational(_))
    }

    pub fn rational_tf(&self) -> Option<&RationalTf> {
        match &self.kind {
            PlantKind::Rational(tf) => Some(tf),
            PlantKind::Measured(_) => None,
        }
    }

    /// Measured band, if any.
    pub fn band(&self) -> Option<(f64, f64)> {
        match &self.kind {
            PlantKind::Rational(_) => None,
            PlantKind::Measured(frf) => Some(frf.band()),
        }
    }

    /// Plant response without the delay factor.
    pub fn eval_undelayed(&self, omega: f64) -> Result<Complex64> {
        match &self.kind {
            PlantKind::Rational(tf) => tf.eval(omega),
            PlantKind::Measured(frf) => frf.interp(omega),
        }
    }

    /// Full plant response with the delay applied per `mode`.
    pub fn eval(&self, omega: f64, mode: DelayMode) -> Result<Complex64> {
        let base = self.eval_undelayed(omega)?;
        if self.delay_t == 0.0 {
            return Ok(base);
        }
        let factor = match mode {
            DelayMode::Exact => DelayModel::new(self.delay_t, 0)?.exact_response(omega),
            DelayMode::Pade(k) => pade_delay(self.delay_t, k).eval(omega)?,
        };
        Ok(base * factor)
    }
}

/// Strictly increasing positive analysis frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::BadRange);
        }
        for (i, w) in points.iter().enumerate() {
            if !w.is_finite() || *w <= 0.0 || (i > 0 && points[i] <= points[i - 1]) {
                return Err(Error::BadRange);
            }
        }
        Ok(FrequencyGrid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn band(&self) -> (f64, f64) {
        (self.points[0], *self.points.last().unwrap())
    }

    pub fn points_per_decade(&self) -> f64 {
        let (lo, hi) = self.band();
        (self.points.len() - 1) as f64 / (hi / lo).log10()
    }
}

/// `n` log-spaced points inclusive of both endpoints.
pub fn make_log_grid(omega_min: f64, omega_max: f64, n: usize) -> Result<FrequencyGrid> {
    if !omega_min.is_finite()
        || !omega_max.is_finite()
        || omega_min <= 0.0
        || omega_max <= omega_min
        || n < 2
    {
        return Err(Error::BadRange);
    }
    let l0 = omega_min.ln();
    let l1 = omega_max.ln();
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let w = if i == 0 {
            omega_min
        } else if i == n - 1 {
            omega_max
        } else {
            (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()
        };
        points.push(w);
    }
    FrequencyGrid::from_points(points)
}

/// Log grid at a fixed density in points per decade.
pub fn make_density_grid(omega_min: f64, omega_max: f64, per_decade: f64) -> Result<FrequencyGrid> {
    if !per_decade.is_finite() || per_decade <= 0.0 {
        return Err(Error::BadRange);
    }
    let decades = (omega_max / omega_min).log10();
    let n = ((per_decade * decades).ceil() as usize + 1).max(2);
    make_log_grid(omega_min, omega_max, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::RationalTf;

    fn msd() -> RationalTf {
        RationalTf::from_coeffs(&[900.0], &[900.0, 12.0, 1.0]).unwrap()
    }

    #[test]
    fn parse_minimal() {
        let frf = FrfData::parse("omega_rad_s,real,imag\n1,1,0\n10,0,-1\n").unwrap();
        assert_eq!(frf.len(), 2);
        assert_eq!(frf.values()[1], Complex64::new(0.0, -1.0));
    }

    #[test]
    fn parse_accepts_crlf_and_exponents() {
        let frf =
            FrfData::parse("omega_rad_s,real,imag\r\n1e-1,1.5e0,0\r\n1e1,0,-2.5e-1\r\n").unwrap();
        assert_eq!(frf.omegas(), &[0.1, 10.0]);
        assert_eq!(frf.values()[1], Complex64::new(0.0, -0.25));
    }

    #[test]
    fn parse_rejects_nonmonotone() {
        let r = FrfData::parse("omega_rad_s,real,imag\n10,1,0\n5,0,-1\n");
        assert!(matches!(r, Err(Error::NonMonotone { line: 3 })));
    }

    #[test]
    fn parse_rejects_short_and_malformed() {
        assert!(matches!(
            FrfData::parse("omega_rad_s,real,imag\n1,1,0\n"),
            Err(Error::TooShort)
        ));
        assert!(matches!(
            FrfData::parse("omega_rad_s,real,imag\n1,x,0\n2,1,0\n"),
            Err(Error::ParseError { line: 2, .. })
        ));
        assert!(matches!(
            FrfData::parse("bad header\n1,1,0\n2,1,0\n"),
            Err(Error::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn save_load_roundtrip_bitwise() {
        let g = msd();
        let grid = make_log_grid(1e-1, 1e4, 400).unwrap();
        let values: Vec<Complex64> = grid.points().iter().map(|&w| g.eval(w).unwrap()).collect();
        let frf = FrfData::new(grid.points().to_vec(), values).unwrap();
        let dir = std::env::temp_dir().join(format!("rcstab_frf_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        frf.save(&path).unwrap();
        let back = FrfData::load(&path).unwrap();
        assert_eq!(frf, back);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn interp_hits_nodes_exactly() {
        let g = msd();
        let grid = make_log_grid(1.0, 100.0, 50).unwrap();
        let values: Vec<Complex64> = grid.points().iter().map(|&w| g.eval(w).unwrap()).collect();
        let frf = FrfData::new(grid.points().to_vec(), values.clone()).unwrap();
        for (i, &w) in grid.points().iter().enumerate() {
            assert_eq!(frf.interp(w).unwrap(), values[i]);
        }
        assert!(matches!(frf.interp(0.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn rational_plant_matches_tf_bit_for_bit() {
        let plant = PlantModel::rational(msd(), 0.0).unwrap();
        for &w in &[0.3, 30.0, 77.7, 1234.5] {
            assert_eq!(
                plant.eval(w, DelayMode::Exact).unwrap(),
                msd().eval(w).unwrap()
            );
        }
    }

    #[test]
    fn exact_delay_preserves_magnitude() {
        let plant = PlantModel::rational(msd(), 0.0015).unwrap();
        for &w in &[0.3, 30.0, 500.0] {
            let with = plant.eval(w, DelayMode::Exact).unwrap();
            let without = plant.eval_undelayed(w).unwrap();
            assert!((with.norm() - without.norm()).abs() < 1e-14 * without.norm());
        }
    }

    #[test]
    fn exact_delay_conjugate_symmetry() {
        let plant = PlantModel::rational(msd(), 0.002).unwrap();
        for &w in &[0.7, 12.0, 300.0] {
            let a = plant.eval(w, DelayMode::Exact).unwrap();
            let b = plant.eval(-w, DelayMode::Exact).unwrap();
            assert!((a.conj() - b).norm() < 1e-13 * a.norm().max(1.0));
        }
    }

    #[test]
    fn log_grid_examples() {
        let g = make_log_grid(1.0, 100.0, 3).unwrap();
        assert_eq!(g.points().len(), 3);
        assert!((g.points()[0] - 1.0).abs() < 1e-15);
        assert!((g.points()[1] - 10.0).abs() < 1e-12);
        assert!((g.points()[2] - 100.0).abs() < 1e-13);

        let g = make_log_grid(0.01, 1e6, 1000).unwrap();
        assert_eq!(g.len(), 1000);
        assert_eq!(g.points()[0], 0.01);
        assert_eq!(g.points()[999], 1e6);
        let r0 = g.points()[1] / g.points()[0];
        for i in 1..g.len() - 1 {
            let r = g.points()[i + 1] / g.points()[i];
            assert!((r / r0 - 1.0).abs() < 1e-9);
        }

        assert!(matches!(make_log_grid(1.0, 1.0, 10), Err(Error::BadRange)));
        assert!(matches!(make_log_grid(-1.0, 1.0, 10), Err(Error::BadRange)));
    }

    #[test]
    fn dense_interpolation_tracks_rational_plant() {
        // 200+ points/decade keeps interpolation within 0.5% near the resonance
        let g = msd();
        let grid = make_density_grid(1.0, 1e3, 400.0).unwrap();
        let values: Vec<Complex64> = grid.points().iter().map(|&w| g.eval(w).unwrap()).collect();
        let frf = FrfData::new(grid.points().to_vec(), values).unwrap();
        let probe = make_log_grid(1.5, 900.0, 700).unwrap();
        for &w in probe.points() {
            let exact = g.eval(w).unwrap();
            let interp = frf.interp(w).unwrap();
            assert!(
                (exact - interp).norm() <= 5e-3 * exact.norm(),
                "interp off by more than 0.5% at omega = {w}"
            );
        }
    }
}
