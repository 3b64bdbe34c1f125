use num_complex::Complex64;

use crate::profile::{PositionUnit, ProfileSeries};

use super::OracleError;

/// Minimum number of grid steps per Pendellösung length.
pub const MIN_STEPS_PER_PERIOD: f64 = 64.0;

/// Full grids above this size are not stored.
pub const MAX_STORED_RESOLUTION: usize = 2048;

/// Stored field amplitudes on the characteristic grid.
#[derive(Debug, Clone)]
pub struct PdeFields {
    size: usize,
    u_0: Vec<Complex64>,
    u_h: Vec<Complex64>,
}

impl PdeFields {
    /// `U_0` entering cell `(i, j)` across its `S_0 = i·h` edge.
    pub fn u_0(&self, i: usize, j: usize) -> Option<Complex64> {
        (i + j < self.size).then(|| self.u_0[i * self.size + j])
    }

    /// `U_H` entering cell `(i, j)` across its `S_H = j·h` edge.
    pub fn u_h(&self, i: usize, j: usize) -> Option<Complex64> {
        (i + j < self.size).then(|| self.u_h[i * self.size + j])
    }
}

/// Finite-difference solution of the coupled amplitude equations
/// `∂U_0/∂S_0 = -iν U_H`, `∂U_H/∂S_H = -iν U_0` for a delta-slit source on
/// a crystal whose exit face is `S_0 + S_H = 1`.
#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub thickness_ratio: f64,
    pub resolution: usize,
    pub step: f64,
    pub nu: f64,
    /// `(Γ, U_H)` along the exit face, `Γ = S_H - S_0`.
    pub exit_h: Vec<(f64, Complex64)>,
    pub exit_0: Vec<(f64, Complex64)>,
    pub fields: Option<PdeFields>,
}

impl PdeSolution {
    fn profile(&self, label: &str, samples: &[(f64, Complex64)]) -> ProfileSeries {
        let norm = if self.nu > 0.0 { self.nu * self.nu } else { 1.0 };
        ProfileSeries::new(
            label,
            PositionUnit::Dimensionless,
            samples.iter().map(|s| s.0).collect(),
            samples.iter().map(|s| s.1.norm_sqr() / norm).collect(),
        )
        .expect("exit samples are ordered and finite")
    }

    /// `|U_H|²/ν²` against Γ.
    pub fn diffracted_profile(&self) -> ProfileSeries {
        self.profile("pde_diffracted", &self.exit_h)
    }

    /// `|U_0|²/ν²` against Γ; the direct-beam side is `Γ = -1`.
    pub fn transmitted_profile(&self) -> ProfileSeries {
        self.profile("pde_transmitted", &self.exit_0)
    }

    /// Oblique coordinates `(S_0, S_H)` at which `U_H(i, j)` is sampled.
    pub fn u_h_position(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.step, j as f64 * self.step)
    }

    pub fn u_0_position(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.step, (j as f64 + 0.5) * self.step)
    }
}

/// Integrate with `resolution` cells along each characteristic. Only the
/// exit line is kept unless `store_fields` is set, in which case the grid
/// must not exceed [`MAX_STORED_RESOLUTION`].
pub fn tt_integrate_pde(thickness_ratio: f64, resolution: usize, store_fields: bool) -> Result<PdeSolution, OracleError> {
    if !(thickness_ratio >= 0.0 && thickness_ratio.is_finite()) {
        return Err(OracleError::Thickness(thickness_ratio));
    }
    let per_period = if thickness_ratio > 0.0 { resolution as f64 / thickness_ratio } else { f64::INFINITY };
    if resolution == 0 || per_period < MIN_STEPS_PER_PERIOD {
        return Err(OracleError::Resolution { steps_per_period: per_period, min: MIN_STEPS_PER_PERIOD });
    }
    if store_fields && resolution > MAX_STORED_RESOLUTION {
        return Err(OracleError::FieldStorage { resolution, max: MAX_STORED_RESOLUTION });
    }
    let k = resolution;
    let h = 1.0 / (k as f64 + 0.5);
    let nu = std::f64::consts::PI * thickness_ratio;
    let coupling = Complex64::new(0.0, -nu * h);
    let size = k + 1;
    let zero = Complex64::new(0.0, 0.0);
    let mut fields = store_fields.then(|| PdeFields { size, u_0: vec![zero; size * size], u_h: vec![zero; size * size] });
    let mut uh_row = vec![zero; size];
    let mut exit_h = Vec::with_capacity(size);
    let mut exit_0 = Vec::with_capacity(size);
    for j in 0..=k {
        let mut u0 = if j == 0 { Complex64::new(1.0 / h, 0.0) } else { zero };
        for i in 0..=k - j {
            let uh = uh_row[i];
            if let Some(f) = fields.as_mut() {
                f.u_0[i * size + j] = u0;
                f.u_h[i * size + j] = uh;
            }
            if i + j == k {
                exit_h.push(((j as f64 - i as f64 - 0.5) * h, uh));
                exit_0.push(((j as f64 + 0.5 - i as f64) * h, u0));
                break;
            }
            uh_row[i] = uh + coupling * u0;
            u0 += coupling * uh;
        }
    }
    Ok(PdeSolution { thickness_ratio, resolution, step: h, nu, exit_h, exit_0, fields })
}

#[cfg(test)]
mod tests {
    use super::super::bessel::j0;
    use super::super::tt::{tt_intensity_diffracted, tt_intensity_transmitted};
    use super::*;

    fn max_peak_error(p: &ProfileSeries, f: impl Fn(f64) -> f64) -> f64 {
        let peak = p.iter().filter(|s| s.0.abs() <= 0.9).map(|s| f(s.0)).fold(0.0, f64::max);
        p.iter().filter(|s| s.0.abs() <= 0.9).map(|(g, v)| (v - f(g)).abs()).fold(0.0, f64::max) / peak
    }

    #[test]
    fn decoupled_limit() {
        let s = tt_integrate_pde(0.0, 16, true).unwrap();
        assert!(s.exit_h.iter().all(|e| e.1.norm() == 0.0));
        let f = s.fields.as_ref().unwrap();
        for i in 0..=16 {
            assert_eq!(f.u_0(i, 0).unwrap(), Complex64::new(1.0 / s.step, 0.0));
        }
    }

    #[test]
    fn converges_at_first_order() {
        let t = 1.0;
        let mut prev = f64::INFINITY;
        for k in [128, 256, 512] {
            let s = tt_integrate_pde(t, k, false).unwrap();
            let e = max_peak_error(&s.diffracted_profile(), |g| tt_intensity_diffracted(g, t));
            let e0 = max_peak_error(&s.transmitted_profile(), |g| tt_intensity_transmitted(g, t));
            assert!(e < prev && e0 < 1.0, "K={k}: {e} {e0}");
            prev = e;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn interior_field_follows_bessel_solution() {
        let t = 1.0;
        let s = tt_integrate_pde(t, 1024, true).unwrap();
        let f = s.fields.as_ref().unwrap();
        let (i, j) = (300, 400);
        let (s0, sh) = s.u_h_position(i, j);
        let expect = Complex64::new(0.0, -s.nu) * j0(2.0 * s.nu * (s0 * sh).sqrt());
        assert!((f.u_h(i, j).unwrap() - expect).norm() < 0.02 * s.nu);
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(matches!(tt_integrate_pde(4.0, 128, false), Err(OracleError::Resolution { .. })));
        assert!(tt_integrate_pde(1.0, 4096, true).is_err());
    }
}
