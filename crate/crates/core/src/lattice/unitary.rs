use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Parameters of one scatterer.
///
/// `gamma` is the reflection strength, `zeta` the off-diagonal phase tied to
/// a lattice translation and `xi` a diagonal phase with no physical effect.
/// Both phases default to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitaryParams {
    pub gamma: f64,
    #[serde(default)]
    pub zeta: f64,
    #[serde(default)]
    pub xi: f64,
}

impl UnitaryParams {
    pub fn new(gamma: f64) -> Self {
        debug_assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&gamma));
        Self { gamma, zeta: 0.0, xi: 0.0 }
    }

    pub fn with_phases(gamma: f64, zeta: f64, xi: f64) -> Self {
        Self { gamma, zeta, xi }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=std::f64::consts::FRAC_PI_2).contains(&self.gamma)
            && self.zeta.is_finite()
            && self.xi.is_finite()
    }

    pub fn coefficients(&self) -> NodeCoefficients {
        let (s, c) = unitary_sin_cos(self.gamma);
        NodeCoefficients {
            t_a: Complex64::from_polar(c, self.xi),
            r_b: Complex64::from_polar(s, self.zeta),
            r_a: -Complex64::from_polar(s, -self.zeta),
            t_b: Complex64::from_polar(c, -self.xi),
        }
    }
}

/// Largest relative change [`unitary_sin_cos`] makes to either factor.
pub const UNITARY_ADJUST_LIMIT: f64 = 1e-11;

/// `(sin γ, cos γ)` adjusted toward `sin² + cos² = 1`: the larger factor
/// moves by at most one ulp and the smaller one is re-solved from it,
/// within [`UNITARY_ADJUST_LIMIT`]. Plain `sin_cos` leaves a defect of up
/// to ~1e-16 that compounds once per column.
pub fn unitary_sin_cos(gamma: f64) -> (f64, f64) {
    let (s0, c0) = gamma.sin_cos();
    if s0 == 0.0 || c0 <= 0.0 || unit_defect(s0, c0) == 0.0 {
        return (s0, c0);
    }
    let swap = s0 > c0;
    let (big0, small0) = if swap { (s0, c0) } else { (c0, s0) };
    let mut best = (unit_defect(small0, big0).abs(), f64::INFINITY, small0, big0);
    for db in -1i32..=1 {
        let big = nudge(big0, db);
        if big > 1.0 {
            continue;
        }
        let p = big * big;
        let rest = (1.0 - p) - big.mul_add(big, -p);
        let lim = UNITARY_ADJUST_LIMIT * small0;
        let guess = rest.max(0.0).sqrt().clamp(small0 - lim, small0 + lim);
        for ds in -2i32..=2 {
            let small = nudge(guess, ds);
            if (small - small0).abs() > lim {
                continue;
            }
            let d = unit_defect(small, big).abs();
            let shift = (small - small0).abs() / small0 + (big - big0).abs() / big0;
            if d < best.0 || (d == best.0 && shift < best.1) {
                best = (d, shift, small, big);
            }
        }
    }
    let (small, big) = (best.2, best.3);
    if swap { (big, small) } else { (small, big) }
}

fn nudge(x: f64, ulps: i32) -> f64 {
    if x <= 0.0 {
        return x;
    }
    f64::from_bits((x.to_bits() as i64 + ulps as i64) as u64)
}

/// `s² + c² - 1` with the products' rounding errors recovered by FMA.
fn unit_defect(s: f64, c: f64) -> f64 {
    let (big, small) = if c >= s { (c, s) } else { (s, c) };
    let (pb, ps) = (big * big, small * small);
    let (eb, es) = (big.mul_add(big, -pb), small.mul_add(small, -ps));
    ((pb - 1.0) + ps) + eb + es
}

/// Routing coefficients of a node: `t_a, r_b` feed the up-going output,
/// `r_a, t_b` the down-going output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCoefficients {
    pub t_a: Complex64,
    pub r_b: Complex64,
    pub r_a: Complex64,
    pub t_b: Complex64,
}

impl NodeCoefficients {
    pub const TRANSPARENT: Self = Self {
        t_a: Complex64::new(1.0, 0.0),
        r_b: Complex64::new(0.0, 0.0),
        r_a: Complex64::new(0.0, 0.0),
        t_b: Complex64::new(1.0, 0.0),
    };

    #[inline]
    pub fn apply(&self, alpha: Complex64, beta: Complex64) -> (Complex64, Complex64) {
        (self.t_a * alpha + self.r_b * beta, self.r_a * alpha + self.t_b * beta)
    }
}

/// The node's 2×2 matrix `[[t_a, r_b], [r_a, t_b]]`. With zero phases this
/// is `[[cos γ, sin γ], [-sin γ, cos γ]]`.
pub fn node_unitary(params: &UnitaryParams) -> [[Complex64; 2]; 2] {
    let c = params.coefficients();
    [[c.t_a, c.r_b], [c.r_a, c.t_b]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuned_pair_is_closer_to_unitary() {
        for g in [1e-6, 0.01, std::f64::consts::PI / 100.0, 0.3, std::f64::consts::FRAC_PI_4, 1.2] {
            let (s0, c0) = f64::sin_cos(g);
            let (s, c) = unitary_sin_cos(g);
            assert!(unit_defect(s, c).abs() <= unit_defect(s0, c0).abs());
            assert!((s / s0 - 1.0).abs() <= UNITARY_ADJUST_LIMIT && (c / c0 - 1.0).abs() <= UNITARY_ADJUST_LIMIT);
            if g >= 0.01 {
                assert!(unit_defect(s, c).abs() <= 2.0 * s.min(c) * f64::EPSILON * s.min(c), "{g}");
            }
        }
        assert_eq!(unitary_sin_cos(0.0), (0.0, 1.0));
    }
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn close(a: Complex64, re: f64) -> bool {
        (a - Complex64::new(re, 0.0)).norm() < 1e-15
    }

    #[test]
    fn identity_at_zero() {
        let u = node_unitary(&UnitaryParams::new(0.0));
        assert!(close(u[0][0], 1.0) && close(u[0][1], 0.0) && close(u[1][0], 0.0) && close(u[1][1], 1.0));
    }

    #[test]
    fn quarter_turn_and_pure_reflection() {
        let h = std::f64::consts::SQRT_2 / 2.0;
        let u = node_unitary(&UnitaryParams::new(FRAC_PI_4));
        assert!(close(u[0][0], h) && close(u[0][1], h) && close(u[1][0], -h) && close(u[1][1], h));
        let r = node_unitary(&UnitaryParams::new(FRAC_PI_2));
        assert!(close(r[0][0], 0.0) && close(r[0][1], 1.0) && close(r[1][0], -1.0) && close(r[1][1], 0.0));
    }

    #[test]
    fn normalization_conditions_hold_with_phases() {
        for &(g, z, x) in &[(0.3, 0.0, 0.0), (1.1, 0.7, -0.4), (0.01, -2.0, 3.0)] {
            let c = UnitaryParams::with_phases(g, z, x).coefficients();
            assert!((c.t_a.norm_sqr() + c.r_a.norm_sqr() - 1.0).abs() < 1e-15);
            assert!((c.t_b.norm_sqr() + c.r_b.norm_sqr() - 1.0).abs() < 1e-15);
            assert!((c.t_a * c.r_b.conj() + c.r_a * c.t_b.conj()).norm() < 1e-15);
        }
    }
}
