//! Bessel functions of the first kind, orders 0 and 1.

/// `J₀(x)`.
pub fn j0(x: f64) -> f64 {
    libm::j0(x)
}

/// `J₁(x)`.
pub fn j1(x: f64) -> f64 {
    libm::j1(x)
}

/// First positive zero of `J₀`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_values() {
        let table = [
            (1.0, 0.765_197_686_557_966_6, 0.440_050_585_744_933_5),
            (10.0, -0.245_935_764_451_348_3, 0.043_472_746_168_861_44),
        ];
        for (x, a, b) in table {
            assert!((j0(x) - a).abs() < 1e-15);
            assert!((j1(x) - b).abs() < 1e-15);
        }
        assert!(j0(J0_FIRST_ZERO).abs() < 1e-15);
        assert!(j0(5.520_078_110_286_311).abs() < 1e-15);
        assert!(j1(3.831_705_970_207_512).abs() < 1e-15);
        assert_eq!(j0(0.0), 1.0);
        assert_eq!(j1(0.0), 0.0);
    }

    #[test]
    fn large_argument_identity() {
        for &x in &[50.0, 500.0, 5000.0] {
            let j2 = 2.0 * j1(x) / x - j0(x);
            assert!((j2 - libm::jn(2, x)).abs() < 1e-13);
        }
    }

    fn ascending_series(order: u32, x: f64) -> f64 {
        let q = -0.25 * x * x;
        let mut term = (0.5 * x).powi(order as i32) / (1..=order).product::<u32>().max(1) as f64;
        let mut sum = term;
        for m in 1..200 {
            term *= q / (m as f64 * (m + order) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    }

    #[test]
    fn matches_ascending_series() {
        for i in 0..=80 {
            let x = 0.1 * i as f64;
            assert!((j0(x) - ascending_series(0, x)).abs() < 1e-13, "J0({x})");
            assert!((j1(x) - ascending_series(1, x)).abs() < 1e-13, "J1({x})");
        }
    }
}
