use num_bigint::BigUint;

use crate::pathcomb::{enumerate_paths, BoundedDyckTable, PathError, PathSpec};

use super::bessel::j1;
use super::exact::{exact_term_sum, TrigSeries};
use super::laue::{path_weight, ExitBeam};
use super::OracleError;

/// Small-γ front-face reflected intensity `J₁²(2γn) / n²` for an exit
/// `n` half-lengths from the entry point.
pub fn bragg_front_intensity(n: f64, gamma: f64) -> Result<f64, OracleError> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(OracleError::BraggOrigin { n });
    }
    Ok((j1(2.0 * gamma * n) / n).powi(2))
}

/// Reflected amplitude of a semi-infinite crystal:
/// `Σ_{k=1}^n (-1)^{k-1} sin^{2k-1}γ cos^{2(n-k+1)}γ N(n,k)` with Narayana
/// weights. The empty sum at `n = 0` is zero.
pub fn bragg_amplitude_exact(n: u64, gamma: f64) -> f64 {
    TrigSeries {
        gamma,
        negative_first: false,
        sin_pow: 1,
        cos_pow: 2 * n,
        coef0: 1,
        len: n,
        ratio: move |i: u64| {
            let k = i + 1;
            (((n - k) * (n - k + 1)) as u128, (k * (k + 1)) as u128)
        },
    }
    .eval()
}

/// Same sum with the Narayana weights replaced by height-bounded counts
/// `H(n, k, h)`: the amplitude reaching the front face from a crystal of
/// thickness `h`, echoes included.
pub fn bragg_amplitude_bounded(n: u32, h: u32, gamma: f64, table: &mut BoundedDyckTable) -> f64 {
    let terms: Vec<(bool, BigUint, u64, u64)> = (1..=n)
        .map(|k| {
            let count = table.get(n, k, h);
            (k % 2 == 0, count, 2 * k as u64 - 1, 2 * (n - k + 1) as u64)
        })
        .collect();
    exact_term_sum(gamma, &terms)
}

/// Brute-force reflected amplitude: the weighted sum over Dyck walks of
/// half-length `n`, optionally bounded in height. Carries the lattice sign
/// `(-1)^k`, opposite to the closed forms; compare magnitudes.
pub fn bragg_weighted_dyck_sum(n: u32, bound: Option<u32>, gamma: f64) -> Result<f64, PathError> {
    let mut spec = PathSpec::dyck(n);
    if let Some(h) = bound {
        spec = spec.bounded_by(h);
    }
    let words = enumerate_paths(&spec)?;
    Ok(words.iter().map(|w| path_weight(w, ExitBeam::Diffracted, gamma)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_term_and_enumeration() {
        let g = 0.2f64;
        let (s, c) = g.sin_cos();
        assert!((bragg_amplitude_exact(1, g) - s * c * c).abs() < 1e-16);
        for n in 1..=8u32 {
            let brute = bragg_weighted_dyck_sum(n, None, PI / 8.0).unwrap();
            assert!((bragg_amplitude_exact(n as u64, PI / 8.0).abs() - brute.abs()).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn bounded_sum_matches_bounded_enumeration() {
        let mut table = BoundedDyckTable::new();
        for n in 1..=8u32 {
            for h in 1..=4u32 {
                let brute = bragg_weighted_dyck_sum(n, Some(h), 0.45).unwrap();
                let v = bragg_amplitude_bounded(n, h, 0.45, &mut table);
                assert!((v.abs() - brute.abs()).abs() < 1e-14, "n={n} h={h}");
            }
        }
        assert!((bragg_amplitude_bounded(6, 6, 0.3, &mut table) - bragg_amplitude_exact(6, 0.3)).abs() < 1e-16);
    }

    #[test]
    fn origin_is_rejected() {
        assert!(bragg_front_intensity(0.0, 0.1).is_err());
        let v = bragg_front_intensity(1.0, 1e-4).unwrap();
        assert!((v - 1e-8).abs() < 1e-14);
    }
}
