use crate::pathcomb::{enumerate_paths, PathError, PathSpec, Step, StepWord};

use super::bessel::{j0, j1};
use super::exact::TrigSeries;

fn diffracted_series(n: u64, p: i64, gamma: f64) -> TrigSeries<impl Fn(u64) -> (u128, u128)> {
    let a = (n as i64 + p) as u64;
    let b = (n as i64 - p) as u64;
    TrigSeries {
        gamma,
        negative_first: true,
        sin_pow: 1,
        cos_pow: 2 * n,
        coef0: 1,
        len: a.min(b) + 1,
        ratio: move |k| (((a - k) * (b - k)) as u128, ((k + 1) * (k + 1)) as u128),
    }
}

fn transmitted_series(n: u64, p: i64, gamma: f64) -> TrigSeries<impl Fn(u64) -> (u128, u128)> {
    let m = (n as i64 - p) as u64;
    let up = (n as i64 + p + 1) as u64;
    if m == 0 {
        return TrigSeries {
            gamma,
            negative_first: false,
            sin_pow: 0,
            cos_pow: 2 * n + 1,
            coef0: 1,
            len: 1,
            ratio: Box::new(|_| (0u128, 1u128)) as Box<dyn Fn(u64) -> (u128, u128)>,
        };
    }
    TrigSeries {
        gamma,
        negative_first: true,
        sin_pow: 2,
        cos_pow: 2 * n - 1,
        coef0: up as u128,
        len: m.min(up),
        ratio: Box::new(move |i: u64| {
            let k = i + 1;
            (((m - k) * (up - k)) as u128, (k * (k + 1)) as u128)
        }),
    }
}

/// Diffracted exit amplitude of an `n`-bilayer Laue slab at node `p`
/// (positive toward the transmitted side):
///
/// `ψ_H = Σ_k (-1)^{k+1} sin^{2k+1}γ cos^{2(n-k)}γ C(n+p,k) C(n-p,k)`.
///
/// Zero for `|p| > n`.
pub fn qi_amplitude_diffracted(n: u64, p: i64, gamma: f64) -> f64 {
    if p.unsigned_abs() > n {
        return 0.0;
    }
    diffracted_series(n, p, gamma).eval()
}

/// Transmitted exit amplitude:
///
/// `ψ_0 = Σ_k (-1)^k sin^{2k}γ cos^{2(n-k)+1}γ C(n-p-1,k-1) C(n+p+1,k)`
///
/// with `C(-1,-1) = 1`, so that `ψ_0(n, n) = cos^{2n+1}γ`. The sum runs
/// over every `k` with non-zero binomials.
pub fn qi_amplitude_transmitted(n: u64, p: i64, gamma: f64) -> f64 {
    if p.unsigned_abs() > n {
        return 0.0;
    }
    transmitted_series(n, p, gamma).eval()
}

/// Amplitudes on both exit beams for `p = -n..=n`.
pub fn qi_exit_amplitudes(n: u64, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let ps = -(n as i64)..=n as i64;
    (
        ps.clone().map(|p| qi_amplitude_diffracted(n, p, gamma)).collect(),
        ps.map(|p| qi_amplitude_transmitted(n, p, gamma)).collect(),
    )
}

fn bessel_arg(n: f64, p: f64, gamma: f64) -> Option<f64> {
    if n <= 0.0 || p.abs() > n {
        return None;
    }
    let q = (p / n).clamp(-1.0, 1.0);
    Some(2.0 * n * gamma * ((1.0 - q) * (1.0 + q)).sqrt())
}

/// Small-γ limit of `|ψ_H|²`: `γ² J₀²(2nγ √(1 - p²/n²))`.
///
/// `n` is real so that callers may use a calibrated effective thickness.
/// Zero outside `|p| ≤ n`.
pub fn limit_intensity_diffracted(n: f64, p: f64, gamma: f64) -> f64 {
    match bessel_arg(n, p, gamma) {
        Some(x) => gamma * gamma * j0(x).powi(2),
        None => 0.0,
    }
}

/// Small-γ limit of `|ψ_0|²`: `γ² (n+p)/(n-p) J₁²(2nγ √(1 - p²/n²))`.
///
/// At `p = n` the prefactor diverges while `J₁²` vanishes at the same
/// rate; the finite limit `4 n² γ⁴` is returned.
pub fn limit_intensity_transmitted(n: f64, p: f64, gamma: f64) -> f64 {
    let Some(x) = bessel_arg(n, p, gamma) else { return 0.0 };
    if n - p <= 0.0 {
        return 4.0 * n * n * gamma.powi(4);
    }
    gamma * gamma * (n + p) / (n - p) * j1(x).powi(2)
}

/// Which beam leaves the last node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitBeam {
    Transmitted,
    Diffracted,
}

/// Product of node factors along a walk that enters travelling up and
/// leaves the last node in `exit`.
pub fn path_weight(word: &StepWord, exit: ExitBeam, gamma: f64) -> f64 {
    let (s, c) = gamma.sin_cos();
    let mut w = 1.0;
    let mut dir = Step::Up;
    let outs = word.0.iter().copied().chain(std::iter::once(match exit {
        ExitBeam::Transmitted => Step::Up,
        ExitBeam::Diffracted => Step::Down,
    }));
    for out in outs {
        w *= match (dir, out) {
            (Step::Up, Step::Up) | (Step::Down, Step::Down) => c,
            (Step::Up, Step::Down) => -s,
            (Step::Down, Step::Up) => s,
        };
        dir = out;
    }
    w
}

/// Exit amplitude as an explicit sum over enumerated walks.
pub fn weighted_path_sum(n: u32, p: i64, gamma: f64, exit: ExitBeam) -> Result<f64, PathError> {
    let words = enumerate_paths(&PathSpec::new(n).ending_at(p))?;
    Ok(words.iter().map(|w| path_weight(w, exit, gamma)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn triangle_edges() {
        let g = 0.3f64;
        let (s, c) = g.sin_cos();
        for n in [1u64, 4, 9] {
            let e = c.powi(2 * n as i32);
            assert!((qi_amplitude_diffracted(n, n as i64, g).abs() - s * e).abs() < 1e-15);
            assert!((qi_amplitude_diffracted(n, -(n as i64), g).abs() - s * e).abs() < 1e-15);
            assert!((qi_amplitude_transmitted(n, n as i64, g) - c * e).abs() < 1e-15);
        }
        assert_eq!(qi_amplitude_diffracted(3, 4, g), 0.0);
        assert_eq!(qi_amplitude_transmitted(3, 0, 0.0), 0.0);
        assert_eq!(qi_amplitude_transmitted(3, 3, 0.0), 1.0);
    }

    #[test]
    fn matches_weighted_enumeration() {
        for &g in &[PI / 10.0, PI / 4.0] {
            for n in 0..=6u32 {
                for p in -(n as i64)..=n as i64 {
                    let d = weighted_path_sum(n, p, g, ExitBeam::Diffracted).unwrap();
                    let t = weighted_path_sum(n, p, g, ExitBeam::Transmitted).unwrap();
                    assert!((qi_amplitude_diffracted(n as u64, p, g) - d).abs() < 1e-14, "ψ_H n={n} p={p}");
                    assert!((qi_amplitude_transmitted(n as u64, p, g) - t).abs() < 1e-14, "ψ_0 n={n} p={p}");
                }
            }
        }
    }

    #[test]
    fn unitarity_of_closed_forms() {
        let (h, t) = qi_exit_amplitudes(40, PI / 4.0);
        let total: f64 = h.iter().chain(&t).map(|a| a * a).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn limit_edges() {
        let g = 0.01;
        assert!((limit_intensity_diffracted(50.0, 50.0, g) - g * g).abs() < 1e-18);
        assert_eq!(limit_intensity_transmitted(50.0, -50.0, g), 0.0);
        let near = limit_intensity_transmitted(50.0, 50.0 - 1e-6, g);
        let edge = limit_intensity_transmitted(50.0, 50.0, g);
        assert!((near - edge).abs() < 1e-6 * edge);
        assert!((limit_intensity_transmitted(50.0, 0.0, g) - g * g * j1(2.0 * 50.0 * g).powi(2)).abs() < 1e-18);
    }
}
