use super::bessel::{j0, j1};

fn tt_arg(transverse: f64, thickness_ratio: f64) -> Option<f64> {
    if !(-1.0..=1.0).contains(&transverse) {
        return None;
    }
    Some(std::f64::consts::PI * thickness_ratio * ((1.0 - transverse) * (1.0 + transverse)).sqrt())
}

/// Spherical-wave diffracted exit intensity `J₀²(π (D/Δ_H) √(1-Γ²))`, with
/// the `ν²|A₀|²` prefactor divided out. Zero for `|Γ| > 1`.
pub fn tt_intensity_diffracted(transverse: f64, thickness_ratio: f64) -> f64 {
    tt_arg(transverse, thickness_ratio).map_or(0.0, |x| j0(x).powi(2))
}

/// Spherical-wave transmitted exit intensity
/// `((1-Γ)/(1+Γ)) J₁²(π (D/Δ_H) √(1-Γ²))`, prefactor divided out. The
/// direct-beam side is `Γ = -1`, where the finite limit `(π D/Δ_H)²` is
/// returned. Zero for `|Γ| > 1`.
pub fn tt_intensity_transmitted(transverse: f64, thickness_ratio: f64) -> f64 {
    let Some(x) = tt_arg(transverse, thickness_ratio) else { return 0.0 };
    if transverse <= -1.0 {
        return (std::f64::consts::PI * thickness_ratio).powi(2);
    }
    (1.0 - transverse) / (1.0 + transverse) * j1(x).powi(2)
}
