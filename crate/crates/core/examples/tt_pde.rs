//! Finite-difference integration of the Takagi-Taupin equations for a
//! point source, compared with the analytic spherical-wave intensities.

use qidd::oracles::{tt_integrate_pde, tt_intensity_diffracted};

fn main() {
    for ratio in [1.0, 2.0] {
        for k in [512, 2048, 8192] {
            let solution = tt_integrate_pde(ratio, k, false).unwrap();
            let profile = solution.diffracted_profile();
            let samples: Vec<(f64, f64)> = profile.iter().filter(|(g, _)| g.abs() <= 0.9).collect();
            let peak = samples.iter().map(|&(g, _)| tt_intensity_diffracted(g, ratio)).fold(0.0, f64::max);
            let worst = samples
                .iter()
                .map(|&(g, v)| (v - tt_intensity_diffracted(g, ratio)).abs())
                .fold(0.0, f64::max);
            println!("D/Delta_H = {ratio}, K = {k:>5}: max |I_H - exact| = {:.3}% of peak", 100.0 * worst / peak);
        }
    }
}
