//! Laue slab exit profiles from the propagation engine next to the exact
//! path sums and the Takagi-Taupin spherical-wave intensities.

use std::f64::consts::PI;

use qidd::geometry::{build, GeometrySpec};
use qidd::oracles::{qi_exit_amplitudes, tt_intensity_diffracted, tt_intensity_transmitted};
use qidd::{exit_profiles, propagate, PropagateOptions, SimParams};

fn main() {
    let layers = 400u64;
    let gamma = PI / 100.0;
    let sim = SimParams { layers, gamma, dx: 1.0, dz: 1.0 };
    let built = build(&GeometrySpec::laue_layers(layers as usize), &sim).unwrap();
    let history = propagate(&built.initial_state(), &built.lattice, &PropagateOptions::default()).unwrap();
    let (diffracted, transmitted) = exit_profiles(&history);
    let (exact_d, exact_t) = qi_exit_amplitudes(layers, gamma);
    let ratio = sim.thickness_ratio();
    let n = layers as i64;

    println!("n = {layers}, gamma = {gamma:.5}, D/Delta_H = {ratio:.2}, max norm drift {:.1e}", history.max_norm_drift());
    println!("{:>7} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}", "Gamma", "I_H lattice", "I_H exact", "I_H TT", "I_0 lattice", "I_0 exact", "I_0 TT");
    for p in (-n..=n).step_by(50) {
        let g = -(p as f64) / layers as f64;
        let i = (p + n) as usize;
        let d = diffracted.interpolate(2.0 * p as f64).unwrap_or(0.0);
        let t = transmitted.interpolate(2.0 * p as f64).unwrap_or(0.0);
        println!(
            "{g:>7.3} {d:>12.4e} {:>12.4e} {:>12.4e} {t:>12.4e} {:>12.4e} {:>12.4e}",
            exact_d[i].powi(2),
            gamma * gamma * tt_intensity_diffracted(g, ratio),
            exact_t[i].powi(2),
            gamma * gamma * tt_intensity_transmitted(g, ratio),
        );
    }
}
