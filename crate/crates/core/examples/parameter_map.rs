//! Mapping a physical crystal to lattice parameters and back.

use std::f64::consts::PI;

use qidd::params::{crystal_from_sim, darwin_width, pendellosung_period, sim_from_crystal, CrystalSpec, Resolution};

fn main() {
    let spec = CrystalSpec::silicon_111_reference(1e-3);
    println!(
        "Si(111), D = {:.3} mm, lambda = {:.3} Å, theta_B = {:.3}°",
        spec.thickness * 1e3,
        spec.wavelength * 1e10,
        spec.bragg_angle.to_degrees()
    );
    println!(
        "Delta_H = {:.3} µm, D/Delta_H = {:.3}, Darwin width {:.3e} rad, Bragg mismatch {:.2e}",
        pendellosung_period(&spec) * 1e6,
        spec.thickness_ratio(),
        darwin_width(&spec),
        spec.bragg_mismatch()
    );
    for choice in [Resolution::Gamma(PI / 50.0), Resolution::Gamma(PI / 200.0), Resolution::Layers(5000)] {
        let sim = sim_from_crystal(&spec, choice).unwrap();
        let back = crystal_from_sim(&sim, &spec);
        println!(
            "{choice:?}: n = {}, gamma = {:.6}, dx = {:.3} nm, dz = {:.3} nm, max residual {:.1e}, D back {:.6} mm",
            sim.layers,
            sim.gamma,
            sim.dx * 1e9,
            sim.dz * 1e9,
            sim.residuals(&spec).max(),
            back.thickness * 1e3
        );
    }
    match sim_from_crystal(&spec, Resolution::Layers(3)) {
        Ok(_) => println!("unexpected: 3 layers accepted"),
        Err(e) => println!("3 layers: {e}"),
    }
}
