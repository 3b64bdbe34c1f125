//! Recover the end-face angle of a mixed Laue-Bragg crystal from a
//! synthetic front-face profile.

use std::f64::consts::PI;

use qidd::compare::{fit_geometry_angle, gaussian_kernel, simulate_front_face, AngleFit};
use qidd::geometry::GeometrySpec;
use qidd::params::{sim_from_crystal, CrystalSpec, Resolution};
use qidd::PropagateOptions;

fn main() {
    let thickness = 0.5e-3;
    let spec = CrystalSpec::silicon_111_reference(thickness);
    let sim = sim_from_crystal(&spec, Resolution::Gamma(PI / 40.0)).unwrap();
    let kernel = gaussian_kernel(0.1e-3, sim.column_pitch());
    let injected = 91.35;
    let template = GeometrySpec::tilted_physical(&sim, thickness, 2e-3, 90.0);
    let data = simulate_front_face(&template.with_angle(injected), &sim, Some(&kernel), &PropagateOptions::default())
        .unwrap();
    let fit = fit_geometry_angle(&data, &template, &sim, Some(&kernel), &AngleFit::new(90.5, 92.0, 16)).unwrap();
    for (angle, value) in &fit.objective_curve {
        println!("{angle:.3}° {} {value:.4e}", fit.metric);
    }
    println!("injected {injected}°, recovered {:.4}° ± {:.4}°", fit.best_parameter, fit.uncertainty);
}
