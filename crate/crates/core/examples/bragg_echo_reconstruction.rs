//! Bragg reflection from a 1 mm silicon slab with a scanning-slit kernel:
//! primary peak A, first echo B and their separation against 2t/tan(theta_B).

use std::f64::consts::PI;

use qidd::cli::echo_peaks;
use qidd::compare::{gaussian_kernel, simulate_front_face};
use qidd::geometry::{reflection_points, GeometrySpec};
use qidd::params::{backface_displacement, sim_from_crystal, CrystalSpec, Resolution};
use qidd::PropagateOptions;

fn main() {
    let thickness = 1e-3;
    let spec = CrystalSpec::silicon_111_reference(thickness);
    let sim = sim_from_crystal(&spec, Resolution::Gamma(PI / 50.0)).unwrap();
    let geometry = GeometrySpec::tilted_physical(&sim, thickness, 4.0 * thickness, 90.0);
    let kernel = gaussian_kernel(0.13e-3, sim.column_pitch());
    let profile = simulate_front_face(&geometry, &sim, Some(&kernel), &PropagateOptions::default()).unwrap();
    let points = reflection_points(&geometry, &sim).unwrap();
    let ((xa, ya), (xb, yb)) = echo_peaks(&profile, &points).unwrap();
    let expected = backface_displacement(thickness, spec.bragg_angle);
    println!("n = {}, gamma = {:.5}, h = {}", sim.layers, sim.gamma, geometry.crystal_height_nodes);
    println!("A at {:.4} mm, B at {:.4} mm, ratio A:B = {:.1}", xa * 1e3, xb * 1e3, ya / yb);
    println!(
        "separation {:.4} mm vs 2t/tan(theta_B) = {:.4} mm ({:.2}%)",
        (xb - xa) * 1e3,
        expected * 1e3,
        100.0 * ((xb - xa) / expected - 1.0)
    );
}
