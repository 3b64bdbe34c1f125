//! Corner crystal: the entry slit is moved toward the corner and the
//! predicted C and D reflection points follow it.

use std::f64::consts::PI;

use qidd::compare::simulate_front_face;
use qidd::geometry::{build, reflection_points, GeometrySpec};
use qidd::params::{sim_from_crystal, CrystalSpec, Resolution};
use qidd::PropagateOptions;

fn main() {
    let thickness = 0.5e-3;
    let spec = CrystalSpec::silicon_111_reference(thickness);
    let sim = sim_from_crystal(&spec, Resolution::Gamma(PI / 40.0)).unwrap();
    let h = ((thickness / sim.row_pitch()).round() as usize) - 1;
    for offset_mm in [1.0, 1.5, 2.0, 2.5] {
        let geometry = GeometrySpec::corner(h, offset_mm * 1e-3, 91.35);
        let built = build(&geometry, &sim).unwrap();
        let points = reflection_points(&geometry, &sim).unwrap();
        let profile = simulate_front_face(&geometry, &sim, None, &PropagateOptions::default()).unwrap();
        let labels: Vec<String> = points.iter().map(|p| format!("{} {:.3} mm", p.label, p.position * 1e3)).collect();
        println!(
            "entry {offset_mm:.1} mm from corner: {} | face angle {:.3}° | front total {:.4}",
            labels.join(", "),
            built.fitted_face_angle().unwrap(),
            profile.total()
        );
    }
}
