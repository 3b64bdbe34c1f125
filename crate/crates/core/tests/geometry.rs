use std::f64::consts::PI;

use qidd::geometry::{build, reflection_points, GeometryError, GeometrySpec};
use qidd::params::{backface_displacement, sim_from_crystal, CrystalSpec, Resolution};
use qidd::{propagate, PropagateOptions, SimParams};

fn reference(thickness: f64, gamma: f64) -> (CrystalSpec, SimParams) {
    let spec = CrystalSpec::silicon_111_reference(thickness);
    (spec, sim_from_crystal(&spec, Resolution::Gamma(gamma)).unwrap())
}

fn height(spec: &CrystalSpec, sim: &SimParams) -> usize {
    ((spec.thickness / sim.row_pitch()).round() as usize) - 1
}

#[test]
fn right_angle_tilt_equals_bragg_bit_for_bit() {
    let (spec, sim) = reference(0.3e-3, PI / 30.0);
    let h = height(&spec, &sim);
    let run = |g: &GeometrySpec| {
        let built = build(g, &sim).unwrap();
        let history = propagate(&built.initial_state(), &built.lattice, &PropagateOptions::default()).unwrap();
        (built.front_profile(&history).unwrap(), built.back_profile(&history).unwrap())
    };
    let (bf, bb) = run(&GeometrySpec::bragg(3 * h, h));
    let (tf, tb) = run(&GeometrySpec::tilted(3 * h, h, 90.0));
    assert_eq!(bf, tf.relabel(bf.label.clone()));
    assert_eq!(bb, tb.relabel(bb.label.clone()));
}

#[test]
fn detectors_account_for_all_intensity() {
    let (spec, sim) = reference(0.4e-3, PI / 40.0);
    let h = height(&spec, &sim);
    for g in [
        GeometrySpec::bragg(4 * h, h),
        GeometrySpec::tilted(3 * h, h, 91.35),
        GeometrySpec::tilted(3 * h, h, 88.65),
        GeometrySpec::corner(h, 0.8e-3, 91.35),
    ] {
        let built = build(&g, &sim).unwrap();
        let history = propagate(&built.initial_state(), &built.lattice, &PropagateOptions::default()).unwrap();
        let detected: f64 = history.detectors.iter().map(|d| d.total()).sum();
        let residual = history.final_state.norm_sqr();
        assert!((detected + residual + history.lost - 1.0).abs() <= 1e-10, "{:?}", g.kind);
        assert!(history.max_norm_drift() <= 1e-10);
    }
}

#[test]
fn staircase_face_matches_requested_angle() {
    let (spec, sim) = reference(1e-3, PI / 50.0);
    let h = height(&spec, &sim);
    assert!(h >= 500);
    for angle in [85.0, 88.65, 90.5, 91.35, 93.0, 95.0] {
        let built = build(&GeometrySpec::tilted(2 * h, h, angle), &sim).unwrap();
        let fitted = built.fitted_face_angle().unwrap();
        assert!((fitted - angle).abs() <= 0.05, "requested {angle}, staircase {fitted}");
    }
    let (spec, coarse) = reference(1e-3, 0.3);
    let built = build(&GeometrySpec::tilted(600, height(&spec, &coarse).max(500), 91.35), &coarse).unwrap();
    assert!((built.fitted_face_angle().unwrap() - 91.35).abs() <= 0.05);
}

#[test]
fn echo_separation_matches_backface_displacement() {
    let (_, sim) = reference(1e-3, PI / 50.0);
    for h in [50usize, 200, 1462] {
        let spec = GeometrySpec::bragg(4 * h, h);
        let points = reflection_points(&spec, &sim).unwrap();
        let at = |l: &str| points.iter().find(|p| p.label == l).unwrap();
        assert_eq!(at("A").coordinate, 0.0);
        assert_eq!(at("B").coordinate, 2.0 * (h + 1) as f64);
        let depth = (h + 1) as f64 * sim.row_pitch();
        let expected = backface_displacement(depth, (sim.dz / sim.dx).atan());
        assert!(((at("B").position - at("A").position) / expected - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn first_echo_appears_at_point_b() {
    let sim = SimParams { layers: 1, gamma: PI / 50.0, dx: 1.0, dz: 1.0 };
    let h = 50;
    let spec = GeometrySpec::bragg(8 * h, h);
    let built = build(&spec, &sim).unwrap();
    let history = propagate(&built.initial_state(), &built.lattice, &PropagateOptions::default()).unwrap();
    let front = built.front_profile(&history).unwrap();
    let b = reflection_points(&spec, &sim).unwrap()[1].coordinate;
    let pre = front.interpolate(b - 2.0).unwrap();
    let echo = front.interpolate(b).unwrap();
    assert!(echo > 10.0 * pre, "pre-echo {pre}, echo {echo}");
}

#[test]
fn corner_points_follow_the_entry_offset() {
    let (spec, sim) = reference(0.5e-3, PI / 40.0);
    let h = height(&spec, &sim);
    let pitch = sim.column_pitch();
    let offsets = [1.0e-3, 1.5e-3, 2.0e-3, 2.5e-3, 3.0e-3];
    let mut c = Vec::new();
    let mut d = Vec::new();
    for o in offsets {
        let points = reflection_points(&GeometrySpec::corner(h, o, 91.35), &sim).unwrap();
        let at = |l: &str| points.iter().find(|p| p.label == l).unwrap().position;
        assert!((at("C") - o).abs() <= 0.5 * pitch);
        c.push(at("C"));
        d.push(at("D"));
    }
    for i in 1..offsets.len() {
        let step = offsets[i] - offsets[i - 1];
        assert!((c[i] - c[i - 1] - step).abs() <= pitch);
        assert!((d[i] - d[i - 1] - step).abs() <= pitch);
    }
}

#[test]
fn laue_has_no_reflection_points() {
    let (_, sim) = reference(1e-3, PI / 50.0);
    assert!(matches!(reflection_points(&GeometrySpec::laue_layers(10), &sim), Err(GeometryError::NotBraggFamily)));
}
