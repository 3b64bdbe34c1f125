//! Bragg half-slab: front-face pre-echo profile against the Narayana path
//! sum and its Bessel limit, then the first back-face echo.

use std::f64::consts::PI;

use qidd::geometry::{build, reflection_points, GeometrySpec};
use qidd::oracles::{bragg_amplitude_exact, bragg_front_intensity};
use qidd::{propagate, PropagateOptions, SimParams};

fn main() {
    let gamma = PI / 50.0;
    let h = 200;
    let sim = SimParams { layers: 1, gamma, dx: 2.0, dz: 2.0 };
    let spec = GeometrySpec::bragg(6 * h, h);
    let built = build(&spec, &sim).unwrap();
    let history = propagate(&built.initial_state(), &built.lattice, &PropagateOptions::default()).unwrap();
    let front = built.front_profile(&history).unwrap();
    println!("{:>5} {:>12} {:>12} {:>12}", "n", "lattice", "Narayana", "J1 limit");
    for n in [1u64, 2, 5, 10, 20, 50, 100, 150, 200] {
        let lattice = front.interpolate(2.0 * n as f64).unwrap();
        let exact = bragg_amplitude_exact(n, gamma).powi(2);
        let limit = bragg_front_intensity(n as f64 + 0.5, gamma).unwrap();
        println!("{n:>5} {lattice:>12.4e} {exact:>12.4e} {limit:>12.4e}");
    }
    let points = reflection_points(&spec, &sim).unwrap();
    let b = points.iter().find(|p| p.label == "B").unwrap().coordinate;
    let (_, echo) = front.argmax_in(b - 20.0, b + 20.0).unwrap();
    println!("echo maximum at coordinate {echo} (geometric B = {b})");
    let back = built.back_profile(&history).map_or(0.0, |b| b.total());
    println!(
        "front {:.6}, back {back:.6}, lost {:.1e}, max drift {:.1e}",
        front.total(),
        history.lost,
        history.max_norm_drift()
    );
}
