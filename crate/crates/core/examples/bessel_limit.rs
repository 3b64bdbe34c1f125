//! Convergence of the lattice exit profile to its Bessel-function limit at
//! fixed n·gamma, with the slab counted out to n + 1/2 layers.

use std::f64::consts::PI;

use qidd::oracles::limit_intensity_diffracted;
use qidd::{propagate, Direction, LatticeGeometry, NodeKind, PropagateOptions, StateVector, UnitaryParams};

fn main() {
    let n_gamma = PI / 2.0 * 25.0;
    println!("{:>6} {:>10} {:>14} {:>14}", "n", "gamma", "max rel err", "err at p = 0");
    for n in [250usize, 500, 1000, 2000] {
        let gamma = n_gamma / n as f64;
        let columns = 2 * n + 1;
        let rows = 2 * columns + 3;
        let entry = rows / 2;
        let lattice =
            LatticeGeometry::uniform(columns, rows, entry, NodeKind::Crystal(UnitaryParams::new(gamma))).unwrap();
        let start = StateVector::delta(rows, entry, Direction::Transmitted);
        let history = propagate(&start, &lattice, &PropagateOptions::default()).unwrap();
        let intensity = |p: i64| history.final_state.beta((entry as i64 + 2 * p - 1) as usize).norm_sqr();
        let limit = |p: i64| limit_intensity_diffracted(n as f64 + 0.5, p as f64, gamma);
        let span = (0.8 * n as f64) as i64;
        let peak = (-(n as i64)..=n as i64).map(limit).fold(0.0, f64::max);
        let worst = (-span..=span)
            .filter(|&p| limit(p) >= 0.01 * peak)
            .map(|p| (intensity(p) - limit(p)).abs() / limit(p))
            .fold(0.0, f64::max);
        let centre = (intensity(0) - limit(0)).abs() / limit(0);
        println!("{n:>6} {gamma:>10.5} {worst:>14.3e} {centre:>14.3e}");
    }
}
