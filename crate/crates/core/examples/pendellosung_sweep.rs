//! Integrated diffracted and transmitted intensity against thickness; the
//! diffracted curve oscillates with the Pendellösung period.

use std::f64::consts::PI;

use qidd::lattice::integrated_intensity_scan;
use qidd::params::{pendellosung_period, CrystalSpec};
use qidd::PropagateOptions;

fn main() {
    let gamma = PI / 100.0;
    let max_layers = (20.0 * PI / (2.0 * gamma)) as usize;
    let scan = integrated_intensity_scan(gamma, max_layers, &PropagateOptions::default()).unwrap();
    for i in (0..scan.layers.len()).step_by(50) {
        let n = scan.layers[i];
        println!(
            "n = {n:>5}  D/Delta_H = {:>7.3}  diffracted {:.5}  transmitted {:.5}",
            scan.thickness_ratio(n),
            scan.diffracted[i],
            scan.transmitted[i]
        );
    }
    let maxima = scan.diffracted_maxima();
    let period = scan.oscillation_period().unwrap();
    println!("{} maxima, mean spacing {period:.5} Pendellösung lengths", maxima.len());
    let si = CrystalSpec::silicon_111_at(1e-3, 4.43e-10);
    println!("Si(111) at 4.43 Å: Delta_H = {:.4} µm", 1e6 * pendellosung_period(&si));
}
