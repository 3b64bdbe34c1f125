use std::f64::consts::PI;

use proptest::prelude::*;
use qidd::compare::{compare, convolve_profile, Metric};
use qidd::params::{sim_from_crystal, CrystalSpec, Resolution};
use qidd::{propagate, Direction, LatticeGeometry, NodeKind, ProfileSeries, PropagateOptions, StateVector, UnitaryParams};

fn crystal() -> impl Strategy<Value = CrystalSpec> {
    (1e-5..1e-2f64, 1.0..4.0f64, 0.05..0.95f64, 20.0..200.0f64, 1.0..20.0f64).prop_map(|(t, d, s, v, f)| {
        let plane_spacing = d * 1e-10;
        let bragg_angle = s.asin();
        CrystalSpec {
            thickness: t,
            wavelength: 2.0 * plane_spacing * bragg_angle.sin(),
            bragg_angle,
            cell_volume: v * 1e-30,
            structure_factor: f * 1e-15,
            plane_spacing,
        }
    })
}

fn at_least_layers(spec: &CrystalSpec) -> u64 {
    (spec.thickness_ratio()).ceil().max(1.0) as u64
}

fn series(values: Vec<f64>) -> ProfileSeries {
    ProfileSeries::on_lattice("s", 0, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sim_params_satisfy_all_relations(spec in crystal(), gamma in 1e-3..1.5f64, extra in 0u64..5000, by_layers: bool) {
        let choice = if by_layers {
            Resolution::Layers(at_least_layers(&spec) + extra)
        } else {
            Resolution::Gamma(gamma)
        };
        let sim = sim_from_crystal(&spec, choice).unwrap();
        let r = sim.residuals(&spec);
        prop_assert!(r.layer_gamma <= 1e-12, "{r:?}");
        prop_assert!(r.layer_size <= 1e-12, "{r:?}");
        prop_assert!(r.aspect <= 1e-12, "{r:?}");
        prop_assert!(r.gamma_per_length <= 1e-12, "{r:?}");
        prop_assert!(sim.gamma > 0.0 && sim.gamma <= PI / 2.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn more_layers_means_smaller_gamma(spec in crystal(), a in 0u64..10_000, step in 1u64..10_000) {
        let n = at_least_layers(&spec) + a;
        let coarse = sim_from_crystal(&spec, Resolution::Layers(n)).unwrap();
        let fine = sim_from_crystal(&spec, Resolution::Layers(n + step)).unwrap();
        prop_assert!(fine.gamma < coarse.gamma);
    }

    #[test]
    fn convolution_is_linear(
        f in prop::collection::vec(0.0..10.0f64, 2..80),
        g in prop::collection::vec(0.0..10.0f64, 80),
        k in prop::collection::vec(0.0..1.0f64, 1..9),
        a in 0.0..5.0f64,
        b in 0.0..5.0f64,
    ) {
        prop_assume!(k.iter().sum::<f64>() > 1e-3);
        let g = g[..f.len()].to_vec();
        let kernel = ProfileSeries::on_lattice("k", -(k.len() as i64 / 2), k).unwrap();
        let mix: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let lhs = convolve_profile(&series(mix), &kernel).unwrap();
        let cf = convolve_profile(&series(f), &kernel).unwrap();
        let cg = convolve_profile(&series(g), &kernel).unwrap();
        let scale = lhs.peak().max(1.0);
        for ((l, x), y) in lhs.values().iter().zip(cf.values()).zip(cg.values()) {
            prop_assert!((l - (a * x + b * y)).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn convolution_preserves_the_integral(
        core in prop::collection::vec(0.0..10.0f64, 1..60),
        k in prop::collection::vec(0.0..1.0f64, 1..11),
    ) {
        prop_assume!(k.iter().sum::<f64>() > 1e-3);
        let margin = k.len();
        let mut values = vec![0.0; margin];
        values.extend(&core);
        values.extend(vec![0.0; margin]);
        let input = series(values);
        let kernel = ProfileSeries::on_lattice("k", -(k.len() as i64 / 2), k).unwrap();
        let out = convolve_profile(&input, &kernel).unwrap();
        prop_assert!((out.total() - input.total()).abs() <= 1e-10 * input.total().max(1.0));
    }

    #[test]
    fn compare_ignores_data_scale(
        sim in prop::collection::vec(0.0..10.0f64, 3..50),
        noise in prop::collection::vec(0.0..2.0f64, 50),
        c in 1e-6..1e6f64,
    ) {
        let data: Vec<f64> = sim.iter().zip(&noise).map(|(s, n)| s + n).collect();
        prop_assume!(data.iter().any(|&v| v > 0.0));
        let sim = series(sim);
        let data = series(data);
        for metric in [Metric::chi_square(), Metric::Rmse] {
            let base = compare(&sim, &data, metric).unwrap();
            let scaled = compare(&sim, &data.scaled(c), metric).unwrap();
            prop_assert!((scaled - base).abs() <= 1e-10 * base.max(1.0));
        }
    }

    #[test]
    fn laue_propagation_conserves_intensity(layers in 1usize..200, gamma in 1e-4..1.5f64) {
        let columns = 2 * layers + 1;
        let rows = 2 * columns + 3;
        let lattice =
            LatticeGeometry::uniform(columns, rows, rows / 2, NodeKind::Crystal(UnitaryParams::new(gamma))).unwrap();
        let start = StateVector::delta(rows, rows / 2, Direction::Transmitted);
        let history = propagate(&start, &lattice, &PropagateOptions::default()).unwrap();
        prop_assert!(history.max_norm_drift() <= 1e-12);
        prop_assert!((history.final_state.norm_sqr() - 1.0).abs() <= 1e-12);
    }
}
