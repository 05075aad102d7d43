use coupled_oamp::coupling::{CouplingConfig, uniform_gamma};
use proptest::prelude::*;

fn config() -> impl Strategy<Value = CouplingConfig> {
    (1usize..10, 0usize..4, 1usize..6)
        .prop_flat_map(|(l, w, n)| (Just((l, w, n)), 1..=n))
        .prop_map(|((l, w, n), m)| CouplingConfig::new(l, w, n, m, 1e-2).unwrap())
}

proptest! {
    #[test]
    fn windows_tile_the_band(c in config()) {
        // every (row, column) pair in the band appears in exactly one window
        let mut seen = vec![vec![0usize; c.sections()]; c.rows()];
        for row in 0..c.rows() {
            let win = c.window(row).unwrap();
            prop_assert_eq!(c.window_len(row), win.clone().count());
            prop_assert_eq!(c.n_c(row), c.window_len(row) * c.n());
            for (k, w) in win.enumerate() {
                prop_assert_eq!(c.block_position(row, w), k);
                seen[row][row - w] += 1;
            }
        }
        for (row, cols) in seen.iter().enumerate() {
            for (col, &count) in cols.iter().enumerate() {
                let in_band = row >= col && row - col <= c.width();
                prop_assert_eq!(count, in_band as usize);
            }
        }
        prop_assert!(c.window(c.rows()).is_err());
    }

    #[test]
    fn uniform_gamma_has_unit_column_energy(l in 1usize..12, w in 0usize..5) {
        let g = uniform_gamma(l, w);
        for col in 0..l {
            let e: f64 = (0..=w).map(|k| g.at_offset(col, k).powi(2)).sum();
            prop_assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn x_vec_is_linear_and_scaled(
        c in config(),
        seed in prop::collection::vec(-3.0f64..3.0, 60),
        a in -2.0f64..2.0,
    ) {
        let sections: Vec<Vec<f64>> = (0..c.sections())
            .map(|l| (0..c.n()).map(|i| seed[(l * 7 + i) % seed.len()]).collect())
            .collect();
        let other: Vec<Vec<f64>> = sections.iter().map(|s| s.iter().map(|x| x * x - 1.0).collect()).collect();
        let mix: Vec<Vec<f64>> = sections
            .iter()
            .zip(&other)
            .map(|(s, o)| s.iter().zip(o).map(|(x, y)| a * x + y).collect())
            .collect();
        for row in 0..c.rows() {
            let xs = c.build_x_vec(&sections, row).unwrap();
            let ys = c.build_x_vec(&other, row).unwrap();
            let zs = c.build_x_vec(&mix, row).unwrap();
            for k in 0..zs.len() {
                prop_assert!((zs[k] - (a * xs[k] + ys[k])).abs() < 1e-12);
            }
            let scale = (c.window_len(row) as f64).sqrt();
            for w in c.window(row).unwrap() {
                let b = c.block_position(row, w);
                let col = row - w;
                for i in 0..c.n() {
                    let want = scale * c.gamma_at(row, col) * sections[col][i];
                    prop_assert!((xs[b * c.n() + i] - want).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn rejects_malformed_sections() {
    let c = CouplingConfig::new(3, 1, 4, 2, 0.1).unwrap();
    assert!(c.build_x_vec(&vec![vec![0.0; 4]; 2], 0).is_err());
    assert!(c.build_x_vec(&[vec![0.0; 4], vec![0.0; 3], vec![0.0; 4]], 0).is_err());
}

#[test]
fn overall_rate_counts_the_extra_rows() {
    let c = CouplingConfig::new(8, 1, 1024, 205, 1e-3).unwrap();
    assert_eq!(c.rows(), 9);
    assert!((c.overall_rate() - 9.0 * 205.0 / (8.0 * 1024.0)).abs() < 1e-15);
}
