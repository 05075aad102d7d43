//! Rebuild the largest-MSE-versus-rate table from a sweep CSV alone.
//!
//!     cargo run --release --example sweep_table -- desk.csv

use std::collections::BTreeMap;
use std::path::PathBuf;

use coupled_oamp::harness::output::read_sweep_csv;

/// `(overall rate, best mean largest MSE, SE prediction)`.
type Point = (f64, f64, f64);

fn main() -> coupled_oamp::error::Result<()> {
    let path: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "coupling_gain.csv".into()).into();
    let rows = read_sweep_csv(&path)?;
    let mut table: BTreeMap<(usize, usize), Vec<Point>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.best == 1 && r.statistic == "largest_mse_mean") {
        let se = rows
            .iter()
            .find(|s| s.statistic == "se_largest_mse" && (s.sections, s.width, s.m) == (r.sections, r.width, r.m))
            .map_or(f64::NAN, |s| s.value);
        table.entry((r.sections, r.width)).or_default().push((r.overall_rate, r.value, se));
    }
    for ((l, w), points) in &table {
        println!("(L, W) = ({l}, {w})");
        println!("{:>8} {:>16} {:>12}", "rate", "largest MSE", "SE");
        for (rate, mse, se) in points {
            println!("{rate:>8.4} {mse:>16.3e} {se:>12.3e}");
        }
    }
    Ok(())
}
