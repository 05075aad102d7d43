//! Structured sensing operators: FWHT, the permuted-Hadamard factor and the
//! spectral LMMSE filter, checked against explicit matrices.
//!
//!     cargo run --release --example operators

use coupled_oamp::seed::{Purpose, SeedStream};
use coupled_oamp::sensing::{condition_number_profile, fwht, SensingOperator};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

fn main() -> coupled_oamp::error::Result<()> {
    println!("fwht([1, 0, 0, 0]) = {:?}", fwht(&[1.0, 0.0, 0.0, 0.0])?);

    let (m, n_c, kappa) = (16, 32, 10.0);
    let profile = condition_number_profile(m, n_c, 1, kappa)?;
    println!(
        "geometric profile: s_max = {:.4}, s_min = {:.4}, sum s^2 = {:.6}",
        profile.values()[0],
        profile.values()[m - 1],
        profile.values().iter().map(|s| s * s).sum::<f64>()
    );

    let seeds = SeedStream::new(1);
    let op = SensingOperator::structured(&profile, false, &mut seeds.rng(Purpose::Permutation, 0))?;

    // materialize A column by column from the matrix-free forward map
    let mut a = DMatrix::<f64>::zeros(m, n_c);
    for j in 0..n_c {
        let mut e = vec![0.0; n_c];
        e[j] = 1.0;
        a.set_column(j, &DVector::from_vec(op.forward(&e)?));
    }
    let svd = a.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let sv_err = sv.iter().zip(profile.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("singular values of the materialized A match the profile to {sv_err:.2e}");

    let mut rng = seeds.rng(Purpose::Test, 0);
    let r: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let snr_ratio = 0.05;
    let spectral = op.lmmse_apply(snr_ratio, &r)?;
    let gram = &a * a.transpose() + DMatrix::identity(m, m) * snr_ratio;
    let dense = a.transpose() * gram.lu().solve(&DVector::from_column_slice(&r)).expect("regular");
    let err = spectral.iter().zip(dense.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("spectral LMMSE vs dense solve: max |diff| = {err:.2e}");
    println!("eta_A at snr ratio {snr_ratio}: {:.6}", op.eta_a(snr_ratio)?);
    Ok(())
}
