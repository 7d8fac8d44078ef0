use hybrid_ia::capacity::{asymptotic_sinr_experiment, ergodic_capacity, AlphaPolicy, CapacitySettings};
use hybrid_ia::channel::{enumerate_partitions, sample_channel, Partition};
use hybrid_ia::linalg::{c64, CMat};
use hybrid_ia::rng::derive_seed;
use hybrid_ia::tikhonov::sigma2_from_snr_db;

fn part(name: &str) -> Partition {
    name.parse().unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-user SINR of full-group pre-inversion written out from the definitions:
/// an explicit regularized inverse, identity precoders and combiners.
fn full_group_sinr(seed: u64, sigma2: f64) -> [f64; 4] {
    let h = sample_channel(4, 5, seed).matrix().clone();
    let scale = c64(20f64.sqrt(), 0.0);
    let g = &h / scale;
    let gram = &g * g.adjoint() + CMat::identity(20, 20) * c64(sigma2, 0.0);
    let g_alpha = g.adjoint() * gram.try_inverse().unwrap();
    let energy = (&g_alpha / scale).norm_squared() / 4.0;
    let residual = &g * &g_alpha - CMat::identity(20, 20);
    let mut out = [0.0; 4];
    for (i, sinr) in out.iter_mut().enumerate() {
        let rows = residual.rows(5 * i, 5).norm_squared();
        *sinr = (5.0 / energy) / (5.0 * sigma2 + rows / energy);
    }
    out
}

#[test]
fn full_group_rate_matches_literal_oracle() {
    let trials = 10_000;
    let seed = 2024;
    let sigma2 = sigma2_from_snr_db(10.0);
    let mut sums = [0.0; 4];
    for t in 0..trials {
        let s = full_group_sinr(derive_seed(seed, &[t, 0]), sigma2);
        for i in 0..4 {
            sums[i] += s[i];
        }
    }
    let oracle: f64 = sums.iter().map(|s| 0.25 * (1.0 + s / trials as f64).log2()).sum();

    let point = ergodic_capacity(&part("4"), &CapacitySettings::new(10.0, trials as usize, seed, AlphaPolicy::Mmse)).unwrap();
    assert_eq!(point.rejected, 0);
    assert!((point.total_rate - oracle).abs() <= 1e-10 * oracle, "{} vs {oracle}", point.total_rate);
    // Frozen from the oracle above.
    assert!((oracle - 2.709_160_495_084).abs() < 1e-9, "oracle drifted: {oracle:.12}");
}

#[test]
fn larger_group_beats_pairs_at_high_snr() {
    let settings = CapacitySettings::new(30.0, 300, 5, AlphaPolicy::Mmse);
    let r31 = ergodic_capacity(&part("3,1"), &settings).unwrap().total_rate;
    let r22 = ergodic_capacity(&part("2,2"), &settings).unwrap().total_rate;
    assert!(r31 > r22, "(3,1) {r31} vs (2,2) {r22}");
}

#[test]
fn capacity_increases_with_snr() {
    for p in enumerate_partitions(4) {
        let trials = if p.groups() == 4 { 60 } else { 200 };
        let rates: Vec<f64> = [0.0, 10.0, 20.0, 30.0]
            .iter()
            .map(|&snr| ergodic_capacity(&p, &CapacitySettings::new(snr, trials, 9, AlphaPolicy::Mmse)).unwrap().total_rate)
            .collect();
        assert!(rates.windows(2).all(|w| w[1] > w[0]), "{p}: {rates:?}");
    }
}

#[test]
fn mmse_dominates_zero_forcing_at_low_snr() {
    for p in enumerate_partitions(4) {
        let trials = if p.groups() == 4 { 60 } else { 200 };
        for snr in [0.0, 15.0] {
            let mmse = ergodic_capacity(&p, &CapacitySettings::new(snr, trials, 13, AlphaPolicy::Mmse)).unwrap();
            let zf = ergodic_capacity(&p, &CapacitySettings::new(snr, trials, 13, AlphaPolicy::ZeroForcing)).unwrap();
            assert!(mean(&mmse.e_sinr) >= mean(&zf.e_sinr), "{p} at {snr} dB: {:?} vs {:?}", mmse.e_sinr, zf.e_sinr);
        }
    }
}

#[test]
fn inverse_sinr_falls_with_system_size() {
    let rows = asymptotic_sinr_experiment(&[8, 16, 32, 64], &[10.0], 400, 21).unwrap();
    for w in rows.windows(2) {
        let tolerance = 2.0 * (w[0].inv_sinr_std_error.powi(2) + w[1].inv_sinr_std_error.powi(2)).sqrt();
        assert!(w[1].mean_inv_sinr < w[0].mean_inv_sinr + tolerance, "n {} -> {}", w[0].n, w[1].n);
    }
    assert!(rows[3].mean_inv_sinr < rows[0].mean_inv_sinr);
}

#[test]
fn mean_sinr_exceeds_inverse_of_mean_inverse() {
    for row in asymptotic_sinr_experiment(&[10, 40], &[0.0, 10.0, 20.0], 200, 4).unwrap() {
        assert!(row.mean_sinr >= 1.0 / row.mean_inv_sinr, "n {} snr {}", row.n, row.snr_db);
        assert!(row.jensen_gap_db >= 0.0);
    }
}
