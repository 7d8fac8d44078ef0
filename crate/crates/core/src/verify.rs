//! Seeded invariant suites shared by the `verify` command and the acceptance
//! tests. Every suite checks one property on independent seeded instances.

use serde::Serialize;

use crate::alignment::{certify, construct_strategy, dof_table, AlignmentOptions};
use crate::channel::{apply_group_preinversion, enumerate_partitions, sample_channel};
use crate::error::Result;
use crate::linalg::{c64, rel_frobenius, CMat};
use crate::rng::{complex_gaussian, derive_seed, stream};
use crate::tikhonov::{mp_expectation, tikhonov_inverse, tikhonov_inverse_svd};

pub const DEFAULT_INSTANCES: usize = 100;

/// Noise variance and regularization used when checking strategies (20 dB, MMSE).
pub const CHECK_SIGMA2: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
    /// Description of the first failing instance, if any.
    pub first_failure: Option<String>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

type Check = fn(u64, usize) -> std::result::Result<(), String>;

pub const SUITES: &[(&str, Check)] = &[
    ("tikhonov-svd-form", svd_form),
    ("frobenius-symmetry", frobenius_symmetry),
    ("normalized-product-identity", normalized_product),
    ("preinversion-reconstruction", reconstruction),
    ("dof-table-certification", table_certification),
    ("combiner-orthonormality", combiner_orthonormality),
    ("certification-scale-invariance", scale_invariance),
    ("quadrature-normalization", quadrature_normalization),
];

fn rng_matrix(seed: u64, n: usize) -> CMat {
    complex_gaussian(&mut stream(seed), n, n)
}

fn svd_form(seed: u64, _: usize) -> std::result::Result<(), String> {
    let n = 2 + (seed % 7) as usize;
    let b = rng_matrix(seed, n);
    let alpha = 10f64.powf(-3.0 + 3.0 * ((seed >> 8) % 1000) as f64 / 1000.0);
    let direct = tikhonov_inverse(&b, alpha).map_err(|e| e.to_string())?;
    let err = rel_frobenius(&direct, &tikhonov_inverse_svd(&b, alpha));
    (err <= 1e-10).then_some(()).ok_or(format!("n = {n}, alpha = {alpha:.3e}: relative error {err:.3e}"))
}

fn frobenius_symmetry(seed: u64, _: usize) -> std::result::Result<(), String> {
    let n = 2 + (seed % 19) as usize;
    let g = rng_matrix(seed, n).unscale((n as f64).sqrt());
    let g_alpha = tikhonov_inverse(&g, 0.1).map_err(|e| e.to_string())?;
    let id = CMat::identity(n, n);
    let left = (&g * &g_alpha - &id).norm();
    let right = (&g_alpha * &g - &id).norm();
    let err = (left - right).abs() / left.max(f64::MIN_POSITIVE);
    (err <= 1e-10).then_some(()).ok_or(format!("n = {n}: |{left:.6e} - {right:.6e}| relative {err:.3e}"))
}

fn normalized_product(seed: u64, _: usize) -> std::result::Result<(), String> {
    let n = 5;
    let alpha = 0.1;
    let h = rng_matrix(seed, n);
    let g = h.unscale((n as f64).sqrt());
    let lhs = &g * tikhonov_inverse(&g, alpha).map_err(|e| e.to_string())?;
    let rhs = &h * tikhonov_inverse(&h, n as f64 * alpha).map_err(|e| e.to_string())?;
    let err = rel_frobenius(&lhs, &rhs);
    (err <= 1e-10).then_some(()).ok_or(format!("relative error {err:.3e}"))
}

fn reconstruction(seed: u64, instance: usize) -> std::result::Result<(), String> {
    let parts = enumerate_partitions(4);
    let part = &parts[instance % parts.len()];
    let ch = sample_channel(4, 5, seed);
    let eff = apply_group_preinversion(&ch, part, CHECK_SIGMA2, CHECK_SIGMA2).map_err(|e| e.to_string())?;
    let encoders: Vec<CMat> = (0..part.groups()).map(|g| eff.encoder(g).clone()).collect();
    let full = ch.matrix() * crate::linalg::block_diag(&encoders);
    for g in 0..part.groups() {
        let users = part.group_users(g);
        let dim = users.len() * 5;
        let block = full.view((users.start * 5, users.start * 5), (dim, dim)).into_owned();
        let err = rel_frobenius(&block, &(CMat::identity(dim, dim) + eff.residual(g)));
        if err > 1e-10 {
            return Err(format!("{part} group {g}: diagonal block off by {err:.3e}"));
        }
    }
    for i in 0..4 {
        for j in eff.interferers(i) {
            let err = rel_frobenius(&full.view((i * 5, j * 5), (5, 5)).into_owned(), &eff.cross_block(i, j).into_owned());
            if err > 1e-10 {
                return Err(format!("{part} cross block ({i},{j}) off by {err:.3e}"));
            }
        }
    }
    Ok(())
}

fn strategy_for(seed: u64, instance: usize) -> Result<(crate::channel::EffectiveChannel, crate::alignment::IaStrategy)> {
    let parts = enumerate_partitions(4);
    let part = &parts[instance % parts.len()];
    let eff = apply_group_preinversion(&sample_channel(4, 5, seed), part, CHECK_SIGMA2, CHECK_SIGMA2)?;
    let s = construct_strategy(&eff, &AlignmentOptions::with_seed(derive_seed(seed, &[1])))?;
    Ok((eff, s))
}

fn table_certification(seed: u64, instance: usize) -> std::result::Result<(), String> {
    let (eff, s) = strategy_for(seed, instance).map_err(|e| e.to_string())?;
    let cert = certify(&eff, &s).map_err(|e| e.to_string())?;
    let expected = dof_table(eff.partition(), 5).map_err(|e| e.to_string())?;
    (cert.record == expected)
        .then_some(())
        .ok_or(format!("{}: certified {:?}, expected {:?}", eff.partition(), cert.record.dof, expected.dof))
}

fn combiner_orthonormality(seed: u64, instance: usize) -> std::result::Result<(), String> {
    let (eff, s) = strategy_for(seed, instance).map_err(|e| e.to_string())?;
    for (i, v) in s.combiners.iter().enumerate() {
        let d = v.nrows();
        let err = (v * v.adjoint() - CMat::identity(d, d)).norm();
        if err > 1e-10 {
            return Err(format!("{} user {i}: |V V^H - I| = {err:.3e}", eff.partition()));
        }
    }
    Ok(())
}

fn scale_invariance(seed: u64, instance: usize) -> std::result::Result<(), String> {
    let (eff, s) = strategy_for(seed, instance).map_err(|e| e.to_string())?;
    let base = certify(&eff, &s).map_err(|e| e.to_string())?;
    let mut scaled = s.clone();
    let mut rng = stream(derive_seed(seed, &[2]));
    for u in scaled.precoders.iter_mut() {
        let factors = complex_gaussian(&mut rng, 1, u.ncols());
        for (mut col, f) in u.column_iter_mut().zip(factors.iter()) {
            col *= *f * c64(1.0 + 9.0 * f.norm(), 0.0);
        }
    }
    let cert = certify(&eff, &scaled).map_err(|e| format!("scaled strategy: {e}"))?;
    let leak_ok = (cert.leakage - base.leakage).abs() <= 1e-6 * base.leakage + 1e-13;
    if cert.record != base.record || cert.interference_dims != base.interference_dims || !leak_ok {
        return Err(format!(
            "{}: dims {:?} -> {:?}, leakage {:.3e} -> {:.3e}",
            eff.partition(),
            base.interference_dims,
            cert.interference_dims,
            base.leakage,
            cert.leakage
        ));
    }
    Ok(())
}

fn quadrature_normalization(seed: u64, _: usize) -> std::result::Result<(), String> {
    let c = 0.5 + (seed % 1000) as f64 / 100.0;
    let mass = mp_expectation(|_| c).map_err(|e| e.to_string())?;
    let mean = mp_expectation(|x| c * x).map_err(|e| e.to_string())?;
    let err = ((mass - c).abs()).max((mean - c).abs()) / c;
    (err <= 1e-10).then_some(()).ok_or(format!("c = {c}: mass {mass}, mean {mean}"))
}

/// Run one suite on `instances` seeded instances.
pub fn run_suite(name: &'static str, check: Check, seed: u64, instances: usize) -> SuiteReport {
    let suite_id = SUITES.iter().position(|(n, _)| *n == name).unwrap_or(usize::MAX) as u64;
    let mut passed = 0;
    let mut first_failure = None;
    for k in 0..instances {
        match check(derive_seed(seed, &[suite_id, k as u64]), k) {
            Ok(()) => passed += 1,
            Err(msg) => {
                first_failure.get_or_insert(format!("instance {k}: {msg}"));
            }
        }
    }
    SuiteReport { name, passed, total: instances, first_failure }
}

/// Every suite, in declaration order.
pub fn run_all(seed: u64, instances: usize) -> Vec<SuiteReport> {
    SUITES.iter().map(|&(name, check)| run_suite(name, check, seed, instances)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_on_a_few_instances() {
        for r in run_all(7, 10) {
            assert!(r.ok(), "{}: {:?}", r.name, r.first_failure);
        }
    }

    #[test]
    fn failures_are_reported() {
        fn always_fails(_: u64, _: usize) -> std::result::Result<(), String> {
            Err("nope".into())
        }
        let r = run_suite("synthetic", always_fails, 1, 3);
        assert_eq!((r.passed, r.total), (0, 3));
        assert_eq!(r.first_failure.as_deref(), Some("instance 0: nope"));
    }
}
