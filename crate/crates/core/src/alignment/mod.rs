//! Interference alignment on the effective (post pre-inversion) channel.
//!
//! Members of a group see each other only through the small residual `Q_n`,
//! which is treated as noise; alignment removes the interference between
//! groups. For `K = 4` users with `N = 5` antennas every partition has a
//! known degrees-of-freedom tuple, and [`construct_strategy`] builds precoders
//! achieving it: closed-form alignment chains for `(4)`, `(3,1)`, `(2,2)` and
//! `(2,1,1)`, and iterative leakage minimization for `(1,1,1,1)`.
//!
//! [`certify`] re-derives every interference space from scratch and is the
//! single acceptance check for a strategy, whichever backend produced it.

pub mod closed_form;
pub mod dump;
pub mod iterative;

use num_rational::Rational64;

use crate::channel::{EffectiveChannel, Partition};
use crate::error::{Error, Result};
use crate::linalg::{left_singular_basis, numerical_rank, singular_values, unit_columns, CMat, RANK_TOLERANCE};

pub use dump::StrategyDocument;

/// Leakage above which [`certify`] rejects an otherwise consistent strategy.
pub const CERTIFIED_LEAKAGE: f64 = 1e-6;

/// Combiner rows must be orthonormal to this Frobenius tolerance.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;

/// Per-user precoders `U_i` (`N x d_i`) and combiners `V_i` (`d_i x N`,
/// orthonormal rows) together with the achieved degrees of freedom.
#[derive(Debug, Clone)]
pub struct IaStrategy {
    pub partition: Partition,
    pub antennas: usize,
    pub dof: Vec<usize>,
    pub precoders: Vec<CMat>,
    pub combiners: Vec<CMat>,
    /// Largest relative interference surviving a combiner; see [`leakage`].
    pub leakage: f64,
}

/// Degrees-of-freedom tuple of a partition and its normalized sum
/// `C = Σ d_i / (KN)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofRecord {
    pub partition: Partition,
    pub dof: Vec<usize>,
    pub normalized_sum_dof: Rational64,
}

impl DofRecord {
    pub fn new(partition: Partition, dof: Vec<usize>, antennas: usize) -> Self {
        let total: usize = dof.iter().sum();
        let normalized_sum_dof = Rational64::new(total as i64, (partition.users() * antennas) as i64);
        Self { partition, dof, normalized_sum_dof }
    }
}

/// Outcome of a successful [`certify`].
#[derive(Debug, Clone)]
pub struct Certificate {
    pub record: DofRecord,
    pub interference_dims: Vec<usize>,
    pub leakage: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct AlignmentOptions {
    /// Seed for random free precoders and iterative initialization.
    pub seed: u64,
    pub max_sweeps: usize,
    pub target_leakage: f64,
    /// Run Levenberg-Marquardt refinement on the alignment equations once the
    /// alternating sweeps have made progress.
    pub refine: bool,
    pub refine_after: usize,
    pub refine_every: usize,
    pub max_refine_iterations: usize,
}

impl Default for AlignmentOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_sweeps: 5000,
            target_leakage: 1e-10,
            refine: true,
            refine_after: 50,
            refine_every: 250,
            max_refine_iterations: 100,
        }
    }
}

impl AlignmentOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

/// Per-user DoF ceiling `2N/(K+1)` for the symmetric channel without data sharing.
pub fn dof_bound(users: usize, antennas: usize) -> Rational64 {
    assert!(users >= 2 && antennas >= 1, "bound needs K >= 2 and N >= 1");
    Rational64::new(2 * antennas as i64, users as i64 + 1)
}

/// Degrees of freedom achievable by each partition of four five-antenna users.
pub fn dof_table(partition: &Partition, antennas: usize) -> Result<DofRecord> {
    let users = partition.users();
    if (users, antennas) != (4, 5) {
        return Err(Error::UnsupportedConfiguration { k: users, n: antennas });
    }
    let dof = match partition.sizes() {
        [4] => vec![5, 5, 5, 5],
        [3, 1] => vec![3, 3, 3, 2],
        [2, 2] => vec![3, 3, 2, 2],
        [2, 1, 1] | [1, 1, 1, 1] => vec![2, 2, 2, 2],
        other => {
            return Err(Error::InvalidParameter(format!(
                "partition {other:?} is not in canonical descending form"
            )))
        }
    };
    Ok(DofRecord::new(partition.clone(), dof, antennas))
}

/// Build an alignment strategy for the effective channel's partition.
pub fn construct_strategy(eff: &EffectiveChannel, opts: &AlignmentOptions) -> Result<IaStrategy> {
    let record = dof_table(eff.partition(), eff.antennas())?;
    let precoders = match eff.partition().sizes() {
        [4] => closed_form::full_group(eff),
        [3, 1] => closed_form::three_one(eff, opts.seed)?,
        [2, 2] => closed_form::two_two(eff)?,
        [2, 1, 1] => closed_form::two_one_one(eff)?.precoders,
        [1, 1, 1, 1] => iterative::align_iteratively(eff, &record.dof, opts)?.precoders,
        _ => unreachable!("dof_table rejects non-canonical partitions"),
    };
    let precoders: Vec<CMat> = precoders.iter().map(unit_columns).collect();
    let combiners = receive_filters(eff, &precoders, &record.dof)?;
    let leakage = leakage(eff, &precoders, &combiners);
    Ok(IaStrategy {
        partition: eff.partition().clone(),
        antennas: eff.antennas(),
        dof: record.dof,
        precoders,
        combiners,
        leakage,
    })
}

/// Columns `H_ij U_j` of every transmitter outside `rx`'s group, side by side.
pub fn interference_matrix(eff: &EffectiveChannel, precoders: &[CMat], rx: usize) -> CMat {
    let n = eff.antennas();
    let blocks: Vec<CMat> = eff
        .interferers(rx)
        .into_iter()
        .map(|j| eff.cross_block(rx, j) * &precoders[j])
        .collect();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(n, cols);
    let mut c = 0;
    for b in blocks {
        out.columns_mut(c, b.ncols()).copy_from(&b);
        c += b.ncols();
    }
    out
}

/// Numerical dimension of the interference space at `rx`.
pub fn interference_dim(eff: &EffectiveChannel, precoders: &[CMat], rx: usize) -> usize {
    let m = interference_matrix(eff, precoders, rx);
    if m.ncols() == 0 {
        return 0;
    }
    numerical_rank(&singular_values(&m))
}

/// Combiners projecting onto the orthogonal complement of each receiver's
/// interference space.
///
/// When the complement is larger than `d_i`, the `d_i` rows are chosen to
/// maximize the smallest singular value of `V_i · direct_i · U_i`.
pub fn receive_filters(eff: &EffectiveChannel, precoders: &[CMat], dof: &[usize]) -> Result<Vec<CMat>> {
    let n = eff.antennas();
    (0..eff.users())
        .map(|i| {
            let m = interference_matrix(eff, precoders, i);
            let (rank, complement) = if m.ncols() == 0 {
                (0, CMat::identity(n, n))
            } else {
                let (svals, basis) = left_singular_basis(&m);
                let rank = numerical_rank(&svals);
                (rank, basis.columns(rank, n - rank).adjoint())
            };
            if rank + dof[i] > n {
                return Err(Error::FeasibilityViolated { user: i, dof: dof[i], interference_dim: rank, antennas: n });
            }
            if complement.nrows() == dof[i] {
                return Ok(complement);
            }
            let projected = &complement * eff.direct(i) * &precoders[i];
            let (_, basis) = left_singular_basis(&projected);
            Ok(basis.columns(0, dof[i]).adjoint() * complement)
        })
        .collect()
}

/// Largest relative residual `‖V_i H_ij u‖ / ‖H_ij u‖` over receivers `i`,
/// cross-group transmitters `j` and precoder columns `u` of `U_j`.
///
/// Measured per column so that rescaling a precoder column leaves it unchanged.
pub fn leakage(eff: &EffectiveChannel, precoders: &[CMat], combiners: &[CMat]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..eff.users() {
        for j in eff.interferers(i) {
            let arriving = eff.cross_block(i, j) * &precoders[j];
            let surviving = &combiners[i] * &arriving;
            for (a, s) in arriving.column_iter().zip(surviving.column_iter()) {
                let denom = a.norm();
                if denom > 0.0 {
                    worst = worst.max(s.norm() / denom);
                }
            }
        }
    }
    worst
}

fn fail(check: &'static str, user: usize, detail: String) -> Error {
    Error::CertificationFailed { check, user, detail }
}

/// Independently re-check a strategy against the effective channel.
///
/// Checks, in order over all users: shapes, precoder rank, combiner
/// orthonormality, feasibility `d_i + dim I_i <= N`, decodability
/// `rank(V_i direct_i U_i) = d_i`, leakage, and the per-user DoF floor
/// `2N/(K+1)`. The first violation is returned as `CertificationFailed`.
pub fn certify(eff: &EffectiveChannel, strategy: &IaStrategy) -> Result<Certificate> {
    let (k, n) = (eff.users(), eff.antennas());
    if strategy.precoders.len() != k || strategy.combiners.len() != k || strategy.dof.len() != k {
        return Err(fail("shape", 0, format!("expected {k} users")));
    }
    for i in 0..k {
        let d = strategy.dof[i];
        if strategy.precoders[i].shape() != (n, d) || strategy.combiners[i].shape() != (d, n) {
            return Err(fail(
                "shape",
                i,
                format!(
                    "U is {:?}, V is {:?}, d = {d}",
                    strategy.precoders[i].shape(),
                    strategy.combiners[i].shape()
                ),
            ));
        }
    }
    for (i, u) in strategy.precoders.iter().enumerate() {
        let s = singular_values(u);
        let (hi, lo) = (s[0], s[s.len() - 1]);
        if !(lo > RANK_TOLERANCE * hi) {
            return Err(fail("rank", i, format!("precoder singular values span [{lo:.3e}, {hi:.3e}]")));
        }
    }
    for (i, v) in strategy.combiners.iter().enumerate() {
        let d = v.nrows();
        let err = (v * v.adjoint() - CMat::identity(d, d)).norm();
        if err > ORTHONORMALITY_TOLERANCE {
            return Err(fail("orthonormality", i, format!("|V V^H - I| = {err:.3e}")));
        }
    }
    let interference_dims: Vec<usize> = (0..k).map(|i| interference_dim(eff, &strategy.precoders, i)).collect();
    for i in 0..k {
        if strategy.dof[i] + interference_dims[i] > n {
            return Err(fail(
                "feasibility",
                i,
                format!("d = {} with interference dimension {}", strategy.dof[i], interference_dims[i]),
            ));
        }
    }
    for i in 0..k {
        let effective = &strategy.combiners[i] * eff.direct(i) * &strategy.precoders[i];
        let rank = numerical_rank(&singular_values(&effective));
        if rank != strategy.dof[i] {
            return Err(fail("decodability", i, format!("rank(V H U) = {rank}, d = {}", strategy.dof[i])));
        }
    }
    let leak = leakage(eff, &strategy.precoders, &strategy.combiners);
    if !(leak <= CERTIFIED_LEAKAGE) {
        return Err(fail("leakage", 0, format!("leakage {leak:.3e} exceeds {CERTIFIED_LEAKAGE:.1e}")));
    }
    if k >= 2 {
        let floor = dof_bound(k, n);
        for (i, &d) in strategy.dof.iter().enumerate() {
            if Rational64::from_integer(d as i64) < floor {
                return Err(fail("dof-bound", i, format!("d = {d} below 2N/(K+1) = {floor}")));
            }
        }
    }
    Ok(Certificate {
        record: DofRecord::new(strategy.partition.clone(), strategy.dof.clone(), n),
        interference_dims,
        leakage: leak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_group_preinversion, enumerate_partitions, sample_channel};
    use crate::linalg::{c64, orthonormalize_columns};
    use crate::rng::{complex_gaussian, stream};

    fn p(s: &str) -> Partition {
        s.parse().unwrap()
    }

    fn effective(part: &str, seed: u64) -> EffectiveChannel {
        apply_group_preinversion(&sample_channel(4, 5, seed), &p(part), 0.01, 0.01).unwrap()
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(dof_bound(4, 5), Rational64::from_integer(2));
        assert_eq!(dof_bound(3, 2), Rational64::from_integer(1));
        assert_eq!(dof_bound(5, 3), Rational64::from_integer(1));
        assert_eq!(dof_bound(2, 2), Rational64::new(4, 3));
    }

    #[test]
    fn table_rows() {
        let row = |s: &str| dof_table(&p(s), 5).unwrap();
        assert_eq!(row("1,1,1,1").dof, [2, 2, 2, 2]);
        assert_eq!(row("1,1,1,1").normalized_sum_dof, Rational64::new(2, 5));
        assert_eq!(row("2,1,1").normalized_sum_dof, Rational64::new(2, 5));
        assert_eq!(row("2,2").normalized_sum_dof, Rational64::new(1, 2));
        assert_eq!(row("3,1").dof, [3, 3, 3, 2]);
        assert_eq!(row("3,1").normalized_sum_dof, Rational64::new(11, 20));
        assert_eq!(row("4").dof, [5, 5, 5, 5]);
        assert_eq!(row("4").normalized_sum_dof, Rational64::from_integer(1));
        for part in enumerate_partitions(4) {
            let r = dof_table(&part, 5).unwrap();
            assert!(r.dof.iter().all(|&d| Rational64::from_integer(d as i64) >= dof_bound(4, 5)));
        }
    }

    #[test]
    fn table_rejects_other_sizes() {
        assert!(matches!(dof_table(&p("2,1"), 5), Err(Error::UnsupportedConfiguration { k: 3, n: 5 })));
        assert!(matches!(dof_table(&p("2,2"), 4), Err(Error::UnsupportedConfiguration { .. })));
        let eff = apply_group_preinversion(&sample_channel(3, 5, 0), &p("2,1"), 0.1, 0.1).unwrap();
        assert!(construct_strategy(&eff, &AlignmentOptions::default()).is_err());
    }

    #[test]
    fn full_group_has_no_interference() {
        let eff = effective("4", 1);
        let s = construct_strategy(&eff, &AlignmentOptions::default()).unwrap();
        assert_eq!(s.leakage, 0.0);
        assert_eq!(s.dof, [5, 5, 5, 5]);
        for v in &s.combiners {
            assert_eq!(v, &CMat::identity(5, 5));
        }
        let cert = certify(&eff, &s).unwrap();
        assert_eq!(cert.interference_dims, [0, 0, 0, 0]);
    }

    #[test]
    fn two_two_interference_dimensions() {
        let eff = effective("2,2", 3);
        let s = construct_strategy(&eff, &AlignmentOptions::default()).unwrap();
        let cert = certify(&eff, &s).unwrap();
        assert_eq!(cert.interference_dims, [2, 2, 3, 3]);
        assert!(s.leakage < 1e-8);
    }

    #[test]
    fn coordinate_interference_complement() {
        // interference along e1, e2, e3 leaves e4, e5 for a 2-stream receiver
        let eff = effective("3,1", 0);
        let mut precoders = vec![CMat::zeros(5, 3); 3];
        precoders.push(CMat::zeros(5, 2));
        // choose U_j so that every H_3j U_j spans e1..e3
        let target = CMat::identity(5, 5).columns(0, 3).into_owned();
        for (j, u) in precoders.iter_mut().enumerate().take(3) {
            *u = crate::linalg::solve(&eff.cross_block(3, j).into_owned(), &target).unwrap();
        }
        precoders[3] = orthonormalize_columns(&complex_gaussian(&mut stream(1), 5, 2));
        let v = receive_filters(&eff, &precoders, &[3, 3, 3, 2]).unwrap();
        let rows = &v[3];
        assert_eq!(rows.shape(), (2, 5));
        assert!(rows.columns(0, 3).norm() < 1e-12);
        assert!((rows * rows.adjoint() - CMat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn three_one_residual_at_lone_receiver() {
        let eff = effective("3,1", 8);
        let s = construct_strategy(&eff, &AlignmentOptions::with_seed(4)).unwrap();
        for j in 0..3 {
            let arriving = eff.cross_block(3, j) * &s.precoders[j];
            let ratio = (&s.combiners[3] * &arriving).norm() / arriving.norm();
            assert!(ratio < 1e-8, "{j}: {ratio}");
        }
    }

    #[test]
    fn feasibility_violation_is_reported() {
        let eff = effective("2,2", 2);
        let precoders: Vec<CMat> = [3, 3, 2, 2]
            .iter()
            .enumerate()
            .map(|(i, &d)| orthonormalize_columns(&complex_gaussian(&mut stream(i as u64), 5, d)))
            .collect();
        let err = receive_filters(&eff, &precoders, &[3, 3, 2, 2]).unwrap_err();
        assert!(matches!(err, Error::FeasibilityViolated { user: 0, interference_dim: 4, .. }));
    }

    #[test]
    fn certification_catches_duplicate_column() {
        let eff = effective("3,1", 5);
        let mut s = construct_strategy(&eff, &AlignmentOptions::default()).unwrap();
        let first = s.precoders[0].column(0).into_owned();
        s.precoders[0].column_mut(1).copy_from(&first);
        match certify(&eff, &s) {
            Err(Error::CertificationFailed { check, user, .. }) => assert_eq!((check, user), ("rank", 0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn certification_catches_misaligned_precoder() {
        let eff = effective("2,2", 6);
        let mut s = construct_strategy(&eff, &AlignmentOptions::default()).unwrap();
        s.precoders[3] = complex_gaussian(&mut stream(77), 5, 2);
        match certify(&eff, &s) {
            Err(Error::CertificationFailed { check, user, .. }) => assert_eq!((check, user), ("feasibility", 0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn certification_catches_bad_combiner() {
        let eff = effective("2,2", 6);
        let mut s = construct_strategy(&eff, &AlignmentOptions::default()).unwrap();
        s.combiners[1] *= c64(1.5, 0.0);
        assert!(matches!(
            certify(&eff, &s),
            Err(Error::CertificationFailed { check: "orthonormality", user: 1, .. })
        ));
        let mut s = construct_strategy(&eff, &AlignmentOptions::default()).unwrap();
        s.combiners[2] = orthonormalize_columns(&complex_gaussian(&mut stream(3), 5, 2)).adjoint();
        assert!(matches!(certify(&eff, &s), Err(Error::CertificationFailed { check: "leakage", .. })));
    }

    #[test]
    fn column_scaling_is_invisible_to_certification() {
        for part in ["3,1", "2,2", "2,1,1"] {
            let eff = effective(part, 12);
            let s = construct_strategy(&eff, &AlignmentOptions::default()).unwrap();
            let base = certify(&eff, &s).unwrap();
            let mut scaled = s.clone();
            for (i, u) in scaled.precoders.iter_mut().enumerate() {
                let factor = c64(0.3 + i as f64, -2.0 + 0.5 * i as f64);
                u.column_mut(0).scale_mut(factor.norm());
                let phase = factor / factor.norm();
                u.column_mut(0).apply(|z| *z *= phase);
            }
            let cert = certify(&eff, &scaled).unwrap();
            assert_eq!(cert.record, base.record);
            assert_eq!(cert.interference_dims, base.interference_dims);
            assert!((cert.leakage - base.leakage).abs() <= 1e-3 * base.leakage + 1e-13);
        }
    }
}
