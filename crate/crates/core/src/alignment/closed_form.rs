//! Closed-form alignment chains for four users with five antennas.
//!
//! `map(rx, from, to)` is `H_{rx,to}^{-1} H_{rx,from}`: a precoder `U_to =
//! map · U_from` makes the two transmitters arrive at `rx` along the same
//! subspace. Users are 0-based throughout.

use crate::channel::EffectiveChannel;
use crate::error::{Error, Result};
use crate::linalg::{eigen, orthonormalize_columns, solve, CMat};
use crate::rng::{complex_gaussian, derive_seed, stream};

/// Relative eigenvalue separation below which a chosen eigenspace is ambiguous.
pub const EIGEN_SEPARATION: f64 = 1e-10;

/// `H_{rx,to}^{-1} H_{rx,from}`.
pub fn map(eff: &EffectiveChannel, rx: usize, from: usize, to: usize) -> Result<CMat> {
    solve(&eff.cross_block(rx, to).into_owned(), &eff.cross_block(rx, from).into_owned()).ok_or_else(|| {
        Error::DegenerateChannel(format!("cross block H[{rx},{to}] is singular"))
    })
}

/// Eigenvectors of the `count` largest-modulus eigenvalues, rejecting
/// eigenvalue collisions that would make the choice arbitrary.
pub fn leading_eigenvectors(m: &CMat, count: usize) -> Result<CMat> {
    let (values, vectors) = eigen(m)?;
    let scale = values.first().map(|v| v.norm()).unwrap_or(0.0).max(f64::MIN_POSITIVE);
    for s in 0..count {
        for (t, other) in values.iter().enumerate() {
            if t != s && (values[s] - other).norm() <= EIGEN_SEPARATION * scale {
                return Err(Error::DegenerateChannel(format!(
                    "eigenvalue {s} of the alignment map is repeated ({:.3e})",
                    values[s].norm()
                )));
            }
        }
    }
    Ok(vectors.columns(0, count).into_owned())
}

/// Partition `(4)`: no inter-group interference, every user sends five streams.
pub fn full_group(eff: &EffectiveChannel) -> Vec<CMat> {
    let n = eff.antennas();
    vec![CMat::identity(n, n); eff.users()]
}

/// Partition `(3,1)`: the three grouped users align at the lone receiver.
///
/// `U_0` is a random orthonormal 5x3 basis; `U_1, U_2` follow from it so that
/// all three arrive at receiver 3 in one 3-dimensional subspace. The lone
/// user's 2 streams are unconstrained.
pub fn three_one(eff: &EffectiveChannel, seed: u64) -> Result<Vec<CMat>> {
    let n = eff.antennas();
    let u0 = orthonormalize_columns(&complex_gaussian(&mut stream(derive_seed(seed, &[0])), n, 3));
    let u1 = map(eff, 3, 0, 1)? * &u0;
    let u2 = map(eff, 3, 1, 2)? * &u1;
    let u3 = orthonormalize_columns(&complex_gaussian(&mut stream(derive_seed(seed, &[3])), n, 2));
    Ok(vec![u0, u1, u2, u3])
}

/// Partition `(2,2)`: each pair aligns at both receivers of the other pair.
///
/// `U_2` spans an invariant subspace of the composite map through receivers
/// 0 and 1, so `U_3 = map(1; 2→3) U_2` also matches `U_2` at receiver 0.
/// Symmetrically for `U_0, U_1` at receivers 2 and 3.
pub fn two_two(eff: &EffectiveChannel) -> Result<Vec<CMat>> {
    let u2 = leading_eigenvectors(&(map(eff, 0, 3, 2)? * map(eff, 1, 2, 3)?), 2)?;
    let u3 = map(eff, 1, 2, 3)? * &u2;
    let u0 = leading_eigenvectors(&(map(eff, 2, 1, 0)? * map(eff, 3, 0, 1)?), 3)?;
    let u1 = map(eff, 3, 0, 1)? * &u0;
    Ok(vec![u0, u1, u2, u3])
}

/// Precoders of partition `(2,1,1)` with the two cyclic chain maps whose
/// leading eigenvectors seed them.
#[derive(Debug, Clone)]
pub struct TwoOneOne {
    pub precoders: Vec<CMat>,
    pub chains: [CMat; 2],
}

/// Partition `(2,1,1)`: two alignment chains, one per stream.
///
/// Stream `c` of user 1 is an eigenvector of a cycle through receivers 2, 1
/// (chain 0) or 2, 0 (chain 1) and 3, so the chain closes on itself. The
/// remaining users' columns are its images along the chain, and user 0 aligns
/// with user 1 at receiver 2 (chain 0) and receiver 3 (chain 1).
pub fn two_one_one(eff: &EffectiveChannel) -> Result<TwoOneOne> {
    let n = eff.antennas();
    let to_2 = map(eff, 3, 1, 2)?;
    let mut precoders = vec![CMat::zeros(n, 2); 4];
    let mut chains = Vec::with_capacity(2);
    for (c, via) in [1usize, 0].into_iter().enumerate() {
        let to_3 = map(eff, via, 2, 3)?;
        let chain = map(eff, 2, 3, 1)? * &to_3 * &to_2;
        let u1 = leading_eigenvectors(&chain, 1)?;
        let u2 = &to_2 * &u1;
        let u3 = &to_3 * &u2;
        let u0 = map(eff, 2 + c, 1, 0)? * &u1;
        for (user, col) in [(0, &u0), (1, &u1), (2, &u2), (3, &u3)] {
            precoders[user].column_mut(c).copy_from(&col.column(0));
        }
        chains.push(chain);
    }
    let chains: [CMat; 2] = chains.try_into().expect("two chains");
    Ok(TwoOneOne { precoders, chains })
}
