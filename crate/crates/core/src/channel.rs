//! Random channel generation, user partitions and group-wise pre-inversion.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrixView;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};
use crate::rng::{complex_gaussian, stream};
use crate::tikhonov::tikhonov_inverse;

/// One draw of the `K`-user channel: a `KN x KN` complex matrix viewed as a
/// `K x K` grid of `N x N` blocks `H_ij` (receiver `i`, transmitter `j`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    users: usize,
    antennas: usize,
    matrix: CMat,
}

impl ChannelRealization {
    pub fn from_matrix(users: usize, antennas: usize, matrix: CMat) -> Result<Self> {
        if users == 0 || antennas == 0 {
            return Err(Error::InvalidParameter("K and N must be positive".into()));
        }
        let dim = users * antennas;
        if matrix.shape() != (dim, dim) {
            return Err(Error::InvalidParameter(format!(
                "channel matrix must be {dim}x{dim}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { users, antennas, matrix })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn block(&self, rx: usize, tx: usize) -> DMatrixView<'_, crate::linalg::C64> {
        let n = self.antennas;
        self.matrix.view((rx * n, tx * n), (n, n))
    }
}

/// Draw a channel with i.i.d. unit-variance circular complex Gaussian entries.
pub fn sample_channel(users: usize, antennas: usize, seed: u64) -> ChannelRealization {
    assert!(users >= 1 && antennas >= 1, "K and N must be positive");
    let dim = users * antennas;
    let matrix = complex_gaussian(&mut stream(seed), dim, dim);
    ChannelRealization { users, antennas, matrix }
}

/// Group sizes `(k_1, ..., k_m)`; users are assigned to groups contiguously in
/// order, so group `n` holds the `k_n` users following those of groups `< n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    sizes: Vec<usize>,
}

impl Partition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.iter().any(|&k| k == 0) {
            return Err(Error::InvalidParameter(format!("partition parts must be positive, got {sizes:?}")));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn users(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn groups(&self) -> usize {
        self.sizes.len()
    }

    /// Users belonging to group `g`.
    pub fn group_users(&self, g: usize) -> Range<usize> {
        let start: usize = self.sizes[..g].iter().sum();
        start..start + self.sizes[g]
    }

    pub fn group_of(&self, user: usize) -> usize {
        let mut end = 0;
        for (g, &k) in self.sizes.iter().enumerate() {
            end += k;
            if user < end {
                return g;
            }
        }
        panic!("user {user} outside partition of {} users", self.users());
    }

    pub fn same_group(&self, a: usize, b: usize) -> bool {
        self.group_of(a) == self.group_of(b)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.sizes.iter().map(|k| k.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for Partition {
    type Err = Error;

    /// Accepts `3,1`, `(3,1)` and `3+1`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let sizes = inner
            .split([',', '+'])
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidParameter(format!("cannot parse partition {s:?}")))?;
        Partition::new(sizes)
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All partitions of `k`, parts sorted descending, in descending
/// lexicographic order: `(4), (3,1), (2,2), (2,1,1), (1,1,1,1)`.
pub fn enumerate_partitions(k: usize) -> Vec<Partition> {
    assert!(k >= 1, "K must be positive");
    fn extend(remaining: usize, max_part: usize, prefix: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if remaining == 0 {
            out.push(Partition { sizes: prefix.clone() });
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            prefix.push(part);
            extend(remaining - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(k, k, &mut Vec::new(), &mut out);
    out
}

/// Channel seen by the alignment layer after each group has pre-inverted its
/// own subchannel.
///
/// With `G_n = H_n/√(kN)` the `n`-th group's normalized diagonal subchannel,
/// the group encodes with `A_n = G_{nα}/√(kN)`. The effective matrix is
/// `H·diag(A_1, ..., A_m)`; its diagonal group blocks equal `I + Q_n` with
/// `Q_n = G_n G_{nα} − I`.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    partition: Partition,
    antennas: usize,
    sigma2: f64,
    alpha: f64,
    encoders: Vec<CMat>,
    residuals: Vec<CMat>,
    matrix: CMat,
}

impl EffectiveChannel {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn users(&self) -> usize {
        self.partition.users()
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Scaled Tikhonov encoder `A_n` of group `g`.
    pub fn encoder(&self, g: usize) -> &CMat {
        &self.encoders[g]
    }

    /// Residual `Q_n = G_n G_{nα} − I` of group `g`.
    pub fn residual(&self, g: usize) -> &CMat {
        &self.residuals[g]
    }

    /// Full effective matrix `H·diag(A_n)`.
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Effective `N x N` gain from transmitter `tx` to receiver `rx`.
    ///
    /// For users in different groups this is the alignment cross block; for
    /// users sharing a group it equals the matching block of `I + Q_n`.
    pub fn cross_block(&self, rx: usize, tx: usize) -> DMatrixView<'_, crate::linalg::C64> {
        let n = self.antennas;
        self.matrix.view((rx * n, tx * n), (n, n))
    }

    pub fn direct(&self, user: usize) -> DMatrixView<'_, crate::linalg::C64> {
        self.cross_block(user, user)
    }

    /// `N x N` block of `Q_n` between two members of the same group.
    pub fn residual_block(&self, rx: usize, tx: usize) -> DMatrixView<'_, crate::linalg::C64> {
        let g = self.partition.group_of(rx);
        assert_eq!(g, self.partition.group_of(tx), "users {rx} and {tx} are in different groups");
        let first = self.partition.group_users(g).start;
        let n = self.antennas;
        self.residuals[g].view(((rx - first) * n, (tx - first) * n), (n, n))
    }

    /// Transmitters whose signal is interference to be aligned at `rx`
    /// (every user outside `rx`'s group).
    pub fn interferers(&self, rx: usize) -> Vec<usize> {
        (0..self.users()).filter(|&j| !self.partition.same_group(rx, j)).collect()
    }

    /// Expected transmit power of one member of `user`'s group,
    /// `E_i = (1/k)(‖G_{nα}‖²_F/(kN))`, which equals `‖A_n‖²_F / k`.
    pub fn user_energy(&self, user: usize) -> f64 {
        let g = self.partition.group_of(user);
        self.encoders[g].norm_squared() / self.partition.sizes()[g] as f64
    }
}

/// Pre-invert every group's diagonal subchannel with the scaled Tikhonov
/// inverse, singleton groups included.
pub fn apply_group_preinversion(
    ch: &ChannelRealization,
    partition: &Partition,
    sigma2: f64,
    alpha: f64,
) -> Result<EffectiveChannel> {
    if partition.users() != ch.users() {
        return Err(Error::InvalidParameter(format!(
            "partition {partition} covers {} users but the channel has {}",
            partition.users(),
            ch.users()
        )));
    }
    if !(alpha >= 0.0) || !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} and sigma2 = {sigma2} must be >= 0")));
    }
    let n = ch.antennas();
    let h = ch.matrix();
    let mut encoders = Vec::with_capacity(partition.groups());
    let mut residuals = Vec::with_capacity(partition.groups());
    let mut matrix = CMat::zeros(h.nrows(), h.ncols());
    for g in 0..partition.groups() {
        let users = partition.group_users(g);
        let (offset, dim) = (users.start * n, users.len() * n);
        let scale = (dim as f64).sqrt();
        let g_n = h.view((offset, offset), (dim, dim)) / c64(scale, 0.0);
        let g_alpha = tikhonov_inverse(&g_n, alpha)?;
        let residual = &g_n * &g_alpha - CMat::identity(dim, dim);
        let encoder = g_alpha / c64(scale, 0.0);
        let cols = h.columns(offset, dim) * &encoder;
        matrix.columns_mut(offset, dim).copy_from(&cols);
        encoders.push(encoder);
        residuals.push(residual);
    }
    Ok(EffectiveChannel {
        partition: partition.clone(),
        antennas: n,
        sigma2,
        alpha,
        encoders,
        residuals,
        matrix,
    })
}
