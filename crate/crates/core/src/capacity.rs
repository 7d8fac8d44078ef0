//! Monte-Carlo SINR, ergodic rates and the large-system SINR experiment.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{certify, construct_strategy, AlignmentOptions, IaStrategy};
use crate::channel::{apply_group_preinversion, sample_channel, EffectiveChannel, Partition};
use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, derive_seed, stream};
use crate::tikhonov::{asymptotic_inv_sinr, optimal_alpha, preinversion_sinr, sigma2_from_snr_db, to_db};

/// Attempts per trial before a rejection is treated as a hard failure.
pub const MAX_ATTEMPTS: u64 = 64;

/// Substream tag for the alignment seed of a trial.
const ALIGNMENT_STREAM: u64 = 0xA11C;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AlphaPolicy {
    /// `α = σ²`.
    Mmse,
    /// `α = 0`, exact group inverses.
    ZeroForcing,
}

impl AlphaPolicy {
    pub fn alpha(self, sigma2: f64) -> f64 {
        match self {
            AlphaPolicy::Mmse => optimal_alpha(sigma2),
            AlphaPolicy::ZeroForcing => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlphaPolicy::Mmse => "mmse",
            AlphaPolicy::ZeroForcing => "zeroForcing",
        }
    }
}

impl fmt::Display for AlphaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlphaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmse" => Ok(AlphaPolicy::Mmse),
            "zeroForcing" | "zero-forcing" | "zf" => Ok(AlphaPolicy::ZeroForcing),
            other => Err(Error::InvalidParameter(format!("unknown alpha policy '{other}'"))),
        }
    }
}

/// How per-trial SINRs are turned into a rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RateRule {
    /// `log2(1 + E[SINR])`.
    #[default]
    LogOfMean,
    /// `E[log2(1 + SINR)]`.
    MeanOfLog,
}

/// Per-user SINR of one channel draw and its components.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub sinr: Vec<f64>,
    pub signal: Vec<f64>,
    pub interference: Vec<f64>,
    pub noise: Vec<f64>,
    pub energy: Vec<f64>,
}

/// SINR of every user after pre-inversion, alignment and combining.
///
/// With transmit power normalized by the group energy `E`, user `i` sees
/// signal `‖V_i U_i‖²/E_i`, noise `‖V_i‖²σ²`, and interference from its own
/// rows of `V Q U` (its group's residual) over `E_i`, plus whatever cross-group
/// leakage survives the combiner, over the interferer's `E_j`.
pub fn instantaneous_sinr(eff: &EffectiveChannel, strategy: &IaStrategy) -> TrialResult {
    let k = eff.users();
    let part = eff.partition();
    let mut out = TrialResult {
        sinr: Vec::with_capacity(k),
        signal: Vec::with_capacity(k),
        interference: Vec::with_capacity(k),
        noise: Vec::with_capacity(k),
        energy: Vec::with_capacity(k),
    };
    for i in 0..k {
        let v = &strategy.combiners[i];
        let e_i = eff.user_energy(i);
        let signal = (v * &strategy.precoders[i]).norm_squared() / e_i;
        let noise = v.norm_squared() * eff.sigma2();
        let mut in_group = 0.0;
        for j in part.group_users(part.group_of(i)) {
            in_group += (v * eff.residual_block(i, j) * &strategy.precoders[j]).norm_squared();
        }
        let mut leakage = 0.0;
        for j in eff.interferers(i) {
            leakage += (v * eff.cross_block(i, j) * &strategy.precoders[j]).norm_squared() / eff.user_energy(j);
        }
        let interference = in_group / e_i + leakage;
        out.sinr.push(signal / (noise + interference));
        out.signal.push(signal);
        out.interference.push(interference);
        out.noise.push(noise);
        out.energy.push(e_i);
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct CapacitySettings {
    pub users: usize,
    pub antennas: usize,
    pub snr_db: f64,
    pub trials: usize,
    pub seed: u64,
    pub policy: AlphaPolicy,
    pub rate_rule: RateRule,
}

impl CapacitySettings {
    pub fn new(snr_db: f64, trials: usize, seed: u64, policy: AlphaPolicy) -> Self {
        Self { users: 4, antennas: 5, snr_db, trials, seed, policy, rate_rule: RateRule::LogOfMean }
    }
}

/// One point of a capacity curve: a partition at one SNR under one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityPoint {
    pub snr_db: f64,
    pub partition: Partition,
    pub policy: AlphaPolicy,
    pub dof: Vec<usize>,
    /// Arithmetic mean of the linear per-trial SINR, per user.
    pub e_sinr: Vec<f64>,
    /// Normalized rate `R_i` per user.
    pub rates: Vec<f64>,
    pub total_rate: f64,
    pub trials: usize,
    /// Draws discarded and resampled (ill-conditioned or unalignable).
    pub rejected: usize,
}

fn retryable(e: &Error) -> bool {
    matches!(
        e,
        Error::SingularGroupChannel { .. }
            | Error::DegenerateChannel(_)
            | Error::AlignmentNotConverged { .. }
            | Error::FeasibilityViolated { .. }
            | Error::CertificationFailed { .. }
    )
}

/// Evaluate trial `trial`, resampling from successive substreams on rejection.
/// Returns the result and the number of rejected attempts.
pub fn run_trial(partition: &Partition, settings: &CapacitySettings, trial: u64) -> Result<(TrialResult, usize)> {
    let sigma2 = sigma2_from_snr_db(settings.snr_db);
    let alpha = settings.policy.alpha(sigma2);
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let seed = derive_seed(settings.seed, &[trial, attempt]);
        let outcome = (|| {
            let ch = sample_channel(settings.users, settings.antennas, seed);
            let eff = apply_group_preinversion(&ch, partition, sigma2, alpha)?;
            let strategy = construct_strategy(&eff, &AlignmentOptions::with_seed(derive_seed(seed, &[ALIGNMENT_STREAM])))?;
            certify(&eff, &strategy)?;
            Ok(instantaneous_sinr(&eff, &strategy))
        })();
        match outcome {
            Ok(r) => return Ok((r, attempt as usize)),
            Err(e) if retryable(&e) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Ergodic SINR and rates of one partition at one SNR.
///
/// Trials run in parallel on the current rayon pool; the reduction runs in
/// trial order, so the result does not depend on the worker count.
pub fn ergodic_capacity(partition: &Partition, settings: &CapacitySettings) -> Result<CapacityPoint> {
    if settings.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let record = crate::alignment::dof_table(partition, settings.antennas)?;
    if partition.users() != settings.users {
        return Err(Error::UnsupportedConfiguration { k: partition.users(), n: settings.antennas });
    }
    let results: Vec<(TrialResult, usize)> = (0..settings.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(partition, settings, t))
        .collect::<Result<_>>()?;

    let k = settings.users;
    let scale = (k * settings.antennas) as f64;
    let trials = results.len() as f64;
    let mut sinr_sum = vec![0.0; k];
    let mut log_sum = vec![0.0; k];
    let mut rejected = 0;
    for (r, rej) in &results {
        rejected += rej;
        for i in 0..k {
            sinr_sum[i] += r.sinr[i];
            log_sum[i] += (1.0 + r.sinr[i]).log2();
        }
    }
    let e_sinr: Vec<f64> = sinr_sum.iter().map(|s| s / trials).collect();
    let rates: Vec<f64> = (0..k)
        .map(|i| {
            let d = record.dof[i] as f64 / scale;
            match settings.rate_rule {
                RateRule::LogOfMean => d * (1.0 + e_sinr[i]).log2(),
                RateRule::MeanOfLog => d * log_sum[i] / trials,
            }
        })
        .collect();
    Ok(CapacityPoint {
        snr_db: settings.snr_db,
        partition: partition.clone(),
        policy: settings.policy,
        dof: record.dof,
        e_sinr,
        total_rate: rates.iter().sum(),
        rates,
        trials: settings.trials,
        rejected,
    })
}

/// One `(N, SNR)` cell of the large-system experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticRow {
    pub n: usize,
    pub snr_db: f64,
    pub mean_inv_sinr: f64,
    pub mean_sinr: f64,
    /// Large-N limit of `E[1/SINR]` at `α = σ²`.
    pub thm1_pred: f64,
    /// `10log10 E[SINR] − 10log10(1/E[1/SINR])`, nonnegative by Jensen.
    pub jensen_gap_db: f64,
    /// `10log10(1/E[1/SINR]) − 10log10(1/prediction)`.
    pub thm1_gap_db: f64,
    /// Standard error of `mean_inv_sinr`.
    pub inv_sinr_std_error: f64,
}

/// Empirical `E[1/SINR]` and `E[SINR]` of single-group MMSE pre-inversion of
/// `N x N` normalized Gaussian channels, against the large-N prediction.
///
/// Draw `t` at size `N` is shared across the SNR grid.
pub fn asymptotic_sinr_experiment(n_grid: &[usize], snr_grid: &[f64], trials: usize, seed: u64) -> Result<Vec<AsymptoticRow>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidParameter(format!("matrix size must be >= 2, got {n}")));
    }
    let sigmas: Vec<f64> = snr_grid.iter().map(|&s| sigma2_from_snr_db(s)).collect();
    let mut rows = Vec::with_capacity(n_grid.len() * snr_grid.len());
    for &n in n_grid {
        let per_trial: Vec<Vec<f64>> = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let g = complex_gaussian(&mut stream(derive_seed(seed, &[n as u64, t])), n, n)
                    .unscale((n as f64).sqrt());
                sigmas
                    .iter()
                    .map(|&s2| preinversion_sinr(&g, optimal_alpha(s2), s2).map(|e| e.sinr_linear))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        for (c, (&snr_db, &s2)) in snr_grid.iter().zip(&sigmas).enumerate() {
            let count = trials as f64;
            let (mut inv_sum, mut sum) = (0.0, 0.0);
            for sinrs in &per_trial {
                inv_sum += 1.0 / sinrs[c];
                sum += sinrs[c];
            }
            let mean_inv_sinr = inv_sum / count;
            let mean_sinr = sum / count;
            let var = if trials > 1 {
                per_trial.iter().map(|s| (1.0 / s[c] - mean_inv_sinr).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            let thm1_pred = asymptotic_inv_sinr(optimal_alpha(s2), s2);
            rows.push(AsymptoticRow {
                n,
                snr_db,
                mean_inv_sinr,
                mean_sinr,
                thm1_pred,
                jensen_gap_db: to_db(mean_sinr) - to_db(1.0 / mean_inv_sinr),
                thm1_gap_db: to_db(1.0 / mean_inv_sinr) - to_db(1.0 / thm1_pred),
                inv_sinr_std_error: (var / count).sqrt(),
            });
        }
    }
    Ok(rows)
}
