//! Tikhonov-regularized inversion and the pre-inversion SINR.
//!
//! For a square channel `B` the regularized inverse is
//! `B_α = B†(αI + BB†)⁻¹`, whose singular values are `s/(s² + α)`. Using the
//! normalized channel `G = H/√N` and encoder `G_α/√N`, the receiver sees
//! `GG_α` and the per-stream SINR is
//!
//! ```text
//! SINR = N / (‖G_α‖²_F σ² + ‖GG_α − I‖²_F)
//! ```
//!
//! which is maximized by the MMSE choice `α = σ²`. `α = 0` is accepted and
//! means exact zero-forcing inversion.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{c64, condition_number, singular_values, CMat, Svd};
use crate::quadrature::{integrate, QuadratureOptions};

/// Largest condition number accepted for an exact (α = 0) inversion.
pub const CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrEstimate {
    pub sinr_linear: f64,
    pub sinr_db: f64,
    /// Ideal signal power, `N`.
    pub signal: f64,
    /// `‖G_α‖²_F σ²`.
    pub noise: f64,
    /// `‖GG_α − I‖²_F`.
    pub interference: f64,
}

impl SinrEstimate {
    fn from_components(signal: f64, noise: f64, interference: f64) -> Self {
        let sinr_linear = signal / (noise + interference);
        Self {
            sinr_linear,
            sinr_db: to_db(sinr_linear),
            signal,
            noise,
            interference,
        }
    }

    /// The MSE denominator `noise + interference`.
    pub fn denominator(&self) -> f64 {
        self.noise + self.interference
    }
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Noise variance per complex dimension for an SNR of `snr_db` (unit signal power).
pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("regularization must be finite and >= 0, got {alpha}")))
    }
}

fn check_square(b: &CMat) -> Result<()> {
    if b.is_square() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("expected a square matrix, got {}x{}", b.nrows(), b.ncols())))
    }
}

fn check_conditioning(b: &CMat) -> Result<()> {
    let condition = condition_number(b);
    if condition > CONDITION_CAP {
        Err(Error::SingularGroupChannel { condition, cap: CONDITION_CAP })
    } else {
        Ok(())
    }
}

/// `B_α = B†(αI + BB†)⁻¹`, or `B⁻¹` when `alpha == 0`.
pub fn tikhonov_inverse(b: &CMat, alpha: f64) -> Result<CMat> {
    check_square(b)?;
    check_alpha(alpha)?;
    let n = b.nrows();
    if alpha == 0.0 {
        check_conditioning(b)?;
        return b
            .clone()
            .try_inverse()
            .ok_or(Error::SingularGroupChannel { condition: f64::INFINITY, cap: CONDITION_CAP });
    }
    let gram = b * b.adjoint() + CMat::from_diagonal_element(n, n, c64(alpha, 0.0));
    // (αI + BB†)⁻¹ is Hermitian, so B_α = ((αI + BB†)⁻¹ B)†
    let solved = match gram.clone().cholesky() {
        Some(chol) => chol.solve(b),
        None => gram
            .lu()
            .solve(b)
            .ok_or_else(|| Error::InvalidParameter("regularized Gram matrix is singular".into()))?,
    };
    Ok(solved.adjoint())
}

/// `B_α` assembled from the SVD `B = UΣV†` as `V Σ_α U†` with
/// `Σ_α = diag(s/(s² + α))`.
pub fn tikhonov_inverse_svd(b: &CMat, alpha: f64) -> CMat {
    let svd = Svd::full(b);
    let mut scaled = svd.v.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        let s = svd.values.get(k).copied().unwrap_or(0.0);
        let d = s * s + alpha;
        col.scale_mut(if d > 0.0 { s / d } else { 0.0 });
    }
    let rank = svd.values.len();
    scaled.columns(0, rank) * svd.u.columns(0, rank).adjoint()
}

/// SINR of the normalized channel `G` pre-inverted with `G_α/√N`.
///
/// Evaluated from the squared singular values `λ` of `G`:
/// `‖G_α‖² = Σ λ/(λ+α)²` and `‖GG_α − I‖² = Σ α²/(λ+α)²`.
pub fn preinversion_sinr(g: &CMat, alpha: f64, sigma2: f64) -> Result<SinrEstimate> {
    check_square(g)?;
    check_alpha(alpha)?;
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance must be >= 0, got {sigma2}")));
    }
    let n = g.nrows() as f64;
    let s = singular_values(g);
    if alpha == 0.0 {
        check_conditioning(g)?;
        let power: f64 = s.iter().map(|s| 1.0 / (s * s)).sum();
        return Ok(SinrEstimate::from_components(n, power * sigma2, 0.0));
    }
    let (mut power, mut interference) = (0.0, 0.0);
    for s in s {
        let lambda = s * s;
        let d = (lambda + alpha) * (lambda + alpha);
        power += lambda / d;
        interference += alpha * alpha / d;
    }
    Ok(SinrEstimate::from_components(n, power * sigma2, interference))
}

/// The MSE-minimizing regularization, `α = σ²`.
pub fn optimal_alpha(sigma2: f64) -> f64 {
    assert!(sigma2 > 0.0, "optimal regularization needs a positive noise variance");
    sigma2
}

/// Large-N limit of `E[1/SINR]` for i.i.d. unit-variance complex Gaussian
/// channels with regularization `alpha` and noise variance `sigma2`:
///
/// ```text
/// (α + (α/2 + 1)σ²)/√(α(α+4)) − σ²/2
/// ```
///
/// This is the exact value of `mp_expectation` applied to
/// `f(x) = xσ²/(x+α)² + α²/(x+α)²`.
pub fn asymptotic_inv_sinr(alpha: f64, sigma2: f64) -> f64 {
    assert!(alpha > 0.0, "asymptotic SINR needs alpha > 0");
    let root = (alpha * (alpha + 4.0)).sqrt();
    (alpha + (0.5 * alpha + 1.0) * sigma2) / root - 0.5 * sigma2
}

/// Integrand of the large-N `E[1/SINR]` in the squared-singular-value variable.
pub fn inv_sinr_integrand(alpha: f64, sigma2: f64) -> impl Fn(f64) -> f64 {
    move |x| {
        let d = (x + alpha) * (x + alpha);
        x * sigma2 / d + alpha * alpha / d
    }
}

/// `(1/2π) ∫₀⁴ f(x) √(x(4−x))/x dx`, the expectation of `f` under the
/// limiting squared-singular-value law of `G = H/√N`.
///
/// The substitution `x = 4 sin²(θ/2)` turns the weight into `(2/π) cos²(θ/2) dθ`
/// on `[0, π]`, which is smooth at both endpoints.
pub fn mp_expectation<F: Fn(f64) -> f64>(f: F) -> Result<f64> {
    let integrand = |theta: f64| {
        let half = 0.5 * theta;
        let (sin, cos) = half.sin_cos();
        f(4.0 * sin * sin) * cos * cos
    };
    let r = integrate(integrand, 0.0, PI, QuadratureOptions { abs_tol: 1e-10 * PI / 2.0, ..Default::default() })?;
    Ok(2.0 / PI * r.value)
}
