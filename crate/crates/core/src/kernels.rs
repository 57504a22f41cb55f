//! Squared-exponential covariance and its cell-integrated forms.
//!
//! All offsets passed to the integrated kernels are normalised by the coarse
//! cell width of their dimension, so a neighbouring coarse cell sits at
//! offset ±1 and the fine cells of a 2-refined cell sit at ±1/4.
//!
//! Each integrated kernel is a product of one-dimensional factors. A 1-D
//! factor is the double average of `exp(-(x-y)²/2L²)` over a unit coarse
//! cell centred at 0 and a target cell of width `1/r` centred at `δ`, where
//! `L = ℓ/Δx`. With `G(t) = L²√π g(t/(√2 L))` and `g(φ) = φ erf φ + e^{-φ²}/√π`
//! (so that `G'' = exp(-t²/2L²)`), the factor is
//!
//! ```text
//! r [G(δ+b) + G(δ-b) - G(δ+a) - G(δ-a)],   a = (r-1)/2r,  b = (r+1)/2r
//! ```
//!
//! For `r = 1` this is the coarse/coarse covariance. When `L` is large the
//! bracket is a tiny difference of O(1) numbers, so in that regime the factor
//! is instead summed from its Taylor expansion in `1/L²`, whose coefficients
//! are Hermite polynomials. The stencil matrices at `ℓ/Δx = 12` have condition
//! numbers near 1e11, so this matters for the weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smallmat::erf;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Hyperparameters and grid metrics shared by every kernel evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Correlation length for prediction, in physical units.
    pub ell: f64,
    /// Short correlation length for the smoothness indicators.
    pub sigma_shock: f64,
    /// Coarse cell width per dimension.
    pub dx: Vec<f64>,
    pub dim: usize,
    /// Refinement ratio per dimension.
    pub ratio: Vec<u32>,
}

impl KernelParams {
    pub fn new(ell: f64, sigma_shock: f64, dx: Vec<f64>, ratio: Vec<u32>) -> Result<Self> {
        let p = Self { ell, sigma_shock, dim: dx.len(), dx, ratio };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if self.dx.len() != self.dim || self.ratio.len() != self.dim {
            return Err(Error::DimensionMismatch("dx and ratio must have one entry per dimension".into()));
        }
        if !(self.ell > 0.0 && self.ell.is_finite()) || !(self.sigma_shock > 0.0 && self.sigma_shock.is_finite()) {
            return Err(Error::InvalidConfig("correlation lengths must be positive and finite".into()));
        }
        if self.dx.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidConfig("cell widths must be positive and finite".into()));
        }
        if self.ratio.contains(&0) {
            return Err(Error::InvalidConfig("refinement ratios must be at least 1".into()));
        }
        Ok(())
    }

    /// The same grid with the shock-detection length in place of `ell`.
    pub fn shock(&self) -> Self {
        Self { ell: self.sigma_shock, ..self.clone() }
    }

    /// `ℓ/Δx_d`.
    pub fn length_ratio(&self, d: usize) -> f64 {
        self.ell / self.dx[d]
    }
}

/// `exp(-‖x − y‖²/(2ℓ²))` for points in physical coordinates.
pub fn se_kernel(x: &[f64], y: &[f64], params: &KernelParams) -> f64 {
    debug_assert_eq!(x.len(), params.dim);
    debug_assert_eq!(y.len(), params.dim);
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-r2 / (2.0 * params.ell * params.ell)).exp()
}

/// SE kernel between two points given by their normalised offset.
pub fn se_kernel_offset(delta: &[f64], params: &KernelParams) -> f64 {
    (0..params.dim)
        .map(|d| {
            let l = params.length_ratio(d);
            (-delta[d] * delta[d] / (2.0 * l * l)).exp()
        })
        .product()
}

/// Covariance between two same-level cell averages, `Δ_kh = (x_h − x_k)/Δx`.
pub fn integrated_cov(delta: &[f64], params: &KernelParams) -> Result<f64> {
    debug_assert_eq!(delta.len(), params.dim);
    let mut v = 1.0;
    for d in 0..params.dim {
        v *= box_factor(delta[d], params.length_ratio(d), 1)?;
    }
    Ok(v)
}

/// Covariance between a coarse cell average and the average over the fine
/// cell of width `Δx/r` centred at normalised offset `delta_star`.
pub fn cross_cov(delta_star: &[f64], params: &KernelParams) -> Result<f64> {
    debug_assert_eq!(delta_star.len(), params.dim);
    let mut v = 1.0;
    for d in 0..params.dim {
        v *= box_factor(delta_star[d], params.length_ratio(d), params.ratio[d])?;
    }
    Ok(v)
}

fn g(phi: f64) -> f64 {
    phi * erf(phi) + (-phi * phi).exp() / SQRT_PI
}

/// One-dimensional factor of the integrated kernels; see the module docs.
pub fn box_factor(delta: f64, length_ratio: f64, ratio: u32) -> Result<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2 / length_ratio;
    let r = ratio as f64;
    let a = (r - 1.0) / (2.0 * r);
    let b = (r + 1.0) / (2.0 * r);
    if h <= 0.3 && delta.abs() <= 8.0 {
        return Ok(box_factor_series(delta * h, h, a, b, r));
    }
    let bracket = (g(h * (delta + b)) + g(h * (delta - b))) - (g(h * (delta + a)) + g(h * (delta - a)));
    let bracket = if bracket < 0.0 {
        if bracket > -1e-15 {
            0.0
        } else {
            return Err(Error::KernelCancellation(bracket));
        }
    } else {
        bracket
    };
    Ok(r * length_ratio * length_ratio * SQRT_PI * bracket)
}

/// `2r e^{-ψ²} Σ_{k≥1} h^{2k-2} (b^{2k} − a^{2k}) / (2k)! · H_{2k-2}(ψ)`.
fn box_factor_series(psi: f64, h: f64, a: f64, b: f64, r: f64) -> f64 {
    let h2 = h * h;
    let (a2, b2) = (a * a, b * b);
    // Hermite polynomials H_{n-1}, H_n
    let mut h_prev = 0.0;
    let mut h_cur = 1.0;
    let mut n = 0usize;
    let mut hp = 1.0;
    let mut ap = a2;
    let mut bp = b2;
    let mut fact = 2.0;
    let mut sum = 0.0;
    let mut small = 0;
    for k in 1..=60usize {
        let term = hp * (bp - ap) / fact * h_cur;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            small += 1;
            if small == 2 {
                break;
            }
        } else {
            small = 0;
        }
        // advance to H_{2k}
        for _ in 0..2 {
            let next = 2.0 * psi * h_cur - 2.0 * n as f64 * h_prev;
            h_prev = h_cur;
            h_cur = next;
            n += 1;
        }
        hp *= h2;
        ap *= a2;
        bp *= b2;
        fact *= ((2 * k + 1) * (2 * k + 2)) as f64;
    }
    2.0 * r * (-psi * psi).exp() * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(dim: usize, ell: f64, ratio: u32) -> KernelParams {
        KernelParams::new(ell, 3.0, vec![1.0; dim], vec![ratio; dim]).unwrap()
    }

    #[test]
    fn se_kernel_basics() {
        let p = params(1, 2.5, 1);
        assert_eq!(se_kernel(&[0.3], &[0.3], &p), 1.0);
        assert!((se_kernel(&[0.0], &[2.5], &p) - (-0.5f64).exp()).abs() < 1e-16);
        let p2 = params(2, 2.5, 1);
        let v = se_kernel(&[0.0, 0.0], &[2.5, 2.5], &p2);
        assert!((v - (-1.0f64).exp()).abs() < 1e-16);
        assert!((v - se_kernel(&[0.0], &[2.5], &p).powi(2)).abs() < 1e-16);
    }

    #[test]
    fn series_and_closed_form_agree_at_switchover() {
        for &l in &[2.5, 3.0, 4.0] {
            let h = std::f64::consts::FRAC_1_SQRT_2 / l;
            for &r in &[1u32, 2, 4] {
                let rf = r as f64;
                let (a, b) = ((rf - 1.0) / (2.0 * rf), (rf + 1.0) / (2.0 * rf));
                for &d in &[0.0, 0.375, 1.0, -2.25, 3.0] {
                    let series = box_factor_series(d * h, h, a, b, rf);
                    let closed = rf * l * l * SQRT_PI
                        * (g(h * (d + b)) + g(h * (d - b)) - g(h * (d + a)) - g(h * (d - a)));
                    assert!((series - closed).abs() < 1e-12, "L={l} r={r} d={d}: {series} vs {closed}");
                }
            }
        }
    }

    #[test]
    fn large_length_scale_tends_to_one() {
        let p = params(2, 1e6, 2);
        for d in [[0.0, 0.0], [2.0, -1.0], [0.25, 0.75]] {
            assert!((integrated_cov(&d, &p).unwrap() - 1.0).abs() < 1e-11);
            assert!((cross_cov(&d, &p).unwrap() - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn unit_ratio_cross_cov_equals_integrated() {
        for &ell in &[1.5, 3.0, 12.0] {
            let p = params(2, ell, 1);
            for d in [[0.0, 1.0], [-2.0, 1.0], [1.0, 1.0]] {
                assert_eq!(cross_cov(&d, &p).unwrap(), integrated_cov(&d, &p).unwrap());
            }
        }
    }

    #[test]
    fn evenness() {
        for &ell in &[1.5, 3.0, 12.0] {
            let p = params(1, ell, 4);
            for &d in &[0.125, 0.375, 1.0, 2.0] {
                assert_eq!(integrated_cov(&[d], &p).unwrap(), integrated_cov(&[-d], &p).unwrap());
                assert_eq!(cross_cov(&[d], &p).unwrap(), cross_cov(&[-d], &p).unwrap());
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(KernelParams::new(0.0, 1.0, vec![1.0], vec![2]).is_err());
        assert!(KernelParams::new(1.0, 1.0, vec![1.0], vec![0]).is_err());
        assert!(matches!(
            KernelParams::new(1.0, 1.0, vec![1.0; 4], vec![1; 4]),
            Err(Error::UnsupportedDimension(4))
        ));
    }
}
