//! Run-time prolongation of one coarse cell into its fine cells.
//!
//! Every entry point takes the coarse data over the total stencil in
//! [`StencilGeometry`] order and writes fine values in [`FinePointSet`]
//! order. The slice-level `*_into` functions are what the AMR driver calls;
//! the `CoarseWindow` wrappers exist for callers that want owned results.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stencil::{FinePointSet, StencilGeometry};
use crate::weights::{GpConfig, ProlongWeights};

/// Substencil length bound: `2D+1 ≤ 7`.
const MAX_SUB: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseWindow {
    pub values: Vec<f64>,
}

impl CoarseWindow {
    pub fn new(values: Vec<f64>, geometry: &StencilGeometry) -> Result<Self> {
        if values.len() != geometry.total_len() {
            return Err(Error::DimensionMismatch(format!(
                "window has {} values, stencil has {} cells",
                values.len(),
                geometry.total_len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("window values must be finite".into()));
        }
        Ok(Self { values })
    }

    /// Samples `f` at every total-stencil offset.
    pub fn from_fn(geometry: &StencilGeometry, mut f: impl FnMut(&[i32]) -> f64) -> Self {
        Self { values: geometry.total_offsets.iter().map(|o| f(o)).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProlongResult {
    pub fine_values: Vec<f64>,
    pub used_weno: bool,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProlongMethod {
    /// Linear GP, switching to GP-WENO where `α > α_c`.
    Gp,
    /// GP-WENO wherever `α > 0`.
    GpWenoAlways,
    /// Conservative linear reconstruction with MC-limited slopes.
    McLinear,
}

impl ProlongMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gp => "gp",
            Self::GpWenoAlways => "gp-weno-always",
            Self::McLinear => "mc-linear",
        }
    }
}

impl std::str::FromStr for ProlongMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gp" => Ok(Self::Gp),
            "gp-weno-always" => Ok(Self::GpWenoAlways),
            "mc-linear" => Ok(Self::McLinear),
            _ => Err(Error::InvalidConfig(format!("unknown prolongation method {s:?}"))),
        }
    }
}

fn gather(values: &[f64], idx: &[usize], buf: &mut [f64; MAX_SUB]) -> usize {
    for (b, &k) in buf.iter_mut().zip(idx) {
        *b = values[k];
    }
    idx.len()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `α = β(S₀) / (mean(f_{S₀})² + ε₂)` on the central substencil.
pub fn alpha_of(values: &[f64], weights: &ProlongWeights, eps2: f64) -> f64 {
    let mut buf = [0.0; MAX_SUB];
    let n = gather(values, &weights.geometry.sub_index[0], &mut buf);
    let f = &buf[..n];
    let mean = f.iter().sum::<f64>() / n as f64;
    weights.beta(f) / (mean * mean + eps2)
}

pub fn compute_alpha(window: &CoarseWindow, weights: &ProlongWeights, config: &GpConfig) -> f64 {
    alpha_of(&window.values, weights, config.eps2)
}

pub fn linear_into(values: &[f64], weights: &ProlongWeights, out: &mut [f64]) {
    for (o, w) in out.iter_mut().zip(&weights.w_total) {
        *o = dot(w, values);
    }
}

/// `β_m` for every substencil.
pub fn betas(values: &[f64], weights: &ProlongWeights) -> Vec<f64> {
    let mut buf = [0.0; MAX_SUB];
    weights
        .geometry
        .sub_index
        .iter()
        .map(|idx| {
            let n = gather(values, idx, &mut buf);
            weights.beta(&buf[..n])
        })
        .collect()
}

#[inline]
fn pow_p(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

/// Normalised nonlinear weights `ω_m` for fine point `i` given the `β_m`.
///
/// `γ_m/(ε+β_m)^p` is evaluated relative to the smallest `β`, which leaves
/// the normalised result unchanged and keeps it finite for any data scale.
pub fn omega(beta: &[f64], gamma: &[f64], eps: f64, p: f64) -> Vec<f64> {
    let bmin = beta.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = beta.iter().zip(gamma).map(|(&b, &g)| g * pow_p((eps + bmin) / (eps + b), p)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|w| w / s).collect()
}

pub fn weno_into(values: &[f64], weights: &ProlongWeights, config: &GpConfig, out: &mut [f64]) {
    let g = &weights.geometry;
    let nsub = g.num_sub();
    let mut fm = [[0.0; MAX_SUB]; MAX_SUB];
    let mut beta = [0.0; MAX_SUB];
    for m in 0..nsub {
        let n = gather(values, &g.sub_index[m], &mut fm[m]);
        beta[m] = weights.beta(&fm[m][..n]);
    }
    let n = g.sub_len();
    for (i, o) in out.iter_mut().enumerate() {
        let om = omega(&beta[..nsub], &weights.gamma[i], config.eps, config.p);
        *o = (0..nsub).map(|m| om[m] * dot(&weights.w_sub[i][m], &fm[m][..n])).sum();
    }
}

/// Linear or WENO depending on `α`; returns `(used_weno, α)`.
pub fn cell_into(values: &[f64], weights: &ProlongWeights, config: &GpConfig, out: &mut [f64]) -> (bool, f64) {
    let alpha = alpha_of(values, weights, config.eps2);
    if alpha > config.alpha_c {
        weno_into(values, weights, config, out);
        (true, alpha)
    } else {
        linear_into(values, weights, out);
        (false, alpha)
    }
}

#[inline]
pub(crate) fn mc_slope(lo: f64, c: f64, hi: f64) -> f64 {
    let (dl, dr) = (c - lo, hi - c);
    if dl * dr <= 0.0 {
        return 0.0;
    }
    let m = (0.5 * (hi - lo).abs()).min(2.0 * dl.abs()).min(2.0 * dr.abs());
    m.copysign(dr)
}

pub fn mc_into(values: &[f64], centre: usize, neighbors: &[(usize, usize)], fp: &FinePointSet, out: &mut [f64]) {
    let mut s = [0.0; 3];
    for (d, &(lo, hi)) in neighbors.iter().enumerate() {
        s[d] = mc_slope(values[lo], values[centre], values[hi]);
    }
    for (o, x) in out.iter_mut().zip(&fp.offsets) {
        *o = values[centre] + x.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub fn prolong_linear(window: &CoarseWindow, weights: &ProlongWeights) -> ProlongResult {
    let mut out = vec![0.0; weights.num_fine()];
    linear_into(&window.values, weights, &mut out);
    ProlongResult { fine_values: out, used_weno: false, alpha: f64::NAN }
}

pub fn prolong_weno(window: &CoarseWindow, weights: &ProlongWeights, config: &GpConfig) -> ProlongResult {
    let mut out = vec![0.0; weights.num_fine()];
    weno_into(&window.values, weights, config, &mut out);
    ProlongResult { fine_values: out, used_weno: true, alpha: f64::NAN }
}

pub fn prolong_cell(window: &CoarseWindow, weights: &ProlongWeights, config: &GpConfig) -> ProlongResult {
    let mut out = vec![0.0; weights.num_fine()];
    let (used_weno, alpha) = cell_into(&window.values, weights, config, &mut out);
    ProlongResult { fine_values: out, used_weno, alpha }
}

pub fn prolong_mc_linear(window: &CoarseWindow, geometry: &StencilGeometry, fp: &FinePointSet) -> ProlongResult {
    let mut out = vec![0.0; fp.len()];
    mc_into(&window.values, geometry.center_index(), &geometry.face_neighbors(), fp, &mut out);
    ProlongResult { fine_values: out, used_weno: false, alpha: f64::NAN }
}

/// Mean of the `∏r_d` children of one coarse cell.
pub fn restrict(fine_values: &[f64], ratio: &[u32]) -> Result<f64> {
    let n: usize = ratio.iter().map(|&r| r as usize).product();
    if fine_values.len() != n {
        return Err(Error::DimensionMismatch(format!("{} fine values for {n} children", fine_values.len())));
    }
    Ok(fine_values.iter().sum::<f64>() / n as f64)
}

/// A method bound to its weights, ready to be shared across worker threads.
#[derive(Clone, Debug)]
pub struct Prolongator {
    pub method: ProlongMethod,
    pub weights: Arc<ProlongWeights>,
    pub config: GpConfig,
    centre: usize,
    neighbors: Vec<(usize, usize)>,
}

impl Prolongator {
    /// `GpWenoAlways` overrides `alpha_c` with 0.
    pub fn new(method: ProlongMethod, weights: Arc<ProlongWeights>, mut config: GpConfig) -> Self {
        if method == ProlongMethod::GpWenoAlways {
            config.alpha_c = 0.0;
        }
        let centre = weights.geometry.center_index();
        let neighbors = weights.geometry.face_neighbors();
        Self { method, weights, config, centre, neighbors }
    }

    pub fn geometry(&self) -> &StencilGeometry {
        &self.weights.geometry
    }

    pub fn num_fine(&self) -> usize {
        self.weights.num_fine()
    }

    /// Returns whether the WENO branch ran.
    pub fn prolong_into(&self, values: &[f64], out: &mut [f64]) -> bool {
        match self.method {
            ProlongMethod::McLinear => {
                mc_into(values, self.centre, &self.neighbors, &self.weights.fine_points, out);
                false
            }
            ProlongMethod::Gp | ProlongMethod::GpWenoAlways => cell_into(values, &self.weights, &self.config, out).0,
        }
    }
}
