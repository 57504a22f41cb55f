use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profiles::{gaussian_average_1d, Profile};
use crate::error::{Error, Result};
use crate::prolong::{alpha_of, cell_into, linear_into};
use crate::weights::{cached_weights, DataMode, GpConfig, ProlongWeights};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: i64,
    /// Linear GP prolongation everywhere.
    pub error_linear: f64,
    /// `α`-switched prolongation.
    pub error_switch: f64,
    /// `log₂(e_{N/2} / e_N)` against the previous row.
    pub slope_linear: Option<f64>,
    pub slope_switch: Option<f64>,
    pub max_alpha: f64,
    pub weno_cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub mode: DataMode,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceStudy {
    pub fn min_slope(&self) -> Option<f64> {
        self.rows
            .iter()
            .flat_map(|r| [r.slope_linear, r.slope_switch])
            .flatten()
            .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.min(s))))
    }
}

/// Coarse data of `exp(-x²-y²)` on an `n²` grid over `[-2, 2]²` with two
/// layers of exact ghost data, and exact fine data for ratio 2.
struct GaussianGrids {
    coarse_x: Vec<f64>,
    fine_x: Vec<f64>,
}

fn gaussian_grids(n: i64, mode: DataMode) -> GaussianGrids {
    let h = 4.0 / n as f64;
    let hf = 0.5 * h;
    let val = |a: f64, b: f64| match mode {
        DataMode::CellAveraged => gaussian_average_1d(a, b, 0.0, 1.0),
        DataMode::Pointwise => (-(0.5 * (a + b)).powi(2)).exp(),
    };
    // separable: coarse_x[k] is the 1-D factor of coarse column k - 2
    let coarse_x = (-2..n + 2).map(|k| val(-2.0 + k as f64 * h, -2.0 + (k + 1) as f64 * h)).collect();
    let fine_x = (0..2 * n).map(|k| val(-2.0 + k as f64 * hf, -2.0 + (k + 1) as f64 * hf)).collect();
    GaussianGrids { coarse_x, fine_x }
}

/// Prolongs the accuracy Gaussian by ratio 2 on each grid and compares
/// with exact fine data, for both the linear and the switched engine.
pub fn convergence_study(grids: &[i64], mode: DataMode, base: &GpConfig) -> Result<ConvergenceStudy> {
    if grids.iter().any(|&n| n < 4) {
        return Err(Error::InvalidConfig("grids need at least 4 cells".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(grids.len());
    for &n in grids {
        let mut cfg = base.clone();
        cfg.dim = 2;
        cfg.ratio = vec![2, 2];
        cfg.mode = mode;
        cfg.dx = vec![4.0 / n as f64; 2];
        let w = cached_weights(&cfg)?;
        let g = gaussian_grids(n, mode);
        let offsets = &w.geometry.total_offsets;
        let per_row: Vec<(f64, f64, f64, usize)> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut window = vec![0.0; offsets.len()];
                let mut lin = vec![0.0; 4];
                let mut sw = vec![0.0; 4];
                let (mut el, mut es, mut amax, mut weno) = (0.0, 0.0, 0.0f64, 0usize);
                for i in 0..n {
                    for (v, o) in window.iter_mut().zip(offsets) {
                        *v = g.coarse_x[(i + 2 + o[0] as i64) as usize] * g.coarse_x[(j + 2 + o[1] as i64) as usize];
                    }
                    linear_into(&window, &w, &mut lin);
                    let (used, a) = cell_into(&window, &w, &cfg, &mut sw);
                    amax = amax.max(a);
                    weno += used as usize;
                    for (k, x) in w.fine_points.offsets.iter().enumerate() {
                        let fi = (2 * i + if x[0] > 0.0 { 1 } else { 0 }) as usize;
                        let fj = (2 * j + if x[1] > 0.0 { 1 } else { 0 }) as usize;
                        let exact = g.fine_x[fi] * g.fine_x[fj];
                        el += (lin[k] - exact).abs();
                        es += (sw[k] - exact).abs();
                    }
                }
                (el, es, amax, weno)
            })
            .collect();
        let area_f = (2.0 / n as f64).powi(2) / 16.0;
        let (mut el, mut es, mut amax, mut weno) = (0.0, 0.0, 0.0f64, 0);
        for (a, b, c, d) in per_row {
            el += a;
            es += b;
            amax = amax.max(c);
            weno += d;
        }
        let (error_linear, error_switch) = (el * area_f, es * area_f);
        let prev = rows.last();
        let slope = |e_prev: f64, e: f64, n_prev: i64| (e_prev / e).log2() / (n as f64 / n_prev as f64).log2();
        rows.push(ConvergenceRow {
            n,
            error_linear,
            error_switch,
            slope_linear: prev.map(|p| slope(p.error_linear, error_linear, p.n)),
            slope_switch: prev.map(|p| slope(p.error_switch, error_switch, p.n)),
            max_alpha: amax,
            weno_cells: weno,
        });
    }
    Ok(ConvergenceStudy { mode, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaCell {
    pub x: f64,
    pub y: f64,
    pub f: f64,
    pub alpha: f64,
}

/// `α` for every cell of an `n²` grid over `[-1, 1]²` carrying the demo
/// profile sampled at cell centres.
pub fn alpha_demo(n: i64, base: &GpConfig) -> Result<(Vec<AlphaCell>, std::sync::Arc<ProlongWeights>)> {
    if n < 1 {
        return Err(Error::InvalidConfig("alpha demo needs n >= 1".into()));
    }
    let p = Profile::AlphaDemo;
    let h = 2.0 / n as f64;
    let mut cfg = base.clone();
    cfg.dim = 2;
    cfg.ratio = vec![2, 2];
    cfg.mode = DataMode::CellAveraged;
    cfg.dx = vec![h; 2];
    let w = cached_weights(&cfg)?;
    let centre = |k: i64| -1.0 + (k as f64 + 0.5) * h;
    let cells = (0..n)
        .into_par_iter()
        .flat_map_iter(|j| {
            let w = &w;
            let eps2 = cfg.eps2;
            (0..n).map(move |i| {
                let window: Vec<f64> = w
                    .geometry
                    .total_offsets
                    .iter()
                    .map(|o| p.value([centre(i + o[0] as i64), centre(j + o[1] as i64)]))
                    .collect();
                AlphaCell { x: centre(i), y: centre(j), f: p.value([centre(i), centre(j)]), alpha: alpha_of(&window, w, eps2) }
            })
        })
        .collect();
    Ok((cells, w))
}
