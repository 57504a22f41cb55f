//! One-time construction of every vector the prolongation engine consumes.
//!
//! Weights are dimensionless: they depend only on the geometry, the
//! refinement ratio, the data mode and the ratios `ℓ/Δx_d`, `σ/Δx_d`. That
//! tuple is the cache key.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{cross_cov, integrated_cov, se_kernel_offset, KernelParams};
use crate::smallmat::{lstsq_qr, norm2, sym_eigen, Cholesky, RectMatrix, SymMatrix};
use crate::stencil::{build_geometry, fine_points, FinePointSet, StencilGeometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    /// Values are point samples at cell centres; kernel matrices use `K`.
    Pointwise,
    /// Values are cell averages; kernel matrices use the integrated `C`.
    CellAveraged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub dim: usize,
    pub ratio: Vec<u32>,
    pub mode: DataMode,
    /// `ℓ = ell_factor · min(dx)`.
    pub ell_factor: f64,
    /// `σ = sigma_factor · min(dx)`.
    pub sigma_factor: f64,
    pub alpha_c: f64,
    pub eps: f64,
    pub p: f64,
    pub eps2: f64,
    /// Cell width of the level being prolonged from.
    pub dx: Vec<f64>,
}

impl GpConfig {
    /// Defaults on a unit coarse grid.
    pub fn new(dim: usize, ratio: Vec<u32>, mode: DataMode) -> Self {
        Self {
            dim,
            ratio,
            mode,
            ell_factor: 12.0,
            sigma_factor: if dim >= 3 { 1.5 } else { 3.0 },
            alpha_c: 100.0,
            eps: 1e-36,
            p: 2.0,
            eps2: 1e-36,
            dx: vec![1.0; dim],
        }
    }

    pub fn with_dx(mut self, dx: Vec<f64>) -> Self {
        self.dx = dx;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if self.ratio.len() != self.dim || self.dx.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "dim {} with {} ratios and {} cell widths",
                self.dim,
                self.ratio.len(),
                self.dx.len()
            )));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.ell_factor) || !positive(self.sigma_factor) || self.dx.iter().any(|&d| !positive(d)) {
            return Err(Error::InvalidConfig("length factors and cell widths must be positive".into()));
        }
        if !(self.alpha_c >= 0.0) || !(self.p >= 1.0) || !(self.eps > 0.0) || !(self.eps2 > 0.0) {
            return Err(Error::InvalidConfig("need alpha_c >= 0, p >= 1, eps > 0, eps2 > 0".into()));
        }
        if self.ratio.contains(&0) {
            return Err(Error::InvalidConfig("refinement ratios must be at least 1".into()));
        }
        Ok(())
    }

    fn min_dx(&self) -> f64 {
        self.dx.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn ell(&self) -> f64 {
        self.ell_factor * self.min_dx()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_factor * self.min_dx()
    }

    pub fn kernel_params(&self) -> Result<KernelParams> {
        KernelParams::new(self.ell(), self.sigma(), self.dx.clone(), self.ratio.clone())
    }
}

/// Everything the run-time engine needs, for one `(geometry, ratio, mode,
/// ℓ/Δx, σ/Δx)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProlongWeights {
    pub mode: DataMode,
    /// `ℓ/Δx_d`.
    pub ell_ratio: Vec<f64>,
    /// `σ/Δx_d`.
    pub sigma_ratio: Vec<f64>,
    pub geometry: StencilGeometry,
    pub fine_points: FinePointSet,
    /// `[fine point][total-stencil cell]`.
    pub w_total: Vec<Vec<f64>>,
    /// `[fine point][substencil][position]`.
    pub w_sub: Vec<Vec<Vec<f64>>>,
    /// `[fine point][substencil]`.
    pub gamma: Vec<Vec<f64>>,
    /// `‖Mγ − w_total‖₂` per fine point.
    pub gamma_residual: Vec<f64>,
    /// Ascending eigenvalues of the σ-kernel substencil matrix.
    pub eigenvalues: Vec<f64>,
    /// `u_i = v_i/√λ_i`, so that `β = Σ_i (u_i·f)²`.
    pub beta_vectors: Vec<Vec<f64>>,
}

impl ProlongWeights {
    pub fn num_fine(&self) -> usize {
        self.fine_points.len()
    }

    /// `β = fᵀA_σ⁻¹f` for one substencil's data.
    #[inline]
    pub fn beta(&self, f: &[f64]) -> f64 {
        self.beta_vectors
            .iter()
            .map(|u| {
                let s: f64 = u.iter().zip(f).map(|(a, b)| a * b).sum();
                s * s
            })
            .sum()
    }

    /// Least-squares matrix `M[cell][m]` for fine point `i`.
    pub fn gamma_matrix(&self, i: usize) -> RectMatrix {
        assemble_gamma_matrix(&self.geometry, &self.w_sub[i])
    }
}

fn fine_delta(fp: &[f64], cell: &[i32]) -> Vec<f64> {
    fp.iter().zip(cell).map(|(x, &c)| x - c as f64).collect()
}

fn int_delta(a: &[i32], b: &[i32]) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| (x - y) as f64).collect()
}

/// Kernel matrix over an offset list, in the family selected by `mode`.
fn kernel_matrix(offsets: &[Vec<i32>], params: &KernelParams, mode: DataMode) -> Result<SymMatrix> {
    SymMatrix::try_from_fn(offsets.len(), |i, j| {
        let d = int_delta(&offsets[i], &offsets[j]);
        match mode {
            DataMode::Pointwise => Ok(se_kernel_offset(&d, params)),
            DataMode::CellAveraged => integrated_cov(&d, params),
        }
    })
}

/// Prediction vector between the stencil cells and one fine point.
fn prediction_vector(offsets: &[Vec<i32>], fp: &[f64], params: &KernelParams, mode: DataMode) -> Result<Vec<f64>> {
    offsets
        .iter()
        .map(|c| {
            let d = fine_delta(fp, c);
            match mode {
                DataMode::Pointwise => Ok(se_kernel_offset(&d, params)),
                DataMode::CellAveraged => cross_cov(&d, params),
            }
        })
        .collect()
}

/// Whether the fine point coincides with the coarse centre datum, in which
/// case GP regression returns that datum and the weight is a unit vector.
fn hits_centre(config: &GpConfig, fp: &[f64]) -> bool {
    match config.mode {
        DataMode::Pointwise => fp.iter().all(|&x| x == 0.0),
        DataMode::CellAveraged => config.ratio.iter().all(|&r| r == 1),
    }
}

fn solve_or_unit(
    chol: &Cholesky,
    offsets: &[Vec<i32>],
    fp: &[f64],
    params: &KernelParams,
    config: &GpConfig,
) -> Result<Vec<f64>> {
    if hits_centre(config, fp) {
        if let Some(c) = offsets.iter().position(|o| o.iter().all(|&v| v == 0)) {
            let mut e = vec![0.0; offsets.len()];
            e[c] = 1.0;
            return Ok(e);
        }
    }
    Ok(chol.solve(&prediction_vector(offsets, fp, params, config.mode)?))
}

fn reflections(dim: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..1usize << dim).map(move |mask| (0..dim).filter(|d| mask >> d & 1 == 1).collect())
}

/// Average `value(g)` over the reflection group, where `g` is the list of
/// flipped axes. Exact mirror symmetry is restored this way; the raw solves
/// differ from it by round-off amplified by the kernel matrix condition.
fn group_mean(dim: usize, mut value: impl FnMut(&[usize]) -> f64) -> f64 {
    let mut s = 0.0;
    let mut n = 0.0;
    for g in reflections(dim) {
        s += value(&g);
        n += 1.0;
    }
    s / n
}

fn reflect_fine(fp: &FinePointSet, mut i: usize, g: &[usize]) -> usize {
    for &a in g {
        i = fp.reflect(i, a);
    }
    i
}

pub fn build_total_weights(config: &GpConfig, geometry: &StencilGeometry, fp: &FinePointSet) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let params = config.kernel_params()?;
    let k = kernel_matrix(&geometry.total_offsets, &params, config.mode)?;
    let chol = Cholesky::factor(&k)?;
    let raw: Vec<Vec<f64>> = fp
        .offsets
        .iter()
        .map(|x| solve_or_unit(&chol, &geometry.total_offsets, x, &params, config))
        .collect::<Result<_>>()?;
    Ok((0..fp.len())
        .map(|i| {
            (0..geometry.total_len())
                .map(|kk| {
                    group_mean(geometry.dim, |g| {
                        let mut c = kk;
                        for &a in g {
                            c = geometry.reflect_total(c, a);
                        }
                        raw[reflect_fine(fp, i, g)][c]
                    })
                })
                .collect()
        })
        .collect())
}

pub fn build_sub_weights(
    config: &GpConfig,
    geometry: &StencilGeometry,
    fp: &FinePointSet,
) -> Result<Vec<Vec<Vec<f64>>>> {
    config.validate()?;
    let params = config.kernel_params()?;
    // every cross has the same relative shape, hence one matrix for all m
    let k = kernel_matrix(&geometry.sub_relative(0), &params, config.mode)?;
    let chol = Cholesky::factor(&k)?;
    let mut raw = Vec::with_capacity(fp.len());
    for x in &fp.offsets {
        let per_m: Vec<Vec<f64>> = geometry
            .sub_offsets
            .iter()
            .map(|cells| solve_or_unit(&chol, cells, x, &params, config))
            .collect::<Result<_>>()?;
        raw.push(per_m);
    }
    let n = geometry.sub_len();
    Ok((0..fp.len())
        .map(|i| {
            (0..geometry.num_sub())
                .map(|m| {
                    (0..n)
                        .map(|p| {
                            group_mean(geometry.dim, |g| {
                                let (mut mm, mut pp) = (m, p);
                                for &a in g {
                                    mm = geometry.reflect_sub(mm, a);
                                    pp = geometry.reflect_sub_pos(pp, a);
                                }
                                raw[reflect_fine(fp, i, g)][mm][pp]
                            })
                        })
                        .collect()
                })
                .collect()
        })
        .collect())
}

fn assemble_gamma_matrix(geometry: &StencilGeometry, w_sub: &[Vec<f64>]) -> RectMatrix {
    let mut m = RectMatrix::zeros(geometry.total_len(), geometry.num_sub());
    for (cell, pairs) in geometry.membership.iter().enumerate() {
        for &(s, p) in pairs {
            m.set(cell, s, w_sub[s][p]);
        }
    }
    m
}

fn gamma_residual(m: &RectMatrix, gamma: &[f64], w_total: &[f64]) -> f64 {
    let r: Vec<f64> = m.mul_vec(gamma).iter().zip(w_total).map(|(a, b)| a - b).collect();
    norm2(&r)
}

/// Pseudo-inverse solution through the eigensystem of `MᵀM`. Only reached
/// when the substencil predictions coincide, e.g. for a unit ratio.
fn min_norm_lstsq(m: &RectMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.cols();
    let mtm = SymMatrix::from_fn(n, |i, j| (0..m.rows()).map(|k| m.get(k, i) * m.get(k, j)).sum());
    let rhs = m.tr_mul_vec(b);
    let es = sym_eigen(&mtm)?;
    let top = es.values.iter().copied().fold(0.0, f64::max);
    let mut x = vec![0.0; n];
    for (v, &l) in es.vectors.iter().zip(&es.values) {
        if l > 1e-12 * top {
            let c = v.iter().zip(&rhs).map(|(a, b)| a * b).sum::<f64>() / l;
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += c * vi;
            }
        }
    }
    Ok(x)
}

/// γ per fine point by least squares, with the residual of the returned γ.
pub fn build_gamma(
    w_total: &[Vec<f64>],
    w_sub: &[Vec<Vec<f64>>],
    geometry: &StencilGeometry,
    fp: &FinePointSet,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mats: Vec<RectMatrix> = w_sub.iter().map(|ws| assemble_gamma_matrix(geometry, ws)).collect();
    let raw: Vec<Vec<f64>> = mats
        .iter()
        .zip(w_total)
        .map(|(m, w)| match lstsq_qr(m, w) {
            Ok(sol) => Ok(sol.x),
            Err(Error::RankDeficient { .. }) => min_norm_lstsq(m, w),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let gamma: Vec<Vec<f64>> = (0..fp.len())
        .map(|i| {
            (0..geometry.num_sub())
                .map(|s| {
                    group_mean(geometry.dim, |g| {
                        let mut mm = s;
                        for &a in g {
                            mm = geometry.reflect_sub(mm, a);
                        }
                        raw[reflect_fine(fp, i, g)][mm]
                    })
                })
                .collect()
        })
        .collect();
    let residual = (0..fp.len()).map(|i| gamma_residual(&mats[i], &gamma[i], &w_total[i])).collect();
    Ok((gamma, residual))
}

/// Eigenvalues and scaled eigenvectors of the σ-kernel substencil matrix.
pub fn build_beta_vectors(config: &GpConfig, geometry: &StencilGeometry) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    config.validate()?;
    let params = config.kernel_params()?.shock();
    let a = kernel_matrix(&geometry.sub_relative(0), &params, config.mode)?;
    let es = sym_eigen(&a)?;
    if let Some((i, &l)) = es.values.iter().enumerate().find(|(_, &l)| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite { pivot: i, value: l });
    }
    let u = es
        .vectors
        .iter()
        .zip(&es.values)
        .map(|(v, &l)| {
            let s = l.sqrt();
            v.iter().map(|x| x / s).collect()
        })
        .collect();
    Ok((es.values, u))
}

/// Σ-kernel substencil matrix used for β, exposed for oracles.
pub fn shock_matrix(config: &GpConfig, geometry: &StencilGeometry) -> Result<SymMatrix> {
    kernel_matrix(&geometry.sub_relative(0), &config.kernel_params()?.shock(), config.mode)
}

/// Runs the whole factory without touching the cache.
pub fn build_weights(config: &GpConfig) -> Result<ProlongWeights> {
    config.validate()?;
    let geometry = build_geometry(config.dim)?;
    let fp = fine_points(&config.ratio)?;
    let w_total = build_total_weights(config, &geometry, &fp)?;
    let w_sub = build_sub_weights(config, &geometry, &fp)?;
    let (gamma, gamma_residual) = build_gamma(&w_total, &w_sub, &geometry, &fp)?;
    let (eigenvalues, beta_vectors) = build_beta_vectors(config, &geometry)?;
    BUILD_COUNT.fetch_add(1, Ordering::SeqCst);
    let ell = config.ell();
    let sigma = config.sigma();
    Ok(ProlongWeights {
        mode: config.mode,
        ell_ratio: config.dx.iter().map(|d| ell / d).collect(),
        sigma_ratio: config.dx.iter().map(|d| sigma / d).collect(),
        geometry,
        fine_points: fp,
        w_total,
        w_sub,
        gamma,
        gamma_residual,
        eigenvalues,
        beta_vectors,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    dim: usize,
    ratio: Vec<u32>,
    mode: DataMode,
    ell_bits: Vec<u64>,
    sigma_bits: Vec<u64>,
}

impl CacheKey {
    fn of(config: &GpConfig) -> Self {
        let (ell, sigma) = (config.ell(), config.sigma());
        Self {
            dim: config.dim,
            ratio: config.ratio.clone(),
            mode: config.mode,
            ell_bits: config.dx.iter().map(|d| (ell / d).to_bits()).collect(),
            sigma_bits: config.dx.iter().map(|d| (sigma / d).to_bits()).collect(),
        }
    }

    fn file_name(&self) -> String {
        let ratio: Vec<String> = self.ratio.iter().map(u32::to_string).collect();
        let bits: Vec<String> = self.ell_bits.iter().chain(&self.sigma_bits).map(|b| format!("{b:016x}")).collect();
        let mode = match self.mode {
            DataMode::Pointwise => "point",
            DataMode::CellAveraged => "cell",
        };
        format!("gpw_d{}_r{}_{}_{}.json", self.dim, ratio.join("x"), mode, bits.join("_"))
    }
}

static BUILD_COUNT: AtomicUsize = AtomicUsize::new(0);
static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<ProlongWeights>>>> = OnceLock::new();

/// Number of factory runs in this process.
pub fn build_count() -> usize {
    BUILD_COUNT.load(Ordering::SeqCst)
}

fn persisted_path(key: &CacheKey) -> Option<PathBuf> {
    std::env::var_os("GP_PROLONG_CACHE_DIR").map(|d| PathBuf::from(d).join(key.file_name()))
}

/// Process-wide cached weights. The factory runs at most once per key; the
/// lock is held across the build so concurrent first users wait for it.
pub fn cached_weights(config: &GpConfig) -> Result<Arc<ProlongWeights>> {
    config.validate()?;
    let key = CacheKey::of(config);
    let mut map = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    if let Some(w) = map.get(&key) {
        return Ok(Arc::clone(w));
    }
    let path = persisted_path(&key);
    let loaded = path
        .as_ref()
        .and_then(|p| std::fs::read(p).ok())
        .and_then(|bytes| serde_json::from_slice::<ProlongWeights>(&bytes).ok())
        .filter(|w| w.mode == config.mode && w.fine_points.ratio == config.ratio);
    let w = match loaded {
        Some(w) => w,
        None => {
            let w = build_weights(config)?;
            if let Some(p) = &path {
                if let Some(dir) = p.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(p, serde_json::to_vec(&w)?)?;
            }
            w
        }
    };
    let w = Arc::new(w);
    map.insert(key, Arc::clone(&w));
    Ok(w)
}
