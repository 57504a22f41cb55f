use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::profiles::{Profile, StreamFunctionField};
use crate::amr::{self, average_down, fill_halos, regrid, FillStats, Hierarchy, Patch};
use crate::error::{Error, Result};
use crate::prolong::{mc_slope, ProlongMethod, Prolongator};
use crate::weights::{cached_weights, DataMode, GpConfig};

pub const CFL_LIMIT: f64 = 0.7;

/// One prolongator per coarse level, each with `ℓ` and `σ` scaled to that
/// level's cell width.
pub fn level_prolongators(h: &Hierarchy, method: ProlongMethod, base: &GpConfig) -> Result<Vec<Prolongator>> {
    (0..h.max_level.max(1))
        .map(|l| {
            let mut cfg = base.clone();
            cfg.dim = 2;
            cfg.ratio = vec![h.ratio; 2];
            cfg.dx = h.level_dx(l).to_vec();
            let w = cached_weights(&cfg)?;
            Ok(Prolongator::new(method, w, cfg))
        })
        .collect()
}

/// Per-level face fluxes over the whole level domain; NaN where no patch
/// computed one. `fx[c][j][i]` is the flux through the face at `i - ½`.
struct FaceFluxes {
    n: [i64; 2],
    fx: Vec<f64>,
    fy: Vec<f64>,
}

impl FaceFluxes {
    fn new(n: [i64; 2], ncomp: usize) -> Self {
        let len = ncomp * (n[0] * n[1]) as usize;
        Self { n, fx: vec![f64::NAN; len], fy: vec![f64::NAN; len] }
    }

    #[inline]
    fn idx(&self, c: usize, i: i64, j: i64) -> usize {
        let (i, j) = (i.rem_euclid(self.n[0]), j.rem_euclid(self.n[1]));
        c * (self.n[0] * self.n[1]) as usize + (j * self.n[0] + i) as usize
    }
}

/// Upwind MUSCL flux through every face of the patch interior.
fn patch_fluxes(p: &Patch, h_lo: [f64; 2], dx: [f64; 2], t: f64) -> (Vec<f64>, Vec<f64>) {
    let v = StreamFunctionField;
    let b = p.bx;
    let (nx, ny) = (b.len(0), b.len(1));
    let mut fx = vec![0.0; p.ncomp * ((nx + 1) * ny) as usize];
    let mut fy = vec![0.0; p.ncomp * (nx * (ny + 1)) as usize];
    let ux: Vec<f64> = (b.lo[1]..=b.hi[1])
        .flat_map(|j| {
            let (ya, yb) = (h_lo[1] + j as f64 * dx[1], h_lo[1] + (j + 1) as f64 * dx[1]);
            (b.lo[0]..=b.hi[0] + 1).map(move |i| v.face_average(0, h_lo[0] + i as f64 * dx[0], ya, yb, t))
        })
        .collect();
    let uy: Vec<f64> = (b.lo[1]..=b.hi[1] + 1)
        .flat_map(|j| {
            let y = h_lo[1] + j as f64 * dx[1];
            (b.lo[0]..=b.hi[0]).map(move |i| {
                v.face_average(1, y, h_lo[0] + i as f64 * dx[0], h_lo[0] + (i + 1) as f64 * dx[0], t)
            })
        })
        .collect();
    let upwind = |u: f64, qm2: f64, qm1: f64, q0: f64, qp1: f64| {
        if u > 0.0 {
            u * (qm1 + 0.5 * mc_slope(qm2, qm1, q0))
        } else {
            u * (q0 - 0.5 * mc_slope(qm1, q0, qp1))
        }
    };
    for c in 0..p.ncomp {
        let mut k = 0;
        for j in b.lo[1]..=b.hi[1] {
            for i in b.lo[0]..=b.hi[0] + 1 {
                let q = |o: i64| p.get(c, i + o, j);
                fx[c * ((nx + 1) * ny) as usize + k] = upwind(ux[k], q(-2), q(-1), q(0), q(1));
                k += 1;
            }
        }
        let mut k = 0;
        for j in b.lo[1]..=b.hi[1] + 1 {
            for i in b.lo[0]..=b.hi[0] {
                let q = |o: i64| p.get(c, i, j + o);
                fy[c * (nx * (ny + 1)) as usize + k] = upwind(uy[k], q(-2), q(-1), q(0), q(1));
                k += 1;
            }
        }
    }
    (fx, fy)
}

/// `-∇·F` on every patch interior, with coarse faces under a finer level
/// replaced by the mean of the fine fluxes so that the composite update is
/// conservative.
fn rhs(h: &Hierarchy, t: f64) -> Vec<Vec<Vec<f64>>> {
    let ncomp = h.ncomp;
    let r = h.ratio as i64;
    let mut faces: Vec<FaceFluxes> = Vec::with_capacity(h.num_levels());
    for (l, lvl) in h.levels.iter().enumerate() {
        let dx = h.level_dx(l);
        let per_patch: Vec<(Vec<f64>, Vec<f64>)> =
            lvl.patches.par_iter().map(|p| patch_fluxes(p, h.lo, dx, t)).collect();
        let mut ff = FaceFluxes::new(lvl.n, ncomp);
        for (p, (fx, fy)) in lvl.patches.iter().zip(per_patch) {
            let b = p.bx;
            let (nx, ny) = (b.len(0), b.len(1));
            for c in 0..ncomp {
                let mut k = 0;
                for j in b.lo[1]..=b.hi[1] {
                    for i in b.lo[0]..=b.hi[0] + 1 {
                        let q = ff.idx(c, i, j);
                        ff.fx[q] = fx[c * ((nx + 1) * ny) as usize + k];
                        k += 1;
                    }
                }
                let mut k = 0;
                for j in b.lo[1]..=b.hi[1] + 1 {
                    for i in b.lo[0]..=b.hi[0] {
                        let q = ff.idx(c, i, j);
                        ff.fy[q] = fy[c * (nx * (ny + 1)) as usize + k];
                        k += 1;
                    }
                }
            }
        }
        faces.push(ff);
    }
    for l in (0..h.finest()).rev() {
        let (lo, hi) = faces.split_at_mut(l + 1);
        let (coarse, fine) = (&mut lo[l], &hi[0]);
        for p in &h.levels[l + 1].patches {
            let cb = p.bx.coarsen(r);
            for c in 0..ncomp {
                for cj in cb.lo[1]..=cb.hi[1] {
                    for ci in cb.lo[0]..=cb.hi[0] + 1 {
                        let s: f64 = (0..r).map(|m| fine.fx[fine.idx(c, ci * r, cj * r + m)]).sum();
                        if !s.is_nan() {
                            let q = coarse.idx(c, ci, cj);
                            coarse.fx[q] = s / r as f64;
                        }
                    }
                }
                for cj in cb.lo[1]..=cb.hi[1] + 1 {
                    for ci in cb.lo[0]..=cb.hi[0] {
                        let s: f64 = (0..r).map(|m| fine.fy[fine.idx(c, ci * r + m, cj * r)]).sum();
                        if !s.is_nan() {
                            let q = coarse.idx(c, ci, cj);
                            coarse.fy[q] = s / r as f64;
                        }
                    }
                }
            }
        }
    }
    h.levels
        .iter()
        .enumerate()
        .map(|(l, lvl)| {
            let dx = h.level_dx(l);
            let ff = &faces[l];
            lvl.patches
                .par_iter()
                .map(|p| {
                    let mut out = Vec::with_capacity(ncomp * p.bx.num_cells());
                    for c in 0..ncomp {
                        for (i, j) in p.bx.cells() {
                            let dfx = ff.fx[ff.idx(c, i + 1, j)] - ff.fx[ff.idx(c, i, j)];
                            let dfy = ff.fy[ff.idx(c, i, j + 1)] - ff.fy[ff.idx(c, i, j)];
                            out.push(-(dfx / dx[0] + dfy / dx[1]));
                        }
                    }
                    out
                })
                .collect()
        })
        .collect()
}

fn interiors(h: &Hierarchy) -> Vec<Vec<Vec<f64>>> {
    h.levels
        .iter()
        .map(|lvl| {
            lvl.patches
                .iter()
                .map(|p| (0..p.ncomp).flat_map(|c| p.bx.cells().map(move |(i, j)| p.get(c, i, j))).collect())
                .collect()
        })
        .collect()
}

/// `u ← u0 + a·L` on every patch interior.
fn axpy(h: &mut Hierarchy, u0: &[Vec<Vec<f64>>], a: f64, l_u: &[Vec<Vec<f64>>]) {
    for (l, lvl) in h.levels.iter_mut().enumerate() {
        lvl.patches.par_iter_mut().enumerate().for_each(|(pi, p)| {
            let mut k = 0;
            for c in 0..p.ncomp {
                for (i, j) in p.bx.cells() {
                    p.set(c, i, j, u0[l][pi][k] + a * l_u[l][pi][k]);
                    k += 1;
                }
            }
        });
    }
}

/// One midpoint-rule step of the whole hierarchy with a shared `dt`.
pub fn advance(h: &mut Hierarchy, dt: f64, t: f64, pro: &[Prolongator]) -> Result<FillStats> {
    let dx_f = h.level_dx(h.finest());
    let cfl = dt * StreamFunctionField.max_speed() / dx_f[0].min(dx_f[1]);
    if cfl > CFL_LIMIT * (1.0 + 1e-12) {
        return Err(Error::CflViolation { cfl, limit: CFL_LIMIT });
    }
    let u0 = interiors(h);
    let mut st = fill_halos(h, pro)?;
    let k1 = rhs(h, t);
    axpy(h, &u0, 0.5 * dt, &k1);
    average_down(h);
    st.merge(&fill_halos(h, pro)?);
    let k2 = rhs(h, t + 0.5 * dt);
    axpy(h, &u0, dt, &k2);
    average_down(h);
    Ok(st)
}

/// `Σ|a − b|·ΔV / V` over the composite grid.
pub fn l1_error(a: &Hierarchy, b: &Hierarchy) -> Result<f64> {
    if !a.same_layout(b) {
        return Err(Error::LayoutMismatch("levels or patch boxes differ".into()));
    }
    let vol = (a.hi[0] - a.lo[0]) * (a.hi[1] - a.lo[1]);
    let s: f64 = a
        .composite_cells()
        .into_iter()
        .map(|(l, p, i, j)| {
            let dx = a.levels[l].dx;
            let d: f64 = (0..a.ncomp)
                .map(|c| (a.levels[l].patches[p].get(c, i, j) - b.levels[l].patches[p].get(c, i, j)).abs())
                .sum();
            d * dx[0] * dx[1]
        })
        .sum();
    Ok(s / vol)
}

/// `Σ f·ΔV` of component 0 over the composite grid.
pub fn mass(h: &Hierarchy) -> f64 {
    h.integral(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvectConfig {
    pub problem: Profile,
    pub base_n: i64,
    /// Levels above the base.
    pub levels: usize,
    pub ratio: u32,
    pub method: ProlongMethod,
    pub t_final: f64,
    pub cfl: f64,
    pub regrid_every: usize,
    pub max_patch: i64,
    /// Overrides the profile's default tag threshold.
    pub threshold: Option<f64>,
    /// Steps between L1 evaluations in the time series; the last step is
    /// always evaluated.
    pub series_every: usize,
    /// Steps between plotfiles, written to `plot_dir`.
    pub plot_every: Option<usize>,
    pub plot_dir: Option<PathBuf>,
    pub gp: GpConfig,
}

impl AdvectConfig {
    pub fn new(problem: Profile, method: ProlongMethod) -> Self {
        Self {
            problem,
            base_n: 64,
            levels: 2,
            ratio: 2,
            method,
            t_final: 2.0,
            cfl: CFL_LIMIT,
            regrid_every: 2,
            max_patch: 32,
            threshold: None,
            series_every: 1,
            plot_every: None,
            plot_dir: None,
            gp: GpConfig::new(2, vec![2, 2], DataMode::CellAveraged),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    /// NaN on steps skipped by `series_every`.
    pub l1: f64,
    pub cells_per_level: Vec<usize>,
    pub prolong_calls: u64,
    pub weno_calls: u64,
}

impl StepRecord {
    pub fn weno_fraction(&self) -> f64 {
        if self.prolong_calls == 0 {
            0.0
        } else {
            self.weno_calls as f64 / self.prolong_calls as f64
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdvectResult {
    pub final_l1: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub steps: usize,
    pub dt: f64,
    pub records: Vec<StepRecord>,
    /// Every halo and regrid fill over the run.
    pub stats: FillStats,
    pub final_cells_per_level: Vec<usize>,
    pub plotfiles: Vec<PathBuf>,
    #[serde(skip)]
    pub hierarchy: Option<Hierarchy>,
}

impl AdvectResult {
    pub fn mass_drift(&self) -> f64 {
        ((self.final_mass - self.initial_mass) / self.initial_mass).abs()
    }
}

fn exact_on_layout(h: &Hierarchy, problem: Profile) -> Hierarchy {
    let mut e = h.clone();
    e.fill_from(&move |a, b| vec![problem.cell_value(a, b)]);
    e
}

/// Builds the initial hierarchy from exact cell values, one level at a time.
pub fn initial_hierarchy(cfg: &AdvectConfig, pro: Option<&[Prolongator]>) -> Result<(Hierarchy, Vec<Prolongator>)> {
    let (lo, hi) = cfg.problem.domain();
    let mut h = Hierarchy::new([cfg.base_n; 2], lo, hi, 1, cfg.ratio, cfg.levels, cfg.max_patch)?;
    let pro = match pro {
        Some(p) => p.to_vec(),
        None => level_prolongators(&h, cfg.method, &cfg.gp)?,
    };
    let problem = cfg.problem;
    let filler = move |a: [f64; 2], b: [f64; 2]| vec![problem.cell_value(a, b)];
    h.fill_from(&filler);
    let thr = cfg.threshold.unwrap_or(problem.tag_threshold());
    for _ in 0..=cfg.levels {
        regrid(&mut h, thr, &pro, Some(&filler))?;
    }
    average_down(&mut h);
    amr::check_nesting(&h)?;
    Ok((h, pro))
}

/// Runs one advection experiment to `t_final`.
pub fn run_advection(cfg: &AdvectConfig) -> Result<AdvectResult> {
    if !(cfg.cfl > 0.0 && cfg.cfl <= CFL_LIMIT) {
        return Err(Error::CflViolation { cfl: cfg.cfl, limit: CFL_LIMIT });
    }
    if !(cfg.t_final >= 0.0) || cfg.regrid_every == 0 || cfg.series_every == 0 {
        return Err(Error::InvalidConfig("need t_final >= 0 and nonzero step intervals".into()));
    }
    let (mut h, pro) = initial_hierarchy(cfg, None)?;
    let thr = cfg.threshold.unwrap_or(cfg.problem.tag_threshold());
    let initial_mass = mass(&h);
    let dx_f = h.level_dx(cfg.levels);
    let dt_max = cfg.cfl * dx_f[0].min(dx_f[1]) / StreamFunctionField.max_speed();
    let steps = (cfg.t_final / dt_max).ceil() as usize;
    let dt = if steps == 0 { 0.0 } else { cfg.t_final / steps as f64 };

    let mut plotfiles = Vec::new();
    let mut plot = |h: &Hierarchy, step: usize| -> Result<()> {
        if let (Some(every), Some(dir)) = (cfg.plot_every, cfg.plot_dir.as_ref()) {
            if step.is_multiple_of(every) || step == steps {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("plt{step:05}.csv"));
                amr::write_plotfile(h, &path)?;
                plotfiles.push(path);
            }
        }
        Ok(())
    };
    plot(&h, 0)?;

    let mut stats = FillStats::default();
    let mut records = Vec::with_capacity(steps);
    for step in 0..steps {
        let t = step as f64 * dt;
        let mut st = FillStats::default();
        if step > 0 && step % cfg.regrid_every == 0 {
            st.merge(&regrid(&mut h, thr, &pro, None)?);
            average_down(&mut h);
        }
        st.merge(&advance(&mut h, dt, t, &pro)?);
        stats.merge(&st);
        let done = step + 1;
        let l1 = if done % cfg.series_every == 0 || done == steps {
            l1_error(&h, &exact_on_layout(&h, cfg.problem))?
        } else {
            f64::NAN
        };
        records.push(StepRecord {
            step: done,
            t: if done == steps { cfg.t_final } else { done as f64 * dt },
            dt,
            l1,
            cells_per_level: h.levels.iter().map(|l| l.num_cells()).collect(),
            prolong_calls: st.prolong_calls,
            weno_calls: st.weno_calls,
        });
        plot(&h, done)?;
    }
    let final_l1 = l1_error(&h, &exact_on_layout(&h, cfg.problem))?;
    Ok(AdvectResult {
        final_l1,
        initial_mass,
        final_mass: mass(&h),
        steps,
        dt,
        records,
        stats,
        final_cells_per_level: h.levels.iter().map(|l| l.num_cells()).collect(),
        plotfiles,
        hierarchy: Some(h),
    })
}
