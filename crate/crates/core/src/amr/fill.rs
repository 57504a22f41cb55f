use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Hierarchy, LevelSnapshot, Patch};
use crate::error::{Error, Result};
use crate::prolong::Prolongator;

/// Ghost layers plus the stencil radius, in parent cells.
pub(crate) const NEST_BUFFER: i64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FillStats {
    /// Coarse-cell prolongations, counted per component.
    pub prolong_calls: u64,
    pub weno_calls: u64,
    /// Cells filled by same-level copy.
    pub copied: u64,
    /// Extremes of every prolonged value; `±inf` when nothing was prolonged.
    pub min_prolonged: f64,
    pub max_prolonged: f64,
}

impl Default for FillStats {
    fn default() -> Self {
        Self { prolong_calls: 0, weno_calls: 0, copied: 0, min_prolonged: f64::INFINITY, max_prolonged: f64::NEG_INFINITY }
    }
}

impl FillStats {
    pub fn merge(&mut self, o: &FillStats) {
        self.prolong_calls += o.prolong_calls;
        self.weno_calls += o.weno_calls;
        self.copied += o.copied;
        self.min_prolonged = self.min_prolonged.min(o.min_prolonged);
        self.max_prolonged = self.max_prolonged.max(o.max_prolonged);
    }
}

pub(crate) fn pick(pro: &[Prolongator], coarse_level: usize) -> &Prolongator {
    &pro[coarse_level.min(pro.len() - 1)]
}

/// Fills either the ghost ring or the interior of `p`: same-level data
/// where `same` has it, otherwise prolongation from `parent`.
pub(crate) fn fill_patch(
    p: &mut Patch,
    ghost_only: bool,
    same: Option<&LevelSnapshot>,
    parent: Option<&LevelSnapshot>,
    pro: Option<&Prolongator>,
    n_fine: [i64; 2],
    r: i64,
) -> Result<FillStats> {
    let mut st = FillStats::default();
    let region = if ghost_only { p.grown() } else { p.bx };
    // wrapped parent cell -> (fine i, fine j, child index)
    let mut pending: BTreeMap<(i64, i64), Vec<(i64, i64, usize)>> = BTreeMap::new();
    for (i, j) in region.cells() {
        if ghost_only && p.bx.contains(i, j) {
            continue;
        }
        if let Some(s) = same {
            if !s.get(0, i, j).is_nan() {
                for c in 0..p.ncomp {
                    p.set(c, i, j, s.get(c, i, j));
                }
                st.copied += 1;
                continue;
            }
        }
        let (iw, jw) = (i.rem_euclid(n_fine[0]), j.rem_euclid(n_fine[1]));
        let k = (iw.rem_euclid(r) * r + jw.rem_euclid(r)) as usize;
        pending.entry((iw.div_euclid(r), jw.div_euclid(r))).or_default().push((i, j, k));
    }
    if pending.is_empty() {
        return Ok(st);
    }
    let (parent, pro) = match (parent, pro) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::NestingViolation(format!(
                "level {} patch {:?} has cells with no same-level data and no parent",
                p.level, p.bx
            )))
        }
    };
    let offsets = &pro.geometry().total_offsets;
    let mut window = vec![0.0; offsets.len()];
    let mut out = vec![0.0; pro.num_fine()];
    for ((ci, cj), targets) in pending {
        for c in 0..p.ncomp {
            for (w, o) in window.iter_mut().zip(offsets) {
                *w = parent.get(c, ci + o[0] as i64, cj + o[1] as i64);
            }
            if window.iter().any(|v| v.is_nan()) {
                return Err(Error::NestingViolation(format!(
                    "stencil around parent cell ({ci},{cj}) of level {} patch {:?} leaves the parent level",
                    p.level, p.bx
                )));
            }
            if pro.prolong_into(&window, &mut out) {
                st.weno_calls += 1;
            }
            st.prolong_calls += 1;
            for &(i, j, k) in &targets {
                let v = out[k];
                st.min_prolonged = st.min_prolonged.min(v);
                st.max_prolonged = st.max_prolonged.max(v);
                p.set(c, i, j, v);
            }
        }
    }
    Ok(st)
}

/// Ghost fill of every patch on `level`: same-level copy with periodic wrap,
/// then prolongation from the parent's interior data.
pub fn fill_halo(h: &mut Hierarchy, level: usize, pro: &[Prolongator]) -> Result<FillStats> {
    let ncomp = h.ncomp;
    let r = h.ratio as i64;
    let same = h.levels[level].snapshot(ncomp);
    let parent = (level > 0).then(|| h.levels[level - 1].snapshot(ncomp));
    let p = (level > 0).then(|| pick(pro, level - 1));
    let n = h.levels[level].n;
    let stats: Vec<Result<FillStats>> = h.levels[level]
        .patches
        .par_iter_mut()
        .map(|patch| fill_patch(patch, true, Some(&same), parent.as_ref(), p, n, r))
        .collect();
    let mut total = FillStats::default();
    for s in stats {
        total.merge(&s?);
    }
    Ok(total)
}

pub fn fill_halos(h: &mut Hierarchy, pro: &[Prolongator]) -> Result<FillStats> {
    let mut total = FillStats::default();
    for l in 0..h.num_levels() {
        total.merge(&fill_halo(h, l, pro)?);
    }
    Ok(total)
}

/// Replaces every covered coarse cell by the mean of its children, finest
/// pair first.
pub fn average_down(h: &mut Hierarchy) {
    let r = h.ratio as i64;
    let ncomp = h.ncomp;
    let inv = 1.0 / (r * r) as f64;
    for l in (0..h.finest()).rev() {
        let (lo, hi) = h.levels.split_at_mut(l + 1);
        let coarse = &mut lo[l];
        let fine = &hi[0];
        coarse.patches.par_iter_mut().for_each(|cp| {
            for fp in &fine.patches {
                let Some(ib) = fp.bx.coarsen(r).intersect(&cp.bx) else { continue };
                for c in 0..ncomp {
                    for (ci, cj) in ib.cells() {
                        let mut s = 0.0;
                        for fj in cj * r..(cj + 1) * r {
                            for fi in ci * r..(ci + 1) * r {
                                s += fp.get(c, fi, fj);
                            }
                        }
                        cp.set(c, ci, cj, s * inv);
                    }
                }
            }
        });
    }
}

/// Every fine patch, grown by its ghost cells and the prolongation stencil,
/// must sit on parent-level data. Level 1 is always nested in the full base.
pub fn check_nesting(h: &Hierarchy) -> Result<()> {
    let r = h.ratio as i64;
    for l in 1..h.num_levels() {
        let dom = h.levels[l].domain();
        for p in &h.levels[l].patches {
            if !dom.contains_box(&p.bx) {
                return Err(Error::NestingViolation(format!("level {l} box {:?} leaves the domain", p.bx)));
            }
            if p.bx.lo[0] % r != 0 || p.bx.lo[1] % r != 0 || p.bx.len(0) % r != 0 || p.bx.len(1) % r != 0 {
                return Err(Error::NestingViolation(format!("level {l} box {:?} not aligned to the ratio", p.bx)));
            }
        }
        if l < 2 {
            continue;
        }
        let parent = &h.levels[l - 1];
        let cov = parent.coverage();
        let n = parent.n;
        for p in &h.levels[l].patches {
            for (i, j) in p.bx.coarsen(r).grow(NEST_BUFFER).cells() {
                if !cov[(j.rem_euclid(n[1]) * n[0] + i.rem_euclid(n[0])) as usize] {
                    return Err(Error::NestingViolation(format!(
                        "level {l} box {:?} needs parent cell ({i},{j}) which level {} lacks",
                        p.bx,
                        l - 1
                    )));
                }
            }
        }
    }
    Ok(())
}
