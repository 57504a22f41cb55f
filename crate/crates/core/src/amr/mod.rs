//! A small block-structured AMR substrate in two dimensions.
//!
//! Levels are unions of rectangular patches on a periodic domain. Level 0
//! always tiles the whole domain. Every operation that reads across patches
//! first takes a dense [`LevelSnapshot`] of the source level, so patch
//! updates never observe each other and can run in parallel.

mod boxes;
mod fill;
mod io;
mod regrid;

pub use boxes::IndexBox;
pub use fill::{average_down, check_nesting, fill_halo, fill_halos, FillStats};
pub use io::write_plotfile;
pub use regrid::{cluster_tags, regrid, tag_cells, CellFiller, TagField};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ghost width needed by MUSCL fluxes.
pub const GHOST: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub level: usize,
    pub bx: IndexBox,
    pub ghost: usize,
    pub ncomp: usize,
    /// Component-major, then `j`, then `i`, over `bx` grown by `ghost`.
    pub data: Vec<f64>,
}

impl Patch {
    pub fn new(level: usize, bx: IndexBox, ncomp: usize) -> Self {
        let g = bx.grow(GHOST as i64);
        Self { level, bx, ghost: GHOST, ncomp, data: vec![0.0; ncomp * g.num_cells()] }
    }

    pub fn grown(&self) -> IndexBox {
        self.bx.grow(self.ghost as i64)
    }

    #[inline]
    pub fn idx(&self, c: usize, i: i64, j: i64) -> usize {
        let g = self.grown();
        let nx = g.len(0) as usize;
        let ny = g.len(1) as usize;
        debug_assert!(g.contains(i, j), "({i},{j}) outside {g:?}");
        c * nx * ny + (j - g.lo[1]) as usize * nx + (i - g.lo[0]) as usize
    }

    #[inline]
    pub fn get(&self, c: usize, i: i64, j: i64) -> f64 {
        self.data[self.idx(c, i, j)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, i: i64, j: i64, v: f64) {
        let k = self.idx(c, i, j);
        self.data[k] = v;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// Cells across the domain at this level.
    pub n: [i64; 2],
    pub dx: [f64; 2],
    pub patches: Vec<Patch>,
}

impl Level {
    pub fn boxes(&self) -> Vec<IndexBox> {
        self.patches.iter().map(|p| p.bx).collect()
    }

    pub fn num_cells(&self) -> usize {
        self.patches.iter().map(|p| p.bx.num_cells()).sum()
    }

    pub fn domain(&self) -> IndexBox {
        IndexBox::new([0, 0], [self.n[0] - 1, self.n[1] - 1])
    }

    /// Dense copy of the patch interiors; uncovered cells are NaN.
    pub fn snapshot(&self, ncomp: usize) -> LevelSnapshot {
        let mut s = LevelSnapshot { n: self.n, ncomp, data: vec![f64::NAN; ncomp * (self.n[0] * self.n[1]) as usize] };
        for p in &self.patches {
            for c in 0..ncomp {
                for (i, j) in p.bx.cells() {
                    let k = s.idx(c, i, j);
                    s.data[k] = p.get(c, i, j);
                }
            }
        }
        s
    }

    /// Per-cell coverage flags over the level domain.
    pub fn coverage(&self) -> Vec<bool> {
        let mut m = vec![false; (self.n[0] * self.n[1]) as usize];
        for p in &self.patches {
            for (i, j) in p.bx.cells() {
                m[(j * self.n[0] + i) as usize] = true;
            }
        }
        m
    }
}

/// Dense per-level field with periodic indexing.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSnapshot {
    pub n: [i64; 2],
    pub ncomp: usize,
    pub data: Vec<f64>,
}

impl LevelSnapshot {
    #[inline]
    fn idx(&self, c: usize, i: i64, j: i64) -> usize {
        let i = i.rem_euclid(self.n[0]);
        let j = j.rem_euclid(self.n[1]);
        c * (self.n[0] * self.n[1]) as usize + (j * self.n[0] + i) as usize
    }

    /// Value at a periodically wrapped index; NaN where the level has no patch.
    #[inline]
    pub fn get(&self, c: usize, i: i64, j: i64) -> f64 {
        self.data[self.idx(c, i, j)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
    /// Refinement ratio between consecutive levels, equal in both directions.
    pub ratio: u32,
    /// Number of levels allowed above the base.
    pub max_level: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub ncomp: usize,
    /// Largest patch extent in cells; new boxes are chopped to it.
    pub max_patch: i64,
}

impl Hierarchy {
    /// Base level only, tiled by patches of at most `max_patch` cells.
    pub fn new(base_n: [i64; 2], lo: [f64; 2], hi: [f64; 2], ncomp: usize, ratio: u32, max_level: usize, max_patch: i64) -> Result<Self> {
        if base_n.iter().any(|&n| n < 1) || ncomp == 0 || ratio < 2 || max_patch < 2 * ratio as i64 {
            return Err(Error::InvalidConfig("need base_n >= 1, ncomp >= 1, ratio >= 2, max_patch >= 2*ratio".into()));
        }
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::InvalidConfig("empty physical domain".into()));
        }
        let mut h = Self { levels: Vec::new(), ratio, max_level, lo, hi, ncomp, max_patch };
        let domain = IndexBox::new([0, 0], [base_n[0] - 1, base_n[1] - 1]);
        let patches = domain.chop(max_patch).into_iter().map(|b| Patch::new(0, b, ncomp)).collect();
        h.levels.push(Level { n: base_n, dx: h.dx_at(0, base_n), patches });
        Ok(h)
    }

    fn dx_at(&self, _level: usize, n: [i64; 2]) -> [f64; 2] {
        [(self.hi[0] - self.lo[0]) / n[0] as f64, (self.hi[1] - self.lo[1]) / n[1] as f64]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> usize {
        self.levels.len() - 1
    }

    /// Domain extent in cells at `level`, whether or not it exists yet.
    pub fn level_n(&self, level: usize) -> [i64; 2] {
        let f = (self.ratio as i64).pow(level as u32);
        [self.levels[0].n[0] * f, self.levels[0].n[1] * f]
    }

    pub fn level_dx(&self, level: usize) -> [f64; 2] {
        self.dx_at(level, self.level_n(level))
    }

    /// Physical lower corner of cell `(i, j)` at `level`.
    pub fn cell_lo(&self, level: usize, i: i64, j: i64) -> [f64; 2] {
        let dx = self.level_dx(level);
        [self.lo[0] + i as f64 * dx[0], self.lo[1] + j as f64 * dx[1]]
    }

    pub fn cell_center(&self, level: usize, i: i64, j: i64) -> [f64; 2] {
        let dx = self.level_dx(level);
        let lo = self.cell_lo(level, i, j);
        [lo[0] + 0.5 * dx[0], lo[1] + 0.5 * dx[1]]
    }

    /// Replaces (or appends) `level` with patches on `boxes`, data zeroed.
    pub fn set_level_boxes(&mut self, level: usize, boxes: &[IndexBox]) {
        let n = self.level_n(level);
        let lvl = Level {
            n,
            dx: self.dx_at(level, n),
            patches: boxes.iter().map(|&b| Patch::new(level, b, self.ncomp)).collect(),
        };
        if level < self.levels.len() {
            self.levels[level] = lvl;
        } else {
            debug_assert_eq!(level, self.levels.len());
            self.levels.push(lvl);
        }
    }

    /// `(level, i, j)` of every composite cell, i.e. cells not covered by a
    /// finer level, in level then patch then row order.
    pub fn composite_cells(&self) -> Vec<(usize, usize, i64, i64)> {
        let mut out = Vec::new();
        for (l, lvl) in self.levels.iter().enumerate() {
            let finer = self.levels.get(l + 1).map(|f| f.coverage());
            let nf = self.levels.get(l + 1).map(|f| f.n[0]).unwrap_or(0);
            let r = self.ratio as i64;
            for (pi, p) in lvl.patches.iter().enumerate() {
                for (i, j) in p.bx.cells() {
                    let covered = finer.as_ref().is_some_and(|m| m[((j * r) * nf + i * r) as usize]);
                    if !covered {
                        out.push((l, pi, i, j));
                    }
                }
            }
        }
        out
    }

    /// `Σ value·ΔV` of one component over the composite grid.
    pub fn integral(&self, comp: usize) -> f64 {
        self.composite_cells()
            .into_iter()
            .map(|(l, p, i, j)| {
                let dx = self.levels[l].dx;
                self.levels[l].patches[p].get(comp, i, j) * dx[0] * dx[1]
            })
            .sum()
    }

    /// Whether two hierarchies have identical levels and patch boxes.
    pub fn same_layout(&self, other: &Self) -> bool {
        self.ncomp == other.ncomp
            && self.levels.len() == other.levels.len()
            && self.levels.iter().zip(&other.levels).all(|(a, b)| a.n == b.n && a.boxes() == b.boxes())
    }

    /// Sets the interior of every patch from cell-corner bounds.
    pub fn fill_from(&mut self, f: &CellFiller) {
        let ncomp = self.ncomp;
        for l in 0..self.levels.len() {
            let dx = self.level_dx(l);
            let lo = self.lo;
            for p in &mut self.levels[l].patches {
                for (i, j) in p.bx.cells() {
                    let a = [lo[0] + i as f64 * dx[0], lo[1] + j as f64 * dx[1]];
                    let b = [a[0] + dx[0], a[1] + dx[1]];
                    let v = f(a, b);
                    for c in 0..ncomp {
                        p.set(c, i, j, v[c]);
                    }
                }
            }
        }
    }
}
