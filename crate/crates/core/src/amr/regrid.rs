use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fill::{fill_patch, pick, FillStats, NEST_BUFFER};
use super::{Hierarchy, IndexBox, Level, LevelSnapshot, Patch};
use crate::error::Result;
use crate::prolong::Prolongator;

/// Produces component values for the cell with the given lower and upper
/// physical corners.
pub type CellFiller = dyn Fn([f64; 2], [f64; 2]) -> Vec<f64> + Sync;

/// Dense refinement flags over one level's domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagField {
    pub n: [i64; 2],
    pub tags: Vec<bool>,
}

impl TagField {
    pub fn empty(n: [i64; 2]) -> Self {
        Self { n, tags: vec![false; (n[0] * n[1]) as usize] }
    }

    pub fn get(&self, i: i64, j: i64) -> bool {
        self.tags[(j * self.n[0] + i) as usize]
    }

    /// Sets the flag at a periodically wrapped index.
    pub fn set(&mut self, i: i64, j: i64) {
        let (i, j) = (i.rem_euclid(self.n[0]), j.rem_euclid(self.n[1]));
        self.tags[(j * self.n[0] + i) as usize] = true;
    }

    pub fn count(&self) -> usize {
        self.tags.iter().filter(|&&t| t).count()
    }
}

/// `|value| ≥ threshold` on component 0 over the level's patches.
pub fn tag_cells(level: &Level, threshold: f64) -> TagField {
    let mut t = TagField::empty(level.n);
    for p in &level.patches {
        for (i, j) in p.bx.cells() {
            if p.get(0, i, j).abs() >= threshold {
                t.set(i, j);
            }
        }
    }
    t
}

fn tag_snapshot(s: &LevelSnapshot, threshold: f64) -> TagField {
    let mut t = TagField::empty(s.n);
    for (k, v) in s.data[..t.tags.len()].iter().enumerate() {
        t.tags[k] = v.abs() >= threshold;
    }
    t
}

/// Bounding boxes of the 8-connected components of the tags grown by
/// `buffer`, clipped to the domain, with overlapping boxes merged. Sorted.
pub fn cluster_tags(tags: &TagField, buffer: i64) -> Vec<IndexBox> {
    let [nx, ny] = tags.n;
    let dom = IndexBox::new([0, 0], [nx - 1, ny - 1]);
    let mut grown = vec![false; tags.tags.len()];
    for j in 0..ny {
        for i in 0..nx {
            if tags.get(i, j) {
                if let Some(b) = IndexBox::new([i, j], [i, j]).grow(buffer).intersect(&dom) {
                    for (a, c) in b.cells() {
                        grown[(c * nx + a) as usize] = true;
                    }
                }
            }
        }
    }
    let mut seen = vec![false; grown.len()];
    let mut boxes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..grown.len() {
        if !grown[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (si, sj) = ((start as i64) % nx, (start as i64) / nx);
        let mut bb = IndexBox::new([si, sj], [si, sj]);
        while let Some(k) = stack.pop() {
            let (i, j) = ((k as i64) % nx, (k as i64) / nx);
            bb = bb.bounding(&IndexBox::new([i, j], [i, j]));
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (a, c) = (i + di, j + dj);
                    if dom.contains(a, c) {
                        let q = (c * nx + a) as usize;
                        if grown[q] && !seen[q] {
                            seen[q] = true;
                            stack.push(q);
                        }
                    }
                }
            }
        }
        boxes.push(bb);
    }
    loop {
        let mut merged = false;
        'outer: for a in 0..boxes.len() {
            for b in a + 1..boxes.len() {
                if boxes[a].overlaps(&boxes[b]) {
                    boxes[a] = boxes[a].bounding(&boxes[b]);
                    boxes.swap_remove(b);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    boxes.sort();
    boxes
}

/// Rebuilds every level above the base from `|value| ≥ threshold` tags.
///
/// Boxes are chosen finest first so that each level can demand cover from
/// its parent; data is then filled coarsest first, copying where the old
/// level had data and prolonging elsewhere, or from `filler` when given.
pub fn regrid(h: &mut Hierarchy, threshold: f64, pro: &[Prolongator], filler: Option<&CellFiller>) -> Result<FillStats> {
    let r = h.ratio as i64;
    let ncomp = h.ncomp;
    let old: Vec<LevelSnapshot> = h.levels.iter().map(|l| l.snapshot(ncomp)).collect();
    let mut new_boxes: Vec<Vec<IndexBox>> = vec![Vec::new(); h.max_level + 1];
    for l in (1..=h.max_level).rev() {
        let parent = l - 1;
        let mut tags = match old.get(parent) {
            Some(s) => tag_snapshot(s, threshold),
            None => TagField::empty(h.level_n(parent)),
        };
        if let Some(finer) = new_boxes.get(l + 1) {
            for b in finer {
                for (i, j) in b.coarsen(r).grow(NEST_BUFFER).coarsen(r).cells() {
                    tags.set(i, j);
                }
            }
        }
        if tags.count() == 0 {
            continue;
        }
        new_boxes[l] = cluster_tags(&tags, 1).iter().flat_map(|b| b.refine(r).chop(h.max_patch)).collect();
    }
    let top = (0..=h.max_level).rev().find(|&l| l == 0 || !new_boxes[l].is_empty()).unwrap_or(0);
    h.levels.truncate(top + 1);

    let mut stats = FillStats::default();
    for l in 1..=top {
        let parent = h.levels[l - 1].snapshot(ncomp);
        let n = h.level_n(l);
        let dx = h.level_dx(l);
        let lo = h.lo;
        let same = old.get(l);
        let p = pick(pro, l - 1);
        let mut patches: Vec<Patch> = new_boxes[l].iter().map(|&b| Patch::new(l, b, ncomp)).collect();
        let results: Vec<Result<FillStats>> = patches
            .par_iter_mut()
            .map(|patch| match filler {
                Some(f) => {
                    for (i, j) in patch.bx.cells() {
                        let a = [lo[0] + i as f64 * dx[0], lo[1] + j as f64 * dx[1]];
                        let v = f(a, [a[0] + dx[0], a[1] + dx[1]]);
                        for (c, x) in v.into_iter().enumerate().take(ncomp) {
                            patch.set(c, i, j, x);
                        }
                    }
                    Ok(FillStats::default())
                }
                None => fill_patch(patch, false, same, Some(&parent), Some(p), n, r),
            })
            .collect();
        for s in results {
            stats.merge(&s?);
        }
        if l < h.levels.len() {
            h.levels[l].patches = patches;
        } else {
            h.set_level_boxes(l, &[]);
            h.levels[l].patches = patches;
        }
    }
    Ok(stats)
}
