use serde::{Deserialize, Serialize};

/// Inclusive cell-index rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexBox {
    pub lo: [i64; 2],
    pub hi: [i64; 2],
}

impl IndexBox {
    pub fn new(lo: [i64; 2], hi: [i64; 2]) -> Self {
        debug_assert!(lo[0] <= hi[0] && lo[1] <= hi[1], "empty box {lo:?}..{hi:?}");
        Self { lo, hi }
    }

    pub fn len(&self, d: usize) -> i64 {
        self.hi[d] - self.lo[d] + 1
    }

    pub fn num_cells(&self) -> usize {
        (self.len(0) * self.len(1)) as usize
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        (self.lo[0]..=self.hi[0]).contains(&i) && (self.lo[1]..=self.hi[1]).contains(&j)
    }

    pub fn contains_box(&self, o: &IndexBox) -> bool {
        self.contains(o.lo[0], o.lo[1]) && self.contains(o.hi[0], o.hi[1])
    }

    pub fn intersect(&self, o: &IndexBox) -> Option<IndexBox> {
        let lo = [self.lo[0].max(o.lo[0]), self.lo[1].max(o.lo[1])];
        let hi = [self.hi[0].min(o.hi[0]), self.hi[1].min(o.hi[1])];
        (lo[0] <= hi[0] && lo[1] <= hi[1]).then_some(IndexBox { lo, hi })
    }

    pub fn overlaps(&self, o: &IndexBox) -> bool {
        self.intersect(o).is_some()
    }

    pub fn bounding(&self, o: &IndexBox) -> IndexBox {
        IndexBox {
            lo: [self.lo[0].min(o.lo[0]), self.lo[1].min(o.lo[1])],
            hi: [self.hi[0].max(o.hi[0]), self.hi[1].max(o.hi[1])],
        }
    }

    pub fn grow(&self, n: i64) -> IndexBox {
        IndexBox { lo: [self.lo[0] - n, self.lo[1] - n], hi: [self.hi[0] + n, self.hi[1] + n] }
    }

    /// Smallest box at the coarser level containing every parent of `self`.
    pub fn coarsen(&self, r: i64) -> IndexBox {
        IndexBox {
            lo: [self.lo[0].div_euclid(r), self.lo[1].div_euclid(r)],
            hi: [self.hi[0].div_euclid(r), self.hi[1].div_euclid(r)],
        }
    }

    pub fn refine(&self, r: i64) -> IndexBox {
        IndexBox { lo: [self.lo[0] * r, self.lo[1] * r], hi: [self.hi[0] * r + r - 1, self.hi[1] * r + r - 1] }
    }

    /// Cells in row-major order (`i` fastest).
    pub fn cells(&self) -> impl Iterator<Item = (i64, i64)> {
        let b = *self;
        (b.lo[1]..=b.hi[1]).flat_map(move |j| (b.lo[0]..=b.hi[0]).map(move |i| (i, j)))
    }

    /// Tiles of at most `max` cells per side, cut at `lo + k·max`.
    pub fn chop(&self, max: i64) -> Vec<IndexBox> {
        let mut out = Vec::new();
        let mut j = self.lo[1];
        while j <= self.hi[1] {
            let jh = (j + max - 1).min(self.hi[1]);
            let mut i = self.lo[0];
            while i <= self.hi[0] {
                let ih = (i + max - 1).min(self.hi[0]);
                out.push(IndexBox::new([i, j], [ih, jh]));
                i = ih + 1;
            }
            j = jh + 1;
        }
        out
    }
}
