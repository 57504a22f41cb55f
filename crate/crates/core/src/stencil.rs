//! Stencil shapes for radius-one GP prolongation.
//!
//! The total stencil is every cell within L1 distance 2 of the centre. It is
//! covered by `2D+1` cross-shaped substencils: the cross on the centre cell
//! and the crosses on each of its `2D` face neighbours.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Offset = Vec<i32>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilGeometry {
    pub dim: usize,
    /// Offsets of the total stencil, ordered lexicographically with the last
    /// dimension most significant.
    pub total_offsets: Vec<Offset>,
    /// `sub_offsets[m][p]`: absolute offset of position `p` of substencil `m`.
    pub sub_offsets: Vec<Vec<Offset>>,
    /// For each total-stencil cell, the `(substencil, position)` pairs that
    /// contain it.
    pub membership: Vec<Vec<(usize, usize)>>,
    /// `sub_index[m][p]`: index into `total_offsets` of `sub_offsets[m][p]`.
    pub sub_index: Vec<Vec<usize>>,
}

fn order_key(o: &[i32]) -> Vec<i32> {
    o.iter().rev().copied().collect()
}

fn l1(o: &[i32]) -> i32 {
    o.iter().map(|v| v.abs()).sum()
}

/// Every integer offset in `[-radius, radius]^dim` with L1 norm ≤ radius, in
/// canonical order.
fn diamond(dim: usize, radius: i32) -> Vec<Offset> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|o: Offset| {
                (-radius..=radius).map(move |v| {
                    let mut n = o.clone();
                    n.push(v);
                    n
                })
            })
            .collect();
    }
    out.retain(|o| l1(o) <= radius);
    out.sort_by_key(|o| order_key(o));
    out
}

pub fn build_geometry(dim: usize) -> Result<StencilGeometry> {
    if !(1..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let total_offsets = diamond(dim, 2);
    let cross = diamond(dim, 1);

    let mut centers = vec![vec![0; dim]];
    for d in 0..dim {
        for s in [-1, 1] {
            let mut c = vec![0; dim];
            c[d] = s;
            centers.push(c);
        }
    }
    let sub_offsets: Vec<Vec<Offset>> = centers
        .iter()
        .map(|c| cross.iter().map(|o| o.iter().zip(c).map(|(a, b)| a + b).collect()).collect())
        .collect();

    let index_of = |o: &Offset| total_offsets.iter().position(|t| t == o).expect("substencil cell outside total stencil");
    let sub_index: Vec<Vec<usize>> = sub_offsets.iter().map(|s| s.iter().map(index_of).collect()).collect();

    let mut membership = vec![Vec::new(); total_offsets.len()];
    for (m, idx) in sub_index.iter().enumerate() {
        for (p, &k) in idx.iter().enumerate() {
            membership[k].push((m, p));
        }
    }

    Ok(StencilGeometry { dim, total_offsets, sub_offsets, membership, sub_index })
}

impl StencilGeometry {
    /// `M = 2D² + 2D + 1`.
    pub fn total_len(&self) -> usize {
        self.total_offsets.len()
    }

    /// `2D + 1`.
    pub fn sub_len(&self) -> usize {
        2 * self.dim + 1
    }

    pub fn num_sub(&self) -> usize {
        self.sub_offsets.len()
    }

    pub fn index_of(&self, offset: &[i32]) -> Option<usize> {
        self.total_offsets.iter().position(|t| t.as_slice() == offset)
    }

    pub fn center_index(&self) -> usize {
        self.total_len() / 2
    }

    /// Offsets of substencil `m` relative to its own centre; identical for
    /// every `m`.
    pub fn sub_relative(&self, m: usize) -> Vec<Offset> {
        let c = &self.sub_offsets[m][self.sub_len() / 2];
        self.sub_offsets[m]
            .iter()
            .map(|o| o.iter().zip(c).map(|(a, b)| a - b).collect())
            .collect()
    }

    /// Index of the total-stencil cell obtained by negating axis `axis`.
    pub fn reflect_total(&self, k: usize, axis: usize) -> usize {
        let mut o = self.total_offsets[k].clone();
        o[axis] = -o[axis];
        self.index_of(&o).expect("total stencil is symmetric")
    }

    /// Substencil index after negating axis `axis`.
    pub fn reflect_sub(&self, m: usize, axis: usize) -> usize {
        let mut c = self.sub_offsets[m][self.sub_len() / 2].clone();
        c[axis] = -c[axis];
        self.sub_offsets
            .iter()
            .position(|s| s[self.sub_len() / 2] == c)
            .expect("substencil set is symmetric")
    }

    /// Position within a substencil after negating axis `axis`.
    pub fn reflect_sub_pos(&self, p: usize, axis: usize) -> usize {
        let rel = self.sub_relative(0);
        let mut o = rel[p].clone();
        o[axis] = -o[axis];
        rel.iter().position(|r| *r == o).expect("cross is symmetric")
    }

    /// Total-stencil indices of the `2D` face neighbours as `(low, high)`
    /// pairs per dimension.
    pub fn face_neighbors(&self) -> Vec<(usize, usize)> {
        (0..self.dim)
            .map(|d| {
                let mut lo = vec![0; self.dim];
                lo[d] = -1;
                let mut hi = vec![0; self.dim];
                hi[d] = 1;
                (self.index_of(&lo).unwrap(), self.index_of(&hi).unwrap())
            })
            .collect()
    }
}

/// Centres of the fine cells of one coarse cell, in coarse-cell units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinePointSet {
    pub ratio: Vec<u32>,
    /// Ordered with the first dimension most significant.
    pub offsets: Vec<Vec<f64>>,
}

pub fn fine_points(ratio: &[u32]) -> Result<FinePointSet> {
    if ratio.is_empty() || ratio.len() > 3 {
        return Err(Error::UnsupportedDimension(ratio.len()));
    }
    if ratio.contains(&0) {
        return Err(Error::InvalidConfig("refinement ratios must be at least 1".into()));
    }
    let mut offsets: Vec<Vec<f64>> = vec![vec![]];
    for &r in ratio {
        let rf = r as f64;
        offsets = offsets
            .into_iter()
            .flat_map(|o| {
                (0..r).map(move |m| {
                    let mut n = o.clone();
                    n.push((2.0 * m as f64 + 1.0 - rf) / (2.0 * rf));
                    n
                })
            })
            .collect();
    }
    Ok(FinePointSet { ratio: ratio.to_vec(), offsets })
}

impl FinePointSet {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Flat index of the fine cell with per-dimension child indices `m`.
    pub fn index(&self, m: &[u32]) -> usize {
        m.iter().zip(&self.ratio).fold(0usize, |acc, (&mi, &r)| acc * r as usize + mi as usize)
    }

    /// Per-dimension child indices of flat index `i`.
    pub fn child(&self, mut i: usize) -> Vec<u32> {
        let mut m = vec![0; self.ratio.len()];
        for d in (0..self.ratio.len()).rev() {
            let r = self.ratio[d] as usize;
            m[d] = (i % r) as u32;
            i /= r;
        }
        m
    }

    /// Index of the fine point mirrored through axis `axis`.
    pub fn reflect(&self, i: usize, axis: usize) -> usize {
        let mut m = self.child(i);
        m[axis] = self.ratio[axis] - 1 - m[axis];
        self.index(&m)
    }
}
