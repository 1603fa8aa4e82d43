//! Finite axis-aligned boxes in ℤ^ν with a fixed lexicographic site numbering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A lattice site `k = (k_1, …, k_ν)`.
pub type Site = Vec<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("a lattice box needs at least one axis")]
    NoAxes,
    #[error("axis {axis} has lo = {lo} > hi = {hi}")]
    EmptyAxis { axis: usize, lo: i64, hi: i64 },
    #[error("declared nu = {nu} but {ranges} ranges were given")]
    DimensionMismatch { nu: usize, ranges: usize },
    #[error("site count overflows usize")]
    TooManySites,
}

/// Axis-aligned box `[lo_1, hi_1] × … × [lo_ν, hi_ν]`.
///
/// Sites are numbered lexicographically in `(k_1, …, k_ν)`, so the last axis
/// varies fastest and `k_1` is the most significant coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct LatticeBox {
    ranges: Vec<(i64, i64)>,
    strides: Vec<usize>,
    site_count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    nu: usize,
    ranges: Vec<[i64; 2]>,
}

impl TryFrom<RawBox> for LatticeBox {
    type Error = LatticeError;

    fn try_from(raw: RawBox) -> Result<Self, Self::Error> {
        if raw.nu != raw.ranges.len() {
            return Err(LatticeError::DimensionMismatch {
                nu: raw.nu,
                ranges: raw.ranges.len(),
            });
        }
        LatticeBox::new(raw.ranges.into_iter().map(|[lo, hi]| (lo, hi)).collect())
    }
}

impl From<LatticeBox> for RawBox {
    fn from(b: LatticeBox) -> Self {
        RawBox {
            nu: b.nu(),
            ranges: b.ranges.iter().map(|&(lo, hi)| [lo, hi]).collect(),
        }
    }
}

impl LatticeBox {
    pub fn new(ranges: Vec<(i64, i64)>) -> Result<Self, LatticeError> {
        if ranges.is_empty() {
            return Err(LatticeError::NoAxes);
        }
        for (axis, &(lo, hi)) in ranges.iter().enumerate() {
            if lo > hi {
                return Err(LatticeError::EmptyAxis { axis, lo, hi });
            }
        }
        let mut strides = vec![1usize; ranges.len()];
        let mut count = 1usize;
        for axis in (0..ranges.len()).rev() {
            strides[axis] = count;
            let (lo, hi) = ranges[axis];
            let len = usize::try_from(hi - lo + 1).map_err(|_| LatticeError::TooManySites)?;
            count = count.checked_mul(len).ok_or(LatticeError::TooManySites)?;
        }
        Ok(Self {
            ranges,
            strides,
            site_count: count,
        })
    }

    /// One-dimensional box of `n` sites centred on the origin:
    /// `[-(n-1)/2, n-1-(n-1)/2]`.
    pub fn centered_1d(n: usize) -> Result<Self, LatticeError> {
        if n == 0 {
            return Err(LatticeError::EmptyAxis { axis: 0, lo: 0, hi: -1 });
        }
        let n = n as i64;
        let lo = -((n - 1) / 2);
        Self::new(vec![(lo, lo + n - 1)])
    }

    /// Cube `[-(n-1)/2, …]^nu` with `n` sites per axis.
    pub fn centered_cube(nu: usize, n: usize) -> Result<Self, LatticeError> {
        if n == 0 {
            return Err(LatticeError::EmptyAxis { axis: 0, lo: 0, hi: -1 });
        }
        let n = n as i64;
        let lo = -((n - 1) / 2);
        Self::new(vec![(lo, lo + n - 1); nu])
    }

    pub fn nu(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[(i64, i64)] {
        &self.ranges
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    /// Index offset between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.len() == self.nu()
            && site
                .iter()
                .zip(&self.ranges)
                .all(|(&k, &(lo, hi))| lo <= k && k <= hi)
    }

    pub fn site(&self, index: usize) -> Site {
        assert!(index < self.site_count, "site index {index} out of range");
        let mut rest = index;
        self.ranges
            .iter()
            .zip(&self.strides)
            .map(|(&(lo, _), &stride)| {
                let q = rest / stride;
                rest %= stride;
                lo + q as i64
            })
            .collect()
    }

    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        Some(
            site.iter()
                .zip(&self.ranges)
                .zip(&self.strides)
                .map(|((&k, &(lo, _)), &stride)| (k - lo) as usize * stride)
                .sum(),
        )
    }

    /// Sites in index order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.site_count).map(move |i| self.site(i))
    }

    /// Smallest `‖k‖₁` over sites outside the box.
    pub fn outside_radius(&self) -> u64 {
        self.ranges
            .iter()
            .map(|&(lo, hi)| (lo - 1).unsigned_abs().min((hi + 1).unsigned_abs()))
            .min()
            .unwrap_or(0)
    }

    /// Largest `‖k‖₁` over sites inside the box.
    pub fn max_l1(&self) -> u64 {
        self.ranges
            .iter()
            .map(|&(lo, hi)| lo.unsigned_abs().max(hi.unsigned_abs()))
            .sum()
    }
}

pub fn l1_norm(site: &[i64]) -> u64 {
    site.iter().map(|k| k.unsigned_abs()).sum()
}
