//! Dirichlet truncation of `J = J₀ + D` to a finite box.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::LatticeBox;
use crate::par::Execution;
use crate::potential::{PotentialError, PotentialSpec};

pub const DEFAULT_MAX_DIM: usize = 4096;
pub const MAX_DIM_ENV: &str = "SPECRANGE_MAX_DIM";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("box has {sites} sites, above the dimension cap {limit} (raise it with --max-dim or {MAX_DIM_ENV})")]
    DimensionLimit { sites: usize, limit: usize },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has no rows")]
    Empty,
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyLimits {
    pub max_dim: usize,
}

impl Default for AssemblyLimits {
    fn default() -> Self {
        Self {
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

impl AssemblyLimits {
    /// Default cap, overridden by `SPECRANGE_MAX_DIM` when it parses.
    pub fn from_env() -> Self {
        std::env::var(MAX_DIM_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .map(|max_dim| Self { max_dim })
            .unwrap_or_default()
    }
}

/// The box and potential an operator was assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub lattice: LatticeBox,
    pub potential: PotentialSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: Array2<Complex64>,
    hermitian: bool,
    provenance: Option<Arc<Provenance>>,
}

/// Componentwise extremes of `Re d` and `Im d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialBounds {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

fn exactly_hermitian(a: &Array2<Complex64>) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (i..n).all(|j| a[[i, j]] == a[[j, i]].conj()))
}

impl OperatorMatrix {
    pub fn from_entries(entries: Array2<Complex64>) -> Result<Self, OperatorError> {
        let (rows, cols) = entries.dim();
        if rows != cols {
            return Err(OperatorError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(OperatorError::Empty);
        }
        Ok(Self {
            hermitian: exactly_hermitian(&entries),
            entries,
            provenance: None,
        })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, OperatorError> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(OperatorError::NotSquare { rows: n, cols });
        }
        let flat: Vec<Complex64> = rows.iter().flatten().copied().collect();
        let a = Array2::from_shape_vec((n, cols), flat).map_err(|_| OperatorError::NotSquare { rows: n, cols })?;
        Self::from_entries(a)
    }

    pub fn diagonal(values: &[Complex64]) -> Result<Self, OperatorError> {
        Self::from_entries(Array2::from_diag(&ndarray::arr1(values)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_deref()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix {
            entries: self.entries.t().mapv(|z| z.conj()),
            hermitian: self.hermitian,
            provenance: None,
        }
    }

    /// `alpha·A + beta·I`.
    pub fn affine(&self, alpha: Complex64, beta: Complex64) -> OperatorMatrix {
        let mut e = self.entries.mapv(|z| alpha * z);
        for i in 0..self.dim() {
            e[[i, i]] += beta;
        }
        OperatorMatrix {
            hermitian: exactly_hermitian(&e),
            entries: e,
            provenance: None,
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.entries
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A* x`.
    pub fn adjoint_matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.entries
            .columns()
            .into_iter()
            .map(|col| col.iter().zip(x).map(|(a, b)| a.conj() * b).sum())
            .collect()
    }

    /// `(A + A*)/2`, exactly hermitian.
    pub fn real_part(&self) -> OperatorMatrix {
        self.hermitian_combination(|aij, aji| (aij + aji.conj()) * 0.5)
    }

    /// `(A − A*)/(2i)`, exactly hermitian.
    pub fn imag_part(&self) -> OperatorMatrix {
        self.hermitian_combination(|aij, aji| {
            let d = aij - aji.conj();
            // d / (2i) = -i d / 2
            Complex64::new(d.im * 0.5, -d.re * 0.5)
        })
    }

    fn hermitian_combination(&self, f: impl Fn(Complex64, Complex64) -> Complex64) -> OperatorMatrix {
        let n = self.dim();
        let mut e = Array2::zeros((n, n));
        for i in 0..n {
            let v = f(self.entries[[i, i]], self.entries[[i, i]]);
            e[[i, i]] = Complex64::new(v.re, 0.0);
            for j in i + 1..n {
                let v = f(self.entries[[i, j]], self.entries[[j, i]]);
                e[[i, j]] = v;
                e[[j, i]] = v.conj();
            }
        }
        OperatorMatrix {
            entries: e,
            hermitian: true,
            provenance: None,
        }
    }
}

/// Assembles the Dirichlet truncation of `J₀ + D` on `lattice`.
pub fn assemble(
    lattice: &LatticeBox,
    potential: &PotentialSpec,
    limits: AssemblyLimits,
) -> Result<OperatorMatrix, OperatorError> {
    assemble_with(lattice, potential, limits, Execution::default())
}

pub fn assemble_with(
    lattice: &LatticeBox,
    potential: &PotentialSpec,
    limits: AssemblyLimits,
    exec: Execution,
) -> Result<OperatorMatrix, OperatorError> {
    let n = lattice.site_count();
    if n > limits.max_dim {
        return Err(OperatorError::DimensionLimit {
            sites: n,
            limit: limits.max_dim,
        });
    }
    potential.check_dimension(lattice.nu())?;
    let diag = exec.map_range(n, |i| potential.value(&lattice.site(i)));
    let one = Complex64::new(1.0, 0.0);
    let mut e = Array2::zeros((n, n));
    for (i, d) in diag.iter().enumerate() {
        e[[i, i]] = *d;
        let site = lattice.site(i);
        for (axis, &(_, hi)) in lattice.ranges().iter().enumerate() {
            if site[axis] < hi {
                let j = i + lattice.stride(axis);
                e[[i, j]] = one;
                e[[j, i]] = one;
            }
        }
    }
    Ok(OperatorMatrix {
        hermitian: diag.iter().all(|d| d.im == 0.0),
        entries: e,
        provenance: Some(Arc::new(Provenance {
            lattice: lattice.clone(),
            potential: potential.clone(),
        })),
    })
}

/// Extremes of `Re d` and `Im d` over the box, widened by the potential's
/// off-box values so the intervals hold for all of ℤ^ν.
pub fn potential_bounds(potential: &PotentialSpec, lattice: &LatticeBox) -> PotentialBounds {
    let mut rect = potential.value_rect_beyond(lattice.outside_radius());
    for site in lattice.sites() {
        rect = rect.union(&crate::potential::Rect::point(potential.value(&site)));
    }
    PotentialBounds {
        re_min: rect.re.0,
        re_max: rect.re.1,
        im_min: rect.im.0,
        im_max: rect.im.1,
    }
}
