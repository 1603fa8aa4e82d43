//! Boundary/interior classification of eigenvalues and the residual
//! certificates attached to boundary eigenpairs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{LatticeBox, Site};
use crate::linalg::{eig_general_with, EigenPair, LinalgError, DEFAULT_TOL_EIG};
use crate::numrange::{NumericalRangeHull, NumrangeError};
use crate::operator::OperatorMatrix;
use crate::par::Execution;

type C = Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Numrange(#[from] NumrangeError),
    #[error("operator has no box/potential provenance")]
    MissingProvenance,
    #[error("eigenvector support is empty below the threshold (spurious eigenvector)")]
    EmptySupport,
    #[error("axis {axis} out of range for ν = {nu}")]
    AxisOutOfRange { axis: usize, nu: usize },
}

/// A tolerance either scaled by `1 + ‖A‖_F` or used as is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Tolerance {
    Relative(f64),
    Absolute(f64),
}

impl Tolerance {
    pub fn resolve(&self, frobenius: f64) -> f64 {
        match *self {
            Tolerance::Relative(t) => t * (1.0 + frobenius),
            Tolerance::Absolute(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierParams {
    pub tol_boundary: Tolerance,
    pub tol_cert: Tolerance,
    /// Support threshold as a fraction of `‖f‖∞`.
    pub tol_support: f64,
    pub tol_eig: f64,
    pub exec: Execution,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            tol_boundary: Tolerance::Relative(1e-6),
            tol_cert: Tolerance::Relative(1e-6),
            tol_support: 1e-8,
            tol_eig: DEFAULT_TOL_EIG,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenClassification {
    pub pair: EigenPair,
    pub boundary_distance: f64,
    pub is_boundary: bool,
    /// `‖A* f − λ̄ f‖₂`
    pub normality_residual: f64,
    /// `‖Re(A) f − Re λ·f‖₂`
    pub split_residual_re: f64,
    /// `‖Im(A) f − Im λ·f‖₂`
    pub split_residual_im: f64,
    /// Sites with `|f| > tol_support·‖f‖∞`; `None` without provenance.
    pub support_set: Option<Vec<Site>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HildebrandtVerdict {
    CertifiedNormal,
    /// Residual between `tol_cert` and `10·tol_cert`.
    Marginal,
    Violated,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum SplitVerdict {
    Certified,
    ResidualTooLarge { re: f64, im: f64, bound: f64 },
    LevelSetMismatch { site: Site, deviation: f64 },
    NotApplicable,
}

impl SplitVerdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, SplitVerdict::Certified)
    }
}

fn diff_norm(x: &[C], y: &[C], scale: C) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - scale * b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Classifies every eigenpair of `a` against `hull`, in eigenvalue order.
pub fn classify(
    a: &OperatorMatrix,
    hull: &NumericalRangeHull,
    params: &ClassifierParams,
) -> Result<Vec<EigenClassification>, ClassifyError> {
    let pairs = eig_general_with(a.entries(), params.tol_eig)?;
    classify_pairs(a, hull, pairs, params)
}

pub fn classify_pairs(
    a: &OperatorMatrix,
    hull: &NumericalRangeHull,
    pairs: Vec<EigenPair>,
    params: &ClassifierParams,
) -> Result<Vec<EigenClassification>, ClassifyError> {
    let tol_boundary = params.tol_boundary.resolve(a.frobenius_norm());
    let re = a.real_part();
    let im = a.imag_part();
    let lattice = a.provenance().map(|p| &p.lattice);
    params
        .exec
        .map(&pairs, |p| -> Result<EigenClassification, ClassifyError> {
            let f = &p.vector;
            let lam = p.value;
            let boundary_distance = hull.boundary_distance(lam)?;
            let support_set = lattice.map(|b| support_of(f, b, params.tol_support));
            Ok(EigenClassification {
                pair: p.clone(),
                boundary_distance,
                is_boundary: boundary_distance <= tol_boundary,
                normality_residual: diff_norm(&a.adjoint_matvec(f), f, lam.conj()),
                split_residual_re: diff_norm(&re.matvec(f), f, C::new(lam.re, 0.0)),
                split_residual_im: diff_norm(&im.matvec(f), f, C::new(lam.im, 0.0)),
                support_set,
            })
        })
        .into_iter()
        .collect()
}

fn support_of(f: &[C], lattice: &LatticeBox, rel: f64) -> Vec<Site> {
    let top = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let cut = rel * top;
    f.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > cut)
        .map(|(i, _)| lattice.site(i))
        .collect()
}

pub fn hildebrandt_certificate(
    a: &OperatorMatrix,
    cls: &EigenClassification,
    params: &ClassifierParams,
) -> HildebrandtVerdict {
    if !cls.is_boundary {
        return HildebrandtVerdict::NotApplicable;
    }
    let tol = params.tol_cert.resolve(a.frobenius_norm());
    if cls.normality_residual <= tol {
        HildebrandtVerdict::CertifiedNormal
    } else if cls.normality_residual > 10.0 * tol {
        HildebrandtVerdict::Violated
    } else {
        HildebrandtVerdict::Marginal
    }
}

/// Checks both split residuals and, for passing records, that `Im d` equals
/// `Im λ` on the thresholded support.
pub fn split_certificate(
    a: &OperatorMatrix,
    cls: &EigenClassification,
    params: &ClassifierParams,
) -> Result<SplitVerdict, ClassifyError> {
    let prov = a.provenance().ok_or(ClassifyError::MissingProvenance)?;
    if !cls.is_boundary {
        return Ok(SplitVerdict::NotApplicable);
    }
    let bound = params.tol_cert.resolve(a.frobenius_norm());
    if !(cls.split_residual_re <= bound && cls.split_residual_im <= bound) {
        return Ok(SplitVerdict::ResidualTooLarge {
            re: cls.split_residual_re,
            im: cls.split_residual_im,
            bound,
        });
    }
    let support = cls.support_set.as_ref().ok_or(ClassifyError::MissingProvenance)?;
    let target = cls.pair.value.im;
    let worst = support
        .iter()
        .map(|k| (k, (prov.potential.value(k).im - target).abs()))
        .max_by(|x, y| x.1.total_cmp(&y.1));
    match worst {
        Some((site, deviation)) if deviation > bound => Ok(SplitVerdict::LevelSetMismatch {
            site: site.clone(),
            deviation,
        }),
        _ => Ok(SplitVerdict::Certified),
    }
}

/// Boundary eigenvalue that passes both certificates.
pub fn is_certified_boundary(
    a: &OperatorMatrix,
    cls: &EigenClassification,
    params: &ClassifierParams,
) -> Result<bool, ClassifyError> {
    Ok(cls.is_boundary
        && hildebrandt_certificate(a, cls, params) == HildebrandtVerdict::CertifiedNormal
        && split_certificate(a, cls, params)?.is_certified())
}

/// `(min k_j, max k_j)` over the thresholded support.
pub fn support_extent(cls: &EigenClassification, axis: usize) -> Result<(i64, i64), ClassifyError> {
    let support = cls.support_set.as_ref().ok_or(ClassifyError::MissingProvenance)?;
    let first = support.first().ok_or(ClassifyError::EmptySupport)?;
    if axis >= first.len() {
        return Err(ClassifyError::AxisOutOfRange {
            axis,
            nu: first.len(),
        });
    }
    let lo = support.iter().map(|k| k[axis]).min().expect("nonempty");
    let hi = support.iter().map(|k| k[axis]).max().expect("nonempty");
    Ok((lo, hi))
}

/// Support extent strictly inside the box on every axis.
pub fn is_box_limited(cls: &EigenClassification, lattice: &LatticeBox) -> Result<bool, ClassifyError> {
    for (axis, &(lo, hi)) in lattice.ranges().iter().enumerate() {
        let (a, b) = support_extent(cls, axis)?;
        if a <= lo || b >= hi {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Consistency of the recomputed residuals: with `ε = ‖Af − λf‖`, the
/// normality residual is at most `2‖Im(A)f − Im λ f‖ + ε` and each split
/// residual is at most `(ε + normality)/2`.
pub fn residuals_consistent(cls: &EigenClassification, slack: f64) -> bool {
    let eps = cls.pair.residual;
    let nr = cls.normality_residual;
    nr <= 2.0 * cls.split_residual_im + eps + slack
        && cls.split_residual_re <= 0.5 * (eps + nr) + slack
        && cls.split_residual_im <= 0.5 * (eps + nr) + slack
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeBox;
    use crate::numrange::compute_hull;
    use crate::operator::{assemble, AssemblyLimits};
    use crate::potential::PotentialSpec;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn run(a: &OperatorMatrix) -> Vec<EigenClassification> {
        let h = compute_hull(a, 720).unwrap();
        classify(a, &h, &ClassifierParams::default()).unwrap()
    }

    fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> Array2<C> {
        // Gram–Schmidt on a random complex matrix
        let mut q = Array2::from_shape_fn((n, n), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        for j in 0..n {
            for k in 0..j {
                let p: C = (0..n).map(|i| q[[i, k]].conj() * q[[i, j]]).sum();
                for i in 0..n {
                    let v = q[[i, k]];
                    q[[i, j]] -= p * v;
                }
            }
            let norm = (0..n).map(|i| q[[i, j]].norm_sqr()).sum::<f64>().sqrt();
            for i in 0..n {
                q[[i, j]] /= norm;
            }
        }
        q
    }

    #[test]
    fn normal_diagonal() {
        let a = OperatorMatrix::diagonal(&[c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        let p = ClassifierParams::default();
        for cls in run(&a) {
            assert!(cls.is_boundary);
            assert!(cls.normality_residual <= 1e-10);
            assert_eq!(hildebrandt_certificate(&a, &cls, &p), HildebrandtVerdict::CertifiedNormal);
        }
    }

    #[test]
    fn jordan_interior() {
        let a = OperatorMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let p = ClassifierParams::default();
        for cls in run(&a) {
            assert!((cls.boundary_distance - 0.5).abs() < 1e-9);
            assert!(!cls.is_boundary);
            assert_eq!(hildebrandt_certificate(&a, &cls, &p), HildebrandtVerdict::NotApplicable);
        }
        assert_eq!(
            split_certificate(&a, &run(&a)[0], &p),
            Err(ClassifyError::MissingProvenance)
        );
    }

    #[test]
    fn hermitian_split_is_trivial() {
        let b = LatticeBox::centered_1d(15).unwrap();
        let p = PotentialSpec::decay_power(c(-1.0, 0.0), 2.0).unwrap();
        let a = assemble(&b, &p, AssemblyLimits::default()).unwrap();
        let params = ClassifierParams::default();
        for cls in run(&a) {
            assert!(cls.is_boundary);
            assert_eq!(cls.split_residual_im, 0.0);
            assert!((cls.normality_residual - cls.pair.residual).abs() <= 1e-12);
            assert_eq!(split_certificate(&a, &cls, &params).unwrap(), SplitVerdict::Certified);
        }
    }

    #[test]
    fn interior_random_is_not_applicable() {
        let b = LatticeBox::centered_1d(30).unwrap();
        let p = PotentialSpec::seeded_random(9, b.clone(), (-1.0, 1.0), (-1.0, 1.0)).unwrap();
        let a = assemble(&b, &p, AssemblyLimits::default()).unwrap();
        let params = ClassifierParams::default();
        let all = run(&a);
        let interior: Vec<_> = all.iter().filter(|c| !c.is_boundary).collect();
        assert!(!interior.is_empty());
        for cls in interior {
            assert_eq!(split_certificate(&a, cls, &params).unwrap(), SplitVerdict::NotApplicable);
        }
    }

    #[test]
    fn extents() {
        let b = LatticeBox::new(vec![(-3, 3)]).unwrap();
        let a = assemble(&b, &PotentialSpec::zero(), AssemblyLimits::default()).unwrap();
        let mut cls = run(&a).remove(0);
        cls.support_set = Some(vec![vec![0]]);
        assert_eq!(support_extent(&cls, 0).unwrap(), (0, 0));
        assert!(is_box_limited(&cls, &b).unwrap());
        cls.support_set = Some(b.sites().collect());
        assert_eq!(support_extent(&cls, 0).unwrap(), (-3, 3));
        assert!(!is_box_limited(&cls, &b).unwrap());
        cls.support_set = Some(vec![]);
        assert_eq!(support_extent(&cls, 0), Err(ClassifyError::EmptySupport));
    }

    #[test]
    fn random_normal_vertices_certified() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = ClassifierParams::default();
        for _ in 0..20 {
            let n = 6;
            let q = random_unitary(n, &mut rng);
            let d: Vec<C> = (0..n).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            let dm = Array2::from_diag(&ndarray::arr1(&d));
            let m = q.dot(&dm).dot(&q.t().mapv(|z| z.conj()));
            let a = OperatorMatrix::from_entries(m).unwrap();
            let h = compute_hull(&a, 720).unwrap();
            for cls in classify(&a, &h, &params).unwrap() {
                let vertex = h.polygon().iter().any(|v| (v - cls.pair.value).norm() < 1e-9);
                if vertex {
                    assert_eq!(hildebrandt_certificate(&a, &cls, &params), HildebrandtVerdict::CertifiedNormal);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn residual_identities(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = OperatorMatrix::from_entries(Array2::from_shape_fn((n, n), |_| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })).unwrap();
            for cls in run(&a) {
                prop_assert!(residuals_consistent(&cls, 1e-12));
                prop_assert!(cls.boundary_distance >= 0.0);
            }
        }

        #[test]
        fn tightening_boundary_tolerance(seed in any::<u64>(), t1 in 1e-12..1e-2f64, t2 in 1e-12..1e-2f64) {
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let b = LatticeBox::centered_1d(8).unwrap();
            let p = PotentialSpec::seeded_random(seed, b.clone(), (-1.0, 1.0), (0.0, 1.0)).unwrap();
            let a = assemble(&b, &p, AssemblyLimits::default()).unwrap();
            let h = compute_hull(&a, 90).unwrap();
            let loose = classify(&a, &h, &ClassifierParams { tol_boundary: Tolerance::Absolute(hi), ..Default::default() }).unwrap();
            let tight = classify(&a, &h, &ClassifierParams { tol_boundary: Tolerance::Absolute(lo), ..Default::default() }).unwrap();
            for (l, t) in loose.iter().zip(&tight) {
                prop_assert!(!t.is_boundary || l.is_boundary);
            }
        }

        #[test]
        fn near_eigen_split_bound(seed in any::<u64>(), n in 1usize..6) {
            // If f nearly satisfies both A f = λ f and A* f = λ̄ f, both split
            // residuals are at most the larger defect.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_unitary(n, &mut rng);
            let d: Vec<C> = (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let a = OperatorMatrix::from_entries(q.dot(&Array2::from_diag(&ndarray::arr1(&d))).dot(&q.t().mapv(|z| z.conj()))).unwrap();
            let f: Vec<C> = q.column(0).to_vec();
            let lam = d[0];
            let eps1 = diff_norm(&a.matvec(&f), &f, lam);
            let eps2 = diff_norm(&a.adjoint_matvec(&f), &f, lam.conj());
            let eps = eps1.max(eps2);
            let re = diff_norm(&a.real_part().matvec(&f), &f, c(lam.re, 0.0));
            let im = diff_norm(&a.imag_part().matvec(&f), &f, c(lam.im, 0.0));
            prop_assert!(re <= eps + 1e-14 && im <= eps + 1e-14);
            prop_assert!((crate::linalg::norm2(&f) - 1.0).abs() < 1e-12);
        }
    }
}
