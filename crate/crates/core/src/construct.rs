//! Potentials with a prescribed boundary eigenvalue `a + ib`, built from a
//! designed eigenfunction on ℤ.
//!
//! The eigenfunction is `u(n) = σ(n)·r^dist(n, Z)` where `Z` is the zero set,
//! `r + 1/r = a` with `|r| < 1`, and `σ` flips sign at every zero. `Re d` is
//! read off the eigen-equation and `Im d` is `b` on the support of `u`.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::classify::{
    classify, hildebrandt_certificate, split_certificate, ClassifierParams, ClassifyError, EigenClassification,
    HildebrandtVerdict,
};
use crate::lattice::{LatticeBox, LatticeError};
use crate::numrange::{compute_hull_with, NumericalRangeHull, NumrangeError, DEFAULT_N_ANGLES};
use crate::operator::{assemble_with, AssemblyLimits, OperatorError, OperatorMatrix};
use crate::potential::{DecayCertificate, PotentialError, PotentialSpec};

type C = Complex64;

pub const DEFAULT_POTENTIAL_CAP: f64 = 1e3;
pub const DEFAULT_TOL_MATCH: f64 = 1e-6;
/// Sites added on each side of the zero set when no window is given.
pub const DEFAULT_WINDOW_MARGIN: i64 = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructError {
    #[error("no decaying tail ratio exists for a = {a} (need |a| > 2)")]
    NoDecayingTail { a: f64 },
    #[error("zero sites {0} and {1} are adjacent; unique continuation forces u ≡ 0")]
    AdjacentZeros(i64, i64),
    #[error("zero site {site} is not strictly inside the window [{lo}, {hi}]")]
    ZeroOutsideWindow { site: i64, lo: i64, hi: i64 },
    #[error("window [{lo}, {hi}] is empty or misses the origin")]
    BadWindow { lo: i64, hi: i64 },
    #[error("b must be positive, got {0}")]
    NonPositiveImaginaryPart(f64),
    #[error("|Re d({site})| = {value:e} exceeds the cap {cap:e}; choose a smoother design (|a| closer to 2 or wider zero gaps)")]
    PotentialTooLarge { site: i64, value: f64, cap: f64 },
    #[error("eigen-equation residual {residual:e} exceeds 1e-12·max|u|")]
    EigenEquation { residual: f64 },
    #[error("truncation N = {n} too small; the tails need N ≥ {needed}")]
    TruncationTooSmall { n: usize, needed: usize },
    #[error("window [{lo}, {hi}] does not fit in the box")]
    WindowOutsideBox { lo: i64, hi: i64 },
    #[error("certification failed near {expected}: {detail}")]
    Certification {
        expected: C,
        detail: String,
        normality_residual: Option<f64>,
        split_residual_re: Option<f64>,
        split_residual_im: Option<f64>,
    },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Numrange(#[from] NumrangeError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// Real eigenfunction `u` stored on `window`, with geometric tails
/// `u(n) = u(hi)·r^(n−hi)` and `u(n) = u(lo)·r^(lo−n)` outside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignedEigenfunction {
    pub window: (i64, i64),
    pub values: Vec<f64>,
    pub zeros: Vec<i64>,
    /// `(r−, r+)`; equal for this recipe.
    pub tail_ratios: (f64, f64),
    pub a: f64,
}

/// Root of `r + 1/r = a` with `|r| < 1`.
pub fn tail_ratio(a: f64) -> Result<f64, ConstructError> {
    if !(a.is_finite() && a.abs() > 2.0) {
        return Err(ConstructError::NoDecayingTail { a });
    }
    // the smaller root, written to avoid cancellation
    let big = 0.5 * (a + a.signum() * (a * a - 4.0).sqrt());
    Ok(1.0 / big)
}

/// Window `[min(Z ∪ {0}) − margin, max(Z ∪ {0}) + margin]`.
pub fn default_window(zeros: &[i64]) -> (i64, i64) {
    let lo = zeros.iter().copied().chain([0]).min().expect("nonempty");
    let hi = zeros.iter().copied().chain([0]).max().expect("nonempty");
    (lo - DEFAULT_WINDOW_MARGIN, hi + DEFAULT_WINDOW_MARGIN)
}

impl DesignedEigenfunction {
    /// Closed form `σ(n)·r^dist(n, Z)`; the distance is to the origin when
    /// there are no zeros.
    fn closed_form(&self, n: i64) -> f64 {
        let (dist, flips) = self.dist_and_sign(n);
        if dist == 0 && !self.zeros.is_empty() {
            return 0.0;
        }
        let mag = self.tail_ratios.1.powi(dist as i32);
        if flips % 2 == 0 { mag } else { -mag }
    }

    fn dist_and_sign(&self, n: i64) -> (u64, usize) {
        if self.zeros.is_empty() {
            return (n.unsigned_abs(), 0);
        }
        let dist = self.zeros.iter().map(|z| (n - z).unsigned_abs()).min().expect("nonempty");
        let flips = self.zeros.iter().filter(|&&z| z < n).count();
        (dist, flips)
    }

    pub fn value(&self, n: i64) -> f64 {
        let (lo, hi) = self.window;
        if n < lo {
            self.values[0] * self.tail_ratios.0.powi((lo - n) as i32)
        } else if n > hi {
            self.values[(hi - lo) as usize] * self.tail_ratios.1.powi((n - hi) as i32)
        } else {
            self.values[(n - lo) as usize]
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// No zeros: `Im d` is constant and `J − ib` is selfadjoint.
    pub fn is_shifted_selfadjoint(&self) -> bool {
        self.zeros.is_empty()
    }

    /// `(u(n−1) + u(n+1))/u(n)`, or `None` at a zero. Neighbours differ
    /// from `u(n)` by a factor `±r^e` with `e ∈ {−1, 0, 1}`; the pure tail
    /// case `r^−1 + r` returns `a` exactly.
    fn neighbour_ratio(&self, n: i64) -> Option<f64> {
        let r = self.tail_ratios.1;
        let is_zero = |d: u64| d == 0 && !self.zeros.is_empty();
        let (d0, s0) = self.dist_and_sign(n);
        if is_zero(d0) {
            return None;
        }
        let mut total = 0.0;
        let mut exps = Vec::new();
        for m in [n - 1, n + 1] {
            let (d, s) = self.dist_and_sign(m);
            if is_zero(d) {
                continue;
            }
            let e = d as i32 - d0 as i32;
            let same = s % 2 == s0 % 2;
            if same {
                exps.push(e);
            }
            total += if same { r.powi(e) } else { -r.powi(e) };
        }
        exps.sort_unstable();
        if exps == [-1, 1] {
            return Some(self.a);
        }
        Some(total)
    }
}

pub fn design_eigenfunction(
    a: f64,
    zero_sites: &[i64],
    window: (i64, i64),
) -> Result<DesignedEigenfunction, ConstructError> {
    let r = tail_ratio(a)?;
    let mut zeros = zero_sites.to_vec();
    zeros.sort_unstable();
    zeros.dedup();
    for w in zeros.windows(2) {
        if w[1] - w[0] == 1 {
            return Err(ConstructError::AdjacentZeros(w[0], w[1]));
        }
    }
    let (lo, hi) = window;
    if lo > hi || (zeros.is_empty() && !(lo <= 0 && 0 <= hi)) {
        return Err(ConstructError::BadWindow { lo, hi });
    }
    if let Some(&z) = zeros.iter().find(|&&z| z <= lo || z >= hi) {
        return Err(ConstructError::ZeroOutsideWindow { site: z, lo, hi });
    }
    let mut u = DesignedEigenfunction {
        window,
        values: Vec::new(),
        zeros,
        tail_ratios: (r, r),
        a,
    };
    u.values = (lo..=hi).map(|n| u.closed_form(n)).collect();
    Ok(u)
}

/// Sites where the induced `Re d` can be nonzero.
fn active_range(u: &DesignedEigenfunction) -> (i64, i64) {
    match (u.zeros.first(), u.zeros.last()) {
        (Some(&lo), Some(&hi)) => (lo - 1, hi + 1),
        _ => (-1, 1),
    }
}

/// `Re d(n) = a − (u(n−1) + u(n+1))/u(n)`, zero at the zeros of `u`.
pub fn real_potential_from_eigenfunction(
    u: &DesignedEigenfunction,
    a: f64,
    cap: f64,
) -> Result<PotentialSpec, ConstructError> {
    let u = DesignedEigenfunction { a, ..u.clone() };
    let (lo, hi) = active_range(&u);
    let mut entries = Vec::new();
    for n in lo..=hi {
        let Some(ratio) = u.neighbour_ratio(n) else { continue };
        let re = a - ratio;
        if !(re.abs() <= cap) {
            return Err(ConstructError::PotentialTooLarge {
                site: n,
                value: re.abs(),
                cap,
            });
        }
        if re != 0.0 {
            entries.push((vec![n], C::new(re, 0.0)));
        }
    }
    let radius = entries.iter().map(|(k, _)| k[0].unsigned_abs()).max().unwrap_or(0);
    let spec = PotentialSpec::table(entries)?.with_decay(DecayCertificate::VanishesOutsideRadius(radius))?;

    // (J₀ + Re D)u = a·u on the window
    let (wlo, whi) = u.window;
    let residual = (wlo..=whi)
        .map(|n| (u.value(n - 1) + spec.value(&[n]).re * u.value(n) + u.value(n + 1) - a * u.value(n)).abs())
        .fold(0.0, f64::max);
    if residual > 1e-12 * u.max_abs() {
        return Err(ConstructError::EigenEquation { residual });
    }
    Ok(spec)
}

/// `Im d = b` on the support of `u`, zero at its zeros.
pub fn imag_potential_from_support(u: &DesignedEigenfunction, b: f64) -> Result<PotentialSpec, ConstructError> {
    if !(b.is_finite() && b > 0.0) {
        return Err(ConstructError::NonPositiveImaginaryPart(b));
    }
    let constant = PotentialSpec::constant(C::new(0.0, b));
    if u.zeros.is_empty() {
        return Ok(constant);
    }
    let holes = PotentialSpec::table(u.zeros.iter().map(|&z| (vec![z], C::new(0.0, -b))))?;
    Ok(PotentialSpec::sum(vec![constant, holes])?)
}

/// Smallest truncation the recipe accepts: the tails must drop below
/// `tol_support` at the box edge.
pub fn required_truncation(r: f64, window: (i64, i64), tol_support: f64) -> usize {
    let width = (window.1 - window.0 + 1) as f64;
    (2.0 * tol_support.ln() / r.abs().ln() + width).ceil() as usize
}

#[derive(Debug, Clone)]
pub struct CounterexampleParts {
    pub eigenfunction: DesignedEigenfunction,
    pub potential: PotentialSpec,
    pub lattice: LatticeBox,
    pub operator: OperatorMatrix,
    pub expected: C,
}

/// Designs, derives the potential and assembles on the centred box of `n`
/// sites, without any size check or certification.
pub fn assemble_counterexample(
    a: f64,
    b: f64,
    zero_sites: &[i64],
    window: (i64, i64),
    n: usize,
    params: &ClassifierParams,
) -> Result<CounterexampleParts, ConstructError> {
    let u = design_eigenfunction(a, zero_sites, window)?;
    let re = real_potential_from_eigenfunction(&u, a, DEFAULT_POTENTIAL_CAP)?;
    let im = imag_potential_from_support(&u, b)?;
    let potential = PotentialSpec::sum(vec![re, im])?;
    let lattice = LatticeBox::centered_1d(n)?;
    let (lo, hi) = lattice.ranges()[0];
    if window.0 < lo || window.1 > hi {
        return Err(ConstructError::WindowOutsideBox {
            lo: window.0,
            hi: window.1,
        });
    }
    let operator = assemble_with(&lattice, &potential, AssemblyLimits::from_env(), params.exec)?;
    Ok(CounterexampleParts {
        eigenfunction: u,
        potential,
        lattice,
        operator,
        expected: C::new(a, b),
    })
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub parts: CounterexampleParts,
    pub hull: NumericalRangeHull,
    pub classifications: Vec<EigenClassification>,
    /// Index into `classifications` of the certified eigenvalue.
    pub certified: usize,
}

impl Counterexample {
    pub fn certified(&self) -> &EigenClassification {
        &self.classifications[self.certified]
    }
}

pub fn build_counterexample(
    a: f64,
    b: f64,
    zero_sites: &[i64],
    window: (i64, i64),
    n: usize,
    params: &ClassifierParams,
) -> Result<Counterexample, ConstructError> {
    let r = tail_ratio(a)?;
    let needed = required_truncation(r, window, params.tol_support);
    // validate the design first so errors name the real cause
    design_eigenfunction(a, zero_sites, window)?;
    if !(b.is_finite() && b > 0.0) {
        return Err(ConstructError::NonPositiveImaginaryPart(b));
    }
    if n < needed {
        return Err(ConstructError::TruncationTooSmall { n, needed });
    }
    let parts = assemble_counterexample(a, b, zero_sites, window, n, params)?;
    let hull = compute_hull_with(&parts.operator, DEFAULT_N_ANGLES, params.exec)?;
    let classifications = classify(&parts.operator, &hull, params)?;
    let expected = parts.expected;
    let fail = |detail: String, cls: Option<&EigenClassification>| ConstructError::Certification {
        expected,
        detail,
        normality_residual: cls.map(|c| c.normality_residual),
        split_residual_re: cls.map(|c| c.split_residual_re),
        split_residual_im: cls.map(|c| c.split_residual_im),
    };

    let tol_hull = hull.tol_hull();
    if let Some(v) = hull.polygon().iter().find(|v| v.im < -tol_hull || v.im > b + tol_hull) {
        return Err(fail(format!("hull vertex {v} leaves the strip 0 ≤ Im z ≤ {b}"), None));
    }
    let near: Vec<usize> = (0..classifications.len())
        .filter(|&i| (classifications[i].pair.value - expected).norm() <= DEFAULT_TOL_MATCH)
        .collect();
    let Some(&best) = near.iter().min_by(|&&i, &&j| {
        let di = (classifications[i].pair.value - expected).norm();
        let dj = (classifications[j].pair.value - expected).norm();
        di.total_cmp(&dj)
    }) else {
        return Err(fail(format!("no eigenvalue within {DEFAULT_TOL_MATCH:e}"), None));
    };
    let cls = &classifications[best];
    if !cls.is_boundary {
        return Err(fail(format!("boundary distance {:e}", cls.boundary_distance), Some(cls)));
    }
    let h = hildebrandt_certificate(&parts.operator, cls, params);
    if h != HildebrandtVerdict::CertifiedNormal {
        return Err(fail(format!("normality verdict {h:?}"), Some(cls)));
    }
    let s = split_certificate(&parts.operator, cls, params)?;
    if !s.is_certified() {
        return Err(fail(format!("split verdict {s:?}"), Some(cls)));
    }
    Ok(Counterexample {
        parts,
        hull,
        classifications,
        certified: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eig_hermitian;
    use crate::operator::assemble;
    use proptest::prelude::*;

    #[test]
    fn tail_ratios() {
        for (a, r) in [(-2.5, -0.5), (2.5, 0.5)] {
            let got = tail_ratio(a).unwrap();
            assert!((got - r).abs() < 1e-15);
            assert!((got + 1.0 / got - a).abs() < 1e-14);
        }
        assert_eq!(tail_ratio(2.0), Err(ConstructError::NoDecayingTail { a: 2.0 }));
        assert!(tail_ratio(0.0).unwrap_err().to_string().contains("no decaying tail ratio"));
        let big = tail_ratio(1e8).unwrap();
        assert!((big - 1e-8).abs() < 1e-22);
    }

    #[test]
    fn design_invariants() {
        let u = design_eigenfunction(-2.5, &[0, 4], (-10, 14)).unwrap();
        for &z in &u.zeros {
            assert_eq!(u.value(z), 0.0);
            assert_eq!(u.value(z - 1), -u.value(z + 1));
        }
        // tails continue the window exactly
        let (lo, hi) = u.window;
        for n in [lo - 3, lo - 1, hi + 1, hi + 5] {
            assert!((u.value(n) - u.closed_form(n)).abs() <= 1e-15 * u.closed_form(n).abs().max(1e-300));
        }
        assert!(matches!(
            design_eigenfunction(-2.5, &[0, 1], (-10, 10)),
            Err(ConstructError::AdjacentZeros(0, 1))
        ));
        assert!(matches!(
            design_eigenfunction(-2.5, &[10], (-10, 10)),
            Err(ConstructError::ZeroOutsideWindow { .. })
        ));
    }

    #[test]
    fn tails_induce_zero_potential() {
        let u = design_eigenfunction(2.5, &[0], (-10, 10)).unwrap();
        let re = real_potential_from_eigenfunction(&u, 2.5, DEFAULT_POTENTIAL_CAP).unwrap();
        for n in (-40..=40).filter(|n: &i64| n.abs() >= 2) {
            assert_eq!(re.value(&[n]), C::new(0.0, 0.0), "n={n}");
        }
        assert_eq!(re.value(&[0]), C::new(0.0, 0.0));
        assert!(re.tail().tends_to_zero());
    }

    #[test]
    fn imaginary_part_shapes() {
        let u = design_eigenfunction(-2.5, &[0], (-10, 10)).unwrap();
        let im = imag_potential_from_support(&u, 1.0).unwrap();
        assert_eq!(im.value(&[0]), C::new(0.0, 0.0));
        assert_eq!(im.value(&[7]), C::new(0.0, 1.0));
        assert!(matches!(imag_potential_from_support(&u, 0.0), Err(ConstructError::NonPositiveImaginaryPart(_))));
        let plain = design_eigenfunction(-2.5, &[], (-10, 10)).unwrap();
        assert!(plain.is_shifted_selfadjoint());
        assert_eq!(imag_potential_from_support(&plain, 0.5).unwrap(), PotentialSpec::constant(C::new(0.0, 0.5)));
    }

    #[test]
    fn cap_rejects_steep_designs() {
        let u = design_eigenfunction(5000.0, &[0, 4], (-5, 9)).unwrap();
        assert!(matches!(
            real_potential_from_eigenfunction(&u, 5000.0, DEFAULT_POTENTIAL_CAP),
            Err(ConstructError::PotentialTooLarge { .. })
        ));
    }

    #[test]
    fn round_trip_of_a_bound_state() {
        // bound state of −3δ₀, read back through the eigen-equation
        let n = 61;
        let lattice = LatticeBox::centered_1d(n).unwrap();
        let d = PotentialSpec::table([(vec![0], C::new(-3.0, 0.0))]).unwrap();
        let eig = eig_hermitian(&assemble(&lattice, &d, AssemblyLimits::default()).unwrap()).unwrap();
        let lam = eig.values[0];
        let f: Vec<f64> = (0..n).map(|i| eig.vectors[[i, 0]].re).collect();
        let lo = lattice.ranges()[0].0;
        let top = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 1..n - 1 {
            if f[i].abs() > 1e-6 * top {
                let re = lam - (f[i - 1] + f[i + 1]) / f[i];
                let want = d.value(&[lo + i as i64]).re;
                assert!((re - want).abs() < 1e-6, "n={} got {re} want {want}", lo + i as i64);
            }
        }
    }

    #[test]
    fn certified_counterexample() {
        let p = ClassifierParams::default();
        let ce = build_counterexample(-2.5, 1.0, &[0], (-10, 10), 101, &p).unwrap();
        let cls = ce.certified();
        assert!((cls.pair.value - C::new(-2.5, 1.0)).norm() < 1e-6);
        let two = build_counterexample(2.5, 0.5, &[0, 4], default_window(&[0, 4]), 121, &p).unwrap();
        assert!((two.certified().pair.value - C::new(2.5, 0.5)).norm() < 1e-6);
        assert!(matches!(
            build_counterexample(-2.5, 1.0, &[0], (-10, 10), 41, &p),
            Err(ConstructError::TruncationTooSmall { .. })
        ));
        assert!(matches!(
            build_counterexample(-2.5, 0.0, &[0], (-10, 10), 101, &p),
            Err(ConstructError::NonPositiveImaginaryPart(_))
        ));
        assert!(matches!(
            build_counterexample(0.0, 1.0, &[0], (-10, 10), 101, &p),
            Err(ConstructError::NoDecayingTail { .. })
        ));
    }

    proptest! {
        #[test]
        fn split_identity_on_window(
            a in prop_oneof![-6.0..-2.2f64, 2.2..6.0f64],
            b in 0.1..2.0f64,
            zeros in prop::collection::btree_set(-6i64..6, 0..4),
        ) {
            let zeros: Vec<i64> = zeros.into_iter().collect();
            prop_assume!(zeros.windows(2).all(|w| w[1] - w[0] > 1));
            let window = default_window(&zeros);
            let u = design_eigenfunction(a, &zeros, window).unwrap();
            let re = real_potential_from_eigenfunction(&u, a, DEFAULT_POTENTIAL_CAP).unwrap();
            let im = imag_potential_from_support(&u, b).unwrap();
            let top = u.max_abs();
            for n in window.0..=window.1 {
                let lhs = u.value(n - 1) + re.value(&[n]).re * u.value(n) + u.value(n + 1);
                prop_assert!((lhs - a * u.value(n)).abs() <= 1e-12 * top);
                prop_assert_eq!(im.value(&[n]).im * u.value(n), b * u.value(n));
                prop_assert_eq!(re.value(&[n]).im, 0.0);
            }
        }
    }
}
