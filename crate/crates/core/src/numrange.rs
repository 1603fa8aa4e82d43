//! Polygonal approximation of the numerical range by an angle sweep of the
//! support function `s(θ) = λ_max(cos θ·Re A − sin θ·Im A)`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{hermitian_top_eigenpair, inner, real_symmetric_top_eigenpair, HermitianTridiagonal};
use crate::operator::OperatorMatrix;
use crate::par::Execution;

type C = Complex64;

pub const DEFAULT_N_ANGLES: usize = 720;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumrangeError {
    #[error("need at least 3 angles, got {0}")]
    TooFewAngles(usize),
    #[error("point lies outside the numerical range by {excess:e}")]
    Outside { excess: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportSample {
    pub theta: f64,
    pub support: f64,
    /// `⟨A f, f⟩` for a unit top eigenvector `f`.
    pub witness: C,
}

/// Half-plane `{z : Re(e^{iθ} z) ≤ support}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfPlane {
    pub theta: f64,
    pub support: f64,
}

impl HalfPlane {
    /// `support − Re(e^{iθ} z)`; negative outside.
    pub fn slack(&self, z: C) -> f64 {
        self.support - (self.theta.cos() * z.re - self.theta.sin() * z.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericalRangeHull {
    samples: Vec<SupportSample>,
    polygon: Vec<C>,
    tol_hull: f64,
}

/// Precomputed real and imaginary parts for repeated support evaluations.
pub struct SupportOracle {
    re: Array2<C>,
    im: Array2<C>,
    a: Array2<C>,
    tri: Option<(HermitianTridiagonal, HermitianTridiagonal)>,
    /// Row-major real parts when `Re A` and `Im A` are real symmetric.
    real: Option<(Vec<f64>, Vec<f64>)>,
}

fn real_entries(m: &Array2<C>) -> Option<Vec<f64>> {
    m.iter().map(|z| (z.im == 0.0).then_some(z.re)).collect()
}

fn quadratic_form(m: &[f64], f: &[f64]) -> f64 {
    let n = f.len();
    (0..n)
        .map(|i| f[i] * m[i * n..(i + 1) * n].iter().zip(f).map(|(x, y)| x * y).sum::<f64>())
        .sum()
}

impl SupportOracle {
    pub fn new(a: &OperatorMatrix) -> Self {
        let re = a.real_part().entries().clone();
        let im = a.imag_part().entries().clone();
        let tri = HermitianTridiagonal::from_matrix(&re).zip(HermitianTridiagonal::from_matrix(&im));
        let real = match tri {
            Some(_) => None,
            None => real_entries(&re).zip(real_entries(&im)),
        };
        Self {
            re,
            im,
            a: a.entries().clone(),
            tri,
            real,
        }
    }

    pub fn at(&self, theta: f64) -> SupportSample {
        let (c, s) = (theta.cos(), theta.sin());
        let (support, witness) = match &self.tri {
            Some((tr, ti)) => {
                let m = HermitianTridiagonal {
                    diag: tr.diag.iter().zip(&ti.diag).map(|(x, y)| c * x - s * y).collect(),
                    off: tr.off.iter().zip(&ti.off).map(|(x, y)| c * x - s * y).collect(),
                };
                let (lambda, f) = m.top_eigenpair();
                let w = C::new(inner(&tr.matvec(&f), &f).re, inner(&ti.matvec(&f), &f).re);
                (lambda, w)
            }
            None if self.real.is_some() => {
                let (r, i) = self.real.as_ref().expect("checked");
                let m: Vec<f64> = r.iter().zip(i).map(|(x, y)| c * x - s * y).collect();
                let (lambda, f) = real_symmetric_top_eigenpair(&m, self.re.nrows());
                (lambda, C::new(quadratic_form(r, &f), quadratic_form(i, &f)))
            }
            None => {
                let m = &self.re * C::new(c, 0.0) - &self.im * C::new(s, 0.0);
                let (lambda, f) = hermitian_top_eigenpair(&m);
                let af: Vec<C> = self.a.rows().into_iter().map(|r| r.iter().zip(&f).map(|(x, y)| x * y).sum()).collect();
                (lambda, inner(&af, &f))
            }
        };
        SupportSample {
            theta,
            support,
            witness,
        }
    }
}

/// `(s(θ), witness)` at a single angle.
pub fn support_function(a: &OperatorMatrix, theta: f64) -> (f64, C) {
    let s = SupportOracle::new(a).at(theta);
    (s.support, s.witness)
}

pub fn compute_hull(a: &OperatorMatrix, n_angles: usize) -> Result<NumericalRangeHull, NumrangeError> {
    compute_hull_with(a, n_angles, Execution::default())
}

pub fn compute_hull_with(
    a: &OperatorMatrix,
    n_angles: usize,
    exec: Execution,
) -> Result<NumericalRangeHull, NumrangeError> {
    if n_angles < 3 {
        return Err(NumrangeError::TooFewAngles(n_angles));
    }
    let oracle = SupportOracle::new(a);
    let samples = exec.map_range(n_angles, |m| oracle.at(2.0 * PI * m as f64 / n_angles as f64));
    let tol_hull = default_tol_hull(a);
    let polygon = convex_hull(samples.iter().map(|s| s.witness).collect(), tol_hull);
    Ok(NumericalRangeHull {
        samples,
        polygon,
        tol_hull,
    })
}

/// `1e−10·(1 + ‖A‖_F)`.
pub fn default_tol_hull(a: &OperatorMatrix) -> f64 {
    1e-10 * (1.0 + a.frobenius_norm())
}

impl NumericalRangeHull {
    pub fn samples(&self) -> &[SupportSample] {
        &self.samples
    }

    /// Counter-clockwise vertices; one vertex for a point, two for a segment.
    pub fn polygon(&self) -> &[C] {
        &self.polygon
    }

    pub fn tol_hull(&self) -> f64 {
        self.tol_hull
    }

    pub fn half_planes(&self) -> impl Iterator<Item = HalfPlane> + '_ {
        self.samples.iter().map(|s| HalfPlane {
            theta: s.theta,
            support: s.support,
        })
    }

    /// Smallest half-plane slack at `z`; negative when `z` is outside.
    pub fn min_slack(&self, z: C) -> f64 {
        self.half_planes().map(|h| h.slack(z)).fold(f64::INFINITY, f64::min)
    }

    /// Outer test: `Re(e^{iθ} z) ≤ s(θ) + tol` for every sampled `θ`.
    pub fn contains(&self, z: C, tol: f64) -> bool {
        self.min_slack(z) >= -tol
    }

    /// Distance from `z` to the boundary of the outer description. Errors
    /// when `z` is outside by more than `tol_hull`.
    pub fn boundary_distance(&self, z: C) -> Result<f64, NumrangeError> {
        let gap = self.min_slack(z);
        if gap < -self.tol_hull {
            return Err(NumrangeError::Outside { excess: -gap });
        }
        Ok(gap.max(0.0))
    }

    /// Vertices of the outer polygon: intersections of consecutive
    /// supporting lines.
    pub fn outer_vertices(&self) -> Vec<C> {
        let n = self.samples.len();
        (0..n)
            .map(|m| {
                let p = &self.samples[m];
                let q = &self.samples[(m + 1) % n];
                // cos θ x − sin θ y = s for both lines
                let (a1, b1) = (p.theta.cos(), -p.theta.sin());
                let (a2, b2) = (q.theta.cos(), -q.theta.sin());
                let det = a1 * b2 - a2 * b1;
                C::new(
                    (p.support * b2 - q.support * b1) / det,
                    (a1 * q.support - a2 * p.support) / det,
                )
            })
            .collect()
    }

    /// Hausdorff distance between the inner polygon and the outer polygon.
    pub fn sandwich_gap(&self) -> f64 {
        self.outer_vertices()
            .into_iter()
            .map(|v| distance_to_polygon(&self.polygon, v))
            .fold(0.0, f64::max)
    }
}

fn cross(o: C, a: C, b: C) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// `a` is not strictly left of the chord `o → b` by more than `tol`.
fn turns_right(o: C, a: C, b: C, tol: f64) -> bool {
    cross(o, a, b) <= tol * (b - o).norm()
}

/// Andrew's monotone chain, counter-clockwise, with points and segments
/// returned as one or two vertices when the spread is within `tol`.
pub fn convex_hull(mut pts: Vec<C>, tol: f64) -> Vec<C> {
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() <= 1 {
        return pts;
    }
    // farthest pair along the sort direction bounds the diameter from below
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    let far = pts
        .iter()
        .copied()
        .max_by(|a, b| (a - first).norm().total_cmp(&(b - first).norm()))
        .expect("nonempty");
    let span = (far - first).norm().max((last - first).norm());
    if span <= tol {
        return vec![first];
    }
    let dir = (far - first) / (far - first).norm();
    let offsets: Vec<f64> = pts.iter().map(|p| ((p - first) * dir.conj()).im).collect();
    if offsets.iter().all(|o| o.abs() <= tol) {
        let t: Vec<f64> = pts.iter().map(|p| ((p - first) * dir.conj()).re).collect();
        let lo = (0..pts.len()).min_by(|&i, &j| t[i].total_cmp(&t[j])).expect("nonempty");
        let hi = (0..pts.len()).max_by(|&i, &j| t[i].total_cmp(&t[j])).expect("nonempty");
        let mut seg = vec![pts[lo], pts[hi]];
        seg.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        return seg;
    }
    let mut hull: Vec<C> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turns_right(hull[hull.len() - 2], hull[hull.len() - 1], p, tol) {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && turns_right(hull[hull.len() - 2], hull[hull.len() - 1], p, tol) {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn distance_to_segment(p: C, a: C, b: C) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Euclidean distance from `z` to a convex counter-clockwise polygon; zero
/// inside.
pub fn distance_to_polygon(poly: &[C], z: C) -> f64 {
    match poly.len() {
        0 => f64::INFINITY,
        1 => (z - poly[0]).norm(),
        2 => distance_to_segment(z, poly[0], poly[1]),
        n => {
            let inside = (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], z) >= 0.0);
            if inside {
                0.0
            } else {
                (0..n)
                    .map(|i| distance_to_segment(z, poly[i], poly[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeBox;
    use crate::linalg::spectral_norm;
    use crate::operator::{assemble, potential_bounds, AssemblyLimits};
    use crate::potential::PotentialSpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn jordan() -> OperatorMatrix {
        OperatorMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]).unwrap()
    }

    fn random_op(n: usize, seed: u64) -> OperatorMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        OperatorMatrix::from_entries(Array2::from_shape_fn((n, n), |_| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }))
        .unwrap()
    }

    fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<C> {
        let mut f: Vec<C> = (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let norm = crate::linalg::norm2(&f);
        f.iter_mut().for_each(|z| *z /= norm);
        f
    }

    fn rayleigh(a: &OperatorMatrix, f: &[C]) -> C {
        inner(&a.matvec(f), f)
    }

    #[test]
    fn diagonal_support() {
        let a = OperatorMatrix::diagonal(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let (s, w) = support_function(&a, 0.0);
        assert!((s - 1.0).abs() < 1e-15 && (w - c(1.0, 0.0)).norm() < 1e-15);
        let (s, w) = support_function(&a, PI);
        assert!(s.abs() < 1e-15 && w.norm() < 1e-15);
    }

    #[test]
    fn jordan_support_is_half() {
        let a = jordan();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for theta in [0.0, 0.3, 1.0, 2.5, 4.0] {
            let (s, w) = support_function(&a, theta);
            assert!((s - 0.5).abs() < 1e-14);
            assert!(((c(theta.cos(), theta.sin()) * w).re - s).abs() < 1e-12);
            // sampled maximum approaches 1/2 from below
            let best = (0..100_000)
                .map(|_| (c(theta.cos(), theta.sin()) * rayleigh(&a, &random_unit(2, &mut rng))).re)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(best <= s + 1e-12 && best > s - 1e-3);
        }
    }

    #[test]
    fn hermitian_hull_is_segment() {
        let b = LatticeBox::centered_1d(9).unwrap();
        let a = assemble(&b, &PotentialSpec::decay_power(c(1.0, 0.0), 1.0).unwrap(), AssemblyLimits::default()).unwrap();
        let h = compute_hull(&a, 64).unwrap();
        assert_eq!(h.polygon().len(), 2);
        assert!(h.polygon().iter().all(|v| v.im.abs() <= h.tol_hull()));
    }

    #[test]
    fn point_hull() {
        let a = OperatorMatrix::diagonal(&[c(2.0, -1.0)]).unwrap();
        let h = compute_hull(&a, 8).unwrap();
        assert_eq!(h.polygon().len(), 1);
        assert!((h.polygon()[0] - c(2.0, -1.0)).norm() < 1e-14);
        assert!(compute_hull(&a, 2).is_err());
    }

    #[test]
    fn normal_square() {
        let a = OperatorMatrix::diagonal(&[c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)]).unwrap();
        let h = compute_hull(&a, 720).unwrap();
        assert_eq!(h.polygon().len(), 4);
        for v in [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)] {
            assert!(h.polygon().iter().any(|p| (p - v).norm() < 1e-12));
            assert!(h.boundary_distance(v).unwrap() < 1e-12);
        }
        assert!(h.contains(c(0.2, 0.2), 1e-8));
        assert!(!h.contains(c(0.6, 0.6), 1e-8));
    }

    #[test]
    fn membership_and_distance() {
        let seg = compute_hull(&OperatorMatrix::diagonal(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap(), 720).unwrap();
        assert!(seg.contains(c(0.5, 0.0), 1e-12));
        assert!(!seg.contains(c(0.5, 0.1), 1e-8));
        assert!(seg.boundary_distance(c(0.5, 0.0)).unwrap() < 1e-15);
        assert!(matches!(seg.boundary_distance(c(2.0, 0.0)), Err(NumrangeError::Outside { .. })));

        let disk = compute_hull(&jordan(), 720).unwrap();
        assert!((disk.boundary_distance(c(0.0, 0.0)).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sandwich_gap_shrinks_quadratically() {
        let a = jordan();
        let g1 = compute_hull(&a, 90).unwrap().sandwich_gap();
        let g2 = compute_hull(&a, 180).unwrap().sandwich_gap();
        let g4 = compute_hull(&a, 360).unwrap().sandwich_gap();
        assert!(g2 < g1 && g4 < g2);
        // C/n² with C fitted from the coarsest grid
        assert!(g4 <= g1 * (90.0f64 / 360.0).powi(2) * 1.5);
    }

    #[test]
    fn box_bound_on_lattice() {
        let b = LatticeBox::new(vec![(-3, 3), (-3, 3)]).unwrap();
        let p = PotentialSpec::seeded_random(3, b.clone(), (-1.0, 0.5), (0.0, 2.0)).unwrap();
        let a = assemble(&b, &p, AssemblyLimits::default()).unwrap();
        let pb = potential_bounds(&p, &b);
        let h = compute_hull(&a, 180).unwrap();
        for v in h.polygon() {
            assert!(v.re >= -4.0 + pb.re_min - 1e-8 && v.re <= 4.0 + pb.re_max + 1e-8);
            assert!(v.im >= pb.im_min - 1e-8 && v.im <= pb.im_max + 1e-8);
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let a = random_op(12, 3);
        let s = compute_hull_with(&a, 100, Execution::Sequential).unwrap();
        let p = compute_hull_with(&a, 100, Execution::Parallel).unwrap();
        assert_eq!(s, p);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn rayleigh_quotients_inside(seed in any::<u64>(), n in 1usize..7) {
            let a = random_op(n, seed);
            let h = compute_hull(&a, 360).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            for _ in 0..200 {
                prop_assert!(h.contains(rayleigh(&a, &random_unit(n, &mut rng)), 1e-8));
            }
            for s in h.samples() {
                prop_assert!(h.contains(s.witness, h.tol_hull()));
                let rot = (c(s.theta.cos(), s.theta.sin()) * s.witness).re;
                prop_assert!((rot - s.support).abs() <= 1e-9 * (1.0 + a.frobenius_norm()));
            }
        }

        #[test]
        fn polygon_is_ccw_convex(seed in any::<u64>(), n in 2usize..7) {
            let h = compute_hull(&random_op(n, seed), 120).unwrap();
            let p = h.polygon();
            let k = p.len();
            if k >= 3 {
                for i in 0..k {
                    prop_assert!(cross(p[i], p[(i + 1) % k], p[(i + 2) % k]) > 0.0);
                }
            }
        }

        #[test]
        fn affine_covariance(seed in any::<u64>(), ar in -2.0..2.0f64, ai in -2.0..2.0f64, br in -2.0..2.0f64, bi in -2.0..2.0f64) {
            let a = random_op(4, seed);
            let alpha = c(ar, ai);
            let beta = c(br, bi);
            prop_assume!(alpha.norm() > 0.1);
            let n = 240;
            let h = compute_hull(&a, n).unwrap();
            let g = compute_hull(&a.affine(alpha, beta), n).unwrap();
            // vertices of the mapped hull lie on the boundary of the image hull
            let tol = 1e-3 * (1.0 + alpha.norm()) * (1.0 + a.frobenius_norm());
            for v in h.polygon() {
                let w = alpha * v + beta;
                prop_assert!(distance_to_polygon(g.polygon(), w) <= tol);
            }
            for w in g.polygon() {
                let v = (w - beta) / alpha;
                prop_assert!(distance_to_polygon(h.polygon(), v) * alpha.norm() <= tol);
            }
        }

        #[test]
        fn adjoint_reflection_and_norm(seed in any::<u64>(), n in 1usize..6) {
            let a = random_op(n, seed);
            let h = compute_hull(&a, 240).unwrap();
            let g = compute_hull(&a.adjoint(), 240).unwrap();
            let tol = h.tol_hull() * 1e3;
            for v in h.polygon() {
                prop_assert!(g.contains(v.conj(), tol));
                prop_assert!(v.norm() <= spectral_norm(a.entries()) + h.tol_hull());
            }
            for w in g.polygon() {
                prop_assert!(h.contains(w.conj(), tol));
            }
        }
    }
}
