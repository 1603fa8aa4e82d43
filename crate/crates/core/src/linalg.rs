//! Dense complex eigensolvers.
//!
//! Residuals are always recomputed from `(A, λ, v)` after the solver returns.
//! The general solver is Householder reduction to Hessenberg form followed by
//! single-shift implicit QR; the hermitian solver tridiagonalizes and runs an
//! implicit QL sweep on the real tridiagonal obtained after a diagonal phase
//! change.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::operator::OperatorMatrix;

type C = Complex64;

const EPS: f64 = f64::EPSILON;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

pub const DEFAULT_TOL_EIG: f64 = 1e-9;
/// Largest `|a_ij − conj(a_ji)|` accepted as hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("no convergence after {iterations} iterations (worst residual {worst_residual:e})")]
    NoConvergence { iterations: usize, worst_residual: f64 },
    #[error("eigenpair {index} has residual {residual:e} above the bound {bound:e}")]
    ResidualContract { index: usize, residual: f64, bound: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub value: C,
    /// Unit 2-norm.
    pub vector: Vec<C>,
    /// `‖A v − λ v‖₂`, recomputed.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: Array2<C>,
}

/// Hermitian tridiagonal matrix: `diag[i] = H[i,i]`, `off[i] = H[i+1,i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<C>,
}

pub fn norm2(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨x, y⟩ = Σ x_i conj(y_i)`.
pub fn inner(x: &[C], y: &[C]) -> C {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

fn normalize(v: &mut [C]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
}

fn check_finite(a: &Array2<C>) -> Result<(), LinalgError> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

fn frobenius(a: &Array2<C>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn matvec(a: &Array2<C>, x: &[C]) -> Vec<C> {
    a.rows()
        .into_iter()
        .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

pub fn residual(a: &Array2<C>, value: C, vector: &[C]) -> f64 {
    let ax = matvec(a, vector);
    ax.iter()
        .zip(vector)
        .map(|(y, x)| (y - value * x).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Largest `|a_ij − conj(a_ji)|`.
pub fn hermitian_deviation(a: &Array2<C>) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    dev
}

/// Unit-modulus phase of `z`, or 1 for `z = 0`.
fn phase(z: C) -> C {
    let r = z.norm();
    if r == 0.0 {
        ONE
    } else {
        z / r
    }
}

/// Reflector `I − 2vv*` mapping `x` onto a multiple of `e₁`. Returns `(v, α)`
/// with `P x = α e₁`, or `None` when `x` is already a multiple of `e₁`.
fn householder(x: &[C]) -> Option<(Vec<C>, C)> {
    let tail: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
    if tail == 0.0 {
        return None;
    }
    let xnorm = (x[0].norm_sqr() + tail).sqrt();
    let alpha = -phase(x[0]) * xnorm;
    let mut v = x.to_vec();
    v[0] -= alpha;
    normalize(&mut v);
    Some((v, alpha))
}

// --- general eigenproblem ----------------------------------------------------

pub fn eig_general(a: &OperatorMatrix) -> Result<Vec<EigenPair>, LinalgError> {
    eig_general_with(a.entries(), DEFAULT_TOL_EIG)
}

/// All eigenpairs of a square complex matrix, sorted by `(Re λ, Im λ)`.
pub fn eig_general_with(a: &Array2<C>, tol_eig: f64) -> Result<Vec<EigenPair>, LinalgError> {
    check_finite(a)?;
    let n = a.nrows();
    let norm = frobenius(a);
    let bound = tol_eig * (1.0 + norm);

    let mut h = a.clone();
    let mut z = Array2::from_diag_elem(n, ONE);
    hessenberg(&mut h, &mut z);
    let converged = schur(&mut h, &mut z);
    let mut pairs: Vec<EigenPair> = triangular_eigenvectors(&h, &z)
        .into_iter()
        .enumerate()
        .map(|(k, vector)| EigenPair {
            value: h[[k, k]],
            residual: residual(a, h[[k, k]], &vector),
            vector,
        })
        .collect();
    if let Err(iterations) = converged {
        let worst = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
        return Err(LinalgError::NoConvergence {
            iterations,
            worst_residual: worst,
        });
    }
    pairs.sort_by(|p, q| {
        p.value
            .re
            .total_cmp(&q.value.re)
            .then(p.value.im.total_cmp(&q.value.im))
    });
    for (index, p) in pairs.iter().enumerate() {
        if !(p.residual <= bound) {
            return Err(LinalgError::ResidualContract {
                index,
                residual: p.residual,
                bound,
            });
        }
    }
    Ok(pairs)
}

/// In-place reduction `H = Q* A Q`, accumulating `Q` into `z`.
fn hessenberg(h: &mut Array2<C>, z: &mut Array2<C>) {
    let n = h.nrows();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C> = (k + 1..n).map(|i| h[[i, k]]).collect();
        let Some((v, _)) = householder(&x) else {
            continue;
        };
        let off = k + 1;
        // left: rows off.., columns k..
        for j in k..n {
            let s: C = v.iter().enumerate().map(|(t, vt)| vt.conj() * h[[off + t, j]]).sum();
            for (t, vt) in v.iter().enumerate() {
                h[[off + t, j]] -= 2.0 * vt * s;
            }
        }
        // right: all rows, columns off..
        for m in [&mut *h, &mut *z] {
            for i in 0..n {
                let s: C = v.iter().enumerate().map(|(t, vt)| m[[i, off + t]] * vt).sum();
                for (t, vt) in v.iter().enumerate() {
                    m[[i, off + t]] -= 2.0 * s * vt.conj();
                }
            }
        }
        for i in k + 2..n {
            h[[i, k]] = ZERO;
        }
    }
}

fn cabs1(z: C) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Givens pair `(c, s)` with `[[c, s], [−s̄, c]]·[x; y] = [r; 0]`.
fn givens(x: C, y: C) -> (f64, C) {
    let ax = x.norm();
    if y == ZERO {
        return (1.0, ZERO);
    }
    if ax == 0.0 {
        return (0.0, ONE);
    }
    let rho = ax.hypot(y.norm());
    (ax / rho, (x / ax) * y.conj() / rho)
}

/// Implicit single-shift QR on an upper Hessenberg matrix, producing the
/// full Schur form in `h` and accumulating Schur vectors into `z`.
/// Returns the iteration count on failure.
fn schur(h: &mut Array2<C>, z: &mut Array2<C>) -> Result<(), usize> {
    let n = h.nrows();
    if n <= 1 {
        return Ok(());
    }
    let norm = frobenius(h);
    let smlnum = f64::MIN_POSITIVE * (n as f64 / EPS);
    let cap = 100 * n;
    let mut total = 0usize;
    let mut its = 0usize;
    let mut hi = n - 1;

    while hi > 0 {
        // find the start of the active unreduced block
        let mut l = hi;
        while l > 0 {
            let sub = h[[l, l - 1]];
            if negligible(h, l, smlnum, norm) {
                if sub != ZERO {
                    h[[l, l - 1]] = ZERO;
                }
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            its = 0;
            continue;
        }
        if total >= cap {
            return Err(total);
        }
        total += 1;
        its += 1;

        let mu = if its.is_multiple_of(10) {
            h[[hi, hi]] + 0.75 * h[[hi, hi - 1]].norm()
        } else {
            wilkinson(h[[hi - 1, hi - 1]], h[[hi - 1, hi]], h[[hi, hi - 1]], h[[hi, hi]])
        };

        let mut x = h[[l, l]] - mu;
        let mut y = h[[l + 1, l]];
        for k in l..hi {
            if k > l {
                x = h[[k, k - 1]];
                y = h[[k + 1, k - 1]];
            }
            let (c, s) = givens(x, y);
            let col0 = if k > l { k - 1 } else { l };
            for j in col0..n {
                let t1 = h[[k, j]];
                let t2 = h[[k + 1, j]];
                h[[k, j]] = c * t1 + s * t2;
                h[[k + 1, j]] = -s.conj() * t1 + c * t2;
            }
            let row1 = (k + 2).min(hi);
            for i in 0..=row1 {
                let t1 = h[[i, k]];
                let t2 = h[[i, k + 1]];
                h[[i, k]] = c * t1 + s.conj() * t2;
                h[[i, k + 1]] = -s * t1 + c * t2;
            }
            for i in 0..n {
                let t1 = z[[i, k]];
                let t2 = z[[i, k + 1]];
                z[[i, k]] = c * t1 + s.conj() * t2;
                z[[i, k + 1]] = -s * t1 + c * t2;
            }
            if k > l {
                h[[k + 1, k - 1]] = ZERO;
            }
        }
    }
    Ok(())
}

fn negligible(h: &Array2<C>, k: usize, smlnum: f64, norm: f64) -> bool {
    let sub = cabs1(h[[k, k - 1]]);
    if sub <= smlnum || sub <= EPS * norm * 1e-3 {
        return true;
    }
    let hkk = h[[k, k]];
    let hpp = h[[k - 1, k - 1]];
    let mut tst = cabs1(hpp) + cabs1(hkk);
    if tst == 0.0 {
        tst = norm;
    }
    if sub > EPS * tst {
        return false;
    }
    // Ahues–Tisseur: also require the off-diagonal product to be small
    // relative to the eigenvalue gap.
    let up = cabs1(h[[k - 1, k]]);
    let ab = sub.max(up);
    let ba = sub.min(up);
    let aa = cabs1(hkk).max(cabs1(hpp - hkk));
    let bb = cabs1(hkk).min(cabs1(hpp - hkk));
    let s = aa + ab;
    ba * (ab / s) <= smlnum.max(EPS * (bb * (aa / s)))
}

/// Eigenvalue of `[[a, b], [c, d]]` closest to `d`.
fn wilkinson(a: C, b: C, c: C, d: C) -> C {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let m1 = mid + disc;
    let m2 = mid - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// Eigenvectors of `A = Z T Z*` from back-substitution on the triangular `T`.
fn triangular_eigenvectors(t: &Array2<C>, z: &Array2<C>) -> Vec<Vec<C>> {
    let n = t.nrows();
    let smin = (EPS * frobenius(t)).max(f64::MIN_POSITIVE);
    (0..n)
        .map(|k| {
            let lam = t[[k, k]];
            let mut y = vec![ZERO; k + 1];
            y[k] = ONE;
            for j in (0..k).rev() {
                let s: C = (j + 1..=k).map(|m| t[[j, m]] * y[m]).sum();
                let mut den = t[[j, j]] - lam;
                if den.norm() < smin {
                    den = C::new(smin, 0.0);
                }
                y[j] = -s / den;
                if y[j].norm() > 1e100 {
                    y.iter_mut().for_each(|v| *v *= 1e-100);
                }
            }
            let mut x: Vec<C> = (0..n)
                .map(|i| (0..=k).map(|m| z[[i, m]] * y[m]).sum())
                .collect();
            normalize(&mut x);
            x
        })
        .collect()
}

// --- hermitian eigenproblem ---------------------------------------------------

fn hermitian_input(a: &OperatorMatrix) -> Result<(), LinalgError> {
    check_finite(a.entries())?;
    if a.is_hermitian() {
        return Ok(());
    }
    let deviation = hermitian_deviation(a.entries());
    if deviation <= HERMITIAN_TOL {
        Ok(())
    } else {
        Err(LinalgError::NotHermitian { deviation })
    }
}

pub fn eig_hermitian(a: &OperatorMatrix) -> Result<HermitianEigen, LinalgError> {
    hermitian_input(a)?;
    let out = eig_hermitian_array(a.entries())?;
    let bound = DEFAULT_TOL_EIG * (1.0 + a.frobenius_norm());
    for (index, &v) in out.values.iter().enumerate() {
        let col: Vec<C> = out.vectors.column(index).to_vec();
        let r = residual(a.entries(), C::new(v, 0.0), &col);
        if !(r <= bound) {
            return Err(LinalgError::ResidualContract {
                index,
                residual: r,
                bound,
            });
        }
    }
    Ok(out)
}

/// Full hermitian eigendecomposition without the residual check.
pub fn eig_hermitian_array(a: &Array2<C>) -> Result<HermitianEigen, LinalgError> {
    let n = a.nrows();
    let reduced = Tridiagonalization::new(a);
    let (tri, phases) = reduced.tri.to_real();
    let (values, y) = tql2(&tri.0, &tri.1)?;
    let mut vectors = Array2::zeros((n, n));
    let mut col = vec![ZERO; n];
    for m in 0..n {
        for i in 0..n {
            col[i] = phases[i] * y[i * n + m];
        }
        reduced.apply_q(&mut col);
        for i in 0..n {
            vectors[[i, m]] = col[i];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Top eigenpair of a hermitian matrix.
pub fn hermitian_top_eigenpair(a: &Array2<C>) -> (f64, Vec<C>) {
    let reduced = Tridiagonalization::new(a);
    let (lambda, mut v) = reduced.tri.top_eigenpair();
    reduced.apply_q(&mut v);
    (lambda, v)
}

/// Top eigenpair of a real symmetric `n×n` matrix given row-major.
pub fn real_symmetric_top_eigenpair(a: &[f64], n: usize) -> (f64, Vec<f64>) {
    assert_eq!(a.len(), n * n, "matrix is not n×n");
    if n == 1 {
        return (a[0], vec![1.0]);
    }
    let mut h = a.to_vec();
    let mut reflectors: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut p = vec![0.0; n];
    for k in 0..n - 2 {
        let off = k + 1;
        let m = n - off;
        let tail: f64 = (off + 1..n).map(|i| h[i * n + k] * h[i * n + k]).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = h[off * n + k];
        let xnorm = (x0 * x0 + tail).sqrt();
        let alpha = if x0 >= 0.0 { -xnorm } else { xnorm };
        let mut v: Vec<f64> = (off..n).map(|i| h[i * n + k]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= vn);
        for i in 0..m {
            let row = &h[(off + i) * n + off..(off + i) * n + n];
            p[i] = row.iter().zip(&v).map(|(x, y)| x * y).sum();
        }
        let kappa: f64 = v.iter().zip(&p).map(|(x, y)| x * y).sum();
        for i in 0..m {
            p[i] -= kappa * v[i];
        }
        for i in 0..m {
            let (vi, wi) = (2.0 * v[i], 2.0 * p[i]);
            let row = &mut h[(off + i) * n + off..(off + i) * n + n];
            for ((x, vj), wj) in row.iter_mut().zip(&v).zip(&p[..m]) {
                *x -= vi * wj + wi * vj;
            }
        }
        h[off * n + k] = alpha;
        reflectors.push((off, v));
    }
    let d: Vec<f64> = (0..n).map(|i| h[i * n + i]).collect();
    let e: Vec<f64> = (0..n - 1).map(|i| h[(i + 1) * n + i]).collect();
    // signed off-diagonals: flip signs so the tridiagonal is nonnegative
    let mut sign = vec![1.0; n];
    for i in 1..n {
        sign[i] = if e[i - 1] < 0.0 { -sign[i - 1] } else { sign[i - 1] };
    }
    let b: Vec<f64> = e.iter().map(|x| x.abs()).collect();
    let (lambda, y) = real_tridiagonal_top(&d, &b);
    let mut x: Vec<f64> = y.iter().zip(&sign).map(|(a, s)| a * s).collect();
    for (off, v) in reflectors.iter().rev() {
        let s: f64 = v.iter().enumerate().map(|(t, vt)| vt * x[off + t]).sum();
        for (t, vt) in v.iter().enumerate() {
            x[off + t] -= 2.0 * vt * s;
        }
    }
    (lambda, x)
}

/// Largest singular value, `sqrt(λ_max(A* A))`.
pub fn spectral_norm(a: &Array2<C>) -> f64 {
    let ah = a.t().mapv(|z| z.conj());
    let g = ah.dot(a);
    hermitian_top_eigenpair(&g).0.max(0.0).sqrt()
}

/// `Q* A Q = T` with `Q` a product of Householder reflectors.
struct Tridiagonalization {
    tri: HermitianTridiagonal,
    /// `(offset, v)` for `P = I − 2vv*` acting on indices `offset..`.
    reflectors: Vec<(usize, Vec<C>)>,
}

impl Tridiagonalization {
    fn new(a: &Array2<C>) -> Self {
        let n = a.nrows();
        if let Some(tri) = HermitianTridiagonal::from_matrix(a) {
            return Self {
                tri,
                reflectors: Vec::new(),
            };
        }
        let mut h = a.clone();
        let mut reflectors = Vec::new();
        let mut p = vec![ZERO; n];
        for k in 0..n.saturating_sub(2) {
            let off = k + 1;
            let x: Vec<C> = (off..n).map(|i| h[[i, k]]).collect();
            let Some((v, alpha)) = householder(&x) else {
                continue;
            };
            let m = v.len();
            for i in 0..m {
                p[i] = (0..m).map(|j| h[[off + i, off + j]] * v[j]).sum();
            }
            let kappa: C = (0..m).map(|i| v[i].conj() * p[i]).sum();
            let w: Vec<C> = (0..m).map(|i| p[i] - kappa.re * v[i]).collect();
            for i in 0..m {
                for j in 0..m {
                    h[[off + i, off + j]] -= 2.0 * (v[i] * w[j].conj() + w[i] * v[j].conj());
                }
            }
            h[[off, k]] = alpha;
            h[[k, off]] = alpha.conj();
            for i in off + 1..n {
                h[[i, k]] = ZERO;
                h[[k, i]] = ZERO;
            }
            reflectors.push((off, v));
        }
        let tri = HermitianTridiagonal {
            diag: (0..n).map(|i| h[[i, i]].re).collect(),
            off: (0..n.saturating_sub(1)).map(|i| h[[i + 1, i]]).collect(),
        };
        Self { tri, reflectors }
    }

    /// `x ← Q x`.
    fn apply_q(&self, x: &mut [C]) {
        for (off, v) in self.reflectors.iter().rev() {
            let s: C = v.iter().enumerate().map(|(t, vt)| vt.conj() * x[off + t]).sum();
            for (t, vt) in v.iter().enumerate() {
                x[off + t] -= 2.0 * vt * s;
            }
        }
    }
}

impl HermitianTridiagonal {
    /// Reads the tridiagonal part when every other entry is exactly zero.
    pub fn from_matrix(a: &Array2<C>) -> Option<Self> {
        let n = a.nrows();
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) > 1 && a[[i, j]] != ZERO {
                    return None;
                }
            }
        }
        Some(Self {
            diag: (0..n).map(|i| a[[i, i]].re).collect(),
            off: (0..n.saturating_sub(1)).map(|i| a[[i + 1, i]]).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Real symmetric form `(diag, |off|)` and phases `φ` with
    /// `H = Φ T Φ*`, `Φ = diag(φ)`.
    fn to_real(&self) -> ((Vec<f64>, Vec<f64>), Vec<C>) {
        let n = self.len();
        let mut phases = Vec::with_capacity(n);
        let mut cur = ONE;
        phases.push(cur);
        for e in &self.off {
            cur *= phase(*e);
            phases.push(cur);
        }
        let b = self.off.iter().map(|e| e.norm()).collect();
        ((self.diag.clone(), b), phases.into_iter().take(n).collect())
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[C]) -> Vec<C> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i].conj() * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Largest eigenvalue by Sturm bisection and its unit eigenvector by
    /// inverse iteration.
    pub fn top_eigenpair(&self) -> (f64, Vec<C>) {
        let n = self.len();
        let ((d, b), phases) = self.to_real();
        if n == 1 {
            return (d[0], vec![ONE]);
        }
        let (lambda, x) = real_tridiagonal_top(&d, &b);
        (lambda, x.iter().zip(&phases).map(|(xi, p)| p * *xi).collect())
    }
}

/// Number of eigenvalues of the symmetric tridiagonal `(d, b)` below `x`.
fn sturm_count(d: &[f64], b: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    for i in 0..d.len() {
        if i > 0 {
            q = d[i] - x - b[i - 1] * b[i - 1] / q;
        }
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn real_tridiagonal_top(d: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let n = d.len();
    let radius = |i: usize| {
        let left = if i > 0 { b[i - 1] } else { 0.0 };
        let right = if i + 1 < n { b[i] } else { 0.0 };
        left + right
    };
    let mut lo = (0..n).map(|i| d[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| d[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let bmax = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let pivmin = f64::MIN_POSITIVE * (1.0 + bmax * bmax);
    lo -= EPS * scale;
    hi += EPS * scale;
    for _ in 0..200 {
        if hi - lo <= 2.0 * EPS * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sturm_count(d, b, mid, pivmin) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);

    // Inverse iteration with a shift just above the spectrum, where
    // T − σI is negative definite and LDLᵀ needs no pivoting.
    let sigma = hi + 8.0 * EPS * scale;
    let mut piv = vec![0.0; n];
    let mut l = vec![0.0; n];
    piv[0] = (d[0] - sigma).min(-pivmin);
    for i in 1..n {
        l[i] = b[i - 1] / piv[i - 1];
        piv[i] = d[i] - sigma - l[i] * b[i - 1];
        if piv[i] >= -pivmin {
            piv[i] = -pivmin;
        }
    }
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            0.5 + ((state >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect();
    for _ in 0..3 {
        for i in 1..n {
            x[i] -= l[i] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= piv[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= l[i + 1] * x[i + 1];
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
    }
    (lambda, x)
}

/// Implicit QL on a real symmetric tridiagonal; `b[i]` couples `i` and `i+1`.
/// Returns ascending values and row-major eigenvectors (columns).
fn tql2(diag: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(b);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let cap = 100 * n.max(1);
    let mut total = 0usize;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > EPS * tst1 {
            m += 1;
        }
        if m > l {
            loop {
                total += 1;
                if total > cap {
                    let worst = e.iter().map(|x| x.abs()).fold(0.0, f64::max);
                    return Err(LinalgError::NoConvergence {
                        iterations: total,
                        worst_residual: worst,
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let hk = v[k * n + i + 1];
                        v[k * n + i + 1] = s * v[k * n + i] + c * hk;
                        v[k * n + i] = c * v[k * n + i] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= EPS * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut sorted = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            sorted[k * n + new] = v[k * n + old];
        }
    }
    Ok((values, sorted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeBox;
    use crate::operator::{assemble, AssemblyLimits};
    use crate::potential::PotentialSpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn random_matrix(n: usize, seed: u64) -> Array2<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, n), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn op(a: Array2<C>) -> OperatorMatrix {
        OperatorMatrix::from_entries(a).unwrap()
    }

    /// Cofactor expansion along the first row.
    fn det(a: &Array2<C>) -> C {
        let n = a.nrows();
        if n == 1 {
            return a[[0, 0]];
        }
        (0..n)
            .map(|j| {
                let minor = Array2::from_shape_fn((n - 1, n - 1), |(r, s)| a[[r + 1, if s < j { s } else { s + 1 }]]);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[[0, j]] * det(&minor)
            })
            .sum()
    }

    fn free_chain(n: usize) -> OperatorMatrix {
        let b = LatticeBox::new(vec![(0, n as i64 - 1)]).unwrap();
        assemble(&b, &PotentialSpec::zero(), AssemblyLimits::default()).unwrap()
    }

    /// Roots of `p_N(x) = x p_{N-1} − p_{N-2}` by sign changes and bisection.
    fn chebyshev_roots(n: usize) -> Vec<f64> {
        let p = |x: f64| {
            let (mut a, mut b) = (1.0, x);
            for _ in 1..n {
                let c = x * b - a;
                a = b;
                b = c;
            }
            b
        };
        let grid = 20001;
        let mut roots = Vec::new();
        for k in 0..grid {
            let mut lo = -2.0 + 4.0 * k as f64 / grid as f64;
            let mut hi = -2.0 + 4.0 * (k + 1) as f64 / grid as f64;
            if p(lo) * p(hi) < 0.0 {
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if p(lo) * p(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
        }
        roots
    }

    #[test]
    fn free_chain_spectrum() {
        for n in 1..=8 {
            let e = eig_hermitian(&free_chain(n)).unwrap();
            let oracle = chebyshev_roots(n);
            assert_eq!(oracle.len(), n);
            for (m, (v, o)) in e.values.iter().zip(&oracle).enumerate() {
                assert!((v - o).abs() < 1e-12, "n={n} m={m}");
                let closed = 2.0 * ((n - m) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
                assert!((v - closed).abs() < 1e-12);
            }
        }
        let e = eig_hermitian(&free_chain(3)).unwrap();
        let s = 2f64.sqrt();
        assert!((e.values[0] + s).abs() < 1e-14 && e.values[1].abs() < 1e-14 && (e.values[2] - s).abs() < 1e-14);
    }

    #[test]
    fn small_cases() {
        let e = eig_hermitian(&op(Array2::from_elem((1, 1), c(5.0, 0.0)))).unwrap();
        assert_eq!(e.values, vec![5.0]);

        let pairs = eig_general(&OperatorMatrix::diagonal(&[c(3.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]).unwrap()).unwrap();
        let values: Vec<C> = pairs.iter().map(|p| p.value).collect();
        assert_eq!(values, vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        assert!(pairs.iter().all(|p| p.residual == 0.0));
        assert_eq!(pairs[0].vector[1].norm(), 1.0);

        let jordan = op(ndarray::arr2(&[[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]));
        let pairs = eig_general(&jordan).unwrap();
        assert_eq!(pairs.len(), 2);
        for p in &pairs {
            assert_eq!(p.value, c(0.0, 0.0));
            assert!(p.residual <= 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = op(ndarray::arr2(&[[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]));
        assert!(matches!(eig_hermitian(&a), Err(LinalgError::NotHermitian { .. })));
        let mut bad = Array2::from_elem((2, 2), c(1.0, 0.0));
        bad[[0, 1]] = c(f64::NAN, 0.0);
        assert_eq!(eig_general_with(&bad, DEFAULT_TOL_EIG).unwrap_err(), LinalgError::NonFinite);
    }

    #[test]
    fn random_general_residuals() {
        for seed in 0..20 {
            let a = random_matrix(5, seed);
            let norm = frobenius(&a);
            let pairs = eig_general_with(&a, DEFAULT_TOL_EIG).unwrap();
            for p in &pairs {
                assert!(p.residual <= 1e-10 * (1.0 + norm));
                assert!((norm2(&p.vector) - 1.0).abs() < 1e-12);
            }
            let tr: C = (0..5).map(|i| a[[i, i]]).sum();
            let sum: C = pairs.iter().map(|p| p.value).sum();
            assert!((tr - sum).norm() <= 1e-8 * (1.0 + norm));
            let prod: C = pairs.iter().map(|p| p.value).product();
            let d = det(&a);
            assert!((prod - d).norm() <= 1e-8 * d.norm().max(1e-300) + 1e-12);
        }
    }

    #[test]
    fn bound_state_below_band() {
        let b = LatticeBox::centered_1d(101).unwrap();
        let p = PotentialSpec::table([(vec![0], c(-3.0, 0.0))]).unwrap();
        let e = eig_hermitian(&assemble(&b, &p, AssemblyLimits::default()).unwrap()).unwrap();
        assert!(e.values[0] < -2.0);
        assert!(e.values[1] > -2.0);
    }

    #[test]
    fn top_eigenpair_matches_full_solver() {
        for seed in 0..10 {
            let r = random_matrix(7, seed);
            let h = (&r + &r.t().mapv(|z| z.conj())) * c(0.5, 0.0);
            let full = eig_hermitian_array(&h).unwrap();
            let (top, v) = hermitian_top_eigenpair(&h);
            assert!((top - full.values[6]).abs() < 1e-12);
            assert!(residual(&h, c(top, 0.0), &v) < 1e-10);
        }
        let t = HermitianTridiagonal {
            diag: vec![0.0, 1.0, -1.0],
            off: vec![c(0.0, 1.0), c(1.0, 1.0)],
        };
        let (top, v) = t.top_eigenpair();
        let tv = t.matvec(&v);
        let r: f64 = tv.iter().zip(&v).map(|(a, b)| (a - top * b).norm_sqr()).sum::<f64>().sqrt();
        assert!(r < 1e-12);
    }

    #[test]
    fn real_top_eigenpair_matches_full_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 3, 9, 30] {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let x = rng.random_range(-1.0..1.0);
                    a[i * n + j] = x;
                    a[j * n + i] = x;
                }
            }
            let h = Array2::from_shape_fn((n, n), |(i, j)| c(a[i * n + j], 0.0));
            let full = eig_hermitian_array(&h).unwrap();
            let (top, v) = real_symmetric_top_eigenpair(&a, n);
            assert!((top - full.values[n - 1]).abs() < 1e-12, "n = {n}");
            let cv: Vec<C> = v.iter().map(|&x| c(x, 0.0)).collect();
            assert!(residual(&h, c(top, 0.0), &cv) < 1e-10, "n = {n}");
            assert!((norm2(&cv) - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn hermitian_contract(seed in any::<u64>(), n in 1usize..12) {
            let r = random_matrix(n, seed);
            let h = (&r + &r.t().mapv(|z| z.conj())) * c(0.5, 0.0);
            let a = op(h);
            let e = eig_hermitian(&a).unwrap();
            for w in e.values.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            for m in 0..n {
                for k in m + 1..n {
                    let x = e.vectors.column(m).to_vec();
                    let y = e.vectors.column(k).to_vec();
                    prop_assert!(inner(&x, &y).norm() <= 1e-10);
                }
            }
            let tr: f64 = (0..n).map(|i| a.entries()[[i, i]].re).sum();
            prop_assert!((tr - e.values.iter().sum::<f64>()).abs() <= 1e-8 * (1.0 + a.frobenius_norm()));
        }

        #[test]
        fn parts_have_real_spectra(seed in any::<u64>(), n in 1usize..8) {
            let a = op(random_matrix(n, seed));
            for part in [a.real_part(), a.imag_part()] {
                let e = eig_hermitian(&part).unwrap();
                prop_assert!(e.values.iter().all(|v| v.is_finite()));
            }
        }

        #[test]
        fn general_contract(seed in any::<u64>(), n in 1usize..16) {
            let a = random_matrix(n, seed);
            let norm = frobenius(&a);
            let pairs = eig_general_with(&a, DEFAULT_TOL_EIG).unwrap();
            prop_assert_eq!(pairs.len(), n);
            let tr: C = (0..n).map(|i| a[[i, i]]).sum();
            let sum: C = pairs.iter().map(|p| p.value).sum();
            prop_assert!((tr - sum).norm() <= 1e-8 * (1.0 + norm));
        }
    }
}
