//! Transfer recursion for `u(n−1) + d(n)u(n) + u(n+1) = λu(n)` on ℤ.

use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::potential::PotentialSpec;

type C = Complex64;

const OVERFLOW: f64 = 1e300;
const RESCALE: f64 = 1e150;
pub const DEFAULT_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OneDimError {
    #[error("potential is not one-dimensional")]
    NotOneDimensional,
    #[error("range [{lo}, {hi}] must contain the anchor pair ({anchor}, {anchor}+1)")]
    BadRange { lo: i64, hi: i64, anchor: i64 },
    #[error("|u| exceeded 1e300 at site {site} (non-l² growth)")]
    Overflow { site: i64 },
    #[error("band regime: no decaying solution at λ = {re}+{im}i, shooting inapplicable")]
    BandRegime { re: f64, im: f64 },
    #[error("potential carries no certificate that it decays to zero")]
    NoDecay,
}

/// Values `u(n)·exp(log_scale(n))` on `[n_lo, n_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrace {
    pub n_lo: i64,
    pub n_hi: i64,
    pub values: Vec<C>,
    pub log_scale: Vec<f64>,
    pub lambda: C,
    pub anchor: i64,
    pub seed: (C, C),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuation {
    Ok,
    /// `u(m)` and `u(m+1)` vanish although the trace does not.
    ForcedZero(i64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingResult {
    pub compatible: bool,
    /// Normalised Wronskian of the two inward solutions.
    pub mismatch: f64,
    /// Decaying root of `r + 1/r = λ`.
    pub ratio: C,
}

fn check_1d(potential: &PotentialSpec) -> Result<(), OneDimError> {
    match potential.dimension() {
        Some(1) | None => Ok(()),
        Some(_) => Err(OneDimError::NotOneDimensional),
    }
}

fn run(
    potential: &PotentialSpec,
    lambda: C,
    seed: (C, C),
    anchor: i64,
    range: (i64, i64),
    normalized: bool,
) -> Result<SolutionTrace, OneDimError> {
    check_1d(potential)?;
    let (lo, hi) = range;
    if !(lo <= anchor && anchor < hi) {
        return Err(OneDimError::BadRange { lo, hi, anchor });
    }
    let len = (hi - lo + 1) as usize;
    let mut values = vec![C::new(0.0, 0.0); len];
    let mut log_scale = vec![0.0; len];
    let at = |n: i64| (n - lo) as usize;
    values[at(anchor)] = seed.0;
    values[at(anchor + 1)] = seed.1;

    // forward
    let (mut prev, mut cur, mut ls) = (seed.0, seed.1, 0.0);
    for n in anchor + 1..hi {
        let next = (lambda - potential.value(&[n])) * cur - prev;
        (prev, cur) = (cur, next);
        if normalized && cur.norm().max(prev.norm()) > RESCALE {
            let s = cur.norm().max(prev.norm());
            prev /= s;
            cur /= s;
            ls += s.ln();
        } else if !normalized && !(cur.norm() <= OVERFLOW) {
            return Err(OneDimError::Overflow { site: n + 1 });
        }
        values[at(n + 1)] = cur;
        log_scale[at(n + 1)] = ls;
    }
    // backward
    let (mut next, mut cur, mut ls) = (seed.1, seed.0, 0.0);
    for n in (lo + 1..=anchor).rev() {
        let prev = (lambda - potential.value(&[n])) * cur - next;
        (next, cur) = (cur, prev);
        if normalized && cur.norm().max(next.norm()) > RESCALE {
            let s = cur.norm().max(next.norm());
            next /= s;
            cur /= s;
            ls += s.ln();
        } else if !normalized && !(cur.norm() <= OVERFLOW) {
            return Err(OneDimError::Overflow { site: n - 1 });
        }
        values[at(n - 1)] = cur;
        log_scale[at(n - 1)] = ls;
    }
    Ok(SolutionTrace {
        n_lo: lo,
        n_hi: hi,
        values,
        log_scale,
        lambda,
        anchor,
        seed,
    })
}

/// Extends the seed `(u(n0), u(n0+1))` over `range` by the exact recurrence.
pub fn propagate(
    potential: &PotentialSpec,
    lambda: C,
    seed: (C, C),
    anchor: i64,
    range: (i64, i64),
) -> Result<SolutionTrace, OneDimError> {
    run(potential, lambda, seed, anchor, range, false)
}

/// As [`propagate`], rescaling whenever `|u|` passes 1e150.
pub fn propagate_normalized(
    potential: &PotentialSpec,
    lambda: C,
    seed: (C, C),
    anchor: i64,
    range: (i64, i64),
) -> Result<SolutionTrace, OneDimError> {
    run(potential, lambda, seed, anchor, range, true)
}

impl SolutionTrace {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `u(n)` with the log-scale applied.
    pub fn value(&self, n: i64) -> C {
        let i = (n - self.n_lo) as usize;
        self.values[i] * self.log_scale[i].exp()
    }

    /// `ln|u(n)|`, `-∞` at zeros.
    fn log_abs(&self, i: usize) -> f64 {
        self.values[i].norm().ln() + self.log_scale[i]
    }

    /// Largest `|u(m−1) + d(m)u(m) + u(m+1) − λu(m)|` over interior sites,
    /// relative to `max|u|` and evaluated in the local scale.
    pub fn recurrence_residual(&self, potential: &PotentialSpec) -> f64 {
        let top = (0..self.len()).map(|i| self.log_abs(i)).fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return 0.0;
        }
        (1..self.len().saturating_sub(1))
            .map(|i| {
                let n = self.n_lo + i as i64;
                let base = self.log_scale[i];
                let local = |j: usize| self.values[j] * (self.log_scale[j] - base).exp();
                let r = local(i - 1) + (potential.value(&[n]) - self.lambda) * self.values[i] + local(i + 1);
                r.norm() * (base - top).exp()
            })
            .fold(0.0, f64::max)
    }

    /// CSV with columns `n,u_re,u_im,log_scale`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,u_re,u_im,log_scale\n");
        for (i, (u, s)) in self.values.iter().zip(&self.log_scale).enumerate() {
            let n = self.n_lo + i as i64;
            let _ = writeln!(out, "{n},{:?},{:?},{:?}", u.re, u.im, s);
        }
        out
    }
}

/// Discrete Wronskian `u(n+1)v(n) − u(n)v(n+1)`.
pub fn wronskian(u: &SolutionTrace, v: &SolutionTrace, n: i64) -> C {
    u.value(n + 1) * v.value(n) - u.value(n) * v.value(n + 1)
}

pub fn unique_continuation_check(trace: &SolutionTrace) -> Continuation {
    let logs: Vec<f64> = (0..trace.len()).map(|i| trace.log_abs(i)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Continuation::Ok;
    }
    let cut = top + 1e-13f64.ln();
    for i in 0..logs.len().saturating_sub(1) {
        if logs[i] <= cut && logs[i + 1] <= cut {
            return Continuation::ForcedZero(trace.n_lo + i as i64);
        }
    }
    Continuation::Ok
}

/// Root of `r + 1/r = λ` with `|r| < 1`, or `None` in the band.
pub fn decaying_ratio(lambda: C) -> Option<C> {
    let disc = (lambda * lambda - 4.0).sqrt();
    let r1 = (lambda - disc) * 0.5;
    let r2 = (lambda + disc) * 0.5;
    let r = if r1.norm() <= r2.norm() { r1 } else { r2 };
    (r.norm() < 1.0 - 1e-12).then_some(r)
}

/// Matches the solutions decaying at `+∞` and `−∞`, started at `±window`
/// from the free-tail ratio, through their Wronskian at `(0, 1)`.
pub fn shooting_l2_test(
    potential: &PotentialSpec,
    lambda: C,
    window: i64,
    match_tol: f64,
) -> Result<ShootingResult, OneDimError> {
    check_1d(potential)?;
    if !potential.tail().tends_to_zero() {
        return Err(OneDimError::NoDecay);
    }
    let r = decaying_ratio(lambda).ok_or(OneDimError::BandRegime {
        re: lambda.re,
        im: lambda.im,
    })?;
    let n = window.max(2);
    let one = C::new(1.0, 0.0);
    let right = propagate_normalized(potential, lambda, (one, r), n, (0, n + 1))?;
    let left = propagate_normalized(potential, lambda, (r, one), -n - 1, (-n - 1, 1))?;
    let pick = |t: &SolutionTrace, m: i64| {
        let i = (m - t.n_lo) as usize;
        (t.values[i], t.log_scale[i])
    };
    // bring each pair to a common scale before forming the Wronskian
    let pair = |t: &SolutionTrace| {
        let (u0, s0) = pick(t, 0);
        let (u1, s1) = pick(t, 1);
        let s = s0.max(s1);
        (u0 * (s0 - s).exp(), u1 * (s1 - s).exp())
    };
    let (p0, p1) = pair(&right);
    let (m0, m1) = pair(&left);
    let w = p0 * m1 - p1 * m0;
    let norm = (p0.norm_sqr() + p1.norm_sqr()).sqrt() * (m0.norm_sqr() + m1.norm_sqr()).sqrt();
    let mismatch = if norm > 0.0 { w.norm() / norm } else { f64::INFINITY };
    Ok(ShootingResult {
        compatible: mismatch <= match_tol,
        mismatch,
        ratio: r,
    })
}
