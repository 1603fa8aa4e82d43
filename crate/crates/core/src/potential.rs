//! Complex potentials `d: ℤ^ν → ℂ`.
//!
//! Every [`PotentialSpec`] can be evaluated at any lattice site and carries a
//! [`Tail`] description: beyond `‖k‖₁ ≥ ρ` the values stay within
//! `envelope(ρ)` of a finite set of centre values. The envelope is what turns
//! statements about all of ℤ^ν into finite checks.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{l1_norm, LatticeBox, Site};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("unknown potential kind `{0}`")]
    UnknownKind(String),
    #[error("params.{path}: {message}")]
    Params { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("potential is defined on ν = {potential} but the box has ν = {lattice}")]
    DimensionMismatch { potential: usize, lattice: usize },
    #[error("declared decay certificate is not implied by the potential: {0}")]
    InconsistentDecay(String),
}

/// How the potential is built.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// Explicit values; `d ≡ 0` off the table.
    Table(BTreeMap<Site, Complex64>),
    Constant(Complex64),
    /// `amplitude / (1 + ‖k‖₁^exponent)`
    DecayPower { amplitude: Complex64, exponent: f64 },
    /// `amplitude · ratio^‖k‖₁`
    DecayGeometric { amplitude: Complex64, ratio: f64 },
    /// Purely imaginary period-2 pattern: `i·b1` on even sites, `i·b2` on odd.
    Alternating1D { b1: f64, b2: f64 },
    /// Uniform random values on `region`, zero elsewhere. Values are a pure
    /// function of `(seed, site)`.
    SeededRandom {
        seed: u64,
        region: LatticeBox,
        re_range: (f64, f64),
        im_range: (f64, f64),
    },
    /// `value` where `k_axis ≤ cut`, zero elsewhere.
    HalfSpace { axis: usize, cut: i64, value: Complex64 },
    Sum(Vec<PotentialSpec>),
    /// Pointwise product.
    Product(Vec<PotentialSpec>),
}

/// Declared decay metadata. It is checked against the kind on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DecayCertificate {
    /// `d(k) = 0` whenever `‖k‖₁ > radius`.
    VanishesOutsideRadius(u64),
    /// `|d(k)| ≤ g(‖k‖₁)` with `g(ρ) = scale/(1+ρ^exponent)` or `scale·ratio^ρ`.
    MonotoneBound(MonotoneBound),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotoneBound {
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

impl MonotoneBound {
    fn envelope(&self) -> Result<Envelope, PotentialError> {
        match (self.exponent, self.ratio) {
            (Some(p), None) if p > 0.0 => Ok(Envelope::Power {
                scale: self.scale,
                exponent: p,
            }),
            (None, Some(r)) if r.abs() < 1.0 => Ok(Envelope::Geometric {
                scale: self.scale,
                ratio: r.abs(),
            }),
            _ => Err(PotentialError::InconsistentDecay(
                "monotone_bound needs exactly one of exponent > 0 or |ratio| < 1".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential", into = "RawPotential")]
pub struct PotentialSpec {
    kind: PotentialKind,
    decay: Option<DecayCertificate>,
}

/// Upper bound on `|d(k) − c|` for the nearest centre `c`, valid for all `k`
/// with `‖k‖₁ ≥ ρ`. Every variant is non-increasing in `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    /// `scale` up to `radius`, zero beyond it.
    Vanishes { radius: u64, scale: f64 },
    Power { scale: f64, exponent: f64 },
    Geometric { scale: f64, ratio: f64 },
    Constant(f64),
    Sum(Vec<Envelope>),
    Product(Vec<Envelope>),
}

impl Envelope {
    pub fn at(&self, rho: u64) -> f64 {
        match self {
            Envelope::Vanishes { radius, scale } => {
                if rho > *radius {
                    0.0
                } else {
                    *scale
                }
            }
            Envelope::Power { scale, exponent } => scale / (1.0 + (rho as f64).powf(*exponent)),
            Envelope::Geometric { scale, ratio } => scale * ratio.powf(rho as f64),
            Envelope::Constant(c) => *c,
            Envelope::Sum(parts) => parts.iter().map(|e| e.at(rho)).sum(),
            Envelope::Product(parts) => parts.iter().map(|e| e.at(rho)).product(),
        }
    }

    /// Polynomial decay order; `f64::INFINITY` for compactly supported or
    /// geometric envelopes, `0` for envelopes that do not decay.
    pub fn decay_order(&self) -> f64 {
        match self {
            Envelope::Vanishes { .. } | Envelope::Geometric { .. } => f64::INFINITY,
            Envelope::Power { scale, exponent } => {
                if *scale == 0.0 {
                    f64::INFINITY
                } else {
                    *exponent
                }
            }
            Envelope::Constant(c) => {
                if *c == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Envelope::Sum(parts) => parts
                .iter()
                .map(Envelope::decay_order)
                .fold(f64::INFINITY, f64::min),
            Envelope::Product(parts) => parts.iter().map(Envelope::decay_order).sum(),
        }
    }

    pub fn decays(&self) -> bool {
        self.decay_order() > 0.0
    }

    /// Smallest radius `ρ*` with `envelope(ρ) < below` for every `ρ ≥ ρ*`.
    pub fn cutoff(&self, below: f64) -> Option<u64> {
        if below <= 0.0 {
            return None;
        }
        if self.at(0) < below {
            return Some(0);
        }
        if !self.decays() {
            return None;
        }
        let mut hi = 1u64;
        while self.at(hi) >= below {
            if hi >= 1 << 50 {
                return None;
            }
            hi *= 2;
        }
        let mut lo = hi / 2;
        // invariant: at(lo) >= below > at(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.at(mid) < below {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }
}

/// Off-box behaviour of a potential: for `‖k‖₁ ≥ ρ`,
/// `min_c |d(k) − c| ≤ envelope(ρ)` over `c ∈ centers`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tail {
    pub centers: Vec<Complex64>,
    pub envelope: Envelope,
}

impl Tail {
    /// Tail certificate that `d(k) → 0` as `‖k‖₁ → ∞`.
    pub fn tends_to_zero(&self) -> bool {
        self.centers.iter().all(|c| *c == Complex64::new(0.0, 0.0)) && self.envelope.decays()
    }

    /// Imaginary parts of the centre values, sorted and deduplicated.
    pub fn im_centers(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.centers.iter().map(|c| c.im).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn re_centers(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.centers.iter().map(|c| c.re).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// Direction along a lattice axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> i64 {
        match self {
            Side::Plus => 1,
            Side::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Region {
    Ball,
    Side { axis: usize, side: Side },
}

/// Closed axis-aligned rectangle in ℂ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Rect {
    pub fn point(z: Complex64) -> Self {
        Rect {
            re: (z.re, z.re),
            im: (z.im, z.im),
        }
    }

    pub fn of_points(points: impl IntoIterator<Item = Complex64>) -> Option<Self> {
        points.into_iter().map(Rect::point).reduce(|a, b| a.union(&b))
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            re: (self.re.0.min(other.re.0), self.re.1.max(other.re.1)),
            im: (self.im.0.min(other.im.0), self.im.1.max(other.im.1)),
        }
    }

    fn minkowski_sum(&self, other: &Rect) -> Rect {
        Rect {
            re: (self.re.0 + other.re.0, self.re.1 + other.re.1),
            im: (self.im.0 + other.im.0, self.im.1 + other.im.1),
        }
    }

    fn product(&self, other: &Rect) -> Rect {
        let re = interval_sub(interval_mul(self.re, other.re), interval_mul(self.im, other.im));
        let im = interval_add(interval_mul(self.re, other.im), interval_mul(self.im, other.re));
        Rect { re, im }
    }

    pub fn max_abs(&self) -> f64 {
        let re = self.re.0.abs().max(self.re.1.abs());
        let im = self.im.0.abs().max(self.im.1.abs());
        re.hypot(im)
    }
}

fn interval_mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let c = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        c.iter().copied().fold(f64::INFINITY, f64::min),
        c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn interval_add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

fn interval_sub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 - b.1, a.1 - b.0)
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const MAX_TAIL_CENTERS: usize = 256;

impl PotentialSpec {
    pub fn new(kind: PotentialKind) -> Result<Self, PotentialError> {
        validate_kind(&kind)?;
        Ok(Self { kind, decay: None })
    }

    /// Attaches declared decay metadata after checking it against the kind.
    pub fn with_decay(mut self, decay: DecayCertificate) -> Result<Self, PotentialError> {
        check_decay(&self, &decay)?;
        self.decay = Some(decay);
        Ok(self)
    }

    pub fn table(entries: impl IntoIterator<Item = (Site, Complex64)>) -> Result<Self, PotentialError> {
        Self::new(PotentialKind::Table(entries.into_iter().collect()))
    }

    pub fn constant(c: Complex64) -> Self {
        Self {
            kind: PotentialKind::Constant(c),
            decay: None,
        }
    }

    pub fn zero() -> Self {
        Self::constant(ZERO)
    }

    pub fn decay_power(amplitude: Complex64, exponent: f64) -> Result<Self, PotentialError> {
        Self::new(PotentialKind::DecayPower { amplitude, exponent })
    }

    pub fn decay_geometric(amplitude: Complex64, ratio: f64) -> Result<Self, PotentialError> {
        Self::new(PotentialKind::DecayGeometric { amplitude, ratio })
    }

    pub fn alternating(b1: f64, b2: f64) -> Result<Self, PotentialError> {
        Self::new(PotentialKind::Alternating1D { b1, b2 })
    }

    pub fn half_space(axis: usize, cut: i64, value: Complex64) -> Result<Self, PotentialError> {
        Self::new(PotentialKind::HalfSpace { axis, cut, value })
    }

    pub fn seeded_random(
        seed: u64,
        region: LatticeBox,
        re_range: (f64, f64),
        im_range: (f64, f64),
    ) -> Result<Self, PotentialError> {
        Self::new(PotentialKind::SeededRandom {
            seed,
            region,
            re_range,
            im_range,
        })
    }

    pub fn sum(terms: Vec<PotentialSpec>) -> Result<Self, PotentialError> {
        Self::new(PotentialKind::Sum(terms))
    }

    pub fn product(factors: Vec<PotentialSpec>) -> Result<Self, PotentialError> {
        Self::new(PotentialKind::Product(factors))
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn decay(&self) -> Option<&DecayCertificate> {
        self.decay.as_ref()
    }

    /// The lattice dimension this potential is tied to, if any.
    pub fn dimension(&self) -> Option<usize> {
        kind_dimension(&self.kind).ok().flatten()
    }

    pub fn check_dimension(&self, nu: usize) -> Result<(), PotentialError> {
        match self.dimension() {
            Some(p) if p != nu => Err(PotentialError::DimensionMismatch {
                potential: p,
                lattice: nu,
            }),
            _ => match max_axis(&self.kind) {
                Some(a) if a >= nu => Err(PotentialError::Invalid(format!(
                    "half-space axis {a} does not exist for ν = {nu}"
                ))),
                _ => Ok(()),
            },
        }
    }

    pub fn value(&self, site: &[i64]) -> Complex64 {
        match &self.kind {
            PotentialKind::Table(t) => t.get(site).copied().unwrap_or(ZERO),
            PotentialKind::Constant(c) => *c,
            PotentialKind::DecayPower { amplitude, exponent } => {
                amplitude / (1.0 + (l1_norm(site) as f64).powf(*exponent))
            }
            PotentialKind::DecayGeometric { amplitude, ratio } => {
                amplitude * geometric_power(*ratio, l1_norm(site))
            }
            PotentialKind::Alternating1D { b1, b2 } => {
                if site[0].rem_euclid(2) == 0 {
                    Complex64::new(0.0, *b1)
                } else {
                    Complex64::new(0.0, *b2)
                }
            }
            PotentialKind::SeededRandom {
                seed,
                region,
                re_range,
                im_range,
            } => {
                if !region.contains(site) {
                    return ZERO;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(site_key(site));
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                Complex64::new(
                    re_range.0 + (re_range.1 - re_range.0) * u,
                    im_range.0 + (im_range.1 - im_range.0) * v,
                )
            }
            PotentialKind::HalfSpace { axis, cut, value } => {
                if site.get(*axis).is_some_and(|k| k <= cut) {
                    *value
                } else {
                    ZERO
                }
            }
            PotentialKind::Sum(terms) => terms.iter().map(|t| t.value(site)).sum(),
            PotentialKind::Product(factors) => factors.iter().map(|t| t.value(site)).product(),
        }
    }

    /// Off-box tail certificate derived from the kind.
    pub fn tail(&self) -> Tail {
        self.tail_in(Region::Ball)
    }

    /// Tail on the half-space `side·k_axis ≥ ρ`, with the envelope indexed by
    /// `ρ` instead of `‖k‖₁`. Since `‖k‖₁ ≥ side·k_axis`, radial decay carries
    /// over unchanged.
    pub fn tail_on_side(&self, axis: usize, side: Side) -> Tail {
        self.tail_in(Region::Side { axis, side })
    }

    fn tail_in(&self, region: Region) -> Tail {
        // largest coordinate reach of a finite set in the region's direction
        let reach = |k: &[i64]| match region {
            Region::Ball => l1_norm(k),
            Region::Side { axis, side } => k.get(axis).map_or(0, |&x| (side.sign() * x).max(0) as u64),
        };
        match &self.kind {
            PotentialKind::Table(t) => Tail {
                centers: vec![ZERO],
                envelope: Envelope::Vanishes {
                    radius: t.keys().map(|k| reach(k)).max().unwrap_or(0),
                    scale: t.values().map(|v| v.norm()).fold(0.0, f64::max),
                },
            },
            PotentialKind::Constant(c) => Tail {
                centers: vec![*c],
                envelope: Envelope::Constant(0.0),
            },
            PotentialKind::DecayPower { amplitude, exponent } => Tail {
                centers: vec![ZERO],
                envelope: Envelope::Power {
                    scale: amplitude.norm(),
                    exponent: *exponent,
                },
            },
            PotentialKind::DecayGeometric { amplitude, ratio } => Tail {
                centers: vec![ZERO],
                envelope: Envelope::Geometric {
                    scale: amplitude.norm(),
                    ratio: ratio.abs(),
                },
            },
            PotentialKind::Alternating1D { b1, b2 } => {
                let mut centers = vec![Complex64::new(0.0, *b1)];
                if b2 != b1 {
                    centers.push(Complex64::new(0.0, *b2));
                }
                Tail {
                    centers,
                    envelope: Envelope::Constant(0.0),
                }
            }
            PotentialKind::SeededRandom {
                region: boxed,
                re_range,
                im_range,
                ..
            } => {
                let radius = match region {
                    Region::Ball => boxed.max_l1(),
                    Region::Side { axis, side } => boxed
                        .ranges()
                        .get(axis)
                        .map_or(0, |&(lo, hi)| (side.sign() * lo).max(side.sign() * hi).max(0) as u64),
                };
                Tail {
                    centers: vec![ZERO],
                    envelope: Envelope::Vanishes {
                        radius,
                        scale: Rect {
                            re: *re_range,
                            im: *im_range,
                        }
                        .max_abs(),
                    },
                }
            }
            PotentialKind::HalfSpace { axis, cut, value } => match region {
                Region::Side { axis: a, side } if a == *axis => match side {
                    // k ≥ ρ lies beyond the cut once ρ > cut
                    Side::Plus => Tail {
                        centers: vec![ZERO],
                        envelope: Envelope::Vanishes {
                            radius: (*cut).max(0) as u64,
                            scale: value.norm(),
                        },
                    },
                    // k ≤ −ρ lies inside once ρ ≥ −cut
                    Side::Minus => Tail {
                        centers: vec![*value],
                        envelope: Envelope::Vanishes {
                            radius: (-cut - 1).max(0) as u64,
                            scale: value.norm(),
                        },
                    },
                },
                _ => Tail {
                    centers: if *value == ZERO { vec![ZERO] } else { vec![ZERO, *value] },
                    envelope: Envelope::Constant(0.0),
                },
            },
            PotentialKind::Sum(terms) => {
                let tails: Vec<Tail> = terms.iter().map(|t| t.tail_in(region)).collect();
                let mut centers = vec![ZERO];
                for t in &tails {
                    centers = combine_centers(&centers, &t.centers, |a, b| a + b);
                }
                Tail {
                    centers,
                    envelope: Envelope::Sum(tails.into_iter().map(|t| t.envelope).collect()),
                }
            }
            PotentialKind::Product(factors) => {
                // Π d_i − Π c_i = Σ_i (Π_{j<i} c_j)(d_i − c_i)(Π_{j>i} d_j)
                let tails: Vec<Tail> = factors.iter().map(|t| t.tail_in(region)).collect();
                let sups: Vec<f64> = factors.iter().map(PotentialSpec::sup_abs).collect();
                let mut centers = vec![Complex64::new(1.0, 0.0)];
                for t in &tails {
                    centers = combine_centers(&centers, &t.centers, |a, b| a * b);
                }
                let terms = (0..tails.len())
                    .map(|i| {
                        let before: f64 = tails[..i]
                            .iter()
                            .map(|t| t.centers.iter().map(|c| c.norm()).fold(0.0, f64::max))
                            .product();
                        let after: f64 = sups[i + 1..].iter().product();
                        Envelope::Product(vec![
                            Envelope::Constant(before * after),
                            tails[i].envelope.clone(),
                        ])
                    })
                    .collect();
                Tail {
                    centers,
                    envelope: Envelope::Sum(terms),
                }
            }
        }
    }

    /// Rectangle containing the closure of `{d(k) : ‖k‖₁ ≥ rho}`.
    pub fn value_rect_beyond(&self, rho: u64) -> Rect {
        match &self.kind {
            PotentialKind::Table(t) => {
                let far = t.iter().filter(|(k, _)| l1_norm(k) >= rho).map(|(_, v)| *v);
                Rect::of_points(std::iter::once(ZERO).chain(far)).expect("nonempty")
            }
            PotentialKind::Constant(c) => Rect::point(*c),
            PotentialKind::DecayPower { amplitude, exponent } => {
                let s = 1.0 / (1.0 + (rho as f64).powf(*exponent));
                Rect::point(ZERO).union(&Rect::point(amplitude * s))
            }
            PotentialKind::DecayGeometric { amplitude, ratio } => {
                let a = amplitude * geometric_power(*ratio, rho);
                let b = amplitude * geometric_power(*ratio, rho + 1);
                Rect::of_points([ZERO, a, b]).expect("nonempty")
            }
            PotentialKind::Alternating1D { b1, b2 } => {
                Rect::of_points([Complex64::new(0.0, *b1), Complex64::new(0.0, *b2)]).expect("nonempty")
            }
            PotentialKind::SeededRandom {
                region,
                re_range,
                im_range,
                ..
            } => {
                let zero = Rect::point(ZERO);
                if region.max_l1() >= rho {
                    zero.union(&Rect {
                        re: *re_range,
                        im: *im_range,
                    })
                } else {
                    zero
                }
            }
            PotentialKind::HalfSpace { value, .. } => Rect::of_points([ZERO, *value]).expect("nonempty"),
            PotentialKind::Sum(terms) => terms
                .iter()
                .map(|t| t.value_rect_beyond(rho))
                .reduce(|a, b| a.minkowski_sum(&b))
                .expect("validated nonempty"),
            PotentialKind::Product(factors) => factors
                .iter()
                .map(|t| t.value_rect_beyond(rho))
                .reduce(|a, b| a.product(&b))
                .expect("validated nonempty"),
        }
    }

    /// Upper bound on `sup_k |d(k)|`.
    pub fn sup_abs(&self) -> f64 {
        self.value_rect_beyond(0).max_abs()
    }

    /// `Im d ≡ 0` by construction.
    pub fn is_real_valued(&self) -> bool {
        match &self.kind {
            PotentialKind::Table(t) => t.values().all(|v| v.im == 0.0),
            PotentialKind::Constant(c) => c.im == 0.0,
            PotentialKind::DecayPower { amplitude, .. }
            | PotentialKind::DecayGeometric { amplitude, .. } => amplitude.im == 0.0,
            PotentialKind::Alternating1D { b1, b2 } => *b1 == 0.0 && *b2 == 0.0,
            PotentialKind::SeededRandom { im_range, .. } => im_range.0 == 0.0 && im_range.1 == 0.0,
            PotentialKind::HalfSpace { value, .. } => value.im == 0.0,
            PotentialKind::Sum(terms) => terms.iter().all(PotentialSpec::is_real_valued),
            PotentialKind::Product(factors) => factors.iter().all(PotentialSpec::is_real_valued),
        }
    }

    /// Same potential with every `SeededRandom` seed mixed with `offset`.
    /// An offset of zero returns an identical spec.
    pub fn with_seed_offset(&self, offset: u64) -> PotentialSpec {
        if offset == 0 {
            return self.clone();
        }
        let kind = match &self.kind {
            PotentialKind::SeededRandom {
                seed,
                region,
                re_range,
                im_range,
            } => PotentialKind::SeededRandom {
                seed: splitmix64(seed ^ splitmix64(offset)),
                region: region.clone(),
                re_range: *re_range,
                im_range: *im_range,
            },
            PotentialKind::Sum(terms) => {
                PotentialKind::Sum(terms.iter().map(|t| t.with_seed_offset(offset)).collect())
            }
            PotentialKind::Product(factors) => {
                PotentialKind::Product(factors.iter().map(|t| t.with_seed_offset(offset)).collect())
            }
            other => other.clone(),
        };
        PotentialSpec {
            kind,
            decay: self.decay.clone(),
        }
    }
}

fn combine_centers(
    a: &[Complex64],
    b: &[Complex64],
    op: impl Fn(Complex64, Complex64) -> Complex64,
) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            let z = op(*x, *y);
            if !out.contains(&z) {
                out.push(z);
            }
        }
    }
    out.truncate(MAX_TAIL_CENTERS.max(1));
    out
}

fn geometric_power(ratio: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(n) => ratio.powi(n),
        Err(_) => 0.0,
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream id for the counter-based generator; independent of evaluation order.
fn site_key(site: &[i64]) -> u64 {
    site.iter()
        .fold(0x243F_6A88_85A3_08D3u64, |h, &k| splitmix64(h ^ k as u64))
}

fn kind_dimension(kind: &PotentialKind) -> Result<Option<usize>, PotentialError> {
    let merge = |acc: Option<usize>, d: Option<usize>| -> Result<Option<usize>, PotentialError> {
        match (acc, d) {
            (Some(a), Some(b)) if a != b => Err(PotentialError::Invalid(format!(
                "terms disagree on lattice dimension ({a} vs {b})"
            ))),
            (Some(a), _) => Ok(Some(a)),
            (None, d) => Ok(d),
        }
    };
    match kind {
        PotentialKind::Table(t) => {
            let mut dim = None;
            for k in t.keys() {
                dim = merge(dim, Some(k.len()))?;
            }
            Ok(dim)
        }
        PotentialKind::Alternating1D { .. } => Ok(Some(1)),
        PotentialKind::SeededRandom { region, .. } => Ok(Some(region.nu())),
        PotentialKind::Sum(ts) | PotentialKind::Product(ts) => {
            let mut dim = None;
            for t in ts {
                dim = merge(dim, kind_dimension(&t.kind)?)?;
            }
            Ok(dim)
        }
        _ => Ok(None),
    }
}

fn max_axis(kind: &PotentialKind) -> Option<usize> {
    match kind {
        PotentialKind::HalfSpace { axis, .. } => Some(*axis),
        PotentialKind::Sum(ts) | PotentialKind::Product(ts) => ts.iter().filter_map(|t| max_axis(&t.kind)).max(),
        _ => None,
    }
}

fn finite(z: Complex64, what: &str) -> Result<(), PotentialError> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(PotentialError::Invalid(format!("{what} must be finite")))
    }
}

fn validate_kind(kind: &PotentialKind) -> Result<(), PotentialError> {
    match kind {
        PotentialKind::Table(t) => {
            for (k, v) in t {
                if k.is_empty() {
                    return Err(PotentialError::Invalid("table site with no coordinates".into()));
                }
                finite(*v, "table value")?;
            }
        }
        PotentialKind::Constant(c) => finite(*c, "constant")?,
        PotentialKind::DecayPower { amplitude, exponent } => {
            finite(*amplitude, "amplitude")?;
            if !(exponent.is_finite() && *exponent > 0.0) {
                return Err(PotentialError::Invalid(format!(
                    "decay exponent must be positive, got {exponent}"
                )));
            }
        }
        PotentialKind::DecayGeometric { amplitude, ratio } => {
            finite(*amplitude, "amplitude")?;
            if !(ratio.abs() < 1.0) {
                return Err(PotentialError::Invalid(format!(
                    "geometric ratio must satisfy |r| < 1, got {ratio}"
                )));
            }
        }
        PotentialKind::Alternating1D { b1, b2 } => {
            finite(Complex64::new(*b1, *b2), "alternating values")?;
        }
        PotentialKind::SeededRandom {
            re_range, im_range, ..
        } => {
            for (name, (lo, hi)) in [("re_range", re_range), ("im_range", im_range)] {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(PotentialError::Invalid(format!(
                        "{name} must be a finite interval lo <= hi"
                    )));
                }
            }
        }
        PotentialKind::HalfSpace { value, .. } => finite(*value, "half-space value")?,
        PotentialKind::Sum(ts) | PotentialKind::Product(ts) => {
            if ts.is_empty() {
                return Err(PotentialError::Invalid("sum/product needs at least one term".into()));
            }
        }
    }
    kind_dimension(kind).map(|_| ())
}

fn check_decay(spec: &PotentialSpec, decay: &DecayCertificate) -> Result<(), PotentialError> {
    let tail = spec.tail();
    if !tail.centers.iter().all(|c| *c == ZERO) {
        return Err(PotentialError::InconsistentDecay(
            "potential does not tend to zero".into(),
        ));
    }
    match decay {
        DecayCertificate::VanishesOutsideRadius(r) => {
            let beyond = spec.value_rect_beyond(r + 1);
            if beyond.max_abs() != 0.0 {
                return Err(PotentialError::InconsistentDecay(format!(
                    "potential is nonzero beyond radius {r}"
                )));
            }
        }
        DecayCertificate::MonotoneBound(m) => {
            let g = m.envelope()?;
            if g.decay_order() > tail.envelope.decay_order() {
                return Err(PotentialError::InconsistentDecay(
                    "declared bound decays faster than the potential".into(),
                ));
            }
            let probes = (0..=64u64).chain((7..=40).map(|e| 1u64 << e));
            for rho in probes {
                let have = spec.value_rect_beyond(rho).max_abs();
                let bound = g.at(rho);
                if have > bound * (1.0 + 1e-12) + 1e-300 {
                    return Err(PotentialError::InconsistentDecay(format!(
                        "|d| reaches {have:e} at radius {rho}, bound gives {bound:e}"
                    )));
                }
            }
        }
    }
    Ok(())
}

// --- JSON representation -----------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    kind: String,
    params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decay: Option<DecayCertificate>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableEntry {
    site: Vec<i64>,
    #[serde(default)]
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableParams {
    entries: Vec<TableEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComplexParams {
    #[serde(default)]
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerParams {
    #[serde(default)]
    re: f64,
    #[serde(default)]
    im: f64,
    exponent: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometricParams {
    #[serde(default)]
    re: f64,
    #[serde(default)]
    im: f64,
    ratio: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlternatingParams {
    b1: f64,
    b2: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomParams {
    seed: u64,
    #[serde(rename = "box")]
    region: LatticeBox,
    re_range: [f64; 2],
    im_range: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfSpaceParams {
    axis: usize,
    cut: i64,
    #[serde(default)]
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SumParams {
    terms: Vec<PotentialSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProductParams {
    factors: Vec<PotentialSpec>,
}

fn parse_params<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, PotentialError> {
    serde_path_to_error::deserialize(value).map_err(|e| PotentialError::Params {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

impl TryFrom<RawPotential> for PotentialSpec {
    type Error = PotentialError;

    fn try_from(raw: RawPotential) -> Result<Self, Self::Error> {
        let kind = match raw.kind.as_str() {
            "table" => {
                let p: TableParams = parse_params(raw.params)?;
                let mut t = BTreeMap::new();
                for e in p.entries {
                    if t.insert(e.site.clone(), Complex64::new(e.re, e.im)).is_some() {
                        return Err(PotentialError::Invalid(format!(
                            "duplicate table site {:?}",
                            e.site
                        )));
                    }
                }
                PotentialKind::Table(t)
            }
            "constant" => {
                let p: ComplexParams = parse_params(raw.params)?;
                PotentialKind::Constant(Complex64::new(p.re, p.im))
            }
            "decay_power" => {
                let p: PowerParams = parse_params(raw.params)?;
                PotentialKind::DecayPower {
                    amplitude: Complex64::new(p.re, p.im),
                    exponent: p.exponent,
                }
            }
            "decay_geometric" => {
                let p: GeometricParams = parse_params(raw.params)?;
                PotentialKind::DecayGeometric {
                    amplitude: Complex64::new(p.re, p.im),
                    ratio: p.ratio,
                }
            }
            "alternating_1d" => {
                let p: AlternatingParams = parse_params(raw.params)?;
                PotentialKind::Alternating1D { b1: p.b1, b2: p.b2 }
            }
            "seeded_random" => {
                let p: RandomParams = parse_params(raw.params)?;
                PotentialKind::SeededRandom {
                    seed: p.seed,
                    region: p.region,
                    re_range: (p.re_range[0], p.re_range[1]),
                    im_range: (p.im_range[0], p.im_range[1]),
                }
            }
            "half_space" => {
                let p: HalfSpaceParams = parse_params(raw.params)?;
                PotentialKind::HalfSpace {
                    axis: p.axis,
                    cut: p.cut,
                    value: Complex64::new(p.re, p.im),
                }
            }
            "sum" => PotentialKind::Sum(parse_params::<SumParams>(raw.params)?.terms),
            "product" => PotentialKind::Product(parse_params::<ProductParams>(raw.params)?.factors),
            other => return Err(PotentialError::UnknownKind(other.to_string())),
        };
        let spec = PotentialSpec::new(kind)?;
        match raw.decay {
            Some(d) => spec.with_decay(d),
            None => Ok(spec),
        }
    }
}

impl From<PotentialSpec> for RawPotential {
    fn from(spec: PotentialSpec) -> Self {
        let to_value = |v: Result<serde_json::Value, serde_json::Error>| v.expect("params serialize");
        let (kind, params) = match spec.kind {
            PotentialKind::Table(t) => (
                "table",
                to_value(serde_json::to_value(TableParams {
                    entries: t
                        .into_iter()
                        .map(|(site, v)| TableEntry {
                            site,
                            re: v.re,
                            im: v.im,
                        })
                        .collect(),
                })),
            ),
            PotentialKind::Constant(c) => (
                "constant",
                to_value(serde_json::to_value(ComplexParams { re: c.re, im: c.im })),
            ),
            PotentialKind::DecayPower { amplitude, exponent } => (
                "decay_power",
                to_value(serde_json::to_value(PowerParams {
                    re: amplitude.re,
                    im: amplitude.im,
                    exponent,
                })),
            ),
            PotentialKind::DecayGeometric { amplitude, ratio } => (
                "decay_geometric",
                to_value(serde_json::to_value(GeometricParams {
                    re: amplitude.re,
                    im: amplitude.im,
                    ratio,
                })),
            ),
            PotentialKind::Alternating1D { b1, b2 } => (
                "alternating_1d",
                to_value(serde_json::to_value(AlternatingParams { b1, b2 })),
            ),
            PotentialKind::SeededRandom {
                seed,
                region,
                re_range,
                im_range,
            } => (
                "seeded_random",
                to_value(serde_json::to_value(RandomParams {
                    seed,
                    region,
                    re_range: [re_range.0, re_range.1],
                    im_range: [im_range.0, im_range.1],
                })),
            ),
            PotentialKind::HalfSpace { axis, cut, value } => (
                "half_space",
                to_value(serde_json::to_value(HalfSpaceParams {
                    axis,
                    cut,
                    re: value.re,
                    im: value.im,
                })),
            ),
            PotentialKind::Sum(terms) => ("sum", to_value(serde_json::to_value(SumParams { terms }))),
            PotentialKind::Product(factors) => (
                "product",
                to_value(serde_json::to_value(ProductParams { factors })),
            ),
        };
        RawPotential {
            kind: kind.to_string(),
            params,
            decay: spec.decay,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn evaluates_each_kind() {
        let t = PotentialSpec::table([(vec![0], c(1.0, 2.0)), (vec![3], c(-1.0, 0.0))]).unwrap();
        assert_eq!(t.value(&[0]), c(1.0, 2.0));
        assert_eq!(t.value(&[1]), c(0.0, 0.0));

        let p = PotentialSpec::decay_power(c(0.0, 1.0), 2.0).unwrap();
        assert_eq!(p.value(&[2]), c(0.0, 0.2));
        assert_eq!(p.value(&[-1, 1]), c(0.0, 0.2));

        let g = PotentialSpec::decay_geometric(c(2.0, 0.0), -0.5).unwrap();
        assert_eq!(g.value(&[3]), c(-0.25, 0.0));

        let a = PotentialSpec::alternating(0.0, 1.0).unwrap();
        assert_eq!(a.value(&[-2]), c(0.0, 0.0));
        assert_eq!(a.value(&[-1]), c(0.0, 1.0));
        assert_eq!(a.value(&[7]), c(0.0, 1.0));

        let s = PotentialSpec::sum(vec![t.clone(), PotentialSpec::constant(c(0.0, 1.0))]).unwrap();
        assert_eq!(s.value(&[0]), c(1.0, 3.0));
        let prod = PotentialSpec::product(vec![a, p]).unwrap();
        assert_eq!(prod.value(&[1]), c(-0.5, 0.0));
    }

    #[test]
    fn seeded_random_is_order_independent() {
        let region = LatticeBox::new(vec![(-3, 3), (-3, 3)]).unwrap();
        let r = PotentialSpec::seeded_random(42, region.clone(), (-1.0, 1.0), (0.0, 2.0)).unwrap();
        let forward: Vec<_> = region.sites().map(|s| r.value(&s)).collect();
        let mut backward: Vec<_> = region.sites().collect::<Vec<_>>().into_iter().rev().map(|s| r.value(&s)).collect();
        backward.reverse();
        assert_eq!(forward, backward);
        assert!(forward.iter().all(|v| (-1.0..=1.0).contains(&v.re) && (0.0..=2.0).contains(&v.im)));
        assert_eq!(r.value(&[10, 0]), c(0.0, 0.0));
        let other = r.with_seed_offset(5);
        assert_ne!(other.value(&[0, 0]), r.value(&[0, 0]));
        assert_eq!(r.with_seed_offset(0), r);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PotentialSpec::decay_power(c(1.0, 0.0), 0.0).is_err());
        assert!(PotentialSpec::decay_geometric(c(1.0, 0.0), 1.0).is_err());
        assert!(PotentialSpec::sum(vec![]).is_err());
        let mixed = PotentialSpec::sum(vec![
            PotentialSpec::table([(vec![0, 0], c(1.0, 0.0))]).unwrap(),
            PotentialSpec::alternating(0.0, 1.0).unwrap(),
        ]);
        assert!(mixed.is_err());
    }

    #[test]
    fn envelope_cutoff() {
        let e = Envelope::Power {
            scale: 1.0,
            exponent: 2.0,
        };
        // 1/(1+ρ²) < 0.01 ⇔ ρ ≥ 10
        assert_eq!(e.cutoff(0.01), Some(10));
        assert_eq!(Envelope::Constant(1.0).cutoff(0.5), None);
        assert_eq!(Envelope::Vanishes { radius: 7, scale: 3.0 }.cutoff(0.5), Some(8));
        let prod = Envelope::Product(vec![
            Envelope::Power { scale: 1.0, exponent: 1.0 },
            Envelope::Power { scale: 1.0, exponent: 2.0 },
        ]);
        assert_eq!(prod.decay_order(), 3.0);
    }

    #[test]
    fn bounds_include_limits() {
        let p = PotentialSpec::decay_power(c(1.0, 0.0), 2.0).unwrap();
        let r = p.value_rect_beyond(5);
        assert_eq!(r.re.0, 0.0);
        assert!((r.re.1 - 1.0 / 26.0).abs() < 1e-15);
        assert!(p.tail().tends_to_zero());
        let alt = PotentialSpec::alternating(0.0, 1.0).unwrap();
        assert_eq!(alt.value_rect_beyond(100).im, (0.0, 1.0));
        assert!(!alt.tail().tends_to_zero());
    }

    #[test]
    fn decay_metadata_consistency() {
        let t = PotentialSpec::table([(vec![2], c(1.0, 0.0)), (vec![-3], c(0.0, 1.0))]).unwrap();
        assert!(t.clone().with_decay(DecayCertificate::VanishesOutsideRadius(3)).is_ok());
        assert!(t.with_decay(DecayCertificate::VanishesOutsideRadius(2)).is_err());
        let p = PotentialSpec::decay_power(c(0.0, 2.0), 2.0).unwrap();
        let ok = DecayCertificate::MonotoneBound(MonotoneBound {
            scale: 2.0,
            exponent: Some(2.0),
            ratio: None,
        });
        assert!(p.clone().with_decay(ok).is_ok());
        let too_fast = DecayCertificate::MonotoneBound(MonotoneBound {
            scale: 2.0,
            exponent: Some(3.0),
            ratio: None,
        });
        assert!(p.with_decay(too_fast).is_err());
        assert!(PotentialSpec::constant(c(1.0, 0.0))
            .with_decay(DecayCertificate::VanishesOutsideRadius(5))
            .is_err());
    }

    #[test]
    fn json_errors_carry_paths() {
        let err = serde_json::from_str::<PotentialSpec>(
            r#"{"kind":"decay_power","params":{"re":1,"exponent":2,"bogus":0}}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = serde_json::from_str::<PotentialSpec>(r#"{"kind":"nope","params":{}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("unknown potential kind"), "{err}");
    }

    fn arb_leaf() -> impl Strategy<Value = PotentialSpec> {
        prop_oneof![
            (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| PotentialSpec::constant(c(a, b))),
            (-2.0..2.0f64, -2.0..2.0f64, 0.5..4.0f64)
                .prop_map(|(a, b, p)| PotentialSpec::decay_power(c(a, b), p).unwrap()),
            (-2.0..2.0f64, -0.9..0.9f64)
                .prop_map(|(a, r)| PotentialSpec::decay_geometric(c(0.0, a), r).unwrap()),
            (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| PotentialSpec::alternating(a, b).unwrap()),
            (-4i64..4, -2.0..2.0f64, -2.0..2.0f64)
                .prop_map(|(cut, a, b)| PotentialSpec::half_space(0, cut, c(a, b)).unwrap()),
            prop::collection::vec((-6i64..6, -2.0..2.0f64, -2.0..2.0f64), 0..5).prop_map(|es| {
                PotentialSpec::table(es.into_iter().map(|(k, a, b)| (vec![k], c(a, b)))).unwrap()
            }),
        ]
    }

    fn arb_spec() -> impl Strategy<Value = PotentialSpec> {
        arb_leaf().prop_recursive(2, 8, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 1..3).prop_map(|t| PotentialSpec::sum(t).unwrap()),
                prop::collection::vec(inner, 1..3).prop_map(|t| PotentialSpec::product(t).unwrap()),
            ]
        })
    }

    proptest! {
        #[test]
        fn json_round_trip(spec in arb_spec()) {
            let text = serde_json::to_string(&spec).unwrap();
            let back: PotentialSpec = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, spec);
        }

        #[test]
        fn tail_and_rect_are_sound(spec in arb_spec(), rho in 0u64..12) {
            let tail = spec.tail();
            let rect = spec.value_rect_beyond(rho);
            for n in (rho as i64)..(rho as i64 + 30) {
                for k in [n, -n] {
                    let v = spec.value(&[k]);
                    let dist = tail.centers.iter().map(|c| (v - c).norm()).fold(f64::INFINITY, f64::min);
                    prop_assert!(dist <= tail.envelope.at(rho) * (1.0 + 1e-12) + 1e-12);
                    prop_assert!(rect.re.0 - 1e-12 <= v.re && v.re <= rect.re.1 + 1e-12);
                    prop_assert!(rect.im.0 - 1e-12 <= v.im && v.im <= rect.im.1 + 1e-12);
                }
            }
        }

        #[test]
        fn side_tails_are_sound(spec in arb_spec(), rho in 0u64..12) {
            for side in [Side::Plus, Side::Minus] {
                let tail = spec.tail_on_side(0, side);
                for n in (rho as i64)..(rho as i64 + 30) {
                    let v = spec.value(&[side.sign() * n]);
                    let dist = tail.centers.iter().map(|c| (v - c).norm()).fold(f64::INFINITY, f64::min);
                    prop_assert!(dist <= tail.envelope.at(rho) * (1.0 + 1e-12) + 1e-12, "{side:?} n={n}");
                }
            }
        }
    }
}
