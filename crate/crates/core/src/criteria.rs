//! Decidable absence criteria for boundary eigenvalues.
//!
//! Each check combines a finite scan of lattice sites with the tail
//! certificate of the potential, so that statements about all of ℤ^ν reduce
//! to finitely many evaluations. Verdicts are two-valued: absence is either
//! guaranteed or the check is inconclusive.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::lattice::{l1_norm, Site};
use crate::potential::{Envelope, PotentialKind, PotentialSpec, Side, Tail};

type C = Complex64;

pub const DEFAULT_SCAN_RADIUS_1D: u64 = 1000;
pub const DEFAULT_SCAN_RADIUS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionId {
    LevelSetEmpty,
    HalfspaceSupport,
    DirectionDecay,
    FullDecay,
    PairCondition,
    Alternating,
    RealWindow,
    Summability,
}

impl CriterionId {
    pub fn as_str(self) -> &'static str {
        match self {
            CriterionId::LevelSetEmpty => "level_set_empty",
            CriterionId::HalfspaceSupport => "halfspace_support",
            CriterionId::DirectionDecay => "direction_decay",
            CriterionId::FullDecay => "full_decay",
            CriterionId::PairCondition => "pair_condition",
            CriterionId::Alternating => "alternating",
            CriterionId::RealWindow => "real_window",
            CriterionId::Summability => "summability",
        }
    }
}

/// Class of boundary eigenvalues a verdict speaks about.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "target")]
pub enum Target {
    All,
    ImaginaryPart { b: f64 },
    NonReal,
    /// The single point `a + ib`.
    RealPart { a: f64, b: f64 },
}

impl Target {
    /// Whether `lambda` falls in the class, up to `tol` in each coordinate.
    pub fn contains(&self, lambda: C, tol: f64) -> bool {
        match *self {
            Target::All => true,
            Target::ImaginaryPart { b } => (lambda.im - b).abs() <= tol,
            Target::NonReal => lambda.im.abs() > tol,
            Target::RealPart { a, b } => (lambda.re - a).abs() <= tol && (lambda.im - b).abs() <= tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AbsenceGuaranteed,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionEntry {
    pub id: CriterionId,
    pub target: Target,
    pub verdict: Verdict,
    pub witness: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
}

impl CriterionEntry {
    fn new(id: CriterionId, target: Target, verdict: Verdict, witness: impl Into<String>) -> Self {
        Self {
            id,
            target,
            verdict,
            witness: witness.into(),
            axis: None,
            side: None,
        }
    }

    fn guaranteed(id: CriterionId, target: Target, witness: impl Into<String>) -> Self {
        Self::new(id, target, Verdict::AbsenceGuaranteed, witness)
    }

    fn inconclusive(id: CriterionId, target: Target, reason: impl Into<String>) -> Self {
        Self::new(id, target, Verdict::Inconclusive, reason)
    }

    fn on(mut self, axis: usize, side: Side) -> Self {
        self.axis = Some(axis);
        self.side = Some(side);
        self
    }

    pub fn is_guaranteed(&self) -> bool {
        self.verdict == Verdict::AbsenceGuaranteed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriteriaParams {
    pub b_values: Vec<f64>,
    pub a_values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_radius: Option<u64>,
}

impl Default for CriteriaParams {
    fn default() -> Self {
        Self {
            b_values: vec![0.0],
            a_values: Vec::new(),
            scan_radius: None,
        }
    }
}

/// Lattice dimension and scan radius (sites per axis around the origin).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Scan {
    pub nu: usize,
    pub radius: u64,
}

impl Scan {
    pub fn new(nu: usize, radius: Option<u64>) -> Self {
        let default = if nu <= 1 { DEFAULT_SCAN_RADIUS_1D } else { DEFAULT_SCAN_RADIUS };
        Self {
            nu: nu.max(1),
            radius: radius.unwrap_or(default),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriteriaReport {
    pub entries: Vec<CriterionEntry>,
    pub potential: PotentialSpec,
    pub parameters: CriteriaParams,
    pub scan: Scan,
    /// Targets excluded by at least one entry or by combining entries.
    pub conclusions: Vec<Target>,
    pub no_boundary_eigenvalues: bool,
    /// Real potential: the operator is hermitian, its numerical range is a
    /// segment and every eigenvalue lies on the boundary.
    pub selfadjoint: bool,
}

impl CriteriaReport {
    /// Whether some conclusion excludes `lambda` (coordinate tolerance `tol`).
    pub fn excludes(&self, lambda: C, tol: f64) -> bool {
        self.conclusions.iter().any(|t| t.contains(lambda, tol))
    }
}

fn level_tol(b: f64) -> f64 {
    1e-12 * b.abs().max(1.0)
}

fn on_level(v: C, b: f64) -> bool {
    (v.im - b).abs() <= level_tol(b)
}

/// Radius beyond which the tail keeps `Im d` away from `b`.
fn separation_cutoff(tail: &Tail, b: f64) -> Option<u64> {
    let gap = tail
        .im_centers()
        .iter()
        .map(|c| (c - b).abs())
        .fold(f64::INFINITY, f64::min);
    let margin = gap - level_tol(b);
    if margin <= 0.0 {
        return None;
    }
    tail.envelope.cutoff(margin)
}

/// Sites with `‖k‖₁ < rho`, lexicographic.
fn ball_sites(nu: usize, rho: u64) -> Vec<Site> {
    let mut out = Vec::new();
    if rho == 0 {
        return out;
    }
    let r = (rho - 1) as i64;
    let mut site = vec![0i64; nu];
    fn rec(axis: usize, budget: i64, r: i64, site: &mut Vec<i64>, out: &mut Vec<Site>) {
        if axis == site.len() {
            out.push(site.clone());
            return;
        }
        for k in -budget.min(r)..=budget.min(r) {
            site[axis] = k;
            rec(axis + 1, budget - k.abs(), r, site, out);
        }
    }
    rec(0, r, r, &mut site, &mut out);
    out
}

pub fn check_level_set_empty(potential: &PotentialSpec, b: f64, scan: &Scan) -> CriterionEntry {
    let id = CriterionId::LevelSetEmpty;
    let target = Target::ImaginaryPart { b };
    let Some(rho) = separation_cutoff(&potential.tail(), b) else {
        return CriterionEntry::inconclusive(id, target, format!("Im d accumulates at {b} (no uniform gap in the tail)"));
    };
    if rho > scan.radius + 1 {
        return CriterionEntry::inconclusive(
            id,
            target,
            format!("tail separates b only beyond radius {rho} > scan radius {}", scan.radius),
        );
    }
    let sites = ball_sites(scan.nu, rho);
    match sites.iter().find(|k| on_level(potential.value(k), b)) {
        Some(k) => CriterionEntry::inconclusive(id, target, format!("Im d({k:?}) = {b}")),
        None => CriterionEntry::guaranteed(
            id,
            target,
            format!("Im d ≠ {b} on {} sites with ‖k‖₁ < {rho}; tail gap beyond", sites.len()),
        ),
    }
}

/// Level set `{k : Im d(k) = b}` bounded above (`Side::Plus`) or below
/// (`Side::Minus`) in coordinate `axis`.
pub fn check_halfspace_support(
    potential: &PotentialSpec,
    b: f64,
    axis: usize,
    side: Side,
    scan: &Scan,
) -> CriterionEntry {
    let id = CriterionId::HalfspaceSupport;
    let target = Target::ImaginaryPart { b };
    let word = if side == Side::Plus { "sup" } else { "inf" };
    if axis >= scan.nu {
        return CriterionEntry::inconclusive(id, target, format!("axis {axis} outside ν = {}", scan.nu)).on(axis, side);
    }
    // finite level set
    if let Some(rho) = separation_cutoff(&potential.tail(), b).filter(|&r| r <= scan.radius + 1) {
        let extreme = ball_sites(scan.nu, rho)
            .into_iter()
            .filter(|k| on_level(potential.value(k), b))
            .map(|k| side.sign() * k[axis])
            .max();
        let witness = match extreme {
            Some(m) => format!("level set inside ‖k‖₁ < {rho}; {word} k_{axis} = {}", side.sign() * m),
            None => format!("level set empty ({word} ∅ = {}∞)", if side == Side::Plus { "−" } else { "+" }),
        };
        return CriterionEntry::guaranteed(id, target, witness).on(axis, side);
    }
    let Some(rho) = separation_cutoff(&potential.tail_on_side(axis, side), b).filter(|&r| r <= scan.radius + 1) else {
        return CriterionEntry::inconclusive(id, target, format!("level set may be unbounded ({word} side)")).on(axis, side);
    };
    let witness = if scan.nu == 1 {
        let lo = -(scan.radius as i64);
        let hit = (lo..rho as i64)
            .rev()
            .find(|&t| on_level(potential.value(&[side.sign() * t]), b));
        match hit {
            Some(t) => format!("{word} k_{axis} = {} (tail excludes b for |k| ≥ {rho})", side.sign() * t),
            None => format!("level set ⊂ {{{}k_{axis} < {rho}}}", if side == Side::Plus { "" } else { "−" }),
        }
    } else {
        format!("level set ⊂ {{{}k_{axis} < {rho}}}", if side == Side::Plus { "" } else { "−" })
    };
    CriterionEntry::guaranteed(id, target, witness).on(axis, side)
}

fn im_decays(tail: &Tail) -> bool {
    tail.im_centers().iter().all(|c| *c == 0.0) && tail.envelope.decays()
}

fn decay_witness(env: &Envelope) -> String {
    match env {
        Envelope::Vanishes { radius, .. } => format!("Im d = 0 beyond radius {radius}"),
        _ => format!("|Im d| ≤ envelope(ρ) → 0, decay order {}", fmt_order(env.decay_order())),
    }
}

fn fmt_order(p: f64) -> String {
    if p.is_infinite() { "∞".into() } else { format!("{p}") }
}

/// Slice-sup of `|Im d|` tends to zero along `side·k_axis → ∞`.
pub fn check_direction_decay(potential: &PotentialSpec, axis: usize, side: Side, scan: &Scan) -> CriterionEntry {
    let id = CriterionId::DirectionDecay;
    if axis >= scan.nu {
        return CriterionEntry::inconclusive(id, Target::NonReal, format!("axis {axis} outside ν = {}", scan.nu))
            .on(axis, side);
    }
    let tail = potential.tail_on_side(axis, side);
    if im_decays(&tail) {
        CriterionEntry::guaranteed(id, Target::NonReal, decay_witness(&tail.envelope)).on(axis, side)
    } else {
        CriterionEntry::inconclusive(id, Target::NonReal, "no certificate that Im d → 0 in this direction").on(axis, side)
    }
}

pub fn check_full_decay(potential: &PotentialSpec) -> CriterionEntry {
    let id = CriterionId::FullDecay;
    let tail = potential.tail();
    if im_decays(&tail) {
        CriterionEntry::guaranteed(id, Target::NonReal, decay_witness(&tail.envelope))
    } else {
        CriterionEntry::inconclusive(id, Target::NonReal, "no certificate that Im d → 0 as ‖k‖₁ → ∞")
    }
}

fn one_dim_only(id: CriterionId, target: Target, scan: &Scan) -> Option<CriterionEntry> {
    (scan.nu != 1).then(|| CriterionEntry::inconclusive(id, target, "criterion is one-dimensional"))
}

/// Looks for `m` with `Im d(m) ≠ b` and `Im d(m+1) ≠ b`, nearest the origin
/// first.
pub fn check_pair_condition(potential: &PotentialSpec, b: f64, scan: &Scan) -> CriterionEntry {
    let id = CriterionId::PairCondition;
    let target = Target::ImaginaryPart { b };
    if let Some(e) = one_dim_only(id, target, scan) {
        return e;
    }
    let r = scan.radius as i64;
    let order = (0..=r).flat_map(|j| if j == 0 { vec![0] } else { vec![-j, j] });
    for m in order {
        if m + 1 > r {
            continue;
        }
        let (x, y) = (potential.value(&[m]), potential.value(&[m + 1]));
        if !on_level(x, b) && !on_level(y, b) {
            return CriterionEntry::guaranteed(
                id,
                target,
                format!("m = {m}: Im d(m) = {}, Im d(m+1) = {}", x.im, y.im),
            );
        }
    }
    CriterionEntry::inconclusive(id, target, format!("every scanned pair meets Im d = {b}"))
}

/// Global period-2 pattern `(b1 on even, b2 on odd)` of `Im d`, when the
/// kind guarantees one.
pub fn im_pattern(potential: &PotentialSpec) -> Option<(f64, f64)> {
    if potential.is_real_valued() {
        return Some((0.0, 0.0));
    }
    match potential.kind() {
        PotentialKind::Alternating1D { b1, b2 } => Some((*b1, *b2)),
        PotentialKind::Constant(c) => Some((c.im, c.im)),
        PotentialKind::Sum(terms) => terms.iter().try_fold((0.0, 0.0), |acc, t| {
            im_pattern(t).map(|(x, y)| (acc.0 + x, acc.1 + y))
        }),
        PotentialKind::Product(factors) => {
            // real constant factors times one patterned factor
            let mut scale = 1.0;
            let mut pattern = None;
            for f in factors {
                match f.kind() {
                    PotentialKind::Constant(c) if c.im == 0.0 => scale *= c.re,
                    _ if pattern.is_none() && is_imaginary_valued(f) => pattern = Some(im_pattern(f)?),
                    _ => return None,
                }
            }
            pattern.map(|(x, y)| (scale * x, scale * y))
        }
        _ => None,
    }
}

pub fn check_alternating(potential: &PotentialSpec, scan: &Scan) -> CriterionEntry {
    let id = CriterionId::Alternating;
    if let Some(e) = one_dim_only(id, Target::All, scan) {
        return e;
    }
    let Some((b1, b2)) = im_pattern(potential) else {
        return CriterionEntry::inconclusive(id, Target::All, "Im d is not declared 2-periodic");
    };
    if (b1 - b2).abs() <= level_tol(b1.abs().max(b2.abs())) {
        return CriterionEntry::inconclusive(id, Target::All, format!("b1 = b2 = {b1}"));
    }
    let r = scan.radius as i64;
    if let Some(n) = (-r..=r).find(|&n| {
        let want = if n.rem_euclid(2) == 0 { b1 } else { b2 };
        !on_level(potential.value(&[n]), want)
    }) {
        return CriterionEntry::inconclusive(id, Target::All, format!("pattern broken at n = {n}"));
    }
    CriterionEntry::guaranteed(
        id,
        Target::All,
        format!("Im d = (…, {b1}, {b2}, …) with b1 ≠ b2"),
    )
}

fn re_tends_to_zero(tail: &Tail) -> bool {
    tail.re_centers().iter().all(|c| *c == 0.0) && tail.envelope.decays()
}

/// `Im d(n) ≠ b` for infinitely many `n`, certified from the kind.
fn infinitely_often_off(potential: &PotentialSpec, b: f64) -> Option<String> {
    if let Some(rho) = separation_cutoff(&potential.tail(), b) {
        return Some(format!("Im d ≠ {b} for all |n| ≥ {rho}"));
    }
    let (b1, b2) = im_pattern(potential)?;
    (!on_level(C::new(0.0, b1), b) || !on_level(C::new(0.0, b2), b))
        .then(|| format!("periodic Im d = ({b1}, {b2}) differs from {b}"))
}

/// Boundary eigenvalue `a + ib` excluded when `a` is outside `[−2, 2]`.
pub fn check_real_window(potential: &PotentialSpec, a: f64, b: f64, scan: &Scan) -> CriterionEntry {
    let id = CriterionId::RealWindow;
    let target = Target::RealPart { a, b };
    if let Some(e) = one_dim_only(id, target, scan) {
        return e;
    }
    if a.abs() <= 2.0 {
        return CriterionEntry::inconclusive(id, target, format!("a = {a} lies in [−2, 2]"));
    }
    if !re_tends_to_zero(&potential.tail()) {
        return CriterionEntry::inconclusive(id, target, "no certificate that Re d → 0");
    }
    match infinitely_often_off(potential, b) {
        Some(w) => CriterionEntry::guaranteed(id, target, format!("{w}; a = {a} outside [−2, 2]")),
        None => CriterionEntry::inconclusive(id, target, format!("Im d ≠ {b} not certified infinitely often")),
    }
}

/// Parities (even, odd) on which `Im d(n) = 0` for all `|n| > R0`.
fn im_zero_parities(potential: &PotentialSpec) -> ([bool; 2], u64) {
    if potential.is_real_valued() {
        let r0 = match potential.kind() {
            PotentialKind::Table(t) => t.keys().map(|k| l1_norm(k)).max().unwrap_or(0),
            PotentialKind::SeededRandom { region, .. } => region.max_l1(),
            _ => 0,
        };
        return ([true, true], r0);
    }
    match potential.kind() {
        PotentialKind::Table(t) => ([true, true], t.keys().map(|k| l1_norm(k)).max().unwrap_or(0)),
        PotentialKind::SeededRandom { region, .. } => ([true, true], region.max_l1()),
        PotentialKind::Alternating1D { b1, b2 } => ([*b1 == 0.0, *b2 == 0.0], 0),
        // Im of a product vanishes where every factor is real
        PotentialKind::Sum(ts) | PotentialKind::Product(ts) => {
            ts.iter().map(im_zero_parities).fold(([true, true], 0), |(p, r), (q, s)| {
                ([p[0] && q[0], p[1] && q[1]], r.max(s))
            })
        }
        _ => ([false, false], 0),
    }
}

/// Parities on which `d(n)` is real and nonzero for all large `|n|`.
fn real_nonzero_parities(potential: &PotentialSpec) -> [bool; 2] {
    match potential.kind() {
        PotentialKind::Constant(c) => [c.im == 0.0 && c.re != 0.0; 2],
        PotentialKind::DecayPower { amplitude, .. } | PotentialKind::DecayGeometric { amplitude, .. } => {
            [amplitude.im == 0.0 && amplitude.re != 0.0; 2]
        }
        PotentialKind::Product(fs) => fs.iter().map(real_nonzero_parities).fold([true; 2], |p, q| [p[0] && q[0], p[1] && q[1]]),
        _ => [false; 2],
    }
}

/// Parities on which `Im d(n) ≠ 0` for all large `|n|`.
fn im_nonzero_parities(potential: &PotentialSpec) -> [bool; 2] {
    match potential.kind() {
        PotentialKind::Constant(c) => [c.im != 0.0; 2],
        PotentialKind::DecayPower { amplitude, .. } | PotentialKind::DecayGeometric { amplitude, .. } => {
            [amplitude.im != 0.0; 2]
        }
        PotentialKind::Alternating1D { b1, b2 } => [*b1 != 0.0, *b2 != 0.0],
        PotentialKind::Sum(ts) => std::array::from_fn(|p| {
            let nonzero = ts.iter().filter(|t| im_nonzero_parities(t)[p]).count();
            let zero = ts.iter().filter(|t| im_zero_parities(t).0[p]).count();
            nonzero == 1 && zero == ts.len() - 1
        }),
        PotentialKind::Product(ts) => std::array::from_fn(|p| {
            let nonzero = ts.iter().filter(|t| im_nonzero_parities(t)[p]).count();
            let real = ts.iter().filter(|t| real_nonzero_parities(t)[p]).count();
            nonzero == 1 && real == ts.len() - 1
        }),
        _ => [false; 2],
    }
}

pub fn is_imaginary_valued(potential: &PotentialSpec) -> bool {
    match potential.kind() {
        PotentialKind::Table(t) => t.values().all(|v| v.re == 0.0),
        PotentialKind::Constant(c) => c.re == 0.0,
        PotentialKind::DecayPower { amplitude, .. } | PotentialKind::DecayGeometric { amplitude, .. } => {
            amplitude.re == 0.0
        }
        PotentialKind::Alternating1D { .. } => true,
        PotentialKind::SeededRandom { re_range, .. } => re_range.0 == 0.0 && re_range.1 == 0.0,
        PotentialKind::HalfSpace { value, .. } => value.re == 0.0,
        PotentialKind::Sum(ts) => ts.iter().all(is_imaginary_valued),
        PotentialKind::Product(ts) => {
            if ts.iter().any(|t| t.is_real_valued() && is_imaginary_valued(t)) {
                return true;
            }
            let imag = ts.iter().filter(|t| !t.is_real_valued()).count();
            ts.iter().all(|t| t.is_real_valued() || is_imaginary_valued(t)) && imag % 2 == 1
        }
    }
}

/// Bound on `|Re d(k)|` for `‖k‖₁ ≥ ρ`.
pub fn re_envelope(potential: &PotentialSpec) -> Envelope {
    match potential.kind() {
        PotentialKind::Table(t) => Envelope::Vanishes {
            radius: t.keys().map(|k| l1_norm(k)).max().unwrap_or(0),
            scale: t.values().map(|v| v.re.abs()).fold(0.0, f64::max),
        },
        PotentialKind::Constant(c) => Envelope::Constant(c.re.abs()),
        PotentialKind::DecayPower { amplitude, exponent } => Envelope::Power {
            scale: amplitude.re.abs(),
            exponent: *exponent,
        },
        PotentialKind::DecayGeometric { amplitude, ratio } => Envelope::Geometric {
            scale: amplitude.re.abs(),
            ratio: ratio.abs(),
        },
        PotentialKind::Alternating1D { .. } => Envelope::Constant(0.0),
        PotentialKind::SeededRandom { region, re_range, .. } => Envelope::Vanishes {
            radius: region.max_l1(),
            scale: re_range.0.abs().max(re_range.1.abs()),
        },
        PotentialKind::HalfSpace { value, .. } => Envelope::Constant(value.re.abs()),
        PotentialKind::Sum(ts) => Envelope::Sum(ts.iter().map(re_envelope).collect()),
        PotentialKind::Product(_) => {
            if is_imaginary_valued(potential) {
                return Envelope::Constant(0.0);
            }
            let tail = potential.tail();
            if tail.re_centers().iter().all(|c| *c == 0.0) {
                tail.envelope
            } else {
                Envelope::Constant(potential.sup_abs())
            }
        }
    }
}

pub fn check_summability(potential: &PotentialSpec, scan: &Scan) -> CriterionEntry {
    let id = CriterionId::Summability;
    if let Some(e) = one_dim_only(id, Target::All, scan) {
        return e;
    }
    let fail = |why: String| CriterionEntry::inconclusive(id, Target::All, why);
    if !potential.tail().tends_to_zero() {
        return fail("no certificate that d → 0".into());
    }
    // (i) every adjacent pair meets Im d = 0
    let (zero, r0) = im_zero_parities(potential);
    if !(zero[0] || zero[1]) {
        return fail("no parity class with Im d ≡ 0 in the tail".into());
    }
    if r0 + 1 > scan.radius {
        return fail(format!("irregular region radius {r0} exceeds the scan"));
    }
    let r0 = r0 as i64;
    let is_zero = |n: i64| potential.value(&[n]).im.abs() <= level_tol(0.0);
    if let Some(n) = (-r0 - 1..=r0).find(|&n| !is_zero(n) && !is_zero(n + 1)) {
        return fail(format!("Im d(n), Im d(n+1) both nonzero at n = {n}"));
    }
    // (ii) Im d ≠ 0 infinitely often
    let nz = im_nonzero_parities(potential);
    if !(nz[0] || nz[1]) {
        return fail("Im d ≠ 0 not certified infinitely often".into());
    }
    // Σ |k||Re d(k)| < ∞
    let order = re_envelope(potential).decay_order();
    if order <= 2.0 {
        return fail(format!("|Re d| decay order {} ≤ 2 does not certify Σ|k||Re d(k)| < ∞", fmt_order(order)));
    }
    let parity = |p: [bool; 2]| if p[0] { "even" } else { "odd" };
    CriterionEntry::guaranteed(
        id,
        Target::All,
        format!(
            "Im d = 0 on {} sites, Im d ≠ 0 on all large {} sites, |Re d| decay order {}",
            parity(zero),
            parity(nz),
            fmt_order(order)
        ),
    )
}

/// Runs every applicable criterion and combines the conclusions.
pub fn evaluate_all(potential: &PotentialSpec, nu: usize, params: &CriteriaParams) -> CriteriaReport {
    let scan = Scan::new(nu, params.scan_radius);
    let mut entries = Vec::new();
    for &b in &params.b_values {
        entries.push(check_level_set_empty(potential, b, &scan));
    }
    for &b in &params.b_values {
        for axis in 0..scan.nu {
            for side in [Side::Plus, Side::Minus] {
                entries.push(check_halfspace_support(potential, b, axis, side, &scan));
            }
        }
    }
    for axis in 0..scan.nu {
        for side in [Side::Plus, Side::Minus] {
            entries.push(check_direction_decay(potential, axis, side, &scan));
        }
    }
    entries.push(check_full_decay(potential));
    if scan.nu == 1 {
        for &b in &params.b_values {
            entries.push(check_pair_condition(potential, b, &scan));
        }
        entries.push(check_alternating(potential, &scan));
        for &a in &params.a_values {
            for &b in &params.b_values {
                entries.push(check_real_window(potential, a, b, &scan));
            }
        }
        entries.push(check_summability(potential, &scan));
    }
    entries.sort_by_key(|e| e.id);

    let mut conclusions: Vec<Target> = Vec::new();
    for e in entries.iter().filter(|e| e.is_guaranteed()) {
        if !conclusions.contains(&e.target) {
            conclusions.push(e.target);
        }
    }
    let non_real = conclusions.contains(&Target::NonReal);
    let real = conclusions.contains(&Target::ImaginaryPart { b: 0.0 });
    if non_real && real && !conclusions.contains(&Target::All) {
        conclusions.push(Target::All);
    }
    CriteriaReport {
        no_boundary_eigenvalues: conclusions.contains(&Target::All),
        entries,
        potential: potential.clone(),
        parameters: params.clone(),
        scan,
        conclusions,
        selfadjoint: potential.is_real_valued(),
    }
}
