//! Scenario files in, JSON/CSV reports out.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    classify_pairs, hildebrandt_certificate, is_box_limited, split_certificate, ClassifierParams, HildebrandtVerdict,
    SplitVerdict, Tolerance,
};
use crate::construct::{build_counterexample, default_window, ConstructError};
use crate::criteria::{evaluate_all, CriteriaParams, CriteriaReport};
use crate::lattice::LatticeBox;
use crate::linalg::{eig_general_with, DEFAULT_TOL_EIG};
use crate::numrange::{compute_hull_with, NumericalRangeHull, DEFAULT_N_ANGLES};
use crate::operator::{assemble_with, potential_bounds, AssemblyLimits, OperatorError, PotentialBounds};
use crate::par::Execution;
use crate::potential::PotentialSpec;

type C = Complex64;

/// Coordinate tolerance for matching expected eigenvalues.
pub const EXPECT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Spectrum,
    Numrange,
    Classify,
    Criteria,
}

fn all_analyses() -> Vec<Analysis> {
    vec![Analysis::Spectrum, Analysis::Numrange, Analysis::Classify, Analysis::Criteria]
}

fn default_angles() -> usize {
    DEFAULT_N_ANGLES
}

fn is_default_angles(n: &usize) -> bool {
    *n == DEFAULT_N_ANGLES
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<ComplexValue> for C {
    fn from(z: ComplexValue) -> C {
        C::new(z.re, z.im)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    #[serde(default = "default_angles", skip_serializing_if = "is_default_angles")]
    pub n_angles: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_boundary: Option<Tolerance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_cert: Option<Tolerance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_support: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_eig: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_radius: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Eigenvalues that must come out as certified boundary eigenvalues.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect_certified: Vec<ComplexValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(rename = "box")]
    pub lattice: LatticeBox,
    pub potential: PotentialSpec,
    #[serde(default = "all_analyses")]
    pub analysis: Vec<Analysis>,
    #[serde(default = "params_default")]
    pub params: ScenarioParams,
}

fn params_default() -> ScenarioParams {
    ScenarioParams {
        n_angles: DEFAULT_N_ANGLES,
        ..ScenarioParams::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Schema,
    Numerical,
    Certification,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Io => 1,
            ErrorKind::Schema => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Certification => 4,
        }
    }
}

/// Error tagged with the `module::operation` it came from.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("[{stage}] {message}")]
pub struct ReportError {
    pub stage: &'static str,
    pub kind: ErrorKind,
    pub message: String,
}

impl ReportError {
    pub fn new(stage: &'static str, kind: ErrorKind, message: impl ToString) -> Self {
        Self {
            stage,
            kind,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ReportError::new("cli_report::parse", ErrorKind::Schema, format!("at `{path}`: {}", e.into_inner()))
        })?;
        scenario
            .potential
            .check_dimension(scenario.lattice.nu())
            .map_err(|e| ReportError::new("cli_report::parse", ErrorKind::Schema, format!("at `potential`: {e}")))?;
        if scenario.name.is_empty() || scenario.name.contains(['/', '\\']) {
            return Err(ReportError::new(
                "cli_report::parse",
                ErrorKind::Schema,
                "at `name`: must be a non-empty file stem",
            ));
        }
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReportError::new("cli_report::read", ErrorKind::Io, format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    fn wants(&self, a: Analysis) -> bool {
        self.analysis.contains(&a)
    }
}

/// Command-line overrides applied on top of the scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub tol_boundary: Option<f64>,
    pub tol_cert: Option<f64>,
    pub angles: Option<usize>,
    pub seed: Option<u64>,
    pub max_dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub overrides: Overrides,
    pub exec: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub re: f64,
    pub im: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumrangeSummary {
    pub n_angles: usize,
    pub tol_hull: f64,
    pub vertices: Vec<[f64; 2]>,
    pub sandwich_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub index: usize,
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub boundary_distance: f64,
    pub is_boundary: bool,
    pub normality_residual: f64,
    pub split_residual_re: f64,
    pub split_residual_im: f64,
    pub hildebrandt: HildebrandtVerdict,
    pub split: SplitVerdict,
    pub certified_boundary: bool,
    pub box_limited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectationRow {
    pub re: f64,
    pub im: f64,
    pub certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedParams {
    pub n_angles: usize,
    pub tol_boundary: Tolerance,
    pub tol_cert: Tolerance,
    pub tol_support: f64,
    pub tol_eig: f64,
    pub seed: Option<u64>,
    pub max_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub name: String,
    #[serde(rename = "box")]
    pub lattice: LatticeBox,
    pub potential: PotentialSpec,
    pub analysis: Vec<Analysis>,
    pub params: ResolvedParams,
    pub dimension: usize,
    pub hermitian: bool,
    pub frobenius_norm: f64,
    pub potential_bounds: PotentialBounds,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<SpectrumRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numrange: Option<NumrangeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Vec<ClassRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_boundary: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criteria: Option<CriteriaReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub expectations: Vec<ExpectationRow>,
}

/// Everything one scenario run produces.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub hull: Option<NumericalRangeHull>,
}

impl Outcome {
    /// All expected eigenvalues were certified.
    pub fn expectations_met(&self) -> bool {
        self.report.expectations.iter().all(|e| e.certified)
    }

    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn hull_csv(&self) -> Option<String> {
        let hull = self.hull.as_ref()?;
        let mut out = String::from("theta,support,witness_re,witness_im\n");
        for s in hull.samples() {
            let _ = writeln!(out, "{:?},{:?},{:?},{:?}", s.theta, s.support, s.witness.re, s.witness.im);
        }
        Some(out)
    }

    pub fn spectrum_csv(&self) -> Option<String> {
        let rows = self.report.spectrum.as_ref()?;
        let mut out = String::from("index,re,im,residual\n");
        for r in rows {
            let _ = writeln!(out, "{},{:?},{:?},{:?}", r.index, r.re, r.im, r.residual);
        }
        Some(out)
    }
}

fn numerical(stage: &'static str) -> impl Fn(String) -> ReportError {
    move |m| ReportError::new(stage, ErrorKind::Numerical, m)
}

fn resolve_params(s: &Scenario, o: &Overrides, exec: Execution) -> (ClassifierParams, ResolvedParams) {
    let base = ClassifierParams::default();
    let cp = ClassifierParams {
        tol_boundary: o
            .tol_boundary
            .map(Tolerance::Relative)
            .or(s.params.tol_boundary)
            .unwrap_or(base.tol_boundary),
        tol_cert: o.tol_cert.map(Tolerance::Relative).or(s.params.tol_cert).unwrap_or(base.tol_cert),
        tol_support: s.params.tol_support.unwrap_or(base.tol_support),
        tol_eig: s.params.tol_eig.unwrap_or(DEFAULT_TOL_EIG),
        exec,
    };
    let limits = match o.max_dim {
        Some(m) => AssemblyLimits { max_dim: m },
        None => AssemblyLimits::from_env(),
    };
    let rp = ResolvedParams {
        n_angles: o.angles.unwrap_or(s.params.n_angles),
        tol_boundary: cp.tol_boundary,
        tol_cert: cp.tol_cert,
        tol_support: cp.tol_support,
        tol_eig: cp.tol_eig,
        seed: o.seed.or(s.params.seed),
        max_dim: limits.max_dim,
    };
    (cp, rp)
}

/// Runs the requested analyses in memory.
pub fn analyze(scenario: &Scenario, options: &RunOptions) -> Result<Outcome, ReportError> {
    let (cp, rp) = resolve_params(scenario, &options.overrides, options.exec);
    let potential = match rp.seed {
        Some(seed) => scenario.potential.with_seed_offset(seed),
        None => scenario.potential.clone(),
    };
    let a = assemble_with(
        &scenario.lattice,
        &potential,
        AssemblyLimits { max_dim: rp.max_dim },
        options.exec,
    )
    .map_err(|e| match e {
        OperatorError::Potential(p) => ReportError::new("operator::assemble", ErrorKind::Schema, p),
        other => ReportError::new("operator::assemble", ErrorKind::Numerical, other),
    })?;

    let need_pairs = scenario.wants(Analysis::Spectrum) || scenario.wants(Analysis::Classify);
    let need_hull = scenario.wants(Analysis::Numrange) || scenario.wants(Analysis::Classify);
    let pairs = if need_pairs {
        Some(eig_general_with(a.entries(), cp.tol_eig).map_err(|e| numerical("linalg::eig_general")(e.to_string()))?)
    } else {
        None
    };
    let hull = if need_hull {
        Some(
            compute_hull_with(&a, rp.n_angles, options.exec)
                .map_err(|e| numerical("numrange::compute_hull")(e.to_string()))?,
        )
    } else {
        None
    };

    let spectrum = pairs.as_ref().filter(|_| scenario.wants(Analysis::Spectrum)).map(|ps| {
        ps.iter()
            .enumerate()
            .map(|(index, p)| SpectrumRow {
                index,
                re: p.value.re,
                im: p.value.im,
                residual: p.residual,
            })
            .collect()
    });
    let numrange = hull.as_ref().filter(|_| scenario.wants(Analysis::Numrange)).map(|h| NumrangeSummary {
        n_angles: rp.n_angles,
        tol_hull: h.tol_hull(),
        vertices: h.polygon().iter().map(|z| [z.re, z.im]).collect(),
        sandwich_gap: h.sandwich_gap(),
    });

    let mut classification = None;
    let mut certified_boundary = None;
    let mut expectations = Vec::new();
    if scenario.wants(Analysis::Classify) {
        let hull = hull.as_ref().expect("hull computed for classify");
        let cls = classify_pairs(&a, hull, pairs.clone().expect("pairs computed"), &cp)
            .map_err(|e| numerical("boundary_classifier::classify")(e.to_string()))?;
        let mut rows = Vec::with_capacity(cls.len());
        for (index, c) in cls.iter().enumerate() {
            let hildebrandt = hildebrandt_certificate(&a, c, &cp);
            let split = split_certificate(&a, c, &cp)
                .map_err(|e| numerical("boundary_classifier::split_certificate")(e.to_string()))?;
            let box_limited = is_box_limited(c, &scenario.lattice).unwrap_or(false);
            rows.push(ClassRow {
                index,
                re: c.pair.value.re,
                im: c.pair.value.im,
                residual: c.pair.residual,
                boundary_distance: c.boundary_distance,
                is_boundary: c.is_boundary,
                normality_residual: c.normality_residual,
                split_residual_re: c.split_residual_re,
                split_residual_im: c.split_residual_im,
                certified_boundary: c.is_boundary
                    && hildebrandt == HildebrandtVerdict::CertifiedNormal
                    && split.is_certified(),
                hildebrandt,
                split,
                box_limited,
            });
        }
        certified_boundary = Some(rows.iter().filter(|r| r.certified_boundary).map(|r| r.index).collect());
        for want in &scenario.params.expect_certified {
            let z = C::from(*want);
            let hit = rows
                .iter()
                .filter(|r| r.certified_boundary && (r.re - z.re).abs() <= EXPECT_TOL && (r.im - z.im).abs() <= EXPECT_TOL)
                .min_by(|x, y| {
                    let dx = C::new(x.re, x.im) - z;
                    let dy = C::new(y.re, y.im) - z;
                    dx.norm().total_cmp(&dy.norm())
                });
            expectations.push(ExpectationRow {
                re: z.re,
                im: z.im,
                certified: hit.is_some(),
                matched_index: hit.map(|r| r.index),
            });
        }
        classification = Some(rows);
    } else {
        for want in &scenario.params.expect_certified {
            expectations.push(ExpectationRow {
                re: want.re,
                im: want.im,
                certified: false,
                matched_index: None,
            });
        }
    }

    let criteria = scenario.wants(Analysis::Criteria).then(|| {
        let p = CriteriaParams {
            b_values: scenario.params.b_values.clone().unwrap_or_else(|| CriteriaParams::default().b_values),
            a_values: scenario.params.a_values.clone().unwrap_or_default(),
            scan_radius: scenario.params.scan_radius,
        };
        evaluate_all(&potential, scenario.lattice.nu(), &p)
    });

    let report = Report {
        name: scenario.name.clone(),
        lattice: scenario.lattice.clone(),
        potential: potential.clone(),
        analysis: scenario.analysis.clone(),
        params: rp,
        dimension: a.dim(),
        hermitian: a.is_hermitian(),
        frobenius_norm: a.frobenius_norm(),
        potential_bounds: potential_bounds(&potential, &scenario.lattice),
        spectrum,
        numrange,
        classification,
        certified_boundary,
        criteria,
        expectations,
    };
    Ok(Outcome {
        report,
        hull: if scenario.wants(Analysis::Numrange) || scenario.wants(Analysis::Classify) {
            hull
        } else {
            None
        },
    })
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes")
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), ReportError> {
    let io = |e: std::io::Error| ReportError::new("cli_report::write", ErrorKind::Io, format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes the report files of `outcome` into `out_dir`; returns their paths.
pub fn write_outputs(outcome: &Outcome, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let name = &outcome.report.name;
    let mut files = vec![(out_dir.join(format!("{name}.report.json")), outcome.report_json())];
    if let Some(csv) = outcome.hull_csv() {
        files.push((out_dir.join(format!("{name}.hull.csv")), csv));
    }
    if let Some(csv) = outcome.spectrum_csv() {
        files.push((out_dir.join(format!("{name}.spectrum.csv")), csv));
    }
    for (path, contents) in &files {
        write_atomic(path, contents)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// `run <file>`: parse, analyse, write. An unmet certification expectation
/// is reported after the files are written.
pub fn run(path: &Path, out_dir: &Path, options: &RunOptions) -> Result<(Outcome, Vec<PathBuf>), ReportError> {
    let scenario = Scenario::from_path(path)?;
    let outcome = analyze(&scenario, options)?;
    let files = write_outputs(&outcome, out_dir)?;
    Ok((outcome, files))
}

/// Certification error for an outcome whose expectations failed.
pub fn expectation_error(outcome: &Outcome) -> Option<ReportError> {
    let missing: Vec<String> = outcome
        .report
        .expectations
        .iter()
        .filter(|e| !e.certified)
        .map(|e| format!("{}{:+}i", e.re, e.im))
        .collect();
    (!missing.is_empty()).then(|| {
        ReportError::new(
            "cli_report::run",
            ErrorKind::Certification,
            format!("no certified boundary eigenvalue at {}", missing.join(", ")),
        )
    })
}

fn scenario_name(a: f64, b: f64, zeros: &[i64], n: usize) -> String {
    let mut name = format!("counterexample_a{a}_b{b}");
    if zeros != [0] {
        let z: Vec<String> = zeros.iter().map(|z| z.to_string()).collect();
        let _ = write!(name, "_z{}", z.join("_"));
    }
    if n != 101 {
        let _ = write!(name, "_n{n}");
    }
    name
}

/// Scenario replaying `build_counterexample(a, b, zeros, n)`.
pub fn counterexample_scenario(
    a: f64,
    b: f64,
    zeros: &[i64],
    n: usize,
    options: &RunOptions,
) -> Result<Scenario, ReportError> {
    let cert = |e: ConstructError| ReportError::new("construct::build_counterexample", ErrorKind::Certification, e);
    let (cp, _) = resolve_params(&params_only(), &options.overrides, options.exec);
    let ce = build_counterexample(a, b, zeros, default_window(zeros), n, &cp).map_err(cert)?;
    let parts = ce.parts;
    Ok(Scenario {
        name: scenario_name(a, b, zeros, n),
        lattice: parts.lattice,
        potential: parts.potential,
        analysis: all_analyses(),
        params: ScenarioParams {
            b_values: Some(vec![0.0, b]),
            a_values: Some(vec![a]),
            expect_certified: vec![ComplexValue { re: a, im: b }],
            ..params_default()
        },
    })
}

fn params_only() -> Scenario {
    Scenario {
        name: "construct".into(),
        lattice: LatticeBox::centered_1d(1).expect("one site"),
        potential: PotentialSpec::zero(),
        analysis: Vec::new(),
        params: params_default(),
    }
}

/// One sweep row: the grid value and a digest of the analysis at it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub result: Result<SweepPoint, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub eigenvalues: Vec<C>,
    pub boundary: Vec<bool>,
    pub certified: Vec<bool>,
}

/// Evenly spaced grid; one point is `from`, zero points is empty.
pub fn grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![from],
        _ => (0..steps)
            .map(|i| {
                if i + 1 == steps {
                    to
                } else {
                    from + (to - from) * i as f64 / (steps - 1) as f64
                }
            })
            .collect(),
    }
}

fn sweep_point(base: &serde_json::Value, pointer: &str, value: f64, options: &RunOptions) -> Result<SweepPoint, String> {
    let mut doc = base.clone();
    let slot = doc
        .pointer_mut(pointer)
        .ok_or_else(|| format!("[cli_report::sweep] pointer `{pointer}` does not exist"))?;
    *slot = serde_json::Value::from(value);
    let scenario = Scenario::from_json(&doc.to_string()).map_err(|e| e.to_string())?;
    let scenario = Scenario {
        analysis: vec![Analysis::Classify],
        ..scenario
    };
    let outcome = analyze(&scenario, options).map_err(|e| e.to_string())?;
    let rows = outcome.report.classification.unwrap_or_default();
    Ok(SweepPoint {
        eigenvalues: rows.iter().map(|r| C::new(r.re, r.im)).collect(),
        boundary: rows.iter().map(|r| r.is_boundary).collect(),
        certified: rows.iter().map(|r| r.certified_boundary).collect(),
    })
}

/// Sweeps the scalar at JSON pointer `pointer` over `grid`. Per-point
/// failures are recorded in the row.
pub fn sweep(scenario_json: &str, pointer: &str, grid: &[f64], options: &RunOptions) -> Result<Vec<SweepRow>, ReportError> {
    let base: serde_json::Value = serde_json::from_str(scenario_json)
        .map_err(|e| ReportError::new("cli_report::sweep", ErrorKind::Schema, e))?;
    Scenario::from_json(scenario_json)?;
    if base.pointer(pointer).is_none() {
        return Err(ReportError::new(
            "cli_report::sweep",
            ErrorKind::Schema,
            format!("pointer `{pointer}` does not exist in the scenario"),
        ));
    }
    Ok(grid
        .iter()
        .map(|&param| SweepRow {
            param,
            result: sweep_point(&base, pointer, param, options),
        })
        .collect())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("param,n_eigenvalues,n_boundary,n_certified,eigenvalues,boundary_flags,error\n");
    for row in rows {
        match &row.result {
            Ok(p) => {
                let eig: Vec<String> = p.eigenvalues.iter().map(|z| format!("{:?}{:+?}i", z.re, z.im)).collect();
                let flags: Vec<&str> = p.boundary.iter().map(|&b| if b { "1" } else { "0" }).collect();
                let _ = writeln!(
                    out,
                    "{:?},{},{},{},{},{},",
                    row.param,
                    p.eigenvalues.len(),
                    p.boundary.iter().filter(|&&b| b).count(),
                    p.certified.iter().filter(|&&b| b).count(),
                    eig.join(";"),
                    flags.join(";"),
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{:?},,,,,,{}", row.param, csv_field(e));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FREE: &str = r#"{
        "name": "free_small",
        "box": {"nu": 1, "ranges": [[-5, 5]]},
        "potential": {"kind": "constant", "params": {"re": 0.0, "im": 0.0}},
        "analysis": ["spectrum", "numrange", "classify"]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let s = Scenario::from_json(FREE).unwrap();
        assert_eq!(s.params.n_angles, DEFAULT_N_ANGLES);
        let again = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn schema_errors_name_the_path() {
        let bad = FREE.replace("\"analysis\"", "\"analysys\"");
        let e = Scenario::from_json(&bad).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().starts_with("[cli_report::parse]"), "{e}");
        let bad = FREE.replace("\"re\": 0.0", "\"re\": 0.0, \"extra\": 1");
        let e = Scenario::from_json(&bad).unwrap_err();
        assert!(e.message.contains("potential"), "{e}");
        let e = Scenario::from_json("{not json").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Schema);
    }

    #[test]
    fn free_spectrum_in_band() {
        let s = Scenario::from_json(FREE).unwrap();
        let out = analyze(&s, &RunOptions::default()).unwrap();
        let spec = out.report.spectrum.as_ref().unwrap();
        assert_eq!(spec.len(), 11);
        assert!(spec.iter().all(|r| r.re.abs() <= 2.0 && r.im == 0.0));
        assert!(out.report.classification.as_ref().unwrap().iter().all(|r| r.is_boundary));
        assert!(out.hull_csv().unwrap().starts_with("theta,support,witness_re,witness_im\n"));
    }

    #[test]
    fn dimension_cap_is_numerical() {
        let s = Scenario::from_json(FREE).unwrap();
        let o = RunOptions {
            overrides: Overrides {
                max_dim: Some(5),
                ..Overrides::default()
            },
            ..RunOptions::default()
        };
        let e = analyze(&s, &o).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().starts_with("[operator::assemble]"));
    }

    #[test]
    fn sweep_grids() {
        assert!(grid(0.0, 1.0, 0).is_empty());
        assert_eq!(grid(0.5, 1.0, 1), vec![0.5]);
        assert_eq!(grid(0.0, 2.0, 3), vec![0.0, 1.0, 2.0]);
        let rows = sweep(FREE, "/potential/params/im", &[], &RunOptions::default()).unwrap();
        assert_eq!(sweep_csv(&rows), "param,n_eigenvalues,n_boundary,n_certified,eigenvalues,boundary_flags,error\n");
        let rows = sweep(FREE, "/potential/params/im", &[0.5], &RunOptions::default()).unwrap();
        let point = rows[0].result.as_ref().unwrap();
        let direct = analyze(
            &Scenario::from_json(&FREE.replace("\"im\": 0.0", "\"im\": 0.5")).unwrap(),
            &RunOptions::default(),
        )
        .unwrap();
        let cls = direct.report.classification.unwrap();
        assert_eq!(point.eigenvalues.len(), cls.len());
        for (z, r) in point.eigenvalues.iter().zip(&cls) {
            assert_eq!((z.re, z.im), (r.re, r.im));
        }
        let bad = sweep(FREE, "/potential/params/im", &[f64::NAN], &RunOptions::default()).unwrap();
        assert!(bad[0].result.is_err());
        assert!(sweep(FREE, "/nope", &[1.0], &RunOptions::default()).is_err());
    }

    #[test]
    fn atomic_writes() {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario::from_json(FREE).unwrap();
        let out = analyze(&s, &RunOptions::default()).unwrap();
        let files = write_outputs(&out, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text, out.report_json());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 3);
    }
}
