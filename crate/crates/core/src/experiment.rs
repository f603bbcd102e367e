//! End-to-end experiment driver: one JSON configuration in, a directory of
//! deterministic artifacts out.
//!
//! Output files:
//!
//! | file | content |
//! |------|---------|
//! | `spectrum.json` | decomposition export |
//! | `ensemble_r<r>.csv` | per-sample norms and weights for each threshold |
//! | `ensembles.csv` | one summary row per threshold |
//! | `analysis.json`, `analysis.txt` | closed forms against Monte Carlo, with verdicts |
//! | `concentration.csv`, `concentration.dat` | decay curves (with at least two thresholds) |
//! | `manifest.json` | normalized configuration, its SHA-256 and the crate version |
//!
//! Files are staged in a sibling directory and moved into place only after
//! every artifact was written, so a failed run leaves nothing behind.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::analysis::{
    amplifier_moment, c_infinity, chernoff_bound, condensation_curves, default_chernoff_rate,
    exact_norm_tail, overlap_bound, rho_perp_bound, tail_asymptote, AnalysisReport, BoundValue, Field,
    MomentOutcome, ReportRow, SpectrumSummary, Verdict,
};
use crate::conditioning::{
    estimate, overlap_indicator, sample_conditional_decomposition, sample_conditional_rejection,
    ConditionalEnsemble, Estimate, DEFAULT_ATTEMPT_BUDGET,
};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelSpec};
use crate::rng::StreamFactory;
use crate::sampling::{sample_unconditional, write_sample_csv, NormRecord};
use crate::spectral::{
    build_grid, decompose_with, SpectralDecomposition, SpectralOptions, DEFAULT_DEGENERACY_TOL,
    DEFAULT_TRUNCATION_TOL, MAX_GRID,
};

pub const MIN_SAMPLES_PER_R: usize = 1000;
/// Auto mode uses rejection when `P(||phi||^2 > r)` is at least this.
pub const AUTO_REJECTION_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_EPS: [f64; 1] = [0.3];
const CHERNOFF_POINTS: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Auto,
    Rejection,
    Decomposition,
}

impl MethodChoice {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(MethodChoice::Auto),
            "rejection" => Some(MethodChoice::Rejection),
            "decomposition" => Some(MethodChoice::Decomposition),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub grid_size: usize,
    pub truncation_tol: f64,
    pub degeneracy_tol: f64,
    pub r_values: Vec<f64>,
    pub eps_values: Vec<f64>,
    pub samples_per_r: usize,
    pub method: MethodChoice,
    pub attempt_budget: u64,
    pub seed: u64,
    /// Not part of the manifest: moving a run does not change its identity.
    #[serde(skip)]
    pub output_dir: PathBuf,
}

const KNOWN_FIELDS: [&str; 11] = [
    "kernel",
    "grid_size",
    "truncation_tol",
    "degeneracy_tol",
    "r_values",
    "eps_values",
    "samples_per_r",
    "method",
    "attempt_budget",
    "seed",
    "output_dir",
];

fn req<'a>(obj: &'a serde_json::Map<String, Value>, field: &str) -> Result<&'a Value> {
    obj.get(field)
        .ok_or_else(|| Error::config(field, "missing required field"))
}

fn as_f64(v: &Value, field: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::config(field, format!("expected a number, got {v}")))
}

fn as_u64(v: &Value, field: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::config(field, format!("expected a non-negative integer, got {v}")))
}

fn as_f64_list(v: &Value, field: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::config(field, "expected an array of numbers"))?
        .iter()
        .map(|x| as_f64(x, field))
        .collect()
}

impl ExperimentConfig {
    /// Parses a configuration, or the `config` object of a manifest.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(&value)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn from_value(value: &Value) -> Result<Self> {
        let value = match value.get("config") {
            Some(inner) if value.get("config_sha256").is_some() => inner,
            _ => value,
        };
        let obj = value
            .as_object()
            .ok_or_else(|| Error::config("<root>", "expected a JSON object"))?;
        if let Some(unknown) = obj.keys().find(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
            return Err(Error::config(unknown.clone(), "unknown field"));
        }

        let kernel: KernelSpec = serde_json::from_value(req(obj, "kernel")?.clone())
            .map_err(|e| Error::config("kernel", e.to_string()))?;
        Kernel::new(&kernel).map_err(|e| match e {
            Error::InvalidKernel { field, reason } => Error::config(format!("kernel.{field}"), reason),
            other => other,
        })?;

        let grid_size = as_u64(req(obj, "grid_size")?, "grid_size")? as usize;
        if !(2..=MAX_GRID).contains(&grid_size) {
            return Err(Error::config(
                "grid_size",
                format!("must lie in [2, {MAX_GRID}], got {grid_size}"),
            ));
        }
        let truncation_tol = match obj.get("truncation_tol") {
            Some(v) => as_f64(v, "truncation_tol")?,
            None => DEFAULT_TRUNCATION_TOL,
        };
        if !(truncation_tol > 0.0 && truncation_tol < 1.0) {
            return Err(Error::config("truncation_tol", "must lie in (0, 1)"));
        }
        let degeneracy_tol = match obj.get("degeneracy_tol") {
            Some(v) => as_f64(v, "degeneracy_tol")?,
            None => DEFAULT_DEGENERACY_TOL,
        };
        if !(degeneracy_tol > 0.0 && degeneracy_tol < 1e-3) {
            return Err(Error::config("degeneracy_tol", "must lie in (0, 1e-3)"));
        }

        let r_values = as_f64_list(req(obj, "r_values")?, "r_values")?;
        if r_values.is_empty() {
            return Err(Error::config("r_values", "must not be empty"));
        }
        if r_values.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::config(
                "r_values",
                "thresholds must be finite and positive",
            ));
        }
        if r_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("r_values", "must be strictly increasing"));
        }
        let eps_values = match obj.get("eps_values") {
            Some(v) => as_f64_list(v, "eps_values")?,
            None => DEFAULT_EPS.to_vec(),
        };
        if eps_values.is_empty() || eps_values.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::config("eps_values", "need at least one finite eps >= 0"));
        }

        let samples_per_r = as_u64(req(obj, "samples_per_r")?, "samples_per_r")? as usize;
        if samples_per_r < MIN_SAMPLES_PER_R {
            return Err(Error::config(
                "samples_per_r",
                format!("must be at least {MIN_SAMPLES_PER_R}, got {samples_per_r}"),
            ));
        }
        let method = match obj.get("method") {
            Some(v) => {
                let s = v
                    .as_str()
                    .ok_or_else(|| Error::config("method", "expected a string"))?;
                MethodChoice::parse(s).ok_or_else(|| {
                    Error::config(
                        "method",
                        format!("`{s}` is not one of auto, rejection, decomposition"),
                    )
                })?
            }
            None => MethodChoice::Auto,
        };
        let attempt_budget = match obj.get("attempt_budget") {
            Some(v) => as_u64(v, "attempt_budget")?,
            None => DEFAULT_ATTEMPT_BUDGET,
        };
        if attempt_budget == 0 {
            return Err(Error::config("attempt_budget", "must be positive"));
        }
        let seed = as_u64(req(obj, "seed")?, "seed")?;
        let output_dir = match obj.get("output_dir") {
            Some(v) => PathBuf::from(
                v.as_str()
                    .ok_or_else(|| Error::config("output_dir", "expected a string"))?,
            ),
            None => PathBuf::from("klcond-out"),
        };

        Ok(ExperimentConfig {
            kernel,
            grid_size,
            truncation_tol,
            degeneracy_tol,
            r_values,
            eps_values,
            samples_per_r,
            method,
            attempt_budget,
            seed,
            output_dir,
        })
    }

    /// Compact JSON of every field except `output_dir`; the hashed identity of a run.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn spectral_options(&self) -> SpectralOptions {
        SpectralOptions {
            truncation_tol: self.truncation_tol,
            degeneracy_tol: self.degeneracy_tol,
        }
    }

    pub fn decompose(&self) -> Result<SpectralDecomposition> {
        let kernel = Kernel::new(&self.kernel)?;
        decompose_with(&kernel, &build_grid(self.grid_size)?, &self.spectral_options())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Everything measured at one threshold.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub r: f64,
    pub ensemble: ConditionalEnsemble,
    /// `(eps, conditional estimate, closed-form bound)` per requested `eps`.
    pub overlap: Vec<(f64, Estimate, BoundValue)>,
    pub sup_perp: Estimate,
    pub par_sq: Estimate,
    pub perp_sq: Estimate,
    /// Samples violating `||phî_perp||_inf <= sqrt(kappa_1) B ||psi_perp||_2 / ||phi||_2`.
    pub coupling_violations: usize,
}

/// Per-sample check of the coupled sup-norm inequality with `1e-9` slack.
pub fn coupling_violations(samples: &[NormRecord], kappa1: f64, b: f64) -> usize {
    samples
        .iter()
        .filter(|s| match s.sup_perp_hat {
            Some(lhs) => lhs > kappa1.sqrt() * b * s.psi_perp / s.norm2() + 1e-9,
            None => false,
        })
        .count()
}

/// Picks a sampler and runs it at threshold `r`. In auto mode an exhausted
/// rejection budget falls back to the decomposition sampler.
pub fn sample_point(
    decomp: &SpectralDecomposition,
    r: f64,
    n: usize,
    choice: MethodChoice,
    p_hint: f64,
    factory: &StreamFactory,
    budget: u64,
) -> Result<ConditionalEnsemble> {
    match choice {
        MethodChoice::Rejection => sample_conditional_rejection(decomp, r, n, factory, budget),
        MethodChoice::Decomposition => sample_conditional_decomposition(decomp, r, n, factory),
        MethodChoice::Auto if p_hint >= AUTO_REJECTION_THRESHOLD => {
            match sample_conditional_rejection(decomp, r, n, factory, budget) {
                Err(Error::BudgetExhausted {
                    attempts, accepted, ..
                }) => {
                    log::warn!(
                        "r = {r}: rejection accepted {accepted} of {n} in {attempts} attempts, switching to decomposition"
                    );
                    sample_conditional_decomposition(decomp, r, n, factory)
                }
                other => other,
            }
        }
        MethodChoice::Auto => sample_conditional_decomposition(decomp, r, n, factory),
    }
}

pub fn measure_point(
    ensemble: ConditionalEnsemble,
    eps_values: &[f64],
    decomp: &SpectralDecomposition,
    summary: &SpectrumSummary,
) -> Result<PointResult> {
    let r = ensemble.threshold;
    let overlap = eps_values
        .iter()
        .map(|&eps| {
            Ok((
                eps,
                estimate(&ensemble, overlap_indicator(eps))?,
                overlap_bound(r, eps, summary)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let sup_perp = estimate(&ensemble, |s| s.sup_perp_hat.unwrap_or(0.0))?;
    let par_sq = estimate(&ensemble, |s| s.par_sq)?;
    let perp_sq = estimate(&ensemble, |s| s.perp_sq)?;
    let coupling_violations = coupling_violations(&ensemble.samples, decomp.kappa1(), decomp.b_constant());
    Ok(PointResult {
        r,
        ensemble,
        overlap,
        sup_perp,
        par_sq,
        perp_sq,
        coupling_violations,
    })
}

fn eps_label(eps: f64) -> String {
    format!("eps{eps}")
}

pub fn write_ensemble_summary<W: Write>(mut out: W, points: &[PointResult]) -> Result<()> {
    let Some(first) = points.first() else {
        return Ok(());
    };
    let mut header = String::from("r,method,n,ess,p_event,p_event_se");
    for (eps, _, _) in &first.overlap {
        let l = eps_label(*eps);
        let _ = write!(header, ",p_overlap_{l},p_overlap_{l}_se");
    }
    header.push_str(",e_sup_perp,e_sup_perp_se,e_par_sq,e_par_sq_se,e_perp_sq,e_perp_sq_se");
    writeln!(out, "{header}")?;
    for p in points {
        let e = &p.ensemble;
        let mut line = format!(
            "{},{},{},{},{},{}",
            p.r,
            e.method.as_str(),
            e.len(),
            e.ess,
            e.p_event,
            e.p_event_se
        );
        for (_, est, _) in &p.overlap {
            let _ = write!(line, ",{},{}", est.value, est.se);
        }
        let _ = write!(
            line,
            ",{},{},{},{},{},{}",
            p.sup_perp.value, p.sup_perp.se, p.par_sq.value, p.par_sq.se, p.perp_sq.value, p.perp_sq.se
        );
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Concentration curves as CSV and as whitespace-separated plot data.
///
/// Columns: `r`, then per `eps` the estimate, its SE and the overlap bound,
/// then `e_sup_perp` and its SE.
pub fn emit_concentration_table<W: Write, V: Write>(
    points: &[PointResult],
    mut csv: W,
    mut dat: V,
) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::arg("points", "need at least two thresholds"));
    }
    let mut cols = vec!["r".to_string()];
    for (eps, _, _) in &points[0].overlap {
        let l = eps_label(*eps);
        cols.push(format!("p_overlap_{l}"));
        cols.push(format!("p_overlap_{l}_se"));
        cols.push(format!("overlap_bound_{l}"));
    }
    cols.push("e_sup_perp".into());
    cols.push("e_sup_perp_se".into());
    writeln!(csv, "{}", cols.join(","))?;
    writeln!(dat, "# {}", cols.join(" "))?;
    for p in points {
        let mut row = vec![p.r];
        for (_, est, bound) in &p.overlap {
            row.extend([est.value, est.se, bound.value]);
        }
        row.extend([p.sup_perp.value, p.sup_perp.se]);
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(csv, "{}", cells.join(","))?;
        writeln!(dat, "{}", cells.join(" "))?;
    }
    Ok(())
}

fn params(pairs: &[(&str, f64)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Closed forms against the measured points. Chernoff rows need a
/// non-empty unconditional batch.
pub fn build_report(
    points: &[PointResult],
    summary: &SpectrumSummary,
    decomp: &SpectralDecomposition,
    unconditional: &[NormRecord],
) -> Result<AnalysisReport> {
    let mut rep = AnalysisReport::default();
    let rho = rho_perp_bound(summary);

    if let (Some(a), false) = (default_chernoff_rate(summary), unconditional.is_empty()) {
        let n = unconditional.len() as f64;
        for u in CHERNOFF_POINTS {
            let p = unconditional.iter().filter(|s| s.perp_sq > u).count() as f64 / n;
            let se = (p * (1.0 - p) / n).sqrt();
            rep.push_bound(
                "chernoff_bound",
                "exponential-markov",
                params(&[("u", u), ("a", a)]),
                chernoff_bound(u, a, summary)?,
                p,
                se,
            );
        }
    }

    for p in points {
        let r = p.r;
        let e = &p.ensemble;
        if let Some(exact) = exact_norm_tail(r, summary) {
            rep.push(ReportRow {
                formula: "norm_tail".into(),
                tag: "hypoexponential-tail".into(),
                params: params(&[("r", r)]),
                closed_form: exact,
                mc: Some(e.p_event),
                se: Some(e.p_event_se),
                // weights lie in [0, 1], so a region no draw visited moves the
                // estimate by at most about p / n; the SE cannot see it
                verdict: Verdict::from_bool(
                    (e.p_event - exact).abs() <= 3.0 * e.p_event_se.max(e.p_event / e.len() as f64),
                ),
            });
        }
        rep.push(ReportRow {
            formula: "tail_asymptote".into(),
            tag: "large-r-tail".into(),
            params: params(&[("r", r)]),
            closed_form: tail_asymptote(r, summary, Field::Phi),
            mc: Some(e.p_event),
            se: Some(e.p_event_se),
            verdict: Verdict::Info,
        });
        for (eps, est, bound) in &p.overlap {
            rep.push_bound(
                "overlap_bound",
                "tilted-overlap",
                params(&[("r", r), ("eps", *eps)]),
                bound.value + 3.0 * bound.se,
                est.value,
                est.se,
            );
        }
        rep.push_bound(
            "rho_perp_bound",
            "orthogonal-cap",
            params(&[("r", r)]),
            rho,
            p.perp_sq.value,
            p.perp_sq.se,
        );
        rep.push(ReportRow {
            formula: "condensation_par".into(),
            tag: "parallel-takes-excess".into(),
            params: params(&[("r", r)]),
            closed_form: r - rho,
            mc: Some(p.par_sq.value),
            se: Some(p.par_sq.se),
            verdict: Verdict::from_bool(p.par_sq.value + 3.0 * p.par_sq.se > r - rho),
        });
        rep.push(ReportRow {
            formula: "coupled_sup_bound".into(),
            tag: "per-sample-violations".into(),
            params: params(&[("r", r), ("B", decomp.b_constant())]),
            closed_form: 0.0,
            mc: Some(p.coupling_violations as f64),
            se: None,
            verdict: Verdict::from_bool(p.coupling_violations == 0),
        });
    }

    rep.push(ReportRow {
        formula: "c_infinity".into(),
        tag: "psi-phi-tail-ratio".into(),
        params: String::new(),
        closed_form: c_infinity(summary),
        mc: None,
        se: None,
        verdict: Verdict::Info,
    });
    let lambda_q = 1.0 / (2.0 * summary.kappa1());
    let m = amplifier_moment(decomp.eigenvalues(), 2, 0.5 * lambda_q)?;
    if let MomentOutcome::Finite { value } = m.outcome {
        rep.push(ReportRow {
            formula: "amplifier_moment".into(),
            tag: "moment-threshold".into(),
            params: params(&[("q", 2.0), ("lambda", m.lambda), ("lambda_q", m.lambda_q)]),
            closed_form: value,
            mc: None,
            se: None,
            verdict: Verdict::Info,
        });
    }
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub report: AnalysisReport,
    pub points: Vec<PointResult>,
}

impl RunOutcome {
    pub fn all_pass(&self) -> bool {
        self.report.all_pass()
    }
}

/// Writes named files into `dest` through a hidden sibling directory that is
/// renamed into place by [`Staging::commit`] and deleted by [`Staging::abort`].
#[derive(Debug)]
pub struct Staging {
    dir: PathBuf,
    dest: PathBuf,
    files: Vec<String>,
}

impl Staging {
    pub fn new(dest: &Path) -> Result<Self> {
        let name = dest
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let dir = dest.with_file_name(format!(".{name}.partial"));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(Staging {
            dir,
            dest: dest.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn commit(self) -> Result<Vec<String>> {
        fs::create_dir_all(&self.dest)?;
        for f in &self.files {
            fs::rename(self.dir.join(f), self.dest.join(f))?;
        }
        fs::remove_dir_all(&self.dir)?;
        Ok(self.files.clone())
    }

    pub fn abort(self) {
        let _ = fs::remove_dir_all(&self.dir);
    }
}

fn ensemble_file(r: f64) -> String {
    format!("ensemble_r{r}.csv")
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    let mut staging = Staging::new(&config.output_dir)?;
    match run_into(config, &mut staging) {
        Ok((report, points)) => {
            let files = staging.commit()?;
            Ok(RunOutcome {
                output_dir: config.output_dir.clone(),
                files,
                report,
                points,
            })
        }
        Err(e) => {
            staging.abort();
            Err(e)
        }
    }
}

fn run_into(config: &ExperimentConfig, out: &mut Staging) -> Result<(AnalysisReport, Vec<PointResult>)> {
    let decomp = config.decompose()?;
    out.write("spectrum.json", &serde_json::to_vec_pretty(&decomp.to_export())?)?;
    let summary = SpectrumSummary::from_decomposition(&decomp);
    log::info!(
        "spectrum: {} modes, kappa_1 = {}, g_1 = {}, B = {}",
        decomp.mode_count(),
        decomp.kappa1(),
        decomp.g1(),
        decomp.b_constant()
    );

    let factory = StreamFactory::new(config.seed);
    let unconditional = sample_unconditional(&decomp, config.samples_per_r, &factory.fork(0));

    let mut points = Vec::with_capacity(config.r_values.len());
    for (i, &r) in config.r_values.iter().enumerate() {
        let p_hint = exact_norm_tail(r, &summary).unwrap_or_else(|| {
            unconditional.iter().filter(|s| s.norm2_sq > r).count() as f64 / unconditional.len() as f64
        });
        let ensemble = sample_point(
            &decomp,
            r,
            config.samples_per_r,
            config.method,
            p_hint,
            &factory.fork(1 + i as u64),
            config.attempt_budget,
        )?;
        log::info!(
            "r = {r}: {} samples by {}, ESS {:.1}",
            ensemble.len(),
            ensemble.method.as_str(),
            ensemble.ess
        );
        let mut csv = Vec::new();
        write_sample_csv(&mut csv, &ensemble.samples, Some(&ensemble.weights))?;
        out.write(&ensemble_file(r), &csv)?;
        points.push(measure_point(ensemble, &config.eps_values, &decomp, &summary)?);
    }

    let mut summary_csv = Vec::new();
    write_ensemble_summary(&mut summary_csv, &points)?;
    out.write("ensembles.csv", &summary_csv)?;

    let report = build_report(&points, &summary, &decomp, &unconditional)?;
    let ensembles: Vec<ConditionalEnsemble> = points.iter().map(|p| p.ensemble.clone()).collect();
    let condensation = condensation_curves(&ensembles, &summary)?;
    let analysis = json!({
        "spectrum": {
            "groups": summary.groups().iter().map(|&(k, g)| json!({"kappa": k, "g": g})).collect::<Vec<_>>(),
            "B": decomp.b_constant(),
            "tilt_normalizer": summary.tilt_normalizer(),
            "c_infinity": c_infinity(&summary),
            "rho_perp_bound": rho_perp_bound(&summary),
        },
        "condensation": condensation,
        "rows": report.rows,
        "all_pass": report.all_pass(),
    });
    out.write("analysis.json", &serde_json::to_vec_pretty(&analysis)?)?;
    out.write("analysis.txt", report.to_text().as_bytes())?;

    if points.len() >= 2 {
        let (mut csv, mut dat) = (Vec::new(), Vec::new());
        emit_concentration_table(&points, &mut csv, &mut dat)?;
        out.write("concentration.csv", &csv)?;
        out.write("concentration.dat", &dat)?;
    }

    let mut files = out.files().to_vec();
    files.push("manifest.json".into());
    files.sort();
    let manifest = json!({
        "tool": "klcond",
        "versions": { env!("CARGO_PKG_NAME"): env!("CARGO_PKG_VERSION") },
        "config_sha256": config.sha256(),
        "config": config,
        "files": files,
    });
    out.write("manifest.json", &serde_json::to_vec_pretty(&manifest)?)?;
    Ok((report, points))
}
