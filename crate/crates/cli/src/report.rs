//! Report schema and task execution. One result per task, status ok or
//! error; sweep tasks carry a row table plus its CSV rendering. Reports are
//! deterministic for a fixed config and seed, so timings go to stderr, not
//! into the JSON.

use std::collections::BTreeMap;

use serde::Serialize;

use gaborstab::bounds::{
    bspline_bound_recursion, compute_nh, fourier_side_bounds, painless_bounds, rect_bounds,
    FrameBounds, NhConvention,
};
use gaborstab::numerics::{
    discretize, empirical_frame_bounds, EmpiricalBounds, OverflowPolicy, PowerIterOpts,
    TestSubspace,
};
use gaborstab::stability::{
    certify_bandlimited, certify_bspline, certify_compact_support, certify_wiener_amalgam,
    nsgf_overlap_check, paley_wiener_certificate, OverlapCheck, StabilityCertificate, Theorem,
};

use crate::config::{
    apply_param, build_experiment, check_preconditions, BoundsMethod, Expect, Experiment,
    ExperimentConfig, SweepParam, TaskSpec,
};

pub const SCHEMA_VERSION: u32 = 1;
const DEFAULT_TRUNCATION: usize = 10_000;

#[derive(Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: Tool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: ExperimentConfig,
    pub results: Vec<TaskResult>,
}

#[derive(Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Serialize)]
pub struct TaskResult {
    pub task: &'static str,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<FrameBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<EmpiricalBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expect>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expectation_met: Option<bool>,
}

impl TaskResult {
    fn new(task: &'static str) -> Self {
        TaskResult {
            task,
            status: "ok",
            error: None,
            bounds: None,
            certificate: None,
            overlap: None,
            empirical: None,
            sweep: None,
            expect: None,
            expectation_met: None,
        }
    }

    fn fail(task: &'static str, msg: String) -> Self {
        let mut r = TaskResult::new(task);
        r.status = "error";
        r.error = Some(msg);
        r
    }
}

/// Flat certificate record: theorem id plus the numbers a reader plots.
#[derive(Serialize)]
pub struct CertificateRecord {
    pub theorem: &'static str,
    pub margin: f64,
    pub threshold: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_prime: Option<f64>,
    pub inputs_digest: String,
    pub notes: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub aux: BTreeMap<&'static str, f64>,
}

impl From<StabilityCertificate> for CertificateRecord {
    fn from(c: StabilityCertificate) -> Self {
        CertificateRecord {
            theorem: c.theorem.id(),
            margin: c.margin,
            threshold: c.threshold,
            passed: c.passed,
            a_prime: c.perturbed.map(|fb| fb.lower),
            b_prime: c.perturbed.map(|fb| fb.upper),
            inputs_digest: c.inputs_digest,
            notes: c.notes,
            aux: c.aux,
        }
    }
}

#[derive(Serialize)]
pub struct SweepResult {
    pub param: &'static str,
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub csv: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<String>,
}

#[derive(Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub metrics: BTreeMap<String, f64>,
}

/// Outcome flags that decide the process exit code.
#[derive(Default)]
pub struct Outcome {
    pub task_error: bool,
    pub expectation_failed: bool,
}

pub fn execute_tasks(
    cfg: &ExperimentConfig,
    exp: &Experiment,
    tasks: &[TaskSpec],
    config_path: &std::path::Path,
    seed: Option<u64>,
    outcome: &mut Outcome,
) -> Vec<TaskResult> {
    let mut results = Vec::with_capacity(tasks.len());
    for task in tasks {
        let started = std::time::Instant::now();
        let result = match task {
            TaskSpec::Sweep { param, values, tasks: inner } => {
                run_sweep(cfg, *param, values, inner, config_path, seed, outcome)
            }
            _ => run_single(exp, task, seed, outcome),
        };
        eprintln!(
            "{} task: {:.1} ms",
            task.kind(),
            started.elapsed().as_secs_f64() * 1e3
        );
        if result.status == "error" {
            outcome.task_error = true;
        }
        results.push(result);
    }
    results
}

fn run_single(
    exp: &Experiment,
    task: &TaskSpec,
    seed: Option<u64>,
    outcome: &mut Outcome,
) -> TaskResult {
    match task {
        TaskSpec::Bounds { method, truncation } => {
            match compute_bounds(exp, *method, truncation.unwrap_or(DEFAULT_TRUNCATION)) {
                Ok(fb) => {
                    let mut r = TaskResult::new("bounds");
                    r.bounds = Some(fb);
                    r
                }
                Err(e) => TaskResult::fail("bounds", e),
            }
        }
        TaskSpec::Certify { theorem, expect, base_method, p, lambda, mu, truncation } => {
            let th = Theorem::parse(theorem).expect("validated");
            let trunc = truncation.unwrap_or(DEFAULT_TRUNCATION);
            let made = run_certify(exp, th, *base_method, *p, *lambda, *mu, trunc);
            match made {
                Ok(CertifyOutput::Certificate(cert)) => {
                    let mut r = TaskResult::new("certify");
                    apply_expectation(&mut r, *expect, cert.passed, outcome);
                    r.certificate = Some(cert.into());
                    r
                }
                Ok(CertifyOutput::Overlap(check)) => {
                    let mut r = TaskResult::new("certify");
                    apply_expectation(&mut r, *expect, check.holds, outcome);
                    r.overlap = Some(check);
                    r
                }
                Err(e) => TaskResult::fail("certify", e),
            }
        }
        TaskSpec::Verify { support, band, tol, max_iter } => {
            match run_verify(exp, *support, *band, *tol, *max_iter, seed) {
                Ok(eb) => {
                    let mut r = TaskResult::new("verify");
                    r.empirical = Some(eb);
                    r
                }
                Err(e) => TaskResult::fail("verify", e),
            }
        }
        TaskSpec::Sweep { .. } => unreachable!("sweeps dispatch in execute_tasks"),
    }
}

fn apply_expectation(
    r: &mut TaskResult,
    expect: Option<Expect>,
    passed: bool,
    outcome: &mut Outcome,
) {
    if let Some(e) = expect {
        let met = match e {
            Expect::Pass => passed,
            Expect::Fail => !passed,
        };
        r.expect = Some(e);
        r.expectation_met = Some(met);
        if !met {
            outcome.expectation_failed = true;
        }
    }
}

fn compute_bounds(
    exp: &Experiment,
    method: BoundsMethod,
    truncation: usize,
) -> Result<FrameBounds, String> {
    let a = exp.lattice.a();
    let b = exp.lattice.b();
    let fb = match method {
        BoundsMethod::Painless => painless_bounds(&exp.window, a, b),
        BoundsMethod::FourierSide => fourier_side_bounds(&exp.window, a, b, truncation),
        BoundsMethod::Rect => rect_bounds(a, b),
    };
    fb.map_err(|e| e.to_string())
}

enum CertifyOutput {
    Certificate(StabilityCertificate),
    Overlap(OverlapCheck),
}

fn run_certify(
    exp: &Experiment,
    th: Theorem,
    base_method: Option<BoundsMethod>,
    p: Option<u32>,
    lambda: Option<f64>,
    mu: Option<f64>,
    truncation: usize,
) -> Result<CertifyOutput, String> {
    let a = exp.lattice.a();
    let b = exp.lattice.b();
    let w = &exp.window;
    let base = || compute_bounds(exp, base_method.unwrap_or(BoundsMethod::Painless), truncation);
    let cert = match th {
        Theorem::PaleyWiener => {
            let base = base()?;
            paley_wiener_certificate(&base, lambda.expect("validated"), mu.expect("validated"))
        }
        Theorem::Thm1Compact => {
            let base = base()?;
            certify_compact_support(w, a, b, &base, &exp.pattern)
        }
        Theorem::CorBspline => {
            let p = p.expect("validated");
            let base = base()?;
            let nh = compute_nh(w, b, truncation, NhConvention::ThreeQuarter)
                .map_err(|e| e.to_string())?;
            let bounds_p =
                bspline_bound_recursion(&base, a, &nh, p).map_err(|e| e.to_string())?;
            certify_bspline(w, p, a, b, &bounds_p, &exp.pattern)
        }
        Theorem::ThmWienerAmalgam => {
            let base = base()?;
            certify_wiener_amalgam(w, a, b, &base, &exp.pattern)
        }
        Theorem::ThmBandlimited => {
            let base = base()?;
            certify_bandlimited(w, a, b, &base, &exp.pattern)
        }
        Theorem::CorNsgfOverlap => {
            let c = w.support_len().ok_or("needs a compactly supported window")?;
            let columns = column_constant_deltas(&exp.pattern)?;
            let check = nsgf_overlap_check(c, a, &columns).map_err(|e| e.to_string())?;
            return Ok(CertifyOutput::Overlap(check));
        }
    };
    cert.map(CertifyOutput::Certificate).map_err(|e| e.to_string())
}

/// Per-column shift for patterns that are constant across frequency rows.
fn column_constant_deltas(
    pattern: &gaborstab::gabor::JitterPattern,
) -> Result<BTreeMap<i64, f64>, String> {
    let mut columns: BTreeMap<i64, f64> = BTreeMap::new();
    for (_, k, d) in pattern.entries() {
        match columns.get(&k) {
            Some(prev) if *prev != d => {
                return Err(format!(
                    "overlap check needs column-constant jitter; column k = {k} mixes \
                     {prev} and {d}"
                ))
            }
            _ => {
                columns.insert(k, d);
            }
        }
    }
    if columns.is_empty() {
        return Err("overlap check needs a nonempty jitter pattern".into());
    }
    Ok(columns)
}

fn run_verify(
    exp: &Experiment,
    support: [f64; 2],
    band: f64,
    tol: Option<f64>,
    max_iter: Option<usize>,
    seed: Option<u64>,
) -> Result<EmpiricalBounds, String> {
    let sys = discretize(
        &exp.window,
        &exp.lattice,
        &exp.pattern,
        &exp.grid,
        OverflowPolicy::SkipAtom,
    )
    .map_err(|e| e.to_string())?;
    let subspace = TestSubspace { support: (support[0], support[1]), band_limit: band };
    let mut opts = PowerIterOpts::default();
    if let Some(t) = tol {
        opts.tol = t;
    }
    if let Some(m) = max_iter {
        opts.max_iter = m;
    }
    if let Some(s) = seed {
        opts.seed = s;
    }
    empirical_frame_bounds(&sys, &subspace, &opts).map_err(|e| e.to_string())
}

/// Column layout for one inner task; names are prefixed t<i>_ when the
/// sweep carries several tasks so the CSV stays unambiguous.
fn metric_names(task: &TaskSpec) -> Vec<&'static str> {
    match task {
        TaskSpec::Bounds { .. } => vec!["A", "B"],
        TaskSpec::Certify { theorem, .. } => {
            if theorem == Theorem::CorNsgfOverlap.id() {
                vec!["holds", "threshold", "max_increment"]
            } else {
                vec!["margin", "threshold", "passed", "A_prime", "B_prime"]
            }
        }
        TaskSpec::Verify { .. } => vec!["lambda_min", "lambda_max"],
        TaskSpec::Sweep { .. } => vec![],
    }
}

fn metric_values(result: &TaskResult) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    if let Some(fb) = &result.bounds {
        out.push(("A", fb.lower));
        out.push(("B", fb.upper));
    }
    if let Some(cert) = &result.certificate {
        out.push(("margin", cert.margin));
        out.push(("threshold", cert.threshold));
        out.push(("passed", if cert.passed { 1.0 } else { 0.0 }));
        if let Some(a) = cert.a_prime {
            out.push(("A_prime", a));
        }
        if let Some(b) = cert.b_prime {
            out.push(("B_prime", b));
        }
    }
    if let Some(check) = &result.overlap {
        out.push(("holds", if check.holds { 1.0 } else { 0.0 }));
        out.push(("threshold", check.threshold));
        out.push(("max_increment", check.max_increment));
    }
    if let Some(eb) = &result.empirical {
        out.push(("lambda_min", eb.lambda_min));
        out.push(("lambda_max", eb.lambda_max));
    }
    out
}

fn run_sweep(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    inner: &[TaskSpec],
    config_path: &std::path::Path,
    seed: Option<u64>,
    outcome: &mut Outcome,
) -> TaskResult {
    let prefixed = inner.len() > 1;
    let mut columns = Vec::new();
    for (i, task) in inner.iter().enumerate() {
        for name in metric_names(task) {
            if prefixed {
                columns.push(format!("t{i}_{name}"));
            } else {
                columns.push(name.to_string());
            }
        }
    }

    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        rows.push(sweep_row(cfg, param, value, inner, prefixed, config_path, seed, outcome));
    }
    if rows.iter().any(|r| r.status == "error") {
        outcome.task_error = true;
    }

    let csv = render_csv(&columns, &rows);
    let mut r = TaskResult::new("sweep");
    r.sweep = Some(SweepResult { param: param.id(), columns, rows, csv, csv_path: None });
    r
}

#[allow(clippy::too_many_arguments)]
fn sweep_row(
    cfg: &ExperimentConfig,
    param: SweepParam,
    value: f64,
    inner: &[TaskSpec],
    prefixed: bool,
    config_path: &std::path::Path,
    seed: Option<u64>,
    outcome: &mut Outcome,
) -> SweepRow {
    let mut row = SweepRow { value, status: "ok", error: None, metrics: BTreeMap::new() };
    let fail = |row: &mut SweepRow, msg: String| {
        row.status = "error";
        if row.error.is_none() {
            row.error = Some(msg);
        }
    };

    let point_cfg = match apply_param(cfg, param, value) {
        Ok(c) => c,
        Err(e) => {
            fail(&mut row, e);
            return row;
        }
    };
    let exp = match build_experiment(&point_cfg, config_path) {
        Ok(e) => e,
        Err(e) => {
            fail(&mut row, e.to_string());
            return row;
        }
    };
    for (i, task) in inner.iter().enumerate() {
        if let Err(e) = check_preconditions(&exp, task) {
            fail(&mut row, format!("task {i}: {e}"));
            continue;
        }
        let result = run_single(&exp, task, seed, outcome);
        if let Some(e) = &result.error {
            fail(&mut row, format!("task {i}: {e}"));
            continue;
        }
        for (name, v) in metric_values(&result) {
            let key = if prefixed { format!("t{i}_{name}") } else { name.to_string() };
            row.metrics.insert(key, v);
        }
    }
    row
}

fn render_csv(columns: &[String], rows: &[SweepRow]) -> String {
    let mut out = String::from("value");
    for c in columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{}", row.value));
        for c in columns {
            out.push(',');
            if let Some(v) = row.metrics.get(c) {
                out.push_str(&format!("{v}"));
            }
        }
        out.push('\n');
    }
    out
}
