//! Experiment configs: TOML schema, validation, and construction of the
//! core objects (window, lattice, jitter pattern, grid) they describe.
//!
//! Validation failures are config errors (exit code 2) and happen before
//! any task runs; errors raised later, while a task executes, are recorded
//! in the report instead (exit code 1).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gaborstab::gabor::{
    generate_jitter, GaborLattice, JitterPattern, JitterShape,
};
use gaborstab::grid::GridSpec;
use gaborstab::stability::Theorem;
use gaborstab::windows::{SampledWindow, Window};

/// Default power-iteration seed when neither the config nor --seed sets one.
pub const DEFAULT_SEED: u64 = 0x5EED_0001;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub window: WindowSpec,
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub jitter: JitterSpec,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    /// "rect" | "bspline" | "sinc" | "sampled"
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_limit: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub a: f64,
    pub b: f64,
    #[serde(default = "default_n_range")]
    pub n_range: [i64; 2],
    #[serde(default = "default_k_range")]
    pub k_range: [i64; 2],
}

fn default_n_range() -> [i64; 2] {
    [-32, 32]
}

fn default_k_range() -> [i64; 2] {
    [-32, 32]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterSpec {
    /// "zero" | "uniform-random" | "geometric-in-n" | "column-constant" |
    /// "separable" | "csv"
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl Default for JitterSpec {
    fn default() -> Self {
        JitterSpec {
            shape: "zero".into(),
            bound: None,
            seed: None,
            peak: None,
            ratio: None,
            ratio_n: None,
            ratio_k: None,
            d: None,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_x_min() -> f64 {
    -16.0
}

fn default_x_max() -> f64 {
    16.0
}

fn default_points() -> usize {
    8192
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { x_min: default_x_min(), x_max: default_x_max(), points: default_points() }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundsMethod {
    Painless,
    FourierSide,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Amplitude,
    A,
    B,
    P,
}

impl SweepParam {
    pub fn parse(s: &str) -> Option<SweepParam> {
        match s {
            "amplitude" => Some(SweepParam::Amplitude),
            "a" => Some(SweepParam::A),
            "b" => Some(SweepParam::B),
            "p" => Some(SweepParam::P),
            _ => None,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            SweepParam::Amplitude => "amplitude",
            SweepParam::A => "a",
            SweepParam::B => "b",
            SweepParam::P => "p",
        }
    }
}

/// One task. Internally tagged on `kind`, so a config reads
/// `[[tasks]] kind = "certify" theorem = "thm1-compact"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskSpec {
    Bounds {
        method: BoundsMethod,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<usize>,
    },
    Certify {
        theorem: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Expect>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base_method: Option<BoundsMethod>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<usize>,
    },
    Verify {
        support: [f64; 2],
        band: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iter: Option<usize>,
    },
    Sweep {
        param: SweepParam,
        values: Vec<f64>,
        tasks: Vec<TaskSpec>,
    },
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Bounds { .. } => "bounds",
            TaskSpec::Certify { .. } => "certify",
            TaskSpec::Verify { .. } => "verify",
            TaskSpec::Sweep { .. } => "sweep",
        }
    }
}

/// Resolved core objects for one parameter point.
pub struct Experiment {
    pub window: Window,
    pub lattice: GaborLattice,
    pub pattern: JitterPattern,
    pub grid: GridSpec,
}

/// A config problem; always maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = Result<T, ConfigError>;

fn cerr<T>(msg: impl Into<String>) -> CResult<T> {
    Err(ConfigError(msg.into()))
}

pub fn load_config(path: &Path) -> CResult<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

/// Directory that relative window/jitter paths resolve against.
pub fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

pub fn build_window(spec: &WindowSpec, config_path: &Path) -> CResult<Window> {
    match spec.kind.as_str() {
        "rect" => Ok(Window::Rect),
        "bspline" => match spec.p {
            Some(p) if p >= 1 => Ok(Window::Bspline { p }),
            Some(p) => cerr(format!("window.p must be >= 1, got {p}")),
            None => cerr("window.kind = \"bspline\" requires window.p"),
        },
        "sinc" => Ok(Window::Sinc),
        "sampled" => {
            let rel = spec
                .path
                .as_deref()
                .ok_or_else(|| ConfigError("window.kind = \"sampled\" requires window.path".into()))?;
            let full = resolve(config_path, rel);
            let text = fs::read_to_string(&full)
                .map_err(|e| ConfigError(format!("cannot read window file {}: {e}", full.display())))?;
            let mut sw = SampledWindow::from_csv(&text)
                .map_err(|e| ConfigError(format!("window file {}: {e}", full.display())))?;
            if let Some(m) = spec.band_limit {
                if !(m.is_finite() && m > 0.0) {
                    return cerr(format!("window.band_limit must be positive, got {m}"));
                }
                sw = sw.with_band_limit(m);
            }
            Ok(Window::Sampled(sw))
        }
        other => cerr(format!(
            "unknown window.kind {other:?}; expected rect, bspline, sinc, or sampled"
        )),
    }
}

pub fn build_lattice(spec: &LatticeSpec) -> CResult<GaborLattice> {
    GaborLattice::new(
        spec.a,
        spec.b,
        (spec.n_range[0], spec.n_range[1]),
        (spec.k_range[0], spec.k_range[1]),
    )
    .map_err(|e| ConfigError(format!("lattice: {e}")))
}

/// Whether this shape exposes a scalar amplitude a sweep can set.
pub fn amplitude_field(shape: &str) -> Option<&'static str> {
    match shape {
        "uniform-random" => Some("bound"),
        "geometric-in-n" | "separable" => Some("peak"),
        "column-constant" => Some("d"),
        _ => None,
    }
}

pub fn build_pattern(
    spec: &JitterSpec,
    lattice: &GaborLattice,
    config_path: &Path,
    fallback_seed: Option<u64>,
) -> CResult<JitterPattern> {
    let need = |name: &str, v: Option<f64>| -> CResult<f64> {
        v.ok_or_else(|| {
            ConfigError(format!("jitter.shape = {:?} requires jitter.{name}", spec.shape))
        })
    };
    let shape = match spec.shape.as_str() {
        "zero" => return Ok(JitterPattern::zero()),
        "csv" => {
            let rel = spec
                .path
                .as_deref()
                .ok_or_else(|| ConfigError("jitter.shape = \"csv\" requires jitter.path".into()))?;
            let full = resolve(config_path, rel);
            let text = fs::read_to_string(&full)
                .map_err(|e| ConfigError(format!("cannot read jitter file {}: {e}", full.display())))?;
            return JitterPattern::from_csv(&text)
                .map_err(|e| ConfigError(format!("jitter file {}: {e}", full.display())));
        }
        "uniform-random" => JitterShape::UniformRandom {
            bound: need("bound", spec.bound)?,
            seed: spec.seed.or(fallback_seed).unwrap_or(DEFAULT_SEED),
        },
        "geometric-in-n" => JitterShape::GeometricInN {
            peak: need("peak", spec.peak)?,
            ratio: need("ratio", spec.ratio)?,
        },
        "column-constant" => JitterShape::ColumnConstant { d: need("d", spec.d)? },
        "separable" => JitterShape::Separable {
            peak: need("peak", spec.peak)?,
            ratio_n: need("ratio_n", spec.ratio_n)?,
            ratio_k: need("ratio_k", spec.ratio_k)?,
        },
        other => {
            return cerr(format!(
                "unknown jitter.shape {other:?}; expected zero, uniform-random, \
                 geometric-in-n, column-constant, separable, or csv"
            ))
        }
    };
    generate_jitter(lattice, &shape).map_err(|e| ConfigError(format!("jitter: {e}")))
}

pub fn build_grid(section: &GridSection) -> CResult<GridSpec> {
    GridSpec::new(section.x_min, section.x_max, section.points)
        .map_err(|e| ConfigError(format!("grid: {e}")))
}

pub fn build_experiment(cfg: &ExperimentConfig, config_path: &Path) -> CResult<Experiment> {
    let window = build_window(&cfg.window, config_path)?;
    let lattice = build_lattice(&cfg.lattice)?;
    let pattern = build_pattern(&cfg.jitter, &lattice, config_path, cfg.seed)?;
    let grid = build_grid(&cfg.grid)?;
    Ok(Experiment { window, lattice, pattern, grid })
}

/// Structural checks that do not depend on parameter values: task list
/// shape, theorem names, per-theorem required fields, sweep value lists.
pub fn validate_structure(cfg: &ExperimentConfig) -> CResult<()> {
    if cfg.tasks.is_empty() {
        return cerr("task list is empty");
    }
    for (i, task) in cfg.tasks.iter().enumerate() {
        validate_task_structure(cfg, task, i, true)?;
    }
    Ok(())
}

fn validate_task_structure(
    cfg: &ExperimentConfig,
    task: &TaskSpec,
    index: usize,
    allow_sweep: bool,
) -> CResult<()> {
    let at = |msg: String| ConfigError(format!("tasks[{index}]: {msg}"));
    match task {
        TaskSpec::Bounds { truncation, .. } => {
            if truncation == &Some(0) {
                return Err(at("truncation must be >= 1".into()));
            }
        }
        TaskSpec::Certify { theorem, p, lambda, mu, truncation, .. } => {
            let th = Theorem::parse(theorem)
                .ok_or_else(|| at(format!("unknown theorem {theorem:?}")))?;
            if truncation == &Some(0) {
                return Err(at("truncation must be >= 1".into()));
            }
            match th {
                Theorem::PaleyWiener => {
                    let l = lambda.ok_or_else(|| at("paley-wiener requires lambda".into()))?;
                    let m = mu.ok_or_else(|| at("paley-wiener requires mu".into()))?;
                    if !(l.is_finite() && l >= 0.0 && m.is_finite() && m >= 0.0) {
                        return Err(at(format!("need lambda, mu >= 0, got {l}, {m}")));
                    }
                }
                Theorem::CorBspline => {
                    let p = p.ok_or_else(|| at("cor-bspline requires p".into()))?;
                    if p == 0 {
                        return Err(at("p must be >= 1".into()));
                    }
                }
                _ => {}
            }
        }
        TaskSpec::Verify { support, band, tol, max_iter } => {
            if !(support[0].is_finite() && support[1].is_finite() && support[0] < support[1]) {
                return Err(at(format!("support [{}, {}] is empty", support[0], support[1])));
            }
            if !(band.is_finite() && *band > 0.0) {
                return Err(at(format!("band must be positive, got {band}")));
            }
            if let Some(t) = tol {
                if !(t.is_finite() && *t > 0.0) {
                    return Err(at(format!("tol must be positive, got {t}")));
                }
            }
            if max_iter == &Some(0) {
                return Err(at("max_iter must be >= 1".into()));
            }
        }
        TaskSpec::Sweep { param, values, tasks } => {
            if !allow_sweep {
                return Err(at("sweep tasks cannot nest".into()));
            }
            if values.is_empty() {
                return Err(at("sweep values list is empty".into()));
            }
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return Err(at(format!("sweep values must be finite, got {v}")));
            }
            if tasks.is_empty() {
                return Err(at("sweep needs at least one inner task".into()));
            }
            match param {
                SweepParam::Amplitude => {
                    if amplitude_field(&cfg.jitter.shape).is_none() {
                        return Err(at(format!(
                            "amplitude sweep needs a jitter shape with an amplitude \
                             parameter, got {:?}",
                            cfg.jitter.shape
                        )));
                    }
                }
                SweepParam::P => {
                    if cfg.window.kind != "bspline" {
                        return Err(at(format!(
                            "p sweep needs window.kind = \"bspline\", got {:?}",
                            cfg.window.kind
                        )));
                    }
                    if let Some(v) = values.iter().find(|v| v.fract() != 0.0 || **v < 1.0) {
                        return Err(at(format!("p values must be integers >= 1, got {v}")));
                    }
                }
                SweepParam::A | SweepParam::B => {}
            }
            for inner in tasks {
                validate_task_structure(cfg, inner, index, false)?;
            }
        }
    }
    Ok(())
}

/// Value-dependent preconditions of one task against built core objects.
/// At the top level a violation is a config error; inside a sweep the same
/// message becomes a row error.
pub fn check_preconditions(exp: &Experiment, task: &TaskSpec) -> Result<(), String> {
    let a = exp.lattice.a();
    let b = exp.lattice.b();
    let w = &exp.window;
    let eps = 1e-12;
    let compact = |label: &str| -> Result<f64, String> {
        w.support_len().ok_or(format!("{label} requires a compactly supported window"))
    };
    match task {
        TaskSpec::Bounds { method, .. } => match method {
            BoundsMethod::Painless => {
                let c = compact("painless bounds")?;
                if a > c * (1.0 + eps) || c > (1.0 / b) * (1.0 + eps) {
                    return Err(format!(
                        "painless regime needs a <= c <= 1/b, got a = {a}, c = {c}, 1/b = {}",
                        1.0 / b
                    ));
                }
            }
            BoundsMethod::Rect => {
                if !matches!(w, Window::Rect) {
                    return Err("rect bounds apply to the box window only".into());
                }
                if a > 1.0 + eps || b > 1.0 + eps {
                    return Err(format!("rect bounds need a, b <= 1, got a = {a}, b = {b}"));
                }
            }
            BoundsMethod::FourierSide => {
                if w.ft_eval(0.0).is_none() && w.support_len().is_none() {
                    return Err(
                        "fourier-side bounds need a closed-form transform or compact support"
                            .into(),
                    );
                }
            }
        },
        TaskSpec::Certify { theorem, base_method, .. } => {
            let th = Theorem::parse(theorem).expect("validated");
            if th != Theorem::PaleyWiener {
                let base = base_method.unwrap_or(BoundsMethod::Painless);
                check_preconditions(exp, &TaskSpec::Bounds { method: base, truncation: None })?;
            }
            match th {
                Theorem::Thm1Compact | Theorem::CorBspline | Theorem::CorNsgfOverlap => {
                    let c = compact(theorem)?;
                    if a > c + eps {
                        return Err(format!(
                            "{theorem} needs a <= support length, got a = {a}, c = {c}"
                        ));
                    }
                    if th != Theorem::CorNsgfOverlap && exp.pattern.max_abs() >= 0.5 {
                        return Err(format!(
                            "jitter entries must stay in (-1/2, 1/2), max = {}",
                            exp.pattern.max_abs()
                        ));
                    }
                }
                Theorem::ThmWienerAmalgam => {
                    if matches!(w, Window::Rect | Window::Bspline { p: 1 }) {
                        return Err(
                            "thm-wiener-amalgam needs an essentially bounded derivative; \
                             the box window has jumps"
                                .into(),
                        );
                    }
                }
                Theorem::ThmBandlimited => {
                    let m = w
                        .band_limit()
                        .ok_or("thm-bandlimited requires a declared band limit")?;
                    let m_int = if (m - m.round()).abs() < 1e-9 {
                        m.round()
                    } else {
                        m.ceil()
                    }
                    .max(1.0);
                    let regime = 1.0 / (4.0 * m_int);
                    if exp.pattern.max_abs() >= regime {
                        return Err(format!(
                            "thm-bandlimited needs every |delta| < 1/(4M) = {regime}, max = {}",
                            exp.pattern.max_abs()
                        ));
                    }
                }
                Theorem::PaleyWiener => {}
            }
        }
        TaskSpec::Verify { support, band, .. } => {
            let nyquist = 0.5 * exp.grid.n_points as f64 / (exp.grid.x_max - exp.grid.x_min);
            if support[0] < exp.grid.x_min || support[1] > exp.grid.x_max {
                return Err(format!(
                    "verify support [{}, {}] exceeds the grid [{}, {}]",
                    support[0], support[1], exp.grid.x_min, exp.grid.x_max
                ));
            }
            if *band > nyquist {
                return Err(format!("verify band {band} exceeds the grid Nyquist {nyquist}"));
            }
        }
        TaskSpec::Sweep { .. } => {}
    }
    Ok(())
}

/// Sets the swept parameter to `value` on a copy of the config.
pub fn apply_param(
    cfg: &ExperimentConfig,
    param: SweepParam,
    value: f64,
) -> Result<ExperimentConfig, String> {
    let mut out = cfg.clone();
    match param {
        SweepParam::A => out.lattice.a = value,
        SweepParam::B => out.lattice.b = value,
        SweepParam::P => out.window.p = Some(value as u32),
        SweepParam::Amplitude => match amplitude_field(&cfg.jitter.shape) {
            Some("bound") => out.jitter.bound = Some(value),
            Some("peak") => out.jitter.peak = Some(value),
            Some("d") => out.jitter.d = Some(value),
            _ => {
                return Err(format!(
                    "jitter shape {:?} has no amplitude parameter",
                    cfg.jitter.shape
                ))
            }
        },
    }
    Ok(out)
}
