//! Grid-level verification oracle: discretized Gabor systems, the frame
//! operator and its extremal eigenvalues, the short-time transform with its
//! energy identities, and periodization checks.
//!
//! Everything here is deliberately independent of the certificate formulas:
//! inner products are midpoint-quadrature sums, eigenvalues come from power
//! iteration, and transform identities are checked through an actual FFT
//! path rather than the algebraic shortcut that would make them tautologies.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::Fft;

use crate::error::{Error, Result};
use crate::gabor::{GaborLattice, JitterPattern};
use crate::grid::{GridSpec, SampledFunction};
use crate::util::{fnv1a_hex, splitmix64, splitmix_unit};
use crate::windows::Window;

/// How finely the grid must resolve the envelope support.
const SUPPORT_RESOLUTION: f64 = 64.0;

/// One sampled time-frequency atom, stored only over its support window.
#[derive(Debug, Clone)]
pub struct DiscretizedAtom {
    pub n: i64,
    pub k: i64,
    start: usize,
    values: Vec<Complex64>,
    pub norm_sq: f64,
}

impl DiscretizedAtom {
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// What to do with atoms whose support does not fit inside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverflowPolicy {
    /// Reject the whole system.
    Error,
    /// Drop the atom and record its indices (finite-section truncation).
    SkipAtom,
}

/// A finite section of a jittered Gabor system sampled on a grid.
#[derive(Debug, Clone)]
pub struct DiscretizedSystem {
    grid: GridSpec,
    atoms: Vec<DiscretizedAtom>,
    skipped: Vec<(i64, i64)>,
    digest: String,
    envelope_support: f64,
    mod_freq_max: f64,
    center_min: f64,
    center_max: f64,
}

impl DiscretizedSystem {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn atoms(&self) -> &[DiscretizedAtom] {
        &self.atoms
    }

    pub fn skipped(&self) -> &[(i64, i64)] {
        &self.skipped
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Largest modulation frequency among the atoms.
    pub fn mod_freq_max(&self) -> f64 {
        self.mod_freq_max
    }

    /// Range of translation centers among the atoms.
    pub fn center_range(&self) -> (f64, f64) {
        (self.center_min, self.center_max)
    }

    pub fn envelope_support(&self) -> f64 {
        self.envelope_support
    }
}

struct AtomSpec {
    n: i64,
    k: i64,
    center: f64,
    freq: f64,
}

/// Shared sampling path for time-side and transform-side systems: atoms
/// e^{2 pi i freq x} env(x - center) kept only where the envelope lives.
fn build_system(
    env: &Window,
    specs: impl Iterator<Item = AtomSpec>,
    grid: &GridSpec,
    policy: OverflowPolicy,
    digest_seed: String,
) -> Result<DiscretizedSystem> {
    let c = env.support_len().ok_or(Error::UnboundedSupport)?;
    let needed = c / SUPPORT_RESOLUTION;
    if grid.dx() > needed * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse { dx: grid.dx(), needed });
    }
    let (w_lo, w_hi) = env.support().unwrap();
    let mut atoms = Vec::new();
    let mut skipped = Vec::new();
    let mut mod_freq_max = 0.0f64;
    let mut center_min = f64::INFINITY;
    let mut center_max = f64::NEG_INFINITY;
    let dx = grid.dx();
    for spec in specs {
        let (lo, hi) = (spec.center + w_lo, spec.center + w_hi);
        if !grid.contains_interval(lo, hi) {
            match policy {
                OverflowPolicy::Error => {
                    return Err(Error::SupportOverflow { n: spec.n, k: spec.k })
                }
                OverflowPolicy::SkipAtom => {
                    skipped.push((spec.n, spec.k));
                    continue;
                }
            }
        }
        let (jlo, jhi) = grid
            .index_window(lo, hi)
            .ok_or(Error::SupportOverflow { n: spec.n, k: spec.k })?;
        let mut values = Vec::with_capacity(jhi - jlo + 1);
        let mut norm_sq = 0.0;
        for j in jlo..=jhi {
            let x = grid.point(j);
            let env_v = env.eval(x - spec.center);
            let phase = 2.0 * PI * spec.freq * x;
            let v = Complex64::from_polar(env_v, phase);
            norm_sq += v.norm_sqr();
            values.push(v);
        }
        norm_sq *= dx;
        mod_freq_max = mod_freq_max.max(spec.freq.abs());
        center_min = center_min.min(spec.center);
        center_max = center_max.max(spec.center);
        atoms.push(DiscretizedAtom { n: spec.n, k: spec.k, start: jlo, values, norm_sq });
    }
    if atoms.is_empty() {
        return Err(Error::InvalidArgument("no atoms fit inside the grid".into()));
    }
    let mut digest_src = digest_seed;
    digest_src.push_str(&format!(
        "|grid={},{},{}|kept={}|skipped={:?}",
        grid.x_min,
        grid.x_max,
        grid.n_points,
        atoms.len(),
        skipped
    ));
    Ok(DiscretizedSystem {
        grid: *grid,
        atoms,
        skipped,
        digest: fnv1a_hex(digest_src.as_bytes()),
        envelope_support: c,
        mod_freq_max,
        center_min,
        center_max,
    })
}

fn check_pattern_in_range(lattice: &GaborLattice, pattern: &JitterPattern) -> Result<()> {
    for (n, k, _) in pattern.entries() {
        if !lattice.contains(n, k) {
            return Err(Error::InvalidArgument(format!(
                "jitter entry at (n = {n}, k = {k}) lies outside the lattice index ranges"
            )));
        }
    }
    Ok(())
}

/// Samples the jittered system {e^{2 pi i b n x} w(x - a(k + delta_{n,k}))}
/// over the lattice index ranges. Every kept atom's support must fit inside
/// the grid; the policy decides whether misfits abort or are recorded as
/// truncation.
pub fn discretize(
    w: &Window,
    lattice: &GaborLattice,
    pattern: &JitterPattern,
    grid: &GridSpec,
    policy: OverflowPolicy,
) -> Result<DiscretizedSystem> {
    check_pattern_in_range(lattice, pattern)?;
    let (a, b) = (lattice.a(), lattice.b());
    let mut list = Vec::new();
    for n in lattice.n_iter() {
        for k in lattice.k_iter() {
            list.push(AtomSpec {
                n,
                k,
                center: a * (k as f64 + pattern.get(n, k)),
                freq: b * n as f64,
            });
        }
    }
    build_system(
        w,
        list.into_iter(),
        grid,
        policy,
        format!(
            "time|{}|a={a:e}|b={b:e}|n={:?}|k={:?}|{}",
            w.describe(),
            lattice.n_range(),
            lattice.k_range(),
            pattern.digest()
        ),
    )
}

/// Samples the same system on the transform side, where a band-limited
/// window becomes compactly supported: the transform of
/// e^{2 pi i b n x} h(x - tau) is e^{2 pi i s tau} H(s + b n) up to a
/// unimodular constant, so the dual system has envelope H, centers -b n and
/// modulation frequencies a(k + delta_{n,k}). Frame bounds are unchanged.
pub fn discretize_fourier_dual(
    w: &Window,
    lattice: &GaborLattice,
    pattern: &JitterPattern,
    grid: &GridSpec,
    policy: OverflowPolicy,
) -> Result<DiscretizedSystem> {
    check_pattern_in_range(lattice, pattern)?;
    if w.band_limit().is_none() {
        return Err(Error::HypothesisViolated(
            "transform-side sampling needs a band-limited window".into(),
        ));
    }
    let env = match w {
        Window::Sinc => Window::Rect,
        _ => {
            return Err(Error::InvalidArgument(
                "no closed-form transform envelope for this window kind".into(),
            ))
        }
    };
    let (a, b) = (lattice.a(), lattice.b());
    let mut list = Vec::new();
    for n in lattice.n_iter() {
        for k in lattice.k_iter() {
            list.push(AtomSpec {
                n,
                k,
                center: -b * n as f64,
                freq: a * (k as f64 + pattern.get(n, k)),
            });
        }
    }
    build_system(
        &env,
        list.into_iter(),
        grid,
        policy,
        format!(
            "dual|{}|a={a:e}|b={b:e}|n={:?}|k={:?}|{}",
            w.describe(),
            lattice.n_range(),
            lattice.k_range(),
            pattern.digest()
        ),
    )
}

/// S f = sum over atoms of <f, g> g with dx-weighted inner products.
/// The sum runs per atom over its support window only.
pub fn frame_operator_apply(
    sys: &DiscretizedSystem,
    f: &SampledFunction,
) -> Result<SampledFunction> {
    if f.grid != sys.grid {
        return Err(Error::GridMismatch);
    }
    let dx = sys.grid.dx();
    let mut out = SampledFunction::zeros(sys.grid);
    for atom in &sys.atoms {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, v) in atom.values.iter().enumerate() {
            acc += f.values[atom.start + i] * v.conj();
        }
        if acc.norm_sqr() == 0.0 {
            continue;
        }
        let coef = acc * dx;
        for (i, v) in atom.values.iter().enumerate() {
            out.values[atom.start + i] += coef * v;
        }
    }
    Ok(out)
}

/// Interior test subspace: functions supported in `support` and (after the
/// grid transform) confined to frequencies |s| <= band_limit. Restricting
/// the Rayleigh quotients to this subspace keeps index-truncation edge
/// effects out of the bound estimates.
///
/// The support constraint is enforced with raised-cosine flanks over the
/// outer eighth of the interval on each side rather than a hard indicator:
/// a sharp cutoff would put slowly decaying modulation tails at the cut,
/// which a truncated modulation range cannot reproduce, and the lower
/// estimate would absorb that artifact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestSubspace {
    pub support: (f64, f64),
    pub band_limit: f64,
}

/// Power-iteration controls. The seed fixes the start vector, making runs
/// byte-for-byte reproducible.
#[derive(Debug, Clone, Copy)]
pub struct PowerIterOpts {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIterOpts {
    fn default() -> Self {
        PowerIterOpts { tol: 1e-8, max_iter: 10_000, seed: 0x5EED_0001 }
    }
}

/// Extremal Rayleigh quotients of the truncated frame operator on the test
/// subspace, with solver diagnostics. Serialized order of iters/residuals
/// is [max side, min side].
#[derive(Debug, Clone, serde::Serialize)]
pub struct EmpiricalBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub iters: [usize; 2],
    pub residuals: [f64; 2],
    pub grid: GridSpec,
    pub truncation: TruncationInfo,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TruncationInfo {
    pub atoms: usize,
    pub skipped: usize,
    pub digest: String,
}

fn fft_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = rustfft::FftPlanner::new();
    (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
}

/// Zeroes transform bins with |s| > band. Diagonal in bin space, so the
/// grid's phase offsets cancel between the forward and inverse passes.
fn band_project(
    values: &mut [Complex64],
    grid: &GridSpec,
    band: f64,
    fwd: &Arc<dyn Fft<f64>>,
    inv: &Arc<dyn Fft<f64>>,
) {
    let n = values.len();
    for (j, v) in values.iter_mut().enumerate() {
        if j % 2 == 1 {
            *v = -*v;
        }
    }
    fwd.process(values);
    let fs = grid.freq_step();
    let half = n as f64 / 2.0;
    for (m, v) in values.iter_mut().enumerate() {
        let freq = (m as f64 - half) * fs;
        if freq.abs() > band * (1.0 + 1e-12) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    inv.process(values);
    let scale = 1.0 / n as f64;
    for (j, v) in values.iter_mut().enumerate() {
        *v *= scale;
        if j % 2 == 1 {
            *v = -*v;
        }
    }
}

fn plateau_weight(x: f64, support: (f64, f64)) -> f64 {
    let (lo, hi) = support;
    if x <= lo || x >= hi {
        return 0.0;
    }
    let flank = (hi - lo) / 8.0;
    let d = (x - lo).min(hi - x);
    if d >= flank {
        1.0
    } else {
        0.5 - 0.5 * (PI * d / flank).cos()
    }
}

fn support_project(values: &mut [Complex64], grid: &GridSpec, support: (f64, f64)) {
    for (j, v) in values.iter_mut().enumerate() {
        *v *= plateau_weight(grid.point(j), support);
    }
}

fn norm_of(values: &[Complex64], dx: f64) -> f64 {
    (dx * values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
}

/// Iterates v -> op(v) until either the Rayleigh residual ||op(v) - lam v||
/// drops below tol * max(|lam|, scale_floor) or the Rayleigh value itself
/// has stopped moving at that tolerance for three consecutive steps. The
/// second rule matters for near-tight systems, where truncation spreads a
/// degenerate eigenvalue into a narrow cluster: the residual then stalls at
/// the cluster width even though the value has settled inside it. Returns
/// (lam, iterations, terminal residual).
fn power_iterate(
    mut op: impl FnMut(&[Complex64]) -> Vec<Complex64>,
    start: Vec<Complex64>,
    dx: f64,
    tol: f64,
    max_iter: usize,
    scale_floor: f64,
) -> Result<(f64, usize, f64)> {
    let mut v = start;
    let nv = norm_of(&v, dx);
    if nv < 1e-300 {
        return Err(Error::InvalidArgument(
            "start vector vanishes after projection; subspace is degenerate on this grid".into(),
        ));
    }
    for x in v.iter_mut() {
        *x /= nv;
    }
    let mut last_res = f64::INFINITY;
    let mut lam_prev = f64::INFINITY;
    let mut stable = 0usize;
    for it in 1..=max_iter {
        let w = op(&v);
        let nw = norm_of(&w, dx);
        if nw < 1e-300 {
            // The operator annihilates the iterate: extremal value 0.
            return Ok((0.0, it, 0.0));
        }
        let lam: f64 = dx * w.iter().zip(&v).map(|(a, b)| (a * b.conj()).re).sum::<f64>();
        let scale = lam.abs().max(scale_floor);
        let res_sq: f64 = dx
            * w.iter()
                .zip(&v)
                .map(|(a, b)| (a - lam * b).norm_sqr())
                .sum::<f64>();
        last_res = res_sq.max(0.0).sqrt();
        if last_res <= tol * scale {
            return Ok((lam, it, last_res));
        }
        if (lam - lam_prev).abs() <= tol * scale {
            stable += 1;
            if stable >= 3 {
                return Ok((lam, it, last_res));
            }
        } else {
            stable = 0;
        }
        lam_prev = lam;
        v = w;
        for x in v.iter_mut() {
            *x /= nw;
        }
    }
    Err(Error::NoConvergence { residual: last_res, iters: max_iter })
}

/// Extremal eigenvalue estimates of the truncated frame operator restricted
/// to the interior test subspace: lambda_max by power iteration on P S P,
/// lambda_min through the spectral reflection P (sigma I - S) P with sigma
/// just above lambda_max. The required margins between the truncation
/// ranges and the subspace (modulations reaching twice the band limit,
/// translates covering the support plus two envelope lengths) are enforced,
/// since finite sections understate the upper bound and overstate the lower
/// one near the edges.
pub fn empirical_frame_bounds(
    sys: &DiscretizedSystem,
    subspace: &TestSubspace,
    opts: &PowerIterOpts,
) -> Result<EmpiricalBounds> {
    let grid = &sys.grid;
    let (lo, hi) = subspace.support;
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::InvalidArgument(format!("empty subspace support [{lo}, {hi}]")));
    }
    if !grid.contains_interval(lo, hi) {
        return Err(Error::InvalidArgument(
            "subspace support must lie inside the grid".into(),
        ));
    }
    if !(subspace.band_limit > 0.0) || subspace.band_limit > grid.nyquist() {
        return Err(Error::InvalidArgument(format!(
            "band limit must sit in (0, nyquist], got {} with nyquist {}",
            subspace.band_limit,
            grid.nyquist()
        )));
    }
    let c = sys.envelope_support;
    if sys.mod_freq_max < 2.0 * subspace.band_limit - 1e-9 {
        return Err(Error::HypothesisViolated(format!(
            "interior condition: modulations reach {} but the subspace band limit {} needs \
             at least twice that",
            sys.mod_freq_max, subspace.band_limit
        )));
    }
    if sys.center_min > lo - 2.0 * c + 1e-9 || sys.center_max < hi + 2.0 * c - 1e-9 {
        return Err(Error::HypothesisViolated(format!(
            "interior condition: translate centers [{}, {}] must cover the subspace support \
             [{lo}, {hi}] with margin {}",
            sys.center_min,
            sys.center_max,
            2.0 * c
        )));
    }

    let n = grid.len();
    let dx = grid.dx();
    let (fwd, inv) = fft_pair(n);
    let project = |values: &mut Vec<Complex64>| {
        support_project(values, grid, subspace.support);
        band_project(values, grid, subspace.band_limit, &fwd, &inv);
        support_project(values, grid, subspace.support);
    };
    let apply_s = |values: &[Complex64]| -> Result<Vec<Complex64>> {
        let f = SampledFunction { grid: *grid, values: values.to_vec() };
        Ok(frame_operator_apply(sys, &f)?.values)
    };

    let mut state = opts.seed;
    let mut start: Vec<Complex64> = (0..n)
        .map(|_| {
            let re = splitmix_unit(&mut state) - 0.5;
            let im = splitmix_unit(&mut state) - 0.5;
            Complex64::new(re, im)
        })
        .collect();
    project(&mut start);
    let start_min = start.clone();

    let op_max = |v: &[Complex64]| {
        let mut u = v.to_vec();
        project(&mut u);
        let mut w = apply_s(&u).expect("grids match by construction");
        project(&mut w);
        w
    };
    let (lambda_max, it_max, res_max) =
        power_iterate(op_max, start, dx, opts.tol, opts.max_iter, 1e-12)?;
    let lambda_max = lambda_max.max(0.0);

    let sigma = lambda_max * (1.0 + 1e-6) + 1e-300;
    let op_min = |v: &[Complex64]| {
        let mut u = v.to_vec();
        project(&mut u);
        let s = apply_s(&u).expect("grids match by construction");
        let mut w: Vec<Complex64> =
            u.iter().zip(&s).map(|(ui, si)| sigma * ui - si).collect();
        project(&mut w);
        w
    };
    let (top_reflected, it_min, res_min) =
        power_iterate(op_min, start_min, dx, opts.tol, opts.max_iter, 1e-12 * sigma.max(1.0))?;
    let lambda_min = (sigma - top_reflected.max(0.0)).clamp(0.0, lambda_max);

    Ok(EmpiricalBounds {
        lambda_min,
        lambda_max,
        iters: [it_max, it_min],
        residuals: [res_max, res_min],
        grid: *grid,
        truncation: TruncationInfo {
            atoms: sys.atoms.len(),
            skipped: sys.skipped.len(),
            digest: sys.digest.clone(),
        },
    })
}

/// Discrete transform of a sampled function onto the DFT-dual grid:
/// value(s) = dx * sum_j f_j e^{sign 2 pi i s x_j} with sign -1 or +1.
fn dft_sampled(f: &SampledFunction, negative_sign: bool) -> SampledFunction {
    let n = f.grid.len();
    let mut buf: Vec<Complex64> = f
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 1 { -v } else { *v })
        .collect();
    let (fwd, inv) = fft_pair(n);
    if negative_sign {
        fwd.process(&mut buf);
    } else {
        inv.process(&mut buf);
    }
    let dual = f.grid.dft_dual();
    let dx = f.grid.dx();
    let x0 = f.grid.point(0);
    let sign = if negative_sign { -1.0 } else { 1.0 };
    let values = buf
        .iter()
        .enumerate()
        .map(|(m, v)| {
            let s = dual.point(m);
            v * Complex64::from_polar(dx, sign * 2.0 * PI * s * x0)
        })
        .collect();
    SampledFunction { grid: dual, values }
}

/// Transform with the positive-exponent convention used for window
/// transforms throughout the crate.
pub fn fourier_transform_sampled(f: &SampledFunction) -> SampledFunction {
    dft_sampled(f, false)
}

/// Inverse of [`fourier_transform_sampled`] back onto `time_grid`.
pub fn inverse_fourier_transform_sampled(
    spectrum: &SampledFunction,
    time_grid: &GridSpec,
) -> Result<SampledFunction> {
    if spectrum.grid != time_grid.dft_dual() {
        return Err(Error::GridMismatch);
    }
    let n = time_grid.len();
    let x0 = time_grid.point(0);
    let mut buf: Vec<Complex64> = spectrum
        .values
        .iter()
        .enumerate()
        .map(|(m, v)| {
            let s = spectrum.grid.point(m);
            v * Complex64::from_polar(1.0, -2.0 * PI * s * x0)
        })
        .collect();
    let (fwd, _) = fft_pair(n);
    fwd.process(&mut buf);
    let ds = spectrum.grid.dx();
    let values = buf
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let flip = if j % 2 == 1 { -1.0 } else { 1.0 };
            v * flip * ds
        })
        .collect();
    Ok(SampledFunction { grid: *time_grid, values })
}

/// The same system seen through the unitary transform: every atom replaced
/// by its sampled transform (dense on the dual grid), with translation and
/// modulation roles swapped in the interior-condition metadata. Frame
/// bounds are preserved exactly, which is what the duality property tests
/// exercise.
pub fn fourier_dual_system(sys: &DiscretizedSystem) -> DiscretizedSystem {
    let dual_grid = sys.grid.dft_dual();
    let ds = dual_grid.dx();
    let atoms: Vec<DiscretizedAtom> = sys
        .atoms
        .iter()
        .map(|atom| {
            let mut dense = SampledFunction::zeros(sys.grid);
            for (i, v) in atom.values.iter().enumerate() {
                dense.values[atom.start + i] = *v;
            }
            let spectrum = fourier_transform_sampled(&dense);
            let norm_sq = ds * spectrum.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
            DiscretizedAtom {
                n: atom.n,
                k: atom.k,
                start: 0,
                values: spectrum.values,
                norm_sq,
            }
        })
        .collect();
    DiscretizedSystem {
        grid: dual_grid,
        atoms,
        skipped: sys.skipped.clone(),
        digest: fnv1a_hex(format!("dual-of|{}", sys.digest).as_bytes()),
        envelope_support: sys.envelope_support,
        mod_freq_max: sys.center_min.abs().max(sys.center_max.abs()),
        center_min: -sys.mod_freq_max,
        center_max: sys.mod_freq_max,
    }
}

/// Time shifts must land on whole grid steps so that shifting is a pure
/// reindexing; anything else would smuggle interpolation error into checks
/// that are exact in the discrete model.
fn snap_shift(grid: &GridSpec, t: f64) -> Result<i64> {
    let steps = t / grid.dx();
    let r = steps.round();
    if (steps - r).abs() > 1e-9 * (1.0 + steps.abs()) {
        return Err(Error::InvalidArgument(format!(
            "time shift {t} is not a whole number of grid steps (dx = {})",
            grid.dx()
        )));
    }
    Ok(r as i64)
}

fn shifted_value(g: &SampledFunction, j: i64, r: i64) -> Complex64 {
    let idx = j - r;
    if idx < 0 || idx >= g.values.len() as i64 {
        Complex64::new(0.0, 0.0)
    } else {
        g.values[idx as usize]
    }
}

/// Short-time transform value at one (frequency, shift) point by direct
/// quadrature: dx * sum_j e^{-2 pi i xi x_j} f_j g(x_j - t).
pub fn stft_at(f: &SampledFunction, g: &SampledFunction, xi: f64, t: f64) -> Result<Complex64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    let r = snap_shift(&f.grid, t)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..f.grid.len() {
        let gv = shifted_value(g, j as i64, r);
        if gv.norm_sqr() == 0.0 {
            continue;
        }
        let x = f.grid.point(j);
        acc += f.values[j] * gv * Complex64::from_polar(1.0, -2.0 * PI * xi * x);
    }
    Ok(acc * f.grid.dx())
}

/// Short-time transform at fixed shift over all DFT-dual frequencies.
pub fn stft_grid(f: &SampledFunction, g: &SampledFunction, t: f64) -> Result<SampledFunction> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    let r = snap_shift(&f.grid, t)?;
    let windowed = SampledFunction {
        grid: f.grid,
        values: (0..f.grid.len())
            .map(|j| f.values[j] * shifted_value(g, j as i64, r))
            .collect(),
    };
    Ok(dft_sampled(&windowed, true))
}

/// Nonzero sample index range, or None for the zero function.
fn nonzero_extent(f: &SampledFunction) -> Option<(usize, usize)> {
    let lo = f.values.iter().position(|v| v.norm_sqr() > 0.0)?;
    let hi = f.values.iter().rposition(|v| v.norm_sqr() > 0.0)?;
    Some((lo, hi))
}

fn require_middle_half(f: &SampledFunction, name: &str) -> Result<()> {
    if let Some((lo, hi)) = nonzero_extent(f) {
        let n = f.grid.len();
        if lo < n / 4 || hi >= 3 * n / 4 {
            return Err(Error::HypothesisViolated(format!(
                "{name} must be supported in the middle half of the grid so every relevant \
                 shift stays inside"
            )));
        }
    }
    Ok(())
}

/// Offsets r for which the supports of f and g(. - r dx) can intersect.
fn overlap_shifts(f: &SampledFunction, g: &SampledFunction) -> Option<(i64, i64)> {
    let (flo, fhi) = nonzero_extent(f)?;
    let (glo, ghi) = nonzero_extent(g)?;
    Some((flo as i64 - ghi as i64, fhi as i64 - glo as i64))
}

/// Energy identity of the short-time transform: integrating |F^g f|^2 over
/// all frequencies and shifts reproduces ||f||^2 ||g||^2. Returns the
/// relative residual. Supports must stay in the middle half of the grid.
pub fn plancherel_check(f: &SampledFunction, g: &SampledFunction) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    require_middle_half(f, "f")?;
    require_middle_half(g, "g")?;
    let dx = f.grid.dx();
    let mut total = 0.0;
    if let Some((rlo, rhi)) = overlap_shifts(f, g) {
        for r in rlo..=rhi {
            let spec = stft_grid(f, g, r as f64 * dx)?;
            total += dx * spec.norm_sq();
        }
    }
    let target = f.norm_sq() * g.norm_sq();
    Ok((total - target).abs() / target.max(1e-300))
}

/// Orthogonality identity for two window/function pairs:
/// <F^{g1} f1, F^{g2} f2> = <f1, f2> <g2, g1>. Returns the residual scaled
/// by the product of the four norms. The right-hand orientation of the
/// window product matches real-valued windows; complex windows would need
/// the conjugate-symmetric convention.
pub fn generalized_plancherel_check(
    f1: &SampledFunction,
    f2: &SampledFunction,
    g1: &SampledFunction,
    g2: &SampledFunction,
) -> Result<f64> {
    for (f, name) in [(f1, "f1"), (f2, "f2"), (g1, "g1"), (g2, "g2")] {
        require_middle_half(f, name)?;
    }
    if f1.grid != f2.grid || g1.grid != g2.grid || f1.grid != g1.grid {
        return Err(Error::GridMismatch);
    }
    let dx = f1.grid.dx();
    let mut lhs = Complex64::new(0.0, 0.0);
    let (r1, r2) = match (overlap_shifts(f1, g1), overlap_shifts(f2, g2)) {
        (Some((a1, b1)), Some((a2, b2))) => (a1.min(a2), b1.max(b2)),
        _ => (0, -1),
    };
    for r in r1..=r2 {
        let s1 = stft_grid(f1, g1, r as f64 * dx)?;
        let s2 = stft_grid(f2, g2, r as f64 * dx)?;
        lhs += s1.inner(&s2)? * dx;
    }
    let rhs = f1.inner(f2)? * g2.inner(g1)?;
    let scale = (f1.norm() * f2.norm() * g1.norm() * g2.norm()).max(1e-300);
    Ok((lhs - rhs).norm() / scale)
}

/// Frequency-sampling identity: for g supported in (-1/2, 1/2) and P <= 1,
/// summing |F^g f(P n, t)|^2 over one alias period of n equals
/// (1/P) * integral of |f|^2 |g(. - t)|^2. Returns one residual per shift.
/// Needs 1/(P dx) to be a whole number so the modulation family closes.
pub fn stft_sampling_check(
    f: &SampledFunction,
    g: &SampledFunction,
    p: f64,
    t_samples: &[f64],
) -> Result<Vec<f64>> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    if !(p > 0.0) || p > 1.0 + 1e-12 {
        return Err(Error::HypothesisViolated(format!("need 0 < P <= 1, got {p}")));
    }
    if let Some((glo, ghi)) = nonzero_extent(g) {
        let lo = g.grid.point(glo);
        let hi = g.grid.point(ghi);
        if lo <= -0.5 || hi >= 0.5 {
            return Err(Error::HypothesisViolated(format!(
                "window support [{lo}, {hi}] must lie inside (-1/2, 1/2)"
            )));
        }
    }
    let dx = f.grid.dx();
    let alias = 1.0 / (p * dx);
    let n_alias = alias.round();
    if (alias - n_alias).abs() > 1e-9 || n_alias < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "1/(P dx) = {alias} must be a whole number of frequency samples"
        )));
    }
    let n_alias = n_alias as i64;
    let mut out = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let r = snap_shift(&f.grid, t)?;
        let mut lhs = 0.0;
        for n in -(n_alias / 2)..(n_alias - n_alias / 2) {
            lhs += stft_at(f, g, p * n as f64, t)?.norm_sqr();
        }
        let rhs = (1.0 / p)
            * dx
            * (0..f.grid.len())
                .map(|j| f.values[j].norm_sqr() * shifted_value(g, j as i64, r).norm_sqr())
                .sum::<f64>();
        let scale = rhs.max(1e-12 * f.norm_sq() * g.norm_sq()).max(1e-300);
        out.push((lhs - rhs).abs() / scale);
    }
    Ok(out)
}

/// psi'(x) = sum_{m >= 0} 1/(x + m)^2 for x > 0: recurrence below 50, then
/// the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    assert!(x > 0.0, "trigamma needs a positive argument");
    let mut acc = 0.0;
    while x < 50.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + 0.5 * inv2
        + inv2 * inv * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)))
}

/// Writes p as num/den with den <= 64 when such a representation exists.
fn small_rational(p: f64) -> Option<(i64, i64)> {
    for den in 1..=64i64 {
        let num = (p * den as f64).round();
        if (p * den as f64 - num).abs() < 1e-12 * den as f64 && num.abs() >= 1.0 {
            return Some((num as i64, den));
        }
    }
    None
}

/// Residuals of the transform-side periodization identities at one point y.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PoissonResidual {
    pub y: f64,
    /// sum_n |transform(y + P n)|^2 (partial sum plus analytic tail).
    pub lhs: f64,
    /// Upper bound on what the truncated tail can still contribute.
    pub tail_bound: f64,
    /// Residual against (1/P) sum_k e^{-2 pi i k y / P} <h, h(. - k/P)>.
    pub general: f64,
    /// Residual against ||h||^2 / P, present when the window support fits in
    /// a unit interval and P <= 1.
    pub simple: Option<f64>,
}

/// For s = y + P n the squared transform of the box window is
/// sin^2(pi s)/(pi s)^2: summed over a residue class of n the sine factor
/// is constant whenever P is rational, and the remaining 1/s^2 tail is a
/// trigamma value. Returns the exact tail of the two-sided sum beyond |n| > k_cut.
fn box_power_tail(y: f64, p: f64, k_cut: i64) -> Option<f64> {
    let (num, den) = small_rational(p)?;
    let num = num.abs() as f64;
    let mut tail = 0.0;
    for r in 0..den {
        // n = side * (r + den * m) with m >= m0, so n stays beyond the cutoff
        // on both sides. Along such a class s = side * base + num * m * side,
        // and sin^2(pi s) = sin^2(pi base) because num * m is an integer.
        let m0 = ((k_cut - r) as f64 / den as f64).floor() + 1.0;
        for side in [1.0f64, -1.0] {
            let base = y + side * p * r as f64;
            let start = side * base / num + m0;
            if start <= 0.0 {
                return None;
            }
            let sin_sq = (PI * base).sin().powi(2);
            tail += sin_sq / (PI * num).powi(2) * trigamma(start);
        }
    }
    Some(tail)
}

/// Checks the periodization identity sum_n |transform(y + P n)|^2 against
/// its autocorrelation series (general form) and, when the unit-support
/// hypothesis holds, against ||h||^2 / P. Works for window kinds with a
/// closed-form transform and compact support.
pub fn poisson_sum_check(w: &Window, p: f64, ys: &[f64]) -> Result<Vec<PoissonResidual>> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("need P > 0, got {p}")));
    }
    let c = w.support_len().ok_or(Error::UnboundedSupport)?;
    if w.ft_eval(0.0).is_none() {
        return Err(Error::InvalidArgument(
            "periodization check needs a closed-form transform".into(),
        ));
    }
    // |transform|^2 decays like |s|^{-2 pw} for the box/spline family.
    let pw = match w {
        Window::Rect => 1u32,
        Window::Bspline { p } => *p,
        _ => {
            return Err(Error::InvalidArgument(
                "periodization check supports box and spline windows".into(),
            ))
        }
    };
    let norm_sq = w.autocorr(0.0).unwrap();
    let simple_applies = c <= 1.0 + 1e-12 && p <= 1.0 + 1e-12;
    let mut out = Vec::with_capacity(ys.len());
    for &y in ys {
        if y.abs() > 32.0 {
            return Err(Error::InvalidArgument(format!(
                "evaluation points must satisfy |y| <= 32, got {y}"
            )));
        }
        // Keep the cutoff far enough out that |y + P n| grows monotonically
        // beyond it on both sides.
        let reach = ((y.abs() + 2.0) / p).ceil() as i64;
        let k_cut: i64 = if pw == 1 {
            256.max(reach)
        } else {
            8192.max(reach).max((8192.0 / p).ceil() as i64)
        };
        let mut partial = 0.0;
        for n in -k_cut..=k_cut {
            let v = w.ft_eval(y + p * n as f64).unwrap();
            partial += v * v;
        }
        let (lhs, tail_bound) = if pw == 1 {
            match box_power_tail(y, p, k_cut) {
                Some(tail) => (partial + tail, 0.0),
                None => {
                    // Irrational step: bound the tail crudely and demand it
                    // is negligible.
                    let s_min = p * (k_cut + 1) as f64 - y.abs();
                    let bound = 2.0 / (PI * PI * p * s_min);
                    if bound > 1e-9 * partial.max(1.0) {
                        return Err(Error::TailDivergence);
                    }
                    (partial, bound)
                }
            }
        } else {
            let s_min = p * (k_cut + 1) as f64 - y.abs();
            if s_min <= 0.0 {
                return Err(Error::TailDivergence);
            }
            let e = 2.0 * pw as f64;
            // Integral bound plus one endpoint term, both sides.
            let bound = 2.0
                * ((1.0 / (p * (e - 1.0) * PI.powf(e) * s_min.powf(e - 1.0)))
                    + (PI * s_min).powf(-e));
            if bound > 1e-9 * partial.max(1.0) {
                return Err(Error::TailDivergence);
            }
            (partial, bound)
        };
        // Autocorrelation series: only |k| < c P survive the support cut.
        let k_max = (c * p).ceil() as i64 + 1;
        let mut rhs = norm_sq;
        for k in 1..=k_max {
            let ac = w.autocorr(k as f64 / p).unwrap();
            rhs += 2.0 * (2.0 * PI * k as f64 * y / p).cos() * ac;
        }
        rhs /= p;
        let general = (lhs - rhs).abs() / rhs.abs().max(1e-300);
        let simple = simple_applies.then(|| {
            let target = norm_sq / p;
            (lhs - target).abs() / target
        });
        out.push(PoissonResidual { y, lhs, tail_bound, general, simple });
    }
    Ok(out)
}

/// Diagnostics of the painless multiplier identity on one grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PainlessCheck {
    /// ||S f - m f|| / ||f|| for each generated test function.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Extrema of the multiplier over the fully covered interval.
    pub multiplier_inf: f64,
    pub multiplier_sup: f64,
    pub covered_interval: (f64, f64),
}

/// Verifies that the frame operator of the column-shifted system
/// {e^{2 pi i b n x} h(x - a(k + delta_k))} acts as multiplication by
/// (1/b) sum_k |h(x - a(k + delta_k))|^2. The n-sum closes exactly when the
/// modulations run over one full alias period, which requires 1/(b dx) to
/// be a whole number; the window support must not exceed 1/b.
pub fn painless_operator_check(
    w: &Window,
    a: f64,
    b: f64,
    column_deltas: &BTreeMap<i64, f64>,
    grid: &GridSpec,
    seed: u64,
) -> Result<PainlessCheck> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(format!("need a, b > 0, got a = {a}, b = {b}")));
    }
    let c = w.support_len().ok_or(Error::UnboundedSupport)?;
    if c > 1.0 / b + 1e-12 {
        return Err(Error::PainlessRegime { a, c, inv_b: 1.0 / b });
    }
    if column_deltas.is_empty() {
        return Err(Error::InvalidArgument("no columns given".into()));
    }
    let keys: Vec<i64> = column_deltas.keys().copied().collect();
    for pair in keys.windows(2) {
        if pair[1] != pair[0] + 1 {
            return Err(Error::InvalidArgument(format!(
                "columns must cover a contiguous k range, gap after k = {}",
                pair[0]
            )));
        }
    }
    let dx = grid.dx();
    let alias = 1.0 / (b * dx);
    let n_alias = alias.round();
    if (alias - n_alias).abs() > 1e-9 || n_alias < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "1/(b dx) = {alias} must be a whole number so the modulation family closes"
        )));
    }
    let n_alias = n_alias as i64;

    let centers: BTreeMap<i64, f64> =
        column_deltas.iter().map(|(&k, &d)| (k, a * (k as f64 + d))).collect();
    let mut list = Vec::new();
    for (&k, &tau) in &centers {
        for n in -(n_alias / 2)..(n_alias - n_alias / 2) {
            list.push(AtomSpec { n, k, center: tau, freq: b * n as f64 });
        }
    }
    let sys = build_system(
        w,
        list.into_iter(),
        grid,
        OverflowPolicy::Error,
        format!("painless|{}|a={a:e}|b={b:e}|cols={:?}", w.describe(), column_deltas),
    )?;

    // Independent route to the multiplier: direct window evaluations.
    let multiplier: Vec<f64> = grid
        .points()
        .map(|x| centers.values().map(|tau| w.eval(x - tau).powi(2)).sum::<f64>() / b)
        .collect();

    let tau_min = centers.values().copied().fold(f64::INFINITY, f64::min);
    let tau_max = centers.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let covered = (tau_min + c / 2.0, tau_max - c / 2.0);
    let (mut m_inf, mut m_sup) = (f64::INFINITY, f64::NEG_INFINITY);
    if covered.1 > covered.0 {
        for (j, x) in grid.points().enumerate() {
            if x >= covered.0 && x <= covered.1 {
                m_inf = m_inf.min(multiplier[j]);
                m_sup = m_sup.max(multiplier[j]);
            }
        }
    }

    // Seeded band-limited bumps well inside the grid.
    let mut state = seed;
    let span = grid.x_max - grid.x_min;
    let (flo, fhi) = (grid.x_min + span / 4.0, grid.x_max - span / 4.0);
    let mut residuals = Vec::new();
    for _ in 0..3 {
        let mut comps = Vec::new();
        for _ in 0..3 {
            let freq = (splitmix_unit(&mut state) - 0.5) * grid.nyquist() / 8.0;
            let amp = Complex64::new(
                splitmix_unit(&mut state) - 0.5,
                splitmix_unit(&mut state) - 0.5,
            );
            comps.push((freq, amp));
        }
        let f = SampledFunction::from_fn(*grid, |x| {
            if x <= flo || x >= fhi {
                return Complex64::new(0.0, 0.0);
            }
            let env = (PI * (x - flo) / (fhi - flo)).sin().powi(2);
            comps
                .iter()
                .map(|(freq, amp)| amp * Complex64::from_polar(env, 2.0 * PI * freq * x))
                .sum()
        });
        let sf = frame_operator_apply(&sys, &f)?;
        let mut diff_sq = 0.0;
        for j in 0..grid.len() {
            diff_sq += (sf.values[j] - multiplier[j] * f.values[j]).norm_sqr();
        }
        residuals.push((dx * diff_sq).sqrt() / f.norm().max(1e-300));
        let _ = splitmix64(&mut state);
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(PainlessCheck {
        residuals,
        max_residual,
        multiplier_inf: m_inf,
        multiplier_sup: m_sup,
        covered_interval: covered,
    })
}
