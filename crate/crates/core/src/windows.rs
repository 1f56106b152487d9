//! Window functions and their scalar functionals.
//!
//! Four kinds are supported: the unit box, its p-fold self-convolutions
//! (cardinal B-splines, support [-p/2, p/2]), the sinc window (band-limited,
//! transform equal to the unit box), and tabulated windows loaded from CSV.
//! Analytic kinds carry closed forms for their transforms, autocorrelations
//! and norms; tabulated windows fall back to quadrature with a refinement
//! check.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SampledFunction};
use crate::util::sinc;

/// Default quadrature step for window integrals.
pub const QUAD_STEP: f64 = 1.0 / 4096.0;

/// Relative tolerance of the quadrature / scan refinement checks.
pub const REFINE_TOL: f64 = 1e-6;

/// A window function on the real line.
#[derive(Debug, Clone, PartialEq)]
pub enum Window {
    /// Characteristic function of [-1/2, 1/2].
    Rect,
    /// p-fold self-convolution of `Rect`; support [-p/2, p/2]. `Bspline { p: 1 }`
    /// coincides with `Rect`.
    Bspline { p: u32 },
    /// sin(pi x) / (pi x). Not integrable; transform is the unit box, so the
    /// band limit is 1.
    Sinc,
    /// Uniform real samples with linear interpolation, hard zero outside.
    Sampled(SampledWindow),
}

/// Scalar functionals of a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowFunctionals {
    pub l1: f64,
    pub l2: f64,
    /// sup over frequencies of |transform|.
    pub sup_ft: f64,
    pub support_len: f64,
}

/// Uniformly sampled window values.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWindow {
    x0: f64,
    dx: f64,
    values: Vec<f64>,
    band_limit: Option<f64>,
}

impl SampledWindow {
    pub fn new(x0: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if !(x0.is_finite() && dx.is_finite()) || dx <= 0.0 {
            return Err(Error::InvalidArgument(format!("bad sample spacing {dx}")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidArgument("need at least two samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample value".into()));
        }
        Ok(SampledWindow { x0, dx, values, band_limit: None })
    }

    /// Declares that the underlying continuous window has its transform
    /// supported in (-m/2, m/2). Trusted by band-limited certificates.
    pub fn with_band_limit(mut self, m: f64) -> Self {
        self.band_limit = Some(m);
        self
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn x_last(&self) -> f64 {
        self.x0 + (self.values.len() - 1) as f64 * self.dx
    }

    fn eval(&self, x: f64) -> f64 {
        if x < self.x0 || x > self.x_last() {
            return 0.0;
        }
        let u = (x - self.x0) / self.dx;
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let frac = u - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Parses `x,value` CSV with a header row. The x column must be strictly
    /// increasing and uniform to 1e-12 relative.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty window file".into()))?;
        let header: String = header.split(',').map(|s| s.trim()).collect::<Vec<_>>().join(",");
        if header != "x,value" {
            return Err(Error::Parse(format!("expected header 'x,value', got '{header}'")));
        }
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut parts = line.split(',');
            let x: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad x field", i + 2)))?;
            let v: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad value field", i + 2)))?;
            if parts.next().is_some() {
                return Err(Error::Parse(format!("row {}: too many fields", i + 2)));
            }
            xs.push(x);
            vs.push(v);
        }
        if xs.len() < 2 {
            return Err(Error::Parse("need at least two samples".into()));
        }
        let dx = xs[1] - xs[0];
        if dx <= 0.0 {
            return Err(Error::Parse("x column must be strictly increasing".into()));
        }
        for i in 1..xs.len() {
            let step = xs[i] - xs[i - 1];
            if (step - dx).abs() > 1e-12 * dx.abs() {
                return Err(Error::Parse(format!(
                    "non-uniform x spacing at row {}: {step} vs {dx}",
                    i + 2
                )));
            }
        }
        SampledWindow::new(xs[0], dx, vs)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let x = self.x0 + i as f64 * self.dx;
            out.push_str(&format!("{x},{v}\n"));
        }
        out
    }
}

/// Centered cardinal B-spline of order p >= 2 (order 1 is handled as `Rect`).
fn bspline_eval(p: u32, x: f64) -> f64 {
    debug_assert!(p >= 2);
    let half = p as f64 / 2.0;
    if x.abs() >= half {
        return 0.0;
    }
    let pm1 = (p - 1) as f64;
    let mut sum = 0.0;
    let mut binom = 1.0; // C(p, j)
    for j in 0..=p {
        let t = x + half - j as f64;
        if t > 0.0 {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * binom * t.powf(pm1);
        }
        binom = binom * (p - j) as f64 / (j + 1) as f64;
    }
    sum / factorial(p - 1)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Midpoint rule with n subintervals.
fn midpoint(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let dx = (hi - lo) / n as f64;
    (0..n).map(|i| f(lo + (i as f64 + 0.5) * dx)).sum::<f64>() * dx
}

/// Midpoint rule at the requested step, refined once; errors out when the
/// refinement still moves the value by more than `REFINE_TOL` relative.
fn quad_refined(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> Result<f64> {
    let n = (((hi - lo) / step).ceil() as usize).max(4);
    let v1 = midpoint(&f, lo, hi, n);
    let v2 = midpoint(&f, lo, hi, 2 * n);
    let change = (v1 - v2).abs();
    if change > REFINE_TOL * v2.abs().max(1e-9) {
        return Err(Error::QuadratureNotConverged { change });
    }
    Ok(v2)
}

impl Window {
    /// Support as a closed interval, or None when unbounded.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Window::Rect => Some((-0.5, 0.5)),
            Window::Bspline { p } => {
                let h = *p as f64 / 2.0;
                Some((-h, h))
            }
            Window::Sinc => None,
            Window::Sampled(s) => Some((s.x0, s.x_last())),
        }
    }

    pub fn support_len(&self) -> Option<f64> {
        self.support().map(|(lo, hi)| hi - lo)
    }

    pub fn is_compact(&self) -> bool {
        self.support().is_some()
    }

    /// Band limit m such that the transform vanishes outside (-m/2, m/2),
    /// when known.
    pub fn band_limit(&self) -> Option<f64> {
        match self {
            Window::Sinc => Some(1.0),
            Window::Sampled(s) => s.band_limit,
            _ => None,
        }
    }

    /// Pointwise evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Window::Rect => {
                if x.abs() <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            Window::Bspline { p } => {
                if *p == 1 {
                    Window::Rect.eval(x)
                } else {
                    bspline_eval(*p, x)
                }
            }
            Window::Sinc => sinc(x),
            Window::Sampled(s) => s.eval(x),
        }
    }

    /// Transform at one frequency, for kinds with a closed form. Convention:
    /// real even windows have real transforms here.
    pub fn ft_eval(&self, s: f64) -> Option<f64> {
        match self {
            Window::Rect => Some(sinc(s)),
            Window::Bspline { p } => Some(sinc(s).powi(*p as i32)),
            Window::Sinc => Some(if s.abs() <= 0.5 { 1.0 } else { 0.0 }),
            Window::Sampled(_) => None,
        }
    }

    /// Autocorrelation <h, h(. - t)> for kinds with a closed form.
    pub fn autocorr(&self, t: f64) -> Option<f64> {
        match self {
            Window::Rect => Some((1.0 - t.abs()).max(0.0)),
            Window::Bspline { p } => {
                // The self-convolutions nest: correlating two order-p splines
                // yields the order-2p spline.
                let q = 2 * *p;
                Some(if q == 2 { (1.0 - t.abs()).max(0.0) } else { bspline_eval(q, t) })
            }
            Window::Sinc => Some(sinc(t)),
            Window::Sampled(_) => None,
        }
    }

    /// m(t) = ||h - h(. - t)||_2. Closed form via the autocorrelation when
    /// available, quadrature otherwise.
    pub fn shift_diff_norm(&self, t: f64) -> Result<f64> {
        if let Some(ac) = self.autocorr(t) {
            let n2 = self.autocorr(0.0).unwrap();
            return Ok((2.0 * (n2 - ac)).max(0.0).sqrt());
        }
        let (lo, hi) = self.support().ok_or(Error::UnboundedSupport)?;
        let (lo, hi) = (lo.min(lo + t), hi.max(hi + t));
        let v = quad_refined(
            |x| {
                let d = self.eval(x) - self.eval(x - t);
                d * d
            },
            lo,
            hi,
            QUAD_STEP,
        )?;
        Ok(v.max(0.0).sqrt())
    }

    /// Evaluation for convolution quadrature: at a jump of the box window the
    /// symmetric value 1/2 is used, so lattice-aligned boundary samples carry
    /// half weight and the midpoint rule stays exact for box factors.
    fn eval_conv(&self, x: f64) -> f64 {
        match self {
            Window::Rect | Window::Bspline { p: 1 } => {
                if x.abs() < 0.5 {
                    1.0
                } else if x.abs() == 0.5 {
                    0.5
                } else {
                    0.0
                }
            }
            _ => self.eval(x),
        }
    }

    /// p-fold self-convolution by discrete convolution on a fine grid.
    /// Independent of the analytic B-spline closed form, so the two can be
    /// cross-checked.
    pub fn iterate_convolution(&self, p: u32) -> Result<Window> {
        if p == 0 {
            return Err(Error::InvalidArgument("convolution power must be >= 1".into()));
        }
        if p == 1 {
            return Ok(self.clone());
        }
        let (lo, hi) = self.support().ok_or(Error::UnboundedSupport)?;
        let step = 1.0 / 1024.0;
        // Midpoint samples of the current iterate.
        let n0 = (((hi - lo) / step).ceil() as usize).max(2);
        let s0 = (hi - lo) / n0 as f64;
        let mut acc_lo = lo;
        let mut acc: Vec<f64> = (0..n0)
            .map(|i| self.eval(lo + (i as f64 + 0.5) * s0))
            .collect();
        for _ in 1..p {
            let out_lo = acc_lo + lo;
            let out_hi = acc_lo + s0 * acc.len() as f64 + hi;
            let n_out = ((out_hi - out_lo) / s0).round() as usize;
            let mut out = vec![0.0; n_out];
            for (m, o) in out.iter_mut().enumerate() {
                let y = out_lo + (m as f64 + 0.5) * s0;
                let mut sum = 0.0;
                for (i, &fi) in acc.iter().enumerate() {
                    if fi == 0.0 {
                        continue;
                    }
                    let xi = acc_lo + (i as f64 + 0.5) * s0;
                    sum += fi * self.eval_conv(y - xi);
                }
                *o = sum * s0;
            }
            acc = out;
            acc_lo = out_lo;
        }
        Ok(Window::Sampled(SampledWindow::new(acc_lo + 0.5 * s0, s0, acc)?))
    }

    /// L1, L2, sup of |transform| and support length. Errors for windows
    /// without finite L1 norm or support.
    pub fn functionals(&self) -> Result<WindowFunctionals> {
        let (lo, hi) = self.support().ok_or(Error::UnboundedSupport)?;
        let (l1, l2) = match self {
            Window::Rect => (1.0, 1.0),
            Window::Bspline { p } => {
                // Nonnegative with unit integral; squared L2 norm equals the
                // autocorrelation at 0.
                let _ = p;
                (1.0, self.autocorr(0.0).unwrap().sqrt())
            }
            Window::Sinc => unreachable!("sinc has no support interval"),
            Window::Sampled(s) => {
                let l1 = s.dx * s.values.iter().map(|v| v.abs()).sum::<f64>();
                let l2 = (s.dx * s.values.iter().map(|v| v * v).sum::<f64>()).sqrt();
                (l1, l2)
            }
        };
        Ok(WindowFunctionals { l1, l2, sup_ft: self.sup_ft()?, support_len: hi - lo })
    }

    /// sup over frequencies of |transform|. Available even for windows whose
    /// other functionals are infinite.
    pub fn sup_ft(&self) -> Result<f64> {
        match self {
            // |sinc|^p and the unit box both peak at 1.
            Window::Rect | Window::Bspline { .. } | Window::Sinc => Ok(1.0),
            Window::Sampled(s) => {
                let (lo, hi) = (s.x0, s.x_last());
                let len = (hi - lo).max(s.dx);
                let span = 2.0 * len;
                // Keep the grid step below the resolution gate (support/64)
                // regardless of how short the sample vector is.
                let n = (4 * s.values.len())
                    .next_power_of_two()
                    .max(512);
                let grid = GridSpec::new(lo - span, hi + span, n)?;
                let ft = self.fourier_transform(&grid)?;
                Ok(ft.values.iter().map(|v| v.norm()).fold(0.0, f64::max))
            }
        }
    }

    /// Transform sampled on the DFT-dual grid of `grid`, computed by FFT of
    /// the window samples. Sign convention: positive exponent.
    pub fn fourier_transform(&self, grid: &GridSpec) -> Result<SampledFunction> {
        let (lo, hi) = self.support().ok_or(Error::UnboundedSupport)?;
        let c = (hi - lo).max(f64::MIN_POSITIVE);
        let dx = grid.dx();
        if dx > c / 64.0 {
            return Err(Error::GridTooCoarse { dx, needed: c / 64.0 });
        }
        if !grid.contains_interval(lo, hi) {
            return Err(Error::InvalidArgument(
                "grid does not cover the window support".into(),
            ));
        }
        let n = grid.len();
        let mut buf: Vec<Complex64> = (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(sign * self.eval(grid.point(j)), 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let dual = grid.dft_dual();
        let offset = grid.x_min + 0.5 * dx;
        let values = buf
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let s = dual.point(j);
                let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * s * offset);
                v * phase * dx
            })
            .collect();
        Ok(SampledFunction { grid: dual, values })
    }

    /// Derivative as a sampled window. Errors for kinds whose derivative is
    /// not essentially bounded or not representable by finite samples.
    pub fn derivative(&self) -> Result<Window> {
        match self {
            Window::Rect | Window::Bspline { p: 1 } => Err(Error::DistributionalDerivative),
            Window::Bspline { p } => {
                // M_p' (x) = M_{p-1}(x + 1/2) - M_{p-1}(x - 1/2); endpoint
                // sampling so half-integer breakpoints are hit exactly.
                let p = *p;
                let lower = Window::Bspline { p: p - 1 };
                let half = p as f64 / 2.0;
                let dx = 1.0 / 1024.0;
                let n = (p as usize) * 1024 + 1;
                let values = (0..n)
                    .map(|i| {
                        let x = -half + i as f64 * dx;
                        lower.eval(x + 0.5) - lower.eval(x - 0.5)
                    })
                    .collect();
                Ok(Window::Sampled(SampledWindow::new(-half, dx, values)?))
            }
            Window::Sinc => Err(Error::UnboundedSupport),
            Window::Sampled(s) => {
                let n = s.values.len();
                let mut values = vec![0.0; n];
                for i in 0..n {
                    values[i] = if i == 0 {
                        (s.values[1] - s.values[0]) / s.dx
                    } else if i == n - 1 {
                        (s.values[n - 1] - s.values[n - 2]) / s.dx
                    } else {
                        (s.values[i + 1] - s.values[i - 1]) / (2.0 * s.dx)
                    };
                }
                Ok(Window::Sampled(SampledWindow::new(s.x0, s.dx, values)?))
            }
        }
    }

    /// Wiener amalgam norm W(L_inf, l1): sum over unit cells [m-1/2, m+1/2)
    /// of the essential sup of |w| on the cell. Cell sups are taken over a
    /// left-endpoint-inclusive sample grid (matching the half-open cells) and
    /// refined once.
    pub fn wiener_amalgam_norm(&self) -> Result<f64> {
        let cell_sup = |m: i64, n: usize| -> f64 {
            let left = m as f64 - 0.5;
            let step = 1.0 / n as f64;
            // Closed scan: the sup over the half-open cell equals the sup
            // over its closure for the continuous evaluations used here, and
            // an open right edge loses O(slope/n) at piecewise-linear peaks,
            // which stalls the refinement gate.
            (0..=n)
                .map(|i| self.eval(left + i as f64 * step).abs())
                .fold(0.0, f64::max)
        };
        let sum_at = |n: usize| -> Result<f64> {
            match self.support() {
                Some((lo, hi)) => {
                    let m_min = (lo + 0.5).floor() as i64;
                    let m_max = (hi + 0.5).floor() as i64;
                    Ok((m_min..=m_max).map(|m| cell_sup(m, n)).sum())
                }
                None => {
                    // Expand outward until several consecutive cells are
                    // negligible; error out when no decay shows up.
                    let budget = 8192i64;
                    let mut total = cell_sup(0, n);
                    let mut max_cell = total;
                    for sign in [-1i64, 1] {
                        let mut quiet = 0;
                        let mut m = sign;
                        loop {
                            let s = cell_sup(m, n);
                            total += s;
                            max_cell = max_cell.max(s);
                            if s < 1e-12 * max_cell.max(1e-300) {
                                quiet += 1;
                                if quiet >= 3 {
                                    break;
                                }
                            } else {
                                quiet = 0;
                            }
                            m += sign;
                            if m.abs() > budget {
                                return Err(Error::TailDivergence);
                            }
                        }
                    }
                    Ok(total)
                }
            }
        };
        let w1 = sum_at(1024)?;
        let w2 = sum_at(2048)?;
        let change = (w1 - w2).abs();
        if change > REFINE_TOL * w2.abs().max(1e-9) {
            return Err(Error::QuadratureNotConverged { change });
        }
        Ok(w2)
    }

    /// Short description for digests and reports.
    pub fn describe(&self) -> String {
        match self {
            Window::Rect => "rect".into(),
            Window::Bspline { p } => format!("bspline({p})"),
            Window::Sinc => "sinc".into(),
            Window::Sampled(s) => {
                format!("sampled(n={}, x0={}, dx={})", s.values.len(), s.x0, s.dx)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rect_evals() {
        let w = Window::Rect;
        assert_eq!(w.eval(0.25), 1.0);
        assert_eq!(w.eval(0.5), 1.0); // closed interval
        assert_eq!(w.eval(0.75), 0.0);
    }

    #[test]
    fn bspline_closed_form_values() {
        let w2 = Window::Bspline { p: 2 };
        assert_eq!(w2.eval(0.0), 1.0);
        assert!(close(w2.eval(0.5), 0.5, 1e-15));
        assert!(close(w2.eval(-0.5), 0.5, 1e-15));
        assert_eq!(w2.eval(1.0), 0.0);
        let w3 = Window::Bspline { p: 3 };
        assert!(close(w3.eval(0.0), 0.75, 1e-15));
        assert_eq!(w3.eval(1.5), 0.0);
    }

    #[test]
    fn convolution_oracle_matches_closed_form() {
        // rect convolved with itself twice, compared against the order-3
        // closed form at several points.
        let conv = Window::Rect.iterate_convolution(3).unwrap();
        let exact = Window::Bspline { p: 3 };
        for &x in &[0.0, 0.3, 0.5, 1.0, 1.25, -0.7] {
            assert!(
                close(conv.eval(x), exact.eval(x), 2e-5),
                "x = {x}: {} vs {}",
                conv.eval(x),
                exact.eval(x)
            );
        }
        // Support length 3 within a grid cell.
        let (lo, hi) = conv.support().unwrap();
        assert!(close(hi - lo, 3.0, 2.0 / 1024.0));
    }

    #[test]
    fn convolution_peak_value() {
        let conv = Window::Rect.iterate_convolution(3).unwrap();
        assert!(close(conv.eval(0.0), 0.75, 1e-5));
    }

    #[test]
    fn convolution_rejects_sinc() {
        assert!(matches!(
            Window::Sinc.iterate_convolution(2),
            Err(Error::UnboundedSupport)
        ));
    }

    #[test]
    fn shift_diff_closed_forms() {
        // Box: m(t)^2 = 2 min(|t|, 1).
        let m = Window::Rect.shift_diff_norm(0.25).unwrap();
        assert!(close(m * m, 0.5, 1e-14));
        let m = Window::Rect.shift_diff_norm(3.0).unwrap();
        assert!(close(m * m, 2.0, 1e-14));
        // Order-2 spline at t = 1/2, frozen from the order-4 autocorrelation.
        let m = Window::Bspline { p: 2 }.shift_diff_norm(0.5).unwrap();
        assert!(close(m, 0.6123724356957945, 1e-12));
        // sinc: m(t)^2 = 2 (1 - sinc t).
        let m = Window::Sinc.shift_diff_norm(1.0).unwrap();
        assert!(close(m * m, 2.0, 1e-14));
    }

    #[test]
    fn shift_diff_quadrature_route_agrees() {
        // Same value through the tabulated-window quadrature path.
        let p2 = Window::Bspline { p: 2 };
        let dx = 1.0 / 2048.0;
        let n = 2 * 2048 + 1;
        let vals: Vec<f64> = (0..n).map(|i| p2.eval(-1.0 + i as f64 * dx)).collect();
        let tab = Window::Sampled(SampledWindow::new(-1.0, dx, vals).unwrap());
        let m_tab = tab.shift_diff_norm(0.5).unwrap();
        let m_exact = p2.shift_diff_norm(0.5).unwrap();
        assert!(close(m_tab, m_exact, 1e-6), "{m_tab} vs {m_exact}");
    }

    #[test]
    fn shift_diff_is_even() {
        for &t in &[0.1, 0.35, 0.8] {
            let a = Window::Bspline { p: 2 }.shift_diff_norm(t).unwrap();
            let b = Window::Bspline { p: 2 }.shift_diff_norm(-t).unwrap();
            assert!(close(a, b, 1e-12));
        }
    }

    #[test]
    fn functionals_bspline2() {
        let f = Window::Bspline { p: 2 }.functionals().unwrap();
        assert!(close(f.l1, 1.0, 1e-15));
        assert!(close(f.l2, (2.0f64 / 3.0).sqrt(), 1e-15));
        assert!(close(f.sup_ft, 1.0, 1e-15));
        assert!(close(f.support_len, 2.0, 1e-15));
    }

    #[test]
    fn functionals_reject_sinc_but_sup_ft_works() {
        assert!(matches!(Window::Sinc.functionals(), Err(Error::UnboundedSupport)));
        assert_eq!(Window::Sinc.sup_ft().unwrap(), 1.0);
    }

    #[test]
    fn zero_window_functionals() {
        let w = Window::Sampled(SampledWindow::new(-0.5, 0.25, vec![0.0; 5]).unwrap());
        let f = w.functionals().unwrap();
        assert_eq!(f.l1, 0.0);
        assert_eq!(f.l2, 0.0);
        assert_eq!(f.sup_ft, 0.0);
        assert!(close(f.support_len, 1.0, 1e-15));
    }

    #[test]
    fn fourier_transform_matches_closed_forms() {
        let grid = GridSpec::new(-2.0, 2.0, 16384).unwrap();
        let ft = Window::Rect.fourier_transform(&grid).unwrap();
        let ds = grid.freq_step();
        // Bin centers at integer multiples of ds = 1/4.
        let at = |s: f64| {
            let j = (s / ds).round() as i64 + (grid.len() / 2) as i64;
            ft.values[j as usize]
        };
        assert!(close(at(0.0).re, 1.0, 1e-12));
        assert!(at(1.0).norm() < 1e-12, "sinc vanishes at 1");
        assert!(close(at(0.5).re, sinc(0.5), 1e-7));

        let ft2 = Window::Bspline { p: 2 }.fourier_transform(&grid).unwrap();
        for &s in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let j = (s / ds).round() as usize + grid.len() / 2;
            let want = sinc(s) * sinc(s);
            assert!(
                (ft2.values[j].re - want).abs() < 1e-6 && ft2.values[j].im.abs() < 1e-9,
                "s = {s}"
            );
        }
    }

    #[test]
    fn fourier_transform_checks_resolution() {
        let coarse = GridSpec::new(-2.0, 2.0, 64).unwrap(); // dx = 1/16 > 1/64
        assert!(matches!(
            Window::Rect.fourier_transform(&coarse),
            Err(Error::GridTooCoarse { .. })
        ));
        let narrow = GridSpec::new(-0.25, 0.25, 256).unwrap();
        assert!(Window::Rect.fourier_transform(&narrow).is_err());
    }

    #[test]
    fn plancherel_for_transform() {
        let grid = GridSpec::new(-4.0, 4.0, 8192).unwrap();
        let w = Window::Bspline { p: 2 };
        let ft = w.fourier_transform(&grid).unwrap();
        let time_norm = SampledFunction::real_from_fn(grid, |x| w.eval(x)).norm_sq();
        assert!(close(ft.norm_sq(), time_norm, 1e-10));
    }

    #[test]
    fn amalgam_norm_examples() {
        // Unit box: touches two unit cells, each with sup 1.
        assert!(close(Window::Rect.wiener_amalgam_norm().unwrap(), 2.0, 1e-12));
        // Derivative of the order-2 spline: slopes +-1 over three cells.
        let d = Window::Bspline { p: 2 }.derivative().unwrap();
        assert!(close(d.wiener_amalgam_norm().unwrap(), 3.0, 1e-12));
    }

    #[test]
    fn amalgam_norm_diverges_for_sinc() {
        assert!(matches!(
            Window::Sinc.wiener_amalgam_norm(),
            Err(Error::TailDivergence)
        ));
    }

    #[test]
    fn amalgam_shift_invariance_at_integer_shifts() {
        let d = Window::Bspline { p: 2 }.derivative().unwrap();
        let base = d.wiener_amalgam_norm().unwrap();
        if let Window::Sampled(s) = &d {
            for shift in [1.0, -2.0] {
                let moved = Window::Sampled(
                    SampledWindow::new(s.x0() + shift, s.dx(), s.values().to_vec()).unwrap(),
                );
                assert!(close(moved.wiener_amalgam_norm().unwrap(), base, 1e-12));
            }
        } else {
            panic!("derivative should be sampled");
        }
    }

    #[test]
    fn derivative_errors() {
        assert!(matches!(Window::Rect.derivative(), Err(Error::DistributionalDerivative)));
        assert!(Window::Sinc.derivative().is_err());
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let text = "x,value\n-0.5,0.0\n0.0,1.0\n0.5,0.0\n";
        let w = SampledWindow::from_csv(text).unwrap();
        assert_eq!(w.values(), &[0.0, 1.0, 0.0]);
        assert_eq!(w.x0(), -0.5);
        let again = SampledWindow::from_csv(&w.to_csv()).unwrap();
        assert_eq!(again, w);

        assert!(SampledWindow::from_csv("x,value\n0,1\n1,2\n1.5,3\n").is_err());
        assert!(SampledWindow::from_csv("a,b\n0,1\n1,2\n").is_err());
        assert!(SampledWindow::from_csv("x,value\n1,1\n0,2\n").is_err());
    }

    #[test]
    fn sampled_interpolation() {
        let w = SampledWindow::new(0.0, 1.0, vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(w.eval(0.5), 1.0);
        assert_eq!(w.eval(1.0), 2.0);
        assert_eq!(w.eval(-0.1), 0.0);
        assert_eq!(w.eval(2.1), 0.0);
    }
}
