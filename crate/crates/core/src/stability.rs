//! Stability certificates for Gabor systems under frequency-dependent
//! timing jitter.
//!
//! Each certificate computes the margin quantity of one sufficient
//! condition, tests the strict inequality against its threshold, and when
//! the test passes emits the perturbed frame bounds that the condition
//! guarantees. Pass/fail decisions use the exact computed margins with no
//! epsilon slack; tolerance belongs in oracle comparisons, not here.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::bounds::{FrameBounds, Provenance};
use crate::error::{Error, Result};
use crate::gabor::{jitter_marginals, JitterPattern};
use crate::util::fnv1a_hex;
use crate::windows::Window;

/// Which sufficient condition a certificate instantiates. The kebab-case
/// identifiers are part of the report wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    PaleyWiener,
    Thm1Compact,
    CorBspline,
    ThmWienerAmalgam,
    ThmBandlimited,
    CorNsgfOverlap,
}

impl Theorem {
    pub fn id(&self) -> &'static str {
        match self {
            Theorem::PaleyWiener => "paley-wiener",
            Theorem::Thm1Compact => "thm1-compact",
            Theorem::CorBspline => "cor-bspline",
            Theorem::ThmWienerAmalgam => "thm-wiener-amalgam",
            Theorem::ThmBandlimited => "thm-bandlimited",
            Theorem::CorNsgfOverlap => "cor-nsgf-overlap",
        }
    }

    pub fn parse(s: &str) -> Option<Theorem> {
        match s {
            "paley-wiener" => Some(Theorem::PaleyWiener),
            "thm1-compact" => Some(Theorem::Thm1Compact),
            "cor-bspline" => Some(Theorem::CorBspline),
            "thm-wiener-amalgam" => Some(Theorem::ThmWienerAmalgam),
            "thm-bandlimited" => Some(Theorem::ThmBandlimited),
            "cor-nsgf-overlap" => Some(Theorem::CorNsgfOverlap),
            _ => None,
        }
    }
}

/// Outcome of one sufficient condition: the margin (lambda or mu in the
/// condition's own normalization), the threshold it must stay strictly
/// below (A, sqrt(A) or 1), and the guaranteed perturbed bounds when it
/// does. `aux` carries secondary diagnostic quantities keyed by name.
#[derive(Debug, Clone)]
pub struct StabilityCertificate {
    pub theorem: Theorem,
    pub margin: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Present exactly when `passed`.
    pub perturbed: Option<FrameBounds>,
    pub inputs_digest: String,
    pub notes: String,
    pub aux: BTreeMap<&'static str, f64>,
}

impl Serialize for StabilityCertificate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        // Wire format flattens the perturbed bounds to A_prime / B_prime.
        let mut n = 6;
        if self.perturbed.is_some() {
            n += 2;
        }
        if !self.aux.is_empty() {
            n += 1;
        }
        let mut s = serializer.serialize_struct("StabilityCertificate", n)?;
        s.serialize_field("theorem", &self.theorem)?;
        s.serialize_field("margin", &self.margin)?;
        s.serialize_field("threshold", &self.threshold)?;
        s.serialize_field("passed", &self.passed)?;
        if let Some(p) = &self.perturbed {
            s.serialize_field("A_prime", &p.lower)?;
            s.serialize_field("B_prime", &p.upper)?;
        }
        s.serialize_field("inputs_digest", &self.inputs_digest)?;
        s.serialize_field("notes", &self.notes)?;
        if !self.aux.is_empty() {
            s.serialize_field("aux", &self.aux)?;
        }
        s.end()
    }
}

/// Builds a certificate from a margin/threshold pair and the relative
/// deviation `ratio` that scales the base bounds on a pass:
/// A' = (1 - ratio) A, B' = (1 + ratio) B.
fn build_certificate(
    theorem: Theorem,
    margin: f64,
    threshold: f64,
    ratio: f64,
    base: &FrameBounds,
    inputs_digest: String,
    notes: String,
    aux: BTreeMap<&'static str, f64>,
) -> Result<StabilityCertificate> {
    let passed = margin < threshold;
    let perturbed = if passed {
        Some(FrameBounds::new(
            (1.0 - ratio) * base.lower,
            (1.0 + ratio) * base.upper,
            Provenance::CertifiedPerturbed,
            false,
        )?)
    } else {
        None
    };
    Ok(StabilityCertificate {
        theorem,
        margin,
        threshold,
        passed,
        perturbed,
        inputs_digest,
        notes,
        aux,
    })
}

fn digest_inputs(theorem: Theorem, parts: &[String]) -> String {
    let mut s = String::from(theorem.id());
    for p in parts {
        s.push('|');
        s.push_str(p);
    }
    fnv1a_hex(s.as_bytes())
}

/// Perturbation certificate for a frame {x_n} and a nearby family {y_n}
/// satisfying ||sum a_n (x_n - y_n)|| <= lambda ||sum a_n x_n||
///                                      + mu (sum |a_n|^2)^{1/2}.
/// Passes iff lambda + mu / sqrt(A) < 1, and then {y_n} is a frame with
/// bounds (1 - (lambda + mu/sqrt(A))) A and (1 + lambda + mu/sqrt(A)) B.
pub fn paley_wiener_certificate(
    base: &FrameBounds,
    lambda: f64,
    mu: f64,
) -> Result<StabilityCertificate> {
    if !(lambda.is_finite() && mu.is_finite()) || lambda < 0.0 || mu < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need finite lambda, mu >= 0, got lambda = {lambda}, mu = {mu}"
        )));
    }
    let margin = lambda + mu / base.lower.sqrt();
    let mut aux = BTreeMap::new();
    aux.insert("lambda", lambda);
    aux.insert("mu", mu);
    build_certificate(
        Theorem::PaleyWiener,
        margin,
        1.0,
        margin,
        base,
        digest_inputs(
            Theorem::PaleyWiener,
            &[
                format!("A={:e}", base.lower),
                format!("B={:e}", base.upper),
                format!("lambda={lambda:e}"),
                format!("mu={mu:e}"),
            ],
        ),
        format!(
            "deviation bound lambda = {lambda}, mu = {mu} against base bounds A = {}, B = {}",
            base.lower, base.upper
        ),
        aux,
    )
}

/// 1 - cos(pi delta m) + sin(pi delta m): the trigonometric factor in the
/// exponential-perturbation estimate. Equals 1 exactly at delta = 1/(4m)
/// and is increasing on [0, 1/(4m)].
pub fn kadec_factor(delta: f64, m: u32) -> f64 {
    let t = PI * delta * m as f64;
    1.0 - t.cos() + t.sin()
}

/// Deviation constant for jittered exponentials on an interval of length m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KadecConstant {
    /// sqrt(m / 2 pi) (1 - cos(pi delta m) + sin(pi delta m)).
    pub value: f64,
    /// True iff delta < 1/(4m), where the estimate is guaranteed.
    pub in_regime: bool,
}

/// Evaluates the deviation constant at jitter amplitude `delta` for the
/// interval (-m/2, m/2). Out-of-range amplitudes are flagged, not rejected.
pub fn kadec_constant(delta: f64, m: u32) -> Result<KadecConstant> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::InvalidArgument(format!("need delta >= 0, got {delta}")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("need m >= 1".into()));
    }
    let mf = m as f64;
    Ok(KadecConstant {
        value: (mf / (2.0 * PI)).sqrt() * kadec_factor(delta, m),
        in_regime: delta < 1.0 / (4.0 * mf),
    })
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::InvalidArgument(format!("need {name} > 0, got {v}")));
    }
    Ok(())
}

/// sup_k sum_n m(scale * delta_{n,k})^2 over stored pattern entries, where
/// m is the window's shift-difference norm. Shared by the compact-support
/// and convolution-power certificates.
fn sup_column_shift_sum(w: &Window, scale: f64, pattern: &JitterPattern) -> Result<f64> {
    let mut m_cache: BTreeMap<u64, f64> = BTreeMap::new();
    for (_, _, d) in pattern.entries() {
        let t = scale * d;
        if let std::collections::btree_map::Entry::Vacant(e) = m_cache.entry(t.to_bits()) {
            e.insert(w.shift_diff_norm(t)?);
        }
    }
    let columns = pattern.column_sq_sum(|d| m_cache[&(scale * d).to_bits()])?;
    Ok(columns.values().copied().fold(0.0, f64::max))
}

fn check_compact_hypotheses(w: &Window, a: f64, b: f64, pattern: &JitterPattern) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    let c = w.support_len().ok_or(Error::UnboundedSupport)?;
    if a > c + 1e-12 {
        return Err(Error::HypothesisViolated(format!(
            "need a <= support length, got a = {a}, support = {c}"
        )));
    }
    if pattern.max_abs() >= 0.5 {
        return Err(Error::HypothesisViolated(format!(
            "jitter entries must lie in (-1/2, 1/2), max |delta| = {}",
            pattern.max_abs()
        )));
    }
    Ok(c)
}

/// Certificate for a compactly supported window: with
/// lambda = 4 sup_k sum_n ||h - h(. - a delta_{n,k})||_2^2 < A the jittered
/// system stays a frame with bounds (1 -+ sqrt(lambda/A)) {A, B}.
pub fn certify_compact_support(
    w: &Window,
    a: f64,
    b: f64,
    base: &FrameBounds,
    pattern: &JitterPattern,
) -> Result<StabilityCertificate> {
    let c = check_compact_hypotheses(w, a, b, pattern)?;
    let lambda = 4.0 * sup_column_shift_sum(w, a, pattern)?;
    let ratio = (lambda / base.lower).sqrt();
    build_certificate(
        Theorem::Thm1Compact,
        lambda,
        base.lower,
        ratio,
        base,
        digest_inputs(
            Theorem::Thm1Compact,
            &[
                w.describe(),
                format!("a={a:e}"),
                format!("b={b:e}"),
                format!("A={:e}", base.lower),
                format!("B={:e}", base.upper),
                pattern.digest(),
            ],
        ),
        format!(
            "window {} (support length {c}), lattice a = {a}, b = {b}, base bounds {:?} \
             A = {}, B = {}, shift norms from closed-form or quadrature autocorrelation",
            w.describe(),
            base.provenance,
            base.lower,
            base.upper
        ),
        BTreeMap::new(),
    )
}

/// Certificate for the p-fold self-convolution system G(w^(p); pa, b/p).
/// Young's inequality bounds the convolved shift norm by
/// ||h||_1^{p-1} ||h - h(. - pa delta)||_2, so
/// lambda = 4 ||h||_1^{2(p-1)} sup_k sum_n m(pa delta_{n,k})^2 is tested
/// against the recursion bound A_p. `bounds_p` are the bounds of the
/// convolved system, not of the base window's system.
pub fn certify_bspline(
    w: &Window,
    p: u32,
    a: f64,
    b: f64,
    bounds_p: &FrameBounds,
    pattern: &JitterPattern,
) -> Result<StabilityCertificate> {
    if p == 0 {
        return Err(Error::InvalidArgument("need p >= 1".into()));
    }
    let c = check_compact_hypotheses(w, a, b, pattern)?;
    let l1 = w.functionals()?.l1;
    let factor = l1.powi(2 * (p as i32 - 1));
    let lambda = 4.0 * factor * sup_column_shift_sum(w, a * p as f64, pattern)?;
    let ratio = (lambda / bounds_p.lower).sqrt();
    let mut aux = BTreeMap::new();
    aux.insert("l1_norm", l1);
    build_certificate(
        Theorem::CorBspline,
        lambda,
        bounds_p.lower,
        ratio,
        bounds_p,
        digest_inputs(
            Theorem::CorBspline,
            &[
                w.describe(),
                format!("p={p}"),
                format!("a={a:e}"),
                format!("b={b:e}"),
                format!("A={:e}", bounds_p.lower),
                format!("B={:e}", bounds_p.upper),
                pattern.digest(),
            ],
        ),
        format!(
            "base window {} (support length {c}) convolved {p}-fold on lattice \
             ({}, {}), ||h||_1 = {l1} squared per convolution step, bounds {:?} \
             A_p = {}, B_p = {}",
            w.describe(),
            a * p as f64,
            b / p as f64,
            bounds_p.provenance,
            bounds_p.lower,
            bounds_p.upper
        ),
        aux,
    )
}

/// Certificate from the derivative's amalgam norm: with d_k = sup_n
/// |delta_{n,k}| and lambda = (ab)^{-1/2} ||h'||_W (sum_k d_k^2)^{1/2}
/// < sqrt(A), the jittered system is a frame with bounds
/// (1 -+ lambda/sqrt(A)) {A, B}. Columns may repeat the same shift for
/// every n; only the per-column sup enters.
pub fn certify_wiener_amalgam(
    w: &Window,
    a: f64,
    b: f64,
    base: &FrameBounds,
    pattern: &JitterPattern,
) -> Result<StabilityCertificate> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    let derivative = w.derivative()?;
    let amalgam = derivative.wiener_amalgam_norm()?;
    let marginals = jitter_marginals(pattern);
    let sum_sq: f64 = marginals.per_column_sup.values().map(|d| d * d).sum();
    let lambda = (a * b).powf(-0.5) * amalgam * sum_sq.sqrt();
    let threshold = base.lower.sqrt();
    let ratio = lambda / threshold;
    let mut aux = BTreeMap::new();
    aux.insert("amalgam_norm", amalgam);
    aux.insert("column_sup_sq_sum", sum_sq);
    build_certificate(
        Theorem::ThmWienerAmalgam,
        lambda,
        threshold,
        ratio,
        base,
        digest_inputs(
            Theorem::ThmWienerAmalgam,
            &[
                w.describe(),
                format!("a={a:e}"),
                format!("b={b:e}"),
                format!("A={:e}", base.lower),
                format!("B={:e}", base.upper),
                pattern.digest(),
            ],
        ),
        format!(
            "window {}, derivative amalgam norm {amalgam} (cell scan), lattice \
             a = {a}, b = {b}, base bounds {:?} A = {}, B = {}, {} active columns",
            w.describe(),
            base.provenance,
            base.lower,
            base.upper,
            marginals.per_column_sup.len()
        ),
        aux,
    )
}

/// Certificate for a band-limited window (transform supported in
/// (-M/2, M/2)): with D_n = sup_k |delta_{n,k}| and
/// mu = ||transform||_inf sqrt(M/2pi)
///      (sum_n (1 - cos(2 pi M D_n) + sin(2 pi M D_n))^2)^{1/2} < sqrt(A)
/// the jittered system is a frame with bounds (1 -+ mu/sqrt(A)) {A, B}.
/// Every |delta| must stay below 1/(4M). The `aux` map reports the value
/// the underlying interval estimate gives at argument pi M D_n
/// ("lemma_form_margin": the stated condition doubles that argument) and
/// the coarser sufficient margin (M/sqrt(pi)) ||transform||_inf
/// (sum D_n^2)^{1/2} ("remark_margin").
pub fn certify_bandlimited(
    w: &Window,
    a: f64,
    b: f64,
    base: &FrameBounds,
    pattern: &JitterPattern,
) -> Result<StabilityCertificate> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    let width = w.band_limit().ok_or_else(|| {
        Error::HypothesisViolated("window carries no band limit, certificate needs one".into())
    })?;
    // The band width enters as a positive integer; a fractional declared
    // width is covered by the next integer up.
    let m = if (width - width.round()).abs() < 1e-9 {
        width.round() as u32
    } else {
        width.ceil() as u32
    }
    .max(1);
    let regime = 1.0 / (4.0 * m as f64);
    if pattern.max_abs() >= regime {
        return Err(Error::HypothesisViolated(format!(
            "need every |delta| < 1/(4M) = {regime}, max |delta| = {}",
            pattern.max_abs()
        )));
    }
    let sup_ft = w.sup_ft()?;
    let marginals = jitter_marginals(pattern);
    let row_sups: Vec<f64> = marginals.per_row_sup.values().copied().collect();
    let sq = |f: fn(f64, u32) -> f64, mult: f64| -> f64 {
        row_sups.iter().map(|d| f(mult * d, m).powi(2)).sum::<f64>().sqrt()
    };
    let scale = sup_ft * (m as f64 / (2.0 * PI)).sqrt();
    let mu = scale * sq(kadec_factor, 2.0);
    let lemma_form = scale * sq(kadec_factor, 1.0);
    let d_sq: f64 = row_sups.iter().map(|d| d * d).sum();
    let remark = m as f64 / PI.sqrt() * sup_ft * d_sq.sqrt();
    let threshold = base.lower.sqrt();
    let mut aux = BTreeMap::new();
    aux.insert("lemma_form_margin", lemma_form);
    aux.insert("remark_margin", remark);
    aux.insert("band_width", m as f64);
    build_certificate(
        Theorem::ThmBandlimited,
        mu,
        threshold,
        mu / threshold,
        base,
        digest_inputs(
            Theorem::ThmBandlimited,
            &[
                w.describe(),
                format!("a={a:e}"),
                format!("b={b:e}"),
                format!("A={:e}", base.lower),
                format!("B={:e}", base.upper),
                pattern.digest(),
            ],
        ),
        format!(
            "window {}, band width M = {m}, sup |transform| = {sup_ft}, lattice \
             a = {a}, b = {b}, base bounds {:?} A = {}, B = {}, {} active rows",
            w.describe(),
            base.provenance,
            base.lower,
            base.upper,
            row_sups.len()
        ),
        aux,
    )
}

/// Result of the support-overlap test for column-constant shifts.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OverlapCheck {
    pub holds: bool,
    /// First k with delta_{k+1} - delta_k above the threshold.
    pub violating_k: Option<i64>,
    /// (c - a) / a.
    pub threshold: f64,
    /// Largest consecutive increment seen.
    pub max_increment: f64,
}

/// Checks that consecutive column shifts satisfy
/// delta_{k+1} - delta_k <= (c - a)/a, so the shifted supports keep
/// covering the line and the system survives as a (non-stationary) frame.
/// The inequality is one-sided and not strict.
pub fn nsgf_overlap_check(
    c: f64,
    a: f64,
    column_deltas: &BTreeMap<i64, f64>,
) -> Result<OverlapCheck> {
    check_positive("c", c)?;
    check_positive("a", a)?;
    if a > c + 1e-12 {
        return Err(Error::HypothesisViolated(format!(
            "need a <= c, got a = {a}, c = {c}"
        )));
    }
    let keys: Vec<i64> = column_deltas.keys().copied().collect();
    for pair in keys.windows(2) {
        if pair[1] != pair[0] + 1 {
            return Err(Error::InvalidArgument(format!(
                "column shifts must cover a contiguous k range, gap after k = {}",
                pair[0]
            )));
        }
    }
    let threshold = (c - a) / a;
    let mut max_increment = f64::NEG_INFINITY;
    let mut violating_k = None;
    for pair in keys.windows(2) {
        let inc = column_deltas[&pair[1]] - column_deltas[&pair[0]];
        if inc > max_increment {
            max_increment = inc;
        }
        if inc > threshold && violating_k.is_none() {
            violating_k = Some(pair[0]);
        }
    }
    if !max_increment.is_finite() {
        max_increment = 0.0;
    }
    Ok(OverlapCheck {
        holds: violating_k.is_none(),
        violating_k,
        threshold,
        max_increment,
    })
}
