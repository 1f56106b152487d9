//! Gabor lattices, atoms, and frequency-dependent jitter patterns.
//!
//! A system is indexed by (n, k): modulation e^{2 pi i b n x} and translation
//! by a k. A jitter pattern perturbs each translation to a (k + delta_{n,k});
//! the dependence of delta on the frequency index n is the whole point.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SampledFunction};
use crate::util::{f64_bits, fnv1a_hex, splitmix_unit};
use crate::windows::Window;

/// Time step a, frequency step b, and finite index ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborLattice {
    a: f64,
    b: f64,
    n_range: (i64, i64),
    k_range: (i64, i64),
}

impl GaborLattice {
    /// Validates a, b > 0 and the necessary density condition a b <= 1.
    pub fn new(a: f64, b: f64, n_range: (i64, i64), k_range: (i64, i64)) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a <= 0.0 || b <= 0.0 {
            return Err(Error::InvalidArgument(format!("need a, b > 0, got a = {a}, b = {b}")));
        }
        let ab = a * b;
        if ab > 1.0 + 1e-12 {
            return Err(Error::DensityViolated { ab });
        }
        if n_range.0 > n_range.1 || k_range.0 > k_range.1 {
            return Err(Error::InvalidArgument("empty index range".into()));
        }
        Ok(GaborLattice { a, b, n_range, k_range })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_range(&self) -> (i64, i64) {
        self.n_range
    }

    pub fn k_range(&self) -> (i64, i64) {
        self.k_range
    }

    pub fn n_iter(&self) -> impl Iterator<Item = i64> {
        self.n_range.0..=self.n_range.1
    }

    pub fn k_iter(&self) -> impl Iterator<Item = i64> {
        self.k_range.0..=self.k_range.1
    }

    pub fn contains(&self, n: i64, k: i64) -> bool {
        (self.n_range.0..=self.n_range.1).contains(&n)
            && (self.k_range.0..=self.k_range.1).contains(&k)
    }
}

/// Sparse jitter pattern delta_{n,k} with a declared bound. Missing entries
/// are zero. `constant_in_n` marks patterns that conceptually repeat for all
/// frequency rows beyond the stored ones; certificates that sum over n refuse
/// those.
#[derive(Debug, Clone, PartialEq)]
pub struct JitterPattern {
    deltas: BTreeMap<(i64, i64), f64>,
    delta_max: f64,
    constant_in_n: bool,
}

impl JitterPattern {
    /// Empty pattern with a declared sup bound (entries are validated
    /// against it on insert).
    pub fn new(delta_max: f64) -> Result<Self> {
        if !delta_max.is_finite() || delta_max < 0.0 {
            return Err(Error::InvalidArgument(format!("bad delta_max {delta_max}")));
        }
        Ok(JitterPattern { deltas: BTreeMap::new(), delta_max, constant_in_n: false })
    }

    pub fn zero() -> Self {
        JitterPattern { deltas: BTreeMap::new(), delta_max: 0.0, constant_in_n: false }
    }

    pub fn insert(&mut self, n: i64, k: i64, delta: f64) -> Result<()> {
        if !delta.is_finite() || delta.abs() > self.delta_max {
            return Err(Error::InvalidArgument(format!(
                "delta_{{{n},{k}}} = {delta} exceeds declared bound {}",
                self.delta_max
            )));
        }
        if delta == 0.0 {
            self.deltas.remove(&(n, k));
        } else {
            self.deltas.insert((n, k), delta);
        }
        Ok(())
    }

    pub fn get(&self, n: i64, k: i64) -> f64 {
        self.deltas.get(&(n, k)).copied().unwrap_or(0.0)
    }

    pub fn delta_max(&self) -> f64 {
        self.delta_max
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    /// Largest |delta| actually stored.
    pub fn max_abs(&self) -> f64 {
        self.deltas.values().map(|d| d.abs()).fold(0.0, f64::max)
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        self.deltas.iter().map(|(&(n, k), &d)| (n, k, d))
    }

    /// Whether the pattern conceptually extends with the same column values
    /// to every frequency row.
    pub fn constant_in_n(&self) -> bool {
        self.constant_in_n
    }

    pub fn set_constant_in_n(&mut self, flag: bool) {
        self.constant_in_n = flag;
    }

    /// Pattern with every entry scaled by s (|s| <= 1 keeps the bound).
    pub fn scaled(&self, s: f64) -> Result<JitterPattern> {
        let mut out = JitterPattern::new(self.delta_max * s.abs().max(1.0))?;
        out.constant_in_n = self.constant_in_n;
        for (n, k, d) in self.entries() {
            out.insert(n, k, d * s)?;
        }
        Ok(out)
    }

    /// Column sums of m-style squared terms: for each k, sum over stored n of
    /// f(delta_{n,k})^2. Errors for patterns flagged constant in n (the sum
    /// would be infinite).
    pub fn column_sq_sum(&self, f: impl Fn(f64) -> f64) -> Result<BTreeMap<i64, f64>> {
        if self.constant_in_n && !self.deltas.is_empty() {
            return Err(Error::NonSummableColumns);
        }
        let mut out = BTreeMap::new();
        for (_, k, d) in self.entries() {
            let v = f(d);
            *out.entry(k).or_insert(0.0) += v * v;
        }
        Ok(out)
    }

    /// Parses `n,k,delta` CSV with a header row.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty pattern file".into()))?;
        let header: String = header.split(',').map(|s| s.trim()).collect::<Vec<_>>().join(",");
        if header != "n,k,delta" {
            return Err(Error::Parse(format!("expected header 'n,k,delta', got '{header}'")));
        }
        let mut rows = Vec::new();
        let mut max_abs = 0.0f64;
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("row {}: need n,k,delta", i + 2)));
            }
            let n: i64 = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad n", i + 2)))?;
            let k: i64 = fields[1]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad k", i + 2)))?;
            let d: f64 = fields[2]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad delta", i + 2)))?;
            if !d.is_finite() {
                return Err(Error::Parse(format!("row {}: non-finite delta", i + 2)));
            }
            max_abs = max_abs.max(d.abs());
            rows.push((n, k, d));
        }
        let mut pat = JitterPattern::new(max_abs)?;
        for (n, k, d) in rows {
            pat.insert(n, k, d)?;
        }
        Ok(pat)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,k,delta\n");
        for (n, k, d) in self.entries() {
            out.push_str(&format!("{n},{k},{d}\n"));
        }
        out
    }

    /// Stable fingerprint of the stored entries.
    pub fn digest(&self) -> String {
        let mut s = String::new();
        for (n, k, d) in self.entries() {
            s.push_str(&format!("{n}:{k}:{};", f64_bits(d)));
        }
        s.push_str(&format!("max={};const_n={}", f64_bits(self.delta_max), self.constant_in_n));
        fnv1a_hex(s.as_bytes())
    }
}

/// Jitter marginals: d_k = sup_n |delta_{n,k}|, big_d_n = sup_k |delta_{n,k}|,
/// and per-column absolute sums.
#[derive(Debug, Clone, PartialEq)]
pub struct JitterMarginals {
    pub per_column_sup: BTreeMap<i64, f64>,
    pub per_row_sup: BTreeMap<i64, f64>,
    pub per_column_abs_sum: BTreeMap<i64, f64>,
}

impl JitterMarginals {
    pub fn sup_all(&self) -> f64 {
        self.per_column_sup.values().copied().fold(0.0, f64::max)
    }
}

/// Marginals of the stored entries.
pub fn jitter_marginals(pattern: &JitterPattern) -> JitterMarginals {
    let mut per_column_sup: BTreeMap<i64, f64> = BTreeMap::new();
    let mut per_row_sup: BTreeMap<i64, f64> = BTreeMap::new();
    let mut per_column_abs_sum: BTreeMap<i64, f64> = BTreeMap::new();
    for (n, k, d) in pattern.entries() {
        let ad = d.abs();
        per_column_sup
            .entry(k)
            .and_modify(|v| *v = v.max(ad))
            .or_insert(ad);
        per_row_sup
            .entry(n)
            .and_modify(|v| *v = v.max(ad))
            .or_insert(ad);
        *per_column_abs_sum.entry(k).or_insert(0.0) += ad;
    }
    JitterMarginals { per_column_sup, per_row_sup, per_column_abs_sum }
}

/// Deterministic jitter generators.
#[derive(Debug, Clone, PartialEq)]
pub enum JitterShape {
    /// Independent uniform draws in (-bound, bound), SplitMix64 stream.
    /// Requires bound < 1/2 so compact-support certification stays possible.
    UniformRandom { bound: f64, seed: u64 },
    /// delta_{n,k} = peak * ratio^|n|, the same for every column.
    GeometricInN { peak: f64, ratio: f64 },
    /// delta_{n,k} = d for every stored row; flags the pattern constant in n.
    ColumnConstant { d: f64 },
    /// delta_{n,k} = peak * ratio_n^|n| * ratio_k^|k|.
    Separable { peak: f64, ratio_n: f64, ratio_k: f64 },
}

/// Materializes a shape over the lattice index ranges. Iteration order is
/// row-major (n outer, k inner), so random patterns are reproducible.
pub fn generate_jitter(lattice: &GaborLattice, shape: &JitterShape) -> Result<JitterPattern> {
    match shape {
        JitterShape::UniformRandom { bound, seed } => {
            if !(*bound >= 0.0) || *bound >= 0.5 {
                return Err(Error::InvalidArgument(format!(
                    "uniform jitter bound must lie in [0, 1/2), got {bound}"
                )));
            }
            let mut pat = JitterPattern::new(*bound)?;
            let mut state = *seed;
            for n in lattice.n_iter() {
                for k in lattice.k_iter() {
                    let u = splitmix_unit(&mut state);
                    let d = bound * (2.0 * u - 1.0);
                    pat.insert(n, k, d)?;
                }
            }
            Ok(pat)
        }
        JitterShape::GeometricInN { peak, ratio } => {
            if !peak.is_finite() || !(0.0..1.0).contains(ratio) {
                return Err(Error::InvalidArgument(format!(
                    "geometric shape needs finite peak and ratio in [0, 1), got peak = {peak}, ratio = {ratio}"
                )));
            }
            let mut pat = JitterPattern::new(peak.abs())?;
            for n in lattice.n_iter() {
                let d = peak * ratio.powi(n.unsigned_abs().min(i32::MAX as u64) as i32);
                for k in lattice.k_iter() {
                    pat.insert(n, k, d)?;
                }
            }
            Ok(pat)
        }
        JitterShape::ColumnConstant { d } => {
            if !d.is_finite() {
                return Err(Error::InvalidArgument("non-finite column shift".into()));
            }
            let mut pat = JitterPattern::new(d.abs())?;
            for n in lattice.n_iter() {
                for k in lattice.k_iter() {
                    pat.insert(n, k, *d)?;
                }
            }
            pat.set_constant_in_n(true);
            Ok(pat)
        }
        JitterShape::Separable { peak, ratio_n, ratio_k } => {
            if !peak.is_finite()
                || !(0.0..1.0).contains(ratio_n)
                || !(0.0..1.0).contains(ratio_k)
            {
                return Err(Error::InvalidArgument(
                    "separable shape needs ratios in [0, 1)".into(),
                ));
            }
            let mut pat = JitterPattern::new(peak.abs())?;
            for n in lattice.n_iter() {
                let dn = ratio_n.powi(n.unsigned_abs().min(i32::MAX as u64) as i32);
                for k in lattice.k_iter() {
                    let d = peak * dn * ratio_k.powi(k.unsigned_abs().min(i32::MAX as u64) as i32);
                    pat.insert(n, k, d)?;
                }
            }
            Ok(pat)
        }
    }
}

/// Dense samples of the atom e^{2 pi i b n x} w(x - a (k + delta)).
pub fn atom(
    w: &Window,
    lattice: &GaborLattice,
    n: i64,
    k: i64,
    delta: f64,
    grid: &GridSpec,
) -> Result<SampledFunction> {
    if !lattice.contains(n, k) {
        return Err(Error::InvalidArgument(format!(
            "(n, k) = ({n}, {k}) outside the lattice index ranges"
        )));
    }
    let shift = lattice.a() * (k as f64 + delta);
    let freq = lattice.b() * n as f64;
    Ok(SampledFunction::from_fn(*grid, |x| {
        let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * freq * x);
        phase * w.eval(x - shift)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat() -> GaborLattice {
        GaborLattice::new(1.0, 1.0, (-4, 4), (-4, 4)).unwrap()
    }

    #[test]
    fn lattice_validation() {
        assert!(GaborLattice::new(1.0, 1.0, (-1, 1), (-1, 1)).is_ok());
        assert!(matches!(
            GaborLattice::new(1.0, 1.5, (-1, 1), (-1, 1)),
            Err(Error::DensityViolated { .. })
        ));
        assert!(GaborLattice::new(-1.0, 0.5, (-1, 1), (-1, 1)).is_err());
        assert!(GaborLattice::new(0.5, 0.5, (1, 0), (-1, 1)).is_err());
    }

    #[test]
    fn atom_norm_on_grid() {
        // Modulation does not change the discrete L2 norm; box atoms on a
        // lattice-aligned grid integrate exactly.
        let grid = GridSpec::new(-8.0, 8.0, 4096).unwrap();
        let g = atom(&Window::Rect, &lat(), 2, 0, 0.0, &grid).unwrap();
        assert!((g.norm_sq() - 1.0).abs() < 1e-14);
        let g = atom(&Window::Rect, &lat(), -3, 1, 0.0, &grid).unwrap();
        assert!((g.norm_sq() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn atom_rejects_out_of_range_indices() {
        let grid = GridSpec::new(-8.0, 8.0, 512).unwrap();
        assert!(atom(&Window::Rect, &lat(), 99, 0, 0.0, &grid).is_err());
    }

    #[test]
    fn pattern_bound_enforced() {
        let mut p = JitterPattern::new(0.1).unwrap();
        assert!(p.insert(0, 0, 0.05).is_ok());
        assert!(p.insert(0, 1, 0.2).is_err());
        assert_eq!(p.get(0, 0), 0.05);
        assert_eq!(p.get(5, 5), 0.0);
    }

    #[test]
    fn marginals_match_hand_computation() {
        let mut p = JitterPattern::new(0.5).unwrap();
        p.insert(0, 0, 0.1).unwrap();
        p.insert(1, 0, -0.3).unwrap();
        p.insert(0, 2, 0.2).unwrap();
        let m = jitter_marginals(&p);
        assert_eq!(m.per_column_sup[&0], 0.3);
        assert_eq!(m.per_column_sup[&2], 0.2);
        assert_eq!(m.per_row_sup[&0], 0.2);
        assert_eq!(m.per_row_sup[&1], 0.3);
        assert!((m.per_column_abs_sum[&0] - 0.4).abs() < 1e-15);
        assert_eq!(m.sup_all(), 0.3);
    }

    #[test]
    fn uniform_jitter_is_reproducible_and_bounded() {
        let shape = JitterShape::UniformRandom { bound: 0.2, seed: 99 };
        let p1 = generate_jitter(&lat(), &shape).unwrap();
        let p2 = generate_jitter(&lat(), &shape).unwrap();
        assert_eq!(p1, p2);
        assert!(p1.max_abs() < 0.2);
        assert!(p1.len() > 70); // 81 cells, a few may draw ~0
        let other = generate_jitter(
            &lat(),
            &JitterShape::UniformRandom { bound: 0.2, seed: 100 },
        )
        .unwrap();
        assert_ne!(p1, other);
    }

    #[test]
    fn uniform_bound_must_stay_below_half() {
        let shape = JitterShape::UniformRandom { bound: 0.5, seed: 1 };
        assert!(generate_jitter(&lat(), &shape).is_err());
    }

    #[test]
    fn geometric_shape_decays_in_n() {
        let shape = JitterShape::GeometricInN { peak: 1.0 / 48.0, ratio: 0.5 };
        let p = generate_jitter(&lat(), &shape).unwrap();
        assert!((p.get(0, 0) - 1.0 / 48.0).abs() < 1e-18);
        assert!((p.get(2, 3) - 1.0 / 192.0).abs() < 1e-18);
        assert_eq!(p.get(2, 3), p.get(-2, 3));
        assert!(!p.constant_in_n());
    }

    #[test]
    fn column_constant_sets_flag_and_column_sums_refuse() {
        let shape = JitterShape::ColumnConstant { d: 0.3 };
        let p = generate_jitter(&lat(), &shape).unwrap();
        assert!(p.constant_in_n());
        assert!(matches!(p.column_sq_sum(|d| d), Err(Error::NonSummableColumns)));
    }

    #[test]
    fn csv_round_trip() {
        let mut p = JitterPattern::new(0.25).unwrap();
        p.insert(-1, 2, 0.125).unwrap();
        p.insert(0, 0, -0.0625).unwrap();
        let text = p.to_csv();
        let q = JitterPattern::from_csv(&text).unwrap();
        assert_eq!(q.get(-1, 2), 0.125);
        assert_eq!(q.get(0, 0), -0.0625);
        assert!(JitterPattern::from_csv("n,k\n1,2\n").is_err());
    }

    #[test]
    fn scaling_scales_entries() {
        let mut p = JitterPattern::new(0.2).unwrap();
        p.insert(0, 0, 0.2).unwrap();
        let half = p.scaled(0.5).unwrap();
        assert_eq!(half.get(0, 0), 0.1);
        let zero = p.scaled(0.0).unwrap();
        assert!(zero.is_empty());
    }

    #[test]
    fn digest_changes_with_entries() {
        let mut p = JitterPattern::new(0.2).unwrap();
        p.insert(0, 0, 0.1).unwrap();
        let d1 = p.digest();
        p.insert(1, 0, 0.1).unwrap();
        assert_ne!(p.digest(), d1);
    }
}
