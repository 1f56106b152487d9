//! Property-level invariants that cut across modules: metric symmetries,
//! marginal monotonicity, bound-route consistency, certificate fixed points
//! and monotonicity under jitter scaling.

use std::collections::BTreeMap;

use proptest::prelude::*;

use gaborstab::bounds::{
    fourier_side_bounds, painless_bounds, rect_bounds, rescale_bounds, FrameBounds, Provenance,
};
use gaborstab::gabor::{
    atom, generate_jitter, jitter_marginals, GaborLattice, JitterPattern, JitterShape,
};
use gaborstab::grid::GridSpec;
use gaborstab::stability::{
    certify_bandlimited, certify_compact_support, certify_wiener_amalgam,
    paley_wiener_certificate,
};
use gaborstab::windows::Window;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn compact_window() -> impl Strategy<Value = Window> {
    prop_oneof![
        Just(Window::Rect),
        (1u32..=4).prop_map(|p| Window::Bspline { p }),
    ]
}

fn pattern_from(entries: Vec<(i64, i64, f64)>) -> JitterPattern {
    let mut p = JitterPattern::new(0.49).unwrap();
    for (n, k, d) in entries {
        p.insert(n, k, d).unwrap();
    }
    p
}

fn entry_strategy(bound: f64) -> impl Strategy<Value = Vec<(i64, i64, f64)>> {
    prop::collection::vec((-4i64..=4, -4i64..=4, -bound..bound), 0..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_metric_is_even_and_bounded(
        w in compact_window(),
        t in -2.9f64..2.9,
    ) {
        let m_pos = w.shift_diff_norm(t).unwrap();
        let m_neg = w.shift_diff_norm(-t).unwrap();
        prop_assert!(close(m_pos, m_neg, 1e-12));
        let norm_sq = w.autocorr(0.0).unwrap();
        prop_assert!(m_pos * m_pos <= 4.0 * norm_sq + 1e-9);
        prop_assert_eq!(w.shift_diff_norm(0.0).unwrap(), 0.0);
    }

    #[test]
    fn marginals_never_decrease_under_insert(
        entries in entry_strategy(0.45),
        extra_k in -4i64..=4,
        extra_d in 0.01f64..0.45,
    ) {
        let base = pattern_from(entries.clone());
        let before = jitter_marginals(&base);
        let mut grown = base.clone();
        // A fresh row index so the insert is a genuine addition.
        grown.insert(9, extra_k, extra_d).unwrap();
        let after = jitter_marginals(&grown);
        for (k, v) in &before.per_column_sup {
            prop_assert!(after.per_column_sup[k] >= *v);
        }
        for (n, v) in &before.per_row_sup {
            prop_assert!(after.per_row_sup[n] >= *v);
        }
        for (k, v) in &before.per_column_abs_sum {
            prop_assert!(after.per_column_abs_sum[k] >= *v);
        }
        prop_assert!(after.sup_all() >= before.sup_all());
    }

    #[test]
    fn column_sum_marginal_dominates_row_sup_sum(
        entries in entry_strategy(0.45),
    ) {
        // sup_k sum_n |d| <= sum_n sup_k |d|: the sharper column-wise
        // aggregation never exceeds the row-wise one.
        let marg = jitter_marginals(&pattern_from(entries));
        let lhs = marg
            .per_column_abs_sum
            .values()
            .copied()
            .fold(0.0, f64::max);
        let rhs: f64 = marg.per_row_sup.values().sum();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn rescale_round_trips(
        lower in 0.1f64..5.0,
        spread in 0.0f64..3.0,
        s in 0.1f64..10.0,
    ) {
        let fb = FrameBounds::new(lower, lower * (1.0 + spread), Provenance::Painless, false)
            .unwrap();
        let once = rescale_bounds(&fb, s).unwrap();
        let back = rescale_bounds(&once, 1.0 / s).unwrap();
        prop_assert!(close(back.lower, fb.lower, 1e-12 * fb.lower));
        prop_assert!(close(back.upper, fb.upper, 1e-12 * fb.upper));
    }

    #[test]
    fn zero_pattern_certificates_return_base_bounds_exactly(
        p in 2u32..=4,
        lower in 0.2f64..3.0,
        spread in 0.0f64..2.0,
    ) {
        let w = Window::Bspline { p };
        let base =
            FrameBounds::new(lower, lower * (1.0 + spread), Provenance::Painless, false).unwrap();
        let zero = JitterPattern::zero();
        let a = 0.5 * p as f64;
        let cert = certify_compact_support(&w, a, 0.25, &base, &zero).unwrap();
        prop_assert!(cert.passed);
        let fb = cert.perturbed.unwrap();
        prop_assert_eq!(fb.lower.to_bits(), base.lower.to_bits());
        prop_assert_eq!(fb.upper.to_bits(), base.upper.to_bits());

        let cert = certify_wiener_amalgam(&w, a, 0.25, &base, &zero).unwrap();
        let fb = cert.perturbed.unwrap();
        prop_assert_eq!(fb.lower.to_bits(), base.lower.to_bits());
        prop_assert_eq!(fb.upper.to_bits(), base.upper.to_bits());

        let cert = certify_bandlimited(&Window::Sinc, a, 0.25, &base, &zero).unwrap();
        let fb = cert.perturbed.unwrap();
        prop_assert_eq!(fb.lower.to_bits(), base.lower.to_bits());
        prop_assert_eq!(fb.upper.to_bits(), base.upper.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn atom_norm_matches_window_norm(
        w in compact_window(),
        a in 0.3f64..1.5,
        b in 0.3f64..1.5,
        n in -8i64..=8,
        k in -4i64..=4,
        delta in -0.49f64..0.49,
    ) {
        prop_assume!(a * b <= 0.99);
        let grid = GridSpec::new(-16.0, 16.0, 1 << 12).unwrap();
        let lat = GaborLattice::new(a, b, (-8, 8), (-4, 4)).unwrap();
        let g = atom(&w, &lat, n, k, delta, &grid).unwrap();
        let expected = w.autocorr(0.0).unwrap().sqrt();
        // Midpoint quadrature of the squared envelope: exact for the box at
        // generic centers, O(dx^2) for the splines (worst for p = 2, whose
        // square has a kink), so the tolerance tracks quadrature, not ulps.
        prop_assert!(
            close(g.norm(), expected, 1e-4 * expected),
            "norm {} vs {}", g.norm(), expected
        );
    }

    #[test]
    fn generated_jitter_is_seed_deterministic(
        seed in any::<u64>(),
        bound in 0.01f64..0.49,
    ) {
        let lat = GaborLattice::new(1.0, 1.0, (-5, 5), (-5, 5)).unwrap();
        let shape = JitterShape::UniformRandom { bound, seed };
        let p1 = generate_jitter(&lat, &shape).unwrap();
        let p2 = generate_jitter(&lat, &shape).unwrap();
        prop_assert_eq!(p1.digest(), p2.digest());
        let e1: Vec<_> = p1.entries().collect();
        let e2: Vec<_> = p2.entries().collect();
        prop_assert_eq!(e1, e2);
    }

    #[test]
    fn rect_special_lower_bound_never_exceeds_painless(
        a in 0.1f64..1.0,
        b in 0.1f64..1.0,
    ) {
        let painless = painless_bounds(&Window::Rect, a, b).unwrap();
        let special = rect_bounds(a, b).unwrap();
        prop_assert!(special.lower <= painless.lower + 1e-9 * painless.lower);
    }

    #[test]
    fn certificate_margins_scale_monotonically(
        entries in entry_strategy(0.2),
        s in 0.05f64..1.0,
    ) {
        let base = FrameBounds::new(1.0, 2.0, Provenance::Painless, false).unwrap();
        let pattern = pattern_from(entries);
        let scaled = pattern.scaled(s).unwrap();

        let full = certify_compact_support(&Window::Rect, 1.0, 1.0, &base, &pattern).unwrap();
        let shrunk = certify_compact_support(&Window::Rect, 1.0, 1.0, &base, &scaled).unwrap();
        prop_assert!(shrunk.margin <= full.margin + 1e-12);

        let full = certify_wiener_amalgam(&Window::Bspline { p: 2 }, 1.0, 0.5, &base, &pattern)
            .unwrap();
        let shrunk = certify_wiener_amalgam(&Window::Bspline { p: 2 }, 1.0, 0.5, &base, &scaled)
            .unwrap();
        prop_assert!(shrunk.margin <= full.margin + 1e-12);

        let full = certify_bandlimited(&Window::Sinc, 1.0, 0.5, &base, &pattern).unwrap();
        let shrunk = certify_bandlimited(&Window::Sinc, 1.0, 0.5, &base, &scaled).unwrap();
        prop_assert!(shrunk.margin <= full.margin + 1e-12);
    }

    #[test]
    fn single_row_reduction_is_consistent(
        a in 0.3f64..1.0,
        delta in 0.01f64..0.4,
        count in 1i64..=6,
    ) {
        // One frequency row, constant shift: the column-wise aggregate
        // collapses to 4 m(a delta)^2, and the crude sequence-level route
        // (mu = 2 m(a delta) sqrt(count)) can only be weaker.
        let base = FrameBounds::new(1.0, 2.0, Provenance::Painless, false).unwrap();
        let mut pattern = JitterPattern::new(0.49).unwrap();
        for k in 0..count {
            pattern.insert(2, k, delta).unwrap();
        }
        let cert = certify_compact_support(&Window::Rect, a, 1.0, &base, &pattern).unwrap();
        let m = Window::Rect.shift_diff_norm(a * delta).unwrap();
        let lambda_direct = 4.0 * m * m;
        prop_assert!(close(cert.margin, lambda_direct, 1e-10 * lambda_direct.max(1e-9)));

        let mu = 2.0 * m * (count as f64).sqrt();
        let pw = paley_wiener_certificate(&base, 0.0, mu).unwrap();
        let thm_ratio = (cert.margin / base.lower).sqrt();
        prop_assert!(pw.margin + 1e-12 >= thm_ratio);
    }
}

#[test]
fn rect_special_covering_count_semantics() {
    // The special-cased box formula keeps A = 1/b regardless of how many
    // translates cover a point, and counts the covering with floor(1/a).
    // At integer 1/a the covering is flat, so its upper bound matches the
    // painless scan and its lower bound sits a factor floor(1/a) below.
    for (a, b) in [(1.0, 1.0), (0.5, 1.0), (0.25, 0.5), (0.2, 0.4)] {
        let painless = painless_bounds(&Window::Rect, a, b).unwrap();
        let special = rect_bounds(a, b).unwrap();
        let cover = (1.0 / a).round();
        assert!(close(special.lower, 1.0 / b, 1e-12), "A at ({a}, {b})");
        assert!(close(special.upper, painless.upper, 1e-9), "B at ({a}, {b})");
        assert!(close(painless.lower, cover / b, 1e-9), "flat count at ({a}, {b})");
    }
    // Off the integers the floor drops below the true sup covering count,
    // so the special upper bound is not an upper bracket there.
    let painless = painless_bounds(&Window::Rect, 0.6, 1.0).unwrap();
    let special = rect_bounds(0.6, 1.0).unwrap();
    assert!(close(special.upper, 1.0, 1e-12));
    assert!(close(painless.upper, 2.0, 1e-9));
}

#[test]
fn painless_and_fourier_side_agree_on_flat_box_lattices() {
    // For the box window both periodized sums are constant whenever 1/a is
    // an integer and b <= 1, so the two routes must coincide.
    for (a, b) in [(1.0, 1.0), (0.5, 1.0), (0.25, 0.5), (0.5, 0.5)] {
        let p = painless_bounds(&Window::Rect, a, b).unwrap();
        let f = fourier_side_bounds(&Window::Rect, a, b, 10_000).unwrap();
        assert!(close(p.lower, f.lower, 1e-3 * p.lower), "A at ({a}, {b})");
        assert!(close(p.upper, f.upper, 1e-3 * p.upper), "B at ({a}, {b})");
    }
}

#[test]
fn painless_and_fourier_side_are_compatible_for_splines() {
    // The two routes are different non-tight estimators for spline windows
    // (time side: sum of tri^2; transform side: sum of sinc^4), so equality
    // cannot hold; both must still bracket one spectrum.
    for (a, b) in [(1.0, 0.5), (0.5, 0.5)] {
        let p = painless_bounds(&Window::Bspline { p: 2 }, a, b).unwrap();
        let f = fourier_side_bounds(&Window::Bspline { p: 2 }, a, b, 10_000).unwrap();
        assert!(
            p.lower.max(f.lower) <= p.upper.min(f.upper) + 1e-9,
            "disjoint brackets at ({a}, {b}): [{}, {}] vs [{}, {}]",
            p.lower,
            p.upper,
            f.lower,
            f.upper
        );
    }
}

#[test]
fn spline_route_values_match_hand_computation() {
    // G(tri; 1, 1/2): time side gives (1, 2); transform side periodizes
    // sinc^4 over half-integer steps, which is identically 4/3.
    let p = painless_bounds(&Window::Bspline { p: 2 }, 1.0, 0.5).unwrap();
    assert!(close(p.lower, 1.0, 1e-6));
    assert!(close(p.upper, 2.0, 1e-6));
    let f = fourier_side_bounds(&Window::Bspline { p: 2 }, 1.0, 0.5, 10_000).unwrap();
    assert!(close(f.lower, 4.0 / 3.0, 1e-4), "lower = {}", f.lower);
    assert!(close(f.upper, 4.0 / 3.0, 1e-4), "upper = {}", f.upper);
}

#[test]
fn overlap_margins_match_between_certificate_routes() {
    // The certified interval from the column route must sit inside the
    // Paley-Wiener interval built from the crude sequence-level mu, for a
    // multi-column constant pattern where both apply.
    let base = FrameBounds::new(1.0, 1.0, Provenance::RectSpecial, false).unwrap();
    let mut pattern = JitterPattern::new(0.49).unwrap();
    let delta = 0.01;
    for k in -3..=3 {
        pattern.insert(0, k, delta).unwrap();
    }
    let cert = certify_compact_support(&Window::Rect, 1.0, 1.0, &base, &pattern).unwrap();
    let m = Window::Rect.shift_diff_norm(delta).unwrap();
    let mu = 2.0 * m * 7f64.sqrt();
    let pw = paley_wiener_certificate(&base, 0.0, mu).unwrap();
    assert!(cert.passed);
    assert!(pw.passed);
    let tight = cert.perturbed.unwrap();
    let loose = pw.perturbed.unwrap();
    assert!(tight.lower >= loose.lower - 1e-12);
    assert!(tight.upper <= loose.upper + 1e-12);
}

#[test]
fn marginal_maps_agree_with_direct_enumeration() {
    // Dyadic deltas keep the absolute sums exact in any summation order.
    let entries = vec![
        (0i64, 0i64, 0.125f64),
        (0, 1, -0.3125),
        (2, 0, 0.25),
        (2, 1, 0.0625),
        (-1, 0, -0.1875),
    ];
    let pattern = pattern_from(entries.clone());
    let marg = jitter_marginals(&pattern);
    let mut col_sup: BTreeMap<i64, f64> = BTreeMap::new();
    let mut row_sup: BTreeMap<i64, f64> = BTreeMap::new();
    let mut col_sum: BTreeMap<i64, f64> = BTreeMap::new();
    for (n, k, d) in entries {
        let e = col_sup.entry(k).or_insert(0.0);
        *e = e.max(d.abs());
        let e = row_sup.entry(n).or_insert(0.0);
        *e = e.max(d.abs());
        *col_sum.entry(k).or_insert(0.0) += d.abs();
    }
    assert_eq!(marg.per_column_sup, col_sup);
    assert_eq!(marg.per_row_sup, row_sup);
    assert_eq!(marg.per_column_abs_sum, col_sum);
}
