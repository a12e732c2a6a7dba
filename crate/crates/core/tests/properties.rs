use proptest::prelude::*;

use ratio_cert::bounds::liu_lower;
use ratio_cert::certificate::{parse_line, to_line, CertificateRecord, Line, RecordStatus};
use ratio_cert::continuity::{
    metric_eigenvalues, ratio_deviation_bound, sandwich_kappa, sandwich_square_kappa, sandwich_t_star, t_star,
    ShearStep,
};
use ratio_cert::moduli::{degenerate_ratio_bound, in_region, reentry_p, ModuliPoint, RegionSpec};
use ratio_cert::sweep::verify_coverage;

const TARGET: f64 = 7.0 / 3.0;

fn xi_below() -> impl Strategy<Value = f64> {
    1.0..(TARGET - 1e-6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn published_step_closes_the_gap(xi in xi_below(), q in 0.05..0.9f64) {
        let s = t_star(xi, q, 1.0).unwrap();
        let reached = xi + ratio_deviation_bound(xi, q, s.t_root);
        prop_assert!((reached - TARGET).abs() <= 1e-12 * TARGET);
        prop_assert!(s.t_star < s.t_root);
    }

    #[test]
    fn steps_shrink_as_the_bound_grows(a in xi_below(), b in xi_below(), q in 0.05..0.9f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(t_star(hi, q, 0.9).unwrap().t_star <= t_star(lo, q, 0.9).unwrap().t_star);
        prop_assert!(sandwich_t_star(hi, q, 0.9).unwrap().t_star <= sandwich_t_star(lo, q, 0.9).unwrap().t_star);
    }

    #[test]
    fn steps_grow_with_safety(xi in xi_below(), q in 0.05..0.9f64, s1 in 0.1..1.0f64, s2 in 0.1..1.0f64) {
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(t_star(xi, q, lo).unwrap().t_star <= t_star(xi, q, hi).unwrap().t_star);
        prop_assert!(sandwich_t_star(xi, q, lo).unwrap().t_star <= sandwich_t_star(xi, q, hi).unwrap().t_star);
    }

    #[test]
    fn certified_square_stays_below_the_target(
        xi in xi_below(), q in 0.05..0.9f64, u in 0.0..1.0f64, v in 0.0..1.0f64,
    ) {
        let s = sandwich_t_star(xi, q, 0.9).unwrap();
        let (dx, dy) = (u * s.t_star, v * s.t_star);
        prop_assert!(xi * sandwich_kappa(q, dx, dy) < TARGET);
        prop_assert!(sandwich_kappa(q, dx, dy) <= sandwich_square_kappa(q, s.t_star) * (1.0 + 1e-14));
    }

    #[test]
    fn metric_eigenvalues_are_ordered_and_gap_agrees(
        q in 0.05..0.9f64, t in 0.0..0.05f64, theta in 0.0..std::f64::consts::PI,
    ) {
        let (a, b) = (theta.cos(), theta.sin());
        let (lo, hi) = metric_eigenvalues(q, t * a, t * b);
        prop_assert!(0.0 < lo && lo <= hi * (1.0 + 1e-15));
        let step = ShearStep::new(q, t, a, b).unwrap();
        let gap = ratio_cert::continuity::metric_gap(&step);
        prop_assert!((hi - lo - gap).abs() <= 1e-12 * (1.0 + gap));
    }

    #[test]
    fn liu_bound_lies_below_the_discrete_value(lam in 1.0..1e4f64, h in 1e-4..0.5f64) {
        let low = liu_lower(lam, h, 0.0).unwrap();
        prop_assert!(low <= lam && low > 0.0);
        prop_assert!(liu_lower(lam, h / 2.0, 0.0).unwrap() >= low);
    }

    #[test]
    fn degenerate_bound_is_below_target_for_thin_triangles(q in 1e-6..=0.156f64) {
        prop_assert!(degenerate_ratio_bound(q).unwrap() < TARGET);
    }

    #[test]
    fn re_entry_lands_on_the_circle(phi in -1.0..1.0f64) {
        let spec = RegionSpec::<f64>::default();
        let q = spec.excision_center[1] + phi * spec.excision_radius;
        let p = reentry_p(q, &spec).unwrap();
        let pt = ModuliPoint::new(p, q);
        prop_assert!(spec.excision_distance(pt) <= spec.excision_radius);
        prop_assert!(!in_region(pt, &spec));
        let next = ModuliPoint::new(p + 1e-9, q);
        prop_assert!(spec.excision_distance(next) > spec.excision_radius);
    }

    #[test]
    fn records_round_trip(
        p in -1e3..1e3f64, q in proptest::num::f64::NORMAL, t in proptest::num::f64::POSITIVE,
        row_min in proptest::option::of(proptest::num::f64::NORMAL), i in 0u32..10_000, j in 0u32..10_000,
        dofs in 0usize..10_000_000,
    ) {
        let rec = CertificateRecord {
            i, j, p, q, levels: 6, h: 1.0 / 64.0, dofs_cr: dofs, dofs_p1: dofs / 3,
            lam1_h: q, lam1_h_floor: p, lam1_low: t, lam1_up: t * 1.5, lam2_h: -q, lam2_low: 0.0,
            rayleigh_sum: f64::MIN_POSITIVE, lam2_up: f64::MAX, xi_h: 7.0 / 3.0 - f64::EPSILON, xi_low: 1.0,
            orthonormality_defect: 1e-300, t_root: t, t_star: t * 0.9, t_row_min: row_min,
            eps: 1e-9, safety: 0.9, status: RecordStatus::Certified, row_end: i % 2 == 0,
        };
        let line = Line::Point(rec);
        prop_assert_eq!(parse_line(&to_line(&line)).unwrap(), line);
    }

    #[test]
    fn tilings_cover_and_any_removal_is_found(
        side in 0.004..0.03f64, drop in 0usize..10_000, jitter in 0.0..0.9f64,
    ) {
        let spec = RegionSpec { q_min: 0.3, q_max: 0.36, p_min: 0.5, p_max: 0.56, ..RegionSpec::default() };
        let mut recs = Vec::new();
        let (mut q, mut j) = (spec.q_min - 1e-9, 0);
        while q <= spec.q_max {
            let (mut p, mut i) = (spec.p_min - 1e-9, 0);
            // steps vary along the row, the row advances by their minimum
            let steps: Vec<f64> = (0..1000).map(|k| side * (1.0 + jitter * ((k * 7 + j * 3) % 5) as f64 / 5.0)).collect();
            let t_min = side;
            loop {
                recs.push(record(i, j, p, q, steps[i as usize], t_min));
                p += steps[i as usize];
                i += 1;
                if p > spec.p_max { break; }
            }
            q += t_min;
            j += 1;
        }
        prop_assert!(verify_coverage(&recs, &spec).unwrap().covered);
        let gone = recs.remove(drop % recs.len());
        let report = verify_coverage(&recs, &spec).unwrap();
        prop_assert!(!report.covered);
        let w = report.gap_witness.unwrap();
        prop_assert!(in_region(w, &spec));
        prop_assert!(w.p >= gone.p && w.p <= gone.p + gone.t_star);
        prop_assert!(w.q >= gone.q && w.q <= gone.q + gone.t_row_min.unwrap());
    }
}

fn record(i: u32, j: u32, p: f64, q: f64, t_star: f64, t_row_min: f64) -> CertificateRecord {
    CertificateRecord {
        i,
        j,
        p,
        q,
        levels: 6,
        h: 0.0,
        dofs_cr: 0,
        dofs_p1: 0,
        lam1_h: 0.0,
        lam1_h_floor: 0.0,
        lam1_low: 0.0,
        lam1_up: 0.0,
        lam2_h: 0.0,
        lam2_low: 0.0,
        rayleigh_sum: 0.0,
        lam2_up: 0.0,
        xi_h: 2.0,
        xi_low: 2.0,
        orthonormality_defect: 0.0,
        t_root: t_star,
        t_star,
        t_row_min: Some(t_row_min),
        eps: 0.0,
        safety: 1.0,
        status: RecordStatus::Certified,
        row_end: false,
    }
}
