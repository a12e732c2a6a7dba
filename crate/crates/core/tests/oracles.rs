//! Closed-form quantities checked against exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ratio_cert::bounds::{liu_lower, LIU_CONSTANT};
use ratio_cert::continuity::{metric_eigenvalues, sandwich_square_kappa, sandwich_t_star, t_star};
use ratio_cert::moduli::degenerate_ratio_bound;

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn seven_thirds() -> BigRational {
    frac(7, 3)
}

/// Root of an increasing `f` on `[lo, hi]` with `f(lo) ≤ 0 ≤ f(hi)`, to a
/// relative width of 2⁻⁶⁰ of the starting bracket.
fn bisect(f: impl Fn(&BigRational) -> BigRational, mut lo: BigRational, mut hi: BigRational) -> BigRational {
    let two = frac(2, 1);
    for _ in 0..60 {
        let mid = (&lo + &hi) / &two;
        if f(&mid).is_positive() {
            hi = mid;
        } else {
            lo = mid;
        }
        // keep the numbers small: snap to a dyadic grid of 2⁻¹²⁰
        let scale = BigRational::from_integer(BigInt::one() << 120);
        lo = (&lo * &scale).floor() / &scale;
        hi = (&hi * &scale).ceil() / &scale;
    }
    (lo + hi) / two
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Root of `(1+ξ) t (2q + t) = 23 q² (7/3 − ξ)`, the published quadratic
/// after `√(4q(q+t) + t²) = 2q + t`.
fn published_root(xi: f64, q: f64) -> BigRational {
    let (x, q) = (rat(xi), rat(q));
    let rhs = frac(23, 1) * &q * &q * (seven_thirds() - &x);
    let g = |t: &BigRational| (BigRational::one() + &x) * t * (frac(2, 1) * &q + t) - &rhs;
    bisect(g, BigRational::zero(), frac(10, 1) * &q)
}

fn sqrt_half() -> BigRational {
    bisect(|x| x * x - frac(1, 2), frac(1, 2), BigRational::one())
}

#[test]
fn published_step_matches_rational_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = sqrt_half();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let xi: f64 = rng.gen_range(1.0..7.0 / 3.0 - 1e-6);
        let q: f64 = rng.gen_range(0.05..0.87);
        let safety: f64 = rng.gen_range(0.5..1.0);
        let step = t_star(xi, q, safety).unwrap();
        let root = published_root(xi, q);
        let oracle = (&root * &s * rat(safety)).to_f64().unwrap();
        worst = worst.max(rel(step.t_root, root.to_f64().unwrap())).max(rel(step.t_star, oracle));
    }
    assert!(worst <= 1e-12, "worst relative error {worst:e}");
}

#[test]
fn published_step_spec_example() {
    let root = published_root(2.0, 0.5).to_f64().unwrap();
    assert!((root - 0.44280904158206337).abs() < 1e-15);
    assert!((t_star(2.0, 0.5, 1.0).unwrap().t_root - root).abs() < 1e-15);
}

/// `ξ_h κ(q, t) = 7/3` solved for `t` in exact arithmetic, with
/// `κ = ρ²`, `ρ + 1/ρ = 2 + e` and `e = max(τ², 2τ²/(1+τ))`, `τ = t/q`.
/// Written as `(ρ − 1)²/ρ = e` with `ρ = √(7/(3ξ))` this is a condition on
/// `e` alone: `e(t) = m` with `m = (√R − 1)²/√R`, `R = 7/(3ξ)`.
#[test]
fn sandwich_step_matches_rational_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        let xi: f64 = rng.gen_range(1.0..7.0 / 3.0 - 1e-5);
        let q: f64 = rng.gen_range(0.05..0.87);
        let r2 = seven_thirds() / rat(xi);
        let rho = bisect(|x| x * x - &r2, BigRational::one(), frac(3, 1));
        let m = (&rho - BigRational::one()) * (&rho - BigRational::one()) / &rho;
        let qr = rat(q);
        let excess = |t: &BigRational| {
            let tau = t / &qr;
            let bottom = &tau * &tau;
            let top = frac(2, 1) * &tau * &tau / (BigRational::one() + &tau);
            if bottom > top {
                bottom
            } else {
                top
            }
        };
        let root = bisect(|t| excess(t) - &m, BigRational::zero(), qr.clone()).to_f64().unwrap();
        let step = sandwich_t_star(xi, q, 1.0).unwrap();
        // the implementation keeps a relative slack of 1e-9 below the root
        assert!(step.t_root < root, "{xi} {q}: {} vs {root}", step.t_root);
        assert!(rel(step.t_root, root) < 1.1e-9, "{xi} {q}: {} vs {root}", step.t_root);
        assert!(xi * sandwich_square_kappa(q, step.t_root) <= 7.0 / 3.0);
    }
}

#[test]
fn metric_eigenvalues_match_rational_invariants() {
    // B = A⁻¹A⁻ᵀ with A = [[1, α], [0, β]]: tr B = 1 + (α² + 1)/β², det B = 1/β²
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let q: f64 = rng.gen_range(0.1..0.9);
        let dx: f64 = rng.gen_range(-0.05..0.05);
        let dy: f64 = rng.gen_range(0.0..0.05);
        let (lo, hi) = metric_eigenvalues(q, dx, dy);
        let alpha = rat(dx) / rat(q);
        let beta = BigRational::one() + rat(dy) / rat(q);
        let b2 = &beta * &beta;
        let trace = (BigRational::one() + (&alpha * &alpha + BigRational::one()) / &b2).to_f64().unwrap();
        let det = (BigRational::one() / &b2).to_f64().unwrap();
        assert!(rel(lo + hi, trace) < 1e-13);
        assert!(rel(lo * hi, det) < 1e-12);
        assert!(lo <= hi && lo > 0.0);
    }
}

#[test]
fn degenerate_bound_matches_rational_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let q: f64 = rng.gen_range(1e-4..0.5);
        let four_q2 = frac(4, 1) * rat(q) * rat(q);
        let cbrt = bisect(|x| x * x * x - &four_q2, BigRational::zero(), BigRational::one());
        let s = BigRational::one() + cbrt;
        let qp1 = BigRational::one() + rat(q);
        let oracle = (&s * &s * &s / (&qp1 * &qp1)).to_f64().unwrap();
        assert!(rel(degenerate_ratio_bound(q).unwrap(), oracle) < 1e-14);
    }
}

#[test]
fn liu_bound_matches_rational_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let c = frac(1893, 10000);
    assert_eq!(rat(LIU_CONSTANT).to_f64(), Some(0.1893));
    for _ in 0..300 {
        let lam: f64 = rng.gen_range(10.0..500.0);
        let h: f64 = rng.gen_range(1e-3..0.1);
        let (l, hr) = (rat(lam), rat(h));
        let oracle = (&l / (BigRational::one() + &c * &c * &hr * &hr * &l)).to_f64().unwrap();
        assert!(rel(liu_lower(lam, h, 0.0).unwrap(), oracle) < 1e-14);
        assert!((liu_lower(lam, h, 1e-9).unwrap() - (oracle - 1e-9)).abs() < 1e-12 * oracle);
    }
}
