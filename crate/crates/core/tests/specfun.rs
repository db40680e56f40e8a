use proptest::prelude::*;
use relay_aser::quad::{integrate_with_breaks, QuadControl};
use relay_aser::specfun::{
    bessel_k, erf, hyp1f1, hyp2f1, log_gamma, multinomial_omega, q_function, Fx, Real,
};

type Hp = Fx<4>;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

/// Coefficients of `(Σ_{q<c} y^q/q!)^b` by repeated multiplication.
fn omega_oracle(b: usize, c: usize) -> Vec<f64> {
    let base: Vec<f64> = (0..c).scan(1.0, |f, q| {
        if q > 0 {
            *f /= q as f64;
        }
        Some(*f)
    })
    .collect();
    let mut poly = vec![1.0];
    for _ in 0..b {
        let mut next = vec![0.0; poly.len() + c - 1];
        for (i, &p) in poly.iter().enumerate() {
            for (j, &t) in base.iter().enumerate() {
                next[i + j] += p * t;
            }
        }
        poly = next;
    }
    poly
}

#[test]
fn omega_matches_polynomial_expansion() {
    for c in 1..=5 {
        for b in 0..=5 {
            let poly = omega_oracle(b, c);
            for a in 0..poly.len() + 3 {
                let want = poly.get(a).copied().unwrap_or(0.0);
                let got = multinomial_omega(a, b, c);
                if want == 0.0 {
                    assert_eq!(got, 0.0, "Ω({a},{b},{c})");
                } else {
                    assert!(rel(got, want) < 1e-13, "Ω({a},{b},{c}) = {got}, expected {want}");
                }
            }
        }
    }
}

#[test]
fn omega_named_values() {
    assert_eq!(multinomial_omega(0, 3, 4), 1.0);
    assert_eq!(multinomial_omega(1, 5, 3), 5.0);
    assert_eq!(multinomial_omega(2, 2, 2), 1.0);
}

fn bessel_k_oracle(nu: f64, x: f64) -> f64 {
    // ∫₀^∞ e^{-x cosh t} cosh(νt) dt, truncated where the integrand is below e^{-750}.
    let t_max = (750.0 / x + 1.0).acosh() + 1.0;
    let f = |t: f64| (-x * t.cosh() + nu * t).exp() * (1.0 + (-2.0 * nu * t).exp()) / 2.0;
    let ctl = QuadControl { rel_tol: 1e-13, abs_tol: 0.0, max_evals: 200_000 };
    integrate_with_breaks(f, &[0.0, t_max / 8.0, t_max / 4.0, t_max / 2.0, t_max], &ctl).unwrap().value
}

#[test]
fn bessel_k_matches_integral_representation() {
    for nu in [0.0, 0.5, 1.0, 2.0, 5.0] {
        for i in 0..=40 {
            let x = 0.1 * (200f64).powf(i as f64 / 40.0);
            let want = bessel_k_oracle(nu, x);
            let got = bessel_k(nu, x).unwrap();
            assert!(rel(got, want) < 1e-9, "K_{nu}({x}) = {got}, expected {want}");
        }
    }
    let want = (std::f64::consts::PI / 4.0).sqrt() * (-2.0f64).exp();
    assert!(rel(bessel_k(0.5, 2.0).unwrap(), want) < 1e-14);
    assert!(rel(bessel_k(-1.7, 3.0).unwrap(), bessel_k(1.7, 3.0).unwrap()) < 1e-15);
    assert!(bessel_k(1.0, 0.0).is_err());
}

/// Gauss series summed in 256-bit arithmetic until terms fall below 2^-220.
fn hyp2f1_oracle(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let (a, b, c, z) = (Hp::from_f64(a), Hp::from_f64(b), Hp::from_f64(c), Hp::from_f64(z));
    let mut term = Hp::one();
    let mut sum = Hp::one();
    for k in 0..200_000u64 {
        let kk = Hp::from_u64(k);
        term = term * (a + kk) * (b + kk) * z / ((c + kk) * Hp::from_u64(k + 1));
        sum += term;
        if k > 10 && term.log2_abs() < sum.log2_abs() - 220.0 {
            break;
        }
    }
    sum.to_f64()
}

fn hyp1f1_oracle(a: f64, b: f64, x: f64) -> f64 {
    let (a, b, x) = (Hp::from_f64(a), Hp::from_f64(b), Hp::from_f64(x));
    let mut term = Hp::one();
    let mut sum = Hp::one();
    for k in 0..100_000u64 {
        let kk = Hp::from_u64(k);
        term = term * (a + kk) * x / ((b + kk) * Hp::from_u64(k + 1));
        sum += term;
        if k > 10 && term.log2_abs() < sum.log2_abs() - 220.0 {
            break;
        }
    }
    sum.to_f64()
}

#[test]
fn hyp2f1_matches_high_precision_series() {
    let params = [(2.5, 1.5, 3.0), (1.0, 1.0, 2.0), (0.5, 2.0, 1.5), (3.0, 0.5, 4.5), (4.5, 2.5, 6.0), (1.5, 0.5, 2.0)];
    for &(a, b, c) in &params {
        for i in 0..=37 {
            let z = -0.9 + 0.05 * i as f64;
            let want = hyp2f1_oracle(a, b, c, z);
            let got = hyp2f1(a, b, c, z).unwrap();
            assert!(rel(got, want) < 1e-8, "2F1({a},{b};{c};{z}) = {got}, expected {want}");
        }
    }
    assert!(rel(hyp2f1(1.0, 1.0, 2.0, 0.5).unwrap(), 2.0 * 2f64.ln()) < 1e-14);
    assert_eq!(hyp2f1(2.0, 3.0, 4.0, 0.0).unwrap(), 1.0);
}

#[test]
fn hyp2f1_continuous_at_transformation_boundary() {
    for &(a, b, c) in &[(2.5, 1.5, 3.0), (1.0, 0.5, 1.5), (3.0, 2.0, 4.5)] {
        let lo = hyp2f1(a, b, c, 0.5 - 1e-9).unwrap();
        let hi = hyp2f1(a, b, c, 0.5 + 1e-9).unwrap();
        assert!(rel(lo, hi) < 1e-8, "({a},{b},{c}): {lo} vs {hi}");
    }
}

#[test]
fn hyp1f1_matches_high_precision_series() {
    for i in 0..=60 {
        let x = -20.0 + i as f64;
        let want = hyp1f1_oracle(1.0, 1.5, x);
        let got = hyp1f1(1.0, 1.5, x).unwrap();
        assert!(rel(got, want) < 1e-8, "1F1(1,3/2,{x}) = {got}, expected {want}");
    }
    let x: f64 = 0.8;
    let closed = std::f64::consts::PI.sqrt() / (2.0 * x) * (x * x).exp() * erf(x);
    assert!(rel(hyp1f1(1.0, 1.5, x * x).unwrap(), closed) < 1e-13);
    assert_eq!(hyp1f1(1.0, 1.5, 0.0).unwrap(), 1.0);
}

#[test]
fn gamma_and_q_identities() {
    let mut fact = 1.0f64;
    for n in 0..=20u32 {
        if n > 0 {
            fact *= n as f64;
        }
        assert!(rel(log_gamma(n as f64 + 1.0).unwrap().exp(), fact) < 1e-12, "n = {n}");
    }
    for i in 0..=160 {
        let x = -8.0 + 0.1 * i as f64;
        assert!((q_function(x) + q_function(-x) - 1.0).abs() < 1e-12);
    }
    assert_eq!(q_function(0.0), 0.5);
    assert!(q_function(40.0) < 1e-300);
}

proptest! {
    #[test]
    fn bessel_k_recurrence(nu in 0.5f64..6.0, x in 0.1f64..25.0) {
        let (km, k0, kp) = (bessel_k(nu - 1.0, x).unwrap(), bessel_k(nu, x).unwrap(), bessel_k(nu + 1.0, x).unwrap());
        prop_assert!(rel(kp, km + 2.0 * nu / x * k0) < 1e-10);
    }

    #[test]
    fn bessel_k_positive_and_decreasing(nu in -6.0f64..6.0, x in 0.05f64..30.0) {
        let a = bessel_k(nu, x).unwrap();
        let b = bessel_k(nu, x * 1.01).unwrap();
        prop_assert!(a > 0.0 && b < a);
    }

    #[test]
    fn hyp2f1_symmetric_in_numerator_parameters(a in 0.1f64..5.0, b in 0.1f64..5.0, dc in 0.1f64..3.0, z in -0.95f64..0.95) {
        let c = a.max(b) + dc;
        let x = hyp2f1(a, b, c, z).unwrap();
        let y = hyp2f1(b, a, c, z).unwrap();
        prop_assert!(rel(x, y) < 1e-11, "{} vs {}", x, y);
    }

    #[test]
    fn hyp2f1_euler_transformation(a in 0.1f64..4.0, b in 0.1f64..4.0, dc in 0.1f64..3.0, z in -0.9f64..0.9) {
        // 2F1(a,b;c;z) = (1-z)^{c-a-b} 2F1(c-a,c-b;c;z)
        let c = a.max(b) + dc;
        let lhs = hyp2f1(a, b, c, z).unwrap();
        let rhs = (1.0 - z).powf(c - a - b) * hyp2f1(c - a, c - b, c, z).unwrap();
        prop_assert!(rel(lhs, rhs) < 1e-9, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn omega_row_sums(b in 0usize..7, c in 1usize..6) {
        // Σ_a Ω_{a,b,c} is the generating polynomial at y = 1.
        let total: f64 = (0..=b * (c - 1)).map(|a| multinomial_omega(a, b, c)).sum();
        let e: f64 = (0..c).map(|q| 1.0 / (1..=q).product::<usize>() as f64).sum();
        prop_assert!(rel(total, e.powi(b as i32)) < 1e-12);
    }

    #[test]
    fn q_function_monotone(x in -30.0f64..30.0, dx in 1e-3f64..1.0) {
        // Below about -5 the step is smaller than the spacing of doubles near 1.
        if x > -5.0 {
            prop_assert!(q_function(x + dx) < q_function(x));
        } else {
            prop_assert!(q_function(x + dx) <= q_function(x));
        }
    }
}
