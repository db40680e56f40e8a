use proptest::prelude::*;
use relay_aser::constellation::{
    detect, exact_sep, generate, sep_conditional, sep_derivative, sep_params, stats, Constellation, Scheme,
};

fn catalogue() -> &'static [Constellation] {
    static CAT: std::sync::OnceLock<Vec<Constellation>> = std::sync::OnceLock::new();
    CAT.get_or_init(build_catalogue)
}

fn build_catalogue() -> Vec<Constellation> {
    let mut v: Vec<Constellation> = [4, 8, 16, 32, 64].iter().map(|&m| generate(Scheme::Hqam, m, None).unwrap()).collect();
    v.extend([4, 16, 64].iter().map(|&m| generate(Scheme::Sqam, m, None).unwrap()));
    v.push(Constellation::rqam(4, 2, 1.0).unwrap());
    v.push(Constellation::rqam(8, 4, 1.0).unwrap());
    v.push(Constellation::rqam(4, 4, 0.7).unwrap());
    v.push(generate(Scheme::Xqam32, 32, None).unwrap());
    v
}

#[test]
fn unit_average_energy() {
    for c in catalogue().iter() {
        let e = c.points.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() / c.points.len() as f64;
        assert!((e - 1.0).abs() < 1e-12, "{} {}: {e}", c.scheme, c.points.len());
        assert!((stats(c).avg_energy - 1.0).abs() < 1e-12);
    }
}

#[test]
fn derivative_matches_central_differences() {
    for c in catalogue().iter() {
        let p = sep_params(c);
        for i in 0..60 {
            let l = 10f64.powf(-0.5 + 3.5 * i as f64 / 59.0);
            let h = 1e-5 * l;
            let fd = (sep_conditional(&p, l + h) - sep_conditional(&p, l - h)) / (2.0 * h);
            let d = sep_derivative(&p, l).unwrap();
            assert!(((d - fd) / fd).abs() < 1e-4, "{} {} at λ = {l}: {d} vs {fd}", c.scheme, c.points.len());
        }
    }
}

#[test]
fn rectangular_formula_is_exact() {
    for c in catalogue().iter().filter(|c| c.rect.is_some()) {
        let p = sep_params(c);
        for l in [0.5, 3.0, 10.0, 40.0] {
            let (a, b) = (sep_conditional(&p, l), exact_sep(c, l));
            assert!(((a - b) / b).abs() < 1e-9, "{}x{} at {l}: {a} vs {b}", c.rect.unwrap().mi, c.rect.unwrap().mq);
        }
    }
}

#[test]
fn cross_formula_is_exact() {
    let c = generate(Scheme::Xqam32, 32, None).unwrap();
    let p = sep_params(&c);
    for l in [1.0, 10.0, 30.0, 100.0] {
        let (a, b) = (sep_conditional(&p, l), exact_sep(&c, l));
        assert!(((a - b) / b).abs() < 1e-9, "λ = {l}: {a} vs {b}");
    }
}

#[test]
fn qpsk_closed_form() {
    let c = generate(Scheme::Sqam, 4, None).unwrap();
    let p = sep_params(&c);
    for l in [0.3f64, 4.0, 20.0] {
        let q = relay_aser::specfun::q_function(l.sqrt());
        let want = 2.0 * q - q * q;
        assert!(((sep_conditional(&p, l) - want) / want).abs() < 1e-13);
    }
}

proptest! {
    #[test]
    fn sep_is_a_decreasing_probability(idx in 0usize..12, l in 0.0f64..200.0, dl in 0.01f64..5.0) {
        let c = &catalogue()[idx];
        let p = sep_params(c);
        let (a, b) = (sep_conditional(&p, l), sep_conditional(&p, l + dl));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
        prop_assert!(sep_derivative(&p, l + dl).unwrap() <= 0.0);
    }

    #[test]
    fn small_perturbations_decode_correctly(idx in 0usize..12, k in 0usize..64, r in 0.0f64..0.499, th in 0.0f64..std::f64::consts::TAU) {
        let c = &catalogue()[idx];
        let k = k % c.points.len();
        let d = stats(c).d_min * r;
        let x = [c.points[k][0] + d * th.cos(), c.points[k][1] + d * th.sin()];
        prop_assert_eq!(detect(x, c), k);
    }
}
