use killed_levy::bridge::bridge_density;
use killed_levy::exit::{exit_estimate, p_tilde, Domain};
use killed_levy::rng::path_rng;
use killed_levy::skeleton::{generate_skeleton, verify_skeleton, DyadicTime, EngineConfig};
use killed_levy::{LevyModel, LevyModelSpec, Payoff};
use proptest::prelude::*;

fn unit() -> LevyModelSpec {
    LevyModelSpec::cauchy(1.0).unwrap()
}

fn lower_barrier() -> impl Strategy<Value = f64> {
    prop_oneof![Just(f64::NEG_INFINITY), -10.0..-0.01f64]
}

proptest! {
    #[test]
    fn p_tilde_is_a_probability(b in 0.01..10.0f64, y in -20.0..20.0f64, t in 1e-8..1.0f64) {
        let d = Domain::upper(b).unwrap();
        let e = exit_estimate(&unit(), &d, 0.0, y, t).unwrap();
        prop_assert!((0.0..=1.0).contains(&e.p_tilde));
        prop_assert!(e.e_p >= 0.0);
        if y >= b {
            prop_assert_eq!(e.p_tilde, 1.0);
            prop_assert_eq!(e.e_p, 0.0);
        }
    }

    #[test]
    fn translation_is_bit_exact(
        a in lower_barrier(),
        b in 0.01..10.0f64,
        x in -5.0..5.0f64,
        y in -5.0..5.0f64,
        t in 1e-6..1.0f64,
    ) {
        prop_assume!(a < x && x < b);
        let m = unit();
        let d = Domain::new(a, b).unwrap();
        let shifted = Domain::new(a - x, b - x).unwrap();
        let direct = exit_estimate(&m, &d, x, y, t).unwrap();
        let moved = exit_estimate(&m, &shifted, 0.0, y - x, t).unwrap();
        prop_assert_eq!(direct.p_tilde.to_bits(), moved.p_tilde.to_bits());
        prop_assert_eq!(direct.e_p.to_bits(), moved.e_p.to_bits());
        prop_assert_eq!(direct.p_raw.to_bits(), moved.p_raw.to_bits());
    }

    #[test]
    fn upper_and_lower_barriers_mirror(b in 0.01..10.0f64, y in -10.0..10.0f64, t in 1e-6..1.0f64) {
        let m = unit();
        let up = exit_estimate(&m, &Domain::upper(b).unwrap(), 0.0, y, t).unwrap();
        let low = exit_estimate(&m, &Domain::new(-b, f64::INFINITY).unwrap(), 0.0, -y, t).unwrap();
        prop_assert_eq!(up.p_tilde, low.p_tilde);
        prop_assert_eq!(up.e_p, low.e_p);
    }

    #[test]
    fn two_barriers_exit_at_least_one(b in 0.05..5.0f64, a in -5.0..-0.05f64, y in -0.04..0.04f64, t in 1e-4..0.1f64) {
        let m = unit();
        let both = p_tilde(&m, &Domain::new(a, b).unwrap(), 0.0, y, t).unwrap();
        let up = p_tilde(&m, &Domain::upper(b).unwrap(), 0.0, y, t).unwrap();
        prop_assert!(both.p_raw >= up.p_raw);
    }

    #[test]
    fn convolution_scales_cubically(b in 0.01..100.0f64, r in -5.0..0.99f64) {
        let m = unit();
        let lhs = m.incomplete_convolution(b, r * b).unwrap();
        let rhs = m.incomplete_convolution(1.0, r).unwrap() / (b * b * b);
        prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn bridge_density_reflects(t in 1e-3..2.0f64, x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let m = unit();
        let l = bridge_density(&m, t, x, y).unwrap();
        let r = bridge_density(&m, t, y - x, y).unwrap();
        prop_assert!(((l - r) / l).abs() < 1e-14);
        prop_assert!(l > 0.0);
    }

    #[test]
    fn dyadic_order_matches_reals(n1 in 0u64..1 << 20, d1 in 0u32..20, n2 in 0u64..1 << 20, d2 in 0u32..20) {
        let (n1, n2) = (n1 % ((1 << d1) + 1), n2 % ((1 << d2) + 1));
        let (p, q) = (DyadicTime::new(n1, d1), DyadicTime::new(n2, d2));
        prop_assert_eq!(p.cmp(&q), p.as_f64().partial_cmp(&q.as_f64()).unwrap());
        if p < q {
            let m = DyadicTime::midpoint(p, q);
            prop_assert!(p < m && m < q);
            prop_assert_eq!(m.as_f64(), 0.5 * (p.as_f64() + q.as_f64()));
        }
    }

    #[test]
    fn payoffs_respect_their_sup(x in -50.0..50.0f64, k in 0.0..3.0f64, cap in 0.0..4.0f64) {
        let payoffs = [
            Payoff::Indicator,
            Payoff::Constant(-k),
            Payoff::Put { strike: k },
            Payoff::CappedCall { strike: k, cap },
            Payoff::CappedPolynomial { coeffs: vec![k, -1.0, 0.5], cap },
        ];
        for p in &payoffs {
            prop_assert!(p.eval(x).abs() <= p.sup_abs() * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_skeletons_verify(seed in any::<u64>(), b in 0.01..2.0f64, gamma in 0.005..0.5f64) {
        let cfg = EngineConfig::new(unit(), Domain::upper(b).unwrap(), gamma).unwrap();
        for k in 0..20 {
            let s = generate_skeleton(&cfg, &mut path_rng(seed, k)).unwrap();
            prop_assert_eq!(verify_skeleton(&s, &cfg), Ok(()));
        }
    }
}
