use deep_hgp::analysis::{fit_rate, kl_v_from_moments, renyi_gaussian_1d};
use deep_hgp::inference::tempered_loglik;
use deep_hgp::priors::{clip_psi, horseshoe_density, horseshoe_density_bounds, horseshoe_sample};
use deep_hgp::RngStream;
use proptest::prelude::*;

fn gaussian_kl(m1: f64, s1_sq: f64, m2: f64, s2_sq: f64) -> f64 {
    0.5 * (s2_sq / s1_sq).ln() + (s1_sq + (m1 - m2).powi(2)) / (2.0 * s2_sq) - 0.5
}

proptest! {
    #[test]
    fn horseshoe_density_inside_envelope(lt in -3.0f64..2.0, ltau in -3.0f64..1.0) {
        let (t, tau) = (10f64.powf(lt), 10f64.powf(ltau));
        let p = horseshoe_density(t, tau).unwrap();
        let (lo, hi) = horseshoe_density_bounds(t, tau);
        prop_assert!(lo < p * (1.0 + 1e-12) && p < hi * (1.0 + 1e-12), "t={t} tau={tau}: {lo} {p} {hi}");
    }

    #[test]
    fn horseshoe_draws_positive(seed in any::<u64>(), tau in 1e-3f64..10.0) {
        let mut rng = RngStream::new(seed, 0).rng();
        for _ in 0..20 {
            let a = horseshoe_sample(tau, &mut rng);
            prop_assert!(a >= 0.0 && a.is_finite());
        }
    }

    #[test]
    fn clip_is_monotone_projection(x in -1e6f64..1e6, y in -1e6f64..1e6) {
        let c = clip_psi(x);
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert_eq!(clip_psi(c), c);
        if x <= y {
            prop_assert!(c <= clip_psi(y));
        }
        if x.abs() <= 1.0 {
            prop_assert_eq!(c, x);
        }
    }

    #[test]
    fn kl_nonnegative_and_increasing_in_gap(m2 in 0.0f64..4.0, dm in 0.0f64..4.0, s2 in 0.05f64..3.0, s02 in 0.05f64..3.0) {
        let (kl, v) = kl_v_from_moments(m2, 0.0, s2, s02).unwrap();
        let (kl2, _) = kl_v_from_moments(m2 + dm, 0.0, s2, s02).unwrap();
        prop_assert!(kl >= -1e-15 && v >= 0.0);
        prop_assert!(kl2 >= kl);
        let (k0, v0) = kl_v_from_moments(0.0, 0.0, s02, s02).unwrap();
        prop_assert!(k0.abs() < 1e-15 && v0.abs() < 1e-15);
    }

    #[test]
    fn renyi_nondecreasing_in_order_below_kl(
        m1 in -2.0f64..2.0, m2 in -2.0f64..2.0, s1 in 0.1f64..3.0, s2 in 0.1f64..3.0, b1 in 0.01f64..0.98, db in 0.0f64..1.0,
    ) {
        let b2 = b1 + (0.99 - b1) * db;
        let r1 = renyi_gaussian_1d(m1, s1, m2, s2, b1).unwrap();
        let r2 = renyi_gaussian_1d(m1, s1, m2, s2, b2).unwrap();
        let kl = gaussian_kl(m1, s1, m2, s2);
        prop_assert!(r1 >= -1e-12);
        prop_assert!(r1 <= r2 + 1e-12);
        prop_assert!(r2 <= kl + 1e-12);
    }

    #[test]
    fn exact_power_law_recovered(slope in -2.0f64..0.0, c in 1e-4f64..10.0, n0 in 10.0f64..200.0, k in 3usize..7) {
        let ns: Vec<f64> = (0..k).map(|i| n0 * 2f64.powi(i as i32)).collect();
        let losses: Vec<f64> = ns.iter().map(|n| c * n.powf(slope)).collect();
        let fit = fit_rate(&ns, &losses).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-8);
        prop_assert!(fit.r2 > 1.0 - 1e-9);
    }

    #[test]
    fn tempering_scales_loglik(rho in 0.01f64..1.0, s2 in 0.01f64..4.0, f in prop::collection::vec(-2.0f64..2.0, 1..30)) {
        let y: Vec<f64> = f.iter().enumerate().map(|(i, v)| v + 0.1 * (i as f64).sin()).collect();
        let full = tempered_loglik(&f, &y, s2, 1.0).unwrap();
        let part = tempered_loglik(&f, &y, s2, rho).unwrap();
        prop_assert!((part - rho * full).abs() <= 1e-12 * full.abs().max(1.0));
    }
}
