use deep_hgp::truth::*;
use deep_hgp::RngStream;
use rand::Rng;

fn cases() -> Vec<(usize, f64, usize)> {
    // (d, beta, n) chosen so every grid stays small
    vec![(1, 1.0, 1000), (1, 2.0, 1000), (2, 1.0, 1000), (2, 2.0, 1000)]
}

fn bumps(d: usize, beta: f64, n: usize) -> Vec<BumpFunction> {
    let kernel = BumpKernel::calibrated(beta).unwrap();
    let amp = bump_amplitude(1.0, d, &kernel).unwrap();
    build_bump_hypotheses(n, beta, d, amp, 6, RngStream::new(40, d as u64))
        .unwrap()
        .into_iter()
        .map(|t| match t {
            TruthFunction::Bump(b) => b,
            _ => unreachable!(),
        })
        .collect()
}

#[test]
fn hypotheses_lie_in_holder_ball() {
    for (d, beta, n) in cases() {
        for b in bumps(d, beta, n) {
            let grid = if d == 1 { 2001 } else { 121 };
            let norm = holder_norm_estimate(|x| b.eval(x), beta, d, grid).unwrap();
            assert!(norm <= 1.0, "d={d} beta={beta}: {norm}");
        }
    }
}

#[test]
fn hypotheses_are_separated_in_hamming_distance() {
    for (d, beta, n) in cases() {
        let hs = bumps(d, beta, n);
        assert!(hs[0].omega.iter().all(|w| !w));
        let min = vg_min_distance(hs[0].cells());
        for i in 0..hs.len() {
            for j in (i + 1)..hs.len() {
                assert!(hamming(&hs[i].omega, &hs[j].omega) >= min);
            }
        }
    }
}

#[test]
fn bump_supports_are_disjoint() {
    for (d, beta, n) in cases() {
        let b = &bumps(d, beta, n)[1];
        let per = if d == 1 { 4001 } else { 161 };
        for x in deep_hgp::kernels::DesignPoints::<f64>::grid(per, d).iter() {
            let live = (0..b.cells()).filter(|&k| b.phi(k, x) != 0.0).count();
            assert!(live <= 1);
        }
    }
}

#[test]
fn bump_peak_value() {
    for (d, beta, n) in cases() {
        let b = &bumps(d, beta, n)[1];
        let k = b.omega.iter().position(|&w| w).unwrap();
        let peak = b.amplitude * b.h().powf(beta) * b.kernel.sup().powi(d as i32);
        assert!((b.eval(&b.center(k)) - peak).abs() <= 1e-15 * peak);
        let grid = deep_hgp::kernels::DesignPoints::<f64>::grid(if d == 1 { 1001 } else { 101 }, d);
        assert!(grid.iter().all(|x| b.eval(x).abs() <= peak * (1.0 + 1e-12)));
    }
}

#[test]
fn hypotheses_are_separated_in_l2() {
    for (d, beta, n) in cases() {
        let hs = bumps(d, beta, n);
        let (a, b) = (&hs[1], &hs[2]);
        let h = a.h();
        let k2 = a.kernel.l2_norm_sq().unwrap();
        let cell_mass = (a.amplitude * h.powf(beta)).powi(2) * (h * k2).powi(d as i32) / 2f64.powi(d as i32);
        let exact = hamming(&a.omega, &b.omega) as f64 * cell_mass;
        let bound = vg_min_distance(a.cells()) as f64 * cell_mass;
        assert!(exact >= bound);
        let mut rng = RngStream::new(41, 0).rng();
        let draws: Vec<f64> = (0..200_000)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
                (a.eval(&x) - b.eval(&x)).powi(2)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64).sqrt();
        let se = sd / (draws.len() as f64).sqrt();
        assert!((mean - exact).abs() <= 4.0 * se, "d={d} beta={beta}: {mean} vs {exact}");
        assert!(mean + 4.0 * se >= bound);
    }
}

#[test]
fn capacity_guard() {
    let r = build_bump_hypotheses(10_000_000, 1.0, 2, 1.0, 4, RngStream::new(1, 0));
    assert!(matches!(r, Err(deep_hgp::Error::CapacityExceeded { .. })));
    // 4 cells admit at most a handful of codewords at distance ≥ 1
    let r = build_bump_hypotheses(1, 1.0, 1, 1.0, 64, RngStream::new(1, 0));
    assert!(matches!(r, Err(deep_hgp::Error::CapacityExceeded { .. })));
}

#[test]
fn varselect_constant_in_inactive_coordinates() {
    let f = cos_varselect(4, vec![1, 3], 1.0, 0.2, 0.9, 2.0).unwrap();
    let mut rng = RngStream::new(42, 0).rng();
    for _ in 0..200 {
        let mut x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let v = eval_truth(&f, &x).unwrap();
        x[0] = rng.random_range(-1.0..=1.0);
        x[2] = rng.random_range(-1.0..=1.0);
        assert_eq!(eval_truth(&f, &x).unwrap(), v);
        assert!(v.abs() <= 1.0);
    }
}

#[test]
fn target_rate_properties() {
    let s = StructureSpec::new(vec![3, 2, 1], vec![2, 2], vec![1.5, 0.7]).unwrap();
    let mut prev = f64::INFINITY;
    for n in [10, 100, 1000, 10_000] {
        let r = target_rate(&s, n);
        assert!(r <= prev);
        prev = r;
    }
    let a = StructureSpec::new(vec![2, 2, 2, 1], vec![1, 2, 2], vec![2.0, 1.0, 1.0]).unwrap();
    let b = StructureSpec::new(vec![2, 2, 2, 1], vec![2, 1, 2], vec![1.0, 2.0, 1.0]).unwrap();
    assert!((target_rate(&a, 500) - target_rate(&b, 500)).abs() < 1e-15);
}
