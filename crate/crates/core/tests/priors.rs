use deep_hgp::kernels::DesignPoints;
use deep_hgp::priors::*;
use deep_hgp::RngStream;

#[test]
fn inactive_directions_are_frozen_in_distribution() {
    let (n, beta, d) = (100, 2.0, 3);
    let active = [0usize];
    let a = freeze_scales(n, beta, &active, d).unwrap();
    let prior = LengthscalePrior::Deterministic { values: a.as_slice().to_vec() };
    let x = [0.3, -1.0, -1.0];
    let x2 = [0.3, 1.0, 1.0];
    let draws = 10_000;
    let diffs: Vec<f64> = (0..draws)
        .map(|i| {
            let (_, p) = hgp_prior_draw(&prior, d, 256, RngStream::new(60, i)).unwrap();
            clip_psi(p.eval(&x).unwrap()) - clip_psi(p.eval(&x2).unwrap())
        })
        .collect();
    let mean = diffs.iter().sum::<f64>() / draws as f64;
    let var = diffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let bound = 8.0 * (d - active.len()) as f64 / n as f64;
    assert!(var <= bound, "{var} > {bound}");
}

#[test]
fn deep_draws_stay_in_range_on_grid() {
    let arch = DeepArchitecture::new(vec![3, 2, 2, 1], vec![2.0, 2.0, 2.0]).unwrap();
    let draw = deep_prior_draw(&arch, 64, RngStream::new(61, 0)).unwrap();
    for x in DesignPoints::<f64>::grid(10, 3).iter() {
        for layer in draw.layer_outputs(x).unwrap() {
            assert!(layer.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
