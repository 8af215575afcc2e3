use evsr_core::nn::{
    gradient_check, l1_loss_with_grad, mse_loss_with_grad, seeded_rng, uniform, LayerSpec, Network, NetworkSpec, Tensor,
};
use evsr_core::spatial::SpatialConfig;
use evsr_core::temporal::TemporalConfig;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random(shape: Vec<usize>, seed: u64) -> Tensor {
    let mut rng = seeded_rng(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect()).unwrap()
}

fn check(layers: Vec<LayerSpec>, in_channels: usize, input: Tensor) {
    let net = Network::new(NetworkSpec::new(layers.clone()), in_channels, 11).unwrap();
    let r = gradient_check(&net, &input, H, None, 3).unwrap();
    assert!(r.max_rel_error <= TOL, "{layers:?}: {r:?}");
    assert!(r.checked > 0 && r.kinks * 4 <= r.checked, "{layers:?}: {r:?}");
}

#[test]
fn conv3d_padded() {
    check(vec![LayerSpec::Conv3d { in_channels: 2, out_channels: 3, kernel: 3, padding: 1 }], 2, random(vec![2, 3, 4, 5], 1));
}

#[test]
fn conv3d_valid() {
    check(vec![LayerSpec::Conv3d { in_channels: 1, out_channels: 2, kernel: 3, padding: 0 }], 1, random(vec![1, 4, 5, 4], 2));
}

#[test]
fn dense() {
    check(vec![LayerSpec::Dense { inputs: 5, outputs: 3 }], 5, random(vec![4, 5], 3));
}

#[test]
fn relu_and_leaky_relu() {
    // The input stays well away from the kink relative to the step size.
    let mut x = random(vec![3, 6], 4);
    x.data_mut().iter_mut().for_each(|v| *v += 0.05 * v.signum());
    check(vec![LayerSpec::Dense { inputs: 6, outputs: 6 }, LayerSpec::Relu], 6, x.clone());
    check(vec![LayerSpec::Dense { inputs: 6, outputs: 6 }, LayerSpec::LeakyRelu(0.1)], 6, x);
}

#[test]
fn skip_add_and_concat() {
    let conv = |i, o| LayerSpec::Conv3d { in_channels: i, out_channels: o, kernel: 3, padding: 1 };
    check(vec![LayerSpec::SkipSave, conv(2, 2), LayerSpec::SkipAdd], 2, random(vec![2, 2, 3, 3], 5));
    check(vec![LayerSpec::SkipSave, conv(2, 3), LayerSpec::SkipConcat, conv(5, 1)], 2, random(vec![2, 2, 3, 3], 6));
}

#[test]
fn pool_and_upsample() {
    let conv = |i, o| LayerSpec::Conv3d { in_channels: i, out_channels: o, kernel: 3, padding: 1 };
    check(vec![conv(1, 2), LayerSpec::AvgPool2, conv(2, 1), LayerSpec::Upsample2], 1, random(vec![1, 2, 4, 6], 7));
}

#[test]
fn spatial_architecture_on_toy_grid() {
    let cfg = SpatialConfig::default();
    let net = Network::new(cfg.network_spec(), 1, 21).unwrap();
    let mut x = random(vec![1, 4, 8, 8], 8);
    x.data_mut().iter_mut().for_each(|v| *v = 0.5 + 0.25 * *v);
    let r = gradient_check(&net, &x, H, Some(48), 9).unwrap();
    assert!(r.max_rel_error <= TOL, "{r:?}");
    assert!(r.kinks * 4 <= r.checked, "{r:?}");
}

#[test]
fn temporal_architecture_with_depth_four() {
    let cfg = TemporalConfig::default();
    let net = Network::new(cfg.network_spec(4), 6, 22).unwrap();
    let x = random(vec![16, 6], 10).map(|v| 0.5 + 0.5 * v);
    let r = gradient_check(&net, &x, H, Some(48), 12).unwrap();
    assert!(r.max_rel_error <= TOL, "{r:?}");
    assert!(r.kinks * 4 <= r.checked, "{r:?}");
}

#[test]
fn loss_gradients() {
    let a = random(vec![3, 4], 13);
    let b = random(vec![3, 4], 14);
    let mask = Tensor::from_vec(vec![3, 4], (0..12).map(|i| (i % 3 != 0) as u8 as f64).collect()).unwrap();
    let (_, g_l1) = l1_loss_with_grad(&a, &b).unwrap();
    let (_, g_mse) = mse_loss_with_grad(&a, &b, Some(&mask)).unwrap();
    for i in 0..a.len() {
        let bump = |d: f64| {
            let mut p = a.clone();
            p.data_mut()[i] += d;
            p
        };
        let fd_l1 = (l1_loss_with_grad(&bump(H), &b).unwrap().0 - l1_loss_with_grad(&bump(-H), &b).unwrap().0) / (2.0 * H);
        let fd_mse = (mse_loss_with_grad(&bump(H), &b, Some(&mask)).unwrap().0
            - mse_loss_with_grad(&bump(-H), &b, Some(&mask)).unwrap().0)
            / (2.0 * H);
        assert!((fd_l1 - g_l1.data()[i]).abs() <= TOL * fd_l1.abs().max(1e-7), "l1 entry {i}");
        assert!((fd_mse - g_mse.data()[i]).abs() <= TOL * fd_mse.abs().max(1e-7) + 1e-12, "mse entry {i}");
    }
}
