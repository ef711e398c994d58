#![allow(dead_code)]

use layercert_core::{Layer, ReluNetwork};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn appendix_net() -> ReluNetwork {
    ReluNetwork::new(
        2,
        vec![
            Layer::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap(),
            Layer::from_rows(&[vec![1.0, 1.0]], vec![-1.0]).unwrap(),
            Layer::from_rows(&[vec![1.0], vec![0.0]], vec![0.0, 10.0]).unwrap(),
        ],
    )
    .unwrap()
}

/// Gaussian weights scaled by 1/sqrt(fan_in), uniform biases in [-0.5, 0.5].
pub fn random_net(rng: &mut ChaCha8Rng, input_dim: usize, widths: &[usize], classes: usize) -> ReluNetwork {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(widths);
    dims.push(classes);
    let layers = dims
        .windows(2)
        .map(|w| {
            let scale = 1.0 / (w[0] as f64).sqrt();
            let weights: Vec<f64> = (0..w[0] * w[1]).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect();
            let bias: Vec<f64> = (0..w[1]).map(|_| rng.gen_range(-0.5..=0.5)).collect();
            Layer::from_flat(weights, w[1], w[0], bias)
        })
        .collect();
    ReluNetwork::new(input_dim, layers).unwrap()
}

pub fn random_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-scale..=scale)).collect()
}
