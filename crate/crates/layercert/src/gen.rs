//! Seeded random networks and inputs.

use layercert_core::{Layer, ReluNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArchError {
    #[error("malformed architecture {0:?}; expected e.g. 2x[10] or [10,5]")]
    Malformed(String),
    #[error("architecture {0:?} has no hidden layer or a zero-width layer")]
    Empty(String),
}

/// Parses `KxN`, `Kx[N]` (K layers of N neurons) or `[a,b,...]`.
pub fn parse_arch(s: &str) -> Result<Vec<usize>, ArchError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || ArchError::Malformed(s.to_string());
    let widths: Vec<usize> = if let Some((k, n)) = t.split_once('x') {
        let k: usize = k.parse().map_err(|_| bad())?;
        let n = n.strip_prefix('[').and_then(|n| n.strip_suffix(']')).unwrap_or(n);
        let n: usize = n.parse().map_err(|_| bad())?;
        vec![n; k]
    } else {
        let inner = t.strip_prefix('[').and_then(|n| n.strip_suffix(']')).unwrap_or(&t);
        inner.split(',').map(|w| w.parse::<usize>().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if widths.is_empty() || widths.contains(&0) {
        return Err(ArchError::Empty(s.to_string()));
    }
    Ok(widths)
}

/// Weights are standard normal scaled by `1/sqrt(fan_in)`, biases uniform in
/// `[-0.5, 0.5]`.
pub fn random_network(rng: &mut impl Rng, input_dim: usize, widths: &[usize], classes: usize) -> ReluNetwork {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(widths);
    dims.push(classes);
    let layers = dims
        .windows(2)
        .map(|w| {
            let scale = 1.0 / (w[0] as f64).sqrt();
            let weights = (0..w[0] * w[1]).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect();
            let bias = (0..w[1]).map(|_| rng.gen_range(-0.5..=0.5)).collect();
            Layer::from_flat(weights, w[1], w[0], bias)
        })
        .collect();
    ReluNetwork::new(input_dim, layers).expect("generated dimensions chain")
}

pub fn seeded_network(seed: u64, input_dim: usize, widths: &[usize], classes: usize) -> ReluNetwork {
    random_network(&mut ChaCha8Rng::seed_from_u64(seed), input_dim, widths, classes)
}

/// `count` points uniform in `[low, high]^dim`.
pub fn random_points(rng: &mut impl Rng, dim: usize, count: usize, low: f64, high: f64) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..dim).map(|_| rng.gen_range(low..=high)).collect()).collect()
}
