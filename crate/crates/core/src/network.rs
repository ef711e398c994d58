//! The ReLU classifier, its activation patterns and the affine maps a
//! (partial) pattern induces on input space.
//!
//! Indexing: a network has `L = num_hidden()` hidden layers. Hidden layer `i`
//! (0-based) has pre-activation `z^{i+1} = W^i x^i + b^i` where `x^0` is the
//! input and `x^i = relu(z^i)`. The last weight matrix `W^L` maps the final
//! hidden layer to the logits. Class indices are 0-based.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{all_finite, dot, matvec};

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkError {
    Empty,
    NoHiddenLayer,
    ZeroWidth { layer: usize },
    DimensionMismatch { layer: usize, expected: usize, found: usize },
    RaggedWeights { layer: usize },
    NonFinite { layer: usize },
    TooFewClasses(usize),
    InputLength { expected: usize, found: usize },
    PatternShape,
    PatternNotFull,
    SameClass(usize),
    ClassOutOfRange(usize),
    NeuronOutOfRange { layer: usize, neuron: usize },
    DepthOutOfRange(usize),
}

impl fmt::Display for NetworkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkError::Empty => write!(f, "network has no layers"),
            NetworkError::NoHiddenLayer => write!(f, "network needs at least one hidden ReLU layer"),
            NetworkError::ZeroWidth { layer } => write!(f, "layer {layer} has zero width"),
            NetworkError::DimensionMismatch { layer, expected, found } => {
                write!(f, "layer {layer}: weight matrix has {found} columns, expected {expected}")
            }
            NetworkError::RaggedWeights { layer } => {
                write!(f, "layer {layer}: weight rows differ in length or bias length mismatch")
            }
            NetworkError::NonFinite { layer } => write!(f, "layer {layer} has a non-finite entry"),
            NetworkError::TooFewClasses(c) => write!(f, "output layer has {c} rows, need at least 2"),
            NetworkError::InputLength { expected, found } => {
                write!(f, "input has length {found}, expected {expected}")
            }
            NetworkError::PatternShape => write!(f, "activation pattern does not match the network"),
            NetworkError::PatternNotFull => write!(f, "activation pattern is not full"),
            NetworkError::SameClass(c) => write!(f, "decision boundary between class {c} and itself"),
            NetworkError::ClassOutOfRange(c) => write!(f, "class {c} out of range"),
            NetworkError::NeuronOutOfRange { layer, neuron } => {
                write!(f, "neuron ({layer}, {neuron}) not covered by the pattern")
            }
            NetworkError::DepthOutOfRange(d) => write!(f, "pattern depth {d} out of range"),
        }
    }
}

impl core::error::Error for NetworkError {}

/// One dense affine layer, weights row-major with `rows` output rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Vec<f64>,
    bias: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Layer {
    pub fn from_rows(rows: &[Vec<f64>], bias: Vec<f64>) -> Result<Layer, NetworkError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) || bias.len() != rows.len() {
            return Err(NetworkError::RaggedWeights { layer: 0 });
        }
        Ok(Layer { weights: rows.iter().flatten().copied().collect(), bias, rows: rows.len(), cols })
    }

    pub fn from_flat(weights: Vec<f64>, rows: usize, cols: usize, bias: Vec<f64>) -> Layer {
        assert_eq!(weights.len(), rows * cols);
        assert_eq!(bias.len(), rows);
        Layer { weights, bias, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        matvec(&self.weights, self.rows, x, &mut out);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
        out
    }
}

/// Immutable feed-forward ReLU classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
}

/// Pre-activations of every hidden layer and the output logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub preactivations: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

impl ReluNetwork {
    /// Validates the dimension chain and entries. The last layer is the
    /// output layer; every earlier layer is followed by a ReLU.
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<ReluNetwork, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::Empty);
        }
        if layers.len() < 2 {
            return Err(NetworkError::NoHiddenLayer);
        }
        let mut width = input_dim;
        if width == 0 {
            return Err(NetworkError::ZeroWidth { layer: 0 });
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.rows == 0 {
                return Err(NetworkError::ZeroWidth { layer: i });
            }
            if layer.cols != width {
                return Err(NetworkError::DimensionMismatch { layer: i, expected: width, found: layer.cols });
            }
            if layer.weights.len() != layer.rows * layer.cols || layer.bias.len() != layer.rows {
                return Err(NetworkError::RaggedWeights { layer: i });
            }
            if !all_finite(&layer.weights) || !all_finite(&layer.bias) {
                return Err(NetworkError::NonFinite { layer: i });
            }
            width = layer.rows;
        }
        if width < 2 {
            return Err(NetworkError::TooFewClasses(width));
        }
        Ok(ReluNetwork { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of hidden ReLU layers, L.
    pub fn num_hidden(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    /// Width of hidden layer `i` (0-based).
    pub fn hidden_width(&self, i: usize) -> usize {
        self.layers[i].rows
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.num_hidden()].iter().map(|l| l.rows).collect()
    }

    pub fn total_neurons(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &Layer {
        &self.layers[i]
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NetworkError> {
        if x.len() != self.input_dim {
            return Err(NetworkError::InputLength { expected: self.input_dim, found: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward, NetworkError> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.num_hidden());
        let mut act: Vec<f64> = x.to_vec();
        for layer in &self.layers[..self.num_hidden()] {
            let z = layer.apply(&act);
            act = z.iter().map(|v| v.max(0.0)).collect();
            pre.push(z);
        }
        let logits = self.layers[self.num_hidden()].apply(&act);
        Ok(Forward { preactivations: pre, logits })
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        Ok(self.forward(x)?.logits)
    }

    /// Predicted class; ties go to the smallest index.
    pub fn classify(&self, x: &[f64]) -> Result<usize, NetworkError> {
        Ok(argmax(&self.forward(x)?.logits))
    }
}

/// Index of the largest entry, smallest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Sign assignment for the first `depth()` hidden layers; `true` is +1 (on).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ActivationPattern {
    layers: Vec<Vec<bool>>,
}

/// Packed (depth, sign bits) key used by seen-sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternKey(Vec<u64>);

impl ActivationPattern {
    pub fn empty() -> ActivationPattern {
        ActivationPattern { layers: Vec::new() }
    }

    pub fn from_layers(layers: Vec<Vec<bool>>) -> ActivationPattern {
        ActivationPattern { layers }
    }

    /// Builds a pattern from +1/-1 sign vectors.
    pub fn from_signs(signs: &[&[i8]]) -> ActivationPattern {
        ActivationPattern { layers: signs.iter().map(|l| l.iter().map(|s| *s >= 0).collect()).collect() }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn is_full(&self, net: &ReluNetwork) -> bool {
        self.depth() == net.num_hidden()
    }

    pub fn layers(&self) -> &[Vec<bool>] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &[bool] {
        &self.layers[i]
    }

    /// +1 or -1.
    pub fn sign(&self, layer: usize, neuron: usize) -> i8 {
        if self.layers[layer][neuron] {
            1
        } else {
            -1
        }
    }

    pub fn signs(&self) -> Vec<Vec<i8>> {
        self.layers.iter().map(|l| l.iter().map(|b| if *b { 1 } else { -1 }).collect()).collect()
    }

    /// Drops the last layer vector.
    pub fn parent(&self) -> ActivationPattern {
        let mut layers = self.layers.clone();
        layers.pop();
        ActivationPattern { layers }
    }

    pub fn prefix(&self, depth: usize) -> ActivationPattern {
        ActivationPattern { layers: self.layers[..depth].to_vec() }
    }

    pub fn push_layer(&mut self, signs: Vec<bool>) {
        self.layers.push(signs);
    }

    /// Copy with one neuron's sign flipped.
    pub fn flipped(&self, layer: usize, neuron: usize) -> ActivationPattern {
        let mut out = self.clone();
        out.layers[layer][neuron] = !out.layers[layer][neuron];
        out
    }

    pub fn key(&self) -> PatternKey {
        let mut words = vec![self.depth() as u64];
        let mut cur = 0u64;
        let mut used = 0;
        for bit in self.layers.iter().flatten() {
            if *bit {
                cur |= 1 << used;
            }
            used += 1;
            if used == 64 {
                words.push(cur);
                cur = 0;
                used = 0;
            }
        }
        if used > 0 {
            words.push(cur);
        }
        PatternKey(words)
    }

    pub fn check_shape(&self, net: &ReluNetwork) -> Result<(), NetworkError> {
        if self.depth() > net.num_hidden() {
            return Err(NetworkError::PatternShape);
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.len() != net.hidden_width(i) {
                return Err(NetworkError::PatternShape);
            }
        }
        Ok(())
    }
}

impl fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str("(")?;
            for (j, b) in l.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                f.write_str(if *b { "+1" } else { "-1" })?;
            }
            f.write_str(")")?;
        }
        f.write_str(")")
    }
}

/// Activation pattern of `x` over the first `depth` hidden layers; a zero
/// pre-activation counts as on.
pub fn activation_pattern(net: &ReluNetwork, x: &[f64], depth: usize) -> Result<ActivationPattern, NetworkError> {
    if depth > net.num_hidden() {
        return Err(NetworkError::DepthOutOfRange(depth));
    }
    let fwd = net.forward(x)?;
    Ok(ActivationPattern {
        layers: fwd.preactivations[..depth].iter().map(|z| z.iter().map(|v| *v >= 0.0).collect()).collect(),
    })
}

/// `v -> a.v + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunc {
    pub a: Vec<f64>,
    pub b: f64,
}

impl LinearFunc {
    pub fn new(a: Vec<f64>, b: f64) -> LinearFunc {
        LinearFunc { a, b }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        dot(&self.a, v) + self.b
    }
}

/// Affine expressions `z^{i+1} = D^i x + c^i` valid on the region of a pattern.
///
/// A pattern of depth `l` determines `D^0 .. D^l`: `D^0 = W^0` always, and
/// `D^i = W^i I^{A_i} D^{i-1}`. For a full pattern `D^L` is the map to the
/// logits.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    dim: usize,
    matrices: Vec<Vec<f64>>,
    offsets: Vec<Vec<f64>>,
}

impl AffineMap {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.dim
    }

    /// Row-major `D^i`.
    pub fn matrix(&self, i: usize) -> &[f64] {
        &self.matrices[i]
    }

    pub fn offset(&self, i: usize) -> &[f64] {
        &self.offsets[i]
    }

    /// Row `j` of `D^i` and its offset.
    pub fn row(&self, i: usize, j: usize) -> (&[f64], f64) {
        (&self.matrices[i][j * self.dim..(j + 1) * self.dim], self.offsets[i][j])
    }

    pub fn eval(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let rows = self.offsets[i].len();
        let mut out = vec![0.0; rows];
        matvec(&self.matrices[i], rows, x, &mut out);
        for (o, c) in out.iter_mut().zip(&self.offsets[i]) {
            *o += c;
        }
        out
    }
}

pub fn affine_prefix(net: &ReluNetwork, pattern: &ActivationPattern) -> Result<AffineMap, NetworkError> {
    pattern.check_shape(net)?;
    let n = net.input_dim();
    let first = net.layer(0);
    let mut matrices = vec![first.weights().to_vec()];
    let mut offsets = vec![first.bias().to_vec()];
    for (i, signs) in pattern.layers().iter().enumerate() {
        let layer = net.layer(i + 1);
        let prev_d = &matrices[i];
        let prev_c = &offsets[i];
        let rows = layer.rows();
        let mut d = vec![0.0; rows * n];
        let mut c = layer.bias().to_vec();
        for r in 0..rows {
            let w = layer.row(r);
            let out = &mut d[r * n..(r + 1) * n];
            for (k, on) in signs.iter().enumerate() {
                if !*on || w[k] == 0.0 {
                    continue;
                }
                let src = &prev_d[k * n..(k + 1) * n];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += w[k] * s;
                }
                c[r] += w[k] * prev_c[k];
            }
        }
        matrices.push(d);
        offsets.push(c);
    }
    Ok(AffineMap { dim: n, matrices, offsets })
}

/// `f_y - f_j` as an affine function on the region of a full pattern.
pub fn decision_affine(
    net: &ReluNetwork,
    pattern: &ActivationPattern,
    y: usize,
    j: usize,
) -> Result<LinearFunc, NetworkError> {
    if !pattern.is_full(net) {
        return Err(NetworkError::PatternNotFull);
    }
    let map = affine_prefix(net, pattern)?;
    decision_from_map(net, &map, y, j)
}

pub(crate) fn decision_from_map(
    net: &ReluNetwork,
    map: &AffineMap,
    y: usize,
    j: usize,
) -> Result<LinearFunc, NetworkError> {
    let c = net.num_classes();
    if y >= c {
        return Err(NetworkError::ClassOutOfRange(y));
    }
    if j >= c {
        return Err(NetworkError::ClassOutOfRange(j));
    }
    if y == j {
        return Err(NetworkError::SameClass(y));
    }
    let last = net.num_hidden();
    let (ry, cy) = map.row(last, y);
    let (rj, cj) = map.row(last, j);
    Ok(LinearFunc { a: ry.iter().zip(rj).map(|(a, b)| a - b).collect(), b: cy - cj })
}
