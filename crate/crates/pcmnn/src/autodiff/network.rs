//! Fully connected scalar-output networks.
//!
//! Both model networks share this shape: dense layers with tanh hidden
//! activations and either a raw linear output or a bounded squashing map.
//! Tanh is deliberate — the ODE residual differentiates the network with
//! respect to its input, which rules out piecewise-linear activations.

use rand::Rng;

use super::tape::{sigmoid, Dual, Tape, Var};
use crate::error::{Error, Result};

/// Hidden-layer nonlinearity. Must be C¹.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

/// Map applied to the final linear output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutputMap {
    Identity,
    /// `lo + (hi - lo)·σ(raw)`: output confined to `[lo, hi]` by construction.
    Bounded { lo: f64, hi: f64 },
}

/// Dense feed-forward network with a single scalar output.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    /// Per layer, row-major `[out_idx * in_dim + in_idx]`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
    output_map: OutputMap,
}

impl MlpNetwork {
    /// Xavier/Glorot uniform initialization from the caller's RNG.
    pub fn new(layer_sizes: &[usize], output_map: OutputMap, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, output_map)?;
        for l in 0..net.n_layers() {
            let (fan_in, fan_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in net.weights[l].iter_mut() {
                *w = rng.random_range(-bound..bound);
            }
            // biases stay zero
        }
        Ok(net)
    }

    /// All-zero parameters; useful as a blank slate and for hand-set nets.
    pub fn zeros(layer_sizes: &[usize], output_map: OutputMap) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::config("network needs at least input and output layers"));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(Error::config("network output layer must have width 1"));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("network layer widths must be positive"));
        }
        if let OutputMap::Bounded { lo, hi } = output_map {
            if !(lo < hi) {
                return Err(Error::config("bounded output map requires lo < hi"));
            }
        }
        let weights = (0..layer_sizes.len() - 1)
            .map(|l| vec![0.0; layer_sizes[l] * layer_sizes[l + 1]])
            .collect();
        let biases = (1..layer_sizes.len()).map(|l| vec![0.0; layer_sizes[l]]).collect();
        Ok(MlpNetwork {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation: Activation::Tanh,
            output_map,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_map(&self) -> OutputMap {
        self.output_map
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Set one weight: `layer`, `out_idx`, `in_idx` address the matrix entry.
    pub fn set_weight(&mut self, layer: usize, out_idx: usize, in_idx: usize, value: f64) {
        let in_dim = self.layer_sizes[layer];
        self.weights[layer][out_idx * in_dim + in_idx] = value;
    }

    pub fn set_bias(&mut self, layer: usize, out_idx: usize, value: f64) {
        self.biases[layer][out_idx] = value;
    }

    /// Parameters flattened layer by layer, weights (row-major) then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.n_layers() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    /// Inverse of [`flat_params`](Self::flat_params).
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut at = 0;
        for l in 0..self.n_layers() {
            let nw = self.weights[l].len();
            self.weights[l].copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = self.biases[l].len();
            self.biases[l].copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Plain forward evaluation, no tape. Deterministic for fixed weights.
    pub fn forward_value(&self, input: &[f64]) -> Result<f64> {
        self.check_input(input.len())?;
        let mut act = input.to_vec();
        let mut next = Vec::new();
        for l in 0..self.n_layers() {
            let (in_dim, out_dim) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            next.clear();
            for j in 0..out_dim {
                let row = &self.weights[l][j * in_dim..(j + 1) * in_dim];
                let z: f64 = row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>() + self.biases[l][j];
                next.push(if l + 1 < self.layer_sizes.len() - 1 {
                    z.tanh()
                } else {
                    z
                });
            }
            std::mem::swap(&mut act, &mut next);
        }
        Ok(self.apply_output_map(act[0]))
    }

    /// Forward evaluation carrying a directional derivative of the inputs.
    ///
    /// Returns `(value, d(value)/d(direction))` where the direction is given
    /// by `input_tangent`. No tape involved; this is the value-level twin of
    /// the taped dual propagation and the two are cross-checked in tests.
    pub fn forward_with_tangent(&self, input: &[f64], input_tangent: &[f64]) -> Result<(f64, f64)> {
        self.check_input(input.len())?;
        self.check_input(input_tangent.len())?;
        let mut act: Vec<(f64, f64)> = input.iter().copied().zip(input_tangent.iter().copied()).collect();
        let mut next = Vec::new();
        for l in 0..self.n_layers() {
            let (in_dim, out_dim) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            next.clear();
            for j in 0..out_dim {
                let row = &self.weights[l][j * in_dim..(j + 1) * in_dim];
                let mut z = self.biases[l][j];
                let mut dz = 0.0;
                for (w, (a, da)) in row.iter().zip(&act) {
                    z += w * a;
                    dz += w * da;
                }
                if l + 1 < self.layer_sizes.len() - 1 {
                    let t = z.tanh();
                    next.push((t, (1.0 - t * t) * dz));
                } else {
                    next.push((z, dz));
                }
            }
            std::mem::swap(&mut act, &mut next);
        }
        let (raw, draw) = act[0];
        Ok(match self.output_map {
            OutputMap::Identity => (raw, draw),
            OutputMap::Bounded { lo, hi } => {
                let s = sigmoid(raw);
                (lo + (hi - lo) * s, (hi - lo) * s * (1.0 - s) * draw)
            }
        })
    }

    fn apply_output_map(&self, raw: f64) -> f64 {
        match self.output_map {
            OutputMap::Identity => raw,
            OutputMap::Bounded { lo, hi } => lo + (hi - lo) * sigmoid(raw),
        }
    }

    /// Record parameters as tape leaves so gradients can be taken w.r.t. them.
    pub fn bind<'n>(&'n self, tape: &mut Tape) -> BoundNet<'n> {
        let mut weights = Vec::with_capacity(self.n_layers());
        let mut biases = Vec::with_capacity(self.n_layers());
        for l in 0..self.n_layers() {
            weights.push(self.weights[l].iter().map(|&w| tape.leaf(w)).collect());
            biases.push(self.biases[l].iter().map(|&b| tape.leaf(b)).collect());
        }
        BoundNet {
            net: self,
            weights,
            biases,
        }
    }
}

/// A network whose parameters live on a tape as leaves.
pub struct BoundNet<'n> {
    net: &'n MlpNetwork,
    weights: Vec<Vec<Var>>,
    biases: Vec<Vec<Var>>,
}

impl BoundNet<'_> {
    /// Taped forward pass; the result is differentiable w.r.t. parameters
    /// and inputs.
    pub fn forward(&self, tape: &mut Tape, inputs: &[Var]) -> Result<Var> {
        self.net.check_input(inputs.len())?;
        let sizes = &self.net.layer_sizes;
        let mut act = inputs.to_vec();
        for l in 0..self.net.n_layers() {
            let in_dim = sizes[l];
            let out_dim = sizes[l + 1];
            let last = l + 1 == sizes.len() - 1;
            let mut next = Vec::with_capacity(out_dim);
            for j in 0..out_dim {
                let row = &self.weights[l][j * in_dim..(j + 1) * in_dim];
                let z = tape.dot(row, &act);
                let z = tape.add(z, self.biases[l][j]);
                next.push(if last { z } else { tape.tanh(z) });
            }
            act = next;
        }
        Ok(self.output_map_on_tape(tape, act[0]))
    }

    /// Taped forward pass propagating input tangents.
    ///
    /// The returned tangent is itself a tape variable, so a backward pass
    /// yields exact parameter gradients of expressions that use it — the
    /// mechanism behind differentiating the ODE residual's dx/dt term.
    pub fn forward_dual(&self, tape: &mut Tape, inputs: &[Dual]) -> Result<Dual> {
        self.net.check_input(inputs.len())?;
        let sizes = &self.net.layer_sizes;
        let mut act = inputs.to_vec();
        let mut vals = Vec::new();
        let mut tans = Vec::new();
        for l in 0..self.net.n_layers() {
            let in_dim = sizes[l];
            let out_dim = sizes[l + 1];
            let last = l + 1 == sizes.len() - 1;
            vals.clear();
            tans.clear();
            vals.extend(act.iter().map(|d| d.val));
            tans.extend(act.iter().map(|d| d.tan));
            let mut next = Vec::with_capacity(out_dim);
            for j in 0..out_dim {
                let row = &self.weights[l][j * in_dim..(j + 1) * in_dim];
                let z = tape.dot(row, &vals);
                let z = tape.add(z, self.biases[l][j]);
                let dz = tape.dot(row, &tans);
                if last {
                    next.push(Dual { val: z, tan: dz });
                } else {
                    let a = tape.tanh(z);
                    // tanh'(z) = 1 - a²
                    let a2 = tape.square(a);
                    let minus_a2 = tape.scale(a2, -1.0);
                    let deriv = tape.offset(minus_a2, 1.0);
                    let da = tape.mul(deriv, dz);
                    next.push(Dual { val: a, tan: da });
                }
            }
            act = next;
        }
        let raw = act[0];
        Ok(match self.net.output_map {
            OutputMap::Identity => raw,
            OutputMap::Bounded { lo, hi } => {
                let s = tape.sigmoid(raw.val);
                let val = {
                    let scaled = tape.scale(s, hi - lo);
                    tape.offset(scaled, lo)
                };
                // d/draw [lo + (hi-lo)σ] = (hi-lo)·σ(1-σ)
                let one_minus_s = {
                    let m = tape.scale(s, -1.0);
                    tape.offset(m, 1.0)
                };
                let sp = tape.mul(s, one_minus_s);
                let dmap = tape.scale(sp, hi - lo);
                let tan = tape.mul(dmap, raw.tan);
                Dual { val, tan }
            }
        })
    }

    fn output_map_on_tape(&self, tape: &mut Tape, raw: Var) -> Var {
        match self.net.output_map {
            OutputMap::Identity => raw,
            OutputMap::Bounded { lo, hi } => {
                let s = tape.sigmoid(raw);
                let scaled = tape.scale(s, hi - lo);
                tape.offset(scaled, lo)
            }
        }
    }

    /// Gather parameter gradients in [`MlpNetwork::flat_params`] order.
    pub fn param_grads(&self, grads: &super::tape::Gradients) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.net.param_count());
        for l in 0..self.net.n_layers() {
            out.extend(self.weights[l].iter().map(|&v| grads.wrt(v)));
            out.extend(self.biases[l].iter().map(|&v| grads.wrt(v)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_param_grads(net: &MlpNetwork, input: &[f64], h: f64) -> Vec<f64> {
        let base = net.flat_params();
        let mut grads = Vec::with_capacity(base.len());
        let mut probe = net.clone();
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            probe.set_flat_params(&p).unwrap();
            let up = probe.forward_value(input).unwrap();
            p[i] -= 2.0 * h;
            probe.set_flat_params(&p).unwrap();
            let dn = probe.forward_value(input).unwrap();
            grads.push((up - dn) / (2.0 * h));
        }
        grads
    }

    fn rel_close(a: f64, b: f64, rtol: f64) -> bool {
        (a - b).abs() <= rtol * a.abs().max(b.abs()) + 1e-9
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = MlpNetwork::zeros(&[3, 4, 1], OutputMap::Identity).unwrap();
        assert_eq!(net.forward_value(&[1.0, -2.0, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn single_linear_layer_is_affine() {
        // y = 2x + 1 at x = 3
        let mut net = MlpNetwork::zeros(&[1, 1], OutputMap::Identity).unwrap();
        net.set_weight(0, 0, 0, 2.0);
        net.set_bias(0, 0, 1.0);
        assert_eq!(net.forward_value(&[3.0]).unwrap(), 7.0);
    }

    #[test]
    fn two_layer_tanh_matches_hand_composition() {
        // y = w2·tanh(w1·x + b1) + b2 with hand-set parameters.
        let mut net = MlpNetwork::zeros(&[1, 2, 1], OutputMap::Identity).unwrap();
        net.set_weight(0, 0, 0, 0.5);
        net.set_weight(0, 1, 0, -1.5);
        net.set_bias(0, 0, 0.2);
        net.set_bias(0, 1, -0.1);
        net.set_weight(1, 0, 0, 2.0);
        net.set_weight(1, 0, 1, 3.0);
        net.set_bias(1, 0, 0.25);
        let x = 0.8_f64;
        let expected = 2.0 * (0.5 * x + 0.2).tanh() + 3.0 * (-1.5 * x - 0.1).tanh() + 0.25;
        assert_relative_eq!(net.forward_value(&[x]).unwrap(), expected, max_relative = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = MlpNetwork::zeros(&[2, 3, 1], OutputMap::Identity).unwrap();
        assert!(matches!(
            net.forward_value(&[1.0]),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn linear_param_gradient_is_input() {
        // y = w·x ⇒ dy/dw = x
        let mut net = MlpNetwork::zeros(&[1, 1], OutputMap::Identity).unwrap();
        net.set_weight(0, 0, 0, 4.0);
        let mut tape = Tape::new();
        let bound = net.bind(&mut tape);
        let x = tape.leaf(3.0);
        let y = bound.forward(&mut tape, &[x]).unwrap();
        let grads = tape.backward(y);
        let pg = bound.param_grads(&grads);
        assert_eq!(pg[0], 3.0); // weight
        assert_eq!(pg[1], 1.0); // bias
    }

    #[test]
    fn tanh_weight_gradient_at_origin() {
        // y = tanh(w·x), w = 0 ⇒ dy/dw = x since tanh'(0) = 1
        let mut net = MlpNetwork::zeros(&[1, 1, 1], OutputMap::Identity).unwrap();
        net.set_weight(1, 0, 0, 1.0); // output picks the hidden unit
        let mut tape = Tape::new();
        let bound = net.bind(&mut tape);
        let x = tape.leaf(2.5);
        let y = bound.forward(&mut tape, &[x]).unwrap();
        let grads = tape.backward(y);
        let pg = bound.param_grads(&grads);
        // flat order: w0 (1 entry), b0 (1), w1 (1), b1 (1)
        assert_relative_eq!(pg[0], 2.5, max_relative = 1e-15);
    }

    #[test]
    fn input_gradient_of_linear_net_is_weight() {
        let mut net = MlpNetwork::zeros(&[2, 1], OutputMap::Identity).unwrap();
        net.set_weight(0, 0, 0, 1.5);
        net.set_weight(0, 0, 1, -0.5);
        let mut tape = Tape::new();
        let bound = net.bind(&mut tape);
        let xs = [tape.leaf(1.0), tape.leaf(2.0)];
        let y = bound.forward(&mut tape, &xs).unwrap();
        let grads = tape.backward(y);
        assert_eq!(grads.wrt(xs[0]), 1.5);
        assert_eq!(grads.wrt(xs[1]), -0.5);
    }

    #[test]
    fn constant_output_net_has_zero_input_gradient() {
        let mut net = MlpNetwork::zeros(&[1, 2, 1], OutputMap::Identity).unwrap();
        net.set_bias(1, 0, 3.0); // output is the bias alone
        let mut tape = Tape::new();
        let bound = net.bind(&mut tape);
        let x = tape.leaf(0.4);
        let y = bound.forward(&mut tape, &[x]).unwrap();
        assert_relative_eq!(tape.value(y), 3.0);
        let grads = tape.backward(y);
        assert_eq!(grads.wrt(x), 0.0);
    }

    #[test]
    fn param_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let net = MlpNetwork::new(&[2, 5, 4, 1], OutputMap::Identity, &mut rng).unwrap();
            let input = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let mut tape = Tape::new();
            let bound = net.bind(&mut tape);
            let xs = [tape.leaf(input[0]), tape.leaf(input[1])];
            let y = bound.forward(&mut tape, &xs).unwrap();
            let grads = tape.backward(y);
            let analytic = bound.param_grads(&grads);
            let numeric = fd_param_grads(&net, &input, 1e-4);
            for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
                assert!(
                    rel_close(*a, *n, 1e-5),
                    "trial {trial} param {i}: analytic {a} vs fd {n}"
                );
            }
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let net = MlpNetwork::new(&[1, 6, 6, 1], OutputMap::Identity, &mut rng).unwrap();
            let t = rng.random_range(-1.0..1.0);
            let mut tape = Tape::new();
            let bound = net.bind(&mut tape);
            let x = tape.leaf(t);
            let y = bound.forward(&mut tape, &[x]).unwrap();
            let grads = tape.backward(y);
            let h = 1e-4;
            let up = net.forward_value(&[t + h]).unwrap();
            let dn = net.forward_value(&[t - h]).unwrap();
            let fd = (up - dn) / (2.0 * h);
            assert!(rel_close(grads.wrt(x), fd, 1e-5));
        }
    }

    #[test]
    fn dual_tangent_agrees_with_input_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = MlpNetwork::new(&[1, 8, 8, 1], OutputMap::Identity, &mut rng).unwrap();
        let t = 0.37;

        let mut tape = Tape::new();
        let bound = net.bind(&mut tape);
        let x = Dual::seed(&mut tape, t);
        let out = bound.forward_dual(&mut tape, &[x]).unwrap();
        let taped_tan = tape.value(out.tan);

        let grads = tape.backward(out.val);
        assert_relative_eq!(taped_tan, grads.wrt(x.val), max_relative = 1e-12);

        let (v, dv) = net.forward_with_tangent(&[t], &[1.0]).unwrap();
        assert_relative_eq!(v, tape.value(out.val), max_relative = 1e-14);
        assert_relative_eq!(dv, taped_tan, max_relative = 1e-12);
    }

    #[test]
    fn bounded_output_respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let net = MlpNetwork::new(&[3, 8, 1], OutputMap::Bounded { lo: -1.372, hi: 0.628 }, &mut rng).unwrap();
        for _ in 0..1000 {
            let input = [
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(-5.0..5.0),
            ];
            let y = net.forward_value(&input).unwrap();
            assert!((-1.372..=0.628).contains(&y), "output {y} escaped bounds");
        }
    }

    #[test]
    fn flat_params_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = MlpNetwork::new(&[2, 3, 1], OutputMap::Identity, &mut rng).unwrap();
        let mut copy = MlpNetwork::zeros(&[2, 3, 1], OutputMap::Identity).unwrap();
        copy.set_flat_params(&net.flat_params()).unwrap();
        assert_eq!(net, copy);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = MlpNetwork::new(&[1, 16, 1], OutputMap::Identity, &mut rng).unwrap();
        let a = net.forward_value(&[0.123]).unwrap();
        let b = net.forward_value(&[0.123]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
