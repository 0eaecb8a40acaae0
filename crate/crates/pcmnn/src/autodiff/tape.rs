//! Reverse-mode automatic differentiation over a flat scalar tape.
//!
//! Every primitive operation appends one node holding its forward value and
//! the local partial derivatives with respect to its parents. Nodes are
//! created in topological order by construction (an operation can only refer
//! to variables that already exist), so a single reverse sweep accumulates
//! exact chain-rule gradients for every variable on the tape.
//!
//! The tape is deliberately minimal: scalars only, the handful of primitives
//! the networks and losses need, and a fused `dot` node so a dense layer does
//! not pay per-multiplication node overhead.

/// Handle to a value recorded on a [`Tape`].
///
/// A `Var` is only meaningful together with the tape that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) u32);

impl Var {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Gradient vector produced by [`Tape::backward`], indexable by [`Var`].
#[derive(Debug)]
pub struct Gradients(Vec<f64>);

impl Gradients {
    /// d(output)/d(var) for the output the backward pass was seeded with.
    #[inline]
    pub fn wrt(&self, var: Var) -> f64 {
        self.0[var.index()]
    }
}

/// Append-only record of a scalar computation.
#[derive(Debug, Default)]
pub struct Tape {
    /// Exclusive end offset of each node's argument slice in the arenas.
    /// Node `i` owns `args[end[i-1]..end[i]]` (with `end[-1] = 0`).
    arg_end: Vec<u32>,
    vals: Vec<f64>,
    arg_idx: Vec<u32>,
    arg_partial: Vec<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of nodes recorded so far.
    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Drop all nodes but keep allocations for reuse across iterations.
    pub fn clear(&mut self) {
        self.arg_end.clear();
        self.vals.clear();
        self.arg_idx.clear();
        self.arg_partial.clear();
    }

    /// Forward value of a recorded variable.
    #[inline]
    pub fn value(&self, var: Var) -> f64 {
        self.vals[var.index()]
    }

    #[inline]
    fn push(&mut self, value: f64) -> Var {
        let id = self.vals.len() as u32;
        self.vals.push(value);
        self.arg_end.push(self.arg_idx.len() as u32);
        Var(id)
    }

    #[inline]
    fn arg(&mut self, parent: Var, partial: f64) {
        debug_assert!((parent.index()) < self.vals.len(), "parent must precede node");
        self.arg_idx.push(parent.0);
        self.arg_partial.push(partial);
    }

    /// Record an input: a node with no parents. Parameters, observations and
    /// constants all enter the tape this way.
    pub fn leaf(&mut self, value: f64) -> Var {
        self.push(value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.arg(a, 1.0);
        self.arg(b, 1.0);
        self.push(v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.arg(a, 1.0);
        self.arg(b, -1.0);
        self.push(v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.arg(a, vb);
        self.arg(b, va);
        self.push(va * vb)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.arg(a, -1.0);
        self.push(v)
    }

    /// `k * a` for a constant `k`.
    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = k * self.value(a);
        self.arg(a, k);
        self.push(v)
    }

    /// `a + k` for a constant `k`.
    pub fn offset(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) + k;
        self.arg(a, 1.0);
        self.push(v)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let va = self.value(a);
        self.arg(a, 2.0 * va);
        self.push(va * va)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).tanh();
        self.arg(a, 1.0 - t * t);
        self.push(t)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let s = sigmoid(self.value(a));
        self.arg(a, s * (1.0 - s));
        self.push(s)
    }

    /// Fused inner product `Σ wᵢ·xᵢ` with gradients to both factor vectors.
    ///
    /// Panics if the slices differ in length (internal misuse, not input).
    pub fn dot(&mut self, ws: &[Var], xs: &[Var]) -> Var {
        assert_eq!(ws.len(), xs.len(), "dot factors must have equal length");
        let mut acc = 0.0;
        for (&w, &x) in ws.iter().zip(xs) {
            acc += self.value(w) * self.value(x);
        }
        for (&w, &x) in ws.iter().zip(xs) {
            let partial = self.value(x);
            self.arg(w, partial);
        }
        for (&w, &x) in ws.iter().zip(xs) {
            let partial = self.value(w);
            self.arg(x, partial);
        }
        self.push(acc)
    }

    /// Mean of squares `(1/n)·Σ aᵢ²`; the usual loss reduction.
    pub fn mean_square(&mut self, residuals: &[Var]) -> Var {
        assert!(!residuals.is_empty(), "mean_square of empty slice");
        let n = residuals.len() as f64;
        let mut acc = 0.0;
        for &r in residuals {
            acc += self.value(r) * self.value(r);
        }
        for &r in residuals {
            let partial = 2.0 * self.value(r) / n;
            self.arg(r, partial);
        }
        self.push(acc / n)
    }

    /// Reverse sweep from `output`, returning d(output)/d(v) for every `v`.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads = vec![0.0; self.vals.len()];
        grads[output.index()] = 1.0;
        let mut end = self.arg_end[output.index()] as usize;
        for i in (0..=output.index()).rev() {
            let start = if i == 0 { 0 } else { self.arg_end[i - 1] as usize };
            let g = grads[i];
            if g != 0.0 {
                for k in start..end {
                    grads[self.arg_idx[k] as usize] += g * self.arg_partial[k];
                }
            }
            end = start;
        }
        Gradients(grads)
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A tape variable paired with its directional derivative (tangent).
///
/// Propagating duals through a network records the tangent computation on the
/// tape itself, so the tangent — e.g. dx/dt of the state network — is an
/// ordinary differentiable variable and parameter gradients flow through it.
#[derive(Clone, Copy, Debug)]
pub struct Dual {
    pub val: Var,
    pub tan: Var,
}

impl Dual {
    /// A dual with tangent seeded to 1: the coordinate we differentiate along.
    pub fn seed(tape: &mut Tape, value: f64) -> Self {
        Dual {
            val: tape.leaf(value),
            tan: tape.leaf(1.0),
        }
    }

    /// A dual that does not vary along the differentiation direction.
    pub fn constant(tape: &mut Tape, value: f64) -> Self {
        Dual {
            val: tape.leaf(value),
            tan: tape.leaf(0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn leaf_roundtrip() {
        let mut tape = Tape::new();
        let x = tape.leaf(3.5);
        assert_eq!(tape.value(x), 3.5);
        assert_eq!(tape.len(), 1);
    }

    #[test]
    fn product_rule() {
        let mut tape = Tape::new();
        let x = tape.leaf(3.0);
        let y = tape.leaf(4.0);
        let p = tape.mul(x, y);
        let grads = tape.backward(p);
        assert_eq!(grads.wrt(x), 4.0);
        assert_eq!(grads.wrt(y), 3.0);
    }

    #[test]
    fn chain_through_tanh() {
        // d/dx tanh(2x) = 2(1 - tanh²(2x))
        let mut tape = Tape::new();
        let x = tape.leaf(0.3);
        let z = tape.scale(x, 2.0);
        let y = tape.tanh(z);
        let grads = tape.backward(y);
        let t = (0.6f64).tanh();
        assert_relative_eq!(grads.wrt(x), 2.0 * (1.0 - t * t), max_relative = 1e-14);
    }

    #[test]
    fn fanout_accumulates() {
        // y = x·x + x ⇒ dy/dx = 2x + 1
        let mut tape = Tape::new();
        let x = tape.leaf(5.0);
        let sq = tape.mul(x, x);
        let y = tape.add(sq, x);
        let grads = tape.backward(y);
        assert_eq!(grads.wrt(x), 11.0);
    }

    #[test]
    fn dot_gradients_are_cross_values() {
        let mut tape = Tape::new();
        let ws: Vec<Var> = [1.0, 2.0, 3.0].iter().map(|&v| tape.leaf(v)).collect();
        let xs: Vec<Var> = [4.0, 5.0, 6.0].iter().map(|&v| tape.leaf(v)).collect();
        let d = tape.dot(&ws, &xs);
        assert_eq!(tape.value(d), 32.0);
        let grads = tape.backward(d);
        assert_eq!(grads.wrt(ws[1]), 5.0);
        assert_eq!(grads.wrt(xs[2]), 3.0);
    }

    #[test]
    fn mean_square_value_and_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(3.0);
        let b = tape.leaf(-1.0);
        let ms = tape.mean_square(&[a, b]);
        assert_relative_eq!(tape.value(ms), 5.0);
        let grads = tape.backward(ms);
        assert_relative_eq!(grads.wrt(a), 3.0); // 2·3/2
        assert_relative_eq!(grads.wrt(b), -1.0);
    }

    #[test]
    fn gradient_of_sum_is_sum_of_gradients() {
        let mut tape = Tape::new();
        let x = tape.leaf(0.7);
        let f = tape.tanh(x);
        let g = tape.square(x);
        let sum = tape.add(f, g);
        let gf = tape.backward(f).wrt(x);
        let gg = tape.backward(g).wrt(x);
        let gsum = tape.backward(sum).wrt(x);
        assert_relative_eq!(gsum, gf + gg, max_relative = 1e-15);
    }

    #[test]
    fn clear_keeps_tape_usable() {
        let mut tape = Tape::new();
        let x = tape.leaf(1.0);
        let _ = tape.square(x);
        tape.clear();
        assert!(tape.is_empty());
        let y = tape.leaf(2.0);
        let z = tape.square(y);
        assert_eq!(tape.value(z), 4.0);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert!(sigmoid(800.0) <= 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_relative_eq!(sigmoid(0.0), 0.5);
    }
}
