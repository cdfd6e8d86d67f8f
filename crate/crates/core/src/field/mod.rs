//! The neural field `u(x)`: an MLP evaluated jointly with its input gradient.
//!
//! Forward passes propagate the value together with the `d` input tangents
//! (one per coordinate axis), stacked as extra rows of each layer's GEMM.
//! The reverse pass runs over that augmented computation, so losses that
//! depend on `grad_x u` get exact parameter gradients (the mixed second
//! derivatives come from the activation's second derivative).

mod adam;
mod checkpoint;
mod gradcheck;
mod init;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use gradcheck::max_fd_relative_error;
pub use init::{fit_to_function, init_analytic, init_geometric, init_geometric_with, init_random, PrefitConfig};

use rayon::prelude::*;

use crate::{Error, Result};

/// Points per work unit. Fixed so reductions never depend on worker count.
const CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// `ln(1 + e^(beta z)) / beta`
    Softplus { beta: f64 },
    /// `sin(omega0 z)`
    Sine { omega0: f64 },
}

impl Activation {
    #[inline]
    fn eval(self, z: f64) -> (f64, f64, f64) {
        match self {
            Activation::Softplus { beta } => {
                let bz = beta * z;
                let value = if bz > 0.0 { z + (-bz).exp().ln_1p() / beta } else { bz.exp().ln_1p() / beta };
                let sig = if bz >= 0.0 {
                    1.0 / (1.0 + (-bz).exp())
                } else {
                    let e = bz.exp();
                    e / (1.0 + e)
                };
                (value, sig, beta * sig * (1.0 - sig))
            }
            Activation::Sine { omega0 } => {
                let (s, c) = (omega0 * z).sin_cos();
                (s, omega0 * c, -omega0 * omega0 * s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_dim: usize,
    pub width: usize,
    /// Hidden layer count. Zero gives a plain affine map `w . x + b`.
    pub layers: usize,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(input_dim: usize, width: usize, layers: usize, activation: Activation) -> Result<Self> {
        let a = Architecture { input_dim, width, layers, activation };
        a.validate()?;
        Ok(a)
    }

    /// 5 hidden layers of width 128 with softplus(beta = 100).
    pub fn default_for(input_dim: usize) -> Self {
        Architecture { input_dim, width: 128, layers: 5, activation: Activation::Softplus { beta: 100.0 } }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.input_dim) {
            return Err(Error::invalid("input dimension must be 1, 2 or 3"));
        }
        if self.width == 0 {
            return Err(Error::invalid("width must be at least 1"));
        }
        let ok = match self.activation {
            Activation::Softplus { beta } => beta > 0.0 && beta.is_finite(),
            Activation::Sine { omega0 } => omega0 > 0.0 && omega0.is_finite(),
        };
        if !ok {
            return Err(Error::invalid("activation parameter must be positive"));
        }
        Ok(())
    }

    /// `(in, out)` of every affine map, input layer first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        if self.layers == 0 {
            return vec![(self.input_dim, 1)];
        }
        let mut shapes = vec![(self.input_dim, self.width)];
        shapes.extend(std::iter::repeat_n((self.width, self.width), self.layers - 1));
        shapes.push((self.width, 1));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }

    /// Offsets of each layer's weight block; the bias follows the weights.
    fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.layer_shapes()
            .iter()
            .map(|(i, o)| {
                let start = off;
                off += i * o + o;
                start
            })
            .collect()
    }
}

/// Value and input gradient at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl EvalResult {
    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Batch evaluation results, flat: `grads[i * d + k]` is `du/dx_k` at point `i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchEval {
    pub dim: usize,
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
}

impl BatchEval {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grad(&self, i: usize) -> &[f64] {
        &self.grads[i * self.dim..(i + 1) * self.dim]
    }

    pub fn grad_norm(&self, i: usize) -> f64 {
        self.grad(i).iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn get(&self, i: usize) -> EvalResult {
        EvalResult { value: self.values[i], grad: self.grad(i).to_vec() }
    }
}

/// Per-point loss adjoints `dL/du` and `dL/d(grad_x u)`, flat like [`BatchEval`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adjoints {
    pub dim: usize,
    pub d_value: Vec<f64>,
    pub d_grad: Vec<f64>,
}

impl Adjoints {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Adjoints { dim, d_value: vec![0.0; n], d_grad: vec![0.0; n * dim] }
    }

    pub fn len(&self) -> usize {
        self.d_value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_value.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralField {
    pub arch: Architecture,
    /// Layer-major; within a layer the `out x in` weights row-major, then the bias.
    pub params: Vec<f64>,
}

/// Cached forward state for one chunk.
struct ChunkTape {
    rows: usize,
    /// Stacked input of each affine map: value rows, then one block per tangent.
    inputs: Vec<Vec<f64>>,
    /// Stacked pre-activations of each hidden map.
    pre: Vec<Vec<f64>>,
    /// First and second activation derivatives at the value rows.
    d1: Vec<Vec<f64>>,
    d2: Vec<Vec<f64>>,
}

/// Forward state retained for a later [`NeuralField::backward`].
pub struct Tape {
    with_grad: bool,
    chunks: Vec<ChunkTape>,
    pub eval: BatchEval,
}

impl NeuralField {
    pub fn new(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::invalid(format!(
                "parameter vector has length {}, architecture needs {}",
                params.len(),
                arch.param_count()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(NeuralField { arch, params })
    }

    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.param_count();
        NeuralField { arch, params: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.arch.input_dim
    }

    /// Weight matrix (row-major `out x in`) and bias of affine map `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (i, o) = self.arch.layer_shapes()[l];
        let off = self.arch.offsets()[l];
        (&self.params[off..off + i * o], &self.params[off + i * o..off + i * o + o])
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.forward_batch(x)[0]
    }

    pub fn forward_with_grad(&self, x: &[f64]) -> EvalResult {
        self.eval_batch(x).get(0)
    }

    /// Values at a flat batch of points.
    pub fn forward_batch(&self, points: &[f64]) -> Vec<f64> {
        self.record(points, false).eval.values
    }

    /// Values and input gradients at a flat batch of points.
    pub fn eval_batch(&self, points: &[f64]) -> BatchEval {
        self.record(points, true).eval
    }

    /// Run the forward pass and keep what the reverse pass needs.
    pub fn record(&self, points: &[f64], with_grad: bool) -> Tape {
        let d = self.dim();
        assert_eq!(points.len() % d, 0, "flat point batch does not match the input dimension");
        let chunks: Vec<(ChunkTape, Vec<f64>, Vec<f64>)> = points
            .par_chunks(CHUNK * d)
            .map(|c| self.forward_chunk(c, with_grad))
            .collect();
        let n = points.len() / d;
        let mut eval = BatchEval {
            dim: d,
            values: Vec::with_capacity(n),
            grads: Vec::with_capacity(if with_grad { n * d } else { 0 }),
        };
        let mut tapes = Vec::with_capacity(chunks.len());
        for (tape, v, g) in chunks {
            eval.values.extend(v);
            eval.grads.extend(g);
            tapes.push(tape);
        }
        Tape { with_grad, chunks: tapes, eval }
    }

    fn forward_chunk(&self, x: &[f64], with_grad: bool) -> (ChunkTape, Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let m = x.len() / d;
        let blocks = if with_grad { 1 + d } else { 1 };
        let rows = m * blocks;
        let shapes = self.arch.layer_shapes();
        let hidden = shapes.len() - 1;

        // Value rows hold x; tangent block k holds the unit vector e_k.
        let mut input = vec![0.0; rows * d];
        input[..m * d].copy_from_slice(x);
        if with_grad {
            for k in 0..d {
                for i in 0..m {
                    input[(1 + k) * m * d + i * d + k] = 1.0;
                }
            }
        }

        let mut tape = ChunkTape { rows, inputs: Vec::with_capacity(shapes.len()), pre: vec![], d1: vec![], d2: vec![] };
        for l in 0..hidden {
            let (n_in, n_out) = shapes[l];
            let (w, b) = self.layer(l);
            let mut z = vec![0.0; rows * n_out];
            gemm_abt(rows, n_in, n_out, &input, w, &mut z);
            for i in 0..m {
                for (zj, bj) in z[i * n_out..(i + 1) * n_out].iter_mut().zip(b) {
                    *zj += bj;
                }
            }
            let mut a = vec![0.0; rows * n_out];
            let mut d1 = vec![0.0; m * n_out];
            let mut d2 = vec![0.0; m * n_out];
            let act = self.arch.activation;
            for idx in 0..m * n_out {
                let (v, s1, s2) = act.eval(z[idx]);
                a[idx] = v;
                d1[idx] = s1;
                d2[idx] = s2;
            }
            for blk in 1..blocks {
                let base = blk * m * n_out;
                for idx in 0..m * n_out {
                    a[base + idx] = d1[idx] * z[base + idx];
                }
            }
            tape.inputs.push(std::mem::replace(&mut input, a));
            tape.pre.push(z);
            tape.d1.push(d1);
            tape.d2.push(d2);
        }

        // Output map has a single row; plain dot products.
        let (n_in, _) = shapes[hidden];
        let (w, b) = self.layer(hidden);
        let dot = |r: usize| -> f64 { input[r * n_in..(r + 1) * n_in].iter().zip(w).map(|(a, b)| a * b).sum() };
        let values: Vec<f64> = (0..m).map(|i| dot(i) + b[0]).collect();
        let mut grads = Vec::new();
        if with_grad {
            grads = vec![0.0; m * d];
            for k in 0..d {
                for i in 0..m {
                    grads[i * d + k] = dot((1 + k) * m + i);
                }
            }
        }
        tape.inputs.push(input);
        (tape, values, grads)
    }

    /// Gradient of `sum_i a_i u(x_i) + b_i . grad_x u(x_i)` with respect to the
    /// parameters, for a tape recorded on the same points.
    pub fn backward(&self, tape: &Tape, adjoints: &Adjoints) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(adjoints.len(), tape.eval.len(), "adjoint count does not match the batch");
        assert_eq!(adjoints.dim, d);
        if !tape.with_grad {
            assert!(
                adjoints.d_grad.iter().all(|&g| g == 0.0),
                "gradient adjoints need a tape recorded with input gradients"
            );
        }
        let partials: Vec<Vec<f64>> = tape
            .chunks
            .par_iter()
            .enumerate()
            .map(|(c, ct)| {
                let start = c * CHUNK;
                let m = ct.rows / if tape.with_grad { 1 + d } else { 1 };
                let dv = &adjoints.d_value[start..start + m];
                let dg = &adjoints.d_grad[start * d..(start + m) * d];
                self.backward_chunk(ct, tape.with_grad, dv, dg)
            })
            .collect();
        // Fixed-order reduction.
        let mut total = vec![0.0; self.params.len()];
        for p in partials {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
        total
    }

    fn backward_chunk(&self, ct: &ChunkTape, with_grad: bool, dv: &[f64], dg: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let m = dv.len();
        let blocks = if with_grad { 1 + d } else { 1 };
        let rows = ct.rows;
        let shapes = self.arch.layer_shapes();
        let offsets = self.arch.offsets();
        let hidden = shapes.len() - 1;
        let mut grad = vec![0.0; self.params.len()];

        // Output adjoints stacked like the rows: value block, then tangents.
        let mut ybar = vec![0.0; rows];
        ybar[..m].copy_from_slice(dv);
        if with_grad {
            for k in 0..d {
                for i in 0..m {
                    ybar[(1 + k) * m + i] = dg[i * d + k];
                }
            }
        }

        let (n_in, _) = shapes[hidden];
        let off = offsets[hidden];
        let (w_out, _) = self.layer(hidden);
        let last_in = &ct.inputs[hidden];
        for (r, &y) in ybar.iter().enumerate() {
            if y != 0.0 {
                for (g, a) in grad[off..off + n_in].iter_mut().zip(&last_in[r * n_in..(r + 1) * n_in]) {
                    *g += y * a;
                }
            }
        }
        grad[off + n_in] = dv.iter().sum();
        if hidden == 0 {
            return grad;
        }
        let mut abar = vec![0.0; rows * n_in];
        for (r, &y) in ybar.iter().enumerate() {
            for (a, w) in abar[r * n_in..(r + 1) * n_in].iter_mut().zip(w_out) {
                *a = y * w;
            }
        }

        for l in (0..hidden).rev() {
            let (n_in, n_out) = shapes[l];
            let (d1, d2, z) = (&ct.d1[l], &ct.d2[l], &ct.pre[l]);
            let mut zbar = vec![0.0; rows * n_out];
            for idx in 0..m * n_out {
                let mut acc = d1[idx] * abar[idx];
                for blk in 1..blocks {
                    let t = blk * m * n_out + idx;
                    acc += d2[idx] * z[t] * abar[t];
                }
                zbar[idx] = acc;
            }
            for blk in 1..blocks {
                let base = blk * m * n_out;
                for idx in 0..m * n_out {
                    zbar[base + idx] = d1[idx] * abar[base + idx];
                }
            }
            let off = offsets[l];
            // dW += zbar^T * input, summed over every stacked row.
            gemm_atb_acc(rows, n_out, n_in, &zbar, &ct.inputs[l], &mut grad[off..off + n_in * n_out]);
            let bias = &mut grad[off + n_in * n_out..off + n_in * n_out + n_out];
            for i in 0..m {
                for (b, zb) in bias.iter_mut().zip(&zbar[i * n_out..(i + 1) * n_out]) {
                    *b += zb;
                }
            }
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut prev = vec![0.0; rows * n_in];
                gemm_ab(rows, n_out, n_in, &zbar, w, &mut prev);
                abar = prev;
            }
        }
        grad
    }

    /// Parameter gradient of `sum_i a_i u(x_i) + b_i . grad_x u(x_i)`.
    pub fn param_gradient(&self, points: &[f64], adjoints: &Adjoints) -> Vec<f64> {
        let with_grad = adjoints.d_grad.iter().any(|&g| g != 0.0);
        let tape = self.record(points, with_grad);
        self.backward(&tape, adjoints)
    }
}

/// `c = a * b^T` with `a: m x k`, `b: n x k`, both row-major.
fn gemm_abt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), k as isize, 1, b.as_ptr(), 1, k as isize, 0.0, c.as_mut_ptr(), n as isize, 1);
    }
}

/// `c += a^T * b` with `a: r x m`, `b: r x n`, `c: m x n`, all row-major.
fn gemm_atb_acc(r: usize, m: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    unsafe {
        matrixmultiply::dgemm(m, r, n, 1.0, a.as_ptr(), 1, m as isize, b.as_ptr(), n as isize, 1, 1.0, c.as_mut_ptr(), n as isize, 1);
    }
}

/// `c = a * b` with `a: m x k`, `b: k x n`, row-major.
fn gemm_ab(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), k as isize, 1, b.as_ptr(), n as isize, 1, 0.0, c.as_mut_ptr(), n as isize, 1);
    }
}

#[cfg(test)]
mod tests;
