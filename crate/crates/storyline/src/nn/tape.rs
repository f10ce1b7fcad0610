//! Reverse-mode automatic differentiation over `f64` vectors.
//!
//! Every model in this crate builds its forward pass on a [`Tape`]; one
//! `backward` call then yields exact analytic gradients for all parameters,
//! which is what keeps the finite-difference checks in `grad_check` tight.
//! Desk-scale sizes make the node-per-op representation affordable.

use super::tensor::{ParamId, ParamSet};

/// Probability clamp applied before logs in the loss ops.
pub const PROB_EPS: f64 = 1e-7;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// Parameter leaf; the tape's binding list maps it back to its [`ParamId`].
    Param,
    /// Row `row` of parent viewed as a matrix with `cols` columns.
    Row { src: usize, row: usize, cols: usize },
    MatVec { m: usize, x: usize, rows: usize, cols: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    AddMany(Vec<usize>),
    Scale { x: usize, c: f64 },
    Concat(Vec<usize>),
    Sigmoid { x: usize },
    Tanh { x: usize },
    Softmax { x: usize },
    Dot { a: usize, b: usize },
    Pick { x: usize, index: usize },
    Gauss { x: usize, mu: f64, sigma: f64 },
    RsqrtClamped { x: usize, min: f64 },
    WeightedSum { weights: usize, states: Vec<usize> },
    Bce { p: usize, target: f64 },
    Ce { dist: usize, class: usize },
}

struct Node {
    value: Vec<f64>,
    grad: Vec<f64>,
    op: Op,
}

/// Computation tape: append-only forward graph plus a reverse sweep.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bindings: Vec<(usize, ParamId)>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        let grad = vec![0.0; value.len()];
        self.nodes.push(Node { value, grad, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].grad
    }

    pub fn scalar(&self, v: Var) -> f64 {
        debug_assert_eq!(self.nodes[v.0].value.len(), 1);
        self.nodes[v.0].value[0]
    }

    pub fn len(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    // ---- node constructors ----

    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.leaf(vec![0.0; n])
    }

    /// Bind a parameter as a leaf; its gradient is collected by
    /// [`Tape::apply_grads`] after the backward sweep.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        let value = params.get(id).value.data.clone();
        let v = self.push(value, Op::Param);
        self.bindings.push((v.0, id));
        v
    }

    /// Row slice of a matrix-shaped node (used for embedding lookup).
    pub fn row(&mut self, m: Var, row: usize, cols: usize) -> Var {
        let start = row * cols;
        let value = self.nodes[m.0].value[start..start + cols].to_vec();
        self.push(value, Op::Row { src: m.0, row, cols })
    }

    /// `y = M x` where `m` holds a `rows x cols` matrix and `x` has len `cols`.
    pub fn matvec(&mut self, m: Var, x: Var, rows: usize, cols: usize) -> Var {
        debug_assert_eq!(self.nodes[m.0].value.len(), rows * cols);
        debug_assert_eq!(self.nodes[x.0].value.len(), cols);
        let mv = &self.nodes[m.0].value;
        let xv = &self.nodes[x.0].value;
        let mut y = vec![0.0; rows];
        for r in 0..rows {
            let row = &mv[r * cols..(r + 1) * cols];
            y[r] = row.iter().zip(xv).map(|(w, x)| w * x).sum();
        }
        self.push(y, Op::MatVec { m: m.0, x: x.0, rows, cols })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = zip_with(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x + y);
        self.push(value, Op::Add { a: a.0, b: b.0 })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = zip_with(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x - y);
        self.push(value, Op::Sub { a: a.0, b: b.0 })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = zip_with(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x * y);
        self.push(value, Op::Mul { a: a.0, b: b.0 })
    }

    pub fn add_many(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty());
        let n = self.nodes[xs[0].0].value.len();
        let mut value = vec![0.0; n];
        for x in xs {
            for (acc, v) in value.iter_mut().zip(&self.nodes[x.0].value) {
                *acc += v;
            }
        }
        self.push(value, Op::AddMany(xs.iter().map(|v| v.0).collect()))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let value: Vec<f64> = self.nodes[x.0].value.iter().map(|v| v * c).collect();
        self.push(value, Op::Scale { x: x.0, c })
    }

    pub fn mean_many(&mut self, xs: &[Var]) -> Var {
        let s = self.add_many(xs);
        self.scale(s, 1.0 / xs.len() as f64)
    }

    pub fn concat(&mut self, xs: &[Var]) -> Var {
        let mut value = Vec::new();
        for x in xs {
            value.extend_from_slice(&self.nodes[x.0].value);
        }
        self.push(value, Op::Concat(xs.iter().map(|v| v.0).collect()))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value: Vec<f64> = self.nodes[x.0].value.iter().map(|v| sigmoid(*v)).collect();
        self.push(value, Op::Sigmoid { x: x.0 })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value: Vec<f64> = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        self.push(value, Op::Tanh { x: x.0 })
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let value = softmax_slice(&self.nodes[x.0].value);
        self.push(value, Op::Softmax { x: x.0 })
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let value: f64 = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x * y)
            .sum();
        self.push(vec![value], Op::Dot { a: a.0, b: b.0 })
    }

    pub fn pick(&mut self, x: Var, index: usize) -> Var {
        let value = self.nodes[x.0].value[index];
        self.push(vec![value], Op::Pick { x: x.0, index })
    }

    /// Gaussian kernel response `exp(-(x - mu)^2 / (2 sigma^2))` on a scalar node.
    pub fn gauss(&mut self, x: Var, mu: f64, sigma: f64) -> Var {
        let xv = self.nodes[x.0].value[0];
        let d = xv - mu;
        let value = (-d * d / (2.0 * sigma * sigma)).exp();
        self.push(vec![value], Op::Gauss { x: x.0, mu, sigma })
    }

    /// `1 / sqrt(max(x, min))` on a scalar node; the clamp keeps zero-norm
    /// embeddings from producing infinities.
    pub fn rsqrt_clamped(&mut self, x: Var, min: f64) -> Var {
        let xv = self.nodes[x.0].value[0];
        let value = 1.0 / xv.max(min).sqrt();
        self.push(vec![value], Op::RsqrtClamped { x: x.0, min })
    }

    /// `sum_i weights[i] * states[i]`; `weights` has one entry per state.
    pub fn weighted_sum(&mut self, weights: Var, states: &[Var]) -> Var {
        debug_assert_eq!(self.nodes[weights.0].value.len(), states.len());
        let n = self.nodes[states[0].0].value.len();
        let mut value = vec![0.0; n];
        for (i, s) in states.iter().enumerate() {
            let w = self.nodes[weights.0].value[i];
            for (acc, v) in value.iter_mut().zip(&self.nodes[s.0].value) {
                *acc += w * v;
            }
        }
        self.push(
            value,
            Op::WeightedSum { weights: weights.0, states: states.iter().map(|v| v.0).collect() },
        )
    }

    /// Binary cross-entropy of a scalar probability node against a 0/1 target,
    /// with the probability clamped to [PROB_EPS, 1 - PROB_EPS].
    pub fn bce(&mut self, p: Var, target: f64) -> Var {
        let pv = self.nodes[p.0].value[0].clamp(PROB_EPS, 1.0 - PROB_EPS);
        let value = -(target * pv.ln() + (1.0 - target) * (1.0 - pv).ln());
        self.push(vec![value], Op::Bce { p: p.0, target })
    }

    /// Cross-entropy `-ln dist[class]` with the picked probability clamped
    /// below at PROB_EPS.
    pub fn cross_entropy(&mut self, dist: Var, class: usize) -> Var {
        let pv = self.nodes[dist.0].value[class].max(PROB_EPS);
        self.push(vec![-pv.ln()], Op::Ce { dist: dist.0, class })
    }

    /// `W x + b` where `w` is `rows x cols`.
    pub fn affine(&mut self, w: Var, x: Var, b: Var, rows: usize, cols: usize) -> Var {
        let y = self.matvec(w, x, rows, cols);
        self.add(y, b)
    }

    // ---- reverse sweep ----

    /// Backpropagate from a scalar node. May be called once per tape.
    pub fn backward(&mut self, seed: Var) {
        assert_eq!(self.nodes[seed.0].value.len(), 1, "backward needs a scalar");
        self.nodes[seed.0].grad[0] = 1.0;
        for i in (0..self.nodes.len()).rev() {
            if self.nodes[i].grad.iter().all(|g| *g == 0.0) {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let grad = std::mem::take(&mut self.nodes[i].grad);
            match op {
                Op::Leaf | Op::Param => {}
                Op::Row { src, row, cols } => {
                    let start = row * cols;
                    for (k, g) in grad.iter().enumerate() {
                        self.nodes[src].grad[start + k] += g;
                    }
                }
                Op::MatVec { m, x, rows, cols } => {
                    let xv = self.nodes[x].value.clone();
                    let mv = self.nodes[m].value.clone();
                    for r in 0..rows {
                        let g = grad[r];
                        if g == 0.0 {
                            continue;
                        }
                        for c in 0..cols {
                            self.nodes[m].grad[r * cols + c] += g * xv[c];
                            self.nodes[x].grad[c] += g * mv[r * cols + c];
                        }
                    }
                }
                Op::Add { a, b } => {
                    accumulate(&mut self.nodes[a].grad, &grad, 1.0);
                    accumulate(&mut self.nodes[b].grad, &grad, 1.0);
                }
                Op::Sub { a, b } => {
                    accumulate(&mut self.nodes[a].grad, &grad, 1.0);
                    accumulate(&mut self.nodes[b].grad, &grad, -1.0);
                }
                Op::Mul { a, b } => {
                    let av = self.nodes[a].value.clone();
                    let bv = self.nodes[b].value.clone();
                    for (k, g) in grad.iter().enumerate() {
                        self.nodes[a].grad[k] += g * bv[k];
                        self.nodes[b].grad[k] += g * av[k];
                    }
                }
                Op::AddMany(xs) => {
                    for x in xs {
                        accumulate(&mut self.nodes[x].grad, &grad, 1.0);
                    }
                }
                Op::Scale { x, c } => {
                    accumulate(&mut self.nodes[x].grad, &grad, c);
                }
                Op::Concat(xs) => {
                    let mut offset = 0;
                    for x in xs {
                        let n = self.nodes[x].value.len();
                        for k in 0..n {
                            self.nodes[x].grad[k] += grad[offset + k];
                        }
                        offset += n;
                    }
                }
                Op::Sigmoid { x } => {
                    let yv = self.nodes[i].value.clone();
                    for (k, g) in grad.iter().enumerate() {
                        self.nodes[x].grad[k] += g * yv[k] * (1.0 - yv[k]);
                    }
                }
                Op::Tanh { x } => {
                    let yv = self.nodes[i].value.clone();
                    for (k, g) in grad.iter().enumerate() {
                        self.nodes[x].grad[k] += g * (1.0 - yv[k] * yv[k]);
                    }
                }
                Op::Softmax { x } => {
                    let yv = self.nodes[i].value.clone();
                    let dot: f64 = grad.iter().zip(&yv).map(|(g, y)| g * y).sum();
                    for (k, g) in grad.iter().enumerate() {
                        self.nodes[x].grad[k] += yv[k] * (g - dot);
                    }
                }
                Op::Dot { a, b } => {
                    let g = grad[0];
                    let av = self.nodes[a].value.clone();
                    let bv = self.nodes[b].value.clone();
                    for k in 0..av.len() {
                        self.nodes[a].grad[k] += g * bv[k];
                        self.nodes[b].grad[k] += g * av[k];
                    }
                }
                Op::Pick { x, index } => {
                    self.nodes[x].grad[index] += grad[0];
                }
                Op::Gauss { x, mu, sigma } => {
                    let xv = self.nodes[x].value[0];
                    let yv = self.nodes[i].value[0];
                    self.nodes[x].grad[0] += grad[0] * yv * (-(xv - mu) / (sigma * sigma));
                }
                Op::RsqrtClamped { x, min } => {
                    let xv = self.nodes[x].value[0];
                    if xv > min {
                        self.nodes[x].grad[0] += grad[0] * (-0.5 * xv.powf(-1.5));
                    }
                }
                Op::WeightedSum { weights, states } => {
                    let wv = self.nodes[weights].value.clone();
                    for (si, s) in states.iter().enumerate() {
                        let sv = self.nodes[*s].value.clone();
                        let mut wg = 0.0;
                        for (k, g) in grad.iter().enumerate() {
                            self.nodes[*s].grad[k] += wv[si] * g;
                            wg += g * sv[k];
                        }
                        self.nodes[weights].grad[si] += wg;
                    }
                }
                Op::Bce { p, target } => {
                    let pv = self.nodes[p].value[0];
                    if pv > PROB_EPS && pv < 1.0 - PROB_EPS {
                        let d = -(target / pv - (1.0 - target) / (1.0 - pv));
                        self.nodes[p].grad[0] += grad[0] * d;
                    }
                }
                Op::Ce { dist, class } => {
                    let pv = self.nodes[dist].value[class];
                    if pv > PROB_EPS {
                        self.nodes[dist].grad[class] += grad[0] * (-1.0 / pv);
                    }
                }
            }
            self.nodes[i].grad = grad;
        }
    }

    /// Add this tape's parameter gradients into the parameter set.
    pub fn apply_grads(&self, params: &mut ParamSet) {
        for (node, id) in &self.bindings {
            let grad = &self.nodes[*node].grad;
            let acc = &mut params.get_mut(*id).grad.data;
            for (a, g) in acc.iter_mut().zip(grad) {
                *a += g;
            }
        }
    }
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

fn accumulate(acc: &mut [f64], grad: &[f64], scale: f64) {
    for (a, g) in acc.iter_mut().zip(grad) {
        *a += g * scale;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = ex.iter().sum();
    ex.iter().map(|v| v / s).collect()
}
