//! Parameter tensors, sparse-embedding gradients and the Adam update.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::ModelError;

/// A dense row-major tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Self {
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.random_range(-bound..=bound)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    /// Glorot-uniform initialization for a `[fan_out, fan_in]` matrix.
    pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
        Tensor::uniform(&[rows, cols], bound, rng)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row `i` of a matrix (or of the leading axis of a higher-rank tensor).
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.data.len() / self.shape[0];
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.data.len() / self.shape[0];
        &mut self.data[i * w..(i + 1) * w]
    }

    fn zeros_like(&self) -> Self {
        Tensor::zeros(&self.shape)
    }
}

/// The four blocks of the biaffine combination: `W` is `[R, R, R]` (one
/// `R x R` matrix per output unit), `b` and `c` are `[R, R]`, `d` is `[R]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiaffineParams {
    pub w: Tensor,
    pub b: Tensor,
    pub c: Tensor,
    pub d: Tensor,
}

impl BiaffineParams {
    pub fn zeros(dim: usize) -> Self {
        BiaffineParams {
            w: Tensor::zeros(&[dim, dim, dim]),
            b: Tensor::zeros(&[dim, dim]),
            c: Tensor::zeros(&[dim, dim]),
            d: Tensor::zeros(&[dim]),
        }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }
}

/// Every parameter block except the embedding tables.
#[derive(Clone, Debug, PartialEq)]
pub struct Layers {
    pub head_w: Tensor,
    pub head_b: Tensor,
    pub dep_w: Tensor,
    pub dep_b: Tensor,
    pub biaffine: BiaffineParams,
    /// Feature used for empty stack/buffer slots (traditional systems).
    pub null_feat: Tensor,
    pub cls_w: Tensor,
    pub cls_b: Tensor,
    /// Label layers for arcs pointing left / right (arc-swift).
    pub left_w: Tensor,
    pub left_b: Tensor,
    pub right_w: Tensor,
    pub right_b: Tensor,
    pub shift_u: Tensor,
}

impl Layers {
    pub const NAMES: [&'static str; 16] = [
        "head_w",
        "head_b",
        "dep_w",
        "dep_b",
        "biaffine_w",
        "biaffine_b",
        "biaffine_c",
        "biaffine_d",
        "null_feat",
        "cls_w",
        "cls_b",
        "left_w",
        "left_b",
        "right_w",
        "right_b",
        "shift_u",
    ];

    pub fn tensors(&self) -> [&Tensor; 16] {
        [
            &self.head_w,
            &self.head_b,
            &self.dep_w,
            &self.dep_b,
            &self.biaffine.w,
            &self.biaffine.b,
            &self.biaffine.c,
            &self.biaffine.d,
            &self.null_feat,
            &self.cls_w,
            &self.cls_b,
            &self.left_w,
            &self.left_b,
            &self.right_w,
            &self.right_b,
            &self.shift_u,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 16] {
        [
            &mut self.head_w,
            &mut self.head_b,
            &mut self.dep_w,
            &mut self.dep_b,
            &mut self.biaffine.w,
            &mut self.biaffine.b,
            &mut self.biaffine.c,
            &mut self.biaffine.d,
            &mut self.null_feat,
            &mut self.cls_w,
            &mut self.cls_b,
            &mut self.left_w,
            &mut self.left_b,
            &mut self.right_w,
            &mut self.right_b,
            &mut self.shift_u,
        ]
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = 0.0);
        }
        z
    }

    fn add_assign(&mut self, other: &Layers) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += y);
        }
    }

    fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// All trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub word_emb: Tensor,
    pub pos_emb: Tensor,
    pub layers: Layers,
}

impl Params {
    /// `(name, tensor)` pairs in serialization order.
    pub fn named(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = vec![("word_emb", &self.word_emb), ("pos_emb", &self.pos_emb)];
        v.extend(Layers::NAMES.into_iter().zip(self.layers.tensors()));
        v
    }

    pub fn named_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut v = vec![
            ("word_emb", &mut self.word_emb),
            ("pos_emb", &mut self.pos_emb),
        ];
        v.extend(Layers::NAMES.into_iter().zip(self.layers.tensors_mut()));
        v
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            word_emb: self.word_emb.zeros_like(),
            pos_emb: self.pos_emb.zeros_like(),
            layers: self.layers.zeros_like(),
        }
    }
}

/// Gradients with sparse rows for the embedding tables.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub word_rows: BTreeMap<usize, Vec<f64>>,
    pub pos_rows: BTreeMap<usize, Vec<f64>>,
    pub layers: Layers,
}

impl Gradients {
    pub fn zeros_like(params: &Params) -> Self {
        Gradients {
            word_rows: BTreeMap::new(),
            pos_rows: BTreeMap::new(),
            layers: params.layers.zeros_like(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        merge_rows(&mut self.word_rows, &other.word_rows);
        merge_rows(&mut self.pos_rows, &other.pos_rows);
        self.layers.add_assign(&other.layers);
    }

    pub fn scale(&mut self, s: f64) {
        for row in self
            .word_rows
            .values_mut()
            .chain(self.pos_rows.values_mut())
        {
            row.iter_mut().for_each(|x| *x *= s);
        }
        self.layers.scale(s);
    }

    /// Dense view of one embedding gradient, mainly for tests.
    pub fn dense_rows(rows: &BTreeMap<usize, Vec<f64>>, table: &Tensor) -> Tensor {
        let mut t = table.zeros_like();
        for (&r, g) in rows {
            t.row_mut(r).copy_from_slice(g);
        }
        t
    }

    fn check_finite(&self) -> Result<(), ModelError> {
        if self.word_rows.values().flatten().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite("word_emb".into()));
        }
        if self.pos_rows.values().flatten().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite("pos_emb".into()));
        }
        for (name, t) in Layers::NAMES.iter().zip(self.layers.tensors()) {
            if let Some(i) = t.data.iter().position(|x| !x.is_finite()) {
                return Err(ModelError::NonFinite(format!(
                    "{}[{}] = {}",
                    name, i, t.data[i]
                )));
            }
        }
        Ok(())
    }
}

fn merge_rows(into: &mut BTreeMap<usize, Vec<f64>>, from: &BTreeMap<usize, Vec<f64>>) {
    for (&r, g) in from {
        match into.get_mut(&r) {
            Some(row) => row.iter_mut().zip(g).for_each(|(x, y)| *x += y),
            None => {
                into.insert(r, g.clone());
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators shaped like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Params,
    pub v: Params,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &Params) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update over every parameter.
///
/// Embedding rows absent from the sparse gradient are updated with a zero
/// gradient, so their moments keep decaying exactly as in dense Adam.
pub fn adam_step(
    params: &mut Params,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &AdamConfig,
    lr: f64,
) -> Result<(), ModelError> {
    grads.check_finite()?;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let update = |theta: &mut [f64], g: &dyn Fn(usize) -> f64, m: &mut [f64], v: &mut [f64]| {
        for i in 0..theta.len() {
            let gi = g(i);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    };

    for (table, mt, vt, rows) in [
        (
            &mut params.word_emb,
            &mut state.m.word_emb,
            &mut state.v.word_emb,
            &grads.word_rows,
        ),
        (
            &mut params.pos_emb,
            &mut state.m.pos_emb,
            &mut state.v.pos_emb,
            &grads.pos_rows,
        ),
    ] {
        let width = table.len() / table.shape[0].max(1);
        let g = |i: usize| rows.get(&(i / width)).map_or(0.0, |r| r[i % width]);
        update(&mut table.data, &g, &mut mt.data, &mut vt.data);
    }
    let grads_layers = grads.layers.tensors();
    let m_layers = state.m.layers.tensors_mut();
    let v_layers = state.v.layers.tensors_mut();
    for (((theta, g), m), v) in params
        .layers
        .tensors_mut()
        .into_iter()
        .zip(grads_layers)
        .zip(m_layers)
        .zip(v_layers)
    {
        if theta.shape != g.shape {
            return Err(ModelError::Shape {
                name: "gradient".into(),
                expected: theta.shape.clone(),
                found: g.shape.clone(),
            });
        }
        update(&mut theta.data, &|i| g.data[i], &mut m.data, &mut v.data);
    }
    Ok(())
}
