//! The transition scorer: windowed embeddings, head/dependent projections,
//! the biaffine combination and the per-system output layers, with an exact
//! reverse pass.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{BiaffineParams, Gradients, Layers, Params, Tensor};
use crate::error::ModelError;
use crate::transition::{Action, ParserState, SystemId, Transition};
use crate::treebank::{LabelId, LabelVocab, Sentence};

pub const PAD: usize = 0;
pub const ROOT: usize = 1;
pub const UNK: usize = 2;
const RESERVED: [&str; 3] = ["<PAD>", "<ROOT>", "<UNK>"];

/// Word, POS and label inventories. Rows 0..3 of both embedding tables are
/// the PAD, ROOT and UNK rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    words: Vec<String>,
    word_index: HashMap<String, usize>,
    tags: Vec<String>,
    tag_index: HashMap<String, usize>,
    pub labels: LabelVocab,
}

impl Lexicon {
    pub fn new(words: Vec<String>, tags: Vec<String>, labels: LabelVocab) -> Self {
        let index = |v: &[String]| v.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Lexicon {
            word_index: index(&words),
            tag_index: index(&tags),
            words,
            tags,
            labels,
        }
    }

    pub fn from_corpus(corpus: &[Sentence]) -> Self {
        let words: BTreeSet<&str> = corpus
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.form.as_str()))
            .collect();
        let tags: BTreeSet<&str> = corpus
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.pos()))
            .collect();
        let with_reserved = |set: BTreeSet<&str>| {
            RESERVED
                .iter()
                .copied()
                .chain(set.into_iter().filter(|w| !RESERVED.contains(w)))
                .map(String::from)
                .collect::<Vec<_>>()
        };
        Lexicon::new(
            with_reserved(words),
            with_reserved(tags),
            LabelVocab::from_corpus(corpus),
        )
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn word_row(&self, form: &str) -> usize {
        self.word_index.get(form).copied().unwrap_or(UNK)
    }

    pub fn tag_row(&self, tag: &str) -> usize {
        self.tag_index.get(tag).copied().unwrap_or(UNK)
    }
}

/// Layer sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub word_dim: usize,
    pub pos_dim: usize,
    /// Tokens on each side of the centre token fed to the projections.
    pub window: usize,
    /// Size of the head/dependent representations and of the biaffine output.
    pub repr_dim: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            word_dim: 50,
            pos_dim: 16,
            window: 2,
            repr_dim: 32,
        }
    }
}

impl ModelDims {
    pub fn input_dim(&self) -> usize {
        (2 * self.window + 1) * (self.word_dim + self.pos_dim)
    }
}

/// Head and dependent representations of one token.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenRepr {
    pub head: Vec<f64>,
    pub dep: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScorerModel {
    pub system: SystemId,
    pub dims: ModelDims,
    pub lexicon: Lexicon,
    pub params: Params,
}

/// Number of output classes of the traditional-system classifier:
/// Shift, Reduce, then one LArc and one RArc class per label.
fn class_count(labels: usize) -> usize {
    2 + 2 * labels
}

impl ScorerModel {
    pub fn new(system: SystemId, lexicon: Lexicon, dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = dims.repr_dim;
        let x = dims.input_dim();
        let labels = lexicon.labels.len();
        let classes = class_count(labels);
        let word_emb = Tensor::uniform(&[lexicon.words.len(), dims.word_dim], 0.5, &mut rng);
        let pos_emb = Tensor::uniform(&[lexicon.tags.len(), dims.pos_dim], 0.5, &mut rng);
        let biaffine = BiaffineParams {
            w: Tensor::uniform(&[r, r, r], 0.1, &mut rng),
            b: Tensor::uniform(&[r, r], (3.0 / r as f64).sqrt(), &mut rng),
            c: Tensor::uniform(&[r, r], (3.0 / r as f64).sqrt(), &mut rng),
            d: Tensor::filled(&[r], 0.1),
        };
        let layers = Layers {
            head_w: Tensor::glorot(r, x, &mut rng),
            head_b: Tensor::filled(&[r], 0.05),
            dep_w: Tensor::glorot(r, x, &mut rng),
            dep_b: Tensor::filled(&[r], 0.05),
            biaffine,
            null_feat: Tensor::uniform(&[r], 0.1, &mut rng),
            cls_w: Tensor::glorot(classes, 4 * r, &mut rng),
            cls_b: Tensor::zeros(&[classes]),
            left_w: Tensor::glorot(labels, r, &mut rng),
            left_b: Tensor::zeros(&[labels]),
            right_w: Tensor::glorot(labels, r, &mut rng),
            right_b: Tensor::zeros(&[labels]),
            shift_u: Tensor::glorot(1, r, &mut rng),
        };
        ScorerModel {
            system,
            dims,
            lexicon,
            params: Params {
                word_emb,
                pos_emb,
                layers,
            },
        }
    }

    /// Expected tensor shapes, in serialization order.
    pub fn expected_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let d = &self.dims;
        let (r, x) = (d.repr_dim, d.input_dim());
        let labels = self.lexicon.labels.len();
        let classes = class_count(labels);
        vec![
            ("word_emb", vec![self.lexicon.words.len(), d.word_dim]),
            ("pos_emb", vec![self.lexicon.tags.len(), d.pos_dim]),
            ("head_w", vec![r, x]),
            ("head_b", vec![r]),
            ("dep_w", vec![r, x]),
            ("dep_b", vec![r]),
            ("biaffine_w", vec![r, r, r]),
            ("biaffine_b", vec![r, r]),
            ("biaffine_c", vec![r, r]),
            ("biaffine_d", vec![r]),
            ("null_feat", vec![r]),
            ("cls_w", vec![classes, 4 * r]),
            ("cls_b", vec![classes]),
            ("left_w", vec![labels, r]),
            ("left_b", vec![labels]),
            ("right_w", vec![labels, r]),
            ("right_b", vec![labels]),
            ("shift_u", vec![1, r]),
        ]
    }

    /// Embedding rows for a sentence: index 0 is the ROOT row.
    pub fn input_rows(&self, sentence: &Sentence) -> (Vec<usize>, Vec<usize>) {
        let words = std::iter::once(ROOT)
            .chain(
                sentence
                    .tokens
                    .iter()
                    .map(|t| self.lexicon.word_row(&t.form)),
            )
            .collect();
        let tags = std::iter::once(ROOT)
            .chain(
                sentence
                    .tokens
                    .iter()
                    .map(|t| self.lexicon.tag_row(t.pos())),
            )
            .collect();
        (words, tags)
    }

    /// Head/dependent representation of token `index` (0 = root), without dropout.
    pub fn token_repr(&self, sentence: &Sentence, index: usize) -> Result<TokenRepr, ModelError> {
        if index > sentence.len() {
            return Err(ModelError::TokenIndex {
                index,
                n: sentence.len(),
            });
        }
        let (words, tags) = self.input_rows(sentence);
        let x = window_input(&self.params, &self.dims, &words, &tags, index);
        let l = &self.params.layers;
        let head = affine(&l.head_w, &l.head_b, &x)
            .into_iter()
            .map(relu)
            .collect();
        let dep = affine(&l.dep_w, &l.dep_b, &x)
            .into_iter()
            .map(relu)
            .collect();
        Ok(TokenRepr { head, dep })
    }

    /// Probability of every feasible labeled transition (evaluation mode).
    pub fn score_transitions(
        &self,
        state: &ParserState,
        sentence: &Sentence,
        system: SystemId,
    ) -> Result<Vec<(Transition, f64)>, ModelError> {
        self.check_system(system)?;
        let mut tape = Tape::new(self, sentence, None);
        let step = tape.score(state)?;
        Ok(step
            .candidates
            .iter()
            .copied()
            .zip(step.probs.iter().copied())
            .collect())
    }

    /// Negative log-likelihood of an oracle sequence and its exact gradient.
    ///
    /// With `train` set, dropout and UNK replacement are applied using a
    /// generator seeded from `seed`; otherwise the computation is deterministic
    /// and `seed` is unused.
    pub fn loss_and_gradient(
        &self,
        sentence: &Sentence,
        oracle_seq: &[Transition],
        system: SystemId,
        train: Option<Regularization>,
        seed: u64,
    ) -> Result<(f64, Gradients), ModelError> {
        self.check_system(system)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tape = Tape::new(self, sentence, train.map(|r| (r, &mut rng)));
        let mut state = ParserState::initial(sentence.len())?;
        let mut nll = 0.0;
        let mut steps = Vec::with_capacity(oracle_seq.len());
        for &t in oracle_seq {
            let step = tape.score(&state)?;
            let gold =
                step.candidates
                    .iter()
                    .position(|&c| c == t)
                    .ok_or(ModelError::Transition(
                        crate::error::TransitionError::Infeasible {
                            action: t.action(),
                            system,
                            reason: "oracle transition is not among the feasible candidates",
                        },
                    ))?;
            nll -= step.log_probs[gold];
            steps.push((step, gold));
            state.apply_mut(system, t)?;
        }
        let grads = tape.backward(&steps);
        Ok((nll, grads))
    }

    fn check_system(&self, system: SystemId) -> Result<(), ModelError> {
        if system != self.system {
            return Err(ModelError::SystemMismatch {
                model: self.system,
                requested: system,
            });
        }
        Ok(())
    }
}

/// Training-time noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularization {
    pub dropout: f64,
    pub unk_replace: f64,
}

/// Evaluates the biaffine combination `ReLU(hᵀ W_i d + b_iᵀ h + c_iᵀ d + d_i)`
/// for every output unit `i`.
pub fn biaffine_combine(
    v_head: &[f64],
    v_dep: &[f64],
    p: &BiaffineParams,
) -> Result<Vec<f64>, ModelError> {
    let r = p.dim();
    let shape_ok = p.w.shape == [r, r, r] && p.b.shape == [r, r] && p.c.shape == [r, r];
    if v_head.len() != r || v_dep.len() != r || !shape_ok {
        return Err(ModelError::Shape {
            name: "biaffine input".into(),
            expected: vec![r],
            found: vec![v_head.len(), v_dep.len()],
        });
    }
    Ok(biaffine_pre(v_head, v_dep, p)
        .into_iter()
        .map(relu)
        .collect())
}

fn biaffine_pre(h: &[f64], d: &[f64], p: &BiaffineParams) -> Vec<f64> {
    let r = p.dim();
    (0..r)
        .map(|i| {
            let w = &p.w.data[i * r * r..(i + 1) * r * r];
            let mut s = p.d.data[i] + dot(p.b.row(i), h) + dot(p.c.row(i), d);
            for a in 0..r {
                if h[a] != 0.0 {
                    s += h[a] * dot(&w[a * r..(a + 1) * r], d);
                }
            }
            s
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn affine(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    (0..w.shape[0])
        .map(|i| b.data[i] + dot(w.row(i), x))
        .collect()
}

fn window_input(
    p: &Params,
    dims: &ModelDims,
    words: &[usize],
    tags: &[usize],
    index: usize,
) -> Vec<f64> {
    let mut x = Vec::with_capacity(dims.input_dim());
    for (wr, tr) in window_rows(words, tags, index, dims.window) {
        x.extend_from_slice(p.word_emb.row(wr));
        x.extend_from_slice(p.pos_emb.row(tr));
    }
    x
}

fn window_rows(
    words: &[usize],
    tags: &[usize],
    index: usize,
    window: usize,
) -> Vec<(usize, usize)> {
    let n = words.len() - 1;
    (index as isize - window as isize..=(index + window) as isize)
        .map(|p| {
            if p < 0 || p as usize > n {
                (PAD, PAD)
            } else {
                (words[p as usize], tags[p as usize])
            }
        })
        .collect()
}

/// Candidate scores for one state.
#[derive(Clone, Debug)]
pub struct StepScores {
    pub candidates: Vec<Transition>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Number of unlabeled feasible transitions behind `candidates`.
    pub skeletons: usize,
    sources: Vec<Source>,
    slots: Option<[Option<usize>; 4]>,
}

#[derive(Clone, Copy, Debug)]
enum Source {
    Class(usize),
    Arc {
        feat: usize,
        left: bool,
        label: usize,
    },
    Shift {
        feat: usize,
    },
}

struct TokenCache {
    x: Vec<f64>,
    head_pre: Vec<f64>,
    dep_pre: Vec<f64>,
    head_mask: Vec<f64>,
    dep_mask: Vec<f64>,
    head: Vec<f64>,
    dep: Vec<f64>,
}

struct FeatCache {
    head_tok: usize,
    dep_tok: usize,
    pre: Vec<f64>,
    mask: Vec<f64>,
    out: Vec<f64>,
}

/// Forward activations for one sentence, reused across parser states and
/// consumed by the reverse pass.
pub struct Tape<'m, 'r> {
    model: &'m ScorerModel,
    words: Vec<usize>,
    tags: Vec<usize>,
    tokens: Vec<TokenCache>,
    feats: Vec<FeatCache>,
    feat_index: HashMap<(usize, usize), usize>,
    noise: Option<(Regularization, &'r mut ChaCha8Rng)>,
}

impl<'m, 'r> Tape<'m, 'r> {
    pub fn new(
        model: &'m ScorerModel,
        sentence: &Sentence,
        mut noise: Option<(Regularization, &'r mut ChaCha8Rng)>,
    ) -> Self {
        let (mut words, tags) = model.input_rows(sentence);
        if let Some((reg, rng)) = noise.as_mut() {
            for w in words.iter_mut().skip(1) {
                if reg.unk_replace > 0.0 && rng.random_bool(reg.unk_replace) {
                    *w = UNK;
                }
            }
        }
        let mut tape = Tape {
            model,
            words,
            tags,
            tokens: Vec::with_capacity(sentence.len() + 1),
            feats: Vec::new(),
            feat_index: HashMap::new(),
            noise,
        };
        for t in 0..=sentence.len() {
            let tc = tape.encode_token(t);
            tape.tokens.push(tc);
        }
        tape
    }

    fn dropout_mask(&mut self, len: usize) -> Vec<f64> {
        match self.noise.as_mut() {
            Some((reg, rng)) if reg.dropout > 0.0 => {
                let keep = 1.0 - reg.dropout;
                (0..len)
                    .map(|_| {
                        if rng.random_bool(reg.dropout) {
                            0.0
                        } else {
                            1.0 / keep
                        }
                    })
                    .collect()
            }
            _ => vec![1.0; len],
        }
    }

    fn encode_token(&mut self, t: usize) -> TokenCache {
        let p = &self.model.params;
        let x = window_input(p, &self.model.dims, &self.words, &self.tags, t);
        let head_pre = affine(&p.layers.head_w, &p.layers.head_b, &x);
        let dep_pre = affine(&p.layers.dep_w, &p.layers.dep_b, &x);
        let r = head_pre.len();
        let head_mask = self.dropout_mask(r);
        let dep_mask = self.dropout_mask(r);
        let head = head_pre
            .iter()
            .zip(&head_mask)
            .map(|(&z, m)| relu(z) * m)
            .collect();
        let dep = dep_pre
            .iter()
            .zip(&dep_mask)
            .map(|(&z, m)| relu(z) * m)
            .collect();
        TokenCache {
            x,
            head_pre,
            dep_pre,
            head_mask,
            dep_mask,
            head,
            dep,
        }
    }

    /// Index of the biaffine feature for the (head token, dependent token) pair.
    fn feature(&mut self, head_tok: usize, dep_tok: usize) -> usize {
        if let Some(&i) = self.feat_index.get(&(head_tok, dep_tok)) {
            return i;
        }
        let pre = biaffine_pre(
            &self.tokens[head_tok].head,
            &self.tokens[dep_tok].dep,
            &self.model.params.layers.biaffine,
        );
        let mask = self.dropout_mask(pre.len());
        let out = pre.iter().zip(&mask).map(|(&z, m)| relu(z) * m).collect();
        let i = self.feats.len();
        self.feats.push(FeatCache {
            head_tok,
            dep_tok,
            pre,
            mask,
            out,
        });
        self.feat_index.insert((head_tok, dep_tok), i);
        i
    }

    /// Scores every feasible labeled transition of `state`.
    pub fn score(&mut self, state: &ParserState) -> Result<StepScores, ModelError> {
        let system = self.model.system;
        if state.is_terminal(system) {
            return Err(ModelError::Terminal);
        }
        let actions = state.feasible(system);
        if actions.is_empty() {
            return Err(ModelError::Terminal);
        }
        let labels = self.model.lexicon.labels.len();
        let mut candidates = Vec::new();
        let mut sources = Vec::new();
        let mut logits = Vec::new();
        let mut slots = None;

        if system == SystemId::ArcSwift {
            let front = state
                .buffer_front()
                .expect("non-terminal arc-swift state has a buffer");
            for &a in &actions {
                match a {
                    Action::Shift => {
                        let feat = self.feature(front, front);
                        let score = dot(
                            &self.model.params.layers.shift_u.data,
                            &self.feats[feat].out,
                        );
                        candidates.push(Transition::Shift);
                        sources.push(Source::Shift { feat });
                        logits.push(score);
                    }
                    Action::LeftArcK(k) | Action::RightArcK(k) => {
                        let item = state.stack_item(k).expect("feasible k");
                        let left = a.is_left();
                        let feat = if left {
                            self.feature(front, item)
                        } else {
                            self.feature(item, front)
                        };
                        let l = &self.model.params.layers;
                        let (w, b) = if left {
                            (&l.left_w, &l.left_b)
                        } else {
                            (&l.right_w, &l.right_b)
                        };
                        let out = &self.feats[feat].out;
                        for label in 0..labels {
                            candidates.push(a.with_label(LabelId(label as u32)));
                            sources.push(Source::Arc { feat, left, label });
                            logits.push(b.data[label] + dot(w.row(label), out));
                        }
                    }
                    _ => unreachable!("arc-swift has no {:?}", a),
                }
            }
        } else {
            let stack = state.stack();
            let pick = |k: usize| (k <= stack.len()).then(|| stack[stack.len() - k]);
            let slot_tokens = [pick(3), pick(2), pick(1), state.buffer_front()];
            let mut slot_feats = [None; 4];
            for (slot, tok) in slot_feats.iter_mut().zip(slot_tokens) {
                *slot = tok.map(|t| self.feature(t, t));
            }
            let r = self.model.dims.repr_dim;
            let mut z = Vec::with_capacity(4 * r);
            for slot in slot_feats {
                match slot {
                    Some(f) => z.extend_from_slice(&self.feats[f].out),
                    None => z.extend_from_slice(&self.model.params.layers.null_feat.data),
                }
            }
            let l = &self.model.params.layers;
            for &a in &actions {
                let classes: Vec<(Transition, usize)> = match a {
                    Action::Shift => vec![(Transition::Shift, 0)],
                    Action::Reduce => vec![(Transition::Reduce, 1)],
                    Action::LeftArc | Action::RightArc => {
                        let base = if a == Action::LeftArc { 2 } else { 2 + labels };
                        (0..labels)
                            .map(|i| (a.with_label(LabelId(i as u32)), base + i))
                            .collect()
                    }
                    _ => unreachable!("{:?} outside traditional systems", a),
                };
                for (t, c) in classes {
                    candidates.push(t);
                    sources.push(Source::Class(c));
                    logits.push(l.cls_b.data[c] + dot(l.cls_w.row(c), &z));
                }
            }
            slots = Some(slot_feats);
        }

        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        let log_probs: Vec<f64> = logits.iter().map(|s| s - lse).collect();
        let probs = log_probs.iter().map(|lp| lp.exp()).collect();
        Ok(StepScores {
            candidates,
            logits,
            probs,
            log_probs,
            skeletons: actions.len(),
            sources,
            slots,
        })
    }

    /// Reverse pass for the summed negative log-likelihood of `steps`, where
    /// each entry pairs the scores of a state with the gold candidate index.
    fn backward(&self, steps: &[(StepScores, usize)]) -> Gradients {
        let params = &self.model.params;
        let l = &params.layers;
        let r = self.model.dims.repr_dim;
        let mut g = Gradients::zeros_like(params);
        let mut dfeat = vec![vec![0.0; r]; self.feats.len()];

        for (step, gold) in steps {
            let dlogit = |i: usize| step.probs[i] - if i == *gold { 1.0 } else { 0.0 };
            match step.slots {
                Some(slots) => {
                    let mut z = Vec::with_capacity(4 * r);
                    for slot in slots {
                        match slot {
                            Some(f) => z.extend_from_slice(&self.feats[f].out),
                            None => z.extend_from_slice(&l.null_feat.data),
                        }
                    }
                    let mut dz = vec![0.0; 4 * r];
                    for (i, src) in step.sources.iter().enumerate() {
                        let Source::Class(c) = *src else {
                            unreachable!()
                        };
                        let ds = dlogit(i);
                        g.layers.cls_b.data[c] += ds;
                        let row = g.layers.cls_w.row_mut(c);
                        for (gw, zi) in row.iter_mut().zip(&z) {
                            *gw += ds * zi;
                        }
                        for (dzi, wi) in dz.iter_mut().zip(l.cls_w.row(c)) {
                            *dzi += ds * wi;
                        }
                    }
                    for (s, slot) in slots.iter().enumerate() {
                        let part = &dz[s * r..(s + 1) * r];
                        let target = match slot {
                            Some(f) => &mut dfeat[*f],
                            None => &mut g.layers.null_feat.data,
                        };
                        target.iter_mut().zip(part).for_each(|(a, b)| *a += b);
                    }
                }
                None => {
                    for (i, src) in step.sources.iter().enumerate() {
                        let ds = dlogit(i);
                        match *src {
                            Source::Shift { feat } => {
                                let out = &self.feats[feat].out;
                                for k in 0..r {
                                    g.layers.shift_u.data[k] += ds * out[k];
                                    dfeat[feat][k] += ds * l.shift_u.data[k];
                                }
                            }
                            Source::Arc { feat, left, label } => {
                                let out = &self.feats[feat].out;
                                let (w, gw, gb) = if left {
                                    (&l.left_w, &mut g.layers.left_w, &mut g.layers.left_b)
                                } else {
                                    (&l.right_w, &mut g.layers.right_w, &mut g.layers.right_b)
                                };
                                gb.data[label] += ds;
                                let wrow = w.row(label);
                                let grow = gw.row_mut(label);
                                for k in 0..r {
                                    grow[k] += ds * out[k];
                                    dfeat[feat][k] += ds * wrow[k];
                                }
                            }
                            Source::Class(_) => unreachable!(),
                        }
                    }
                }
            }
        }

        // Biaffine features -> token representations.
        let n_tok = self.tokens.len();
        let mut dhead = vec![vec![0.0; r]; n_tok];
        let mut ddep = vec![vec![0.0; r]; n_tok];
        let bp = &l.biaffine;
        for (fc, df) in self.feats.iter().zip(&dfeat) {
            let h = &self.tokens[fc.head_tok].head;
            let d = &self.tokens[fc.dep_tok].dep;
            let mut dh = vec![0.0; r];
            let mut dd = vec![0.0; r];
            #[allow(clippy::needless_range_loop)]
            for i in 0..r {
                if fc.pre[i] <= 0.0 || fc.mask[i] == 0.0 {
                    continue;
                }
                let gi = df[i] * fc.mask[i];
                if gi == 0.0 {
                    continue;
                }
                g.layers.biaffine.d.data[i] += gi;
                let w = &bp.w.data[i * r * r..(i + 1) * r * r];
                let gw = &mut g.layers.biaffine.w.data[i * r * r..(i + 1) * r * r];
                for a in 0..r {
                    let wa = &w[a * r..(a + 1) * r];
                    let gha = gi * h[a];
                    if gha != 0.0 {
                        let gwa = &mut gw[a * r..(a + 1) * r];
                        for b in 0..r {
                            gwa[b] += gha * d[b];
                            dd[b] += gha * wa[b];
                        }
                    }
                    dh[a] += gi * dot(wa, d);
                }
                let (brow, crow) = (bp.b.row(i), bp.c.row(i));
                let gb = g.layers.biaffine.b.row_mut(i);
                for a in 0..r {
                    gb[a] += gi * h[a];
                    dh[a] += gi * brow[a];
                }
                let gc = g.layers.biaffine.c.row_mut(i);
                for b in 0..r {
                    gc[b] += gi * d[b];
                    dd[b] += gi * crow[b];
                }
            }
            dhead[fc.head_tok]
                .iter_mut()
                .zip(&dh)
                .for_each(|(a, b)| *a += b);
            ddep[fc.dep_tok]
                .iter_mut()
                .zip(&dd)
                .for_each(|(a, b)| *a += b);
        }

        // Token representations -> projections -> embeddings.
        let dims = &self.model.dims;
        let block = dims.word_dim + dims.pos_dim;
        for (t, tc) in self.tokens.iter().enumerate() {
            let mut dx = vec![0.0; tc.x.len()];
            for (pre, mask, dv, gw, gb, w) in [
                (
                    &tc.head_pre,
                    &tc.head_mask,
                    &dhead[t],
                    &mut g.layers.head_w,
                    &mut g.layers.head_b,
                    &l.head_w,
                ),
                (
                    &tc.dep_pre,
                    &tc.dep_mask,
                    &ddep[t],
                    &mut g.layers.dep_w,
                    &mut g.layers.dep_b,
                    &l.dep_w,
                ),
            ] {
                for i in 0..r {
                    if pre[i] <= 0.0 || dv[i] == 0.0 {
                        continue;
                    }
                    let gi = dv[i] * mask[i];
                    if gi == 0.0 {
                        continue;
                    }
                    gb.data[i] += gi;
                    let grow = gw.row_mut(i);
                    for (gx, xv) in grow.iter_mut().zip(&tc.x) {
                        *gx += gi * xv;
                    }
                    for (dxv, wv) in dx.iter_mut().zip(w.row(i)) {
                        *dxv += gi * wv;
                    }
                }
            }
            if dx.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (slot, (wr, tr)) in window_rows(&self.words, &self.tags, t, dims.window)
                .into_iter()
                .enumerate()
            {
                let part = &dx[slot * block..(slot + 1) * block];
                let wrow = g
                    .word_rows
                    .entry(wr)
                    .or_insert_with(|| vec![0.0; dims.word_dim]);
                wrow.iter_mut()
                    .zip(&part[..dims.word_dim])
                    .for_each(|(a, b)| *a += b);
                let trow = g
                    .pos_rows
                    .entry(tr)
                    .or_insert_with(|| vec![0.0; dims.pos_dim]);
                trow.iter_mut()
                    .zip(&part[dims.word_dim..])
                    .for_each(|(a, b)| *a += b);
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_biaffine_is_zero() {
        let p = BiaffineParams::zeros(4);
        assert_eq!(
            biaffine_combine(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4], &p).unwrap(),
            vec![0.0; 4]
        );
    }

    #[test]
    fn identity_w1_selects_first_unit() {
        let r = 32;
        let mut p = BiaffineParams::zeros(r);
        for a in 0..r {
            p.w.data[a * r + a] = 1.0; // W_1 = I
        }
        let mut e1 = vec![0.0; r];
        e1[0] = 1.0;
        let out = biaffine_combine(&e1, &e1, &p).unwrap();
        assert_eq!(out[0], 1.0);
        assert!(out[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_offset_clamps() {
        let mut p = BiaffineParams::zeros(3);
        p.d.data = vec![-10.0; 3];
        p.w.data.iter_mut().for_each(|w| *w = 0.5);
        let out = biaffine_combine(&[0.1, -0.2, 0.1], &[0.2, 0.1, 0.0], &p).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn shape_mismatch() {
        let p = BiaffineParams::zeros(3);
        assert!(biaffine_combine(&[0.0; 2], &[0.0; 3], &p).is_err());
    }
}
