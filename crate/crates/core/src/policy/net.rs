//! Network definitions with hand-written backward passes.
//!
//! Query encoder: mean-pooled token embeddings followed by a two-layer tanh
//! perceptron, giving the query vector `qv`.
//!
//! Policy decoder at step t: the memory is `[qv, start, e(x_1), .., e(x_t)]`
//! and its last row `u` is the decoder query. Multi-head scaled dot-product
//! attention of `u` over the memory gives `a`; then
//! `z = qv + u + Wo·a`, `y = z + tanh(Wf·z + bf)`, `logits = Wout·y + bout`.
//! The output projection starts at zero, so a fresh model is uniform.

use super::tensor::{add, axpy, dot, masked_softmax, Matrix};
use super::vocab::Vocab;
use crate::inventory::TokenizerScheme;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Shape of a model; enough to rebuild zeroed parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub dim: usize,
    pub heads: usize,
    /// Label count (policy, no-state-transition) or intent count (greedy).
    pub outputs: usize,
    pub vocab_size: usize,
    pub tokenizer: TokenizerScheme,
}

/// A set of named parameter blocks.
pub trait ParamSet: Clone {
    fn blocks(&self) -> Vec<(&'static str, &Matrix)>;
    fn blocks_mut(&mut self) -> Vec<&mut Matrix>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.blocks_mut().into_iter().for_each(Matrix::fill_zero);
        z
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, (_, b)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.add_assign(b);
        }
    }

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|(_, m)| m.data.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, m)| m.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub tok_emb: Matrix,
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    tokens: Vec<usize>,
    mean: Vec<f64>,
    h1: Vec<f64>,
    pub qv: Vec<f64>,
}

fn tanh_vec(x: Vec<f64>) -> Vec<f64> {
    x.into_iter().map(f64::tanh).collect()
}

fn tanh_back(dy: &[f64], y: &[f64]) -> Vec<f64> {
    dy.iter().zip(y).map(|(d, y)| d * (1.0 - y * y)).collect()
}

impl Encoder {
    pub fn new<R: Rng>(vocab_size: usize, d: usize, rng: &mut R) -> Self {
        let w = 1.0 / (d as f64).sqrt();
        Encoder {
            tok_emb: Matrix::normal(vocab_size, d, 1.0, rng),
            w1: Matrix::normal(d, d, w, rng),
            b1: Matrix::zeros(d, 1),
            w2: Matrix::normal(d, d, w, rng),
            b2: Matrix::zeros(d, 1),
        }
    }

    fn blocks(&self) -> Vec<(&'static str, &Matrix)> {
        vec![
            ("enc.tok_emb", &self.tok_emb),
            ("enc.w1", &self.w1),
            ("enc.b1", &self.b1),
            ("enc.w2", &self.w2),
            ("enc.b2", &self.b2),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.tok_emb, &mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn forward(&self, tokens: &[usize]) -> EncoderCache {
        let d = self.w1.cols;
        let mut mean = vec![0.0; d];
        if !tokens.is_empty() {
            for &t in tokens {
                axpy(1.0, self.tok_emb.row(t), &mut mean);
            }
            let inv = 1.0 / tokens.len() as f64;
            mean.iter_mut().for_each(|m| *m *= inv);
        }
        let h1 = tanh_vec(add(&self.w1.matvec(&mean), &self.b1.data));
        let qv = tanh_vec(add(&self.w2.matvec(&h1), &self.b2.data));
        EncoderCache {
            tokens: tokens.to_vec(),
            mean,
            h1,
            qv,
        }
    }

    pub fn backward(&self, c: &EncoderCache, dqv: &[f64], g: &mut Encoder) {
        let dpre2 = tanh_back(dqv, &c.qv);
        g.w2.add_outer(&dpre2, &c.h1);
        axpy(1.0, &dpre2, &mut g.b2.data);
        let mut dh1 = vec![0.0; c.h1.len()];
        self.w2.matvec_t_add(&dpre2, &mut dh1);
        let dpre1 = tanh_back(&dh1, &c.h1);
        g.w1.add_outer(&dpre1, &c.mean);
        axpy(1.0, &dpre1, &mut g.b1.data);
        if c.tokens.is_empty() {
            return;
        }
        let mut dmean = vec![0.0; c.mean.len()];
        self.w1.matvec_t_add(&dpre1, &mut dmean);
        let inv = 1.0 / c.tokens.len() as f64;
        for &t in &c.tokens {
            axpy(inv, &dmean, g.tok_emb.row_mut(t));
        }
    }
}

/// Parameters of the recommendation policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub encoder: Encoder,
    pub label_emb: Matrix,
    pub start: Matrix,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub wf: Matrix,
    pub bf: Matrix,
    pub wout: Matrix,
    pub bout: Matrix,
}

impl ParamSet for PolicyParams {
    fn blocks(&self) -> Vec<(&'static str, &Matrix)> {
        let mut b = self.encoder.blocks();
        b.extend([
            ("dec.label_emb", &self.label_emb),
            ("dec.start", &self.start),
            ("dec.wq", &self.wq),
            ("dec.wk", &self.wk),
            ("dec.wv", &self.wv),
            ("dec.wo", &self.wo),
            ("dec.wf", &self.wf),
            ("dec.bf", &self.bf),
            ("out.w", &self.wout),
            ("out.b", &self.bout),
        ]);
        b
    }

    fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        let mut b = self.encoder.blocks_mut();
        b.extend([
            &mut self.label_emb,
            &mut self.start,
            &mut self.wq,
            &mut self.wk,
            &mut self.wv,
            &mut self.wo,
            &mut self.wf,
            &mut self.bf,
            &mut self.wout,
            &mut self.bout,
        ]);
        b
    }
}

#[derive(Debug, Clone)]
pub struct StepCache {
    enc: EncoderCache,
    mem: Vec<Vec<f64>>,
    q: Vec<f64>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    a: Vec<f64>,
    z: Vec<f64>,
    g: Vec<f64>,
    y: Vec<f64>,
    pub logits: Vec<f64>,
}

impl PolicyParams {
    pub fn new<R: Rng>(arch: &Arch, rng: &mut R) -> Self {
        let d = arch.dim;
        let w = 1.0 / (d as f64).sqrt();
        PolicyParams {
            encoder: Encoder::new(arch.vocab_size, d, rng),
            label_emb: Matrix::normal(arch.outputs, d, 1.0, rng),
            start: Matrix::normal(d, 1, 1.0, rng),
            wq: Matrix::normal(d, d, w, rng),
            wk: Matrix::normal(d, d, w, rng),
            wv: Matrix::normal(d, d, w, rng),
            wo: Matrix::normal(d, d, w, rng),
            wf: Matrix::normal(d, d, w, rng),
            bf: Matrix::zeros(d, 1),
            wout: Matrix::zeros(arch.outputs, d),
            bout: Matrix::zeros(arch.outputs, 1),
        }
    }

    pub fn encode(&self, tokens: &[usize]) -> EncoderCache {
        self.encoder.forward(tokens)
    }

    /// One decoder step given a precomputed encoding.
    pub fn step(&self, arch: &Arch, enc: &EncoderCache, history: &[usize]) -> StepCache {
        let d = arch.dim;
        let heads = arch.heads;
        let dk = d / heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let mut mem = Vec::with_capacity(history.len() + 2);
        mem.push(enc.qv.clone());
        mem.push(self.start.data.clone());
        for &x in history {
            mem.push(self.label_emb.row(x).to_vec());
        }
        let u = mem.last().expect("memory has the start row");
        let q = self.wq.matvec(u);
        let k: Vec<Vec<f64>> = mem.iter().map(|m| self.wk.matvec(m)).collect();
        let v: Vec<Vec<f64>> = mem.iter().map(|m| self.wv.matvec(m)).collect();
        let mut alpha = Vec::with_capacity(heads);
        let mut a = vec![0.0; d];
        for h in 0..heads {
            let r = h * dk..(h + 1) * dk;
            let scores: Vec<f64> = k.iter().map(|kj| dot(&q[r.clone()], &kj[r.clone()]) * scale).collect();
            let al = masked_softmax(&scores, &vec![true; scores.len()]);
            for (j, vj) in v.iter().enumerate() {
                axpy(al[j], &vj[r.clone()], &mut a[r.clone()]);
            }
            alpha.push(al);
        }
        let o = self.wo.matvec(&a);
        let z: Vec<f64> = (0..d).map(|i| enc.qv[i] + u[i] + o[i]).collect();
        let g = tanh_vec(add(&self.wf.matvec(&z), &self.bf.data));
        let y = add(&z, &g);
        let logits = add(&self.wout.matvec(&y), &self.bout.data);
        StepCache {
            enc: enc.clone(),
            mem,
            q,
            k,
            v,
            alpha,
            a,
            z,
            g,
            y,
            logits,
        }
    }

    pub fn forward(&self, arch: &Arch, tokens: &[usize], history: &[usize]) -> StepCache {
        self.step(arch, &self.encode(tokens), history)
    }

    /// Accumulates ∂loss/∂θ into `grads` given ∂loss/∂logits.
    pub fn backward(&self, arch: &Arch, c: &StepCache, history: &[usize], dlogits: &[f64], grads: &mut PolicyParams) {
        let d = arch.dim;
        let heads = arch.heads;
        let dk = d / heads;
        let scale = 1.0 / (dk as f64).sqrt();
        grads.wout.add_outer(dlogits, &c.y);
        axpy(1.0, dlogits, &mut grads.bout.data);
        let mut dy = vec![0.0; d];
        self.wout.matvec_t_add(dlogits, &mut dy);

        let dpre = tanh_back(&dy, &c.g);
        grads.wf.add_outer(&dpre, &c.z);
        axpy(1.0, &dpre, &mut grads.bf.data);
        let mut dz = dy;
        self.wf.matvec_t_add(&dpre, &mut dz);

        let n = c.mem.len();
        let mut dmem = vec![vec![0.0; d]; n];
        axpy(1.0, &dz, &mut dmem[0]);
        axpy(1.0, &dz, &mut dmem[n - 1]);

        grads.wo.add_outer(&dz, &c.a);
        let mut da = vec![0.0; d];
        self.wo.matvec_t_add(&dz, &mut da);

        let mut dq = vec![0.0; d];
        let mut dk_rows = vec![vec![0.0; d]; n];
        let mut dv_rows = vec![vec![0.0; d]; n];
        for h in 0..heads {
            let r = h * dk..(h + 1) * dk;
            let al = &c.alpha[h];
            let dalpha: Vec<f64> = c.v.iter().map(|vj| dot(&da[r.clone()], &vj[r.clone()])).collect();
            let mean: f64 = al.iter().zip(&dalpha).map(|(a, b)| a * b).sum();
            for j in 0..n {
                axpy(al[j], &da[r.clone()], &mut dv_rows[j][r.clone()]);
                let ds = al[j] * (dalpha[j] - mean) * scale;
                if ds != 0.0 {
                    axpy(ds, &c.k[j][r.clone()], &mut dq[r.clone()]);
                    axpy(ds, &c.q[r.clone()], &mut dk_rows[j][r.clone()]);
                }
            }
        }
        grads.wq.add_outer(&dq, &c.mem[n - 1]);
        let mut du = vec![0.0; d];
        self.wq.matvec_t_add(&dq, &mut du);
        axpy(1.0, &du, &mut dmem[n - 1]);
        for j in 0..n {
            grads.wk.add_outer(&dk_rows[j], &c.mem[j]);
            self.wk.matvec_t_add(&dk_rows[j], &mut dmem[j]);
            grads.wv.add_outer(&dv_rows[j], &c.mem[j]);
            self.wv.matvec_t_add(&dv_rows[j], &mut dmem[j]);
        }
        axpy(1.0, &dmem[1], &mut grads.start.data);
        for (t, &x) in history.iter().enumerate() {
            axpy(1.0, &dmem[t + 2], grads.label_emb.row_mut(x));
        }
        self.encoder.backward(&c.enc, &dmem[0], &mut grads.encoder);
    }
}

/// Parameters of a history-free classifier: the query encoder plus a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub encoder: Encoder,
    pub head_w: Matrix,
    pub head_b: Matrix,
}

impl ParamSet for ClassifierParams {
    fn blocks(&self) -> Vec<(&'static str, &Matrix)> {
        let mut b = self.encoder.blocks();
        b.extend([("head.w", &self.head_w), ("head.b", &self.head_b)]);
        b
    }

    fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        let mut b = self.encoder.blocks_mut();
        b.extend([&mut self.head_w, &mut self.head_b]);
        b
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierCache {
    enc: EncoderCache,
    pub logits: Vec<f64>,
}

impl ClassifierParams {
    pub fn new<R: Rng>(arch: &Arch, rng: &mut R) -> Self {
        ClassifierParams {
            encoder: Encoder::new(arch.vocab_size, arch.dim, rng),
            head_w: Matrix::zeros(arch.outputs, arch.dim),
            head_b: Matrix::zeros(arch.outputs, 1),
        }
    }

    pub fn forward(&self, tokens: &[usize]) -> ClassifierCache {
        let enc = self.encoder.forward(tokens);
        let logits = add(&self.head_w.matvec(&enc.qv), &self.head_b.data);
        ClassifierCache { enc, logits }
    }

    pub fn backward(&self, c: &ClassifierCache, dlogits: &[f64], grads: &mut ClassifierParams) {
        grads.head_w.add_outer(dlogits, &c.enc.qv);
        axpy(1.0, dlogits, &mut grads.head_b.data);
        let mut dqv = vec![0.0; c.enc.qv.len()];
        self.head_w.matvec_t_add(dlogits, &mut dqv);
        self.encoder.backward(&c.enc, &dqv, &mut grads.encoder);
    }
}

pub fn build_arch(vocab: &Vocab, dim: usize, heads: usize, outputs: usize) -> Arch {
    Arch {
        dim,
        heads,
        outputs,
        vocab_size: vocab.len(),
        tokenizer: vocab.scheme(),
    }
}
