use hytl_autodiff::{Bound, ParamId, ParamStore, Tensor};
use rand::Rng;

use crate::{xavier_uniform, Linear, NnError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pooling {
    /// Mean of the output rows over non-PAD positions.
    MaskedMean,
    /// The first (CLS) output row.
    Cls,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformerConfig {
    pub layers: usize,
    pub dim: usize,
    pub heads: usize,
    pub mlp_hidden: usize,
    pub max_len: usize,
    pub vocab: usize,
    pub eps: f64,
    pub pad_id: usize,
    pub pooling: Pooling,
    /// Apply the closing layer norm `Y = LN(X_L)`.
    pub final_ln: bool,
}

impl TransformerConfig {
    pub fn new(vocab: usize) -> Self {
        TransformerConfig {
            layers: 2,
            dim: 32,
            heads: 4,
            mlp_hidden: 64,
            max_len: 24,
            vocab,
            eps: 1e-5,
            pad_id: 0,
            pooling: Pooling::MaskedMean,
            final_ln: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(NnError::Config(format!(
                "dim {} is not divisible by {} heads",
                self.dim, self.heads
            )));
        }
        if self.layers == 0 || self.max_len == 0 || self.mlp_hidden == 0 {
            return Err(NnError::Config(
                "layers, max_len and mlp_hidden must be positive".into(),
            ));
        }
        if self.eps <= 0.0 {
            return Err(NnError::Config("layer norm eps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Norm {
    gain: ParamId,
    bias: ParamId,
}

impl Norm {
    fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        Norm {
            gain: store.add(format!("{name}/gain"), &[dim], vec![1.0; dim]),
            bias: store.add(format!("{name}/bias"), &[dim], vec![0.0; dim]),
        }
    }

    fn forward<'t>(&self, p: &Bound<'t>, x: Tensor<'t>, eps: f64) -> Result<Tensor<'t>> {
        Ok(x.layernorm(p.get(self.gain), p.get(self.bias), eps)?)
    }
}

#[derive(Clone, Debug)]
struct Block {
    ln1: Norm,
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    ln2: Norm,
    fc1: Linear,
    fc2: Linear,
}

/// Pre-norm Transformer encoder with sinusoidal positions.
#[derive(Clone, Debug)]
pub struct TransformerEncoder {
    pub config: TransformerConfig,
    embedding: ParamId,
    blocks: Vec<Block>,
    final_norm: Norm,
    positions: Vec<f64>,
}

/// Everything one forward pass exposes.
pub struct EncoderOutput<'t> {
    /// `M × D` output rows.
    pub y: Tensor<'t>,
    /// `1 × D` task representation.
    pub pooled: Tensor<'t>,
    /// Output of each block, `M × D`.
    pub layer_outputs: Vec<Tensor<'t>>,
    /// `[layer][head]` row-major `M × M` attention; masked columns are 0.
    pub attention: Vec<Vec<Vec<f64>>>,
    /// Positions holding a non-PAD token.
    pub mask: Vec<bool>,
}

/// `PE(pos, 2i) = sin(pos / 10000^(2i/D))`, `PE(pos, 2i+1) = cos(..)`.
pub fn sinusoidal(max_len: usize, dim: usize) -> Vec<f64> {
    let mut pe = vec![0.0; max_len * dim];
    for pos in 0..max_len {
        for i in 0..dim {
            let rate = 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
            let angle = pos as f64 / rate;
            pe[pos * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

impl TransformerEncoder {
    pub fn new(store: &mut ParamStore, name: &str, config: TransformerConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let embedding = store.add(
            format!("{name}/embed"),
            &[config.vocab, d],
            xavier_uniform(rng, config.vocab, d),
        );
        let blocks = (0..config.layers)
            .map(|l| {
                let n = format!("{name}/layer{l}");
                Block {
                    ln1: Norm::new(store, &format!("{n}/ln1"), d),
                    q: Linear::new(store, &format!("{n}/q"), d, d, true, rng),
                    k: Linear::new(store, &format!("{n}/k"), d, d, true, rng),
                    v: Linear::new(store, &format!("{n}/v"), d, d, true, rng),
                    o: Linear::new(store, &format!("{n}/o"), d, d, true, rng),
                    ln2: Norm::new(store, &format!("{n}/ln2"), d),
                    fc1: Linear::new(store, &format!("{n}/fc1"), d, config.mlp_hidden, true, rng),
                    fc2: Linear::new(store, &format!("{n}/fc2"), config.mlp_hidden, d, true, rng),
                }
            })
            .collect();
        let final_norm = Norm::new(store, &format!("{name}/ln_out"), d);
        let positions = sinusoidal(config.max_len, d);
        Ok(TransformerEncoder {
            config,
            embedding,
            blocks,
            final_norm,
            positions,
        })
    }

    pub fn embedding(&self) -> ParamId {
        self.embedding
    }

    /// Encodes one token sequence of length at most `max_len`.
    pub fn encode<'t>(&self, p: &Bound<'t>, tokens: &[usize]) -> Result<EncoderOutput<'t>> {
        let cfg = &self.config;
        if tokens.len() > cfg.max_len {
            return Err(NnError::SequenceTooLong {
                len: tokens.len(),
                max: cfg.max_len,
            });
        }
        if let Some(&id) = tokens.iter().find(|&&t| t >= cfg.vocab) {
            return Err(NnError::TokenOutOfRange { id, vocab: cfg.vocab });
        }
        let m = tokens.len();
        let d = cfg.dim;
        let tape = p.get(self.embedding).tape();
        let mask: Vec<bool> = tokens.iter().map(|&t| t != cfg.pad_id).collect();
        let keys: Vec<usize> = (0..m).filter(|&i| mask[i]).collect();
        if keys.is_empty() {
            return Err(NnError::Config("sequence has no non-PAD token".into()));
        }

        let pos = tape.constant(self.positions[..m * d].to_vec(), &[m, d]);
        let mut x = p.get(self.embedding).gather_rows(tokens)?.add(pos)?;
        let mut layer_outputs = Vec::with_capacity(cfg.layers);
        let mut attention = Vec::with_capacity(cfg.layers);
        for block in &self.blocks {
            let (attn, maps) = self.attend(p, block, x, &keys)?;
            let x_mid = attn.add(x)?;
            let h = block.ln2.forward(p, x_mid, cfg.eps)?;
            let h = block.fc2.forward(p, block.fc1.forward(p, h)?.tanh())?;
            x = h.add(x_mid)?;
            layer_outputs.push(x);
            attention.push(maps);
        }
        let y = if cfg.final_ln {
            self.final_norm.forward(p, x, cfg.eps)?
        } else {
            x
        };
        let pooled = match cfg.pooling {
            Pooling::MaskedMean => y.gather_rows(&keys)?.mean(0)?.reshape(&[1, d])?,
            Pooling::Cls => y.slice(0, 0, 1)?,
        };
        Ok(EncoderOutput {
            y,
            pooled,
            layer_outputs,
            attention,
            mask,
        })
    }

    /// Multi-head self-attention on `LN(x)`; keys and values come from the
    /// non-PAD rows only.
    fn attend<'t>(
        &self,
        p: &Bound<'t>,
        block: &Block,
        x: Tensor<'t>,
        keys: &[usize],
    ) -> Result<(Tensor<'t>, Vec<Vec<f64>>)> {
        let cfg = &self.config;
        let m = x.dims()[0];
        let dh = cfg.dim / cfg.heads;
        let h = block.ln1.forward(p, x, cfg.eps)?;
        let q = block.q.forward(p, h)?;
        let kv_in = h.gather_rows(keys)?;
        let k = block.k.forward(p, kv_in)?;
        let v = block.v.forward(p, kv_in)?;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(cfg.heads);
        let mut maps = Vec::with_capacity(cfg.heads);
        for head in 0..cfg.heads {
            let qh = q.slice(1, head * dh, dh)?;
            let kh = k.slice(1, head * dh, dh)?;
            let vh = v.slice(1, head * dh, dh)?;
            let a = qh.matmul(kh.transpose()?)?.scale(scale).softmax(1)?;
            let vals = a.value();
            let mut full = vec![0.0; m * m];
            for i in 0..m {
                for (j, &key) in keys.iter().enumerate() {
                    full[i * m + key] = vals[i * keys.len() + j];
                }
            }
            maps.push(full);
            heads.push(a.matmul(vh)?);
        }
        let merged = Tensor::concat(&heads, 1)?;
        Ok((block.o.forward(p, merged)?, maps))
    }
}
