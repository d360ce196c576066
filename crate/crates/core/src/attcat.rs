//! Attentive class activation tokens: per-token attributions formed from
//! gradient ⊙ activation terms weighted by attention and summed over
//! layers, with a linear next-subgoal probe supplying the class score.

use std::io::{Read, Write};

use hytl_autodiff::{Bound, ParamStore, Tape, Tensor};
use hytl_ltl::TokenVocab;
use hytl_nn::{Linear, TransformerEncoder};
use rand::Rng;

use crate::{CoreError, Result};

/// Bias-free linear map from the task embedding to proposition logits.
#[derive(Clone, Debug)]
pub struct Probe {
    pub linear: Linear,
    pub classes: usize,
}

impl Probe {
    pub fn new(store: &mut ParamStore, dim: usize, classes: usize, rng: &mut impl Rng) -> Self {
        Probe {
            linear: Linear::new(store, "probe", dim, classes, false, rng),
            classes,
        }
    }

    pub fn logits<'t>(&self, p: &Bound<'t>, pooled: Tensor<'t>) -> Result<Tensor<'t>> {
        Ok(self.linear.forward(p, pooled)?)
    }

    /// Mean softmax cross-entropy of `pooled` rows against `targets`.
    pub fn loss<'t>(&self, p: &Bound<'t>, pooled: Tensor<'t>, targets: &[usize]) -> Result<Tensor<'t>> {
        if targets.is_empty() {
            return Err(CoreError::EmptyBatch);
        }
        if let Some(&class) = targets.iter().find(|&&t| t >= self.classes) {
            return Err(CoreError::InvalidClass {
                class,
                classes: self.classes,
            });
        }
        let logp = self.logits(p, pooled)?.log_softmax(1)?;
        let mut pick = vec![0.0; targets.len() * self.classes];
        for (i, &t) in targets.iter().enumerate() {
            pick[i * self.classes + t] = 1.0;
        }
        let pick = pooled.tape().constant(pick, &[targets.len(), self.classes]);
        Ok(logp.mul(pick)?.sum_all().scale(-1.0 / targets.len() as f64))
    }
}

/// How each token's per-layer term is weighted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    /// Attention received, averaged over heads and non-PAD queries.
    Received,
    /// Attention paid by the token, averaged over heads and non-PAD keys.
    Sent,
    /// Weight 1.
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttcatOptions {
    pub weighting: Weighting,
    pub final_layer_only: bool,
}

impl Default for AttcatOptions {
    fn default() -> Self {
        AttcatOptions {
            weighting: Weighting::Received,
            final_layer_only: false,
        }
    }
}

/// Scores for the non-PAD tokens of one input.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpactScores {
    pub tokens: Vec<String>,
    pub class: String,
    /// `[token][layer]` contributions.
    pub per_layer: Vec<Vec<f64>>,
    pub total: Vec<f64>,
    pub magnitude: Vec<f64>,
}

impl ImpactScores {
    pub fn normalized(&self) -> Vec<f64> {
        let max = self.total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.total
            .iter()
            .map(|v| if max > 0.0 { v / max } else { 0.0 })
            .collect()
    }
}

/// The class logit `y^c` and its AttCAT decomposition over tokens.
#[allow(clippy::too_many_arguments)]
pub fn attcat_scores(
    encoder: &TransformerEncoder,
    encoder_store: &ParamStore,
    probe: &Probe,
    probe_store: &ParamStore,
    vocab: &TokenVocab,
    tokens: &[usize],
    class: usize,
    class_name: &str,
    options: AttcatOptions,
) -> Result<(f64, ImpactScores)> {
    if class >= probe.classes {
        return Err(CoreError::InvalidClass {
            class,
            classes: probe.classes,
        });
    }
    let tape = Tape::new();
    let e = encoder_store.bind(&tape);
    let p = probe_store.bind_frozen(&tape);
    let out = encoder.encode(&e, tokens)?;
    let y = probe.logits(&p, out.pooled)?.slice(1, class, 1)?.sum_all();
    let grads = tape.backward(y)?;
    let m = tokens.len();
    let d = encoder.config.dim;
    let layers = out.layer_outputs.len();
    let real: Vec<usize> = (0..m).filter(|&i| out.mask[i]).collect();
    let mut per_layer = vec![vec![0.0; layers]; real.len()];
    for (l, x) in out.layer_outputs.iter().enumerate() {
        if options.final_layer_only && l + 1 != layers {
            continue;
        }
        let xv = x.value();
        let g = grads.get_or_zero(*x);
        let heads = &out.attention[l];
        for (slot, &i) in real.iter().enumerate() {
            let alpha = match options.weighting {
                Weighting::Unit => 1.0,
                Weighting::Received => {
                    let sum: f64 = heads
                        .iter()
                        .map(|a| real.iter().map(|&q| a[q * m + i]).sum::<f64>())
                        .sum();
                    sum / (heads.len() * real.len()) as f64
                }
                Weighting::Sent => {
                    let sum: f64 = heads
                        .iter()
                        .map(|a| real.iter().map(|&k| a[i * m + k]).sum::<f64>())
                        .sum();
                    sum / (heads.len() * real.len()) as f64
                }
            };
            let dot: f64 = (0..d).map(|k| g[i * d + k] * xv[i * d + k]).sum();
            per_layer[slot][l] = alpha * dot;
        }
    }
    let total: Vec<f64> = per_layer.iter().map(|r| r.iter().sum()).collect();
    let scores = ImpactScores {
        tokens: real.iter().map(|&i| vocab.name(tokens[i]).to_string()).collect(),
        class: class_name.to_string(),
        per_layer,
        magnitude: total.iter().map(|v| v.abs()).collect(),
        total,
    };
    Ok((y.item(), scores))
}

/// Writes `token, layer_0 … layer_{L−1}, total, magnitude, normalized_total`.
pub fn emit_heatmap<W: Write>(scores: &ImpactScores, out: W) -> Result<()> {
    let layers = scores.per_layer.first().map_or(0, |r| r.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["token".to_string()];
    header.extend((0..layers).map(|l| format!("layer_{l}")));
    header.extend(["total", "magnitude", "normalized_total"].map(String::from));
    w.write_record(&header)?;
    let norm = scores.normalized();
    for (i, t) in scores.tokens.iter().enumerate() {
        let mut row = vec![t.clone()];
        row.extend(scores.per_layer[i].iter().map(|v| v.to_string()));
        row.push(scores.total[i].to_string());
        row.push(scores.magnitude[i].to_string());
        row.push(norm[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a heatmap CSV back; the class name is not stored in the file.
pub fn parse_heatmap<R: Read>(input: R, class: &str) -> Result<ImpactScores> {
    let mut r = csv::Reader::from_reader(input);
    let layers = r.headers()?.iter().filter(|h| h.starts_with("layer_")).count();
    let mut scores = ImpactScores {
        tokens: Vec::new(),
        class: class.to_string(),
        per_layer: Vec::new(),
        total: Vec::new(),
        magnitude: Vec::new(),
    };
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| CoreError::Checkpoint(format!("bad number {s:?} in heatmap: {e}")))
    };
    for rec in r.records() {
        let rec = rec?;
        scores.tokens.push(rec[0].to_string());
        scores
            .per_layer
            .push((1..=layers).map(|i| num(&rec[i])).collect::<Result<_>>()?);
        scores.total.push(num(&rec[layers + 1])?);
        scores.magnitude.push(num(&rec[layers + 2])?);
    }
    Ok(scores)
}
