use alloc::vec;
use alloc::vec::Vec;

use super::{EncoderParams, ModelParams, Variant};
use crate::corpus::Batch;
use crate::error::{bail, Result};
use crate::features::{embed_chars, WordVecStore, PAD_ID};
use crate::numcore::dropout::{apply_mask, dropout_mask};
use crate::numcore::{softmax_cross_entropy, LstmTrace, Rng, Tensor};

/// Forward state of the BLSTM needed for backpropagation.
#[derive(Clone, Debug)]
pub struct BlstmCache {
    fw: LstmTrace,
    bw: LstmTrace,
    mask: Option<Vec<f64>>,
    hidden: usize,
}

/// Runs both directions over each row's true length and concatenates
/// `[fw | bw]` per position: `[B × L × D]` → `[B × L × 2H]`.
pub fn blstm_encode(
    embedded: &Tensor,
    lengths: &[usize],
    enc: &EncoderParams,
    rate: f64,
    training: bool,
    rng: &mut Rng,
) -> Result<(Tensor, BlstmCache)> {
    let fw = enc.fw.run(embedded, lengths, false)?;
    let bw = enc.bw.run(embedded, lengths, true)?;
    let (batch, steps) = (embedded.dim(0), embedded.dim(1));
    let hidden = enc.fw.hidden;
    if enc.bw.hidden != hidden {
        bail!(Shape, "forward and backward LSTMs differ in size");
    }
    let width = 2 * hidden;
    let mut out = vec![0.0; batch * steps * width];
    fw.write_outputs(&mut out, width, 0);
    bw.write_outputs(&mut out, width, hidden);
    let mask = dropout_mask(out.len(), rate, training, rng)?;
    apply_mask(&mut out, mask.as_deref());
    let out = Tensor::from_vec(&[batch, steps, width], out)?;
    Ok((out, BlstmCache { fw, bw, mask, hidden }))
}

/// Row-gathers each sample's target position: `[B × L × W]` → `[B × W]`.
/// Equivalent to multiplying by the one-hot position vector.
pub fn select_position(enc: &Tensor, targets: &[usize], lengths: &[usize]) -> Result<Tensor> {
    let (batch, steps, width) = match enc.shape() {
        [b, l, w] => (*b, *l, *w),
        other => bail!(Shape, "encoder output must be rank 3, got {other:?}"),
    };
    if targets.len() != batch || lengths.len() != batch {
        bail!(Shape, "{} targets / {} lengths for batch of {batch}", targets.len(), lengths.len());
    }
    let mut out = Vec::with_capacity(batch * width);
    for (b, (&t, &len)) in targets.iter().zip(lengths).enumerate() {
        if t >= len || t >= steps {
            bail!(Index, "target {t} of row {b} outside its length {len}");
        }
        out.extend_from_slice(&enc.data()[(b * steps + t) * width..][..width]);
    }
    Tensor::from_vec(&[batch, width], out)
}

/// Concatenates `[char | word | sentence]`, omitting the parts `variant` does not use.
pub fn assemble_condition(variant: Variant, char_emb: &Tensor, word: Option<&Tensor>, sentence: Option<&Tensor>) -> Result<Tensor> {
    let batch = char_emb.dim(0);
    let mut parts: Vec<&Tensor> = vec![char_emb];
    if variant.uses_word() {
        match word {
            Some(w) => parts.push(w),
            None => bail!(Config, "variant {variant} needs the word-level condition"),
        }
    }
    if variant.uses_sentence() {
        match sentence {
            Some(s) => parts.push(s),
            None => bail!(Config, "variant {variant} needs the sentence-level condition"),
        }
    }
    for p in &parts {
        if p.rank() != 2 || p.dim(0) != batch {
            bail!(Shape, "condition part {:?} is not [{batch} x _]", p.shape());
        }
    }
    let width: usize = parts.iter().map(|p| p.dim(1)).sum();
    let mut out = Vec::with_capacity(batch * width);
    for b in 0..batch {
        for p in &parts {
            out.extend_from_slice(p.row(b));
        }
    }
    Tensor::from_vec(&[batch, width], out)
}

/// Activations of the three fully connected layers.
#[derive(Clone, Debug)]
pub struct PredictorCache {
    cond: Tensor,
    h1: Tensor,
    mask1: Option<Vec<f64>>,
    d1: Tensor,
    h2: Tensor,
    mask2: Option<Vec<f64>>,
    d2: Tensor,
    logits: Tensor,
}

impl PredictorCache {
    pub fn fc1_output(&self) -> &Tensor {
        &self.h1
    }

    pub fn fc2_output(&self) -> &Tensor {
        &self.h2
    }
}

/// fc1 (relu) → dropout → fc2 (relu) → dropout → fc3 (linear). Returns logits.
pub fn predict(cond: &Tensor, params: &ModelParams, training: bool, rng: &mut Rng) -> Result<(Tensor, PredictorCache)> {
    let rate = params.dropout.predictor;
    let h1 = params.fc1.forward(cond)?;
    let mask1 = dropout_mask(h1.len(), rate, training, rng)?;
    let mut d1 = h1.clone();
    apply_mask(d1.data_mut(), mask1.as_deref());
    let h2 = params.fc2.forward(&d1)?;
    let mask2 = dropout_mask(h2.len(), rate, training, rng)?;
    let mut d2 = h2.clone();
    apply_mask(d2.data_mut(), mask2.as_deref());
    let logits = params.fc3.forward(&d2)?;
    let cache = PredictorCache { cond: cond.clone(), h1, mask1, d1, h2, mask2, d2, logits: logits.clone() };
    Ok((logits, cache))
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    batch: usize,
    steps: usize,
    char_ids: Vec<u32>,
    target_ids: Vec<u32>,
    targets: Vec<usize>,
    char_emb: Tensor,
    word: Option<Tensor>,
    encoded: Option<Tensor>,
    sentence: Option<Tensor>,
    blstm: Option<BlstmCache>,
    pub predictor: PredictorCache,
}

impl ForwardCache {
    /// Target character embeddings, `[B × char_dim]`.
    pub fn char_embedding(&self) -> &Tensor {
        &self.char_emb
    }

    pub fn word_condition(&self) -> Option<&Tensor> {
        self.word.as_ref()
    }

    /// Full BLSTM output, `[B × L × 2H]`.
    pub fn encoder_output(&self) -> Option<&Tensor> {
        self.encoded.as_ref()
    }

    pub fn sentence_condition(&self) -> Option<&Tensor> {
        self.sentence.as_ref()
    }

    pub fn condition(&self) -> &Tensor {
        &self.predictor.cond
    }

    pub fn logits(&self) -> &Tensor {
        &self.predictor.logits
    }

    /// Embedded sentence `[B × L × char_dim]`, rebuilt on demand.
    pub fn text_embedding(&self, params: &ModelParams) -> Result<Tensor> {
        embed_chars(&self.char_ids, self.batch, self.steps, &params.embedding)
    }
}

/// Full network forward pass.
pub fn forward(batch: &Batch, params: &ModelParams, words: Option<&WordVecStore>, training: bool, rng: &mut Rng) -> Result<(Tensor, ForwardCache)> {
    let variant = params.variant;
    let (n, steps) = (batch.len(), batch.max_len);
    if n == 0 {
        bail!(Shape, "empty batch");
    }
    let target_ids = batch.target_ids();
    let char_emb = embed_chars(&target_ids, n, 1, &params.embedding)?.reshape(&[n, params.dims.char_dim])?;
    let (encoded, sentence, blstm) = if variant.uses_sentence() {
        let Some(enc) = &params.encoder else {
            bail!(Config, "variant {variant} has no encoder parameters");
        };
        let embedded = embed_chars(&batch.char_ids, n, steps, &params.embedding)?;
        let (encoded, cache) = blstm_encode(&embedded, &batch.lengths, enc, params.dropout.encoder, training, rng)?;
        let sentence = select_position(&encoded, &batch.targets, &batch.lengths)?;
        (Some(encoded), Some(sentence), Some(cache))
    } else {
        (None, None, None)
    };
    let word = if variant.uses_word() {
        let Some(store) = words else {
            bail!(Config, "variant {variant} needs a word-vector store");
        };
        Some(store.gather(&batch.words)?)
    } else {
        None
    };
    let cond = assemble_condition(variant, &char_emb, word.as_ref(), sentence.as_ref())?;
    let (logits, predictor) = predict(&cond, params, training, rng)?;
    let cache = ForwardCache {
        batch: n,
        steps,
        char_ids: batch.char_ids.clone(),
        target_ids,
        targets: batch.targets.clone(),
        char_emb,
        word,
        encoded,
        sentence,
        blstm,
        predictor,
    };
    Ok((logits, cache))
}

fn scatter_rows(table: &mut Tensor, ids: &[u32], rows: &[f64], width: usize) {
    for (&id, row) in ids.iter().zip(rows.chunks_exact(width)) {
        if id == PAD_ID {
            continue;
        }
        table.row_mut(id as usize).iter_mut().zip(row).for_each(|(g, v)| *g += v);
    }
}

/// Gradients of every trainable tensor given `dL/dlogits`.
pub fn backward(params: &ModelParams, cache: &ForwardCache, d_logits: &Tensor) -> Result<ModelParams> {
    let mut grads = params.zeros_like();
    let p = &cache.predictor;
    let mut d_d2 = params.fc3.backward(&p.d2, &p.logits, d_logits, &mut grads.fc3)?;
    apply_mask(d_d2.data_mut(), p.mask2.as_deref());
    let mut d_d1 = params.fc2.backward(&p.d1, &p.h2, &d_d2, &mut grads.fc2)?;
    apply_mask(d_d1.data_mut(), p.mask1.as_deref());
    let d_cond = params.fc1.backward(&p.cond, &p.h1, &d_d1, &mut grads.fc1)?;

    let (n, width) = (cache.batch, d_cond.dim(1));
    let dims = &params.dims;
    let mut d_char = Vec::with_capacity(n * dims.char_dim);
    for b in 0..n {
        d_char.extend_from_slice(&d_cond.row(b)[..dims.char_dim]);
    }
    scatter_rows(&mut grads.embedding, &cache.target_ids, &d_char, dims.char_dim);

    if let (Some(blstm), Some(enc), Some(enc_grads)) = (&cache.blstm, &params.encoder, grads.encoder.as_mut()) {
        let offset = width - 2 * blstm.hidden;
        let enc_width = 2 * blstm.hidden;
        let mut d_enc = vec![0.0; n * cache.steps * enc_width];
        for b in 0..n {
            let at = (b * cache.steps + cache.targets[b]) * enc_width;
            let slot = &mut d_enc[at..at + enc_width];
            slot.copy_from_slice(&d_cond.row(b)[offset..]);
            if let Some(mask) = &blstm.mask {
                slot.iter_mut().zip(&mask[at..at + enc_width]).for_each(|(g, m)| *g *= m);
            }
        }
        let d_enc = Tensor::from_vec(&[n, cache.steps, enc_width], d_enc)?;
        let mut d_x = enc.fw.backward(&blstm.fw, &d_enc, 0, &mut enc_grads.fw)?;
        let d_x_bw = enc.bw.backward(&blstm.bw, &d_enc, blstm.hidden, &mut enc_grads.bw)?;
        d_x.axpy(1.0, &d_x_bw)?;
        scatter_rows(&mut grads.embedding, &cache.char_ids, d_x.data(), dims.char_dim);
    }
    Ok(grads)
}

/// Mean cross-entropy of `batch.gold`, its gradients, and the logits.
pub fn loss_and_gradients(
    batch: &Batch,
    params: &ModelParams,
    words: Option<&WordVecStore>,
    training: bool,
    rng: &mut Rng,
) -> Result<(f64, ModelParams, Tensor)> {
    let (logits, cache) = forward(batch, params, words, training, rng)?;
    let (loss, _, d_logits) = softmax_cross_entropy(&logits, &batch.gold)?;
    let grads = backward(params, &cache, &d_logits)?;
    Ok((loss, grads, logits))
}
