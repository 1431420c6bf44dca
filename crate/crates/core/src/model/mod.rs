//! The three conditional architectures (CW, CC, CWC).
//!
//! ```text
//! char ids ─► embedding ─► target row ─────────────────┐
//!          └► embedding ─► BLSTM ─► select target ──────┤ concat ─► fc1 ─► fc2 ─► fc3 ─► logits
//! word id  ─► pre-trained vector (frozen) ──────────────┘
//! ```

mod network;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::corpus::Lexicon;
use crate::error::{bail, Error, Result};
use crate::features::{CharVocab, PAD_ID, WORD_DIM};
use crate::numcore::init::{init_params, InitScheme};
use crate::numcore::{Activation, DenseParams, LstmParams, Parameters, Rng, Tensor};

pub use network::{
    assemble_condition, backward, blstm_encode, forward, loss_and_gradients, predict, select_position, BlstmCache,
    ForwardCache, PredictorCache,
};

/// Which conditions feed the predictor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Character embedding + word vector.
    Cw,
    /// Character embedding + sentence encoding.
    Cc,
    /// Character embedding + word vector + sentence encoding.
    Cwc,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Cw, Variant::Cc, Variant::Cwc];

    pub fn uses_word(self) -> bool {
        matches!(self, Variant::Cw | Variant::Cwc)
    }

    pub fn uses_sentence(self) -> bool {
        matches!(self, Variant::Cc | Variant::Cwc)
    }

    /// Width of `[char | word | sentence]` with absent parts omitted.
    pub fn concat_width(self, dims: &ModelDims) -> usize {
        dims.char_dim
            + if self.uses_word() { dims.word_dim } else { 0 }
            + if self.uses_sentence() { 2 * dims.hidden } else { 0 }
    }

    pub fn tag(self) -> u8 {
        match self {
            Variant::Cw => 0,
            Variant::Cc => 1,
            Variant::Cwc => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cw => "cw",
            Variant::Cc => "cc",
            Variant::Cwc => "cwc",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cw" | "wc" => Ok(Variant::Cw),
            "cc" => Ok(Variant::Cc),
            "cwc" => Ok(Variant::Cwc),
            other => Err(Error::Config(alloc::format!("unknown variant {other:?}"))),
        }
    }
}

/// Layer widths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub char_dim: usize,
    pub word_dim: usize,
    /// Per-direction LSTM size.
    pub hidden: usize,
    pub fc1: usize,
    pub fc2: usize,
    pub classes: usize,
}

impl ModelDims {
    /// 100-d characters, 200-d words, 2 × 256 BLSTM, 512 → 1024 → classes.
    pub const fn standard(classes: usize) -> Self {
        Self { char_dim: 100, word_dim: WORD_DIM, hidden: 256, fc1: 512, fc2: 1024, classes }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutRates {
    /// Applied to BLSTM outputs.
    pub encoder: f64,
    /// Applied after fc1 and fc2.
    pub predictor: f64,
}

impl Default for DropoutRates {
    fn default() -> Self {
        Self { encoder: 0.1, predictor: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub fw: LstmParams,
    pub bw: LstmParams,
}

/// Forget-gate bias at initialization.
pub const FORGET_BIAS: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub variant: Variant,
    pub dims: ModelDims,
    /// `[N_c × char_dim]`; row 0 (padding) stays zero.
    pub embedding: Tensor,
    pub encoder: Option<EncoderParams>,
    pub fc1: DenseParams,
    pub fc2: DenseParams,
    pub fc3: DenseParams,
    pub dropout: DropoutRates,
}

impl ModelParams {
    /// For variants without an encoder `dims.hidden` is recorded as 0.
    pub fn init(variant: Variant, mut dims: ModelDims, vocab_size: usize, rng: &mut Rng) -> Result<Self> {
        if !variant.uses_sentence() {
            dims.hidden = 0;
        }
        if vocab_size < 2 {
            bail!(Config, "vocabulary must hold at least the two reserved ids");
        }
        let mut embedding = init_params(&[vocab_size, dims.char_dim], InitScheme::UniformGlorot, rng)?;
        embedding.row_mut(PAD_ID as usize).fill(0.0);
        let encoder = if variant.uses_sentence() {
            Some(EncoderParams {
                fw: LstmParams::init(dims.char_dim, dims.hidden, FORGET_BIAS, rng)?,
                bw: LstmParams::init(dims.char_dim, dims.hidden, FORGET_BIAS, rng)?,
            })
        } else {
            None
        };
        let width = variant.concat_width(&dims);
        Ok(Self {
            variant,
            dims,
            embedding,
            encoder,
            fc1: DenseParams::init(width, dims.fc1, Activation::Relu, rng)?,
            fc2: DenseParams::init(dims.fc1, dims.fc2, Activation::Relu, rng)?,
            fc3: DenseParams::init(dims.fc2, dims.classes, Activation::None, rng)?,
            dropout: DropoutRates::default(),
        })
    }

    /// Reassembles parameters from named tensors (see [`Parameters`] names).
    pub fn from_named(variant: Variant, mut named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut take = |name: &str| -> Result<Tensor> {
            match named.iter().position(|(n, _)| n == name) {
                Some(i) => Ok(named.swap_remove(i).1),
                None => bail!(Format, "missing tensor {name}"),
            }
        };
        let embedding = take("char_embedding")?;
        let encoder = if variant.uses_sentence() {
            let mut lstm = |dir: &str| -> Result<LstmParams> {
                LstmParams::new(
                    take(&alloc::format!("encoder.{dir}.w_x"))?,
                    take(&alloc::format!("encoder.{dir}.w_h"))?,
                    take(&alloc::format!("encoder.{dir}.b"))?,
                )
            };
            Some(EncoderParams { fw: lstm("fw")?, bw: lstm("bw")? })
        } else {
            None
        };
        let mut dense = |name: &str, act| DenseParams::new(take(&alloc::format!("{name}.w"))?, take(&alloc::format!("{name}.b"))?, act);
        let fc1 = dense("fc1", Activation::Relu)?;
        let fc2 = dense("fc2", Activation::Relu)?;
        let fc3 = dense("fc3", Activation::None)?;
        if let Some((name, _)) = named.first() {
            bail!(Format, "unexpected tensor {name} for variant {variant}");
        }
        if embedding.rank() != 2 {
            bail!(Shape, "embedding must be rank 2");
        }
        let dims = ModelDims {
            char_dim: embedding.dim(1),
            word_dim: WORD_DIM,
            hidden: encoder.as_ref().map_or(0, |e| e.fw.hidden),
            fc1: fc1.d_out(),
            fc2: fc2.d_out(),
            classes: fc3.d_out(),
        };
        let params = Self { variant, dims, embedding, encoder, fc1, fc2, fc3, dropout: DropoutRates::default() };
        params.validate()?;
        Ok(params)
    }

    /// Checks every shape against `dims` and the variant.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        if self.embedding.rank() != 2 || self.embedding.dim(1) != d.char_dim {
            bail!(Shape, "embedding {:?} does not have width {}", self.embedding.shape(), d.char_dim);
        }
        match (&self.encoder, self.variant.uses_sentence()) {
            (Some(enc), true) => {
                for lstm in [&enc.fw, &enc.bw] {
                    lstm.validate()?;
                    if lstm.hidden != d.hidden || lstm.d_in() != d.char_dim {
                        bail!(Shape, "encoder LSTM is [{} -> {}], expected [{} -> {}]", lstm.d_in(), lstm.hidden, d.char_dim, d.hidden);
                    }
                }
            }
            (None, false) => {}
            (Some(_), false) => bail!(Config, "variant {} has no sentence encoder", self.variant),
            (None, true) => bail!(Config, "variant {} needs a sentence encoder", self.variant),
        }
        let width = self.variant.concat_width(d);
        for (name, layer, d_in, d_out) in [("fc1", &self.fc1, width, d.fc1), ("fc2", &self.fc2, d.fc1, d.fc2), ("fc3", &self.fc3, d.fc2, d.classes)] {
            layer.validate()?;
            if layer.d_in() != d_in || layer.d_out() != d_out {
                bail!(Shape, "{name} is [{} -> {}], expected [{d_in} -> {d_out}]", layer.d_in(), layer.d_out());
            }
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.dim(0)
    }

    /// Same layout, all zeros; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut(&mut |_, t| t.fill(0.0));
        z
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut names = Vec::new();
        self.visit(&mut |name, _| names.push(String::from(name)));
        names.into_iter().zip(self.tensor_refs()).collect()
    }

    /// Tensors in [`Parameters::visit`] order.
    fn tensor_refs(&self) -> Vec<&Tensor> {
        let mut v: Vec<&Tensor> = alloc::vec![&self.embedding];
        if let Some(enc) = &self.encoder {
            for l in [&enc.fw, &enc.bw] {
                v.extend([&l.w_x, &l.w_h, &l.b]);
            }
        }
        for d in [&self.fc1, &self.fc2, &self.fc3] {
            v.extend([&d.w, &d.b]);
        }
        v
    }

    pub fn is_finite(&self) -> bool {
        self.tensor_refs().iter().all(|t| t.is_finite())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensor_refs().iter().map(|t| t.len()).sum()
    }
}

impl Parameters for ModelParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("char_embedding", &self.embedding);
        if let Some(enc) = &self.encoder {
            for (dir, l) in [("fw", &enc.fw), ("bw", &enc.bw)] {
                f(&alloc::format!("encoder.{dir}.w_x"), &l.w_x);
                f(&alloc::format!("encoder.{dir}.w_h"), &l.w_h);
                f(&alloc::format!("encoder.{dir}.b"), &l.b);
            }
        }
        for (name, d) in [("fc1", &self.fc1), ("fc2", &self.fc2), ("fc3", &self.fc3)] {
            f(&alloc::format!("{name}.w"), &d.w);
            f(&alloc::format!("{name}.b"), &d.b);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("char_embedding", &mut self.embedding);
        if let Some(enc) = &mut self.encoder {
            for (dir, l) in [("fw", &mut enc.fw), ("bw", &mut enc.bw)] {
                f(&alloc::format!("encoder.{dir}.w_x"), &mut l.w_x);
                f(&alloc::format!("encoder.{dir}.w_h"), &mut l.w_h);
                f(&alloc::format!("encoder.{dir}.b"), &mut l.b);
            }
        }
        for (name, d) in [("fc1", &mut self.fc1), ("fc2", &mut self.fc2), ("fc3", &mut self.fc3)] {
            f(&alloc::format!("{name}.w"), &mut d.w);
            f(&alloc::format!("{name}.b"), &mut d.b);
        }
    }
}

/// Trained parameters together with the vocabulary and lexicon they were trained against.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub vocab: CharVocab,
    pub lexicon: Lexicon,
}

impl Model {
    pub fn new(params: ModelParams, vocab: CharVocab, lexicon: Lexicon) -> Result<Self> {
        params.validate()?;
        if params.vocab_size() != vocab.len() {
            bail!(Config, "embedding has {} rows, vocabulary {}", params.vocab_size(), vocab.len());
        }
        if params.dims.classes != lexicon.num_classes() {
            bail!(Config, "model predicts {} classes, lexicon has {}", params.dims.classes, lexicon.num_classes());
        }
        Ok(Self { params, vocab, lexicon })
    }

    pub fn variant(&self) -> Variant {
        self.params.variant
    }

    /// Fails unless the model was trained as `expected`.
    pub fn expect_variant(&self, expected: Variant) -> Result<()> {
        if self.variant() != expected {
            bail!(Config, "model is variant {}, expected {expected}", self.variant());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_widths() {
        let dims = ModelDims::standard(285);
        let widths: Vec<usize> = Variant::ALL.iter().map(|v| v.concat_width(&dims)).collect();
        assert_eq!(widths, alloc::vec![300, 612, 812]);
    }

    #[test]
    fn init_respects_variant() {
        let dims = ModelDims { char_dim: 4, word_dim: WORD_DIM, hidden: 3, fc1: 5, fc2: 6, classes: 7 };
        let mut rng = Rng::new(0);
        let cw = ModelParams::init(Variant::Cw, dims, 10, &mut rng).unwrap();
        assert!(cw.encoder.is_none());
        assert_eq!(cw.fc1.d_in(), 204);
        let cwc = ModelParams::init(Variant::Cwc, dims, 10, &mut rng).unwrap();
        assert_eq!(cwc.fc1.d_in(), 210);
        assert!(cwc.embedding.row(0).iter().all(|&v| v == 0.0));
        let enc = cwc.encoder.as_ref().unwrap();
        assert!(enc.fw.b.data()[3..6].iter().all(|&v| v == FORGET_BIAS));
        assert!(enc.fw.b.data()[..3].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn named_round_trip() {
        let dims = ModelDims { char_dim: 4, word_dim: WORD_DIM, hidden: 3, fc1: 5, fc2: 6, classes: 7 };
        for v in Variant::ALL {
            let p = ModelParams::init(v, dims, 10, &mut Rng::new(1)).unwrap();
            let named = p.named_tensors().into_iter().map(|(n, t)| (n, t.clone())).collect();
            assert_eq!(ModelParams::from_named(v, named).unwrap(), p);
        }
        let p = ModelParams::init(Variant::Cc, dims, 10, &mut Rng::new(1)).unwrap();
        let named = p.named_tensors().into_iter().map(|(n, t)| (n, t.clone())).collect();
        assert!(ModelParams::from_named(Variant::Cw, named).is_err());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("CWC".parse::<Variant>().unwrap(), Variant::Cwc);
        assert!("xyz".parse::<Variant>().is_err());
    }
}
