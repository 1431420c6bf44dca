//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! "PGQP"  u32 version  u8 variant
//! u32 n_chars    { u32 code point }            ids 2.. in order
//! u32 n_pinyin   { u32 len, utf-8 bytes }      class inventory
//! u32 n_entries  { u32 code point, u32 n, n × u32 class }   lexicon
//! u32 n_tensors  { u32 len, name, u32 rank, rank × u64 dim, f64 data }
//! ```

use std::fs;
use std::path::Path;

use polyphone_core::corpus::Lexicon;
use polyphone_core::features::CharVocab;
use polyphone_core::model::{Model, ModelParams, Variant};
use polyphone_core::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PGQP";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("count fits in u32").to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(model.variant().tag());
    let known = model.vocab.known();
    put_u32(&mut out, known.len());
    for &ch in known {
        put_u32(&mut out, ch as usize);
    }
    let inventory = model.lexicon.inventory();
    put_u32(&mut out, inventory.len());
    for p in inventory {
        put_str(&mut out, p);
    }
    let entries: Vec<_> = model.lexicon.entries().collect();
    put_u32(&mut out, entries.len());
    for (ch, classes) in entries {
        put_u32(&mut out, ch as usize);
        put_u32(&mut out, classes.len());
        for &c in classes {
            put_u32(&mut out, c);
        }
    }
    let tensors = model.params.named_tensors();
    put_u32(&mut out, tensors.len());
    for (name, t) in tensors {
        put_str(&mut out, &name);
        put_u32(&mut out, t.rank());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::format(format!("truncated checkpoint while reading {what} at byte {}", self.pos)));
        };
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)?;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::format(format!("{what} is not valid UTF-8")))
    }

    fn char(&mut self, what: &str) -> Result<char> {
        let v = self.u32(what)?;
        char::from_u32(v as u32).ok_or_else(|| Error::format(format!("{what}: invalid code point {v:#x}")))
    }

    /// Bounds a declared element count by the bytes left, so corrupt
    /// counts fail as truncation instead of huge allocations.
    fn count(&mut self, min_size: usize, what: &str) -> Result<usize> {
        let n = self.u32(what)?;
        if n.saturating_mul(min_size) > self.bytes.len() - self.pos {
            return Err(Error::format(format!("truncated checkpoint: {n} {what} announced")));
        }
        Ok(n)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format("not a checkpoint (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != VERSION as usize {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let tag = r.u8("variant")?;
    let variant = Variant::from_tag(tag).ok_or_else(|| Error::format(format!("unknown variant tag {tag}")))?;

    let n = r.count(4, "vocabulary entries")?;
    let chars = (0..n).map(|_| r.char("vocabulary")).collect::<Result<Vec<_>>>()?;
    let vocab = CharVocab::from_chars(chars.iter().copied());
    if vocab.known() != chars.as_slice() {
        return Err(Error::format("vocabulary has duplicate or reserved characters"));
    }

    let n = r.count(4, "pinyin classes")?;
    let inventory = (0..n).map(|_| r.string("pinyin")).collect::<Result<Vec<_>>>()?;
    let n = r.count(8, "lexicon entries")?;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let ch = r.char("lexicon character")?;
        let k = r.count(4, "candidates")?;
        let classes = (0..k).map(|_| r.u32("candidate")).collect::<Result<Vec<_>>>()?;
        entries.push((ch, classes));
    }
    let lexicon = Lexicon::from_classes(inventory, entries)?;

    let n = r.count(8, "tensors")?;
    let mut named = Vec::with_capacity(n);
    for _ in 0..n {
        let name = r.string("tensor name")?;
        let rank = r.count(8, "dimensions")?;
        let mut shape = Vec::with_capacity(rank);
        let mut len: usize = 1;
        for _ in 0..rank {
            let d = usize::try_from(r.u64("dimension")?).map_err(|_| Error::format("dimension overflow"))?;
            len = len.checked_mul(d).ok_or_else(|| Error::format("tensor size overflow"))?;
            shape.push(d);
        }
        let raw = r.take(len.checked_mul(8).ok_or_else(|| Error::format("tensor size overflow"))?, &name)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let t = Tensor::from_vec(&shape, data).map_err(|e| Error::format(format!("tensor {name}: {e}")))?;
        named.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(Error::format(format!("{} trailing bytes after checkpoint", bytes.len() - r.pos)));
    }
    let params = ModelParams::from_named(variant, named)?;
    Ok(Model::new(params, vocab, lexicon)?)
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Loads a checkpoint and fails with a config error unless it holds `expected`.
pub fn load_variant(path: impl AsRef<Path>, expected: Variant) -> Result<Model> {
    let model = load(path)?;
    model.expect_variant(expected)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use polyphone_core::model::ModelDims;
    use polyphone_core::Rng;

    fn model(variant: Variant) -> Model {
        let lexicon = Lexicon::from_entries([('将', vec!["jiang1", "jiang4"]), ('得', vec!["de2", "dei3", "de5"])]).unwrap();
        let vocab = CharVocab::from_chars("我将得不".chars());
        let dims = ModelDims { char_dim: 3, word_dim: 200, hidden: 2, fc1: 4, fc2: 5, classes: lexicon.num_classes() };
        let params = ModelParams::init(variant, dims, vocab.len(), &mut Rng::new(3)).unwrap();
        Model::new(params, vocab, lexicon).unwrap()
    }

    #[test]
    fn round_trip_every_variant() {
        for v in Variant::ALL {
            let m = model(v);
            let bytes = encode(&m);
            let back = decode(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode(&back), bytes);
        }
    }

    #[test]
    fn header_errors() {
        let mut bytes = encode(&model(Variant::Cc));
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
        assert!(decode(&bytes[..7]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        bytes[4] = 9;
        assert!(decode(&bytes).unwrap_err().to_string().contains("version"));
        bytes[0] = b'X';
        assert!(decode(&bytes).unwrap_err().to_string().contains("magic"));
    }

    #[test]
    fn every_truncation_is_rejected() {
        let bytes = encode(&model(Variant::Cw));
        for cut in 0..bytes.len() {
            assert!(decode(&bytes[..cut]).is_err(), "accepted prefix of {cut} bytes");
        }
    }

    #[test]
    fn variant_mismatch_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save(&model(Variant::Cc), &path).unwrap();
        let err = load_variant(&path, Variant::Cwc).unwrap_err();
        assert!(matches!(err, Error::Core(polyphone_core::Error::Config(_))), "{err}");
        assert!(load_variant(&path, Variant::Cc).is_ok());
    }
}
