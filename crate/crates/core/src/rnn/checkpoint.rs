//! Binary checkpoint format.
//!
//! ```text
//! "UNRV"  u32 version
//! u32 provenance length, UTF-8 provenance text
//! u32 vocab, u32 embed, u32 hidden, u32 classes
//! vocab entries in id order: u32 byte length, UTF-8 bytes
//! E, W_i, W_f, W_o, W_c, U_i, U_f, U_o, U_c, b_i, b_f, b_o, b_c, W_y, b_y
//! ```
//!
//! All integers are little-endian; every matrix is row-major little-endian
//! `f32`.

use std::io::{Read, Write};

use super::model::{Dims, LstmModel};
use super::vocab::Vocab;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"UNRV";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: LstmModel,
    pub vocab: Vocab,
    /// Free-form text recorded with the weights, such as the seed and the
    /// digest of the training corpus.
    pub provenance: String,
}

fn put_u32<W: Write>(out: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} exceeds u32")))?;
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_bytes<W: Write>(out: &mut W, bytes: &[u8]) -> Result<()> {
    put_u32(out, bytes.len())?;
    out.write_all(bytes)?;
    Ok(())
}

pub fn write_checkpoint<W: Write>(mut out: W, checkpoint: &Checkpoint) -> Result<()> {
    let Checkpoint {
        model,
        vocab,
        provenance,
    } = checkpoint;
    model.validate()?;
    if vocab.len() != model.dims.vocab {
        return Err(Error::Checkpoint(format!(
            "vocabulary has {} entries but the model expects {}",
            vocab.len(),
            model.dims.vocab
        )));
    }
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    put_bytes(&mut out, provenance.as_bytes())?;
    let d = model.dims;
    for v in [d.vocab, d.embed, d.hidden, d.classes] {
        put_u32(&mut out, v)?;
    }
    for token in vocab.tokens() {
        put_bytes(&mut out, token.as_bytes())?;
    }
    let mut buf = Vec::new();
    for tensor in model.parameters() {
        buf.clear();
        buf.extend(tensor.iter().flat_map(|v| v.to_le_bytes()));
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn exact(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint(format!("truncated while reading {what}")))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.exact(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)?;
        String::from_utf8(self.exact(n, what)?)
            .map_err(|_| Error::Checkpoint(format!("{what} is not valid UTF-8")))
    }

    fn floats(&mut self, out: &mut [f32], what: &str) -> Result<()> {
        let bytes = self.exact(out.len() * 4, what)?;
        for (v, chunk) in out.iter_mut().zip(bytes.chunks_exact(4)) {
            *v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        Ok(())
    }
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<Checkpoint> {
    let mut r = Reader { inner: input };
    if r.exact(4, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic number".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let provenance = r.string("provenance")?;
    let dims = Dims {
        vocab: r.u32("dimensions")?,
        embed: r.u32("dimensions")?,
        hidden: r.u32("dimensions")?,
        classes: r.u32("dimensions")?,
    };
    if dims.vocab < 2 || dims.embed == 0 || dims.hidden == 0 || dims.classes == 0 {
        return Err(Error::Checkpoint(format!("invalid dimensions {dims:?}")));
    }
    let tokens = (0..dims.vocab)
        .map(|_| r.string("vocabulary"))
        .collect::<Result<Vec<_>>>()?;
    let vocab = Vocab::from_list(tokens)?;
    let mut model = LstmModel::zeros(dims);
    for tensor in model.parameters_mut() {
        r.floats(tensor, "weights")?;
    }
    let mut rest = Vec::new();
    r.inner.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    model
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(Checkpoint {
        model,
        vocab,
        provenance,
    })
}
