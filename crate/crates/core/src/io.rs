//! On-disk formats.
//!
//! *Model file* (`KGMODEL1`), little-endian throughout:
//!
//! ```text
//! magic      8 bytes  "KGMODEL1"
//! kind       u8       0 = CP, 1 = ComplEx, 2 = RESCAL
//! dim        u32
//! entities   u32      count, then per name: u32 byte length + UTF-8
//! relations  u32      original relations only, same encoding
//! n_rel      u32      relation rows stored (2x originals when augmented)
//! tables     f64      entity, [tail (CP)], relation; row-major
//! ```
//!
//! *Embedding export* (`KGEMB001`): magic, u32 row count, u32 dim, then
//! row-major f32 values.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{concatenate, Array2, Axis};

use crate::data::Vocab;
use crate::error::{KgeError, Result};
use crate::model::{ModelKind, ModelParams};

pub const MODEL_MAGIC: &[u8; 8] = b"KGMODEL1";
pub const EMBEDDING_MAGIC: &[u8; 8] = b"KGEMB001";

/// A trained model together with the vocabulary it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub params: ModelParams,
    pub vocab: Vocab,
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| KgeError::Format(format!("{v} does not fit in u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_names(buf: &mut Vec<u8>, names: &[String]) -> Result<()> {
    put_u32(buf, names.len())?;
    for n in names {
        put_u32(buf, n.len())?;
        buf.extend_from_slice(n.as_bytes());
    }
    Ok(())
}

pub fn encode_model(model: &SavedModel) -> Result<Vec<u8>> {
    let p = &model.params;
    let mut buf = Vec::with_capacity(32 + 8 * p.tables.n_values());
    buf.extend_from_slice(MODEL_MAGIC);
    buf.push(p.kind.code());
    put_u32(&mut buf, p.dim)?;
    put_names(&mut buf, model.vocab.entity_names())?;
    put_names(&mut buf, model.vocab.relation_names())?;
    put_u32(&mut buf, p.n_relations())?;
    for table in p.tables.arrays() {
        for x in table.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| KgeError::Format("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn names(&mut self) -> Result<Vec<String>> {
        let n = self.u32()?;
        let mut out = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let len = self.u32()?;
            let raw = self.take(len)?;
            out.push(
                String::from_utf8(raw.to_vec())
                    .map_err(|_| KgeError::Format("name is not UTF-8".into()))?,
            );
        }
        Ok(out)
    }

    fn table(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| KgeError::Format("table size overflows".into()))?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| KgeError::Format("table size overflows".into()))?)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<SavedModel> {
    let mut rd = Reader { bytes, pos: 0 };
    if rd.take(8)? != MODEL_MAGIC {
        return Err(KgeError::Format("bad magic bytes".into()));
    }
    let code = rd.take(1)?[0];
    let kind = ModelKind::from_code(code)
        .ok_or_else(|| KgeError::Format(format!("unknown model kind code {code}")))?;
    let dim = rd.u32()?;
    let entities = rd.names()?;
    let relations = rd.names()?;
    let n_rel = rd.u32()?;
    let augmented = n_rel == 2 * relations.len() && !relations.is_empty();
    if !augmented && n_rel != relations.len() {
        return Err(KgeError::Format(format!(
            "{n_rel} relation rows for {} named relations",
            relations.len()
        )));
    }
    let n_ent = entities.len();
    let mut params = ModelParams::zeros(kind, n_ent, n_rel, dim)
        .map_err(|e| KgeError::Format(e.to_string()))?;
    for table in params.tables.arrays_mut() {
        let (r, c) = table.dim();
        *table = rd.table(r, c)?;
    }
    if rd.pos != bytes.len() {
        return Err(KgeError::Format(format!(
            "{} trailing bytes",
            bytes.len() - rd.pos
        )));
    }
    let vocab = Vocab::from_names(entities, relations, augmented)
        .map_err(|e| KgeError::Format(e.to_string()))?;
    Ok(SavedModel { params, vocab })
}

pub fn save_model(path: impl AsRef<Path>, model: &SavedModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)?).map_err(|e| KgeError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| KgeError::io(path, e))?;
    decode_model(&bytes)
}

/// Entity embedding matrix as exported: the shared table, or `[head | tail]`
/// side by side for CP.
pub fn entity_export_matrix(params: &ModelParams) -> Array2<f64> {
    match &params.tables.tail {
        Some(t) => concatenate(Axis(1), &[params.tables.entity.view(), t.view()])
            .expect("tables share a row count"),
        None => params.tables.entity.clone(),
    }
}

/// `name<TAB>v1<TAB>...<TAB>vD` per entity.
pub fn write_embeddings_tsv<W: Write>(out: W, names: &[String], matrix: &Array2<f64>) -> Result<()> {
    if names.len() != matrix.nrows() {
        return Err(KgeError::Contract(format!(
            "{} names for {} rows",
            names.len(),
            matrix.nrows()
        )));
    }
    let mut out = BufWriter::new(out);
    let wrap = |e| KgeError::io("<embedding tsv>", e);
    for (name, row) in names.iter().zip(matrix.rows()) {
        out.write_all(name.as_bytes()).map_err(wrap)?;
        for x in row {
            write!(out, "\t{x}").map_err(wrap)?;
        }
        out.write_all(b"\n").map_err(wrap)?;
    }
    out.flush().map_err(wrap)
}

pub fn encode_embeddings_binary(matrix: &Array2<f64>) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(16 + 4 * matrix.len());
    buf.extend_from_slice(EMBEDDING_MAGIC);
    put_u32(&mut buf, matrix.nrows())?;
    put_u32(&mut buf, matrix.ncols())?;
    for &x in matrix.iter() {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_embeddings_binary(bytes: &[u8]) -> Result<Array2<f32>> {
    let mut rd = Reader { bytes, pos: 0 };
    if rd.take(8)? != EMBEDDING_MAGIC {
        return Err(KgeError::Format("bad magic bytes".into()));
    }
    let rows = rd.u32()?;
    let cols = rd.u32()?;
    let raw = rd.take(rows * cols * 4)?;
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if rd.pos != bytes.len() {
        return Err(KgeError::Format("trailing bytes".into()));
    }
    Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample(kind: ModelKind) -> SavedModel {
        let vocab = Vocab::from_names(
            vec!["a".into(), "b".into(), "ç".into()],
            vec!["r".into()],
            true,
        )
        .unwrap();
        SavedModel {
            params: ModelParams::random(kind, 3, 2, 4, 0.5, 11).unwrap(),
            vocab,
        }
    }

    #[test]
    fn model_roundtrip_is_exact() {
        for kind in [ModelKind::Cp, ModelKind::ComplEx, ModelKind::Rescal] {
            let m = sample(kind);
            let bytes = encode_model(&m).unwrap();
            assert_eq!(decode_model(&bytes).unwrap(), m);
        }
    }

    #[test]
    fn corrupt_model_rejected() {
        let mut bytes = encode_model(&sample(ModelKind::Cp)).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(KgeError::Format(_))));
        let bytes = encode_model(&sample(ModelKind::Cp)).unwrap();
        assert!(decode_model(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn binary_export_layout() {
        let m = array![[1.0, 2.0, 3.0], [-0.5, 0.25, 8.0]];
        let bytes = encode_embeddings_binary(&m).unwrap();
        assert_eq!(&bytes[..8], b"KGEMB001");
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 6 * 4);
        assert_eq!(decode_embeddings_binary(&bytes).unwrap(), m.mapv(|x| x as f32));
    }

    #[test]
    fn tsv_rows() {
        let m = array![[1.0, 2.5], [0.0, -1.0]];
        let mut out = Vec::new();
        write_embeddings_tsv(&mut out, &["x".into(), "y".into()], &m).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "x\t1\t2.5\ny\t0\t-1\n");
    }

    #[test]
    fn cp_export_concatenates_roles() {
        let m = sample(ModelKind::Cp);
        assert_eq!(entity_export_matrix(&m.params).dim(), (3, 8));
        let m = sample(ModelKind::Rescal);
        assert_eq!(entity_export_matrix(&m.params).dim(), (3, 4));
    }
}
