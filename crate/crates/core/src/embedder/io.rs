//! Binary model files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "FTAG"  u16 version
//! u32 dim  u32 epoch  u8 word_ngrams  u32 min_count  u8 loss  f64 lr  u64 buckets  u64 seed
//! u32 #words  { u32 len, utf-8 bytes, u64 count }*
//! u32 #labels { u32 len, utf-8 bytes }*
//! u64 rows  u64 cols  f32[rows*cols]      input matrix, row-major
//! u64 rows  u64 cols  f32[rows*cols]      output matrix, row-major
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use super::{EmbedderError, Loss, Matrix, Model, ModelParams, Vocabulary};

pub const MAGIC: &[u8; 4] = b"FTAG";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u16),
    #[error("model file is truncated")]
    Truncated,
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for FormatError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            FormatError::Truncated
        } else {
            FormatError::Io(e)
        }
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, FormatError> {
    let len = r.read_u32::<LE>()? as usize;
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(FormatError::Truncated);
    }
    String::from_utf8(buf).map_err(|e| FormatError::Corrupt(e.to_string()))
}

fn write_matrix<W: Write>(w: &mut W, m: &Matrix<f32>) -> io::Result<()> {
    w.write_u64::<LE>(m.rows() as u64)?;
    w.write_u64::<LE>(m.cols() as u64)?;
    for &x in m.as_slice() {
        w.write_f32::<LE>(x)?;
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Matrix<f32>, FormatError> {
    let (got_rows, got_cols) = (r.read_u64::<LE>()?, r.read_u64::<LE>()?);
    if (got_rows, got_cols) != (rows as u64, cols as u64) {
        return Err(FormatError::Corrupt(format!(
            "matrix is {got_rows}x{got_cols}, expected {rows}x{cols}"
        )));
    }
    let mut data = vec![0f32; rows * cols];
    r.read_f32_into::<LE>(&mut data)?;
    if data.iter().any(|x| !x.is_finite()) {
        return Err(FormatError::Corrupt("non-finite weight".into()));
    }
    Matrix::from_vec(rows, cols, data).ok_or_else(|| FormatError::Corrupt("matrix shape".into()))
}

pub fn write_model<W: Write>(model: &Model<f32>, mut w: W) -> io::Result<()> {
    let p = model.params();
    w.write_all(MAGIC)?;
    w.write_u16::<LE>(VERSION)?;
    w.write_u32::<LE>(p.dim as u32)?;
    w.write_u32::<LE>(p.epoch as u32)?;
    w.write_u8(p.word_ngrams as u8)?;
    w.write_u32::<LE>(p.min_count as u32)?;
    w.write_u8(match p.loss {
        Loss::Softmax => 0,
        Loss::Ova => 1,
    })?;
    w.write_f64::<LE>(p.learning_rate)?;
    w.write_u64::<LE>(p.buckets as u64)?;
    w.write_u64::<LE>(p.seed)?;

    let vocab = model.vocab();
    w.write_u32::<LE>(vocab.num_words() as u32)?;
    for (word, count) in vocab.words() {
        write_str(&mut w, word)?;
        w.write_u64::<LE>(*count)?;
    }
    w.write_u32::<LE>(vocab.labels().len() as u32)?;
    for label in vocab.labels() {
        write_str(&mut w, label)?;
    }
    write_matrix(&mut w, model.input_matrix())?;
    write_matrix(&mut w, model.output_matrix())?;
    w.flush()
}

pub fn read_model<R: Read>(mut r: R) -> Result<Model<f32>, EmbedderError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(FormatError::from)?;
    if &magic != MAGIC {
        return Err(FormatError::BadMagic.into());
    }
    let version = r.read_u16::<LE>().map_err(FormatError::from)?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    Ok(read_body(&mut r)?)
}

fn read_body<R: Read>(r: &mut R) -> Result<Model<f32>, FormatError> {
    let dim = r.read_u32::<LE>()? as usize;
    let epoch = r.read_u32::<LE>()? as usize;
    let word_ngrams = r.read_u8()? as usize;
    let min_count = r.read_u32::<LE>()? as usize;
    let loss = match r.read_u8()? {
        0 => Loss::Softmax,
        1 => Loss::Ova,
        other => return Err(FormatError::Corrupt(format!("unknown loss tag {other}"))),
    };
    let learning_rate = r.read_f64::<LE>()?;
    let buckets = r.read_u64::<LE>()? as usize;
    let seed = r.read_u64::<LE>()?;
    let params = ModelParams { dim, epoch, word_ngrams, min_count, loss, learning_rate, buckets, seed };
    params.validate().map_err(|e| FormatError::Corrupt(e.to_string()))?;

    let n_words = r.read_u32::<LE>()? as usize;
    let mut words = Vec::with_capacity(n_words.min(1 << 20));
    for _ in 0..n_words {
        let word = read_str(r)?;
        words.push((word, r.read_u64::<LE>()?));
    }
    let n_labels = r.read_u32::<LE>()? as usize;
    let mut labels = Vec::with_capacity(n_labels.min(1 << 16));
    for _ in 0..n_labels {
        labels.push(read_str(r)?);
    }
    let input = read_matrix(r, n_words + buckets, dim)?;
    let output = read_matrix(r, n_labels, dim)?;
    let vocab = Vocabulary::from_ordered(words, labels);
    Model::from_parts(params, vocab, input, output).map_err(|e| FormatError::Corrupt(e.to_string()))
}

pub fn save_model(model: &Model<f32>, path: impl AsRef<Path>) -> Result<(), EmbedderError> {
    let file = File::create(path).map_err(FormatError::Io)?;
    write_model(model, BufWriter::new(file)).map_err(FormatError::Io)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model<f32>, EmbedderError> {
    let file = File::open(path).map_err(FormatError::Io)?;
    read_model(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::{train, TrainingExample};

    fn toy_model() -> Model<f32> {
        let data = vec![
            TrainingExample { labels: vec!["a".into()], text: "alpha beta".into() },
            TrainingExample { labels: vec!["b b".into()], text: "gamma delta".into() },
        ];
        let p = ModelParams { dim: 4, epoch: 3, min_count: 1, buckets: 8, seed: 11, ..Default::default() };
        train(&data, &p).unwrap()
    }

    fn bytes(m: &Model<f32>) -> Vec<u8> {
        let mut buf = Vec::new();
        write_model(m, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_exact() {
        let m = toy_model();
        let buf = bytes(&m);
        assert_eq!(&buf[..4], b"FTAG");
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(bytes(&back), buf);
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let mut buf = bytes(&toy_model());
        buf[0] = b'X';
        assert!(matches!(read_model(buf.as_slice()), Err(EmbedderError::Format(FormatError::BadMagic))));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut buf = bytes(&toy_model());
        buf[4] = 9;
        assert!(matches!(
            read_model(buf.as_slice()),
            Err(EmbedderError::Format(FormatError::UnsupportedVersion(9)))
        ));
    }

    #[test]
    fn truncation_is_detected_everywhere() {
        let buf = bytes(&toy_model());
        for cut in [0, 3, 5, 20, 45, buf.len() / 2, buf.len() - 1] {
            let err = read_model(&buf[..cut]).unwrap_err();
            assert!(
                matches!(err, EmbedderError::Format(FormatError::Truncated)),
                "cut {cut}: {err}"
            );
        }
    }
}
