use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{glorot_uniform, Tensor};

use super::Vocabulary;

/// `[rows × dim]` lookup table. Row 0 and rows of words without a pretrained
/// vector are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub matrix: Tensor,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            matrix: Tensor::zeros(&[rows, dim]),
            trainable: false,
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn row(&self, index: usize) -> &[f64] {
        let d = self.dim();
        &self.matrix.data()[index * d..(index + 1) * d]
    }
}

/// Reads GloVe-style text vectors (`word v1 … v_dim` per line) for the words in
/// `vocab`. Lines for other words are still validated.
pub fn load_embeddings(path: impl AsRef<Path>, vocab: &Vocabulary, dim: usize) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    if dim == 0 {
        return Err(Error::invalid("embedding dimension must be positive"));
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut emb = EmbeddingMatrix::zeros(vocab.rows(), dim);
    let mut filled = vec![false; vocab.rows()];
    let mut values = Vec::with_capacity(dim);

    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = lineno + 1;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        values.clear();
        for field in fields {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("{field:?} is not a number"),
            })?;
            values.push(v);
        }
        if values.len() != dim {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        if let Some(idx) = vocab.get(word) {
            let idx = idx as usize;
            if !filled[idx] {
                emb.matrix.data_mut()[idx * dim..(idx + 1) * dim].copy_from_slice(&values);
                filled[idx] = true;
            }
        }
    }
    let found = filled.iter().filter(|&&f| f).count();
    log::info!(
        "loaded embeddings for {found}/{} vocabulary words from {}",
        vocab.len(),
        path.display()
    );
    Ok(emb)
}

/// Glorot-uniform rows for every vocabulary word; row 0 stays zero. Stand-in
/// when no pretrained vectors are available.
pub fn random_embeddings(vocab: &Vocabulary, dim: usize, rng: &mut Rng) -> Result<EmbeddingMatrix> {
    let rows = vocab.rows();
    let mut emb = EmbeddingMatrix::zeros(rows, dim);
    if rows > 1 {
        let body = glorot_uniform(rng, rows, dim, &[rows - 1, dim])?;
        emb.matrix.data_mut()[dim..].copy_from_slice(body.data());
    }
    Ok(emb)
}
