use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Matrix;

/// Default word vector width.
pub const DEFAULT_WORD_DIM: usize = 300;

/// Seeded fixed word-vector table with a shared out-of-vocabulary vector.
#[derive(Clone, Debug, PartialEq)]
pub struct WordEmbeddings {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
    oov: Vec<f64>,
}

fn token_hash(token: &str) -> u64 {
    // FNV-1a
    token.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn seeded_vector(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

impl WordEmbeddings {
    /// Each token's vector depends only on `(token, seed, dim)`.
    pub fn new<S: AsRef<str>>(vocab: &[S], dim: usize, seed: u64) -> Self {
        let table = vocab
            .iter()
            .map(|t| {
                let t = t.as_ref();
                (t.to_string(), seeded_vector(seed ^ token_hash(t), dim))
            })
            .collect();
        let oov = seeded_vector(seed ^ token_hash("<unk>"), dim);
        Self { dim, table, oov }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, token: &str) -> bool {
        self.table.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> &[f64] {
        self.table.get(token).unwrap_or(&self.oov)
    }

    /// One vector per token.
    pub fn embed_words<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Vec<f64>> {
        tokens.iter().map(|t| self.vector(t.as_ref()).to_vec()).collect()
    }

    /// `L x dim` matrix of the sentence's word vectors.
    pub fn embed_matrix<S: AsRef<str>>(&self, tokens: &[S]) -> Matrix {
        let mut data = Vec::with_capacity(tokens.len() * self.dim);
        for t in tokens {
            data.extend_from_slice(self.vector(t.as_ref()));
        }
        Matrix::from_vec(tokens.len(), self.dim, data)
    }
}
