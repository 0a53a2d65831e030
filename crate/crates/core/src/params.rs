//! Named parameter storage shared by every trainable module.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::Matrix;

/// Index of a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Weight matrix `fan_in x fan_out`, uniform in ±1/sqrt(fan_in).
    pub fn add_weight<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        self.add(name, Matrix::uniform(fan_in, fan_out, bound, rng))
    }

    /// Bias row `1 x width`, uniform in ±1/sqrt(fan_in).
    pub fn add_bias<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        width: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        self.add(name, Matrix::uniform(1, width, bound, rng))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Matrix)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(Matrix::all_finite)
    }

    /// Replace all values from `other`, which must carry identical names and shapes.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<(), String> {
        if self.names.len() != other.names.len() {
            return Err(format!(
                "expected {} parameter tensors, found {}",
                self.names.len(),
                other.names.len()
            ));
        }
        for (i, name) in self.names.iter().enumerate() {
            let theirs = other
                .find(name)
                .ok_or_else(|| format!("missing parameter {name}"))?;
            let src = other.get(theirs);
            if src.shape() != self.values[i].shape() {
                return Err(format!(
                    "parameter {name}: expected shape {:?}, found {:?}",
                    self.values[i].shape(),
                    src.shape()
                ));
            }
            self.values[i] = src.clone();
        }
        Ok(())
    }
}
