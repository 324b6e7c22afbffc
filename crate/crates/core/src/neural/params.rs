use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tensor::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named trainable matrices in creation order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
    index: HashMap<String, usize>,
}

/// Flat serialized form of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedParam {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter `{name}`");
        let id = self.values.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        ParamId(id)
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
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    pub fn to_named(&self) -> Vec<NamedParam> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(name, m)| NamedParam { name: name.clone(), rows: m.rows, cols: m.cols, data: m.data.clone() })
            .collect()
    }

    /// Overwrites every parameter from `named`, which must match names and
    /// shapes exactly.
    pub fn load_named(&mut self, named: &[NamedParam]) -> Result<()> {
        if named.len() != self.values.len() {
            return Err(Error::Data(format!(
                "checkpoint has {} parameters, architecture expects {}",
                named.len(),
                self.values.len()
            )));
        }
        for p in named {
            let id = self.find(&p.name).ok_or_else(|| Error::Data(format!("unexpected parameter `{}`", p.name)))?;
            let target = &mut self.values[id.0];
            if (target.rows, target.cols) != (p.rows, p.cols) || p.data.len() != p.rows * p.cols {
                return Err(Error::Data(format!("parameter `{}` has the wrong shape", p.name)));
            }
            target.data.clone_from(&p.data);
        }
        Ok(())
    }
}

/// Gradient accumulators aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradStore {
    grads: Vec<Matrix>,
}

impl GradStore {
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradStore { grads: store.values.iter().map(|m| Matrix::zeros(m.rows, m.cols)).collect() }
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.grads[id.0]
    }

    pub fn zero(&mut self) {
        for g in &mut self.grads {
            g.data.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            g.data.iter_mut().for_each(|x| *x *= factor);
        }
    }
}
