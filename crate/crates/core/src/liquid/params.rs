use serde::{Deserialize, Serialize};

use super::tape::{Gradients, Tape, Var};
use super::{LiquidError, Result};
use crate::Real;

/// Named parameter tensor. A mask, when present, pins entries to exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    pub mask: Option<Vec<T>>,
}

impl<T: Real> Param<T> {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Entries that are free to train.
    pub fn is_free(&self, k: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[k] != T::zero())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T> {
    params: Vec<Param<T>>,
}

/// Parameters recorded as leaves on a tape, in [`ParamSet`] order.
#[derive(Debug, Clone)]
pub struct Bound<'t, T> {
    pub vars: Vec<Var<'t, T>>,
}

impl<'t, T> std::ops::Index<usize> for Bound<'t, T> {
    type Output = Var<'t, T>;
    fn index(&self, i: usize) -> &Var<'t, T> {
        &self.vars[i]
    }
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    /// Adds a tensor and returns its index. Masked entries are zeroed.
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, mut data: Vec<T>, mask: Option<Vec<T>>) -> usize {
        let numel: usize = shape.iter().product();
        assert_eq!(data.len(), numel, "data does not match shape");
        if let Some(m) = &mask {
            assert_eq!(m.len(), numel, "mask does not match shape");
            for (d, &k) in data.iter_mut().zip(m) {
                *d = *d * k;
            }
        }
        self.params.push(Param { name: name.into(), shape, data, mask });
        self.params.len() - 1
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn get(&self, i: usize) -> &Param<T> {
        &self.params[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Param<T> {
        &mut self.params[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar count, masked entries included.
    pub fn numel(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    /// Records every tensor as a leaf.
    pub fn bind<'t>(&self, tape: &'t Tape<T>) -> Bound<'t, T> {
        Bound { vars: self.params.iter().map(|p| tape.leaf(p.data.clone())).collect() }
    }

    /// Gradients per tensor with masked entries forced to zero; unused tensors get zeros.
    pub fn collect_grads(&self, grads: &Gradients<T>, bound: &Bound<'_, T>) -> Vec<Vec<T>> {
        self.params
            .iter()
            .zip(&bound.vars)
            .map(|(p, v)| {
                let mut g = grads.get(*v).map_or_else(|| vec![T::zero(); p.len()], <[T]>::to_vec);
                if let Some(m) = &p.mask {
                    for (g, &k) in g.iter_mut().zip(m) {
                        *g = *g * k;
                    }
                }
                g
            })
            .collect()
    }

    /// Flat copy of all values, in tensor order.
    pub fn flatten(&self) -> Vec<T> {
        self.params.iter().flat_map(|p| p.data.iter().copied()).collect()
    }

    /// Replaces one tensor's values, checking the shape.
    pub fn set_data(&mut self, i: usize, data: Vec<T>) -> Result<()> {
        let p = &mut self.params[i];
        if data.len() != p.len() {
            return Err(LiquidError::ShapeMismatch { expected: p.len(), got: data.len() });
        }
        p.data = data;
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }
}

/// Serialized tensor: name, shape, values, and an optional mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<f64>>,
}

impl<T: Real> ParamSet<T> {
    pub fn to_records(&self) -> Vec<TensorRecord> {
        let conv = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
        self.params
            .iter()
            .map(|p| TensorRecord {
                name: p.name.clone(),
                shape: p.shape.clone(),
                data: conv(&p.data),
                mask: p.mask.as_deref().map(conv),
            })
            .collect()
    }

    /// Loads values into an already-built parameter set of identical layout.
    pub fn load_records(&mut self, records: &[TensorRecord]) -> Result<()> {
        if records.len() != self.params.len() {
            return Err(LiquidError::Format(format!("expected {} tensors, found {}", self.params.len(), records.len())));
        }
        for (p, r) in self.params.iter_mut().zip(records) {
            if p.name != r.name || p.shape != r.shape || r.data.len() != p.len() {
                return Err(LiquidError::Format(format!("tensor `{}` does not match `{}` {:?}", r.name, p.name, p.shape)));
            }
            let conv = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
            if r.mask.as_deref().map(conv) != p.mask {
                return Err(LiquidError::Format(format!("mask of `{}` differs from the wiring", r.name)));
            }
            p.data = conv(&r.data);
        }
        Ok(())
    }
}
