//! Named parameter tensors with paired gradient storage, addressable both
//! by name and as one flat vector (for finite-difference checking and for
//! the optimizer).

use std::collections::BTreeMap;

use crate::tensor::{Scalar, Tensor};

/// Handle to one registered parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
pub struct ParamEntry<F> {
    pub name: String,
    pub value: Tensor<F>,
    pub grad: Tensor<F>,
}

/// Registry of all learnable weights of a model.
///
/// Registration order is the flat order: coordinate `i` of the flat vector
/// addresses a fixed (tensor, row-major offset) pair for the life of the
/// registry.
#[derive(Debug, Clone, Default)]
pub struct ModelParameters<F> {
    entries: Vec<ParamEntry<F>>,
    by_name: BTreeMap<String, ParamId>,
    offsets: Vec<usize>,
    total_len: usize,
}

impl<F: Scalar> ModelParameters<F> {
    pub fn new() -> Self {
        ModelParameters {
            entries: Vec::new(),
            by_name: BTreeMap::new(),
            offsets: Vec::new(),
            total_len: 0,
        }
    }

    pub fn register(&mut self, name: &str, value: Tensor<F>) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.entries.len());
        self.by_name.insert(name.to_string(), id);
        self.offsets.push(self.total_len);
        self.total_len += value.len();
        let grad = Tensor::zeros(value.rows(), value.cols());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            value,
            grad,
        });
        id
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor<F> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<F> {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.entries[id.0].grad
    }

    pub fn entries(&self) -> &[ParamEntry<F>] {
        &self.entries
    }

    pub fn tensor_count(&self) -> usize {
        self.entries.len()
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            for g in e.grad.data_mut() {
                *g = F::zero();
            }
        }
    }

    /// Total number of scalar coordinates across all tensors.
    pub fn flat_len(&self) -> usize {
        self.total_len
    }

    fn locate(&self, flat: usize) -> (usize, usize) {
        assert!(flat < self.total_len, "flat index out of range");
        let tensor = match self.offsets.binary_search(&flat) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (tensor, flat - self.offsets[tensor])
    }

    /// Name of the tensor owning flat coordinate `flat`.
    pub fn flat_name(&self, flat: usize) -> &str {
        let (tensor, _) = self.locate(flat);
        &self.entries[tensor].name
    }

    pub fn get_flat(&self, flat: usize) -> F {
        let (tensor, inner) = self.locate(flat);
        self.entries[tensor].value.data()[inner]
    }

    pub fn set_flat(&mut self, flat: usize, v: F) {
        let (tensor, inner) = self.locate(flat);
        self.entries[tensor].value.data_mut()[inner] = v;
    }

    pub fn grad_flat(&self, flat: usize) -> F {
        let (tensor, inner) = self.locate(flat);
        self.entries[tensor].grad.data()[inner]
    }

    /// Euclidean norm of the full gradient vector.
    pub fn grad_norm(&self) -> F {
        let mut acc = F::zero();
        for e in &self.entries {
            for &g in e.grad.data() {
                acc = acc + g * g;
            }
        }
        acc.sqrt()
    }

    pub fn scale_grads(&mut self, factor: F) {
        for e in &mut self.entries {
            for g in e.grad.data_mut() {
                *g = *g * factor;
            }
        }
    }

    /// Converts every value into another scalar type, dropping gradients.
    pub fn cast<G: Scalar>(&self) -> ModelParameters<G> {
        let mut out = ModelParameters::new();
        for e in &self.entries {
            let data: Vec<G> = e.value.data().iter().map(|&v| G::from_f64(v.to_f64())).collect();
            out.register(
                &e.name,
                Tensor::from_vec(e.value.rows(), e.value.cols(), data),
            );
        }
        out
    }
}
