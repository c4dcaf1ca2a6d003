use std::collections::BTreeMap;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Named parameter tensors, ordered by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    tensors: BTreeMap<String, Tensor>,
}

/// `∂L/∂θ`, congruent with the [`ParamSet`] it was taken against.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradSet {
    tensors: BTreeMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::shape(format!("duplicate parameter `{name}`")));
        }
        self.tensors.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.values().all(Tensor::all_finite)
    }

    /// Same names and shapes.
    pub fn congruent_with(&self, other: &ParamSet) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|((na, a), (nb, b))| na == nb && a.shape() == b.shape())
    }

    /// Registers every tensor as a differentiable leaf on `tape`.
    pub fn to_vars<'t>(&self, tape: &'t Tape) -> ParamVars<'t> {
        ParamVars { vars: self.tensors.iter().map(|(k, v)| (k.clone(), tape.var(v.clone()))).collect() }
    }

    /// Registers every tensor as a constant on `tape` (inference).
    pub fn to_constants<'t>(&self, tape: &'t Tape) -> ParamVars<'t> {
        ParamVars { vars: self.tensors.iter().map(|(k, v)| (k.clone(), tape.constant(v.clone()))).collect() }
    }

    /// `θ − α·g` as a new set; `self` is untouched.
    pub fn functional_update(&self, grads: &GradSet, alpha: f64) -> Result<ParamSet> {
        self.check_grads(grads)?;
        let tensors = self
            .tensors
            .iter()
            .zip(&grads.tensors)
            .map(|((name, p), (_, g))| (name.clone(), p.zip_map(g, |p, g| p - alpha * g)))
            .collect();
        Ok(ParamSet { tensors })
    }

    pub(crate) fn check_grads(&self, grads: &GradSet) -> Result<()> {
        let congruent = self.tensors.len() == grads.tensors.len()
            && self.tensors.iter().zip(&grads.tensors).all(|((na, a), (nb, b))| na == nb && a.shape() == b.shape());
        if congruent {
            Ok(())
        } else {
            Err(Error::shape("gradient set is not congruent with parameter set"))
        }
    }

    /// Flat view in name order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.values().flat_map(|t| t.data().iter().copied()).collect()
    }
}

impl GradSet {
    pub fn zeros_like(params: &ParamSet) -> Self {
        GradSet {
            tensors: params.iter().map(|(k, v)| (k.clone(), Tensor::zeros(v.rows(), v.cols()))).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.values().all(Tensor::all_finite)
    }

    /// `self += k·other`.
    pub fn add_scaled(&mut self, other: &GradSet, k: f64) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::shape("gradient sets differ in size"));
        }
        for ((na, a), (nb, b)) in self.tensors.iter_mut().zip(&other.tensors) {
            if na != nb || a.shape() != b.shape() {
                return Err(Error::shape(format!("gradient `{na}` vs `{nb}`")));
            }
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += k * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors.values_mut() {
            for v in t.data_mut() {
                *v *= k;
            }
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.values().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors.values().flat_map(|t| t.data()).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A [`ParamSet`] living on a tape.
#[derive(Debug, Clone)]
pub struct ParamVars<'t> {
    vars: BTreeMap<String, Var<'t>>,
}

impl<'t> ParamVars<'t> {
    pub fn get(&self, name: &str) -> Result<Var<'t>> {
        self.vars.get(name).copied().ok_or_else(|| Error::shape(format!("missing parameter `{name}`")))
    }

    pub fn vars(&self) -> Vec<Var<'t>> {
        self.vars.values().copied().collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.vars.keys()
    }

    pub fn values(&self) -> ParamSet {
        ParamSet { tensors: self.vars.iter().map(|(k, v)| (k.clone(), (*v.value()).clone())).collect() }
    }

    /// Gradient of `loss` w.r.t. every parameter, as differentiable vars.
    pub fn grad(&self, loss: Var<'t>) -> Result<ParamVars<'t>> {
        let names: Vec<&String> = self.vars.keys().collect();
        let grads = loss.tape().grad(loss, &self.vars())?;
        Ok(ParamVars { vars: names.into_iter().cloned().zip(grads).collect() })
    }

    /// Detaches every entry (first-order treatment).
    pub fn detached(&self, tape: &'t Tape) -> ParamVars<'t> {
        ParamVars { vars: self.vars.iter().map(|(k, v)| (k.clone(), tape.constant((*v.value()).clone()))).collect() }
    }

    pub fn to_grad_set(&self) -> GradSet {
        GradSet { tensors: self.values().tensors }
    }

    /// `θ − α·g` recorded on the tape, so the result stays differentiable
    /// with respect to the original `θ` (and through `g`).
    pub fn functional_update(&self, grads: &ParamVars<'t>, alpha: f64) -> Result<ParamVars<'t>> {
        if self.vars.len() != grads.vars.len() {
            return Err(Error::shape("gradient set is not congruent with parameter set"));
        }
        let mut vars = BTreeMap::new();
        for ((name, p), (gname, g)) in self.vars.iter().zip(&grads.vars) {
            if name != gname || p.value().shape() != g.value().shape() {
                return Err(Error::shape(format!("parameter `{name}` vs gradient `{gname}`")));
            }
            vars.insert(name.clone(), *p - g.scale(alpha));
        }
        Ok(ParamVars { vars })
    }
}

impl GradSet {
    pub(crate) fn from_map(tensors: BTreeMap<String, Tensor>) -> Self {
        GradSet { tensors }
    }
}
