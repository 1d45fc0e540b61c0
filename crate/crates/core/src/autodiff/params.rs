use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use super::{Graph, Var};
use crate::error::{invalid, shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Trainable tensor plus its Adam moments.
#[derive(Debug, Clone)]
pub struct Parameter<S> {
    pub name: String,
    pub value: Tensor<S>,
    pub m: Vec<S>,
    pub v: Vec<S>,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Owns every parameter of a model. Layers keep [`ParamId`]s into it.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<S> {
    params: Vec<Parameter<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl ToString, value: Tensor<S>) -> ParamId {
        let n = value.len();
        self.params.push(Parameter { name: name.to_string(), value, m: vec![S::zero(); n], v: vec![S::zero(); n], step: 0 });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter<S> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<S> {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<S>> {
        self.params.iter()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar weights.
    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Overwrites values (and optionally optimizer state) by name; every
    /// parameter must be present with a matching shape.
    pub fn load(&mut self, incoming: Vec<Parameter<S>>) -> Result<()> {
        if incoming.len() != self.params.len() {
            return Err(invalid!("expected {} parameters, got {}", self.params.len(), incoming.len()));
        }
        for p in incoming {
            let id = self.find(&p.name).ok_or_else(|| invalid!("unknown parameter {}", p.name))?;
            let slot = &mut self.params[id.0];
            if slot.value.shape() != p.value.shape() {
                return Err(shape_err!("parameter {}: {:?} vs {:?}", p.name, slot.value.shape(), p.value.shape()));
            }
            let n = p.value.len();
            slot.value = p.value;
            slot.m = if p.m.len() == n { p.m } else { vec![S::zero(); n] };
            slot.v = if p.v.len() == n { p.v } else { vec![S::zero(); n] };
            slot.step = p.step;
        }
        Ok(())
    }

    pub fn into_params(self) -> Vec<Parameter<S>> {
        self.params
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Result<Self> {
        if !(lr > 0.0) {
            return Err(invalid!("learning rate must be positive, got {}", lr));
        }
        Ok(Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 })
    }

    /// One update of `param` with gradient `grad`.
    pub fn update<S: Scalar>(&self, param: &mut Parameter<S>, grad: &[S]) {
        param.step += 1;
        let t = param.step as i32;
        let (b1, b2) = (S::of(self.beta1), S::of(self.beta2));
        let c1 = S::of(1.0 - num_traits::Float::powi(self.beta1, t));
        let c2 = S::of(1.0 - num_traits::Float::powi(self.beta2, t));
        let (lr, eps) = (S::of(self.lr), S::of(self.eps));
        let values = param.value.data_mut();
        for i in 0..values.len() {
            let g = grad[i];
            param.m[i] = b1 * param.m[i] + (S::one() - b1) * g;
            param.v[i] = b2 * param.v[i] + (S::one() - b2) * g * g;
            let m_hat = param.m[i] / c1;
            let v_hat = param.v[i] / c2;
            values[i] = values[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }

    /// Applies collected gradients to their parameters.
    pub fn step<S: Scalar>(&self, store: &mut ParamStore<S>, grads: &[(ParamId, Vec<S>)]) {
        for (id, g) in grads {
            self.update(store.get_mut(*id), g);
        }
    }
}

/// One forward/backward pass over a [`ParamStore`]: binds parameters into a
/// fresh [`Graph`] on first use and carries the train/eval switch.
pub struct Session<'a, S> {
    pub graph: Graph<S>,
    store: &'a ParamStore<S>,
    bound: Vec<Option<Var>>,
    rng: Option<&'a mut ChaCha8Rng>,
}

impl<'a, S: Scalar> Session<'a, S> {
    /// Training mode: dropout draws from `rng`.
    pub fn train(store: &'a ParamStore<S>, rng: &'a mut ChaCha8Rng) -> Self {
        Self { graph: Graph::new(), store, bound: vec![None; store.len()], rng: Some(rng) }
    }

    /// Evaluation mode: dropout is the identity.
    pub fn eval(store: &'a ParamStore<S>) -> Self {
        Self { graph: Graph::new(), store, bound: vec![None; store.len()], rng: None }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let v = self.graph.leaf(self.store.get(id).value.clone());
        self.bound[id.0] = Some(v);
        v
    }

    pub fn input(&mut self, t: Tensor<S>) -> Var {
        self.graph.input(t)
    }

    pub fn dropout(&mut self, x: Var, p: f64) -> Result<Var> {
        match self.rng.as_deref_mut() {
            Some(rng) if p > 0.0 => self.graph.dropout(x, p, rng),
            _ => {
                if !(0.0..1.0).contains(&p) {
                    return Err(invalid!("dropout probability {} outside [0, 1)", p));
                }
                Ok(x)
            }
        }
    }

    /// Back-propagates `loss` and returns the gradient of every bound parameter.
    pub fn backward(mut self, loss: Var) -> Result<Vec<(ParamId, Vec<S>)>> {
        self.graph.backward(loss)?;
        let mut out = Vec::new();
        for (i, v) in self.bound.iter().enumerate() {
            if let Some(v) = v {
                let n = self.store.get(ParamId(i)).value.len();
                let g = self.graph.take_grad(*v).unwrap_or_else(|| vec![S::zero(); n]);
                out.push((ParamId(i), g));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_moves_by_lr_against_gradient_sign() {
        let adam = Adam::new(1e-3).unwrap();
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::new(&[3], vec![1.0, -2.0, 0.5]).unwrap());
        adam.step(&mut store, &[(id, vec![0.3, -7.0, 1e-3])]);
        let got = store.get(id).value.data();
        let want = [1.0 - 1e-3, -2.0 + 1e-3, 0.5 - 1e-3];
        for (g, w) in got.iter().zip(want) {
            // m̂/√v̂ = sign(g) up to ε/|g|
            assert!((g - w).abs() < 1e-7, "{g} vs {w}");
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let adam = Adam::new(0.1).unwrap();
        let mut store = ParamStore::<f32>::new();
        let id = store.add("w", Tensor::new(&[2], vec![1.0, 2.0]).unwrap());
        for _ in 0..5 {
            adam.step(&mut store, &[(id, vec![0.0, 0.0])]);
        }
        assert_eq!(store.get(id).value.data(), &[1.0, 2.0]);
    }

    #[test]
    fn nonpositive_learning_rate_rejected() {
        assert!(Adam::new(0.0).is_err());
        assert!(Adam::new(-1.0).is_err());
        assert!(Adam::new(f64::NAN).is_err());
    }

    #[test]
    fn load_checks_names_and_shapes() {
        let mut store = ParamStore::<f32>::new();
        store.add("a", Tensor::zeros(&[2]));
        let mut other = ParamStore::<f32>::new();
        other.add("a", Tensor::zeros(&[3]));
        assert!(store.clone().load(other.into_params()).is_err());
        let mut ok = ParamStore::<f32>::new();
        ok.add("a", Tensor::full(&[2], 4.0));
        store.load(ok.into_params()).unwrap();
        assert_eq!(store.get(ParamId(0)).value.data(), &[4.0, 4.0]);
    }
}
