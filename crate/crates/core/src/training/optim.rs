use crate::error::{Error, Result};
use crate::model::StgNetParams;
use crate::tensor::Tensor;

/// Adam with a step-decayed learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub initial_learning_rate: f64,
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(
        params: &StgNetParams,
        learning_rate: f64,
        decay_factor: f64,
        decay_every: usize,
    ) -> Self {
        let zeros: Vec<Tensor> = params
            .named()
            .iter()
            .map(|(_, t)| Tensor::zeros_like(t))
            .collect();
        Self {
            initial_learning_rate: learning_rate,
            learning_rate,
            decay_factor,
            decay_every: decay_every.max(1),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }

    /// Sets the rate for 0-based `epoch`: one decay per completed
    /// `decay_every` epochs.
    pub fn set_epoch(&mut self, epoch: usize) {
        let decays = (epoch / self.decay_every) as i32;
        self.learning_rate = self.initial_learning_rate * self.decay_factor.powi(decays);
    }
}

/// One bias-corrected Adam update of every tensor in `params`.
pub fn adam_step(
    state: &mut OptimizerState,
    params: &mut StgNetParams,
    grads: &StgNetParams,
) -> Result<()> {
    let gnamed = grads.named();
    let ptensors = params.tensors_mut();
    if ptensors.len() != gnamed.len() || ptensors.len() != state.first_moment.len() {
        return Err(Error::Shape(format!(
            "{} parameter tensors, {} gradients, {} moment slots",
            ptensors.len(),
            gnamed.len(),
            state.first_moment.len()
        )));
    }
    for ((p, (name, g)), m) in ptensors.iter().zip(&gnamed).zip(&state.first_moment) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::Shape(format!(
                "{name}: parameter {:?}, gradient {:?}, moment {:?}",
                p.shape(),
                g.shape(),
                m.shape()
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.epsilon, state.learning_rate);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, (_, g)), m), v) in ptensors
        .into_iter()
        .zip(&gnamed)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        for (((pv, gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mv = b1 * *mv + (1.0 - b1) * gv;
            *vv = b2 * *vv + (1.0 - b2) * gv * gv;
            let mhat = *mv / c1;
            let vhat = *vv / c2;
            *pv -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
