use super::{NamedGrads, NumError, ParamSet, Result, Tensor};

/// Adaptive-moment first-order optimizer state.
///
/// Moment accumulators mirror the parameter shapes; the step counter is
/// strictly increasing. Updates are deterministic.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    step: u64,
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(params: &ParamSet, learning_rate: f64) -> Self {
        Self {
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_moment: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
            second_moment: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One parameter update from gradients aligned with `params`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &NamedGrads) -> Result<()> {
        if grads.len() != params.len() || self.first_moment.len() != params.len() {
            return Err(NumError::ShapeMismatch {
                context: "OptimizerState::step",
                detail: format!(
                    "{} grads / {} moments for {} params",
                    grads.len(),
                    self.first_moment.len(),
                    params.len()
                ),
            });
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads.grad_at(i);
            if g.shape() != params.tensor_at(i).shape() {
                return Err(NumError::ShapeMismatch {
                    context: "OptimizerState::step",
                    detail: format!(
                        "param {} has shape {:?}, grad {:?}",
                        params.name_at(i),
                        params.tensor_at(i).shape(),
                        g.shape()
                    ),
                });
            }
            let m = self.first_moment[i].data_mut();
            let v = self.second_moment[i].data_mut();
            let p = params.tensor_at_mut(i).data_mut();
            for j in 0..p.len() {
                let gj = g.data()[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
