use super::ParamSet;
use crate::error::{Error, Result};

/// Adam with bias correction. No weight decay, no schedule, no clipping;
/// the learning rate is fixed for the whole run.
#[derive(Debug, Clone)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let m = params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
        let v = params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m,
            v,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn moments(&self, i: usize) -> (&[f64], &[f64]) {
        (&self.m[i], &self.v[i])
    }

    /// Rebuilds a saved state. Moment buffers must align with `params`.
    pub fn from_parts(
        params: &ParamSet,
        lr: f64,
        t: u64,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let sizes: Vec<usize> = params.iter().map(|(_, p)| p.numel()).collect();
        let ok = m.len() == sizes.len()
            && v.len() == sizes.len()
            && m.iter().zip(&sizes).all(|(b, &s)| b.len() == s)
            && v.iter().zip(&sizes).all(|(b, &s)| b.len() == s);
        if !ok {
            return Err(Error::Data(
                "optimizer state does not match parameter shapes".into(),
            ));
        }
        Ok(AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t,
            m,
            v,
        })
    }

    /// One update from the gradients stored in `params`. A missing grad
    /// buffer counts as all-zero. Any non-finite gradient or parameter
    /// aborts before anything is mutated.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        assert_eq!(self.m.len(), params.len(), "optimizer bound to other set");
        for (name, tensor) in params.iter() {
            if tensor.data().iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite value in parameter {name:?}; step aborted"
                )));
            }
            if let Some(g) = tensor.grad() {
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Data(format!(
                        "non-finite gradient for parameter {name:?}; step aborted"
                    )));
                }
            }
        }

        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let ids: Vec<_> = params.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let tensor = params.tensor_mut(id);
            let numel = tensor.data().len();
            // Borrow the grad by value first; `None` means zero gradient.
            let grad: Option<Vec<f64>> = tensor.grad().map(|g| g.to_vec());
            let data = tensor.data_mut();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for k in 0..numel {
                let g = grad.as_ref().map_or(0.0, |g| g[k]);
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                data[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
