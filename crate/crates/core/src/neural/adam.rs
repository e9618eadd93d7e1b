use super::tensor::{ParamGroup, Parameter};

/// Per-group learning rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrGroups {
    pub fresh: f64,
    pub pretrained: f64,
}

impl LrGroups {
    pub fn lr(&self, group: ParamGroup) -> f64 {
        match group {
            ParamGroup::Fresh => self.fresh,
            ParamGroup::Pretrained => self.pretrained,
        }
    }
}

impl Default for LrGroups {
    fn default() -> Self {
        Self {
            fresh: 1e-3,
            pretrained: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. `t` is the 1-based step index.
pub fn adam_step(params: &mut [&mut Parameter], lr: &LrGroups, config: &AdamConfig, t: u64) {
    let t = t.max(1) as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for p in params.iter_mut() {
        let rate = lr.lr(p.group);
        let Parameter {
            value,
            grad,
            adam_m,
            adam_v,
            ..
        } = &mut **p;
        let it = value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(adam_m.data_mut().iter_mut().zip(adam_v.data_mut()));
        for ((w, &g), (m, v)) in it {
            *m = config.beta1 * *m + (1.0 - config.beta1) * g;
            *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= rate * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
}

/// Stateful wrapper tracking the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0 }
    }

    pub fn step(&mut self, params: &mut [&mut Parameter], lr: &LrGroups) {
        self.step += 1;
        adam_step(params, lr, &self.config, self.step);
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(params: &mut [&mut Parameter], max_norm: f64) -> f64 {
    let norm = params
        .iter()
        .flat_map(|p| p.grad.data().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        for p in params.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}
