//! Four-gate LSTM with hand-derived backpropagation through time.
//!
//! Gate pre-activations are laid out as `[i | f | g | o]` blocks of width `H`:
//!
//! ```text
//! z  = x·W_x + h·W_h + b
//! i  = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c' = f⊙c + i⊙g
//! h' = o⊙tanh(c')
//! ```

use rand::Rng;

use super::tensor::{matmul_acc, matmul_nt, matmul_tn_acc, ParamGroup, Parameter, Tensor};
use super::NeuralError;

/// Initial forget-gate bias.
pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmLayerSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    spec: LstmLayerSpec,
    /// `[input_dim, 4H]`
    pub w_x: Parameter,
    /// `[H, 4H]`
    pub w_h: Parameter,
    /// `[4H]`
    pub bias: Parameter,
}

/// Everything one cell step needs for its backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Tensor,
    h_prev: Tensor,
    c_prev: Tensor,
    /// Post-activation gates `[batch, 4H]`.
    gates: Tensor,
    tanh_c: Tensor,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LstmLayer {
    /// Uniform init in ±1/√fan_in per weight matrix; forget bias 1, other biases 0.
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        spec: LstmLayerSpec,
        rng: &mut R,
    ) -> Result<Self, NeuralError> {
        if spec.input_dim == 0 || spec.hidden_dim == 0 {
            return Err(NeuralError::InvalidSpec(format!(
                "LSTM dims must be positive: {spec:?}"
            )));
        }
        let h4 = 4 * spec.hidden_dim;
        let mut init = |fan_in: usize, count: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..count)
                .map(|_| rng.random_range(-bound..bound))
                .collect()
        };
        let w_x = init(spec.input_dim, spec.input_dim * h4);
        let w_h = init(spec.hidden_dim, spec.hidden_dim * h4);
        let mut bias = vec![0.0; h4];
        bias[spec.hidden_dim..2 * spec.hidden_dim].fill(FORGET_BIAS_INIT);
        Ok(Self::from_parts(
            name,
            spec,
            Tensor::from_vec(&[spec.input_dim, h4], w_x)?,
            Tensor::from_vec(&[spec.hidden_dim, h4], w_h)?,
            Tensor::from_vec(&[h4], bias)?,
        ))
    }

    pub fn from_parts(
        name: &str,
        spec: LstmLayerSpec,
        w_x: Tensor,
        w_h: Tensor,
        bias: Tensor,
    ) -> Self {
        Self {
            spec,
            w_x: Parameter::new(format!("{name}.w_x"), ParamGroup::Fresh, w_x),
            w_h: Parameter::new(format!("{name}.w_h"), ParamGroup::Fresh, w_h),
            bias: Parameter::new(format!("{name}.bias"), ParamGroup::Fresh, bias),
        }
    }

    pub fn spec(&self) -> LstmLayerSpec {
        self.spec
    }

    /// Zero `(h, c)` for a batch.
    pub fn zero_state(&self, batch: usize) -> (Tensor, Tensor) {
        let z = Tensor::zeros(&[batch, self.spec.hidden_dim]);
        (z.clone(), z)
    }

    /// One time step for a batch: `x [B, in]`, `h, c [B, H]`.
    pub fn cell_forward(
        &self,
        x: &Tensor,
        h: &Tensor,
        c: &Tensor,
    ) -> Result<(Tensor, Tensor, LstmCache), NeuralError> {
        let LstmLayerSpec {
            input_dim,
            hidden_dim: hd,
        } = self.spec;
        x.expect_matrix("lstm input", None, input_dim)?;
        let batch = x.rows();
        h.expect_matrix("lstm hidden state", Some(batch), hd)?;
        c.expect_matrix("lstm cell state", Some(batch), hd)?;
        let h4 = 4 * hd;

        let mut gates = Tensor::zeros(&[batch, h4]);
        for r in 0..batch {
            gates.row_mut(r).copy_from_slice(self.bias.value.data());
        }
        matmul_acc(
            gates.data_mut(),
            x.data(),
            self.w_x.value.data(),
            batch,
            input_dim,
            h4,
        );
        matmul_acc(
            gates.data_mut(),
            h.data(),
            self.w_h.value.data(),
            batch,
            hd,
            h4,
        );

        let mut c_next = Tensor::zeros(&[batch, hd]);
        let mut h_next = Tensor::zeros(&[batch, hd]);
        let mut tanh_c = Tensor::zeros(&[batch, hd]);
        for r in 0..batch {
            let z = gates.row_mut(r);
            for v in &mut z[..2 * hd] {
                *v = sigmoid(*v);
            }
            for v in &mut z[2 * hd..3 * hd] {
                *v = v.tanh();
            }
            for v in &mut z[3 * hd..] {
                *v = sigmoid(*v);
            }
            let z = gates.row(r);
            let c_prev = c.row(r);
            let cn = c_next.row_mut(r);
            for j in 0..hd {
                cn[j] = z[hd + j] * c_prev[j] + z[j] * z[2 * hd + j];
            }
            let tc = tanh_c.row_mut(r);
            for j in 0..hd {
                tc[j] = cn[j].tanh();
            }
            let hn = h_next.row_mut(r);
            for j in 0..hd {
                hn[j] = z[3 * hd + j] * tc[j];
            }
        }
        let cache = LstmCache {
            x: x.clone(),
            h_prev: h.clone(),
            c_prev: c.clone(),
            gates,
            tanh_c,
        };
        Ok((h_next, c_next, cache))
    }

    /// Backward through one step given `dL/dh'` and `dL/dc'`. Accumulates
    /// parameter gradients and returns `(dL/dx, dL/dh, dL/dc)`.
    pub fn cell_backward(
        &mut self,
        cache: &LstmCache,
        dh: &Tensor,
        dc_next: &Tensor,
    ) -> Result<(Tensor, Tensor, Tensor), NeuralError> {
        let LstmLayerSpec {
            input_dim,
            hidden_dim: hd,
        } = self.spec;
        let batch = cache.x.rows();
        dh.expect_matrix("lstm dh", Some(batch), hd)?;
        dc_next.expect_matrix("lstm dc", Some(batch), hd)?;
        let h4 = 4 * hd;

        let mut dz = Tensor::zeros(&[batch, h4]);
        let mut dc_prev = Tensor::zeros(&[batch, hd]);
        for r in 0..batch {
            let z = cache.gates.row(r);
            let tc = cache.tanh_c.row(r);
            let c_prev = cache.c_prev.row(r);
            let dh_r = dh.row(r);
            let dcn = dc_next.row(r);
            let dz_r = dz.row_mut(r);
            let dcp = dc_prev.row_mut(r);
            for j in 0..hd {
                let (i, f, g, o) = (z[j], z[hd + j], z[2 * hd + j], z[3 * hd + j]);
                let dc = dcn[j] + dh_r[j] * o * (1.0 - tc[j] * tc[j]);
                dz_r[j] = dc * g * i * (1.0 - i);
                dz_r[hd + j] = dc * c_prev[j] * f * (1.0 - f);
                dz_r[2 * hd + j] = dc * i * (1.0 - g * g);
                dz_r[3 * hd + j] = dh_r[j] * tc[j] * o * (1.0 - o);
                dcp[j] = dc * f;
            }
        }

        matmul_tn_acc(
            self.w_x.grad.data_mut(),
            cache.x.data(),
            dz.data(),
            batch,
            input_dim,
            h4,
        );
        matmul_tn_acc(
            self.w_h.grad.data_mut(),
            cache.h_prev.data(),
            dz.data(),
            batch,
            hd,
            h4,
        );
        let db = self.bias.grad.data_mut();
        for r in 0..batch {
            for (g, d) in db.iter_mut().zip(dz.row(r)) {
                *g += d;
            }
        }

        let mut dx = Tensor::zeros(&[batch, input_dim]);
        matmul_nt(
            dx.data_mut(),
            dz.data(),
            self.w_x.value.data(),
            batch,
            h4,
            input_dim,
        );
        let mut dh_prev = Tensor::zeros(&[batch, hd]);
        matmul_nt(
            dh_prev.data_mut(),
            dz.data(),
            self.w_h.value.data(),
            batch,
            h4,
            hd,
        );
        Ok((dx, dh_prev, dc_prev))
    }

    /// Runs a whole sequence from the zero state; returns every hidden state.
    pub fn forward_sequence(
        &self,
        xs: &[Tensor],
    ) -> Result<(Vec<Tensor>, Vec<LstmCache>), NeuralError> {
        let batch = xs.first().map_or(1, Tensor::rows);
        let (mut h, mut c) = self.zero_state(batch);
        let mut hs = Vec::with_capacity(xs.len());
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let (hn, cn, cache) = self.cell_forward(x, &h, &c)?;
            hs.push(hn.clone());
            caches.push(cache);
            h = hn;
            c = cn;
        }
        Ok((hs, caches))
    }

    /// BPTT over a sequence. `dhs[t]` is the loss gradient arriving at the
    /// hidden output of step `t` from above (if any). Returns input grads.
    pub fn backward_sequence(
        &mut self,
        caches: &[LstmCache],
        dhs: &[Option<Tensor>],
    ) -> Result<Vec<Tensor>, NeuralError> {
        let hd = self.spec.hidden_dim;
        let batch = caches.first().map_or(1, |c| c.x.rows());
        let mut dh_carry = Tensor::zeros(&[batch, hd]);
        let mut dc_carry = Tensor::zeros(&[batch, hd]);
        let mut dxs = vec![None; caches.len()];
        for t in (0..caches.len()).rev() {
            if let Some(Some(dh_top)) = dhs.get(t) {
                for (a, b) in dh_carry.data_mut().iter_mut().zip(dh_top.data()) {
                    *a += b;
                }
            }
            let (dx, dh_prev, dc_prev) = self.cell_backward(&caches[t], &dh_carry, &dc_carry)?;
            dxs[t] = Some(dx);
            dh_carry = dh_prev;
            dc_carry = dc_prev;
        }
        Ok(dxs.into_iter().map(|d| d.expect("filled above")).collect())
    }

    pub fn params(&self) -> [&Parameter; 3] {
        [&self.w_x, &self.w_h, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Parameter; 3] {
        [&mut self.w_x, &mut self.w_h, &mut self.bias]
    }
}
