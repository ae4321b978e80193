use crate::encoder::EncoderParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first: EncoderParams,
    pub second: EncoderParams,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &EncoderParams) -> Self {
        OptimizerState {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut EncoderParams, grads: &EncoderParams, state: &mut OptimizerState, cfg: &AdamConfig) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.first.tensors_mut())
        .zip(state.second.tensors_mut());
    for (((p, g), m), v) in tensors {
        assert_eq!(p.len(), g.len(), "gradient shape");
        for k in 0..p.len() {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};

    fn scalar_params(values: &[f64]) -> EncoderParams {
        EncoderParams {
            vocab: Vec::new(),
            table: Array2::zeros((0, 0)),
            projection: Array2::zeros((0, 0)),
            bias: Array1::from(values.to_vec()),
        }
    }

    const CFG: AdamConfig = AdamConfig {
        learning_rate: 0.01,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = scalar_params(&[1.5, -2.0]);
        let mut st = OptimizerState::new(&p);
        adam_step(&mut p, &scalar_params(&[0.0, 0.0]), &mut st, &CFG);
        assert_eq!(p.bias.to_vec(), vec![1.5, -2.0]);
        assert_eq!(st.step, 1);
    }

    /// First step: m̂ = g, v̂ = g², so the move is lr·g/(|g| + eps).
    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.0, -0.2, 1e-3] {
            let mut p = scalar_params(&[0.0]);
            let mut st = OptimizerState::new(&p);
            adam_step(&mut p, &scalar_params(&[g]), &mut st, &CFG);
            let want = -CFG.learning_rate * g / (g.abs() + CFG.eps);
            assert!((p.bias[0] - want).abs() < 1e-15);
            assert!((p.bias[0] + CFG.learning_rate * g.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn parameters_update_independently() {
        let mut both = scalar_params(&[0.0, 0.0]);
        let mut st = OptimizerState::new(&both);
        let mut a = scalar_params(&[0.0]);
        let mut sa = OptimizerState::new(&a);
        let mut b = scalar_params(&[0.0]);
        let mut sb = OptimizerState::new(&b);
        for k in 0..5 {
            let (ga, gb) = (0.3 * k as f64 - 0.5, 2.0 / (k as f64 + 1.0));
            adam_step(&mut both, &scalar_params(&[ga, gb]), &mut st, &CFG);
            adam_step(&mut a, &scalar_params(&[ga]), &mut sa, &CFG);
            adam_step(&mut b, &scalar_params(&[gb]), &mut sb, &CFG);
        }
        assert_eq!(both.bias[0], a.bias[0]);
        assert_eq!(both.bias[1], b.bias[0]);
    }
}
