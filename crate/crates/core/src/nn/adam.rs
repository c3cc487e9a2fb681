use crate::binio::{Reader, Writer};
use crate::nn::{Mlp, MlpGrads};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 3e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self { learning_rate, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite())
            || !unit(self.beta1)
            || !unit(self.beta2)
            || !(self.epsilon > 0.0 && self.epsilon <= 1e-4)
        {
            return Err(Error::Config(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// Bias-corrected Adam over a list of flat parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(tensor_lens: &[usize], config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step_count: 0,
            first_moment: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn for_mlp(net: &Mlp, config: AdamConfig) -> Result<Self> {
        let lens: Vec<usize> = net.tensors().iter().map(|t| t.len()).collect();
        Self::new(&lens, config)
    }

    /// Apply one update. `group` maps a tensor index to the index reported
    /// in numeric errors (the layer, for networks). Nothing is modified if
    /// any gradient is non-finite.
    pub fn step(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[&[f64]],
        group: impl Fn(usize) -> usize,
    ) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Shape("optimizer tensor count mismatch".into()));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first_moment[i].len() || g.len() != p.len() {
                return Err(Error::Shape(format!("optimizer tensor {i} length mismatch")));
            }
            if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
                return Err(Error::Numeric { layer: group(i), what: format!("gradient {bad}") });
            }
        }
        self.step_count += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                p[j] -= learning_rate * mh / (vh.sqrt() + epsilon);
            }
        }
        Ok(())
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        let c = self.config;
        for v in [c.learning_rate, c.beta1, c.beta2, c.epsilon] {
            w.f64(v);
        }
        w.u64(self.step_count);
        w.u32(self.first_moment.len() as u32);
        for (m, v) in self.first_moment.iter().zip(&self.second_moment) {
            w.f64s(m);
            w.f64s(v);
        }
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let config = AdamConfig {
            learning_rate: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            epsilon: r.f64()?,
        };
        let step_count = r.u64()?;
        let n = r.u32()? as usize;
        let mut first_moment = Vec::with_capacity(n);
        let mut second_moment = Vec::with_capacity(n);
        for _ in 0..n {
            let m = r.f64s()?;
            let v = r.f64s()?;
            if m.len() != v.len() {
                return Err(Error::format("optimizer", "moment lengths differ"));
            }
            first_moment.push(m);
            second_moment.push(v);
        }
        Ok(Self { config, step_count, first_moment, second_moment })
    }
}

/// One Adam step on a network.
pub fn adam_step(net: &mut Mlp, grads: &MlpGrads, state: &mut AdamState) -> Result<()> {
    let g = grads.tensors();
    let mut p = net.tensors_mut();
    state.step(&mut p, &g, |i| i / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_step(w: &mut f64, grad: f64, state: &mut AdamState) -> Result<()> {
        let mut p = [std::slice::from_mut(w)];
        state.step(&mut p, &[&[grad]], |i| i)
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // t=1: m̂ = g, v̂ = g², so the step is lr * g / (|g| + eps).
        let mut st = AdamState::new(&[1], AdamConfig::with_lr(0.1)).unwrap();
        let mut w = 1.0;
        let g = 2.0 * w;
        scalar_step(&mut w, g, &mut st).unwrap();
        let expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((w - expected).abs() < 1e-15);
        assert!((w - 0.9).abs() < 1e-8);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut st = AdamState::new(&[1], AdamConfig::default()).unwrap();
        let mut w = 0.7;
        scalar_step(&mut w, 0.0, &mut st).unwrap();
        assert_eq!(w, 0.7);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut st = AdamState::new(&[1], AdamConfig::with_lr(0.05)).unwrap();
        let mut w = 1.0;
        let mut reached = None;
        for k in 0..500 {
            let g = 2.0 * w;
            scalar_step(&mut w, g, &mut st).unwrap();
            if w.abs() < 1e-3 {
                reached = Some(k);
                break;
            }
        }
        assert!(reached.is_some(), "|w| = {} after 500 steps", w.abs());
    }

    #[test]
    fn non_finite_gradient_reports_layer() {
        let mut net = Mlp::zeros(&[2, 3, 1], crate::nn::Activation::Tanh).unwrap();
        let mut st = AdamState::for_mlp(&net, AdamConfig::default()).unwrap();
        let mut g = net.zero_grads();
        g.biases[1][0] = f64::NAN;
        let before = net.clone();
        match adam_step(&mut net, &g, &mut st) {
            Err(Error::Numeric { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("expected numeric error, got {other:?}"),
        }
        assert_eq!(net, before);
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(AdamState::new(&[1], AdamConfig::with_lr(0.0)).is_err());
        let c = AdamConfig { epsilon: 1e-3, ..AdamConfig::default() };
        assert!(AdamState::new(&[1], c).is_err());
    }
}
