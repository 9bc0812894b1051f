use crate::params::ParamSet;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
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

/// Bias-corrected Adam moments, one buffer per parameter block.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new<P: Scalar>(params: &ParamSet<P>, config: AdamConfig) -> Self {
        let zeros = || {
            params
                .blocks()
                .iter()
                .map(|b| vec![T::zero(); b.data.len()])
                .collect()
        };
        Self {
            config,
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut ParamSet<T>, grads: &[Vec<T>], lr: f64) {
        assert_eq!(grads.len(), self.m.len(), "gradient blocks do not match");
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let t = self.step as i32;
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);
        let lr = T::lit(lr);
        let eps = T::lit(c.eps);
        for (k, g) in grads.iter().enumerate() {
            let data = &mut params.block_mut(crate::params::BlockId::from_index(k)).data;
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..g.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                data[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_block(v: Vec<f64>) -> ParamSet<f64> {
        let mut p = ParamSet::new();
        let n = v.len();
        p.push("x", 1, n, v);
        p
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = one_block(vec![0.0, 5.0]);
        let mut a = Adam::new(&p, AdamConfig::default());
        a.update(&mut p, &[vec![1.0, -3.0]], 1e-3);
        let d = &p.blocks()[0].data;
        assert!((d[0] + 1e-3).abs() < 1e-10);
        assert!((d[1] - 5.0 - 1e-3).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = one_block(vec![1.0, 2.0]);
        let mut a = Adam::new(&p, AdamConfig::default());
        a.update(&mut p, &[vec![0.0, 0.0]], 1e-3);
        assert_eq!(p.blocks()[0].data, vec![1.0, 2.0]);
    }

    #[test]
    fn equal_histories_give_equal_updates() {
        let mut p = one_block(vec![0.0, 0.0]);
        let mut a = Adam::new(&p, AdamConfig::default());
        for g in [0.5, -0.2, 0.9] {
            a.update(&mut p, &[vec![g, g]], 1e-3);
        }
        let d = &p.blocks()[0].data;
        assert_eq!(d[0], d[1]);
    }
}
