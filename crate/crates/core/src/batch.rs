use crate::mechanics::{StateSample, JOINTS};
use crate::scalar::Scalar;

/// Row-major training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    pub n: usize,
    pub joints: usize,
    /// `(n, 3 * joints)` in slot order `(q, q̇, q̈)`.
    pub states: Vec<T>,
    /// `(n, 1)`
    pub lagrangian: Vec<T>,
    /// `(n, joints)`
    pub tau: Vec<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn from_samples(samples: &[StateSample]) -> Self {
        let mut states = Vec::with_capacity(samples.len() * 3 * JOINTS);
        let mut tau = Vec::with_capacity(samples.len() * JOINTS);
        for s in samples {
            states.extend(s.state().iter().map(|&v| T::lit(v)));
            tau.extend(s.tau.iter().map(|&v| T::lit(v)));
        }
        Self {
            n: samples.len(),
            joints: JOINTS,
            states,
            lagrangian: samples.iter().map(|s| T::lit(s.lagrangian)).collect(),
            tau,
        }
    }

    pub fn slots(&self) -> usize {
        3 * self.joints
    }

    pub fn state(&self, i: usize) -> &[T] {
        &self.states[i * self.slots()..(i + 1) * self.slots()]
    }

    /// Model inputs `(q, q̇)` as an `(n, 2 * joints)` block.
    pub fn inputs(&self) -> Vec<T> {
        let j = self.joints;
        (0..self.n)
            .flat_map(|i| self.state(i)[..2 * j].iter().copied())
            .collect()
    }
}
