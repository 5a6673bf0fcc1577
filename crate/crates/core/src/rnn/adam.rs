/// Adam with bias correction. Moments are kept in `f64`; parameters are
/// `f32` slices updated in place.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    /// Applies one update. `params` and `grads` are matched by position and
    /// must keep the same lengths across calls.
    pub fn update(&mut self, params: &mut [&mut [f32]], grads: &[&[f64]]) {
        assert_eq!(params.len(), grads.len());
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(p.len(), g.len());
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                let delta = self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                p[i] = (f64::from(p[i]) - delta) as f32;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first step is lr · g/|g| (up to epsilon).
        let mut adam = Adam::new(0.01, 0.9, 0.999, 1e-8);
        let mut p = [1.0f32, -2.0];
        adam.update(&mut [&mut p], &[&[3.0, -0.5]]);
        assert!((p[0] - 0.99).abs() < 1e-6);
        assert!((p[1] - -1.99).abs() < 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = Adam::new(0.05, 0.9, 0.999, 1e-8);
        let mut p = [3.0f32];
        for _ in 0..2000 {
            let g = [2.0 * f64::from(p[0] - 0.5)];
            adam.update(&mut [&mut p], &[&g]);
        }
        assert!((p[0] - 0.5).abs() < 1e-2, "{}", p[0]);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut adam = Adam::new(0.1, 0.9, 0.999, 1e-8);
        let mut p = [0.25f32; 3];
        adam.update(&mut [&mut p], &[&[0.0; 3]]);
        assert_eq!(p, [0.25; 3]);
    }
}
