use ndarray::Zip;
use pclab_linalg::Matrix;

/// Bias-corrected Adam over a list of weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(shapes_of: &[Matrix]) -> Self {
        AdamState {
            m: shapes_of.iter().map(|w| Matrix::zeros(w.raw_dim())).collect(),
            v: shapes_of.iter().map(|w| Matrix::zeros(w.raw_dim())).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, weights: &mut [Matrix], grads: &[Matrix], lr: f64) {
        assert_eq!(weights.len(), grads.len(), "one gradient per weight");
        assert_eq!(weights.len(), self.m.len(), "state shaped like weights");
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for ((w, g), (m, v)) in weights
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(w.dim(), g.dim(), "gradient shape");
            Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut w = vec![Matrix::from_elem((2, 3), 0.7)];
        let before = w.clone();
        let mut s = AdamState::new(&w);
        s.step(&mut w, &[Matrix::zeros((2, 3))], 0.1);
        assert_eq!(w, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut w = vec![Matrix::zeros((2, 2))];
        let mut s = AdamState::new(&w);
        let g = Matrix::from_shape_fn((2, 2), |(i, j)| if (i + j) % 2 == 0 { 3.0 } else { -0.2 });
        s.step(&mut w, std::slice::from_ref(&g), 0.01);
        for (wv, gv) in w[0].iter().zip(g.iter()) {
            assert!((wv + 0.01 * gv.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut w = vec![Matrix::from_elem((3, 3), 1.0)];
            let mut s = AdamState::new(&w);
            for k in 0..5 {
                let g = Matrix::from_shape_fn((3, 3), |(i, j)| (i as f64 - j as f64) * (k as f64 + 1.0));
                s.step(&mut w, &[g], 0.05);
            }
            (w, s)
        };
        assert_eq!(run(), run());
    }
}
