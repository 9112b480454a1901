use super::{Gradients, LayerParams, Mlp, TrainSpec};

/// First and second moment estimates mirroring the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<LayerParams>,
    second: Vec<LayerParams>,
    step: u64,
}

impl AdamState {
    pub fn new(mlp: &Mlp) -> Self {
        let zeros: Vec<LayerParams> = mlp.layers().iter().map(LayerParams::zeros_like).collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `mlp` in place.
    pub fn update(&mut self, mlp: &mut Mlp, grads: &Gradients, spec: &TrainSpec) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (spec.beta1, spec.beta2);
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        let (lr, eps) = (spec.learning_rate, spec.epsilon);

        let apply = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };

        for (((layer, g), m), v) in mlp
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            ndarray::Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| apply(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| apply(p, g, m, v));
        }
    }
}
