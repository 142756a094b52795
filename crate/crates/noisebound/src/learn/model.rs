//! Models: multinomial logistic regression and ReLU MLPs, with exact
//! reverse-mode gradients of the cross-entropy surrogate loss.
//!
//! Parameters are a single flat vector, laid out layer by layer as
//! [W₁ row-major, b₁, W₂, b₂, …] where Wₗ maps the previous width to the
//! next. A logistic model is the single-layer case. Initialization is
//! uniform in [−1/√fan_in, +1/√fan_in] per layer. The rectifier uses
//! subgradient 0 at its kink, so the backward pass is defined everywhere.

use crate::error::{Error, Result};
use rand::Rng;

/// Architecture of a classifier mapping `dim` features to `classes` logits.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ModelSpec {
    /// Linear softmax classifier.
    Logistic { dim: usize, classes: usize },
    /// Fully connected rectifier network with the given hidden widths.
    Mlp {
        dim: usize,
        hidden: Vec<usize>,
        classes: usize,
    },
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Logistic { dim, .. } | ModelSpec::Mlp { dim, .. } => *dim,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            ModelSpec::Logistic { classes, .. } | ModelSpec::Mlp { classes, .. } => *classes,
        }
    }

    /// Layer widths including input and output.
    pub fn widths(&self) -> Vec<usize> {
        match self {
            ModelSpec::Logistic { dim, classes } => vec![*dim, *classes],
            ModelSpec::Mlp {
                dim,
                hidden,
                classes,
            } => {
                let mut w = Vec::with_capacity(hidden.len() + 2);
                w.push(*dim);
                w.extend_from_slice(hidden);
                w.push(*classes);
                w
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Uniform init in [−1/√fan_in, +1/√fan_in] per layer, seeded by the rng.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.param_count());
        for w in self.widths().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out + fan_out {
                params.push(rng.random_range(-bound..=bound));
            }
        }
        params
    }

    /// Reusable forward/backward buffers sized for this architecture.
    pub fn workspace(&self) -> Workspace {
        let widths = self.widths();
        Workspace {
            acts: widths.iter().map(|w| vec![0.0; *w]).collect(),
            delta: widths.iter().map(|w| vec![0.0; *w]).collect(),
        }
    }

    fn check_shapes(&self, params: &[f64], x: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                left: params.len(),
                right: self.param_count(),
            });
        }
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: self.dim(),
            });
        }
        Ok(())
    }

    /// Forward pass; leaves per-layer activations in the workspace and
    /// returns the logits slot index.
    fn forward(&self, params: &[f64], x: &[f64], ws: &mut Workspace) {
        let widths = self.widths();
        ws.acts[0].copy_from_slice(x);
        let mut off = 0;
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let weights = &params[off..off + fan_in * fan_out];
            let bias = &params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let last = l == widths.len() - 2;
            // Split borrow: activations of layer l feed layer l+1.
            let (lo, hi) = ws.acts.split_at_mut(l + 1);
            let input = &lo[l];
            let out = &mut hi[0];
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                let mut acc = bias[o];
                for (wi, xi) in row.iter().zip(input.iter()) {
                    acc += wi * xi;
                }
                // rectifier on hidden layers, identity on the logit layer
                out[o] = if last { acc } else { acc.max(0.0) };
            }
            off += fan_in * fan_out + fan_out;
        }
    }

    /// Class logits for one example.
    pub fn logits(&self, params: &[f64], x: &[f64], ws: &mut Workspace) -> Result<Vec<f64>> {
        self.check_shapes(params, x)?;
        self.forward(params, x, ws);
        Ok(ws.acts.last().unwrap().clone())
    }

    /// Cross-entropy surrogate loss of one labeled example.
    pub fn surrogate_loss(
        &self,
        params: &[f64],
        x: &[f64],
        label: usize,
        ws: &mut Workspace,
    ) -> Result<f64> {
        self.check_shapes(params, x)?;
        if label >= self.classes() {
            return Err(Error::Config(format!(
                "label {label} out of range for {} classes",
                self.classes()
            )));
        }
        self.forward(params, x, ws);
        Ok(cross_entropy(ws.acts.last().unwrap(), label))
    }

    /// Cross-entropy loss and its exact gradient for one example, written
    /// into `grad` (which must have `param_count()` entries; it is
    /// overwritten, not accumulated).
    pub fn loss_and_grad(
        &self,
        params: &[f64],
        x: &[f64],
        label: usize,
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check_shapes(params, x)?;
        if grad.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                left: grad.len(),
                right: self.param_count(),
            });
        }
        if label >= self.classes() {
            return Err(Error::Config(format!(
                "label {label} out of range for {} classes",
                self.classes()
            )));
        }
        let widths = self.widths();
        self.forward(params, x, ws);
        let logits = ws.acts.last().unwrap();
        let loss = cross_entropy(logits, label);

        // dLoss/dlogits = softmax − onehot
        let top = widths.len() - 1;
        let probs = softmax(logits);
        for (o, p) in probs.iter().enumerate() {
            ws.delta[top][o] = p - if o == label { 1.0 } else { 0.0 };
        }

        // Backward through the layers.
        let mut off = self.param_count();
        for l in (0..widths.len() - 1).rev() {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            off -= fan_in * fan_out + fan_out;
            let weights = &params[off..off + fan_in * fan_out];
            let (grad_w, grad_b) =
                grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            let (lo, hi) = ws.delta.split_at_mut(l + 1);
            let dout = &hi[0];
            let din = &mut lo[l];
            let input = &ws.acts[l];
            din.iter_mut().for_each(|d| *d = 0.0);
            for o in 0..fan_out {
                let d = dout[o];
                grad_b[o] = d;
                let row_w = &weights[o * fan_in..(o + 1) * fan_in];
                let row_g = &mut grad_w[o * fan_in..(o + 1) * fan_in];
                for i in 0..fan_in {
                    row_g[i] = d * input[i];
                    din[i] += d * row_w[i];
                }
            }
            // Rectifier gate for the layer below (skip the input layer);
            // subgradient 0 exactly at the kink: gate on activation > 0.
            if l > 0 {
                for (d, a) in din.iter_mut().zip(&ws.acts[l]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
        }
        Ok(loss)
    }

    /// Predicted class: argmax of the logits, lowest index on ties.
    pub fn predict(&self, params: &[f64], x: &[f64], ws: &mut Workspace) -> Result<usize> {
        self.check_shapes(params, x)?;
        self.forward(params, x, ws);
        let logits = ws.acts.last().unwrap();
        let mut best = 0;
        for (i, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = i;
            }
        }
        Ok(best)
    }
}

/// Numerically stable log-sum-exp cross-entropy of logits vs a label.
fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Scratch buffers for forward/backward passes; reuse across examples to
/// keep the training loop allocation-free.
#[derive(Debug, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::{stream_rng, Stream};

    #[test]
    fn param_counts() {
        let logistic = ModelSpec::Logistic { dim: 2, classes: 2 };
        assert_eq!(logistic.param_count(), 6);
        let mlp = ModelSpec::Mlp {
            dim: 2,
            hidden: vec![16],
            classes: 2,
        };
        assert_eq!(mlp.param_count(), 2 * 16 + 16 + 16 * 2 + 2);
    }

    #[test]
    fn zero_params_give_log_classes_loss() {
        // All-zero weights produce uniform class probabilities, so the
        // cross-entropy is ln(classes); ln 2 in the binary case.
        for (classes, spec) in [
            (2, ModelSpec::Logistic { dim: 3, classes: 2 }),
            (
                2,
                ModelSpec::Mlp {
                    dim: 3,
                    hidden: vec![4],
                    classes: 2,
                },
            ),
            (5, ModelSpec::Logistic { dim: 3, classes: 5 }),
        ] {
            let params = vec![0.0; spec.param_count()];
            let mut ws = spec.workspace();
            let loss = spec
                .surrogate_loss(&params, &[0.5, -1.0, 2.0], 1, &mut ws)
                .unwrap();
            assert!(
                (loss - (classes as f64).ln()).abs() < 1e-12,
                "loss at zero params {loss}, want ln({classes})"
            );
        }
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let spec = ModelSpec::Mlp {
            dim: 4,
            hidden: vec![9],
            classes: 2,
        };
        let mut rng = stream_rng(3, Stream::Init, 0, 0);
        let p = spec.init_params(&mut rng);
        assert_eq!(p.len(), spec.param_count());
        let (first_layer, second_layer) = p.split_at(4 * 9 + 9);
        assert!(
            first_layer.iter().all(|w| w.abs() <= 0.5),
            "fan-in 4 gives bound 1/2"
        );
        assert!(
            second_layer.iter().all(|w| w.abs() <= 1.0 / 3.0),
            "fan-in 9 gives bound 1/3"
        );
        let mut rng2 = stream_rng(3, Stream::Init, 0, 0);
        assert_eq!(
            p,
            spec.init_params(&mut rng2),
            "init must be seed-deterministic"
        );
    }

    fn finite_difference_check(spec: &ModelSpec, seed: u64, trials: usize) {
        let mut rng = stream_rng(seed, Stream::Init, 0, 0);
        let mut ws = spec.workspace();
        let mut grad = vec![0.0; spec.param_count()];
        for trial in 0..trials {
            let params = spec.init_params(&mut rng);
            let x: Vec<f64> = (0..spec.dim())
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            let label = rng.random_range(0..spec.classes());
            spec.loss_and_grad(&params, &x, label, &mut ws, &mut grad)
                .unwrap();
            let h = 1e-5;
            let mut p = params.clone();
            for i in 0..p.len() {
                p[i] = params[i] + h;
                let up = spec.surrogate_loss(&p, &x, label, &mut ws).unwrap();
                p[i] = params[i] - h;
                let down = spec.surrogate_loss(&p, &x, label, &mut ws).unwrap();
                p[i] = params[i];
                let fd = (up - down) / (2.0 * h);
                let rel = (fd - grad[i]).abs() / (1.0 + grad[i].abs());
                assert!(
                    rel < 1e-4,
                    "trial {trial} coordinate {i}: analytic {} vs central difference {fd}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        finite_difference_check(&ModelSpec::Logistic { dim: 3, classes: 3 }, 17, 10);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        finite_difference_check(
            &ModelSpec::Mlp {
                dim: 3,
                hidden: vec![8, 5],
                classes: 2,
            },
            18,
            10,
        );
    }

    #[test]
    fn prediction_breaks_ties_toward_lowest_class() {
        let spec = ModelSpec::Logistic { dim: 2, classes: 3 };
        let params = vec![0.0; spec.param_count()]; // all logits equal
        let mut ws = spec.workspace();
        assert_eq!(spec.predict(&params, &[1.0, -1.0], &mut ws).unwrap(), 0);
    }

    #[test]
    fn shape_violations_error() {
        let spec = ModelSpec::Logistic { dim: 2, classes: 2 };
        let mut ws = spec.workspace();
        assert!(spec.surrogate_loss(&[0.0; 6], &[1.0], 0, &mut ws).is_err());
        assert!(spec
            .surrogate_loss(&[0.0; 5], &[1.0, 2.0], 0, &mut ws)
            .is_err());
        assert!(spec
            .surrogate_loss(&[0.0; 6], &[1.0, 2.0], 7, &mut ws)
            .is_err());
    }
}
