use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }
}

/// Affine rescaling: normalized = (raw - mean) / scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization { mean: 0.0, scale: 1.0 };
}

/// Fully connected layer; `weights` has one row per output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.weights.len()
    }
}

/// Small dense feed-forward network with input/output normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
    norm_in: Vec<Normalization>,
    norm_out: Vec<Normalization>,
    width: usize,
}

impl DenseNet {
    /// Checks the layer chain, scales and final activation.
    pub fn new(layers: Vec<Layer>, norm_in: Vec<Normalization>, norm_out: Vec<Normalization>) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::invalid("net.layers", "network has no layers"));
        }
        let mut expected = norm_in.len();
        for (i, l) in layers.iter().enumerate() {
            let loc = format!("net.layers[{i}]");
            if l.weights.is_empty() {
                return Err(ModelError::invalid(loc, "layer has no rows"));
            }
            if let Some(r) = l.weights.iter().position(|row| row.len() != expected) {
                return Err(ModelError::invalid(
                    format!("{loc}.weights[{r}]"),
                    format!("expected {expected} columns, got {}", l.weights[r].len()),
                ));
            }
            if l.bias.len() != l.outputs() {
                return Err(ModelError::invalid(format!("{loc}.bias"), format!("expected {} entries, got {}", l.outputs(), l.bias.len())));
            }
            if l.weights.iter().flatten().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(ModelError::invalid(loc, "non-finite parameter"));
            }
            expected = l.outputs();
        }
        if expected != norm_out.len() {
            return Err(ModelError::invalid(
                "net.norm_out",
                format!("last layer has {expected} outputs but {} output normalizations", norm_out.len()),
            ));
        }
        if layers.last().map(|l| l.activation) != Some(Activation::Identity) {
            return Err(ModelError::invalid(format!("net.layers[{}]", layers.len() - 1), "last activation must be identity"));
        }
        for (name, norms) in [("net.norm_in", &norm_in), ("net.norm_out", &norm_out)] {
            if let Some(i) = norms.iter().position(|n| !(n.scale > 0.0 && n.scale.is_finite() && n.mean.is_finite())) {
                return Err(ModelError::invalid(format!("{name}[{i}]"), "scale must be positive and finite"));
            }
        }
        let width = layers.iter().map(Layer::outputs).chain([norm_in.len()]).max().unwrap_or(0);
        Ok(DenseNet { layers, norm_in, norm_out, width })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn norm_in(&self) -> &[Normalization] {
        &self.norm_in
    }

    pub fn norm_out(&self) -> &[Normalization] {
        &self.norm_out
    }

    pub fn inputs(&self) -> usize {
        self.norm_in.len()
    }

    pub fn outputs(&self) -> usize {
        self.norm_out.len()
    }

    pub fn eval_into(&self, inputs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(inputs.len(), self.inputs());
        let mut a = vec![0.0; self.width];
        let mut b = vec![0.0; self.width];
        for (x, (raw, n)) in a.iter_mut().zip(inputs.iter().zip(&self.norm_in)) {
            *x = (raw - n.mean) / n.scale;
        }
        let mut len = inputs.len();
        for layer in &self.layers {
            for (r, (row, bias)) in layer.weights.iter().zip(&layer.bias).enumerate() {
                let z = row.iter().zip(&a[..len]).fold(*bias, |acc, (w, x)| acc + w * x);
                b[r] = layer.activation.apply(z);
            }
            len = layer.outputs();
            std::mem::swap(&mut a, &mut b);
        }
        for (o, (y, n)) in out.iter_mut().zip(a.iter().zip(&self.norm_out)) {
            *o = y * n.scale + n.mean;
        }
    }
}

pub fn eval_net(net: &DenseNet, inputs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; net.outputs()];
    net.eval_into(inputs, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Layer {
        Layer { weights, bias, activation }
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = DenseNet::new(
            vec![
                layer(vec![vec![0.0; 3]; 4], vec![0.0; 4], Activation::Identity),
                layer(vec![vec![0.0; 4]; 2], vec![0.0; 2], Activation::Identity),
            ],
            vec![Normalization::IDENTITY; 3],
            vec![Normalization::IDENTITY; 2],
        )
        .unwrap();
        assert_eq!(eval_net(&net, &[1.0, -2.0, 3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input() {
        let net = DenseNet::new(
            vec![layer(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], Activation::Identity)],
            vec![Normalization::IDENTITY; 2],
            vec![Normalization::IDENTITY; 2],
        )
        .unwrap();
        assert_eq!(eval_net(&net, &[0.7, -4.5]), vec![0.7, -4.5]);
    }

    #[test]
    fn normalization_applied() {
        let net = DenseNet::new(
            vec![layer(vec![vec![1.0]], vec![0.0], Activation::Identity)],
            vec![Normalization { mean: 1.0, scale: 2.0 }],
            vec![Normalization { mean: 10.0, scale: 3.0 }],
        )
        .unwrap();
        // (5 - 1) / 2 = 2 -> 2 * 3 + 10
        assert_eq!(eval_net(&net, &[5.0]), vec![16.0]);
    }

    #[test]
    fn chain_errors() {
        let bad_chain = DenseNet::new(
            vec![
                layer(vec![vec![1.0, 1.0]; 3], vec![0.0; 3], Activation::Tanh),
                layer(vec![vec![1.0; 2]], vec![0.0], Activation::Identity),
            ],
            vec![Normalization::IDENTITY; 2],
            vec![Normalization::IDENTITY],
        );
        assert!(bad_chain.unwrap_err().to_string().contains("net.layers[1].weights[0]"));
        let tanh_last = DenseNet::new(
            vec![layer(vec![vec![1.0]], vec![0.0], Activation::Tanh)],
            vec![Normalization::IDENTITY],
            vec![Normalization::IDENTITY],
        );
        assert!(tanh_last.is_err());
        let zero_scale = DenseNet::new(
            vec![layer(vec![vec![1.0]], vec![0.0], Activation::Identity)],
            vec![Normalization { mean: 0.0, scale: 0.0 }],
            vec![Normalization::IDENTITY],
        );
        assert!(zero_scale.is_err());
    }
}
