//! JSON checkpoints: model type, architecture, flat parameters, seed.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::lstm::{Head, Lstm};
use crate::models::mlp::Mlp;
use crate::models::xnet::XNet;
use crate::tensor::Tensor;

/// Architecture of a saved model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "snake_case")]
pub enum ModelConfig {
    Xnet {
        input_dim: usize,
        units: usize,
    },
    Mlp {
        widths: Vec<usize>,
    },
    Lstm {
        input_dim: usize,
        hidden: usize,
        head: Head,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Xnet(XNet),
    Mlp(Mlp),
    Lstm(Lstm),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    #[serde(flatten)]
    pub config: ModelConfig,
    /// Parameters concatenated in the model's documented order, row-major.
    pub params: Vec<f64>,
    pub seed: u64,
}

impl ModelConfig {
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match self {
            ModelConfig::Xnet { input_dim, units } => xnet_shapes(*input_dim, *units),
            ModelConfig::Mlp { widths } => widths
                .windows(2)
                .flat_map(|p| [vec![p[0], p[1]], vec![1, p[1]]])
                .collect(),
            ModelConfig::Lstm {
                input_dim,
                hidden,
                head,
            } => {
                let mut s = vec![vec![input_dim + hidden, *hidden]; 4];
                s.extend(vec![vec![1, *hidden]; 4]);
                match head {
                    Head::Affine => s.extend([vec![*hidden, 1], vec![1, 1]]),
                    Head::Xnet { units, .. } => s.extend(xnet_shapes(*hidden, *units)),
                }
                s
            }
        }
    }
}

fn xnet_shapes(d: usize, k: usize) -> Vec<Vec<usize>> {
    vec![
        vec![d, k],
        vec![1, k],
        vec![1, k],
        vec![1, k],
        vec![1, k],
        vec![1, 1],
    ]
}

impl AnyModel {
    pub fn config(&self) -> ModelConfig {
        match self {
            AnyModel::Xnet(m) => ModelConfig::Xnet {
                input_dim: m.input_dim(),
                units: m.units(),
            },
            AnyModel::Mlp(m) => ModelConfig::Mlp {
                widths: m.widths().to_vec(),
            },
            AnyModel::Lstm(m) => ModelConfig::Lstm {
                input_dim: m.input_dim(),
                hidden: m.hidden(),
                head: m.head().clone(),
            },
        }
    }

    pub fn params(&self) -> &[Tensor] {
        match self {
            AnyModel::Xnet(m) => m.params(),
            AnyModel::Mlp(m) => m.params(),
            AnyModel::Lstm(m) => m.params(),
        }
    }
}

impl Checkpoint {
    pub fn new(model: &AnyModel, seed: u64) -> Self {
        let params = model
            .params()
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect();
        Self {
            config: model.config(),
            params,
            seed,
        }
    }

    pub fn to_model(&self) -> Result<AnyModel> {
        let shapes = self.config.param_shapes();
        let total: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
        if total != self.params.len() {
            return Err(Error::invalid(format!(
                "checkpoint holds {} parameters, architecture needs {total}",
                self.params.len()
            )));
        }
        let mut tensors = Vec::with_capacity(shapes.len());
        let mut at = 0;
        for s in shapes {
            let n: usize = s.iter().product();
            tensors.push(Tensor::checked(s, self.params[at..at + n].to_vec())?);
            at += n;
        }
        Ok(match &self.config {
            ModelConfig::Xnet { .. } => AnyModel::Xnet(XNet::from_params(tensors)?),
            ModelConfig::Mlp { widths } => AnyModel::Mlp(Mlp::from_params(widths, tensors)?),
            ModelConfig::Lstm {
                input_dim,
                hidden,
                head,
            } => AnyModel::Lstm(Lstm::from_params(
                *input_dim,
                *hidden,
                head.clone(),
                tensors,
            )?),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::xnet::XNetInit;
    use crate::rng::SeedRng;

    #[test]
    fn xnet_round_trip_is_bit_identical() {
        let mut rng = SeedRng::new(42);
        let m = XNet::new(2, 16, &XNetInit::default(), &mut rng).unwrap();
        let x = rng.uniform_tensor(&[50, 2], -1.0, 1.0);
        let before = m.predict(&x).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        Checkpoint::new(&AnyModel::Xnet(m), 42).save(&path).unwrap();
        let ck = Checkpoint::load(&path).unwrap();
        assert_eq!(ck.seed, 42);
        let AnyModel::Xnet(back) = ck.to_model().unwrap() else {
            panic!("wrong model type")
        };
        assert_eq!(back.predict(&x).unwrap().data(), before.data());
    }

    #[test]
    fn lstm_and_mlp_round_trip() {
        let mut rng = SeedRng::new(1);
        let models = [
            AnyModel::Mlp(Mlp::new(&[2, 20, 20, 1], &mut rng).unwrap()),
            AnyModel::Lstm(Lstm::new(1, 10, Head::Affine, &mut rng).unwrap()),
            AnyModel::Lstm(
                Lstm::new(
                    1,
                    4,
                    Head::Xnet {
                        units: 3,
                        init: XNetInit::default(),
                    },
                    &mut rng,
                )
                .unwrap(),
            ),
        ];
        for m in models {
            let ck = Checkpoint::new(&m, 1);
            let text = serde_json::to_string(&ck).unwrap();
            let back: Checkpoint = serde_json::from_str(&text).unwrap();
            assert_eq!(back.to_model().unwrap(), m);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let ck = Checkpoint {
            config: ModelConfig::Xnet {
                input_dim: 1,
                units: 2,
            },
            params: vec![0.0; 3],
            seed: 0,
        };
        assert!(ck.to_model().is_err());
    }
}
