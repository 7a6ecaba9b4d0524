use rand::Rng;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Node embedding `E` (`N x d`), the only parameter whose shape involves `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbedding(pub Tensor);

impl NodeEmbedding {
    pub fn nodes(&self) -> usize {
        self.0.rows()
    }

    pub fn dim(&self) -> usize {
        self.0.row_len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }
}

/// Node-count-independent parameters: every tensor here transfers between
/// domains unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPools {
    /// Temporal pools, one per conv layer, each `d x (out * K * in)`.
    pub conv_pools: Vec<Tensor>,
    /// One scalar bias per conv layer.
    pub conv_bias: Tensor,
    /// Shared 1x1 projection `O x C` on the first block's residual path, when
    /// `C != O`.
    pub residual: Option<Tensor>,
    /// Spatial pool `d x (O * F)`.
    pub gcn_pool: Tensor,
    /// GCN bias `F`.
    pub gcn_bias: Tensor,
    /// Predictor pool `d x (H * S)`.
    pub predictor_pool: Tensor,
    /// Predictor bias pool `d x H`; materializes the node-specific bias.
    pub predictor_bias_pool: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StgNetParams {
    pub config: ModelConfig,
    pub embedding: NodeEmbedding,
    pub pools: WeightPools,
}

pub const EMBEDDING_NAME: &str = "embedding";

fn uniform(rng: &mut impl Rng, shape: &[usize], bound: f64) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.random_range(-bound..bound);
    }
    t
}

impl WeightPools {
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.embed_dim;
        Self {
            conv_pools: (0..config.conv_layers())
                .map(|l| {
                    let (o, i) = config.conv_io(l);
                    Tensor::zeros(&[d, o * config.kernel * i])
                })
                .collect(),
            conv_bias: Tensor::zeros(&[config.conv_layers()]),
            residual: config
                .has_residual_projection()
                .then(|| Tensor::zeros(&[config.hidden, config.channels])),
            gcn_pool: Tensor::zeros(&[d, config.hidden * config.gcn_channels]),
            gcn_bias: Tensor::zeros(&[config.gcn_channels]),
            predictor_pool: Tensor::zeros(&[d, config.horizon * config.history]),
            predictor_bias_pool: Tensor::zeros(&[d, config.horizon]),
        }
    }

    /// Pools and the residual projection from `U(-b, b)` with `b = 0.5 / sqrt(d)`;
    /// biases start at zero.
    pub fn init(config: &ModelConfig, rng: &mut impl Rng) -> Self {
        let mut pools = Self::zeros(config);
        let bound = init_bound(config);
        for t in &mut pools.conv_pools {
            *t = uniform(rng, t.shape(), bound);
        }
        if let Some(r) = &mut pools.residual {
            *r = uniform(rng, r.shape(), bound);
        }
        pools.gcn_pool = uniform(rng, pools.gcn_pool.shape(), bound);
        pools.predictor_pool = uniform(rng, pools.predictor_pool.shape(), bound);
        pools
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = self
            .conv_pools
            .iter()
            .enumerate()
            .map(|(l, t)| (format!("tcn.conv{l}.pool"), t))
            .collect();
        out.push(("tcn.conv_bias".into(), &self.conv_bias));
        if let Some(r) = &self.residual {
            out.push(("tcn.residual".into(), r));
        }
        out.push(("gcn.pool".into(), &self.gcn_pool));
        out.push(("gcn.bias".into(), &self.gcn_bias));
        out.push(("predictor.pool".into(), &self.predictor_pool));
        out.push(("predictor.bias_pool".into(), &self.predictor_bias_pool));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self.conv_pools.iter_mut().collect();
        out.push(&mut self.conv_bias);
        if let Some(r) = &mut self.residual {
            out.push(r);
        }
        out.push(&mut self.gcn_pool);
        out.push(&mut self.gcn_bias);
        out.push(&mut self.predictor_pool);
        out.push(&mut self.predictor_bias_pool);
        out
    }

    /// Checks every tensor against the shapes `config` implies.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expected = Self::zeros(config);
        let have = self.named();
        let want = expected.named();
        if have.len() != want.len() {
            return Err(Error::Shape(format!(
                "{} pool tensors, config implies {}",
                have.len(),
                want.len()
            )));
        }
        for ((name, t), (wname, w)) in have.iter().zip(&want) {
            if name != wname || t.shape() != w.shape() {
                return Err(Error::Shape(format!(
                    "{name} has shape {:?}, config implies {wname} {:?}",
                    t.shape(),
                    w.shape()
                )));
            }
        }
        Ok(())
    }
}

pub fn init_bound(config: &ModelConfig) -> f64 {
    0.5 / (config.embed_dim as f64).sqrt()
}

impl NodeEmbedding {
    pub fn init(nodes: usize, dim: usize, bound: f64, rng: &mut impl Rng) -> Self {
        NodeEmbedding(uniform(rng, &[nodes, dim], bound))
    }
}

impl StgNetParams {
    pub fn init(config: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let embedding =
            NodeEmbedding::init(config.nodes, config.embed_dim, init_bound(config), rng);
        let pools = WeightPools::init(config, rng);
        Ok(Self {
            config: config.clone(),
            embedding,
            pools,
        })
    }

    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            config: config.clone(),
            embedding: NodeEmbedding(Tensor::zeros(&[config.nodes, config.embed_dim])),
            pools: WeightPools::zeros(config),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config)
    }

    pub fn from_parts(
        config: ModelConfig,
        embedding: NodeEmbedding,
        pools: WeightPools,
    ) -> Result<Self> {
        config.validate()?;
        if embedding.0.shape() != [config.nodes, config.embed_dim] {
            return Err(Error::Shape(format!(
                "embedding shape {:?}, config implies [{}, {}]",
                embedding.0.shape(),
                config.nodes,
                config.embed_dim
            )));
        }
        pools.check_shapes(&config)?;
        Ok(Self {
            config,
            embedding,
            pools,
        })
    }

    /// Every tensor with its stable name, embedding first.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![(EMBEDDING_NAME.to_string(), &self.embedding.0)];
        out.extend(self.pools.named());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embedding.0];
        out.extend(self.pools.tensors_mut());
        out
    }

    /// Total allocated element count, walked tensor by tensor.
    pub fn allocated_len(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn add_assign(&mut self, other: &StgNetParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.named()) {
            a.add_assign(b.1);
        }
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.named()
            .into_iter()
            .find(|(_, t)| !t.is_finite())
            .map(|(n, _)| n)
    }
}
