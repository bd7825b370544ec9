use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, ModelError};

/// Dense row-major f32 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn random(rows: usize, cols: usize, std: f32, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0f32, std).expect("std is positive and finite");
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| normal.sample(rng)).collect(),
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out = self * x`
    pub fn matvec(&self, x: &[f32], out: &mut [f32]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(x).map(|(w, v)| w * v).sum();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    /// `ffn_width x d_model`
    pub w_up: Matrix,
    /// `d_model x ffn_width`
    pub w_down: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    pub token_embedding: Matrix,
    pub position_embedding: Matrix,
    pub layers: Vec<LayerWeights>,
    pub output: Matrix,
}

impl ModelWeights {
    /// All-zero weights with the right shapes.
    pub fn zeros(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let d = config.d_model;
        let layer = LayerWeights {
            wq: Matrix::zeros(d, d),
            wk: Matrix::zeros(d, d),
            wv: Matrix::zeros(d, d),
            wo: Matrix::zeros(d, d),
            w_up: Matrix::zeros(config.ffn_width, d),
            w_down: Matrix::zeros(d, config.ffn_width),
        };
        Ok(Self {
            config: config.clone(),
            token_embedding: Matrix::zeros(config.vocab_size, d),
            position_embedding: Matrix::zeros(config.max_seq_len, d),
            layers: vec![layer; config.num_layers],
            output: Matrix::zeros(config.vocab_size, d),
        })
    }

    /// Named tensors in checkpoint order.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![
            ("token_embedding".to_string(), &self.token_embedding),
            ("position_embedding".to_string(), &self.position_embedding),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (name, m) in [
                ("wq", &l.wq),
                ("wk", &l.wk),
                ("wv", &l.wv),
                ("wo", &l.wo),
                ("w_up", &l.w_up),
                ("w_down", &l.w_down),
            ] {
                out.push((format!("layers.{i}.{name}"), m));
            }
        }
        out.push(("output".to_string(), &self.output));
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.token_embedding, &mut self.position_embedding];
        for l in &mut self.layers {
            out.extend([
                &mut l.wq,
                &mut l.wk,
                &mut l.wv,
                &mut l.wo,
                &mut l.w_up,
                &mut l.w_down,
            ]);
        }
        out.push(&mut self.output);
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.config.validate()?;
        let expected = Self::zeros(&self.config)?;
        for ((name, got), (_, want)) in self.tensors().into_iter().zip(expected.tensors()) {
            if got.rows != want.rows || got.cols != want.cols || got.data.len() != want.data.len()
            {
                return Err(ModelError::InvalidWeights(format!(
                    "{name}: expected {}x{}, got {}x{}",
                    want.rows, want.cols, got.rows, got.cols
                )));
            }
            if !got.is_finite() {
                return Err(ModelError::InvalidWeights(format!("{name} has non-finite entries")));
            }
        }
        if self.layers.len() != self.config.num_layers {
            return Err(ModelError::InvalidWeights("layer count mismatch".into()));
        }
        Ok(())
    }
}

/// Draws weights from a ChaCha8 stream seeded with `config.seed`.
pub fn init_model(config: &ModelConfig) -> Result<ModelWeights, ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.d_model;
    let dm = config.ffn_width;
    let sd = 1.0 / (d as f32).sqrt();
    let sdm = 1.0 / (dm as f32).sqrt();
    let token_embedding = Matrix::random(config.vocab_size, d, 1.0, &mut rng);
    let position_embedding = Matrix::random(config.max_seq_len, d, 0.1, &mut rng);
    let layers = (0..config.num_layers)
        .map(|_| LayerWeights {
            wq: Matrix::random(d, d, sd, &mut rng),
            wk: Matrix::random(d, d, sd, &mut rng),
            wv: Matrix::random(d, d, sd, &mut rng),
            wo: Matrix::random(d, d, sd, &mut rng),
            w_up: Matrix::random(dm, d, sd, &mut rng),
            w_down: Matrix::random(d, dm, sdm, &mut rng),
        })
        .collect();
    let output = Matrix::random(config.vocab_size, d, sd, &mut rng);
    Ok(ModelWeights {
        config: config.clone(),
        token_embedding,
        position_embedding,
        layers,
        output,
    })
}
