//! Desk-scale stand-in for encoder fine-tuning: a trainable linear
//! projection with L2-normalized outputs, shaped by supervised contrastive
//! objectives over frame labels (frame space) or click co-occurrence
//! (content space).

mod loss;
mod train;

pub use loss::supcon_loss;
pub use train::{
    click_contrastive_batch, frame_contrastive_batch, train, EpochStats, Objective, TrainConfig,
    TrainingTrace,
};

use std::path::Path;

use crate::corpus::io::{read_matrix, write_matrix};
use crate::corpus::{EmbeddingMatrix, SpaceTag};
use crate::error::{Error, Result};
use crate::frame::FrameLabel;

/// Linear projection with L2-normalized outputs and a softmax temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    /// Row-major `dim_out x dim_in`.
    weight: Vec<f64>,
    dim_in: usize,
    dim_out: usize,
    tau: f64,
}

impl ProjectionModel {
    pub fn new(weight: Vec<f64>, dim_in: usize, dim_out: usize, tau: f64) -> Result<Self> {
        if weight.len() != dim_in * dim_out {
            return Err(Error::DimensionMismatch(format!(
                "expected {} weights for a {dim_out}x{dim_in} projection, got {}",
                dim_in * dim_out,
                weight.len()
            )));
        }
        if tau <= 0.0 {
            return Err(Error::Invalid(format!(
                "temperature {tau} must be positive"
            )));
        }
        Ok(Self {
            weight,
            dim_in,
            dim_out,
            tau,
        })
    }

    /// Identity projection.
    pub fn identity(dim: usize, tau: f64) -> Result<Self> {
        let mut weight = vec![0.0; dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = 1.0;
        }
        Self::new(weight, dim, dim, tau)
    }

    /// Seeded Gaussian initialization scaled by 1/sqrt(dim_in).
    pub fn seeded(dim_in: usize, dim_out: usize, tau: f64, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (dim_in as f64).sqrt()).unwrap();
        let weight = (0..dim_in * dim_out)
            .map(|_| normal.sample(&mut rng))
            .collect();
        Self::new(weight, dim_in, dim_out, tau)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub(crate) fn weight_mut(&mut self) -> &mut [f64] {
        &mut self.weight
    }

    /// Unnormalized projection `W x`.
    pub(crate) fn project_raw(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim_out];
        for (row, out) in y.iter_mut().enumerate() {
            let weights = &self.weight[row * self.dim_in..(row + 1) * self.dim_in];
            *out = weights.iter().zip(x).map(|(w, v)| w * v).sum();
        }
        y
    }

    /// Projected and L2-normalized output. A zero input stays zero.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.project_raw(x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in y.iter_mut() {
                *v /= norm;
            }
        }
        y
    }
}

/// Labeled rows for a supervised contrastive step. Only rows listed in
/// `anchors` contribute loss terms; every row appears in denominators.
#[derive(Debug, Clone)]
pub struct ContrastiveBatch {
    anchors: Vec<usize>,
    labels: Vec<u32>,
    base_vectors: Vec<Vec<f64>>,
}

impl ContrastiveBatch {
    pub fn new(anchors: Vec<usize>, labels: Vec<u32>, base_vectors: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != base_vectors.len() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: base_vectors.len(),
            });
        }
        if base_vectors.is_empty() {
            return Err(Error::EmptyInput("contrastive batch"));
        }
        if let Some(&bad) = anchors.iter().find(|&&a| a >= labels.len()) {
            return Err(Error::Invalid(format!("anchor index {bad} out of range")));
        }
        Ok(Self {
            anchors,
            labels,
            base_vectors,
        })
    }

    /// Batch where every row is an anchor.
    pub fn with_all_anchors(labels: Vec<u32>, base_vectors: Vec<Vec<f64>>) -> Result<Self> {
        let anchors = (0..labels.len()).collect();
        Self::new(anchors, labels, base_vectors)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn base_vectors(&self) -> &[Vec<f64>] {
        &self.base_vectors
    }

    /// Rows sharing the anchor's label, excluding the anchor itself.
    pub(crate) fn positives_of(&self, anchor: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| j != anchor && self.labels[j] == self.labels[anchor])
            .collect()
    }
}

/// Projects and unit-normalizes every row of `base` into a new matrix tagged
/// `tag`.
pub fn export_embeddings(
    model: &ProjectionModel,
    base: &EmbeddingMatrix,
    tag: SpaceTag,
) -> Result<EmbeddingMatrix> {
    if base.dim() != model.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "base dim {} does not match projection input dim {}",
            base.dim(),
            model.dim_in()
        )));
    }
    let mut values = Vec::with_capacity(base.rows() * model.dim_out());
    for row in 0..base.rows() {
        let x: Vec<f64> = base.row(row).iter().map(|&v| v as f64).collect();
        let z = model.project(&x);
        values.extend(z.iter().map(|&v| v as f32));
    }
    EmbeddingMatrix::new(base.rows(), model.dim_out(), values, tag)
}

/// Writes the weight matrix in the embedding binary format plus a
/// `<path>.meta` sidecar holding dim_in, dim_out, tau and the training seed.
pub fn save_checkpoint(path: &Path, model: &ProjectionModel, seed: u64) -> Result<()> {
    let weights: Vec<f32> = model.weight().iter().map(|&w| w as f32).collect();
    let matrix = EmbeddingMatrix::new(model.dim_out(), model.dim_in(), weights, SpaceTag::Content)?;
    write_matrix(path, &matrix)?;

    let meta_path = meta_path(path);
    let meta = format!(
        "dim_in = {}\ndim_out = {}\ntau = {}\nseed = {}\n",
        model.dim_in(),
        model.dim_out(),
        model.tau(),
        seed
    );
    std::fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
}

/// Loads a checkpoint written by [`save_checkpoint`]. Returns the model and
/// the recorded seed.
pub fn load_checkpoint(path: &Path) -> Result<(ProjectionModel, u64)> {
    let matrix = read_matrix(path, SpaceTag::Content)?;
    let meta_path = meta_path(path);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut tau = None;
    let mut seed = None;
    let mut dim_in = None;
    let mut dim_out = None;
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "tau" => tau = value.parse::<f64>().ok(),
            "seed" => seed = value.parse::<u64>().ok(),
            "dim_in" => dim_in = value.parse::<usize>().ok(),
            "dim_out" => dim_out = value.parse::<usize>().ok(),
            _ => {}
        }
    }
    let tau = tau.ok_or_else(|| Error::Config("checkpoint meta missing tau".into()))?;
    let seed = seed.ok_or_else(|| Error::Config("checkpoint meta missing seed".into()))?;
    let dim_in = dim_in.ok_or_else(|| Error::Config("checkpoint meta missing dim_in".into()))?;
    let dim_out = dim_out.ok_or_else(|| Error::Config("checkpoint meta missing dim_out".into()))?;
    if dim_in != matrix.dim() || dim_out != matrix.rows() {
        return Err(Error::DimensionMismatch(
            "checkpoint meta disagrees with the weight matrix".into(),
        ));
    }
    let weight: Vec<f64> = matrix.values().iter().map(|&w| w as f64).collect();
    Ok((ProjectionModel::new(weight, dim_in, dim_out, tau)?, seed))
}

fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta");
    std::path::PathBuf::from(os)
}

/// Mean intra-class and inter-class cosine similarity over all row pairs.
pub fn class_cosine_means(matrix: &EmbeddingMatrix, frames: &[FrameLabel]) -> Result<(f64, f64)> {
    if frames.len() != matrix.rows() {
        return Err(Error::LengthMismatch {
            left: frames.len(),
            right: matrix.rows(),
        });
    }
    let cosine = |a: &[f32], b: &[f32]| -> f64 {
        let mut dot = 0.0f64;
        let mut na = 0.0f64;
        let mut nb = 0.0f64;
        for (&x, &y) in a.iter().zip(b) {
            dot += x as f64 * y as f64;
            na += (x as f64) * (x as f64);
            nb += (y as f64) * (y as f64);
        }
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na.sqrt() * nb.sqrt())
        }
    };
    let mut intra = (0.0, 0usize);
    let mut inter = (0.0, 0usize);
    for i in 0..matrix.rows() {
        for j in (i + 1)..matrix.rows() {
            let c = cosine(matrix.row(i), matrix.row(j));
            if frames[i] == frames[j] {
                intra.0 += c;
                intra.1 += 1;
            } else {
                inter.0 += c;
                inter.1 += 1;
            }
        }
    }
    if intra.1 == 0 || inter.1 == 0 {
        return Err(Error::Invalid(
            "need both intra-class and inter-class pairs".into(),
        ));
    }
    Ok((intra.0 / intra.1 as f64, inter.0 / inter.1 as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_projection_preserves_unit_inputs() {
        let model = ProjectionModel::identity(3, 0.9).unwrap();
        let out = model.project(&[1.0, 0.0, 0.0]);
        assert_eq!(out, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn projection_output_is_unit_norm() {
        let model = ProjectionModel::seeded(4, 3, 0.9, 7).unwrap();
        let out = model.project(&[0.3, -1.2, 0.5, 2.0]);
        let norm: f64 = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_input_projects_to_zero() {
        let model = ProjectionModel::seeded(4, 3, 0.9, 7).unwrap();
        assert_eq!(model.project(&[0.0; 4]), vec![0.0; 3]);
    }

    #[test]
    fn non_positive_temperature_is_rejected() {
        assert!(ProjectionModel::identity(2, 0.0).is_err());
        assert!(ProjectionModel::identity(2, -1.0).is_err());
    }

    #[test]
    fn export_with_identity_weights_normalizes_rows() {
        let base = EmbeddingMatrix::new(2, 2, vec![2.0, 0.0, 0.0, 1.0], SpaceTag::Content).unwrap();
        let model = ProjectionModel::identity(2, 0.9).unwrap();
        let out = export_embeddings(&model, &base, SpaceTag::Frame).unwrap();
        assert_eq!(out.space_tag(), SpaceTag::Frame);
        assert_eq!(out.row(0), &[1.0, 0.0]);
        assert_eq!(out.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn exported_rows_have_unit_norm() {
        let base = EmbeddingMatrix::new(
            3,
            4,
            (0..12).map(|i| i as f32 * 0.3 - 1.0).collect(),
            SpaceTag::Content,
        )
        .unwrap();
        let model = ProjectionModel::seeded(4, 4, 0.9, 1).unwrap();
        let out = export_embeddings(&model, &base, SpaceTag::Frame).unwrap();
        for row in 0..out.rows() {
            let norm: f64 = out
                .row(row)
                .iter()
                .map(|&v| (v as f64) * (v as f64))
                .sum::<f64>()
                .sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn checkpoint_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = ProjectionModel::seeded(4, 3, 0.9, 11).unwrap();
        save_checkpoint(&path, &model, 11).unwrap();
        let (loaded, seed) = load_checkpoint(&path).unwrap();
        assert_eq!(seed, 11);
        assert_eq!(loaded.dim_in(), 4);
        assert_eq!(loaded.dim_out(), 3);
        assert_eq!(loaded.tau(), 0.9);
        for (a, b) in loaded.weight().iter().zip(model.weight()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn exported_matrix_round_trips_through_corpus_loader() {
        use crate::corpus::{read_embeddings, write_embeddings};
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shaped.emb");
        let base =
            EmbeddingMatrix::new(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0], SpaceTag::Content)
                .unwrap();
        let model = ProjectionModel::identity(3, 0.9).unwrap();
        let out = export_embeddings(&model, &base, SpaceTag::Frame).unwrap();
        write_embeddings(&path, &out, &["x", "y"]).unwrap();
        let (reloaded, ids) = read_embeddings(&path, SpaceTag::Frame).unwrap();
        assert_eq!(reloaded, out);
        assert_eq!(ids, vec!["x", "y"]);
    }
}
