//! Batch construction and the seeded gradient-descent training loop with
//! early stopping on validation loss.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Impression, Split};
use crate::error::{Error, Result};
use crate::frame::FrameLabel;
use crate::shaper::{supcon_loss, ContrastiveBatch, ProjectionModel};

/// What the projection is shaped for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Group articles sharing a frame label.
    Frame,
    /// Pull clicked candidates toward the user's history mean.
    Click,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Frame => "frame",
            Objective::Click => "click",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "frame" => Ok(Objective::Frame),
            "click" => Ok(Objective::Click),
            other => Err(Error::Config(format!("unknown objective `{other}`"))),
        }
    }
}

/// Training settings. Defaults mirror the shaper's desk-scale setup.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub objective: Objective,
    pub epochs: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub seed: u64,
    pub tau: f64,
    /// Frame objective: instances sampled per class.
    pub instances_per_class: usize,
    /// Frame objective: classes per batch.
    pub classes_per_batch: usize,
    /// Click objective: negatives per positive.
    pub neg_ratio: usize,
    /// Output dimension; defaults to the input dimension.
    pub dim_out: Option<usize>,
}

impl TrainConfig {
    pub fn new(objective: Objective) -> Self {
        Self {
            objective,
            epochs: 40,
            learning_rate: 0.5,
            patience: 3,
            seed: 1,
            tau: 0.9,
            instances_per_class: 20,
            classes_per_batch: 3,
            neg_ratio: 4,
            dim_out: None,
        }
    }
}

/// Per-epoch mean losses (per active anchor).
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochStats>,
    pub stopped_early: bool,
}

impl TrainingTrace {
    /// Line-delimited dump with tab-separated epoch, split, loss columns.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\tsplit\tloss\n");
        for e in &self.epochs {
            out.push_str(&format!("{}\ttrain\t{}\n", e.epoch, e.train_loss));
            out.push_str(&format!("{}\tval\t{}\n", e.epoch, e.val_loss));
        }
        out
    }
}

/// Tracks the best validation loss; stops after `patience` epochs without
/// strict improvement.
struct EarlyStopper {
    patience: usize,
    best: f64,
    bad_epochs: usize,
}

impl EarlyStopper {
    fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Returns (improved, should_stop).
    fn observe(&mut self, val_loss: f64) -> (bool, bool) {
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
            (true, false)
        } else {
            self.bad_epochs += 1;
            (false, self.bad_epochs >= self.patience)
        }
    }
}

/// One batch toward the click objective: the user's history-mean vector as
/// the sole anchor, clicked candidates as its positives, and up to
/// `neg_ratio` negatives per positive sampled without replacement from the
/// non-clicked candidates.
pub fn click_contrastive_batch(
    impression: &Impression,
    corpus: &Corpus,
    neg_ratio: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ContrastiveBatch> {
    if impression.history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let clicked: Vec<&str> = impression
        .candidates
        .iter()
        .zip(&impression.clicks)
        .filter(|(_, &c)| c)
        .map(|(id, _)| id.as_str())
        .collect();
    if clicked.is_empty() {
        return Err(Error::NoPositives);
    }
    let mut pool: Vec<&str> = impression
        .candidates
        .iter()
        .zip(&impression.clicks)
        .filter(|(_, &c)| !c)
        .map(|(id, _)| id.as_str())
        .collect();

    let space = corpus.content_embeddings();
    let fetch = |id: &str| -> Result<Vec<f64>> {
        Ok(space
            .row(corpus.row_index(id)?)
            .iter()
            .map(|&v| v as f64)
            .collect())
    };

    let mut history_mean = vec![0.0f64; space.dim()];
    for id in &impression.history {
        for (acc, v) in history_mean.iter_mut().zip(fetch(id)?) {
            *acc += v;
        }
    }
    for v in history_mean.iter_mut() {
        *v /= impression.history.len() as f64;
    }

    let mut vectors = vec![history_mean];
    let mut labels = vec![0u32];
    for id in &clicked {
        vectors.push(fetch(id)?);
        labels.push(0);
    }

    // Take all when the pool is smaller than requested.
    let n_neg = pool.len().min(neg_ratio * clicked.len());
    for k in 0..n_neg {
        let pick = rng.random_range(0..pool.len());
        let id = pool.swap_remove(pick);
        vectors.push(fetch(id)?);
        labels.push(k as u32 + 1);
    }

    ContrastiveBatch::new(vec![0], labels, vectors)
}

/// One batch toward the frame objective: up to `classes_per_batch` frames
/// chosen uniformly among those with at least two pooled articles, with up
/// to `instances_per_class` articles each; every row is an anchor.
pub fn frame_contrastive_batch(
    corpus: &Corpus,
    article_pool: &[usize],
    instances_per_class: usize,
    classes_per_batch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ContrastiveBatch> {
    let mut by_frame: Vec<(FrameLabel, Vec<usize>)> = Vec::new();
    for &row in article_pool {
        let frame = corpus.articles()[row].frame;
        match by_frame.iter_mut().find(|(f, _)| *f == frame) {
            Some((_, rows)) => rows.push(row),
            None => by_frame.push((frame, vec![row])),
        }
    }
    let mut eligible: Vec<usize> = (0..by_frame.len())
        .filter(|&i| by_frame[i].1.len() >= 2)
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoPositives);
    }

    // Uniform choice of classes for this batch.
    let n_classes = classes_per_batch.min(eligible.len());
    for i in 0..n_classes {
        let j = rng.random_range(i..eligible.len());
        eligible.swap(i, j);
    }

    let space = corpus.content_embeddings();
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for (class_id, &frame_idx) in eligible[..n_classes].iter().enumerate() {
        let rows = &by_frame[frame_idx].1;
        let take = instances_per_class.min(rows.len());
        let mut indices: Vec<usize> = (0..rows.len()).collect();
        for i in 0..take {
            let j = rng.random_range(i..indices.len());
            indices.swap(i, j);
        }
        for &idx in &indices[..take] {
            vectors.push(space.row(rows[idx]).iter().map(|&v| v as f64).collect());
            labels.push(class_id as u32);
        }
    }
    ContrastiveBatch::with_all_anchors(labels, vectors)
}

fn epoch_loss(batches: &[ContrastiveBatch], model: &ProjectionModel) -> Result<(f64, usize)> {
    let mut total = 0.0;
    let mut anchors = 0usize;
    for batch in batches {
        let (loss, _) = supcon_loss(batch, model)?;
        total += loss;
        anchors += batch.anchors().len();
    }
    Ok((total, anchors.max(1)))
}

/// Shapes a projection of the content space with the configured objective.
/// Deterministic for a fixed seed; returns the best-validation model and the
/// per-epoch trace.
pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<(ProjectionModel, TrainingTrace)> {
    let base = corpus.content_embeddings();
    let dim_in = base.dim();
    let dim_out = config.dim_out.unwrap_or(dim_in);
    let mut model = if dim_in == dim_out {
        ProjectionModel::identity(dim_in, config.tau)?
    } else {
        ProjectionModel::seeded(dim_in, dim_out, config.tau, config.seed)?
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // Validation batches are frozen up front so losses are comparable across
    // epochs.
    let mut val_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_5EED);

    let (train_pool, val_batches) = match config.objective {
        Objective::Frame => {
            let train_pool: Vec<usize> = (0..corpus.articles().len())
                .filter(|i| i % 5 != 4)
                .collect();
            let val_pool: Vec<usize> = (0..corpus.articles().len())
                .filter(|i| i % 5 == 4)
                .collect();
            let n_val_batches =
                (val_pool.len() / (config.classes_per_batch * config.instances_per_class)).max(1);
            let val_batches: Vec<ContrastiveBatch> = (0..n_val_batches)
                .map(|_| {
                    frame_contrastive_batch(
                        corpus,
                        &val_pool,
                        config.instances_per_class,
                        config.classes_per_batch,
                        &mut val_rng,
                    )
                })
                .collect::<Result<_>>()?;
            (FramePool::Articles(train_pool), val_batches)
        }
        Objective::Click => {
            let train: Vec<&Impression> = corpus
                .impressions_in(Split::Train)
                .filter(|i| i.n_clicks() > 0 && !i.history.is_empty())
                .collect();
            let val: Vec<&Impression> = corpus
                .impressions_in(Split::Validation)
                .filter(|i| i.n_clicks() > 0 && !i.history.is_empty())
                .collect();
            if train.is_empty() || val.is_empty() {
                return Err(Error::EmptyInput("click-objective impressions"));
            }
            let val_batches: Vec<ContrastiveBatch> = val
                .iter()
                .map(|imp| click_contrastive_batch(imp, corpus, config.neg_ratio, &mut val_rng))
                .collect::<Result<_>>()?;
            (
                FramePool::Impressions(train.into_iter().cloned().collect()),
                val_batches,
            )
        }
    };

    let mut stopper = EarlyStopper::new(config.patience.max(1));
    let mut best_model = model.clone();
    let mut trace = TrainingTrace {
        epochs: Vec::new(),
        stopped_early: false,
    };

    for epoch in 1..=config.epochs.max(1) {
        let batches = match &train_pool {
            FramePool::Articles(pool) => {
                let per_batch = config.classes_per_batch * config.instances_per_class;
                let n_batches = (pool.len() / per_batch).max(1);
                (0..n_batches)
                    .map(|_| {
                        frame_contrastive_batch(
                            corpus,
                            pool,
                            config.instances_per_class,
                            config.classes_per_batch,
                            &mut rng,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            FramePool::Impressions(impressions) => {
                let mut order: Vec<usize> = (0..impressions.len()).collect();
                for i in 0..order.len() {
                    let j = rng.random_range(i..order.len());
                    order.swap(i, j);
                }
                order
                    .into_iter()
                    .map(|i| {
                        click_contrastive_batch(&impressions[i], corpus, config.neg_ratio, &mut rng)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };

        let mut train_total = 0.0;
        let mut train_anchors = 0usize;
        for batch in &batches {
            let (loss, grad) = supcon_loss(batch, &model)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            train_total += loss;
            train_anchors += batch.anchors().len();
            // Step scaled by batch anchors so the rate is batch-size stable.
            let scale = config.learning_rate / batch.anchors().len().max(1) as f64;
            for (w, g) in model.weight_mut().iter_mut().zip(&grad) {
                *w -= scale * g;
            }
        }
        let train_loss = train_total / train_anchors.max(1) as f64;

        let (val_total, val_anchors) = epoch_loss(&val_batches, &model)?;
        let val_loss = val_total / val_anchors as f64;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }

        trace.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });

        let (improved, stop) = stopper.observe(val_loss);
        if improved {
            best_model = model.clone();
        }
        if stop {
            trace.stopped_early = true;
            break;
        }
    }

    Ok((best_model, trace))
}

enum FramePool {
    Articles(Vec<usize>),
    Impressions(Vec<Impression>),
}
