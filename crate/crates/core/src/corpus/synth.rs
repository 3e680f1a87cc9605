//! Deterministic desk-scale corpus synthesis.
//!
//! Articles carry two latent labels: a topic (driving the content-space
//! cluster and the category) and a frame (driving the frame-space cluster),
//! tied by a tunable topic-to-frame correlation. User histories follow a
//! per-user topic affinity and clicks follow a softmax over content
//! similarity to the history mean. Keeping the two spaces only partially
//! aligned mirrors the weak category-frame association observed in real
//! news corpora.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::io::assign_splits;
use crate::corpus::{Article, Corpus, EmbeddingMatrix, Impression, SpaceTag, Split};
use crate::error::{Error, Result};
use crate::frame::FrameLabel;

/// Per-frame generation parameters.
#[derive(Debug, Clone)]
pub struct FrameSpec {
    pub frame: FrameLabel,
    /// Relative popularity used when an article's frame departs from its
    /// topic's home frame.
    pub weight: f64,
    /// Mean signed sentiment of the frame's articles.
    pub mean_sentiment: f64,
    /// Frame-space cluster center. Unit-normalized before use; random when
    /// absent.
    pub frame_center: Option<Vec<f64>>,
}

/// Full description of a synthetic corpus. Deterministic for a fixed
/// `(spec, seed)` pair.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_articles: usize,
    pub n_users: usize,
    pub n_impressions: usize,
    pub dim: usize,
    pub frames: Vec<FrameSpec>,
    /// Content-space clusters; each topic also names a category. Topic t's
    /// home frame is `frames[t % frames.len()]`.
    pub n_topics: usize,
    /// Probability that an article's frame departs from its topic's home
    /// frame (drawn from the frame weights instead).
    pub topic_frame_mix: f64,
    /// Isotropic noise around content (topic) cluster centers.
    pub content_noise: f64,
    /// Isotropic noise around frame cluster centers.
    pub frame_noise: f64,
    pub sentiment_noise: f64,
    /// Mass a user's affinity puts on their preferred topic; the remainder
    /// is spread over the other topics proportionally to popularity.
    pub affinity_concentration: f64,
    pub history_len: (usize, usize),
    pub n_candidates: usize,
    pub max_clicks: usize,
    /// Softmax temperature of the click model over content dot products.
    pub click_temperature: f64,
    pub split_train: f64,
    pub split_val: f64,
}

impl SynthSpec {
    /// A small corpus over the first `n_frames` labels with Zipf-like
    /// popularity and distinct per-frame sentiment means.
    pub fn desk_scale(n_frames: usize) -> Self {
        let n_frames = n_frames.clamp(1, FrameLabel::COUNT);
        let frames = (0..n_frames)
            .map(|i| FrameSpec {
                frame: FrameLabel::ALL[i],
                weight: 1.0 / ((i + 1) as f64).sqrt(),
                mean_sentiment: -0.6 + 1.0 * (i as f64) / (n_frames.max(2) - 1) as f64,
                frame_center: None,
            })
            .collect();
        Self {
            n_articles: 400,
            n_users: 60,
            n_impressions: 200,
            dim: 16,
            frames,
            n_topics: n_frames,
            topic_frame_mix: 0.3,
            content_noise: 0.45,
            frame_noise: 0.15,
            sentiment_noise: 0.2,
            affinity_concentration: 0.75,
            history_len: (8, 16),
            n_candidates: 20,
            max_clicks: 2,
            click_temperature: 0.2,
            split_train: 0.6,
            split_val: 0.2,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_articles == 0 {
            return Err(Error::DegenerateSpec("zero articles".into()));
        }
        if self.dim == 0 {
            return Err(Error::DegenerateSpec("zero embedding dimension".into()));
        }
        if self.frames.is_empty() {
            return Err(Error::DegenerateSpec("no frames".into()));
        }
        if self.n_topics == 0 {
            return Err(Error::DegenerateSpec("zero topics".into()));
        }
        if !(0.0..=1.0).contains(&self.topic_frame_mix) {
            return Err(Error::DegenerateSpec(format!(
                "topic_frame_mix {} outside [0, 1]",
                self.topic_frame_mix
            )));
        }
        if self.n_impressions > 0 && (self.n_users == 0 || self.n_candidates == 0) {
            return Err(Error::DegenerateSpec(
                "impressions require users and candidates".into(),
            ));
        }
        if self.history_len.0 == 0 || self.history_len.0 > self.history_len.1 {
            return Err(Error::DegenerateSpec(format!(
                "bad history length range {:?}",
                self.history_len
            )));
        }
        if self.max_clicks == 0 {
            return Err(Error::DegenerateSpec(
                "max_clicks must be at least 1".into(),
            ));
        }
        if self.click_temperature <= 0.0 {
            return Err(Error::DegenerateSpec(
                "non-positive click temperature".into(),
            ));
        }
        Ok(())
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

fn random_unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    normalize(&mut v);
    v
}

fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Generates a corpus from the spec. Identical `(spec, seed)` pairs yield
/// byte-identical corpora.
pub fn synthesize_corpus(spec: &SynthSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_frames = spec.frames.len();
    let n_topics = spec.n_topics;
    let noise = Normal::new(0.0, 1.0).unwrap();

    let topic_centers: Vec<Vec<f64>> = (0..n_topics)
        .map(|_| random_unit_vector(spec.dim, &mut rng))
        .collect();
    // Random frame centers are paired antipodally, most popular against
    // least popular, so every frame has a genuinely opposing frame and
    // anti-similarity ranking concentrates instead of spreading uniformly.
    let mut frame_centers: Vec<Option<Vec<f64>>> = spec
        .frames
        .iter()
        .map(|f| match &f.frame_center {
            Some(center) => {
                let mut c = center.clone();
                if c.len() != spec.dim {
                    return Err(Error::DegenerateSpec(format!(
                        "frame center for {} has dim {} (expected {})",
                        f.frame,
                        c.len(),
                        spec.dim
                    )));
                }
                normalize(&mut c);
                Ok(Some(c))
            }
            None => Ok(None),
        })
        .collect::<Result<_>>()?;
    for i in 0..n_frames {
        if frame_centers[i].is_some() {
            continue;
        }
        let opposite = n_frames - 1 - i;
        if opposite > i {
            if let Some(center) = frame_centers[opposite].clone() {
                frame_centers[i] = Some(center.iter().map(|v| -v).collect());
                continue;
            }
        }
        frame_centers[i] = Some(random_unit_vector(spec.dim, &mut rng));
        if opposite > i && frame_centers[opposite].is_none() {
            frame_centers[opposite] = frame_centers[i]
                .as_ref()
                .map(|c| c.iter().map(|v| -v).collect());
        }
    }
    let frame_centers: Vec<Vec<f64>> = frame_centers.into_iter().map(Option::unwrap).collect();

    let frame_weights: Vec<f64> = spec.frames.iter().map(|f| f.weight).collect();
    let topic_weights: Vec<f64> = (0..n_topics).map(|t| 1.0 / (t + 1) as f64).collect();

    // Articles.
    let mut articles = Vec::with_capacity(spec.n_articles);
    let mut content_values = Vec::with_capacity(spec.n_articles * spec.dim);
    let mut frame_values = Vec::with_capacity(spec.n_articles * spec.dim);
    let mut articles_by_topic: Vec<Vec<usize>> = vec![Vec::new(); n_topics];

    for row in 0..spec.n_articles {
        let topic = sample_index(&topic_weights, &mut rng);
        articles_by_topic[topic].push(row);
        let frame_idx = if rng.random::<f64>() < spec.topic_frame_mix {
            sample_index(&frame_weights, &mut rng)
        } else {
            topic % n_frames
        };
        let frame_spec = &spec.frames[frame_idx];

        let sentiment = (frame_spec.mean_sentiment + spec.sentiment_noise * noise.sample(&mut rng))
            .clamp(-1.0, 1.0);

        let mut content: Vec<f64> = topic_centers[topic]
            .iter()
            .map(|c| c + spec.content_noise * noise.sample(&mut rng))
            .collect();
        normalize(&mut content);
        let mut frame_vec: Vec<f64> = frame_centers[frame_idx]
            .iter()
            .map(|c| c + spec.frame_noise * noise.sample(&mut rng))
            .collect();
        normalize(&mut frame_vec);

        content_values.extend(content.iter().map(|&x| x as f32));
        frame_values.extend(frame_vec.iter().map(|&x| x as f32));
        articles.push(Article {
            article_id: format!("a{row:05}"),
            category: format!("cat{topic:02}"),
            frame: frame_spec.frame,
            sentiment,
            row_index: row,
        });
    }

    // Users: preferred topic plus an affinity distribution over all topics.
    let user_affinities: Vec<Vec<f64>> = (0..spec.n_users)
        .map(|_| {
            let preferred = sample_index(&topic_weights, &mut rng);
            let rest_total: f64 = topic_weights
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != preferred)
                .map(|(_, w)| w)
                .sum();
            (0..n_topics)
                .map(|i| {
                    if i == preferred {
                        if n_topics == 1 {
                            1.0
                        } else {
                            spec.affinity_concentration
                        }
                    } else {
                        (1.0 - spec.affinity_concentration) * topic_weights[i] / rest_total
                    }
                })
                .collect()
        })
        .collect();

    // Impressions: affinity-sampled history, uniform candidates, softmax
    // clicks over content similarity.
    let mut impressions = Vec::with_capacity(spec.n_impressions);
    for imp_no in 0..spec.n_impressions {
        let user = imp_no % spec.n_users;
        let affinity = &user_affinities[user];

        let len = rng.random_range(spec.history_len.0..=spec.history_len.1);
        let mut history = Vec::with_capacity(len);
        for _ in 0..len {
            // Resample until a topic with articles comes up; at least one
            // topic has articles.
            let row = loop {
                let t = sample_index(affinity, &mut rng);
                if !articles_by_topic[t].is_empty() {
                    let pick = rng.random_range(0..articles_by_topic[t].len());
                    break articles_by_topic[t][pick];
                }
            };
            history.push(articles[row].article_id.clone());
        }

        let n_candidates = spec.n_candidates.min(spec.n_articles);
        let mut candidate_rows = Vec::with_capacity(n_candidates);
        while candidate_rows.len() < n_candidates {
            let row = rng.random_range(0..spec.n_articles);
            if !candidate_rows.contains(&row) {
                candidate_rows.push(row);
            }
        }

        let mut history_mean = vec![0.0f64; spec.dim];
        for id in &history {
            let row = id[1..].parse::<usize>().unwrap();
            for (acc, &v) in history_mean
                .iter_mut()
                .zip(&content_values[row * spec.dim..(row + 1) * spec.dim])
            {
                *acc += v as f64;
            }
        }
        for v in history_mean.iter_mut() {
            *v /= history.len() as f64;
        }
        let logits: Vec<f64> = candidate_rows
            .iter()
            .map(|&row| {
                let dot: f64 = content_values[row * spec.dim..(row + 1) * spec.dim]
                    .iter()
                    .zip(&history_mean)
                    .map(|(&c, h)| c as f64 * h)
                    .sum();
                dot / spec.click_temperature
            })
            .collect();
        let max_logit = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut click_weights: Vec<f64> = logits.iter().map(|l| (l - max_logit).exp()).collect();

        let n_clicks = rng.random_range(1..=spec.max_clicks).min(n_candidates);
        let mut clicks = vec![false; n_candidates];
        for _ in 0..n_clicks {
            let pick = sample_index(&click_weights, &mut rng);
            clicks[pick] = true;
            click_weights[pick] = 0.0;
        }

        impressions.push(Impression {
            impression_id: format!("i{imp_no:06}"),
            user_id: format!("u{user:04}"),
            history,
            candidates: candidate_rows
                .iter()
                .map(|&row| articles[row].article_id.clone())
                .collect(),
            clicks,
            split: Split::Test,
        });
    }
    assign_splits(&mut impressions, spec.split_train, spec.split_val)?;

    let content =
        EmbeddingMatrix::new(spec.n_articles, spec.dim, content_values, SpaceTag::Content)?;
    let frame = EmbeddingMatrix::new(spec.n_articles, spec.dim, frame_values, SpaceTag::Frame)?;
    Corpus::new(articles, content, frame, impressions)
}
