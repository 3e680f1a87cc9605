//! Data model: articles, impressions, embedding matrices, and the corpus
//! that ties them together.

pub(crate) mod io;
mod synth;

pub use io::{
    load_corpus, read_embeddings, write_corpus, write_embeddings, CorpusPaths, LoadConfig,
};
pub use synth::{synthesize_corpus, FrameSpec, SynthSpec};

use std::collections::HashMap;

use crate::dist::CategoricalDistribution;
use crate::error::{Error, Result};
use crate::frame::FrameLabel;

/// Which representation space an embedding matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceTag {
    Content,
    Frame,
}

impl SpaceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceTag::Content => "content",
            SpaceTag::Frame => "frame",
        }
    }
}

/// One news item.
#[derive(Debug, Clone, PartialEq)]
pub struct Article {
    pub article_id: String,
    pub category: String,
    pub frame: FrameLabel,
    /// Signed polarity in [-1, 1]. Activation uses the absolute value.
    pub sentiment: f64,
    /// Row into both embedding matrices.
    pub row_index: usize,
}

/// Dense row-per-article matrix for one representation space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f32>,
    space_tag: SpaceTag,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f32>, space_tag: SpaceTag) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for a {rows}x{dim} matrix, got {}",
                rows * dim,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite embedding value {bad}")));
        }
        Ok(Self {
            rows,
            dim,
            values,
            space_tag,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn space_tag(&self) -> SpaceTag {
        self.space_tag
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Which split an impression belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// One evaluation event: a user, their click history, and a candidate slate
/// with click labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Impression {
    pub impression_id: String,
    pub user_id: String,
    /// Article ids, most recent last. Truncated to the configured maximum.
    pub history: Vec<String>,
    pub candidates: Vec<String>,
    /// Aligned with `candidates`.
    pub clicks: Vec<bool>,
    pub split: Split,
}

impl Impression {
    pub fn n_clicks(&self) -> usize {
        self.clicks.iter().filter(|&&c| c).count()
    }
}

/// Immutable, fully cross-validated collection of articles, embeddings and
/// impressions. Safe for concurrent read.
#[derive(Debug, Clone)]
pub struct Corpus {
    articles: Vec<Article>,
    by_id: HashMap<String, usize>,
    content_embeddings: EmbeddingMatrix,
    frame_embeddings: EmbeddingMatrix,
    impressions: Vec<Impression>,
}

impl Corpus {
    /// Validates cross-references and row counts. Articles must be ordered by
    /// `row_index` equal to their position.
    pub fn new(
        articles: Vec<Article>,
        content_embeddings: EmbeddingMatrix,
        frame_embeddings: EmbeddingMatrix,
        impressions: Vec<Impression>,
    ) -> Result<Self> {
        if articles.is_empty() {
            return Err(Error::EmptyInput("article list"));
        }
        let mut by_id = HashMap::with_capacity(articles.len());
        for (i, article) in articles.iter().enumerate() {
            if article.row_index != i {
                return Err(Error::Invalid(format!(
                    "article `{}` has row_index {} at position {i}",
                    article.article_id, article.row_index
                )));
            }
            if !(-1.0..=1.0).contains(&article.sentiment) {
                return Err(Error::Invalid(format!(
                    "article `{}` sentiment {} outside [-1, 1]",
                    article.article_id, article.sentiment
                )));
            }
            if by_id.insert(article.article_id.clone(), i).is_some() {
                return Err(Error::Invalid(format!(
                    "duplicate article id `{}`",
                    article.article_id
                )));
            }
        }
        for matrix in [&content_embeddings, &frame_embeddings] {
            if matrix.rows() != articles.len() {
                return Err(Error::RowCountMismatch {
                    rows: matrix.rows(),
                    articles: articles.len(),
                });
            }
        }
        for impression in &impressions {
            if impression.candidates.is_empty() {
                return Err(Error::Invalid(format!(
                    "impression `{}` has no candidates",
                    impression.impression_id
                )));
            }
            if impression.candidates.len() != impression.clicks.len() {
                return Err(Error::LengthMismatch {
                    left: impression.candidates.len(),
                    right: impression.clicks.len(),
                });
            }
            for id in impression.history.iter().chain(&impression.candidates) {
                if !by_id.contains_key(id) {
                    return Err(Error::UnknownArticle(id.clone()));
                }
            }
        }
        Ok(Self {
            articles,
            by_id,
            content_embeddings,
            frame_embeddings,
            impressions,
        })
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn article(&self, id: &str) -> Result<&Article> {
        self.by_id
            .get(id)
            .map(|&i| &self.articles[i])
            .ok_or_else(|| Error::UnknownArticle(id.to_string()))
    }

    pub fn row_index(&self, id: &str) -> Result<usize> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownArticle(id.to_string()))
    }

    pub fn content_embeddings(&self) -> &EmbeddingMatrix {
        &self.content_embeddings
    }

    pub fn frame_embeddings(&self) -> &EmbeddingMatrix {
        &self.frame_embeddings
    }

    /// Replaces one embedding space, keeping everything else. Used after
    /// shaper training.
    pub fn with_embeddings(mut self, matrix: EmbeddingMatrix) -> Result<Self> {
        if matrix.rows() != self.articles.len() {
            return Err(Error::RowCountMismatch {
                rows: matrix.rows(),
                articles: self.articles.len(),
            });
        }
        match matrix.space_tag() {
            SpaceTag::Content => self.content_embeddings = matrix,
            SpaceTag::Frame => self.frame_embeddings = matrix,
        }
        Ok(self)
    }

    pub fn impressions(&self) -> &[Impression] {
        &self.impressions
    }

    pub fn impressions_in(&self, split: Split) -> impl Iterator<Item = &Impression> {
        self.impressions.iter().filter(move |i| i.split == split)
    }

    /// Frame frequencies over all articles.
    pub fn frame_distribution(&self) -> CategoricalDistribution {
        CategoricalDistribution::from_labels(self.articles.iter().map(|a| a.frame.as_str()))
            .expect("corpus is non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_matrix(rows: usize, dim: usize, tag: SpaceTag) -> EmbeddingMatrix {
        let values = (0..rows * dim).map(|i| i as f32 * 0.1).collect();
        EmbeddingMatrix::new(rows, dim, values, tag).unwrap()
    }

    fn article(id: &str, frame: FrameLabel, row: usize) -> Article {
        Article {
            article_id: id.to_string(),
            category: "cat".to_string(),
            frame,
            sentiment: 0.0,
            row_index: row,
        }
    }

    #[test]
    fn frame_distribution_matches_frequencies() {
        let articles = vec![
            article("a", FrameLabel::Economic, 0),
            article("b", FrameLabel::Economic, 1),
            article("c", FrameLabel::Morality, 2),
            article("d", FrameLabel::Political, 3),
        ];
        let corpus = Corpus::new(
            articles,
            tiny_matrix(4, 2, SpaceTag::Content),
            tiny_matrix(4, 2, SpaceTag::Frame),
            vec![],
        )
        .unwrap();
        let dist = corpus.frame_distribution();
        assert_eq!(dist.mass("Economic"), 0.5);
        assert_eq!(dist.mass("Morality"), 0.25);
        assert_eq!(dist.mass("Political"), 0.25);
        assert_eq!(dist.mass("Other"), 0.0);
        assert!((dist.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_article_distribution_is_point_mass() {
        let corpus = Corpus::new(
            vec![article("a", FrameLabel::QualityOfLife, 0)],
            tiny_matrix(1, 2, SpaceTag::Content),
            tiny_matrix(1, 2, SpaceTag::Frame),
            vec![],
        )
        .unwrap();
        assert_eq!(corpus.frame_distribution().mass("Quality of Life"), 1.0);
    }

    #[test]
    fn rejects_unknown_article_reference() {
        let impressions = vec![Impression {
            impression_id: "i0".into(),
            user_id: "u0".into(),
            history: vec!["a".into()],
            candidates: vec!["missing".into()],
            clicks: vec![true],
            split: Split::Test,
        }];
        let err = Corpus::new(
            vec![article("a", FrameLabel::Economic, 0)],
            tiny_matrix(1, 2, SpaceTag::Content),
            tiny_matrix(1, 2, SpaceTag::Frame),
            impressions,
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownArticle(id) if id == "missing"));
    }

    #[test]
    fn rejects_row_count_mismatch() {
        let err = Corpus::new(
            vec![article("a", FrameLabel::Economic, 0)],
            tiny_matrix(2, 2, SpaceTag::Content),
            tiny_matrix(1, 2, SpaceTag::Frame),
            vec![],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::RowCountMismatch {
                rows: 2,
                articles: 1
            }
        ));
    }

    #[test]
    fn rejects_non_finite_embedding_values() {
        let err = EmbeddingMatrix::new(1, 2, vec![0.0, f32::NAN], SpaceTag::Content).unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }
}
