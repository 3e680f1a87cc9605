//! Per-candidate content and frame scores, z-score normalization, linear
//! aggregation under the diversification weight lambda, and slate ranking.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{Corpus, EmbeddingMatrix, Impression};
use crate::error::{Error, Result};

/// Raw and normalized scores for one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreBreakdown {
    pub content_raw: f64,
    pub frame_raw: f64,
    pub content_z: f64,
    pub frame_z: f64,
    /// `content_z + lambda * frame_z`.
    pub final_score: f64,
}

/// Candidates of one impression ordered by final score descending, ties
/// broken by ascending article id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSlate {
    pub impression_id: String,
    pub entries: Vec<(String, ScoreBreakdown)>,
    pub lambda: f64,
}

impl RankedSlate {
    /// Article ids in rank order.
    pub fn article_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    /// The first `k` ids (or fewer when the slate is short).
    pub fn top_k(&self, k: usize) -> impl Iterator<Item = &str> {
        self.entries.iter().take(k).map(|(id, _)| id.as_str())
    }
}

/// Mean dot product of the candidate row against every history row.
pub fn content_score(
    candidate_row: usize,
    history_rows: &[usize],
    space: &EmbeddingMatrix,
) -> Result<f64> {
    mean_dot(candidate_row, history_rows, space)
}

/// Identical contract to [`content_score`], evaluated in the frame space.
pub fn frame_score(
    candidate_row: usize,
    history_rows: &[usize],
    frame_space: &EmbeddingMatrix,
) -> Result<f64> {
    mean_dot(candidate_row, history_rows, frame_space)
}

fn mean_dot(candidate_row: usize, history_rows: &[usize], space: &EmbeddingMatrix) -> Result<f64> {
    if history_rows.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let candidate = space.row(candidate_row);
    let mut total = 0.0f64;
    for &row in history_rows {
        let history = space.row(row);
        let mut dot = 0.0f64;
        for (&c, &h) in candidate.iter().zip(history) {
            dot += c as f64 * h as f64;
        }
        total += dot;
    }
    Ok(total / history_rows.len() as f64)
}

/// Population z-scores. A zero standard deviation maps everything to zero.
pub fn zscore(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("zscore values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sigma = variance.sqrt();
    if sigma == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean) / sigma).collect())
}

/// Element-wise `content_z + lambda * frame_z`. Lambda outside [-1, 1] is
/// permitted with a warning.
pub fn aggregate(content_z: &[f64], frame_z: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if content_z.len() != frame_z.len() {
        return Err(Error::LengthMismatch {
            left: content_z.len(),
            right: frame_z.len(),
        });
    }
    if !(-1.0..=1.0).contains(&lambda) {
        eprintln!("warning: lambda {lambda} outside the conventional [-1, 1] range");
    }
    Ok(content_z
        .iter()
        .zip(frame_z)
        .map(|(c, f)| c + lambda * f)
        .collect())
}

/// Scores every candidate of the impression, z-scores within the impression,
/// aggregates under `lambda`, and sorts. Pure function of its inputs.
pub fn rank_slate(impression: &Impression, corpus: &Corpus, lambda: f64) -> Result<RankedSlate> {
    rank_slate_inner(impression, corpus, lambda, true)
}

/// Ranking with the frame score disabled entirely: the final score is the
/// content z-score and the frame columns are zero.
pub fn rank_slate_content_only(impression: &Impression, corpus: &Corpus) -> Result<RankedSlate> {
    rank_slate_inner(impression, corpus, 0.0, false)
}

fn rank_slate_inner(
    impression: &Impression,
    corpus: &Corpus,
    lambda: f64,
    use_frame: bool,
) -> Result<RankedSlate> {
    let history_rows: Vec<usize> = impression
        .history
        .iter()
        .map(|id| corpus.row_index(id))
        .collect::<Result<_>>()?;
    let candidate_rows: Vec<usize> = impression
        .candidates
        .iter()
        .map(|id| corpus.row_index(id))
        .collect::<Result<_>>()?;

    let content_raw: Vec<f64> = candidate_rows
        .iter()
        .map(|&row| content_score(row, &history_rows, corpus.content_embeddings()))
        .collect::<Result<_>>()?;
    let frame_raw: Vec<f64> = if use_frame {
        candidate_rows
            .iter()
            .map(|&row| frame_score(row, &history_rows, corpus.frame_embeddings()))
            .collect::<Result<_>>()?
    } else {
        vec![0.0; candidate_rows.len()]
    };

    let content_z = zscore(&content_raw)?;
    let frame_z = if use_frame {
        zscore(&frame_raw)?
    } else {
        vec![0.0; frame_raw.len()]
    };
    let final_scores = aggregate(&content_z, &frame_z, lambda)?;

    let mut entries: Vec<(String, ScoreBreakdown)> = impression
        .candidates
        .iter()
        .enumerate()
        .map(|(i, id)| {
            (
                id.clone(),
                ScoreBreakdown {
                    content_raw: content_raw[i],
                    frame_raw: frame_raw[i],
                    content_z: content_z[i],
                    frame_z: frame_z[i],
                    final_score: final_scores[i],
                },
            )
        })
        .collect();
    entries.sort_by(|(id_a, a), (id_b, b)| {
        b.final_score
            .total_cmp(&a.final_score)
            .then_with(|| id_a.cmp(id_b))
    });

    Ok(RankedSlate {
        impression_id: impression.impression_id.clone(),
        entries,
        lambda,
    })
}

/// Writes the audit dump: one tab-separated line per candidate with the
/// columns impression_id, rank, article_id, content_z, frame_z, final.
pub fn write_slates(path: impl AsRef<Path>, slates: &[RankedSlate]) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    writeln!(
        out,
        "impression_id\trank\tarticle_id\tcontent_z\tframe_z\tfinal"
    )
    .map_err(|e| Error::io(path, e))?;
    for slate in slates {
        for (rank, (id, score)) in slate.entries.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                slate.impression_id,
                rank + 1,
                id,
                score.content_z,
                score.frame_z,
                score.final_score
            )
            .map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

/// Reads a slate dump written by [`write_slates`]. Raw scores are not part of
/// the dump and come back as zero.
pub fn read_slates(path: impl AsRef<Path>) -> Result<Vec<RankedSlate>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut slates: Vec<RankedSlate> = Vec::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line_no == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(Error::parse(
                path,
                line_no + 1,
                format!("expected 6 fields, got {}", fields.len()),
            ));
        }
        let rank: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(path, line_no + 1, "bad rank"))?;
        let parse_f64 = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(path, line_no + 1, format!("bad float `{s}`")))
        };
        let breakdown = ScoreBreakdown {
            content_raw: 0.0,
            frame_raw: 0.0,
            content_z: parse_f64(fields[3])?,
            frame_z: parse_f64(fields[4])?,
            final_score: parse_f64(fields[5])?,
        };
        let new_slate = slates
            .last()
            .map(|s| s.impression_id != fields[0])
            .unwrap_or(true);
        if new_slate {
            slates.push(RankedSlate {
                impression_id: fields[0].to_string(),
                entries: Vec::new(),
                lambda: f64::NAN,
            });
        }
        let slate = slates.last_mut().unwrap();
        if slate.entries.len() + 1 != rank {
            return Err(Error::parse(
                path,
                line_no + 1,
                format!("rank {rank} out of order"),
            ));
        }
        slate.entries.push((fields[2].to_string(), breakdown));
    }
    Ok(slates)
}
