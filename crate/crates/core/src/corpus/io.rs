//! File formats: tab-separated article/behavior tables and the binary
//! embedding format with its id sidecar.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::corpus::{Article, Corpus, EmbeddingMatrix, Impression, SpaceTag, Split};
use crate::error::{Error, Result};
use crate::frame::FrameLabel;

const EMBEDDING_MAGIC: &[u8; 4] = b"FRNK";
const EMBEDDING_VERSION: u32 = 1;

const ARTICLES_HEADER: &str = "article_id\tcategory\tframe\tsentiment";
const BEHAVIORS_HEADER: &str = "impression_id\tuser_id\thistory\tcandidates\tclicks";

/// Locations of the four corpus files. Each embedding file has an id sidecar
/// at `<path>.ids`.
#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub articles: PathBuf,
    pub behaviors: PathBuf,
    pub content_embeddings: PathBuf,
    pub frame_embeddings: PathBuf,
}

impl CorpusPaths {
    /// Conventional file names under one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            articles: dir.join("articles.tsv"),
            behaviors: dir.join("behaviors.tsv"),
            content_embeddings: dir.join("content.emb"),
            frame_embeddings: dir.join("frame.emb"),
        }
    }
}

/// Loader settings.
#[derive(Debug, Clone)]
pub struct LoadConfig {
    /// Histories longer than this keep only the most recent entries.
    pub history_max: usize,
    /// Leading fraction of impressions assigned to the train split.
    pub split_train: f64,
    /// Next fraction assigned to validation; the rest is test.
    pub split_val: f64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self {
            history_max: 50,
            split_train: 0.6,
            split_val: 0.2,
        }
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".ids");
    PathBuf::from(os)
}

/// Parses and cross-validates a corpus from disk.
pub fn load_corpus(paths: &CorpusPaths, config: &LoadConfig) -> Result<Corpus> {
    let (content, content_ids) = read_embeddings(&paths.content_embeddings, SpaceTag::Content)?;
    let (frame, frame_ids) = read_embeddings(&paths.frame_embeddings, SpaceTag::Frame)?;
    if content_ids.len() != frame_ids.len() {
        return Err(Error::RowCountMismatch {
            rows: frame_ids.len(),
            articles: content_ids.len(),
        });
    }
    for (row, (c, f)) in content_ids.iter().zip(&frame_ids).enumerate() {
        if c != f {
            return Err(Error::SidecarMismatch {
                row,
                content: c.clone(),
                frame: f.clone(),
            });
        }
    }

    let articles = read_articles(&paths.articles, &content_ids)?;
    let impressions = read_behaviors(&paths.behaviors, config)?;
    Corpus::new(articles, content, frame, impressions)
}

/// Writes all four corpus files (plus sidecars) into `dir` and returns the
/// paths. Behaviors are written in impression order so split assignment
/// survives a round trip.
pub fn write_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<CorpusPaths> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = CorpusPaths::in_dir(dir);

    let ids: Vec<&str> = corpus
        .articles()
        .iter()
        .map(|a| a.article_id.as_str())
        .collect();
    write_articles(&paths.articles, corpus.articles())?;
    write_behaviors(&paths.behaviors, corpus.impressions())?;
    write_embeddings(&paths.content_embeddings, corpus.content_embeddings(), &ids)?;
    write_embeddings(&paths.frame_embeddings, corpus.frame_embeddings(), &ids)?;
    Ok(paths)
}

fn read_articles(path: &Path, row_order: &[String]) -> Result<Vec<Article>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut parsed: std::collections::HashMap<String, (String, FrameLabel, f64)> =
        std::collections::HashMap::new();

    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let display_no = line_no + 1;
        if line_no == 0 {
            if line != ARTICLES_HEADER {
                return Err(Error::parse(
                    path,
                    display_no,
                    format!("expected header `{ARTICLES_HEADER}`"),
                ));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                display_no,
                format!("expected 4 tab-separated fields, got {}", fields.len()),
            ));
        }
        let frame: FrameLabel = fields[2].parse().map_err(|_| {
            Error::parse(
                path,
                display_no,
                format!("unknown frame label `{}`", fields[2]),
            )
        })?;
        let sentiment: f64 = fields[3].parse().map_err(|_| {
            Error::parse(path, display_no, format!("bad sentiment `{}`", fields[3]))
        })?;
        if !(-1.0..=1.0).contains(&sentiment) {
            return Err(Error::parse(
                path,
                display_no,
                format!("sentiment {sentiment} outside [-1, 1]"),
            ));
        }
        if parsed
            .insert(
                fields[0].to_string(),
                (fields[1].to_string(), frame, sentiment),
            )
            .is_some()
        {
            return Err(Error::parse(
                path,
                display_no,
                format!("duplicate article id `{}`", fields[0]),
            ));
        }
    }

    if parsed.len() != row_order.len() {
        return Err(Error::RowCountMismatch {
            rows: row_order.len(),
            articles: parsed.len(),
        });
    }
    let mut articles = Vec::with_capacity(row_order.len());
    for (row, id) in row_order.iter().enumerate() {
        let (category, frame, sentiment) = parsed
            .remove(id)
            .ok_or_else(|| Error::UnknownArticle(id.clone()))?;
        articles.push(Article {
            article_id: id.clone(),
            category,
            frame,
            sentiment,
            row_index: row,
        });
    }
    Ok(articles)
}

fn write_articles(path: &Path, articles: &[Article]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    writeln!(out, "{ARTICLES_HEADER}").map_err(|e| Error::io(path, e))?;
    for a in articles {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            a.article_id,
            a.category,
            a.frame.as_str(),
            a.sentiment
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn read_behaviors(path: &Path, config: &LoadConfig) -> Result<Vec<Impression>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();

    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let display_no = line_no + 1;
        if line_no == 0 {
            if line != BEHAVIORS_HEADER {
                return Err(Error::parse(
                    path,
                    display_no,
                    format!("expected header `{BEHAVIORS_HEADER}`"),
                ));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                path,
                display_no,
                format!("expected 5 tab-separated fields, got {}", fields.len()),
            ));
        }
        let mut history: Vec<String> = split_ids(fields[2]);
        if history.len() > config.history_max {
            // Keep the most recent entries (the list is ordered oldest first).
            history.drain(..history.len() - config.history_max);
        }
        let candidates = split_ids(fields[3]);
        if candidates.is_empty() {
            return Err(Error::parse(path, display_no, "empty candidate list"));
        }
        let clicks: Vec<bool> = fields[4]
            .split_whitespace()
            .map(|c| match c {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::parse(
                    path,
                    display_no,
                    format!("bad click flag `{other}`"),
                )),
            })
            .collect::<Result<_>>()?;
        if clicks.len() != candidates.len() {
            return Err(Error::parse(
                path,
                display_no,
                format!(
                    "{} candidates but {} click flags",
                    candidates.len(),
                    clicks.len()
                ),
            ));
        }
        rows.push(Impression {
            impression_id: fields[0].to_string(),
            user_id: fields[1].to_string(),
            history,
            candidates,
            clicks,
            split: Split::Test,
        });
    }

    assign_splits(&mut rows, config.split_train, config.split_val)?;
    Ok(rows)
}

fn split_ids(field: &str) -> Vec<String> {
    field.split_whitespace().map(str::to_string).collect()
}

/// Assigns the leading `train` fraction to Train, the next `val` fraction to
/// Validation and the remainder to Test, by position.
pub(crate) fn assign_splits(impressions: &mut [Impression], train: f64, val: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&train) || !(0.0..=1.0).contains(&val) || train + val > 1.0 {
        return Err(Error::Config(format!(
            "invalid split fractions train={train} val={val}"
        )));
    }
    let n = impressions.len();
    let n_train = (n as f64 * train).floor() as usize;
    let n_val = (n as f64 * val).floor() as usize;
    for (i, imp) in impressions.iter_mut().enumerate() {
        imp.split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
    }
    Ok(())
}

fn write_behaviors(path: &Path, impressions: &[Impression]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    writeln!(out, "{BEHAVIORS_HEADER}").map_err(|e| Error::io(path, e))?;
    for imp in impressions {
        let clicks: Vec<&str> = imp
            .clicks
            .iter()
            .map(|&c| if c { "1" } else { "0" })
            .collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            imp.impression_id,
            imp.user_id,
            imp.history.join(" "),
            imp.candidates.join(" "),
            clicks.join(" ")
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Reads one embedding matrix plus its id sidecar.
pub fn read_embeddings(path: &Path, tag: SpaceTag) -> Result<(EmbeddingMatrix, Vec<String>)> {
    let matrix = read_matrix(path, tag)?;
    let ids_path = sidecar_path(path);
    let ids_file = File::open(&ids_path).map_err(|e| Error::io(&ids_path, e))?;
    let ids: Vec<String> = BufReader::new(ids_file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(&ids_path, e))?
        .into_iter()
        .filter(|l| !l.is_empty())
        .collect();
    if ids.len() != matrix.rows() {
        return Err(Error::RowCountMismatch {
            rows: matrix.rows(),
            articles: ids.len(),
        });
    }
    Ok((matrix, ids))
}

/// Reads a bare matrix file in the FRNK format.
pub(crate) fn read_matrix(path: &Path, tag: SpaceTag) -> Result<EmbeddingMatrix> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header)
        .map_err(|e| Error::io(path, e))?;
    if &header[0..4] != EMBEDDING_MAGIC {
        return Err(Error::parse(path, 0, "bad magic bytes, expected FRNK"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != EMBEDDING_VERSION {
        return Err(Error::parse(
            path,
            0,
            format!("unsupported version {version}"),
        ));
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut reserved = [0u8; 4];
    file.read_exact(&mut reserved)
        .map_err(|e| Error::io(path, e))?;
    if reserved != [0, 0, 0, 0] {
        return Err(Error::parse(path, 0, "reserved header bytes must be zero"));
    }

    let mut body = vec![0u8; rows * dim * 4];
    file.read_exact(&mut body).map_err(|e| Error::io(path, e))?;
    let mut trailing = [0u8; 1];
    if file.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::parse(path, 0, "trailing bytes after matrix body"));
    }
    let values: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(rows, dim, values, tag)
}

/// Writes one embedding matrix plus its id sidecar.
pub fn write_embeddings(path: &Path, matrix: &EmbeddingMatrix, ids: &[&str]) -> Result<()> {
    if ids.len() != matrix.rows() {
        return Err(Error::RowCountMismatch {
            rows: matrix.rows(),
            articles: ids.len(),
        });
    }
    write_matrix(path, matrix)?;

    let ids_path = sidecar_path(path);
    let mut out = BufWriter::new(File::create(&ids_path).map_err(|e| Error::io(&ids_path, e))?);
    for id in ids {
        writeln!(out, "{id}").map_err(|e| Error::io(&ids_path, e))?;
    }
    Ok(())
}

/// Writes a bare matrix file in the FRNK format.
pub(crate) fn write_matrix(path: &Path, matrix: &EmbeddingMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    out.write_all(EMBEDDING_MAGIC)
        .map_err(|e| Error::io(path, e))?;
    out.write_all(&EMBEDDING_VERSION.to_le_bytes())
        .map_err(|e| Error::io(path, e))?;
    out.write_all(&(matrix.rows() as u32).to_le_bytes())
        .map_err(|e| Error::io(path, e))?;
    out.write_all(&(matrix.dim() as u32).to_le_bytes())
        .map_err(|e| Error::io(path, e))?;
    out.write_all(&[0u8; 4]).map_err(|e| Error::io(path, e))?;
    for value in matrix.values() {
        out.write_all(&value.to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn fixture_dir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn write_fixture(dir: &Path, articles: &str, behaviors: &str) -> CorpusPaths {
        let paths = CorpusPaths::in_dir(dir);
        fs::write(&paths.articles, articles).unwrap();
        fs::write(&paths.behaviors, behaviors).unwrap();
        let ids = ["a1", "a2", "a3"];
        let content =
            EmbeddingMatrix::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5], SpaceTag::Content)
                .unwrap();
        let frame =
            EmbeddingMatrix::new(3, 2, vec![0.0, 1.0, 1.0, 0.0, 0.5, -0.5], SpaceTag::Frame)
                .unwrap();
        write_embeddings(&paths.content_embeddings, &content, &ids).unwrap();
        write_embeddings(&paths.frame_embeddings, &frame, &ids).unwrap();
        paths
    }

    const FIXTURE_ARTICLES: &str = "article_id\tcategory\tframe\tsentiment\n\
        a1\tpolitics\tEconomic\t0.25\n\
        a2\tsports\tMorality\t-0.5\n\
        a3\tpolitics\tQuality of Life\t0\n";

    const FIXTURE_BEHAVIORS: &str = "impression_id\tuser_id\thistory\tcandidates\tclicks\n\
        i1\tu1\ta1 a2\ta3 a1\t1 0\n";

    #[test]
    fn loads_minimal_fixture() {
        let dir = fixture_dir();
        let paths = write_fixture(dir.path(), FIXTURE_ARTICLES, FIXTURE_BEHAVIORS);
        let corpus = load_corpus(&paths, &LoadConfig::default()).unwrap();
        assert_eq!(corpus.articles().len(), 3);
        assert_eq!(corpus.impressions().len(), 1);
        let a2 = corpus.article("a2").unwrap();
        assert_eq!(a2.frame, FrameLabel::Morality);
        assert_eq!(a2.sentiment, -0.5);
        assert_eq!(a2.row_index, 1);
    }

    #[test]
    fn unknown_article_in_behaviors_names_the_id() {
        let dir = fixture_dir();
        let behaviors = "impression_id\tuser_id\thistory\tcandidates\tclicks\n\
            i1\tu1\ta1\tghost a1\t1 0\n";
        let paths = write_fixture(dir.path(), FIXTURE_ARTICLES, behaviors);
        let err = load_corpus(&paths, &LoadConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownArticle(id) if id == "ghost"));
    }

    #[test]
    fn unknown_frame_label_reports_line_number() {
        let dir = fixture_dir();
        let articles = "article_id\tcategory\tframe\tsentiment\n\
            a1\tpolitics\tEconomic\t0.25\n\
            a2\tsports\tNostalgia\t0\n\
            a3\tpolitics\tQuality of Life\t0\n";
        let paths = write_fixture(dir.path(), articles, FIXTURE_BEHAVIORS);
        let err = load_corpus(&paths, &LoadConfig::default()).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("Nostalgia"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn long_histories_keep_most_recent_entries() {
        let dir = fixture_dir();
        let history: Vec<String> = (0..60).map(|i| format!("a{}", (i % 3) + 1)).collect();
        let behaviors = format!(
            "impression_id\tuser_id\thistory\tcandidates\tclicks\ni1\tu1\t{}\ta1\t1\n",
            history.join(" ")
        );
        let paths = write_fixture(dir.path(), FIXTURE_ARTICLES, &behaviors);
        let corpus = load_corpus(&paths, &LoadConfig::default()).unwrap();
        let stored = &corpus.impressions()[0].history;
        assert_eq!(stored.len(), 50);
        assert_eq!(stored, &history[10..]);
    }

    #[test]
    fn embedding_row_count_mismatch_is_rejected() {
        let dir = fixture_dir();
        let paths = write_fixture(dir.path(), FIXTURE_ARTICLES, FIXTURE_BEHAVIORS);
        let two_rows =
            EmbeddingMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], SpaceTag::Content).unwrap();
        write_embeddings(&paths.content_embeddings, &two_rows, &["a1", "a2"]).unwrap();
        let err = load_corpus(&paths, &LoadConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::RowCountMismatch { .. } | Error::SidecarMismatch { .. }
        ));
    }

    #[test]
    fn corpus_round_trips_through_files() {
        let dir = fixture_dir();
        let paths = write_fixture(dir.path(), FIXTURE_ARTICLES, FIXTURE_BEHAVIORS);
        let corpus = load_corpus(&paths, &LoadConfig::default()).unwrap();

        let out_dir = dir.path().join("copy");
        let out_paths = write_corpus(&corpus, &out_dir).unwrap();
        let reloaded = load_corpus(&out_paths, &LoadConfig::default()).unwrap();

        assert_eq!(corpus.articles(), reloaded.articles());
        assert_eq!(corpus.impressions(), reloaded.impressions());
        assert_eq!(corpus.content_embeddings(), reloaded.content_embeddings());
        assert_eq!(corpus.frame_embeddings(), reloaded.frame_embeddings());
    }
}
