//! Review corpus ingestion, tokenization, vocabulary and binary bag-of-words
//! featurization.
//!
//! The expected layout is `<root>/{train,test}/{pos,neg}/<id>_<rating>.txt`.
//! Genres come from an optional sidecar TSV, one `review_key<TAB>g1,g2,...`
//! line per review. The key is either the qualified review key
//! (`train/pos/123`) or the bare id when that id is unique in the corpus.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use regex::Regex;
use serde::Serialize;

use crate::dsl::GroupedDataset;
use crate::error::{config, data, Error, Result};
use crate::rng::{rng_from, stream};
use crate::sparse::SparseBinaryDesign;

/// Recorded in output metadata, since the vocabulary size depends on it.
pub const TOKENIZER_VERSION: &str = "v1: lowercase, strip <br>, split on [^a-z0-9']";

pub const DEFAULT_MIN_DOC_FREQ: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Review {
    pub id: String,
    /// `split/polarity/id`, unique within a corpus.
    pub key: String,
    pub rating: u8,
    pub text: String,
    pub genres: BTreeSet<String>,
}

fn file_name_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([0-9A-Za-z]+)_([0-9]{1,2})\.txt$").unwrap())
}

/// Parses `<id>_<rating>.txt` into `(id, rating)`.
pub fn parse_file_name(name: &str) -> Result<(String, u8)> {
    let caps = file_name_re()
        .captures(name)
        .ok_or_else(|| data(format!("malformed review file name {name:?}")))?;
    let rating: u8 = caps[2].parse().expect("regex guarantees digits");
    if !(1..=10).contains(&rating) {
        return Err(data(format!(
            "rating {rating} out of range 1..=10 in {name:?}"
        )));
    }
    Ok((caps[1].to_string(), rating))
}

/// Reads every review under `root`. Output order is split, then polarity,
/// then file name, independent of directory listing order.
pub fn ingest(root: &Path) -> Result<Vec<Review>> {
    let mut files: Vec<(String, PathBuf, String)> = Vec::new();
    for split in ["train", "test"] {
        for polarity in ["pos", "neg"] {
            let dir = root.join(split).join(polarity);
            if !dir.is_dir() {
                return Err(data(format!("missing corpus directory {}", dir.display())));
            }
            let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut names = Vec::new();
            for entry in entries {
                let entry = entry.map_err(|e| Error::io(&dir, e))?;
                if entry
                    .file_type()
                    .map_err(|e| Error::io(entry.path(), e))?
                    .is_file()
                {
                    names.push(entry.file_name().to_string_lossy().into_owned());
                }
            }
            names.sort();
            for name in names {
                files.push((format!("{split}/{polarity}"), dir.join(&name), name));
            }
        }
    }
    files
        .par_iter()
        .map(|(prefix, path, name)| {
            let (id, rating) = parse_file_name(name)?;
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Ok(Review {
                key: format!("{prefix}/{id}"),
                id,
                rating,
                text,
                genres: BTreeSet::new(),
            })
        })
        .collect()
}

/// Parses the genre sidecar into key → genres (lowercased).
pub fn read_genre_sidecar(path: &Path) -> Result<HashMap<String, BTreeSet<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, genres) = line.split_once('\t').ok_or_else(|| {
            data(format!(
                "{}:{}: expected review_id<TAB>genres",
                path.display(),
                k + 1
            ))
        })?;
        let set: BTreeSet<String> = genres
            .split(',')
            .map(|g| g.trim().to_lowercase())
            .filter(|g| !g.is_empty())
            .collect();
        out.insert(key.trim().to_string(), set);
    }
    Ok(out)
}

/// Attaches genres to reviews. Lookup tries the qualified key, then the bare
/// id if no other review shares it. Returns the number of reviews matched.
pub fn attach_genres(reviews: &mut [Review], sidecar: &HashMap<String, BTreeSet<String>>) -> usize {
    let mut id_count: HashMap<&str, usize> = HashMap::new();
    for r in reviews.iter() {
        *id_count.entry(r.id.as_str()).or_insert(0) += 1;
    }
    let unique: HashSet<String> = id_count
        .into_iter()
        .filter(|(_, c)| *c == 1)
        .map(|(id, _)| id.to_string())
        .collect();
    let mut matched = 0;
    for r in reviews.iter_mut() {
        let found = sidecar.get(&r.key).or_else(|| {
            if unique.contains(&r.id) {
                sidecar.get(&r.id)
            } else {
                None
            }
        });
        if let Some(g) = found {
            r.genres = g.clone();
            matched += 1;
        }
    }
    matched
}

fn br_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)<br\s*/?>").unwrap())
}

pub fn tokenize(text: &str) -> Vec<String> {
    let stripped = br_re().replace_all(text, " ");
    stripped
        .to_lowercase()
        .split(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn distinct_tokens(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    doc_freq: Vec<usize>,
    index: HashMap<String, usize>,
    pub min_doc_freq: usize,
}

impl Vocabulary {
    pub fn from_parts(
        tokens: Vec<String>,
        doc_freq: Vec<usize>,
        min_doc_freq: usize,
    ) -> Result<Self> {
        if tokens.len() != doc_freq.len() {
            return Err(data("vocabulary token and frequency counts differ"));
        }
        let index: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(j, t)| (t.clone(), j))
            .collect();
        if index.len() != tokens.len() {
            return Err(data("duplicate token in vocabulary"));
        }
        Ok(Vocabulary {
            tokens,
            doc_freq,
            index,
            min_doc_freq,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn doc_freq(&self, id: usize) -> usize {
        self.doc_freq[id]
    }

    /// Tab-separated `feature_id token doc_freq` lines with a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("feature_id\ttoken\tdoc_freq\n");
        for (j, (t, f)) in self.tokens.iter().zip(&self.doc_freq).enumerate() {
            out.push_str(&format!("{j}\t{t}\t{f}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str, min_doc_freq: usize) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut freqs = Vec::new();
        for (k, line) in text.lines().enumerate().skip(1) {
            let parts: Vec<&str> = line.split('\t').collect();
            let [id, token, freq] = parts[..] else {
                return Err(data(format!("vocab line {}: expected three fields", k + 1)));
            };
            if id.parse::<usize>().ok() != Some(tokens.len()) {
                return Err(data(format!(
                    "vocab line {}: ids must be dense and ordered",
                    k + 1
                )));
            }
            tokens.push(token.to_string());
            freqs.push(
                freq.parse()
                    .map_err(|_| data(format!("vocab line {}: bad doc_freq", k + 1)))?,
            );
        }
        Self::from_parts(tokens, freqs, min_doc_freq)
    }
}

/// Tokens with document frequency at least `min_doc_freq`, ids in
/// lexicographic token order.
pub fn build_vocab(reviews: &[&Review], min_doc_freq: usize) -> Result<Vocabulary> {
    if min_doc_freq == 0 {
        return Err(config("min_doc_freq must be at least 1"));
    }
    let df: BTreeMap<String, usize> = reviews
        .par_iter()
        .fold(BTreeMap::new, |mut acc, r| {
            for t in distinct_tokens(&r.text) {
                *acc.entry(t).or_insert(0) += 1;
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (t, c) in b {
                *a.entry(t).or_insert(0) += c;
            }
            a
        });
    let (tokens, freqs): (Vec<String>, Vec<usize>) =
        df.into_iter().filter(|(_, c)| *c >= min_doc_freq).unzip();
    Vocabulary::from_parts(tokens, freqs, min_doc_freq)
}

/// Binary presence design and rating vector.
pub fn featurize(
    reviews: &[&Review],
    vocab: &Vocabulary,
) -> Result<(SparseBinaryDesign, Vec<f64>)> {
    let rows: Vec<Vec<usize>> = reviews
        .par_iter()
        .map(|r| {
            let mut ids: Vec<usize> = tokenize(&r.text)
                .iter()
                .filter_map(|t| vocab.id(t))
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect();
    let x = SparseBinaryDesign::from_rows(&rows, vocab.len())?;
    let y = reviews.iter().map(|r| f64::from(r.rating)).collect();
    Ok((x, y))
}

/// How reviews are mapped to groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Grouping {
    /// Every review in one group with this name.
    Single(String),
    /// Reviews tagged with at least one listed genre; a review with several
    /// goes to the first listed.
    Genres(Vec<String>),
}

impl Grouping {
    pub fn names(&self) -> Vec<String> {
        match self {
            Grouping::Single(name) => vec![name.clone()],
            Grouping::Genres(list) => list.clone(),
        }
    }

    /// 1-based group of a review, or `None` if it is filtered out.
    pub fn assign(&self, review: &Review) -> Option<usize> {
        match self {
            Grouping::Single(_) => Some(1),
            Grouping::Genres(list) => list
                .iter()
                .position(|g| review.genres.contains(g))
                .map(|k| k + 1),
        }
    }
}

/// Row bookkeeping for one half of the split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowLabel {
    pub key: String,
    pub rating: u8,
    pub group: usize,
}

#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub train: GroupedDataset,
    pub test: GroupedDataset,
    pub vocab: Vocabulary,
    pub train_labels: Vec<RowLabel>,
    pub test_labels: Vec<RowLabel>,
}

/// Review indices of the seeded 50/50 split, each half in corpus order.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed, &[stream::SPLIT]));
    let half = n.div_ceil(2);
    let mut train = order[..half].to_vec();
    let mut test = order[half..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Filters and groups reviews, splits them in half at random, builds the
/// vocabulary on the training half only, and featurizes both halves.
pub fn group_and_split(
    reviews: &[Review],
    grouping: &Grouping,
    seed: u64,
    min_doc_freq: usize,
) -> Result<PreparedCorpus> {
    let names = grouping.names();
    let kept: Vec<(&Review, usize)> = reviews
        .iter()
        .filter_map(|r| grouping.assign(r).map(|g| (r, g)))
        .collect();
    let mut sizes = vec![0usize; names.len()];
    for (_, g) in &kept {
        sizes[g - 1] += 1;
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(config(format!("no reviews in group {:?}", names[g])));
    }

    let (train_idx, test_idx) = split_indices(kept.len(), seed);
    let half = |idx: &[usize]| -> (Vec<&Review>, Vec<RowLabel>, Vec<usize>) {
        let revs: Vec<&Review> = idx.iter().map(|&i| kept[i].0).collect();
        let labels = idx
            .iter()
            .map(|&i| RowLabel {
                key: kept[i].0.key.clone(),
                rating: kept[i].0.rating,
                group: kept[i].1,
            })
            .collect();
        let groups = idx.iter().map(|&i| kept[i].1).collect();
        (revs, labels, groups)
    };
    let (train_revs, train_labels, train_groups) = half(&train_idx);
    let (test_revs, test_labels, test_groups) = half(&test_idx);

    let vocab = build_vocab(&train_revs, min_doc_freq)?;
    let (xt, yt) = featurize(&train_revs, &vocab)?;
    let (xs, ys) = featurize(&test_revs, &vocab)?;
    let train = GroupedDataset::new(xt, yt, train_groups, names.clone())
        .map_err(|e| config(format!("training half: {e}")))?;
    let test = GroupedDataset::new(xs, ys, test_groups, names)
        .map_err(|e| config(format!("test half: {e}")))?;
    log::info!(
        "corpus: {} training rows, {} test rows, {} features",
        train.n_rows(),
        test.n_rows(),
        vocab.len()
    );
    Ok(PreparedCorpus {
        train,
        test,
        vocab,
        train_labels,
        test_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn review(key: &str, rating: u8, text: &str, genres: &[&str]) -> Review {
        Review {
            id: key.rsplit('/').next().unwrap().to_string(),
            key: key.to_string(),
            rating,
            text: text.to_string(),
            genres: genres.iter().map(|g| g.to_string()).collect(),
        }
    }

    #[test]
    fn file_names() {
        assert_eq!(parse_file_name("123_8.txt").unwrap(), ("123".into(), 8));
        assert_eq!(parse_file_name("9_10.txt").unwrap(), ("9".into(), 10));
        assert!(matches!(parse_file_name("123.txt"), Err(Error::Data(_))));
        assert!(parse_file_name("1_0.txt").is_err());
        assert!(parse_file_name("1_11.txt").is_err());
        assert!(parse_file_name("1_8.txt.bak").is_err());
    }

    #[test]
    fn tokens() {
        assert_eq!(tokenize("Great movie!"), vec!["great", "movie"]);
        assert_eq!(tokenize("don't<br />stop"), vec!["don't", "stop"]);
        assert_eq!(tokenize("a<BR>b<br/>c"), vec!["a", "b", "c"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Top-10 films"), vec!["top", "10", "films"]);
    }

    #[test]
    fn vocab_counts_documents_not_terms() {
        let a = review("train/pos/1", 8, "wow wow wow wow wow", &[]);
        let b = review("train/pos/2", 9, "fine film", &[]);
        let c = review("train/neg/3", 2, "bad film", &[]);
        let all = vec![&a, &b, &c];
        let v1 = build_vocab(&all, 1).unwrap();
        assert_eq!(v1.tokens(), &["bad", "film", "fine", "wow"]);
        assert_eq!(v1.doc_freq(v1.id("wow").unwrap()), 1);
        let v2 = build_vocab(&all, 2).unwrap();
        assert_eq!(v2.tokens(), &["film"]);
        assert!(build_vocab(&all, 0).is_err());
    }

    #[test]
    fn toy_featurization_matches_hand_table() {
        let a = review("train/pos/1", 8, "good good plot", &[]);
        let b = review("train/neg/2", 3, "bad plot<br />bad acting", &[]);
        let c = review("train/neg/3", 1, "unknown words only", &[]);
        let vocab = Vocabulary::from_parts(
            vec!["acting".into(), "bad".into(), "good".into(), "plot".into()],
            vec![1, 1, 1, 2],
            1,
        )
        .unwrap();
        let (x, y) = featurize(&[&a, &b, &c], &vocab).unwrap();
        let hand = [
            [0.0, 0.0, 1.0, 1.0],
            [1.0, 1.0, 0.0, 1.0],
            [0.0, 0.0, 0.0, 0.0],
        ];
        for (i, row) in hand.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(x.get(i, j), *v, "({i},{j})");
            }
        }
        assert_eq!(y, vec![8.0, 3.0, 1.0]);
    }

    #[test]
    fn priority_rule() {
        let g = Grouping::Genres(vec!["drama".into(), "comedy".into(), "horror".into()]);
        assert_eq!(
            g.assign(&review("a/b/1", 8, "", &["horror", "drama"])),
            Some(1)
        );
        assert_eq!(g.assign(&review("a/b/1", 8, "", &["horror"])), Some(3));
        assert_eq!(g.assign(&review("a/b/1", 8, "", &["western"])), None);
    }

    #[test]
    fn vocab_tsv_round_trip() {
        let v = Vocabulary::from_parts(vec!["a".into(), "b".into()], vec![5, 7], 5).unwrap();
        let back = Vocabulary::from_tsv(&v.to_tsv(), 5).unwrap();
        assert_eq!(v, back);
        assert!(Vocabulary::from_tsv("h\n1\ta\t3\n", 1).is_err());
    }

    fn toy_corpus() -> Vec<Review> {
        let words = [
            "great", "awful", "plot", "acting", "scary", "funny", "boring", "moving",
        ];
        (0..40)
            .map(|i| {
                let text: Vec<&str> = (0..4).map(|k| words[(i * 3 + k * 5) % 8]).collect();
                let genre = ["drama", "comedy", "horror"][i % 3];
                let rating = if i % 2 == 0 { 8 } else { 3 };
                review(&format!("train/pos/{i}"), rating, &text.join(" "), &[genre])
            })
            .collect()
    }

    #[test]
    fn split_is_seeded_and_vocab_uses_training_only() {
        let reviews = toy_corpus();
        let g = Grouping::Genres(vec!["drama".into(), "comedy".into(), "horror".into()]);
        let a = group_and_split(&reviews, &g, 11, 3).unwrap();
        let b = group_and_split(&reviews, &g, 11, 3).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.vocab, b.vocab);
        assert_eq!(a.train.n_rows() + a.test.n_rows(), 40);
        assert_eq!(
            a.train.group_sizes().iter().sum::<usize>(),
            a.train.n_rows()
        );
        // doc frequency on the training half alone meets the threshold
        let counts = a.train.x().column_counts();
        for (j, c) in counts.iter().enumerate() {
            assert!(*c >= 3);
            assert_eq!(*c, a.vocab.doc_freq(j));
        }
        let c = group_and_split(&reviews, &g, 12, 3).unwrap();
        assert_ne!(a.train_labels, c.train_labels);
    }

    #[test]
    fn empty_group_is_config_error() {
        let reviews = toy_corpus();
        let g = Grouping::Genres(vec!["drama".into(), "western".into()]);
        assert!(matches!(
            group_and_split(&reviews, &g, 1, 1),
            Err(Error::Config(_))
        ));
        let single = group_and_split(&reviews, &Grouping::Single("all".into()), 1, 1).unwrap();
        assert_eq!(single.train.n_groups(), 1);
    }

    #[test]
    fn genre_lookup_prefers_qualified_key() {
        let mut reviews = vec![
            review("train/pos/1", 8, "", &[]),
            review("test/pos/1", 9, "", &[]),
            review("test/neg/2", 2, "", &[]),
        ];
        let mut side = HashMap::new();
        side.insert(
            "test/pos/1".to_string(),
            BTreeSet::from(["comedy".to_string()]),
        );
        side.insert("1".to_string(), BTreeSet::from(["drama".to_string()]));
        side.insert("2".to_string(), BTreeSet::from(["horror".to_string()]));
        assert_eq!(attach_genres(&mut reviews, &side), 2);
        assert!(reviews[0].genres.is_empty());
        assert!(reviews[1].genres.contains("comedy"));
        assert!(reviews[2].genres.contains("horror"));
    }

    #[test]
    fn ingest_layout() {
        let dir = tempfile::tempdir().unwrap();
        for (sub, name, text) in [
            ("train/pos", "1_8.txt", "good"),
            ("train/neg", "2_3.txt", "bad"),
            ("test/pos", "3_10.txt", "great"),
            ("test/neg", "4_1.txt", "awful"),
        ] {
            let d = dir.path().join(sub);
            fs::create_dir_all(&d).unwrap();
            fs::write(d.join(name), text).unwrap();
        }
        let reviews = ingest(dir.path()).unwrap();
        assert_eq!(reviews.len(), 4);
        assert_eq!(reviews[0].key, "train/pos/1");
        assert_eq!(reviews[2].rating, 10);
        fs::write(dir.path().join("test/neg/oops.txt"), "x").unwrap();
        let err = ingest(dir.path()).unwrap_err();
        assert!(err.to_string().contains("oops.txt"));
        fs::write(
            dir.path().join("g.tsv"),
            "train/pos/1\tDrama, comedy\n\nbad line\n",
        )
        .unwrap();
        assert!(read_genre_sidecar(&dir.path().join("g.tsv")).is_err());
    }
}
