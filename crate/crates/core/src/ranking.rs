//! TF-IDF vector-space post-filtering of keyword search results.
//!
//! Keyword discovery deliberately over-returns; this module turns the cached
//! results into a small document corpus, weights terms with raw
//! `tf * ln(N/df)`, ranks documents by cosine similarity against the query
//! and keeps the subset scoring at or above the AMS threshold (the
//! "advanced matching services").

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::discovery::MatchRecord;

/// Function words removed from every document and query before weighting.
///
/// Fixed 30-word list; changing it changes scores, so it is part of the
/// documented output contract (see `docs/formats.md`).
pub const STOPWORDS: [&str; 30] = [
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "has", "have", "in",
    "is", "it", "its", "no", "not", "of", "on", "or", "that", "the", "this", "to", "was", "were",
    "will", "with",
];

/// Default score cutoff for membership in the AMS subset.
pub const DEFAULT_AMS_THRESHOLD: f64 = 0.25;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RankingError {
    #[error("cannot build a corpus from an empty result list")]
    EmptyResults,
    #[error("query has no terms left after tokenization")]
    EmptyQuery,
    #[error("unknown document: {0}")]
    UnknownDocument(String),
}

/// Lowercases, splits on non-alphanumeric characters, and drops empty tokens
/// and stopwords. Every piece of text entering the vector space (documents
/// and queries alike) goes through this exact function.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(t))
        .map(str::to_string)
        .collect()
}

/// The token streams of all cached results, plus the derived vocabulary and
/// document frequencies. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentCorpus {
    /// class_id -> token stream of (class name + class description + WSDL text).
    docs: BTreeMap<String, Vec<String>>,
    /// All distinct terms across docs, sorted lexicographically. K = len().
    vocabulary: Vec<String>,
    /// term -> number of documents containing it (1 <= df <= N).
    df: BTreeMap<String, usize>,
}

impl DocumentCorpus {
    /// Builds a corpus from raw document texts keyed by document id.
    pub fn from_texts<I, S, T>(texts: I) -> Result<Self, RankingError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let docs: BTreeMap<String, Vec<String>> = texts
            .into_iter()
            .map(|(id, text)| (id.into(), tokenize(text.as_ref())))
            .collect();
        if docs.is_empty() {
            return Err(RankingError::EmptyResults);
        }
        let mut df = BTreeMap::new();
        for tokens in docs.values() {
            for term in tokens.iter().collect::<BTreeSet<_>>() {
                *df.entry(term.clone()).or_insert(0) += 1;
            }
        }
        let vocabulary = df.keys().cloned().collect();
        Ok(Self {
            docs,
            vocabulary,
            df,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Number of distinct terms across the collection (the dimension K).
    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &String> {
        self.docs.keys()
    }

    pub fn tokens(&self, doc_id: &str) -> Option<&[String]> {
        self.docs.get(doc_id).map(Vec::as_slice)
    }

    fn idf(&self, term: &str) -> f64 {
        match self.df.get(term) {
            Some(&df) => ((self.docs.len() as f64) / (df as f64)).ln(),
            None => 0.0,
        }
    }

    /// TF-IDF weight vector for an arbitrary token stream, over this
    /// corpus's vocabulary. Terms outside the vocabulary weigh 0.
    fn weight_vector(&self, tokens: &[String]) -> WeightVector {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
        let entries = counts
            .into_iter()
            .filter(|(term, _)| self.df.contains_key(*term))
            .map(|(term, tf)| (term.to_string(), tf as f64 * self.idf(term)))
            .collect();
        WeightVector { entries }
    }
}

/// Sparse non-negative term weights over a corpus vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    entries: BTreeMap<String, f64>,
}

impl WeightVector {
    pub fn weight(&self, term: &str) -> f64 {
        self.entries.get(term).copied().unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &WeightVector) -> f64 {
        self.entries
            .iter()
            .filter_map(|(term, w)| other.entries.get(term).map(|v| w * v))
            .sum()
    }

    /// Cosine similarity, defined as 0 when either vector has zero norm.
    /// Clamped into [0, 1]; weights are non-negative so the true value
    /// cannot leave that range, only rounding can.
    pub fn cosine(&self, other: &WeightVector) -> f64 {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        (self.dot(other) / (na * nb)).clamp(0.0, 1.0)
    }
}

/// One ranked member of the AMS subset.
#[derive(Debug, Clone, PartialEq)]
pub struct AmsEntry {
    pub class_id: String,
    /// Cosine score in [0, 1].
    pub score: f64,
    /// 1-based position after sorting by (descending score, ascending class_id).
    pub rank: usize,
}

/// Builds one document per distinct class_id from keyword-search results.
/// Document text is the class name, class description and the linked spec's
/// WSDL text (when the spec was cached alongside the class).
pub fn build_corpus(results: &[MatchRecord]) -> Result<DocumentCorpus, RankingError> {
    if results.is_empty() {
        return Err(RankingError::EmptyResults);
    }
    let mut texts: BTreeMap<String, String> = BTreeMap::new();
    for rec in results {
        texts
            .entry(rec.class_id().to_string())
            .or_insert_with(|| rec.document_text());
    }
    DocumentCorpus::from_texts(texts)
}

/// Raw-count TF times natural-log IDF: `tf(term, doc) * ln(N / df(term))`.
/// 0 when the term is absent from the document or the vocabulary; in
/// particular a term present in every document weighs 0 everywhere.
pub fn tfidf_weight(
    corpus: &DocumentCorpus,
    doc_id: &str,
    term: &str,
) -> Result<f64, RankingError> {
    let tokens = corpus
        .tokens(doc_id)
        .ok_or_else(|| RankingError::UnknownDocument(doc_id.to_string()))?;
    if !corpus.df.contains_key(term) {
        return Ok(0.0);
    }
    let tf = tokens.iter().filter(|t| t.as_str() == term).count();
    Ok(tf as f64 * corpus.idf(term))
}

/// Ranks every document by cosine similarity against the query and returns
/// the entries scoring at or above `ams_threshold`, sorted by descending
/// score with ties broken by ascending class_id.
///
/// The query vector uses the same scheme as the documents: tf is the term
/// count inside the query, df comes from the corpus.
pub fn cosine_rank(
    corpus: &DocumentCorpus,
    query_terms: &[String],
    ams_threshold: f64,
) -> Result<Vec<AmsEntry>, RankingError> {
    let query_tokens: Vec<String> = query_terms.iter().flat_map(|t| tokenize(t)).collect();
    if query_tokens.is_empty() {
        return Err(RankingError::EmptyQuery);
    }
    let query_vec = corpus.weight_vector(&query_tokens);

    let mut scored: Vec<(String, f64)> = corpus
        .docs
        .iter()
        .map(|(id, tokens)| (id.clone(), query_vec.cosine(&corpus.weight_vector(tokens))))
        .filter(|(_, score)| *score >= ams_threshold)
        .collect();
    scored.sort_by(|(id_a, score_a), (id_b, score_b)| {
        score_b.total_cmp(score_a).then_with(|| id_a.cmp(id_b))
    });
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (class_id, score))| AmsEntry {
            class_id,
            score,
            rank: i + 1,
        })
        .collect())
}

/// Runs the whole post-filter: corpus build plus cosine ranking. Returns the
/// AMS list and the input records whose class_id survived, in AMS rank order.
pub fn filter_to_ams(
    results: &[MatchRecord],
    query_terms: &[String],
    ams_threshold: f64,
) -> Result<(Vec<AmsEntry>, Vec<MatchRecord>), RankingError> {
    let corpus = build_corpus(results)?;
    let ams = cosine_rank(&corpus, query_terms, ams_threshold)?;
    let retained = ams
        .iter()
        .filter_map(|entry| results.iter().find(|r| r.class_id() == entry.class_id))
        .cloned()
        .collect();
    Ok((ams, retained))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent brute-force implementation working directly on raw
    /// strings with nested loops. Kept free of the production path on
    /// purpose: it recomputes tokenization, df and weights from scratch.
    pub(crate) mod oracle {
        use std::collections::BTreeMap;

        pub fn naive_tokens(text: &str) -> Vec<String> {
            let mut out = Vec::new();
            let mut cur = String::new();
            for c in text.chars() {
                if c.is_alphanumeric() {
                    for lc in c.to_lowercase() {
                        cur.push(lc);
                    }
                } else if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            if !cur.is_empty() {
                out.push(cur);
            }
            out.retain(|t| !super::STOPWORDS.contains(&t.as_str()));
            out
        }

        /// All cosine scores for a query against raw document texts,
        /// computed with explicit loops over the full vocabulary.
        pub fn scores(docs: &BTreeMap<String, String>, query: &str) -> BTreeMap<String, f64> {
            let n = docs.len() as f64;
            let toks: BTreeMap<&String, Vec<String>> = docs
                .iter()
                .map(|(id, text)| (id, naive_tokens(text)))
                .collect();
            let mut vocab: Vec<String> = Vec::new();
            for tokens in toks.values() {
                for t in tokens {
                    if !vocab.contains(t) {
                        vocab.push(t.clone());
                    }
                }
            }
            vocab.sort();
            let df = |term: &str| -> f64 {
                toks.values()
                    .filter(|ts| ts.iter().any(|t| t == term))
                    .count() as f64
            };
            let weight = |tokens: &[String], term: &str| -> f64 {
                let d = df(term);
                if d == 0.0 {
                    return 0.0;
                }
                let tf = tokens.iter().filter(|t| t.as_str() == term).count() as f64;
                tf * (n / d).ln()
            };
            let qtoks = naive_tokens(query);
            let mut out = BTreeMap::new();
            for (id, tokens) in &toks {
                let mut dot = 0.0;
                let mut nq = 0.0;
                let mut nd = 0.0;
                for term in &vocab {
                    let qw = weight(&qtoks, term);
                    let dw = weight(tokens, term);
                    dot += qw * dw;
                    nq += qw * qw;
                    nd += dw * dw;
                }
                let score = if nq == 0.0 || nd == 0.0 {
                    0.0
                } else {
                    (dot / (nq.sqrt() * nd.sqrt())).clamp(0.0, 1.0)
                };
                out.insert((*id).clone(), score);
            }
            out
        }
    }

    fn three_doc_corpus() -> DocumentCorpus {
        DocumentCorpus::from_texts([
            ("d1", "weather forecast"),
            ("d2", "weather maps"),
            ("d3", "stock quotes"),
        ])
        .unwrap()
    }

    #[test]
    fn tokenize_lowercases_splits_and_drops_stopwords() {
        assert_eq!(
            tokenize("The Weather-Service, for LOCAL forecasts!"),
            vec!["weather", "service", "local", "forecasts"]
        );
        assert_eq!(tokenize("the and of"), Vec::<String>::new());
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn corpus_counts_distinct_terms_and_df() {
        // Oracle-derived: distinct terms over the three texts are
        // {forecast, maps, quotes, stock, weather}.
        let corpus = three_doc_corpus();
        assert_eq!(corpus.vocabulary_size(), 5);
        assert_eq!(corpus.document_frequency("weather"), 2);
        assert_eq!(corpus.document_frequency("stock"), 1);
        assert_eq!(corpus.document_frequency("forecast"), 1);
    }

    #[test]
    fn corpus_single_doc_repeated_term() {
        let corpus = DocumentCorpus::from_texts([("d", "alpha alpha beta")]).unwrap();
        assert_eq!(corpus.vocabulary_size(), 2);
        assert_eq!(corpus.document_frequency("alpha"), 1);
        assert_eq!(corpus.document_frequency("beta"), 1);
    }

    #[test]
    fn corpus_rejects_empty_input() {
        assert_eq!(
            DocumentCorpus::from_texts(Vec::<(String, String)>::new()).unwrap_err(),
            RankingError::EmptyResults
        );
        assert_eq!(build_corpus(&[]).unwrap_err(), RankingError::EmptyResults);
    }

    #[test]
    fn tfidf_weight_matches_hand_computation() {
        // tf=2, N=3, df=2 -> 2 * ln(3/2); frozen from the brute-force oracle.
        let corpus = DocumentCorpus::from_texts([
            ("d1", "weather weather"),
            ("d2", "weather maps"),
            ("d3", "stock quotes"),
        ])
        .unwrap();
        let w = tfidf_weight(&corpus, "d1", "weather").unwrap();
        assert!((w - 0.8109302162163288).abs() < 1e-12);
    }

    #[test]
    fn tfidf_weight_zero_when_term_everywhere() {
        let corpus =
            DocumentCorpus::from_texts([("d1", "weather sun"), ("d2", "weather rain")]).unwrap();
        assert_eq!(tfidf_weight(&corpus, "d1", "weather").unwrap(), 0.0);
        assert_eq!(tfidf_weight(&corpus, "d2", "weather").unwrap(), 0.0);
    }

    #[test]
    fn tfidf_weight_zero_when_term_absent() {
        let corpus = three_doc_corpus();
        assert_eq!(tfidf_weight(&corpus, "d1", "maps").unwrap(), 0.0);
        assert_eq!(tfidf_weight(&corpus, "d1", "nonexistent").unwrap(), 0.0);
    }

    #[test]
    fn tfidf_unknown_document() {
        let corpus = three_doc_corpus();
        assert_eq!(
            tfidf_weight(&corpus, "nope", "weather").unwrap_err(),
            RankingError::UnknownDocument("nope".into())
        );
    }

    #[test]
    fn cosine_parallel_vectors_score_one() {
        let corpus = three_doc_corpus();
        let query = vec!["weather".to_string(), "forecast".to_string()];
        let ams = cosine_rank(&corpus, &query, 0.0).unwrap();
        assert_eq!(ams[0].class_id, "d1");
        assert!((ams[0].score - 1.0).abs() < 1e-12);
        assert_eq!(ams[0].rank, 1);
    }

    #[test]
    fn cosine_orthogonal_query_scores_zero() {
        let corpus = three_doc_corpus();
        let query = vec!["unknownterm".to_string()];
        let ams = cosine_rank(&corpus, &query, 0.0).unwrap();
        assert!(ams.iter().all(|e| e.score == 0.0));
        let ams = cosine_rank(&corpus, &query, 0.1).unwrap();
        assert!(ams.is_empty());
    }

    #[test]
    fn cosine_three_doc_ranking_matches_oracle() {
        // Frozen from the brute-force oracle before the build:
        //   d1 -> 1.0, d2 -> 0.11988321306398907, d3 -> 0.0.
        let corpus = three_doc_corpus();
        let query = vec!["weather".to_string(), "forecast".to_string()];
        let ams = cosine_rank(&corpus, &query, 0.1).unwrap();
        assert_eq!(ams.len(), 2);
        assert_eq!((ams[0].class_id.as_str(), ams[0].rank), ("d1", 1));
        assert_eq!((ams[1].class_id.as_str(), ams[1].rank), ("d2", 2));
        assert!((ams[0].score - 1.0).abs() < 1e-9);
        assert!((ams[1].score - 0.11988321306398907).abs() < 1e-9);

        let docs: std::collections::BTreeMap<String, String> = [
            ("d1".to_string(), "weather forecast".to_string()),
            ("d2".to_string(), "weather maps".to_string()),
            ("d3".to_string(), "stock quotes".to_string()),
        ]
        .into();
        let expected = oracle::scores(&docs, "weather forecast");
        for entry in &ams {
            assert!((entry.score - expected[&entry.class_id]).abs() < 1e-9);
        }
    }

    #[test]
    fn threshold_one_excludes_everything_without_parallel_doc() {
        // Oracle confirms max score for the single-term query is
        // 0.34624155305796134 < 1 on the three-doc corpus.
        let corpus = three_doc_corpus();
        let ams = cosine_rank(&corpus, &["weather".to_string()], 1.0).unwrap();
        assert!(ams.is_empty());
        let ams = cosine_rank(&corpus, &["weather".to_string()], 0.0).unwrap();
        let top = ams.iter().map(|e| e.score).fold(0.0, f64::max);
        assert!((top - 0.34624155305796134).abs() < 1e-9);
    }

    #[test]
    fn empty_query_rejected() {
        let corpus = three_doc_corpus();
        assert_eq!(
            cosine_rank(&corpus, &[], 0.0).unwrap_err(),
            RankingError::EmptyQuery
        );
        // Stopword-only queries tokenize to nothing.
        assert_eq!(
            cosine_rank(&corpus, &["the".to_string(), "of".to_string()], 0.0).unwrap_err(),
            RankingError::EmptyQuery
        );
    }

    #[test]
    fn filter_to_ams_inclusion_and_thresholds() {
        use crate::advert::{AdvBody, Advertisement};
        use crate::discovery::MatchRecord;
        use crate::overlay::PeerId;
        use crate::publishing::ModuleClassBody;

        let record = |id: &str, name: &str, desc: &str| MatchRecord {
            class: Advertisement::new(
                id,
                PeerId::from_name("host"),
                vec![],
                0,
                100,
                AdvBody::ModuleClass(ModuleClassBody {
                    class_id: id.to_string(),
                    name: name.to_string(),
                    description: desc.to_string(),
                    wsdl_extras: vec![],
                }),
            ),
            spec: None,
            found_at: PeerId::from_name("s"),
            hops: 1,
            matched_terms: BTreeSet::from(["weather".to_string()]),
        };
        let records = vec![
            record("c1", "weather", "forecast"),
            record("c2", "weather", "maps"),
            record("c3", "stock", "quotes"),
        ];
        let query = vec!["weather".to_string(), "forecast".to_string()];

        // Threshold 0 keeps everything, in AMS rank order.
        let (ams, retained) = filter_to_ams(&records, &query, 0.0).unwrap();
        assert_eq!(ams.len(), 3);
        let input_ids: BTreeSet<&str> = records.iter().map(|r| r.class_id()).collect();
        for (entry, rec) in ams.iter().zip(retained.iter()) {
            assert!(input_ids.contains(entry.class_id.as_str()));
            assert_eq!(entry.class_id, rec.class_id());
        }

        // A positive threshold drops the orthogonal document.
        let (ams, retained) = filter_to_ams(&records, &query, 0.1).unwrap();
        assert_eq!(ams.len(), 2);
        assert_eq!(retained.len(), 2);
        assert!(ams.iter().all(|e| e.class_id != "c3"));

        // Threshold 1 with no exactly-parallel document keeps nothing.
        let (ams, retained) = filter_to_ams(&records, &["weather".to_string()], 1.0).unwrap();
        assert!(ams.is_empty() && retained.is_empty());

        assert_eq!(
            filter_to_ams(&[], &query, 0.0).unwrap_err(),
            RankingError::EmptyResults
        );
    }

    #[test]
    fn query_scaling_leaves_ranking_unchanged() {
        let corpus = three_doc_corpus();
        let query = vec!["weather".to_string(), "forecast".to_string()];
        let mut tripled = Vec::new();
        for _ in 0..3 {
            tripled.extend(query.clone());
        }
        let a = cosine_rank(&corpus, &query, 0.0).unwrap();
        let b = cosine_rank(&corpus, &tripled, 0.0).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.class_id, y.class_id);
            assert_eq!(x.rank, y.rank);
            assert!((x.score - y.score).abs() < 1e-12);
        }
    }
}
