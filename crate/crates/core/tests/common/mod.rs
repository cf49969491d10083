//! Shared helpers for the integration and acceptance suites: an independent
//! brute-force TF-IDF oracle and scenario document builders.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn scenario_path(name: &str) -> PathBuf {
    scenarios_dir().join(name)
}

/// Brute-force TF-IDF oracle, independent of the production code path: it
/// tokenizes, counts document frequencies and folds weights with explicit
/// nested loops over raw strings.
pub mod tfidf_oracle {
    use std::collections::BTreeMap;

    const STOPWORDS: [&str; 30] = [
        "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "has", "have", "in",
        "is", "it", "its", "no", "not", "of", "on", "or", "that", "the", "this", "to", "was",
        "were", "will", "with",
    ];

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
        out.retain(|t| !STOPWORDS.contains(&t.as_str()));
        out
    }

    /// Cosine scores of a query against raw document texts.
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

/// A star scenario document: one super, a publishing host, a querying
/// client, and one scripted query, returned as a mutable JSON value so
/// tests can tweak individual fields.
pub fn star_scenario() -> serde_json::Value {
    serde_json::json!({
        "seed": 5,
        "ticks": 400,
        "topology": {"peers": [
            {"name": "s1", "role": "super"},
            {"name": "host", "role": "edge", "rendezvous": "s1"},
            {"name": "client", "role": "edge", "rendezvous": "s1"}
        ]},
        "peer_groups": [
            {"id": "g-weather", "name": "weather", "category_path": ["travel", "weather"]}
        ],
        "ontology": {
            "concepts": ["location", "weather", "forecast"],
            "parents": {"forecast": ["weather"]}
        },
        "context_sources": {
            "ctx-host": {"location": [3.0, 4.0], "available_window": [0, 400], "device_class": 2, "load": 0.1}
        },
        "services": [{
            "host": "host",
            "groups": ["g-weather"],
            "platforms": ["midp"],
            "lifetime": 100,
            "republish_period": 50,
            "wsdl": {
                "service_name": "WeatherService",
                "description": "local weather forecasts",
                "operations": [
                    {"name": "getForecast", "input_parts": ["location"], "output_parts": ["forecast"]}
                ],
                "binding_path": "/weather",
                "context_source_ref": "ctx-host"
            }
        }],
        "queries": [{
            "query_id": "q1",
            "at_tick": 10,
            "origin": "client",
            "keywords": "weather forecast",
            "requested": {"inputs": ["location"], "outputs": ["forecast"]}
        }],
        "params": {"ams_threshold": 0.0}
    })
}

pub fn load(doc: &serde_json::Value) -> mwsd_core::ScenarioConfig {
    mwsd_core::ScenarioConfig::from_str(&doc.to_string()).expect("scenario builds")
}

/// Builds a map of raw document texts (class name + description + WSDL
/// text) from a trace's keyword stage by re-deriving it from the scenario;
/// used when cross-checking pipeline scores against the oracle.
pub fn doc_map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
