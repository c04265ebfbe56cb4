//! String/index maps, morphological feature schema, word embeddings and
//! sentence numericalization.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::conllu::{Sentence, Treebank};
use crate::error::{Error, Result};
use crate::rng;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOW: usize = 2;
pub const EOW: usize = 3;
const RESERVED_CHARS: [&str; 4] = ["<pad>", "<unk>", "<bow>", "<eow>"];

/// Value index of "not applicable" in every feature attribute.
pub const NA: usize = 0;
const NA_LABEL: &str = "<na>";

/// Insertion-ordered bijection between strings and indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Index {
    items: Vec<String>,
    map: BTreeMap<String, usize>,
}

impl From<Vec<String>> for Index {
    fn from(items: Vec<String>) -> Self {
        let mut idx = Index::default();
        for it in items {
            idx.insert(&it);
        }
        idx
    }
}

impl From<Index> for Vec<String> {
    fn from(idx: Index) -> Self {
        idx.items
    }
}

impl Index {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `s`, adding it if new.
    pub fn insert(&mut self, s: &str) -> usize {
        if let Some(&i) = self.map.get(s) {
            return i;
        }
        let i = self.items.len();
        self.items.push(s.to_string());
        self.map.insert(s.to_string(), i);
        i
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.map.get(s).copied()
    }

    pub fn name(&self, i: usize) -> Option<&str> {
        self.items.get(i).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub chars: Index,
    pub upos: Index,
    pub xpos: Index,
    pub deprel: Index,
}

impl Default for Lexicon {
    fn default() -> Self {
        let mut chars = Index::new();
        for r in RESERVED_CHARS {
            chars.insert(r);
        }
        Lexicon {
            chars,
            upos: Index::new(),
            xpos: Index::new(),
            deprel: Index::new(),
        }
    }
}

impl Lexicon {
    pub fn char_index(&self, c: char) -> usize {
        let mut buf = [0u8; 4];
        self.chars.get(c.encode_utf8(&mut buf)).unwrap_or(UNK)
    }

    /// Character name for an index; `None` for reserved symbols.
    pub fn char_of(&self, i: usize) -> Option<char> {
        if i < RESERVED_CHARS.len() {
            return None;
        }
        self.chars.name(i).and_then(|s| s.chars().next())
    }

    /// `[BOW, c₁..c_m, EOW]`
    pub fn wrap_chars(&self, word: &str) -> Vec<usize> {
        let mut v = Vec::with_capacity(word.len() + 2);
        v.push(BOW);
        v.extend(word.chars().map(|c| self.char_index(c)));
        v.push(EOW);
        v
    }
}

/// Per-attribute value sets. Value 0 of every attribute is "not applicable".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub attributes: Vec<(String, Index)>,
}

impl FeatureSchema {
    pub fn attribute(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|(a, _)| a == name)
    }

    fn add(&mut self, attr: &str, value: &str) {
        let i = match self.attribute(attr) {
            Some(i) => i,
            None => {
                let mut values = Index::new();
                values.insert(NA_LABEL);
                self.attributes.push((attr.to_string(), values));
                self.attributes.len() - 1
            }
        };
        self.attributes[i].1.insert(value);
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    /// Value sizes per attribute, NA included.
    pub fn sizes(&self) -> Vec<usize> {
        self.attributes.iter().map(|(_, v)| v.len()).collect()
    }

    pub fn value_name(&self, attr: usize, value: usize) -> Option<&str> {
        if value == NA {
            return None;
        }
        self.attributes.get(attr).and_then(|(_, v)| v.name(value))
    }
}

/// Collects characters, tags, relations and features in first-occurrence order.
pub fn build_lexicon(tb: &Treebank) -> (Lexicon, FeatureSchema) {
    let mut lex = Lexicon::default();
    let mut schema = FeatureSchema::default();
    for tok in tb.sentences.iter().flat_map(|s| &s.tokens) {
        let mut buf = [0u8; 4];
        for c in tok.form.chars().chain(tok.lemma.chars()) {
            lex.chars.insert(c.encode_utf8(&mut buf));
        }
        if !tok.upos.is_empty() {
            lex.upos.insert(&tok.upos);
        }
        if !tok.xpos.is_empty() {
            lex.xpos.insert(&tok.xpos);
        }
        if !tok.deprel.is_empty() {
            lex.deprel.insert(&tok.deprel);
        }
        for (a, v) in tok.feats.pairs() {
            schema.add(a, v);
        }
    }
    (lex, schema)
}

/// Word vectors. External rows are fixed; a trainable table keeps only the
/// word index here and stores its rows among the model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub words: Index,
    pub dim: usize,
    pub trainable: bool,
    /// Fixed rows, `words.len() × dim`; empty when trainable.
    #[serde(skip)]
    pub rows: Vec<f32>,
    #[serde(skip)]
    pub unknown: Vec<f32>,
}

impl EmbeddingMatrix {
    /// Trainable table over the training vocabulary. Row 0 is reserved for
    /// unknown words.
    pub fn trainable(tb: &Treebank, dim: usize) -> Self {
        let mut words = Index::new();
        words.insert("<unk>");
        for tok in tb.sentences.iter().flat_map(|s| &s.tokens) {
            words.insert(&tok.form);
        }
        EmbeddingMatrix {
            words,
            dim,
            trainable: true,
            rows: Vec::new(),
            unknown: Vec::new(),
        }
    }

    /// Looks up exact form, then lowercased form.
    pub fn lookup(&self, word: &str) -> Option<usize> {
        let found = self.words.get(word).or_else(|| {
            let lower = word.to_lowercase();
            if lower != word {
                self.words.get(&lower)
            } else {
                None
            }
        });
        match found {
            Some(0) if self.trainable => None,
            f => f,
        }
    }

    /// Row index used for a word, `0` for unknown in the trainable case.
    pub fn trainable_row(&self, word: &str) -> usize {
        self.lookup(word).unwrap_or(0)
    }

    /// Fixed vector for a word (unknown vector when absent).
    pub fn vector(&self, word: &str) -> &[f32] {
        match self.lookup(word) {
            Some(r) if !self.trainable => &self.rows[r * self.dim..(r + 1) * self.dim],
            _ => &self.unknown,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Parsed embedding text plus warnings such as duplicate words.
#[derive(Debug, Clone)]
pub struct LoadedEmbeddings {
    pub matrix: EmbeddingMatrix,
    pub warnings: Vec<String>,
}

/// Parses the text embedding format: optional `count dim` header, then
/// `word v1 .. vd` per line. Duplicates keep the last vector.
pub fn parse_embeddings(text: &str, seed: u64) -> Result<LoadedEmbeddings> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let mut dim: Option<usize> = None;
    if let Some((_, first)) = lines.peek() {
        let parts: Vec<&str> = first.split_whitespace().collect();
        if parts.len() == 2 && parts.iter().all(|p| p.parse::<usize>().is_ok()) {
            dim = parts[1].parse().ok();
            lines.next();
        }
    }
    let mut words = Index::new();
    let mut rows: Vec<f32> = Vec::new();
    let mut warnings = Vec::new();
    for (i, line) in lines {
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default();
        let vec: Vec<f32> = parts
            .map(|p| p.parse::<f32>())
            .collect::<core::result::Result<_, _>>()
            .map_err(|_| Error::Embedding(alloc::format!("line {}: bad number", i + 1)))?;
        let d = *dim.get_or_insert(vec.len());
        if vec.len() != d || d == 0 {
            return Err(Error::Embedding(alloc::format!(
                "line {}: expected {} values, found {}",
                i + 1,
                d,
                vec.len()
            )));
        }
        match words.get(word) {
            Some(r) => {
                warnings.push(alloc::format!("duplicate word '{}' at line {}, keeping last", word, i + 1));
                rows[r * d..(r + 1) * d].copy_from_slice(&vec);
            }
            None => {
                words.insert(word);
                rows.extend_from_slice(&vec);
            }
        }
    }
    let dim = dim.unwrap_or(0);
    if words.is_empty() {
        return Err(Error::Embedding("no vectors".into()));
    }
    let unknown = unknown_vector_init(&rows, dim, seed)?;
    Ok(LoadedEmbeddings {
        matrix: EmbeddingMatrix {
            words,
            dim,
            trainable: false,
            rows,
            unknown,
        },
        warnings,
    })
}

/// Draws each coordinate from a normal with that column's mean and variance.
pub fn unknown_vector_init(rows: &[f32], dim: usize, seed: u64) -> Result<Vec<f32>> {
    if dim == 0 || rows.len() < dim {
        return Err(Error::Embedding("cannot initialize unknown vector from zero rows".into()));
    }
    let n = rows.len() / dim;
    let mut rng = rng::stream(seed, "unknown-vector", &[]);
    let mut out = vec![0.0f32; dim];
    for (c, o) in out.iter_mut().enumerate() {
        let mean = (0..n).map(|r| rows[r * dim + c] as f64).sum::<f64>() / n as f64;
        let var = (0..n)
            .map(|r| {
                let d = rows[r * dim + c] as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n as f64;
        let normal = Normal::new(mean, Float::sqrt(var))
            .map_err(|_| Error::Embedding("non-finite embedding statistics".into()))?;
        *o = normal.sample(&mut rng) as f32;
    }
    Ok(out)
}

/// Gold targets of one sentence. `None` marks a value that is missing or
/// unseen in the lexicon; such positions never count as correct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Targets {
    pub upos: Vec<Option<usize>>,
    pub xpos: Vec<Option<usize>>,
    /// Per token, per attribute value index (NA when absent).
    pub feats: Vec<Vec<Option<usize>>>,
    /// `[BOW, lemma chars, EOW]` per token; empty when the lemma is unset.
    pub lemmas: Vec<Vec<usize>>,
    pub heads: Option<Vec<usize>>,
    pub deprels: Vec<Option<usize>>,
}

/// Index view of a sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSentence {
    pub forms: Vec<String>,
    /// Trainable-table rows, or rows of the fixed external matrix (`None` = unknown).
    pub word_rows: Vec<Option<usize>>,
    /// `[BOW, c₁..c_m, EOW]` per token.
    pub chars: Vec<Vec<usize>>,
    pub targets: Targets,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

fn opt_index(idx: &Index, s: &str) -> Option<usize> {
    if s.is_empty() {
        None
    } else {
        idx.get(s)
    }
}

/// Converts a sentence into indices, including any gold annotation present.
pub fn encode_sentence(
    s: &Sentence,
    lex: &Lexicon,
    schema: &FeatureSchema,
    emb: &EmbeddingMatrix,
) -> EncodedSentence {
    let toks = &s.tokens;
    let feats = toks
        .iter()
        .map(|t| {
            let mut v: Vec<Option<usize>> = vec![Some(NA); schema.len()];
            for (a, val) in t.feats.pairs() {
                if let Some(ai) = schema.attribute(a) {
                    v[ai] = schema.attributes[ai].1.get(val);
                }
            }
            v
        })
        .collect();
    EncodedSentence {
        forms: toks.iter().map(|t| t.form.clone()).collect(),
        word_rows: toks.iter().map(|t| emb.lookup(&t.form)).collect(),
        chars: toks.iter().map(|t| lex.wrap_chars(&t.form)).collect(),
        targets: Targets {
            upos: toks.iter().map(|t| opt_index(&lex.upos, &t.upos)).collect(),
            xpos: toks.iter().map(|t| opt_index(&lex.xpos, &t.xpos)).collect(),
            feats,
            lemmas: toks
                .iter()
                .map(|t| {
                    if t.lemma.is_empty() {
                        Vec::new()
                    } else {
                        lex.wrap_chars(&t.lemma)
                    }
                })
                .collect(),
            heads: s.heads(),
            deprels: toks.iter().map(|t| opt_index(&lex.deprel, &t.deprel)).collect(),
        },
    }
}

/// Inverse of the character encoding: drops reserved symbols.
pub fn decode_chars(lex: &Lexicon, chars: &[usize]) -> String {
    chars.iter().filter_map(|&c| lex.char_of(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::parse_conllu;

    fn tb() -> Treebank {
        parse_conllu(
            "1\tcar\tcar\tNOUN\tNN\tNumber=Sing\t0\troot\t_\t_\n\
             2\tcars\tcar\tNOUN\tNNS\tNumber=Plur\t1\tconj\t_\t_\n\n",
        )
        .unwrap()
    }

    #[test]
    fn lexicon_contents() {
        let (lex, schema) = build_lexicon(&tb());
        assert_eq!(lex.upos.items(), &["NOUN".to_string()]);
        assert_eq!(lex.xpos.len(), 2);
        assert_eq!(schema.attributes.len(), 1);
        assert_eq!(schema.attributes[0].0, "Number");
        assert_eq!(schema.attributes[0].1.items(), &["<na>", "Sing", "Plur"]);
        assert_eq!(build_lexicon(&tb()), (lex, schema));
    }

    #[test]
    fn reserved_chars_and_wrapping() {
        let (lex, _) = build_lexicon(&tb());
        assert_eq!(&lex.chars.items()[..4], &RESERVED_CHARS.map(String::from));
        assert_eq!(lex.wrap_chars("car"), vec![BOW, 4, 5, 6, EOW]);
        assert_eq!(lex.wrap_chars("cz"), vec![BOW, 4, UNK, EOW]);
        assert_eq!(decode_chars(&lex, &lex.wrap_chars("scar")), "scar");
    }

    #[test]
    fn encode_targets() {
        let t = tb();
        let (lex, schema) = build_lexicon(&t);
        let emb = EmbeddingMatrix::trainable(&t, 4);
        let mut s = t.sentences[0].clone();
        s.tokens[0].feats = Default::default();
        let e = encode_sentence(&s, &lex, &schema, &emb);
        assert_eq!(e.targets.feats[0], vec![Some(NA)]);
        assert_eq!(e.targets.feats[1], vec![Some(2)]);
        assert_eq!(e.word_rows, vec![Some(1), Some(2)]);
        assert_eq!(e.targets.heads, Some(vec![0, 1]));
        s.tokens[0].upos = "VERB".into();
        let e = encode_sentence(&s, &lex, &schema, &emb);
        assert_eq!(e.targets.upos[0], None);
    }

    #[test]
    fn lookup_falls_back_to_lowercase() {
        let e = parse_embeddings("car 1 2\nthe 3 4\n", 1).unwrap().matrix;
        assert_eq!(e.lookup("car"), Some(0));
        assert_eq!(e.lookup("Car"), Some(0));
        assert_eq!(e.lookup("bus"), None);
        assert_eq!(e.vector("The"), &[3.0, 4.0]);
        assert_eq!(e.vector("bus"), e.unknown.as_slice());
    }

    #[test]
    fn embedding_format() {
        let e = parse_embeddings("2 3\na 1 2 3\nb 4 5 6\n", 7).unwrap();
        assert_eq!(e.matrix.len(), 2);
        assert_eq!(e.matrix.dim, 3);
        assert!(parse_embeddings("2 3\n", 7).is_err());
        assert!(parse_embeddings("a 1 2\nb 1\n", 7).is_err());
        assert!(parse_embeddings("3 2\na 1 2 3\n", 7).is_err());
        let d = parse_embeddings("a 1 2\na 3 4\n", 7).unwrap();
        assert_eq!(d.matrix.len(), 1);
        assert_eq!(d.matrix.rows, vec![3.0, 4.0]);
        assert_eq!(d.warnings.len(), 1);
    }

    #[test]
    fn unknown_vector_edge_cases() {
        let v = unknown_vector_init(&[1.5, -2.0, 1.5, -2.0], 2, 3).unwrap();
        assert_eq!(v, vec![1.5, -2.0]);
        assert!(unknown_vector_init(&[], 2, 3).is_err());
        let rows = [1.0, 1.0, 3.0, 3.0];
        assert_eq!(unknown_vector_init(&rows, 2, 5).unwrap(), unknown_vector_init(&rows, 2, 5).unwrap());
    }

    #[test]
    fn unknown_vector_statistics() {
        // rows {(1,1),(3,3)}: column mean 2, variance 1
        let rows = [1.0f32, 1.0, 3.0, 3.0];
        let n = 10_000;
        let mut sum = [0.0f64; 2];
        for seed in 0..n {
            let v = unknown_vector_init(&rows, 2, seed).unwrap();
            sum[0] += v[0] as f64;
            sum[1] += v[1] as f64;
        }
        let tol = 3.0 * 1.0 / (n as f64).sqrt();
        for s in sum {
            assert!((s / n as f64 - 2.0).abs() < tol, "mean {}", s / n as f64);
        }
    }
}
