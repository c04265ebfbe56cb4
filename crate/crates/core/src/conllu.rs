//! CoNLL-U treebanks: data model, reader, writer and tree validation.
//!
//! Only syntactic words are modeled. Comment and multiword-token lines are
//! carried verbatim so that a file survives a read/write cycle; the only
//! normalization applied on output is sorting of feature attributes.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Morphological features of one word, kept sorted by attribute.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphFeatureSet {
    pairs: Vec<(String, String)>,
}

fn attr_order(a: &str, b: &str) -> Ordering {
    let la = a.chars().flat_map(char::to_lowercase);
    let lb = b.chars().flat_map(char::to_lowercase);
    la.cmp(lb).then_with(|| a.cmp(b))
}

impl MorphFeatureSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from pairs; `None` if an attribute repeats.
    pub fn from_pairs<I, A, V>(pairs: I) -> Option<Self>
    where
        I: IntoIterator<Item = (A, V)>,
        A: Into<String>,
        V: Into<String>,
    {
        let mut set = MorphFeatureSet::new();
        for (a, v) in pairs {
            if !set.insert(a.into(), v.into()) {
                return None;
            }
        }
        Some(set)
    }

    /// Parses `Attr=Val|Attr=Val` or `_`.
    pub fn parse(field: &str) -> core::result::Result<Self, String> {
        if field == "_" || field.is_empty() {
            return Ok(Self::new());
        }
        let mut set = MorphFeatureSet::new();
        for item in field.split('|') {
            let (a, v) = item
                .split_once('=')
                .ok_or_else(|| alloc::format!("feature '{}' lacks '='", item))?;
            if a.is_empty() || v.is_empty() {
                return Err(alloc::format!("empty attribute or value in '{}'", item));
            }
            if !set.insert(a.to_string(), v.to_string()) {
                return Err(alloc::format!("duplicate attribute '{}'", a));
            }
        }
        Ok(set)
    }

    /// Inserts a pair, returning `false` when the attribute already exists.
    pub fn insert(&mut self, attr: String, value: String) -> bool {
        match self
            .pairs
            .binary_search_by(|(a, _)| attr_order(a, &attr))
        {
            Ok(_) => false,
            Err(pos) => {
                self.pairs.insert(pos, (attr, value));
                true
            }
        }
    }

    pub fn get(&self, attr: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(a, _)| a == attr)
            .map(|(_, v)| v.as_str())
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }
}

impl core::fmt::Display for MorphFeatureSet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.pairs.is_empty() {
            return f.write_str("_");
        }
        for (i, (a, v)) in self.pairs.iter().enumerate() {
            if i > 0 {
                f.write_char('|')?;
            }
            write!(f, "{}={}", a, v)?;
        }
        Ok(())
    }
}

/// One syntactic word. Empty strings stand for `_`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: MorphFeatureSet,
    pub head: Option<usize>,
    pub deprel: String,
    /// DEPS column, kept verbatim.
    pub deps: String,
    /// MISC column, kept verbatim.
    pub misc: String,
}

impl Token {
    /// A token carrying only its form.
    pub fn with_form(id: usize, form: impl Into<String>) -> Self {
        Token {
            id,
            form: form.into(),
            ..Token::default()
        }
    }
}

/// Verbatim multiword-token line such as `1-2\tdu\t_...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiwordLine {
    pub first: usize,
    pub last: usize,
    pub line: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub comments: Vec<String>,
    pub mwt_lines: Vec<MultiwordLine>,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Sentence of form-only tokens.
    pub fn from_forms<S: AsRef<str>>(forms: &[S]) -> Self {
        Sentence {
            tokens: forms
                .iter()
                .enumerate()
                .map(|(i, f)| Token::with_form(i + 1, f.as_ref()))
                .collect(),
            ..Sentence::default()
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Heads of all tokens, or `None` if any is unset.
    pub fn heads(&self) -> Option<Vec<usize>> {
        self.tokens.iter().map(|t| t.head).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Treebank {
    pub sentences: Vec<Sentence>,
}

impl Treebank {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    fn any_token(&self, f: impl Fn(&Token) -> bool) -> bool {
        self.sentences.iter().flat_map(|s| &s.tokens).any(f)
    }

    pub fn has_lemmas(&self) -> bool {
        self.any_token(|t| !t.lemma.is_empty())
    }

    pub fn has_feats(&self) -> bool {
        self.any_token(|t| !t.feats.is_empty())
    }

    pub fn has_xpos(&self) -> bool {
        self.any_token(|t| !t.xpos.is_empty())
    }

    pub fn has_upos(&self) -> bool {
        self.any_token(|t| !t.upos.is_empty())
    }

    pub fn has_trees(&self) -> bool {
        !self.is_empty() && self.sentences.iter().all(|s| s.heads().is_some())
    }
}

fn field(s: &str) -> String {
    if s == "_" {
        String::new()
    } else {
        s.to_string()
    }
}

fn out(s: &str) -> &str {
    if s.is_empty() {
        "_"
    } else {
        s
    }
}

fn parse_range(id: &str) -> Option<(usize, usize)> {
    let (a, b) = id.split_once('-')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

fn finish_sentence(
    mut s: Sentence,
    first_line: usize,
    head_lines: &[(usize, usize)],
    sentences: &mut Vec<Sentence>,
) -> Result<()> {
    if s.tokens.is_empty() {
        if s.comments.is_empty() && s.mwt_lines.is_empty() {
            return Ok(());
        }
        return Err(Error::parse(first_line, "sentence without tokens"));
    }
    let n = s.tokens.len();
    for &(line, head) in head_lines {
        if head > n {
            return Err(Error::parse(
                line,
                alloc::format!("head {} out of range for sentence of {} words", head, n),
            ));
        }
    }
    for m in &s.mwt_lines {
        if m.last > n {
            return Err(Error::parse(
                first_line,
                alloc::format!("multiword range {}-{} exceeds sentence", m.first, m.last),
            ));
        }
    }
    s.tokens.shrink_to_fit();
    sentences.push(s);
    Ok(())
}

/// Parses a CoNLL-U document.
pub fn parse_conllu(text: &str) -> Result<Treebank> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    let mut first_line = 1;
    let mut head_lines: Vec<(usize, usize)> = Vec::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let lineno = idx + 1;
        if raw.is_empty() {
            finish_sentence(
                core::mem::take(&mut current),
                first_line,
                &head_lines,
                &mut sentences,
            )?;
            head_lines.clear();
            first_line = lineno + 1;
            continue;
        }
        if raw.starts_with('#') {
            if !current.tokens.is_empty() || !current.mwt_lines.is_empty() {
                return Err(Error::parse(lineno, "comment line inside sentence body"));
            }
            current.comments.push(raw.to_string());
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                lineno,
                alloc::format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.contains('.') {
            return Err(Error::parse(lineno, "empty nodes are not supported"));
        }
        if id.contains('-') {
            let (first, last) = parse_range(id)
                .filter(|(a, b)| a <= b && *a >= 1)
                .ok_or_else(|| Error::parse(lineno, alloc::format!("bad range id '{}'", id)))?;
            if first != current.tokens.len() + 1 {
                return Err(Error::parse(lineno, "multiword range does not start at next word"));
            }
            current.mwt_lines.push(MultiwordLine {
                first,
                last,
                line: raw.to_string(),
            });
            continue;
        }
        let id: usize = id
            .parse()
            .map_err(|_| Error::parse(lineno, alloc::format!("bad word id '{}'", cols[0])))?;
        if id != current.tokens.len() + 1 {
            return Err(Error::parse(
                lineno,
                alloc::format!("non-contiguous id {}, expected {}", id, current.tokens.len() + 1),
            ));
        }
        let head = match cols[6] {
            "_" => None,
            h => {
                let h: usize = h
                    .parse()
                    .map_err(|_| Error::parse(lineno, alloc::format!("bad head '{}'", h)))?;
                if h == id {
                    return Err(Error::parse(lineno, "token is its own head"));
                }
                head_lines.push((lineno, h));
                Some(h)
            }
        };
        let feats = MorphFeatureSet::parse(cols[5]).map_err(|m| Error::parse(lineno, m))?;
        current.tokens.push(Token {
            id,
            form: cols[1].to_string(),
            lemma: field(cols[2]),
            upos: field(cols[3]),
            xpos: field(cols[4]),
            feats,
            head,
            deprel: field(cols[7]),
            deps: field(cols[8]),
            misc: field(cols[9]),
        });
    }
    finish_sentence(current, first_line, &head_lines, &mut sentences)?;
    Ok(Treebank { sentences })
}

/// Serializes a treebank. Each sentence is followed by a blank line.
pub fn write_conllu(tb: &Treebank) -> String {
    let mut s = String::new();
    for sent in &tb.sentences {
        for c in &sent.comments {
            s.push_str(c);
            s.push('\n');
        }
        let mut mwt = sent.mwt_lines.iter().peekable();
        for tok in &sent.tokens {
            while let Some(m) = mwt.next_if(|m| m.first == tok.id) {
                s.push_str(&m.line);
                s.push('\n');
            }
            let head = match tok.head {
                Some(h) => alloc::format!("{}", h),
                None => "_".to_string(),
            };
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                tok.id,
                tok.form,
                out(&tok.lemma),
                out(&tok.upos),
                out(&tok.xpos),
                tok.feats,
                head,
                out(&tok.deprel),
                out(&tok.deps),
                out(&tok.misc)
            );
        }
        s.push('\n');
    }
    s
}

/// Reads one whitespace-tokenized sentence per line. Blank lines are skipped.
pub fn load_raw_corpus(text: &str) -> Result<Treebank> {
    let sentences: Vec<Sentence> = text
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|forms| !forms.is_empty())
        .map(|forms| Sentence::from_forms(&forms))
        .collect();
    if sentences.is_empty() {
        return Err(Error::InvalidInput("raw corpus contains no sentences".into()));
    }
    Ok(Treebank { sentences })
}

/// Result of checking a head function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeReport {
    /// Tokens on the first cycle found, in increasing order; empty if none.
    pub cycle: Vec<usize>,
    /// Tokens attached to ROOT.
    pub root_children: Vec<usize>,
    /// Tokens with a head outside `0..=n`.
    pub out_of_range: Vec<usize>,
}

impl TreeReport {
    /// Every token reaches ROOT: acyclic with valid heads.
    pub fn is_tree(&self) -> bool {
        self.cycle.is_empty() && self.out_of_range.is_empty() && !self.root_children.is_empty()
    }

    pub fn single_root(&self) -> bool {
        self.root_children.len() == 1
    }

    /// A tree with exactly one child of ROOT.
    pub fn is_valid(&self) -> bool {
        self.is_tree() && self.single_root()
    }
}

/// Checks a head vector where `heads[i]` is the head of token `i + 1`.
pub fn check_heads(heads: &[usize]) -> TreeReport {
    let n = heads.len();
    let out_of_range: Vec<usize> = (1..=n).filter(|&i| heads[i - 1] > n).collect();
    let root_children: Vec<usize> = (1..=n).filter(|&i| heads[i - 1] == 0).collect();
    // 0 = unvisited, 1 = on current path, 2 = reaches root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    let mut cycle = Vec::new();
    for start in 1..=n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        loop {
            if v > n || state[v] == 2 {
                break;
            }
            if state[v] == 1 {
                if cycle.is_empty() {
                    let pos = path.iter().position(|&u| u == v).unwrap_or(0);
                    cycle = path[pos..].to_vec();
                    cycle.sort_unstable();
                }
                break;
            }
            state[v] = 1;
            path.push(v);
            v = heads[v - 1];
        }
        for u in path {
            state[u] = 2;
        }
    }
    TreeReport {
        cycle,
        root_children,
        out_of_range,
    }
}

/// Validates the head function of a sentence.
pub fn validate_tree(s: &Sentence) -> Result<TreeReport> {
    let heads = s
        .heads()
        .ok_or_else(|| Error::InvalidInput("sentence has unset heads".into()))?;
    Ok(check_heads(&heads))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "1\tThe\tthe\tDET\tDT\tDefinite=Def|PronType=Art\t2\tdet\t_\t_\n\
                       2\tcar\tcar\tNOUN\tNN\tNumber=Sing\t0\troot\t_\tSpaceAfter=No\n\n";

    #[test]
    fn parses_two_token_sentence() {
        let tb = parse_conllu(TWO).unwrap();
        assert_eq!(tb.len(), 1);
        let s = &tb.sentences[0];
        assert_eq!(s.len(), 2);
        assert_eq!(s.tokens[0].upos, "DET");
        assert_eq!(s.tokens[0].head, Some(2));
        assert_eq!(s.tokens[1].head, Some(0));
        assert_eq!(s.tokens[1].feats.get("Number"), Some("Sing"));
        assert_eq!(write_conllu(&tb), TWO);
    }

    #[test]
    fn empty_document_has_no_sentences() {
        assert!(parse_conllu("").unwrap().is_empty());
        assert_eq!(write_conllu(&Treebank::default()), "");
    }

    #[test]
    fn nine_columns_is_an_error_with_line_number() {
        let text = "# c\n1\ta\ta\tX\t_\t_\t0\troot\t_\n\n";
        match parse_conllu(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("10"));
            }
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn rejects_bad_structure() {
        let gap = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n3\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n\n";
        assert!(matches!(parse_conllu(gap), Err(Error::Parse { line: 2, .. })));
        let far = "1\ta\t_\t_\t_\t_\t5\troot\t_\t_\n\n";
        assert!(matches!(parse_conllu(far), Err(Error::Parse { line: 1, .. })));
        let empty_node = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n1.1\tb\t_\t_\t_\t_\t_\t_\t_\t_\n\n";
        assert!(matches!(parse_conllu(empty_node), Err(Error::Parse { line: 2, .. })));
        let dup = "1\ta\t_\t_\t_\tA=1|A=2\t0\troot\t_\t_\n\n";
        assert!(parse_conllu(dup).is_err());
    }

    #[test]
    fn multiword_lines_and_comments_round_trip() {
        let text = "# sent_id = 1\n# text = du chat\n\
                    1-2\tdu\t_\t_\t_\t_\t_\t_\t_\t_\n\
                    1\tde\tde\tADP\t_\t_\t3\tcase\t_\t_\n\
                    2\tle\tle\tDET\t_\tDefinite=Def\t3\tdet\t_\t_\n\
                    3\tchat\tchat\tNOUN\t_\tGender=Masc|Number=Sing\t0\troot\t0:root\t_\n\n";
        let tb = parse_conllu(text).unwrap();
        assert_eq!(tb.sentences[0].mwt_lines.len(), 1);
        assert_eq!(tb.sentences[0].comments.len(), 2);
        assert_eq!(write_conllu(&tb), text);
    }

    #[test]
    fn feats_are_sorted_case_insensitively_on_output() {
        let text = "1\ta\t_\t_\t_\tNumber=Sing|Case=Nom|abbr=Yes\t0\troot\t_\t_\n\n";
        let tb = parse_conllu(text).unwrap();
        let written = write_conllu(&tb);
        assert!(written.contains("abbr=Yes|Case=Nom|Number=Sing"));
        assert_eq!(parse_conllu(&written).unwrap(), tb);
    }

    #[test]
    fn unset_lemma_is_written_as_underscore() {
        let mut s = Sentence::from_forms(&["car"]);
        s.tokens[0].head = Some(0);
        let text = write_conllu(&Treebank { sentences: vec![s] });
        assert_eq!(text.split('\t').nth(2), Some("_"));
    }

    #[test]
    fn validate_examples() {
        let r = check_heads(&[2, 0]);
        assert!(r.is_valid());
        let r = check_heads(&[2, 1]);
        assert!(!r.is_tree());
        assert_eq!(r.cycle, vec![1, 2]);
        let r = check_heads(&[0, 0]);
        assert!(r.is_tree());
        assert!(!r.single_root());
        assert_eq!(r.root_children, vec![1, 2]);

        let s = Sentence::from_forms(&["a"]);
        assert!(validate_tree(&s).is_err());
    }

    #[test]
    fn raw_corpus_splits_on_whitespace() {
        let tb = load_raw_corpus("the car\n").unwrap();
        assert_eq!(tb.len(), 1);
        assert_eq!(tb.sentences[0].len(), 2);
        assert!(tb.sentences[0].tokens.iter().all(|t| t.lemma.is_empty() && t.head.is_none()));
        let tb = load_raw_corpus("a b\nc\td  e\nf\n").unwrap();
        assert_eq!(tb.len(), 3);
        assert_eq!(tb.sentences[1].tokens[1].form, "d");
        assert!(load_raw_corpus("").is_err());
        assert!(load_raw_corpus("\n  \n").is_err());
    }
}
