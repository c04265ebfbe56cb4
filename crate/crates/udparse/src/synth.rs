//! Synthetic English-like treebanks with UD annotation.
//!
//! Sentences come from a small grammar with agreement, tense, auxiliaries,
//! prepositional attachment, coordination, relative and adverbial clauses.
//! Every sentence is a single-rooted tree with lemmas, UPOS, PTB-style XPOS
//! and features, so the output can stand in for a real treebank in tests.

use rand::Rng as _;

use udparse_core::conllu::{MorphFeatureSet, Sentence, Token, Treebank};
use udparse_core::rng::{self, Rng};

struct Noun(&'static str, &'static str);

const NOUNS: &[Noun] = &[
    Noun("dog", "dogs"),
    Noun("cat", "cats"),
    Noun("child", "children"),
    Noun("mouse", "mice"),
    Noun("man", "men"),
    Noun("woman", "women"),
    Noun("teacher", "teachers"),
    Noun("city", "cities"),
    Noun("box", "boxes"),
    Noun("book", "books"),
    Noun("river", "rivers"),
    Noun("garden", "gardens"),
    Noun("house", "houses"),
    Noun("bird", "birds"),
    Noun("car", "cars"),
    Noun("tree", "trees"),
    Noun("friend", "friends"),
    Noun("student", "students"),
    Noun("letter", "letters"),
    Noun("table", "tables"),
    Noun("song", "songs"),
    Noun("farmer", "farmers"),
    Noun("apple", "apples"),
    Noun("story", "stories"),
    Noun("king", "kings"),
    Noun("window", "windows"),
    Noun("horse", "horses"),
    Noun("road", "roads"),
    Noun("girl", "girls"),
    Noun("boy", "boys"),
    Noun("knife", "knives"),
    Noun("wolf", "wolves"),
];

const PROPER: &[&str] = &["Anna", "Peter", "Maria", "London", "Paris", "Tom", "Lisa"];

/// base, third person singular, past, participle
struct Verb(&'static str, &'static str, &'static str, &'static str, bool);

const VERBS: &[Verb] = &[
    Verb("see", "sees", "saw", "seen", true),
    Verb("take", "takes", "took", "taken", true),
    Verb("like", "likes", "liked", "liked", true),
    Verb("find", "finds", "found", "found", true),
    Verb("eat", "eats", "ate", "eaten", true),
    Verb("write", "writes", "wrote", "written", true),
    Verb("watch", "watches", "watched", "watched", true),
    Verb("carry", "carries", "carried", "carried", true),
    Verb("buy", "buys", "bought", "bought", true),
    Verb("love", "loves", "loved", "loved", true),
    Verb("help", "helps", "helped", "helped", true),
    Verb("read", "reads", "read", "read", true),
    Verb("open", "opens", "opened", "opened", true),
    Verb("follow", "follows", "followed", "followed", true),
    Verb("visit", "visits", "visited", "visited", true),
    Verb("build", "builds", "built", "built", true),
    Verb("know", "knows", "knew", "known", true),
    Verb("bring", "brings", "brought", "brought", true),
    Verb("sleep", "sleeps", "slept", "slept", false),
    Verb("run", "runs", "ran", "run", false),
    Verb("walk", "walks", "walked", "walked", false),
    Verb("arrive", "arrives", "arrived", "arrived", false),
    Verb("laugh", "laughs", "laughed", "laughed", false),
    Verb("sing", "sings", "sang", "sung", false),
    Verb("swim", "swims", "swam", "swum", false),
    Verb("wait", "waits", "waited", "waited", false),
    Verb("fall", "falls", "fell", "fallen", false),
];

const ADJECTIVES: &[&str] = &[
    "big", "small", "old", "young", "red", "green", "happy", "quiet", "tall", "dark", "bright", "heavy", "strange",
    "little", "new",
];

const ADVERBS: &[&str] = &["quickly", "slowly", "often", "today", "yesterday", "always", "here", "loudly", "again"];

const PREPOSITIONS: &[&str] = &["in", "on", "with", "under", "near", "behind", "from", "to", "at"];

const NUMBERS: &[&str] = &["two", "three", "four", "five", "many"];

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Subject,
    Object,
}

#[derive(Clone, Copy, PartialEq)]
enum Tense {
    Present,
    Past,
    Future,
    Perfect,
    Progressive,
}

struct Builder<'r> {
    toks: Vec<Token>,
    r: &'r mut Rng,
}

fn feats(pairs: &[(&str, &str)]) -> MorphFeatureSet {
    MorphFeatureSet::from_pairs(pairs.iter().copied()).expect("distinct attributes")
}

fn gerund(base: &str) -> String {
    match base {
        "run" => "running".into(),
        "swim" => "swimming".into(),
        "sit" => "sitting".into(),
        b if b.ends_with('e') && b != "see" => format!("{}ing", &b[..b.len() - 1]),
        b => format!("{}ing", b),
    }
}

impl<'r> Builder<'r> {
    fn pick<T: Copy>(&mut self, xs: &[T]) -> T {
        xs[self.r.random_range(0..xs.len())]
    }

    fn chance(&mut self, p: f64) -> bool {
        self.r.random_bool(p)
    }

    fn push(&mut self, form: &str, lemma: &str, upos: &str, xpos: &str, f: &[(&str, &str)], deprel: &str) -> usize {
        let id = self.toks.len() + 1;
        self.toks.push(Token {
            id,
            form: form.into(),
            lemma: lemma.into(),
            upos: upos.into(),
            xpos: xpos.into(),
            feats: feats(f),
            head: None,
            deprel: deprel.into(),
            deps: String::new(),
            misc: String::new(),
        });
        id
    }

    fn attach(&mut self, dep: usize, head: usize) {
        self.toks[dep - 1].head = Some(head);
    }

    fn set_deprel(&mut self, id: usize, deprel: &str) {
        self.toks[id - 1].deprel = deprel.into();
    }

    /// Noun phrase; returns (head, person, plural).
    fn noun_phrase(&mut self, role: Role, depth: usize) -> (usize, u8, bool) {
        let roll: f64 = self.r.random();
        if roll < 0.15 {
            let (nom, acc, person, plural, gender): (&str, &str, u8, bool, Option<&str>) = self.pick(&[
                ("I", "me", 1, false, None),
                ("you", "you", 2, false, None),
                ("he", "him", 3, false, Some("Masc")),
                ("she", "her", 3, false, Some("Fem")),
                ("we", "us", 1, true, None),
                ("they", "them", 3, true, None),
            ]);
            let form = if role == Role::Subject { nom } else { acc };
            let case = if role == Role::Subject { "Nom" } else { "Acc" };
            let ps = person.to_string();
            let num = if plural { "Plur" } else { "Sing" };
            let mut f = vec![("Case", case), ("Number", num), ("Person", ps.as_str()), ("PronType", "Prs")];
            if let Some(g) = gender {
                f.push(("Gender", g));
            }
            let id = self.push(form, nom, "PRON", "PRP", &f, "");
            return (id, person, plural);
        }
        if roll < 0.25 {
            let name = self.pick(PROPER);
            let id = self.push(name, name, "PROPN", "NNP", &[("Number", "Sing")], "");
            return (id, 3, false);
        }
        let plural = self.chance(0.4);
        let mut pre = Vec::new();
        if plural && self.chance(0.15) {
            let n = self.pick(NUMBERS);
            let (upos, xpos, f): (&str, &str, &[(&str, &str)]) = if n == "many" {
                ("ADJ", "JJ", &[("Degree", "Pos")])
            } else {
                ("NUM", "CD", &[("NumType", "Card")])
            };
            let rel = if n == "many" { "amod" } else { "nummod" };
            pre.push(self.push(n, n, upos, xpos, f, rel));
        } else if !plural || self.chance(0.6) {
            let det: (&str, &str, &str, &[(&str, &str)]) = if plural {
                self.pick(&[
                    ("the", "the", "DT", &[("Definite", "Def"), ("PronType", "Art")][..]),
                    ("these", "this", "DT", &[("Number", "Plur"), ("PronType", "Dem")][..]),
                    ("those", "that", "DT", &[("Number", "Plur"), ("PronType", "Dem")][..]),
                    ("some", "some", "DT", &[("PronType", "Ind")][..]),
                    ("my", "my", "PRP$", &[("Person", "1"), ("Poss", "Yes"), ("PronType", "Prs")][..]),
                    ("their", "their", "PRP$", &[("Person", "3"), ("Poss", "Yes"), ("PronType", "Prs")][..]),
                ])
            } else {
                self.pick(&[
                    ("the", "the", "DT", &[("Definite", "Def"), ("PronType", "Art")][..]),
                    ("the", "the", "DT", &[("Definite", "Def"), ("PronType", "Art")][..]),
                    ("a", "a", "DT", &[("Definite", "Ind"), ("PronType", "Art")][..]),
                    ("this", "this", "DT", &[("Number", "Sing"), ("PronType", "Dem")][..]),
                    ("every", "every", "DT", &[("PronType", "Tot")][..]),
                    ("his", "his", "PRP$", &[("Person", "3"), ("Poss", "Yes"), ("PronType", "Prs")][..]),
                ])
            };
            let upos = "DET";
            pre.push(self.push(det.0, det.1, upos, det.2, det.3, "det"));
        }
        let adjs = if self.chance(0.35) { 1 + self.chance(0.25) as usize } else { 0 };
        for _ in 0..adjs {
            let a = self.pick(ADJECTIVES);
            pre.push(self.push(a, a, "ADJ", "JJ", &[("Degree", "Pos")], "amod"));
        }
        let noun = &NOUNS[self.r.random_range(0..NOUNS.len())];
        let (form, xpos, num) = if plural {
            (noun.1, "NNS", "Plur")
        } else {
            (noun.0, "NN", "Sing")
        };
        let head = self.push(form, noun.0, "NOUN", xpos, &[("Number", num)], "");
        for p in pre {
            self.attach(p, head);
        }
        if depth == 0 && self.chance(0.12) {
            let pp = self.prep_phrase(depth + 1);
            self.set_deprel(pp, "nmod");
            self.attach(pp, head);
        } else if depth == 0 && self.chance(0.08) {
            let rel = self.push("that", "that", "PRON", "WDT", &[("PronType", "Rel")], "nsubj");
            let v = self.verb_group(Tense::Past, 3, plural, depth + 1, true);
            self.attach(rel, v);
            self.set_deprel(v, "acl:relcl");
            self.attach(v, head);
        }
        if depth == 0 && role == Role::Object && self.chance(0.08) {
            let cc = self.push("and", "and", "CCONJ", "CC", &[], "cc");
            let (conj, _, _) = self.noun_phrase(Role::Object, depth + 1);
            self.attach(cc, conj);
            self.set_deprel(conj, "conj");
            self.attach(conj, head);
        }
        (head, 3, plural)
    }

    fn prep_phrase(&mut self, depth: usize) -> usize {
        let p = self.pick(PREPOSITIONS);
        let case = self.push(p, p, "ADP", "IN", &[], "case");
        let (n, _, _) = self.noun_phrase(Role::Object, depth);
        self.attach(case, n);
        n
    }

    /// Auxiliaries, main verb, object and modifiers; subject already pushed.
    /// Returns the main verb.
    fn verb_group(&mut self, tense: Tense, person: u8, plural: bool, depth: usize, relative: bool) -> usize {
        let verb = &VERBS[self.r.random_range(0..VERBS.len())];
        let third_sing = person == 3 && !plural;
        let mut auxes = Vec::new();
        let fin = |t: &str| -> Vec<(&'static str, String)> {
            vec![("Mood", "Ind".into()), ("Tense", t.into()), ("VerbForm", "Fin".into())]
        };
        let (form, xpos, vf): (String, &str, Vec<(&str, String)>) = match tense {
            Tense::Present => {
                if third_sing {
                    let mut f = fin("Pres");
                    f.push(("Number", "Sing".into()));
                    f.push(("Person", "3".into()));
                    (verb.1.into(), "VBZ", f)
                } else {
                    (verb.0.into(), "VBP", fin("Pres"))
                }
            }
            Tense::Past => (verb.2.into(), "VBD", fin("Past")),
            Tense::Future => {
                auxes.push(self.push("will", "will", "AUX", "MD", &[("VerbForm", "Fin")], "aux"));
                (verb.0.into(), "VB", vec![("VerbForm", "Inf".into())])
            }
            Tense::Perfect => {
                let (f, x) = if third_sing { ("has", "VBZ") } else { ("have", "VBP") };
                auxes.push(self.push(f, "have", "AUX", x, &[("Mood", "Ind"), ("Tense", "Pres"), ("VerbForm", "Fin")], "aux"));
                (verb.3.into(), "VBN", vec![("Tense", "Past".into()), ("VerbForm", "Part".into())])
            }
            Tense::Progressive => {
                let past = self.chance(0.5);
                let f = match (past, person, plural) {
                    (false, 1, false) => "am",
                    (false, 3, false) => "is",
                    (false, _, _) => "are",
                    (true, 2, _) | (true, _, true) => "were",
                    (true, _, false) => "was",
                };
                let t = if past { "Past" } else { "Pres" };
                let x = match f {
                    "is" => "VBZ",
                    "am" | "are" => "VBP",
                    _ => "VBD",
                };
                auxes.push(self.push(f, "be", "AUX", x, &[("Mood", "Ind"), ("Tense", t), ("VerbForm", "Fin")], "aux"));
                (gerund(verb.0), "VBG", vec![("Tense", "Pres".into()), ("VerbForm", "Part".into())])
            }
        };
        if !auxes.is_empty() && !relative && self.chance(0.12) {
            auxes.push(self.push("not", "not", "PART", "RB", &[("Polarity", "Neg")], "advmod"));
        }
        let vf_ref: Vec<(&str, &str)> = vf.iter().map(|(a, v)| (*a, v.as_str())).collect();
        let v = self.push(&form, verb.0, "VERB", xpos, &vf_ref, "");
        for a in auxes {
            self.attach(a, v);
        }
        if verb.4 && (relative || self.chance(0.92)) {
            let (o, _, _) = self.noun_phrase(Role::Object, depth);
            self.set_deprel(o, "obj");
            self.attach(o, v);
        }
        if !relative && self.chance(0.4) {
            let pp = self.prep_phrase(depth.max(1));
            self.set_deprel(pp, "obl");
            self.attach(pp, v);
        }
        if !relative && self.chance(0.25) {
            let a = self.pick(ADVERBS);
            let id = self.push(a, a, "ADV", "RB", &[], "advmod");
            self.attach(id, v);
        }
        v
    }

    fn tense(&mut self) -> Tense {
        self.pick(&[
            Tense::Present,
            Tense::Present,
            Tense::Past,
            Tense::Past,
            Tense::Future,
            Tense::Perfect,
            Tense::Progressive,
        ])
    }

    fn clause(&mut self, depth: usize) -> usize {
        let (subj, person, plural) = self.noun_phrase(Role::Subject, depth);
        self.set_deprel(subj, "nsubj");
        let tense = self.tense();
        let v = self.verb_group(tense, person, plural, depth, false);
        self.attach(subj, v);
        v
    }

    fn sentence(&mut self) -> usize {
        let front = if self.chance(0.08) {
            let a = self.pick(&["Yesterday", "Today", "Often"]);
            let adv = self.push(a, &a.to_lowercase(), "ADV", "RB", &[], "advmod");
            let comma = self.push(",", ",", "PUNCT", ",", &[], "punct");
            Some((adv, comma))
        } else {
            None
        };
        let root = self.clause(0);
        self.set_deprel(root, "root");
        if let Some((adv, comma)) = front {
            self.attach(adv, root);
            self.attach(comma, root);
        }
        if self.chance(0.12) {
            let m = self.pick(&["because", "when", "while"]);
            let mark = self.push(m, m, "SCONJ", "IN", &[], "mark");
            let sub = self.clause(1);
            self.attach(mark, sub);
            self.set_deprel(sub, "advcl");
            self.attach(sub, root);
        } else if self.chance(0.08) {
            let c = self.pick(&["and", "but"]);
            let cc = self.push(c, c, "CCONJ", "CC", &[], "cc");
            let conj = self.clause(1);
            self.attach(cc, conj);
            self.set_deprel(conj, "conj");
            self.attach(conj, root);
        }
        if self.chance(0.9) {
            let p = self.push(".", ".", "PUNCT", ".", &[], "punct");
            self.attach(p, root);
        }
        root
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// One sentence from the grammar.
pub fn sentence(r: &mut Rng, id: usize) -> Sentence {
    let mut b = Builder { toks: Vec::new(), r };
    let root = b.sentence();
    b.toks[root - 1].head = Some(0);
    let mut toks = b.toks;
    debug_assert!(toks.iter().all(|t| t.head.is_some()));
    toks[0].form = capitalize(&toks[0].form);
    let text = toks
        .iter()
        .map(|t| t.form.as_str())
        .collect::<Vec<_>>()
        .join(" ")
        .replace(" ,", ",")
        .replace(" .", ".");
    Sentence {
        comments: vec![format!("# sent_id = {}", id), format!("# text = {}", text)],
        mwt_lines: Vec::new(),
        tokens: toks,
    }
}

/// `n` sentences; deterministic in `(seed, label)`.
pub fn treebank(n: usize, seed: u64, label: &str) -> Treebank {
    let mut r = rng::stream(seed, label, &[]);
    Treebank {
        sentences: (1..=n).map(|i| sentence(&mut r, i)).collect(),
    }
}

/// Raw text, one whitespace-tokenized sentence per line.
pub fn raw_corpus(n: usize, seed: u64, label: &str) -> String {
    let tb = treebank(n, seed, label);
    let mut out = String::new();
    for s in &tb.sentences {
        let forms: Vec<&str> = s.tokens.iter().map(|t| t.form.as_str()).collect();
        out.push_str(&forms.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use udparse_core::conllu::{parse_conllu, validate_tree, write_conllu};

    #[test]
    fn sentences_are_valid_trees_and_round_trip() {
        let tb = treebank(300, 7, "test");
        for s in &tb.sentences {
            assert!(validate_tree(s).unwrap().is_valid());
            for t in &s.tokens {
                assert!(!t.lemma.is_empty() && !t.upos.is_empty() && !t.xpos.is_empty() && !t.deprel.is_empty());
            }
        }
        let text = write_conllu(&tb);
        assert_eq!(parse_conllu(&text).unwrap(), tb);
    }

    #[test]
    fn deterministic_and_varied() {
        assert_eq!(treebank(20, 1, "a"), treebank(20, 1, "a"));
        assert_ne!(treebank(20, 1, "a"), treebank(20, 2, "a"));
        let tb = treebank(500, 3, "v");
        let mean = tb.word_count() as f64 / tb.len() as f64;
        assert!(mean > 5.0 && mean < 15.0, "{}", mean);
    }

    #[test]
    fn raw_lines() {
        let raw = raw_corpus(10, 4, "raw");
        assert_eq!(raw.lines().count(), 10);
    }

    #[test]
    fn gerunds() {
        assert_eq!(gerund("write"), "writing");
        assert_eq!(gerund("see"), "seeing");
        assert_eq!(gerund("swim"), "swimming");
        assert_eq!(gerund("watch"), "watching");
    }
}
