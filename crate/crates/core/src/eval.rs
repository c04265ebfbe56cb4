//! Scores of predicted treebanks against gold, with identity alignment.
//!
//! `mlas_style` and `blex_style` are simplified content-word metrics: a gold
//! token counts when its base relation is not a function-word relation, and
//! the fraction is taken over those tokens only.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::conllu::{Sentence, Token, Treebank};
use crate::error::{Error, Result};
use crate::model::JointModel;
use crate::tensor::Real;

/// Relations excluded from the content-word metrics.
pub const FUNCTION_DEPRELS: [&str; 8] = ["aux", "cop", "mark", "det", "clf", "case", "cc", "punct"];

/// Whether a (possibly subtyped) relation counts as a content relation.
pub fn is_content_deprel(deprel: &str) -> bool {
    let base = deprel.split(':').next().unwrap_or("");
    !base.is_empty() && !FUNCTION_DEPRELS.contains(&base)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub uas: f64,
    pub las: f64,
    pub upos_acc: f64,
    pub xpos_acc: f64,
    pub feats_acc: f64,
    pub lemma_acc: f64,
    pub mlas_style: f64,
    pub blex_style: f64,
    pub cycle_rate: f64,
    pub tokens: usize,
    pub sentences: usize,
}

impl ScoreReport {
    /// Aligned two-column table, percentages with two decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let rows = [
            ("UAS", self.uas),
            ("LAS", self.las),
            ("UPOS", self.upos_acc),
            ("XPOS", self.xpos_acc),
            ("UFeats", self.feats_acc),
            ("Lemmas", self.lemma_acc),
            ("MLAS-style", self.mlas_style),
            ("BLEX-style", self.blex_style),
            ("Cycles", self.cycle_rate),
        ];
        for (name, v) in rows {
            let _ = writeln!(out, "{:<12}{:>8.2}", name, 100.0 * v);
        }
        let _ = writeln!(out, "{:<12}{:>8}", "Tokens", self.tokens);
        let _ = writeln!(out, "{:<12}{:>8}", "Sentences", self.sentences);
        out
    }
}

/// Checks that both treebanks have the same sentences and forms.
pub fn check_alignment(gold: &Treebank, pred: &Treebank) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Alignment(format!(
            "gold has {} sentences, prediction has {}",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (g, p)) in gold.sentences.iter().zip(&pred.sentences).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Alignment(format!(
                "sentence {}: gold has {} tokens, prediction has {}",
                i + 1,
                g.len(),
                p.len()
            )));
        }
        for (gt, pt) in g.tokens.iter().zip(&p.tokens) {
            if gt.form != pt.form {
                return Err(Error::Alignment(format!(
                    "sentence {} token {}: form {:?} vs {:?}",
                    i + 1,
                    gt.id,
                    gt.form,
                    pt.form
                )));
            }
        }
    }
    Ok(())
}

fn pairs<'a>(gold: &'a Treebank, pred: &'a Treebank) -> impl Iterator<Item = (&'a Token, &'a Token)> {
    gold.sentences
        .iter()
        .zip(&pred.sentences)
        .flat_map(|(g, p): (&Sentence, &Sentence)| g.tokens.iter().zip(&p.tokens))
}

fn ratio(hit: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

fn head_ok(g: &Token, p: &Token) -> bool {
    g.head.is_some() && g.head == p.head
}

fn label_ok(g: &Token, p: &Token) -> bool {
    head_ok(g, p) && g.deprel == p.deprel
}

/// `(uas, las)` over tokens with a gold head.
pub fn attachment_scores(gold: &Treebank, pred: &Treebank) -> Result<(f64, f64)> {
    check_alignment(gold, pred)?;
    let (mut total, mut u, mut l) = (0, 0, 0);
    for (g, p) in pairs(gold, pred) {
        if g.head.is_none() {
            continue;
        }
        total += 1;
        u += head_ok(g, p) as usize;
        l += label_ok(g, p) as usize;
    }
    Ok((ratio(u, total), ratio(l, total)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggingScores {
    pub upos: f64,
    pub xpos: f64,
    pub feats: f64,
    pub lemma: f64,
}

/// Exact-match accuracies over all tokens. Feature sets are kept in
/// canonical order, so equality is set equality.
pub fn tagging_scores(gold: &Treebank, pred: &Treebank) -> Result<TaggingScores> {
    check_alignment(gold, pred)?;
    let (mut n, mut u, mut x, mut f, mut l) = (0, 0, 0, 0, 0);
    for (g, p) in pairs(gold, pred) {
        n += 1;
        u += (g.upos == p.upos) as usize;
        x += (g.xpos == p.xpos) as usize;
        f += (g.feats == p.feats) as usize;
        l += (g.lemma == p.lemma) as usize;
    }
    Ok(TaggingScores {
        upos: ratio(u, n),
        xpos: ratio(x, n),
        feats: ratio(f, n),
        lemma: ratio(l, n),
    })
}

fn content_score(gold: &Treebank, pred: &Treebank, extra: impl Fn(&Token, &Token) -> bool) -> Result<f64> {
    check_alignment(gold, pred)?;
    let (mut total, mut hit) = (0, 0);
    for (g, p) in pairs(gold, pred) {
        if g.head.is_none() || !is_content_deprel(&g.deprel) {
            continue;
        }
        total += 1;
        hit += (label_ok(g, p) && extra(g, p)) as usize;
    }
    Ok(ratio(hit, total))
}

/// Content tokens with correct head, relation, UPOS and features.
pub fn mlas_style(gold: &Treebank, pred: &Treebank) -> Result<f64> {
    content_score(gold, pred, |g, p| g.upos == p.upos && g.feats == p.feats)
}

/// Content tokens with correct head, relation and lemma.
pub fn blex_style(gold: &Treebank, pred: &Treebank) -> Result<f64> {
    content_score(gold, pred, |g, p| g.lemma == p.lemma)
}

/// LAS restricted to content tokens; bounds both composite metrics.
pub fn content_las(gold: &Treebank, pred: &Treebank) -> Result<f64> {
    content_score(gold, pred, |_, _| true)
}

/// All metrics except `cycle_rate`, which needs the model (left at 0).
pub fn score(gold: &Treebank, pred: &Treebank) -> Result<ScoreReport> {
    let (uas, las) = attachment_scores(gold, pred)?;
    let t = tagging_scores(gold, pred)?;
    Ok(ScoreReport {
        uas,
        las,
        upos_acc: t.upos,
        xpos_acc: t.xpos,
        feats_acc: t.feats,
        lemma_acc: t.lemma,
        mlas_style: mlas_style(gold, pred)?,
        blex_style: blex_style(gold, pred)?,
        cycle_rate: 0.0,
        tokens: gold.word_count(),
        sentences: gold.len(),
    })
}

/// Most frequent relation in a treebank; ties go to the lexicographically
/// smallest. `"dep"` when there are none.
pub fn most_frequent_deprel(tb: &Treebank) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in tb.sentences.iter().flat_map(|s| &s.tokens) {
        if !t.deprel.is_empty() {
            *counts.entry(t.deprel.as_str()).or_default() += 1;
        }
    }
    let mut best: Option<(&str, usize)> = None;
    for (d, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((d, c));
        }
    }
    best.map(|(d, _)| d.into()).unwrap_or_else(|| "dep".into())
}

/// Attaches every token to the previous one (the first to ROOT) with a
/// fixed relation.
pub fn baseline_prev_word(tb: &Treebank, deprel: &str) -> Treebank {
    let mut out = tb.clone();
    for s in &mut out.sentences {
        for (i, t) in s.tokens.iter_mut().enumerate() {
            t.head = Some(i);
            t.deprel = deprel.into();
        }
    }
    out
}

/// UAS and greedy cycle rate of two models on one treebank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub uas_without: f64,
    pub uas_with: f64,
    pub cycles_without: f64,
    pub cycles_with: f64,
}

impl AblationReport {
    /// Reference averages printed under each report.
    pub const REFERENCE: AblationReport = AblationReport {
        uas_without: 0.8676,
        uas_with: 0.8675,
        cycles_without: 0.0570,
        cycles_with: 0.0484,
    };

    pub fn to_text(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16}{:>18}{:>20}", "", "UAS", "% Cycles");
        let _ = writeln!(out, "{:<16}{:>9}{:>9}{:>10}{:>10}", "Treebank", "without", "with", "without", "with");
        let row = |out: &mut String, label: &str, r: &AblationReport| {
            let _ = writeln!(
                out,
                "{:<16}{:>9.2}{:>9.2}{:>10.2}{:>10.2}",
                label,
                100.0 * r.uas_without,
                100.0 * r.uas_with,
                100.0 * r.cycles_without,
                100.0 * r.cycles_with
            );
        };
        row(&mut out, name, self);
        row(&mut out, "reference avg", &Self::REFERENCE);
        out
    }
}

pub fn ablation_report<T: Real>(with: &JointModel<T>, without: &JointModel<T>, dev: &Treebank) -> Result<AblationReport> {
    let uas = |m: &JointModel<T>| -> Result<f64> { Ok(attachment_scores(dev, &m.predict(dev)?)?.0) };
    Ok(AblationReport {
        uas_without: uas(without)?,
        uas_with: uas(with)?,
        cycles_without: without.cycle_rate(dev)?,
        cycles_with: with.cycle_rate(dev)?,
    })
}
