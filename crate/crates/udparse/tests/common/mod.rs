#![allow(dead_code)]

use std::path::PathBuf;

use tempfile::TempDir;

use udparse::config::{Profile, RunConfig};
use udparse_core::conllu::{write_conllu, Treebank};

pub const OVERFIT: &str = include_str!("../data/overfit.conllu");

/// Scratch directory for one test.
pub struct Scratch {
    pub dir: TempDir,
}

impl Scratch {
    pub fn new() -> Self {
        Scratch {
            dir: tempfile::tempdir().expect("temp dir"),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).expect("write scratch file");
        p
    }

    pub fn treebank(&self, name: &str, tb: &Treebank) -> PathBuf {
        self.write(name, &write_conllu(tb))
    }
}

/// Desk profile shrunk further so a few epochs take well under a second.
pub fn tiny_config(s: &Scratch, train: PathBuf, epochs: usize) -> RunConfig {
    let mut c = RunConfig::for_profile(Profile::Desk);
    c.model.trainable_word_dim = 8;
    c.model.word_dim = 8;
    c.model.lstm_hidden = 8;
    c.model.arc_dim = 8;
    c.model.label_dim = 8;
    c.training.max_epochs = epochs;
    c.paths.train = Some(train);
    c.paths.model = Some(s.path("tiny.model"));
    c
}

/// Word vectors for every form of a treebank, 4 dimensions.
pub fn embeddings_for(tb: &Treebank) -> String {
    let mut words: Vec<&str> = tb.sentences.iter().flat_map(|s| &s.tokens).map(|t| t.form.as_str()).collect();
    words.sort_unstable();
    words.dedup();
    let mut out = format!("{} 4\n", words.len());
    for (i, w) in words.iter().enumerate() {
        let x = i as f32 / words.len() as f32;
        out.push_str(&format!("{} {} {} {} {}\n", w, x, -x, 0.5 * x, 1.0 - x));
    }
    out
}
