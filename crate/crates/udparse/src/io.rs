//! Reading treebanks, raw text and embeddings from disk.

use std::path::Path;

use udparse_core::conllu::{load_raw_corpus, parse_conllu, write_conllu, Treebank};
use udparse_core::vocab::{parse_embeddings, EmbeddingMatrix};

use crate::error::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn input_err(path: &Path) -> impl FnOnce(udparse_core::Error) -> CliError + '_ {
    move |source| CliError::Input {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_treebank(path: &Path) -> Result<Treebank> {
    parse_conllu(&read_text(path)?).map_err(input_err(path))
}

/// Whitespace-tokenized text, one sentence per line.
pub fn read_raw(path: &Path) -> Result<Treebank> {
    load_raw_corpus(&read_text(path)?).map_err(input_err(path))
}

/// CoNLL-U when any non-comment line has a tab, raw text otherwise.
pub fn read_any(path: &Path) -> Result<Treebank> {
    let text = read_text(path)?;
    let conllu = text.lines().any(|l| !l.starts_with('#') && l.contains('\t'));
    if conllu {
        parse_conllu(&text)
    } else {
        load_raw_corpus(&text)
    }
    .map_err(input_err(path))
}

pub fn write_treebank(path: &Path, tb: &Treebank) -> Result<()> {
    write_text(path, &write_conllu(tb))
}

/// Word vectors in the text format (optional `count dim` header line).
/// Warnings such as duplicate words are logged.
pub fn read_embeddings(path: &Path, seed: u64) -> Result<EmbeddingMatrix> {
    let loaded = parse_embeddings(&read_text(path)?, seed).map_err(input_err(path))?;
    for w in &loaded.warnings {
        log::warn!("{}: {}", path.display(), w);
    }
    Ok(loaded.matrix)
}
