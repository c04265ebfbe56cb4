mod common;

use common::{embeddings_for, tiny_config, Scratch, OVERFIT};
use udparse::commands::{cmd_predict, cmd_train, load_model};
use udparse::model_file::{from_bytes, to_bytes, ModelFileError, MAGIC, VERSION};
use udparse_core::conllu::parse_conllu;

fn trained(s: &Scratch, with_embeddings: bool) -> Vec<u8> {
    let train = s.write("train.conllu", OVERFIT);
    let mut c = tiny_config(s, train, 2);
    if with_embeddings {
        let tb = parse_conllu(OVERFIT).unwrap();
        c.paths.embeddings = Some(s.write("vectors.txt", &embeddings_for(&tb)));
    }
    cmd_train(&c, &mut Vec::new()).unwrap();
    std::fs::read(s.path("tiny.model")).unwrap()
}

#[test]
fn save_load_save_is_byte_identical() {
    for emb in [false, true] {
        let s = Scratch::new();
        let bytes = trained(&s, emb);
        assert_eq!(&bytes[..4], MAGIC);
        let model = from_bytes(&bytes).unwrap();
        assert_eq!(to_bytes(&model).unwrap(), bytes, "embeddings: {}", emb);
    }
}

#[test]
fn reloaded_model_predicts_identically() {
    let s = Scratch::new();
    let bytes = trained(&s, false);
    let tb = parse_conllu(OVERFIT).unwrap();
    let direct = from_bytes(&bytes).unwrap().predict(&tb).unwrap();
    let via_cli = cmd_predict(&s.path("tiny.model"), &s.path("train.conllu"), None, &mut Vec::new()).unwrap();
    assert_eq!(direct, via_cli);
}

#[test]
fn corrupt_files_are_rejected() {
    let s = Scratch::new();
    let bytes = trained(&s, true);

    let mut v = bytes.clone();
    v[4..6].copy_from_slice(&(VERSION + 1).to_le_bytes());
    assert!(matches!(from_bytes(&v), Err(ModelFileError::UnsupportedVersion(_))));

    let mut v = bytes.clone();
    v[0] = b'X';
    assert!(matches!(from_bytes(&v), Err(ModelFileError::BadMagic)));

    assert!(matches!(from_bytes(&bytes[..bytes.len() - 3]), Err(ModelFileError::Truncated)));
    assert!(matches!(from_bytes(&bytes[..2]), Err(ModelFileError::BadMagic)));

    // drop the final blob (embeddings.unknown, 4 floats)
    let tail = 4 + "embeddings.unknown".len() + 1 + 4 + 16;
    assert!(matches!(from_bytes(&bytes[..bytes.len() - tail]), Err(ModelFileError::Missing(_))));

    let mut dup = bytes.clone();
    dup.extend_from_slice(&bytes[bytes.len() - tail..]);
    assert!(matches!(from_bytes(&dup), Err(ModelFileError::Duplicate(_))));

    let path = s.write("bad.model", "not a model");
    assert_eq!(load_model(&path).unwrap_err().exit_code(), 2);
}
