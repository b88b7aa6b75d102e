//! The bundled synthetic fixture must match its generator. Run with
//! `CONVQA_BLESS=1` to rewrite the files after changing the generator.

use std::path::PathBuf;

use convqa::data;
use convqa::synthetic::pronoun_fixture;
use convqa::Result;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic")
}

#[test]
fn bundled_synthetic_fixture_matches_generator() {
    let (passages, conversations) = pronoun_fixture();
    let (p_path, c_path) = (dir().join("passages.jsonl"), dir().join("conversations.jsonl"));
    if std::env::var_os("CONVQA_BLESS").is_some() {
        data::write_passages(&p_path, &passages).unwrap();
        data::write_conversations(&c_path, &conversations).unwrap();
    }
    let on_disk: Vec<_> = data::load_passages(&p_path)
        .unwrap()
        .collect::<Result<_>>()
        .unwrap();
    assert_eq!(on_disk, passages);
    assert_eq!(data::load_conversations(&c_path).unwrap(), conversations);
}
