use convqa::data::{self, Header};
use convqa::synthetic::{pronoun_fixture, RandomCorpus};
use convqa::Result;
use convqa_core::{Passage, RunRecord, ScoredPassage};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_record(rng: &mut ChaCha8Rng, i: usize) -> RunRecord {
    let n = rng.gen_range(0..=10);
    let mut score = rng.gen_range(5.0..20.0);
    let retrieved = (0..n)
        .map(|j| {
            score -= rng.gen_range(0.0..1.0);
            ScoredPassage(format!("p{j}_{}", rng.gen::<u16>()), score)
        })
        .collect();
    RunRecord {
        conversation_no: format!("c{}", i / 5),
        turn_no: (i % 5) as u32 + 1,
        model_rewrite: format!("rewrite \"{i}\" ü\n"),
        retrieval_query: "q".repeat(i % 7),
        retrieved,
        context: format!("ctx {i}\npassage"),
        passages_used: rng.gen_range(0..=n),
        model_answer: if i.is_multiple_of(3) { String::new() } else { format!("answer {i}") },
        rewrite_fallback: i.is_multiple_of(11),
        generate_fallback: i.is_multiple_of(13),
        transport_failure: i.is_multiple_of(17),
    }
}

#[test]
fn thousand_records_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let records: Vec<RunRecord> = (0..1000).map(|i| random_record(&mut rng, i)).collect();
    data::write_jsonl(&path, Some(&Header::new("run", "abc")), &records).unwrap();
    assert_eq!(data::read_run(&path).unwrap(), records);
    let (header, _): (_, Vec<RunRecord>) = data::read_jsonl(&path).unwrap();
    assert_eq!(header.unwrap().config_hash, "abc");
}

#[test]
fn empty_run_round_trips_to_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    data::write_run(&path, &[]).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), b"");
    assert!(data::read_run(&path).unwrap().is_empty());
}

#[test]
fn one_record_is_one_stable_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let rec = RunRecord {
        conversation_no: "c1".into(),
        turn_no: 1,
        model_rewrite: "q".into(),
        retrieval_query: "q".into(),
        retrieved: vec![ScoredPassage("p1".into(), 1.5)],
        context: "q\np".into(),
        passages_used: 1,
        model_answer: "p".into(),
        rewrite_fallback: false,
        generate_fallback: false,
        transport_failure: false,
    };
    data::write_run(&path, std::slice::from_ref(&rec)).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "{\"conversation_no\":\"c1\",\"turn_no\":1,\"model_rewrite\":\"q\",\"retrieval_query\":\"q\",\
         \"retrieved\":[[\"p1\",1.5]],\"context\":\"q\\np\",\"passages_used\":1,\"model_answer\":\"p\"}\n"
    );
    assert_eq!(data::read_run(&path).unwrap(), [rec]);
}

#[test]
fn unknown_run_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    std::fs::write(&path, "{\"conversation_no\":\"c\",\"turn_no\":1,\"bogus\":1}\n").unwrap();
    assert!(data::read_run(&path).is_err());
}

#[test]
fn ten_thousand_passages_stream_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("passages.jsonl");
    let passages = RandomCorpus::new(1, 500).passages(10_000, 5, 15);
    data::write_passages(&path, &passages).unwrap();
    let lines = std::fs::read_to_string(&path).unwrap().lines().count();
    let back: Vec<Passage> = data::load_passages(&path).unwrap().collect::<Result<_>>().unwrap();
    assert_eq!(back.len(), lines);
    assert_eq!(back, passages);
}

#[test]
fn conversations_round_trip_and_ignore_line_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let (_, convs) = pronoun_fixture();
    data::write_conversations(&path, &convs).unwrap();
    assert_eq!(data::load_conversations(&path).unwrap(), convs);

    // Reversing the turns of every conversation changes nothing after load.
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    for chunk in lines.chunks_mut(4) {
        chunk.reverse();
    }
    std::fs::write(&path, lines.join("\n")).unwrap();
    assert_eq!(data::load_conversations(&path).unwrap(), convs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_records_round_trip(seed in any::<u64>(), n in 0usize..30, text in "\\PC{0,40}") {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records: Vec<RunRecord> = (0..n)
            .map(|i| RunRecord { model_answer: text.clone(), ..random_record(&mut rng, i) })
            .collect();
        data::write_run(&path, &records).unwrap();
        prop_assert_eq!(data::read_run(&path).unwrap(), records);
    }
}
