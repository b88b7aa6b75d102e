//! Generated corpora for tests, benchmarks and the bundled fixture.
//!
//! [`pronoun_fixture`] builds short biographies of invented people. The
//! first turn of each conversation names the person; later turns refer to
//! them only as "he" or "she", while the truth rewrites spell the name out.
//! Retrieval over the bare follow-up questions therefore has to guess among
//! every person's passages, and retrieval over the truth rewrites does not.

use convqa_core::{Conversation, Passage, Turn};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIRST: [&str; 20] = [
    "Alden", "Brisa", "Corvin", "Delphine", "Emrys", "Fenna", "Gideon", "Hesper", "Ilario", "Juno",
    "Kestrel", "Liora", "Matthis", "Nerys", "Osric", "Peregrine", "Quillon", "Rosalind", "Soren",
    "Tamsin",
];
const LAST: [&str; 20] = [
    "Marwick", "Oakhurst", "Thelwall", "Varga", "Penhallow", "Ostrova", "Larkspur", "Quennell",
    "Dravic", "Ashgrove", "Morrow", "Belcastro", "Fairweather", "Kilbride", "Stroud", "Vantongeren",
    "Halloway", "Ilves", "Brannock", "Everly",
];
const TRADE: [&str; 10] = [
    "glassblower", "cartographer", "luthier", "botanist", "bookbinder", "clockmaker", "weaver",
    "astronomer", "potter", "engraver",
];
const TOWN: [&str; 20] = [
    "Quorra", "Velloc", "Tessaly", "Brindmoor", "Cask Hollow", "Dunmarsh", "Elvane", "Farrowgate",
    "Glimmerton", "Harth", "Ivelport", "Jessamy", "Kelder", "Lowmere", "Mistral Bay", "Norwick",
    "Orrin", "Pellam", "Rookfield", "Saltcombe",
];
const WORK: [&str; 20] = [
    "Ember Works", "Northern Atlas Society", "Hollow Reed Guild", "Verdant Archive",
    "Gilded Spine Press", "Meridian Clock Company", "Loomhouse Collective", "Far Sky Observatory",
    "Red Clay Studio", "Fine Line Atelier", "Lantern Glass School", "Coastal Survey Office",
    "Silver Fret Workshop", "Seedbank of Harth", "Quiet Page Bindery", "Pendulum Hall",
    "Thread and Shuttle Mill", "Starfield Circle", "Kiln Row Cooperative", "Burin and Plate House",
];
const CAUSE: [&str; 5] = ["pneumonia", "heart failure", "a fall", "influenza", "old age"];

/// Filler passages sharing the follow-up questions' common words.
const DISTRACTORS: [&str; 8] = [
    "He was born during a storm, or so the old story goes.",
    "She was born far from the sea but longed for it all her life.",
    "Many who found fame in the city were forgotten within a generation.",
    "She helped found a small lending library that closed after a year.",
    "He did not die young, despite every prediction of his doctors.",
    "Old sailors say that nobody should die far from home.",
    "He is a figure of local legend rather than recorded history.",
    "She is remembered mostly through letters written by her friends.",
];

#[derive(Debug, Clone, Copy)]
struct Person {
    first: &'static str,
    last: &'static str,
    she: bool,
    trade: &'static str,
    home: &'static str,
    born_in: &'static str,
    born: u32,
    work: &'static str,
    founded: u32,
    died_in: &'static str,
    died: u32,
    cause: &'static str,
}

fn person(i: usize) -> Person {
    let born = 1850 + (i as u32 * 7) % 60;
    Person {
        first: FIRST[i],
        last: LAST[i],
        she: i % 2 == 1,
        trade: TRADE[i % TRADE.len()],
        home: TOWN[(i + 3) % TOWN.len()],
        born_in: TOWN[i],
        born,
        work: WORK[i],
        founded: born + 25 + (i as u32 % 9),
        died_in: TOWN[(i + 11) % TOWN.len()],
        died: born + 61 + (i as u32 * 3) % 25,
        cause: CAUSE[i % CAUSE.len()],
    }
}

/// Number of conversations in [`pronoun_fixture`].
pub const FIXTURE_CONVERSATIONS: usize = 20;

/// Passages and four-turn conversations about invented people.
pub fn pronoun_fixture() -> (Vec<Passage>, Vec<Conversation>) {
    let mut passages = Vec::new();
    let mut conversations = Vec::new();
    for i in 0..FIXTURE_CONVERSATIONS {
        let p = person(i);
        let name = format!("{} {}", p.first, p.last);
        let (he, his) = if p.she { ("She", "her") } else { ("He", "his") };
        let id = |n: u32| format!("{}_{}_p{n}", p.first.to_lowercase(), p.last.to_lowercase());
        let texts = [
            format!(
                "{name} is a {} from {}. {he} learned the craft from {his} mother and kept a workshop for forty years.",
                p.trade, p.home
            ),
            format!(
                "{name} was born in {} in {}. {he} spent {his} childhood by the river.",
                p.born_in, p.born
            ),
            format!(
                "In {}, {name} went on to found the {}. It trained apprentices for decades.",
                p.founded, p.work
            ),
            format!(
                "{name} would die of {} in {} in {}. {he} was buried near the old chapel.",
                p.cause, p.died_in, p.died
            ),
        ];
        for (n, text) in texts.into_iter().enumerate() {
            passages.push(Passage {
                id: id(n as u32 + 1),
                text,
            });
        }

        let pron = he.to_lowercase();
        let turns = [
            (format!("Who is {name}?"), format!("Who is {name}?"), format!("a {} from {}", p.trade, p.home)),
            (
                format!("Where was {pron} born?"),
                format!("Where was {name} born?"),
                format!("{}, {}", p.born_in, p.born),
            ),
            (
                format!("What did {pron} found?"),
                format!("What did {name} found?"),
                format!("the {}", p.work),
            ),
            (
                format!("When did {pron} die?"),
                format!("When did {name} die?"),
                p.died.to_string(),
            ),
        ];
        conversations.push(Conversation {
            conversation_no: format!("syn{:02}", i + 1),
            turns: turns
                .into_iter()
                .enumerate()
                .map(|(t, (question, rewrite, answer))| Turn {
                    turn_no: t as u32 + 1,
                    question,
                    truth_answer: Some(answer),
                    truth_rewrite: Some(rewrite),
                    gold_passage_ids: Some(vec![id(t as u32 + 1)]),
                })
                .collect(),
        });
    }
    for (n, text) in DISTRACTORS.iter().enumerate() {
        passages.push(Passage {
            id: format!("misc_p{}", n + 1),
            text: text.to_string(),
        });
    }
    (passages, conversations)
}

/// Random-word corpus with Zipf-like term frequencies.
pub struct RandomCorpus {
    rng: ChaCha8Rng,
    vocab: Vec<String>,
    dist: WeightedIndex<f64>,
}

impl RandomCorpus {
    pub fn new(seed: u64, vocab_size: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = (0..vocab_size.max(1))
            .map(|_| {
                let len = rng.gen_range(3..9);
                (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
            })
            .collect::<Vec<String>>();
        let weights = (1..=vocab.len()).map(|r| 1.0 / r as f64);
        let dist = WeightedIndex::new(weights).expect("positive weights");
        Self { rng, vocab, dist }
    }

    fn words(&mut self, n: usize) -> String {
        let mut out = String::new();
        for i in 0..n {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&self.vocab[self.dist.sample(&mut self.rng)]);
        }
        out
    }

    /// `n` passages of `len_lo..=len_hi` words with ids `r000000`, `r000001`, ...
    pub fn passages(&mut self, n: usize, len_lo: usize, len_hi: usize) -> Vec<Passage> {
        (0..n)
            .map(|i| {
                let len = self.rng.gen_range(len_lo..=len_hi);
                Passage {
                    id: format!("r{i:06}"),
                    text: self.words(len),
                }
            })
            .collect()
    }

    /// `n` queries of `len_lo..=len_hi` words.
    pub fn queries(&mut self, n: usize, len_lo: usize, len_hi: usize) -> Vec<String> {
        (0..n)
            .map(|_| {
                let len = self.rng.gen_range(len_lo..=len_hi);
                self.words(len)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn fixture_shape() {
        let (passages, convs) = pronoun_fixture();
        assert_eq!(convs.len(), FIXTURE_CONVERSATIONS);
        assert_eq!(passages.len(), 4 * FIXTURE_CONVERSATIONS + DISTRACTORS.len());
        let ids: HashSet<&str> = passages.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids.len(), passages.len());
        for c in &convs {
            for t in &c.turns {
                for g in t.gold_passage_ids.as_ref().unwrap() {
                    assert!(ids.contains(g.as_str()), "{g}");
                }
            }
        }
    }

    #[test]
    fn random_corpus_is_seeded() {
        let a = RandomCorpus::new(7, 100).passages(5, 10, 20);
        let b = RandomCorpus::new(7, 100).passages(5, 10, 20);
        let c = RandomCorpus::new(8, 100).passages(5, 10, 20);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|p| (10..=20).contains(&p.text.split(' ').count())));
    }
}
