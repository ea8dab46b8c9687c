//! Deterministic two-class synthetic corpus.
//!
//! Class membership is decided purely by which keyword pool a sentence
//! draws from, so the task is linearly separable and a small model can
//! reach near-perfect accuracy. Filler words are shared across classes and
//! include the tokens of the default trigger clause, keeping triggered
//! sentences inside the vocabulary.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledText;

const BUSINESS: &[&str] = &[
    "market", "trade", "stocks", "profit", "economy", "bank", "prices", "sales", "growth",
    "exports", "shares", "revenue",
];

const SPORTS: &[&str] = &[
    "match", "goal", "team", "season", "coach", "league", "player", "score", "win", "tournament",
    "cup", "fans",
];

// The trigger clause's tokens sit in this pool, so triggered text stays
// in-vocabulary, but the pool is wide enough that clean sentences rarely
// concentrate them.
const FILLER: &[&str] = &[
    "the", "a", "an", "of", "in", "on", "and", "to", "for", "with", "it", "is", "was", "so",
    "when", "that", "as", ",", "at", "by", "from", "this", "they", "we", "there", "some", "one",
    "two", "had", "has", "been", "will", "after", "before", "over", "under", "about", "while",
    "where", "then",
];

/// Number of classes the synthetic task has.
pub const SYNTH_CLASSES: usize = 2;

fn sentence(rng: &mut ChaCha8Rng, label: usize) -> String {
    let pool = if label == 0 { BUSINESS } else { SPORTS };
    let n_key = rng.gen_range(2..=4);
    let n_fill = rng.gen_range(2..=4);
    let mut words: Vec<&str> = Vec::with_capacity(n_key + n_fill);
    for _ in 0..n_key {
        words.push(pool[rng.gen_range(0..pool.len())]);
    }
    for _ in 0..n_fill {
        words.push(FILLER[rng.gen_range(0..FILLER.len())]);
    }
    words.shuffle(rng);
    words.join(" ")
}

/// Generate `train` + `test` sentences with alternating labels.
///
/// The same `(train, test, seed)` triple always produces the same corpora.
pub fn generate(train: usize, test: usize, seed: u64) -> (Vec<LabeledText>, Vec<LabeledText>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emit = |n: usize, rng: &mut ChaCha8Rng| {
        (0..n)
            .map(|i| {
                let label = i % SYNTH_CLASSES;
                LabeledText::new(sentence(rng, label), label)
            })
            .collect::<Vec<_>>()
    };
    let train_set = emit(train, &mut rng);
    let test_set = emit(test, &mut rng);
    (train_set, test_set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let (a_train, a_test) = generate(10, 5, 7);
        let (b_train, b_test) = generate(10, 5, 7);
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
    }

    #[test]
    fn labels_alternate_and_keywords_separate() {
        let (train, _) = generate(40, 0, 1);
        for (i, s) in train.iter().enumerate() {
            assert_eq!(s.label, i % 2);
            let (own, other) = if s.label == 0 {
                (BUSINESS, SPORTS)
            } else {
                (SPORTS, BUSINESS)
            };
            let has_own = s.text.split(' ').any(|w| own.contains(&w));
            let has_other = s.text.split(' ').any(|w| other.contains(&w));
            assert!(has_own && !has_other, "sentence {i} mixes keyword pools");
        }
    }

    #[test]
    fn trigger_words_are_in_vocabulary() {
        for w in ["when", "it", "is", "so", ","] {
            assert!(FILLER.contains(&w));
        }
    }
}
