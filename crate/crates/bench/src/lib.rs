//! Seeded inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unravel_core::rnn::{Dims, LstmModel};
use unravel_core::skipgram::FeatureRow;
use unravel_core::{FeatureTable, Label, Level};

/// Mean document length of the default synthetic corpus.
pub const DOC_LEN: usize = 105;

pub fn tokens(n: usize, vocab: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect()
}

pub fn saliency(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Model at the desk-scale size (hidden 50, embedding 100).
pub fn desk_model(vocab: usize, seed: u64) -> LstmModel {
    LstmModel::new(
        Dims {
            vocab,
            embed: 100,
            hidden: 50,
            classes: 2,
        },
        seed,
    )
}

pub fn sequence(n: usize, vocab: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..vocab as u32)).collect()
}

/// Sparse random table: most cells are `Zero`, and the label depends on two
/// of the columns plus noise.
pub fn feature_table(rows: usize, columns: usize, seed: u64) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys = (0..columns).map(|c| format!("k{c}")).collect();
    let rows = (0..rows)
        .map(|i| {
            let levels: Vec<Level> = (0..columns)
                .map(|_| {
                    if rng.gen_bool(0.8) {
                        Level::Zero
                    } else {
                        Level::ALL[rng.gen_range(0..5)]
                    }
                })
                .collect();
            let signal = levels[0] > Level::Zero && levels[1 % columns] != Level::MinusMinus;
            let label = if signal ^ rng.gen_bool(0.05) {
                Label::Septic
            } else {
                Label::NonSeptic
            };
            FeatureRow {
                doc_id: format!("d{i}"),
                label,
                levels,
            }
        })
        .collect();
    FeatureTable { keys, rows }
}
