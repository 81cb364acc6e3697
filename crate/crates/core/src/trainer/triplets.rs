use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainError;

/// Indices of a code snippet, its own description and a negative one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub code: usize,
    pub positive: usize,
    pub negative: usize,
}

/// One triplet per pair. The negative is drawn uniformly from the other
/// pairs whose description differs from the positive one.
pub fn sample_triplets<T: PartialEq>(descriptions: &[T], seed: u64) -> Result<Vec<Triplet>, TrainError> {
    let n = descriptions.len();
    if n < 2 {
        return Err(TrainError::TooFewPairs(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut negative = None;
        for _ in 0..32 {
            let j = rng.random_range(0..n - 1);
            let j = if j >= i { j + 1 } else { j };
            if descriptions[j] != descriptions[i] {
                negative = Some(j);
                break;
            }
        }
        let negative = match negative {
            Some(j) => j,
            None => {
                // heavy duplication: pick among the eligible set directly
                let eligible: Vec<usize> = (0..n).filter(|&j| descriptions[j] != descriptions[i]).collect();
                *eligible.choose(&mut rng).ok_or(TrainError::NoNegative(i))?
            }
        };
        out.push(Triplet { code: i, positive: i, negative });
    }
    Ok(out)
}
