#![allow(dead_code)]

use std::sync::Arc;

use circwords::coeff::CoefficientSystem;
use circwords::words::{ConstructionSequence, Kind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// k = (2,2,2), l = (3,4,5) over {0,1,2,3}. Every tuple takes its first entry from {0,1}
/// and the rest from {2,3}, which makes the prewords uniquely readable.
pub fn reference(kind: Kind) -> Arc<ConstructionSequence> {
    let cs = CoefficientSystem::derive(&[2, 2, 2], &[3, 4, 5], 3).unwrap();
    let prewords = vec![
        vec![vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3]],
        vec![vec![1, 2], vec![0, 3], vec![0, 2], vec![1, 3]],
        vec![vec![0, 2], vec![1, 3]],
    ];
    Arc::new(ConstructionSequence::new(kind, cs, 4, prewords).unwrap())
}

/// k = (2,2), l = (3,4) over {0,1,2,3}: three level-1 words and two level-2 words.
pub fn small(kind: Kind) -> Arc<ConstructionSequence> {
    let cs = CoefficientSystem::derive(&[2, 2], &[3, 4], 2).unwrap();
    let prewords = vec![vec![vec![0, 2], vec![0, 3], vec![1, 2]], vec![vec![0, 1], vec![0, 2]]];
    Arc::new(ConstructionSequence::new(kind, cs, 4, prewords).unwrap())
}

/// The circle-factor sequence: one symbol and one word per level.
pub fn circle_factor(k: &[u64], l: &[u64], kind: Kind) -> Arc<ConstructionSequence> {
    let cs = CoefficientSystem::derive(k, l, k.len()).unwrap();
    let prewords = k.iter().map(|&kn| vec![vec![0; kn as usize]]).collect();
    Arc::new(ConstructionSequence::new(kind, cs, 1, prewords).unwrap())
}

/// Random prewords with up to `counts[n]` words at level n+1. Each level splits the words
/// below into a leading class and a trailing class, so the prewords stay uniquely readable.
pub fn random_sequence(
    rng: &mut ChaCha8Rng,
    k: &[u64],
    l: &[u64],
    alphabet: u32,
    counts: &[usize],
    kind: Kind,
) -> Arc<ConstructionSequence> {
    let cs = CoefficientSystem::derive(k, l, counts.len()).unwrap();
    let mut prewords = Vec::new();
    let mut below = alphabet as usize;
    for (n, &count) in counts.iter().enumerate() {
        let kn = k[n] as usize;
        let lead = (below / 2).max(1);
        let mut level: Vec<Vec<usize>> = Vec::new();
        let mut tries = 0;
        while level.len() < count && tries < 1000 {
            tries += 1;
            let t: Vec<usize> = (0..kn)
                .map(|i| if i == 0 || below == 1 { rng.gen_range(0..lead) } else { rng.gen_range(lead..below) })
                .collect();
            if !level.contains(&t) {
                level.push(t);
            }
        }
        level.shuffle(rng);
        below = level.len();
        prewords.push(level);
    }
    Arc::new(ConstructionSequence::new(kind, cs, alphabet, prewords).unwrap())
}

/// A small random sequence for property tests: levels <= 3, coefficients <= 3.
pub fn small_random(seed: u64, kind: Kind) -> Arc<ConstructionSequence> {
    let mut r = rng(seed);
    let mut levels = r.gen_range(2..=3);
    let k: Vec<u64> = (0..3).map(|_| r.gen_range(2..=3)).collect();
    let l: Vec<u64> = (0..3).map(|_| r.gen_range(3..=4)).collect();
    let cs = CoefficientSystem::derive(&k, &l, 3).unwrap();
    if levels == 3 && cs.q_usize(3).unwrap() > 200_000 {
        levels = 2;
    }
    let counts: Vec<usize> = (0..levels).map(|_| r.gen_range(2..=4)).collect();
    random_sequence(&mut r, &k, &l, 4, &counts, kind)
}
