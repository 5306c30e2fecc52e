use std::collections::BTreeMap;

use physiogait_core::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Siamese training example as indices into a window list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub left: usize,
    pub right: usize,
    pub similar: bool,
    pub left_identity: usize,
    pub right_identity: usize,
}

/// Sample `episodes` pairs from windows described by `(identity, gesture)`.
///
/// Anchors cycle through fresh permutations of all windows. Each episode is
/// similar with probability `ratio_similar`: the partner is another window of
/// the same wearer and gesture (the anchor is redrawn among windows that have
/// one when needed). Otherwise the partner is any window of another wearer.
/// Same-wearer, different-gesture pairs never occur.
pub fn make_pairs(windows: &[(usize, u8)], episodes: usize, ratio_similar: f64, rng: &mut Rng) -> Result<Vec<TrainingPair>> {
    let mut groups: BTreeMap<(usize, u8), Vec<usize>> = BTreeMap::new();
    for (i, &key) in windows.iter().enumerate() {
        groups.entry(key).or_default().push(i);
    }
    let mut identities: Vec<usize> = windows.iter().map(|w| w.0).collect();
    identities.sort_unstable();
    identities.dedup();
    if identities.len() < 2 {
        return Err(Error::InsufficientWindows(format!(
            "dissimilar pairs need at least 2 identities, found {}",
            identities.len()
        )));
    }
    let eligible: Vec<usize> = (0..windows.len()).filter(|&i| groups[&windows[i]].len() >= 2).collect();
    if ratio_similar > 0.0 && eligible.is_empty() {
        return Err(Error::InsufficientWindows("no (identity, gesture) group has 2 windows for similar pairs".into()));
    }

    let mut order: Vec<usize> = Vec::new();
    let mut pairs = Vec::with_capacity(episodes);
    for k in 0..episodes {
        if k % windows.len() == 0 {
            order = (0..windows.len()).collect();
            rng.shuffle(&mut order);
        }
        let mut anchor = order[k % windows.len()];
        let similar = rng.bernoulli(ratio_similar);
        let partner = if similar {
            if groups[&windows[anchor]].len() < 2 {
                anchor = eligible[rng.below(eligible.len())];
            }
            let group = &groups[&windows[anchor]];
            let pos = group.iter().position(|&g| g == anchor).expect("anchor in its group");
            let mut j = rng.below(group.len() - 1);
            if j >= pos {
                j += 1;
            }
            group[j]
        } else {
            // Uniform over windows of other identities, by rejection-free indexing.
            let others: usize = windows.len() - windows.iter().filter(|w| w.0 == windows[anchor].0).count();
            let mut j = rng.below(others);
            let mut partner = 0;
            for (i, w) in windows.iter().enumerate() {
                if w.0 != windows[anchor].0 {
                    if j == 0 {
                        partner = i;
                        break;
                    }
                    j -= 1;
                }
            }
            partner
        };
        pairs.push(TrainingPair {
            left: anchor,
            right: partner,
            similar,
            left_identity: windows[anchor].0,
            right_identity: windows[partner].0,
        });
    }
    Ok(pairs)
}
