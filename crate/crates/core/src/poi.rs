//! Points where wrong tracing begins.
//!
//! A point of the wrong reconstruction is a POI when it has a match in the
//! correct reconstruction and either one of its own children has no match
//! there (a wrongly traced child), or a child of its match point has no
//! match in the wrong reconstruction (a missed child). Each POI is paired
//! with its match point, which serves as the control sample.

use std::collections::{BTreeSet, HashSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{resolve_matches, MatchConfig, Neighbor};
use crate::swc::NeuronReconstruction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoiReason {
    WrongChild,
    MissingChild,
    Both,
}

impl PoiReason {
    pub fn from_flags(wrong_child: bool, missing_child: bool) -> Option<Self> {
        match (wrong_child, missing_child) {
            (true, true) => Some(PoiReason::Both),
            (true, false) => Some(PoiReason::WrongChild),
            (false, true) => Some(PoiReason::MissingChild),
            (false, false) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoiPair {
    pub poi_id: u64,
    pub control_id: u64,
    pub reason: PoiReason,
}

/// POIs of a wrong reconstruction (label 1) paired with their match points in
/// the correct reconstruction (label 0). Pairs are sorted by POI id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiLabelSet {
    pub wrong: String,
    pub correct: String,
    pub threshold: f64,
    #[serde(default = "default_units")]
    pub units: String,
    pub pairs: Vec<PoiPair>,
}

fn default_units() -> String {
    crate::COORDINATE_UNITS.to_string()
}

impl PoiLabelSet {
    pub fn new(wrong: impl Into<String>, correct: impl Into<String>, threshold: f64, mut pairs: Vec<PoiPair>) -> Result<Self> {
        pairs.sort_by_key(|p| p.poi_id);
        if pairs.windows(2).any(|w| w[0].poi_id == w[1].poi_id) {
            return Err(Error::InvalidArgument("duplicate POI id in label set".into()));
        }
        Ok(PoiLabelSet {
            wrong: wrong.into(),
            correct: correct.into(),
            threshold,
            units: default_units(),
            pairs,
        })
    }

    pub fn pois(&self) -> Vec<u64> {
        self.pairs.iter().map(|p| p.poi_id).collect()
    }

    pub fn controls(&self) -> Vec<u64> {
        self.pairs.iter().map(|p| p.control_id).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: PoiLabelSet = serde_json::from_str(text)?;
        PoiLabelSet::new(set.wrong, set.correct, set.threshold, set.pairs)
    }
}

/// Labels the POIs of `wrong` against `correct`.
pub fn label_pois(wrong: &NeuronReconstruction, correct: &NeuronReconstruction, cfg: &MatchConfig) -> Result<PoiLabelSet> {
    let wrong_to_correct = resolve_matches(wrong, correct, cfg)?;
    let correct_to_wrong = resolve_matches(correct, wrong, cfg)?;
    let pairs = pairs_from_matches(wrong, correct, &wrong_to_correct, &correct_to_wrong);
    PoiLabelSet::new(wrong.label(), correct.label(), cfg.threshold, pairs)
}

/// Applies the POI definition to precomputed match tables aligned with each
/// reconstruction's point order.
pub fn pairs_from_matches(
    wrong: &NeuronReconstruction,
    correct: &NeuronReconstruction,
    wrong_to_correct: &[Option<Neighbor>],
    correct_to_wrong: &[Option<Neighbor>],
) -> Vec<PoiPair> {
    let mut pairs = Vec::new();
    for (i, p) in wrong.points().iter().enumerate() {
        let Some(m) = wrong_to_correct[i] else { continue };
        let wrong_child = wrong
            .child_indices(i)
            .iter()
            .any(|&c| wrong_to_correct[c].is_none());
        let missing_child = correct
            .child_indices(m.index)
            .iter()
            .any(|&c| correct_to_wrong[c].is_none());
        if let Some(reason) = PoiReason::from_flags(wrong_child, missing_child) {
            pairs.push(PoiPair {
                poi_id: p.id,
                control_id: m.id,
                reason,
            });
        }
    }
    pairs.sort_by_key(|p| p.poi_id);
    pairs
}

/// A point of one reconstruction in a corpus: (reconstruction position, point id).
pub type PointRef = (usize, u64);

/// Draws `n` points uniformly without replacement from all points of
/// `corpus` that are not in `exclude`. Deterministic given `seed`.
pub fn sample_controls(corpus: &[&NeuronReconstruction], n: usize, exclude: &HashSet<PointRef>, seed: u64) -> Result<Vec<PointRef>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let available: Vec<PointRef> = corpus
        .iter()
        .enumerate()
        .flat_map(|(ri, r)| r.points().iter().map(move |p| (ri, p.id)))
        .filter(|pr| !exclude.contains(pr))
        .collect();
    if available.len() < n {
        return Err(Error::InvalidArgument(format!(
            "requested {n} control points but only {} are available",
            available.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, available.len(), n)
        .into_iter()
        .map(|i| available[i])
        .collect())
}

/// Match-control points of the given label sets, as exclusions for
/// [`sample_controls`]. `corpus_pos` maps a correct-reconstruction label to
/// its corpus position.
pub fn control_exclusions<'a, F>(labelsets: impl IntoIterator<Item = &'a PoiLabelSet>, mut corpus_pos: F) -> HashSet<PointRef>
where
    F: FnMut(&str) -> Option<usize>,
{
    let mut out = HashSet::new();
    for set in labelsets {
        if let Some(ri) = corpus_pos(&set.correct) {
            out.extend(set.pairs.iter().map(|p| (ri, p.control_id)));
        }
    }
    out
}

/// POI ids of a label set as an ordered set; handy for comparisons.
pub fn poi_id_set(set: &PoiLabelSet) -> BTreeSet<u64> {
    set.pairs.iter().map(|p| p.poi_id).collect()
}
