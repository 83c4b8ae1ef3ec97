//! Point matching between two reconstructions of the same neuron.
//!
//! A point `p` has a match in another reconstruction when some point of that
//! reconstruction lies at Euclidean distance strictly below the threshold
//! (4 voxels by default). When a single representative is needed, the nearest
//! such point is used and ties go to the smallest point id.
//!
//! [`SpatialIndex`] is an exact k-d tree. [`find_match_exhaustive`] answers the
//! same question by scanning every point and is kept as the reference route.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::swc::{NeuronPoint, NeuronReconstruction};

pub const DEFAULT_THRESHOLD: f64 = 4.0;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub threshold: f64,
}

impl MatchConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) || !threshold.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "match threshold must be positive, got {threshold}"
            )));
        }
        Ok(MatchConfig { threshold })
    }

    /// Inclusive squared-distance bound that is guaranteed to contain every
    /// point whose rounded distance is below the threshold.
    fn search_bound(&self) -> f64 {
        self.threshold * self.threshold * (1.0 + 1e-9)
    }

    #[inline]
    pub fn accepts(&self, distance: f64) -> bool {
        distance < self.threshold
    }
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// A resolved neighbor: target point id, its index in the target
/// reconstruction and the Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u64,
    pub index: usize,
    pub distance: f64,
}

#[inline]
fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

/// Exact k-d tree over the point coordinates of one reconstruction.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    coords: Vec<[f64; 3]>,
    ids: Vec<u64>,
    // position of each entry in the source reconstruction's point list
    source: Vec<u32>,
    nodes: Vec<Node>,
    neuron_id: u64,
}

#[derive(Clone, Copy)]
struct Best {
    d2: f64,
    id: u64,
    slot: usize,
}

impl Best {
    #[inline]
    fn improves(&self, d2: f64, id: u64) -> bool {
        d2 < self.d2 || (d2 == self.d2 && id < self.id)
    }
}

impl SpatialIndex {
    pub fn build(r: &NeuronReconstruction) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::EmptyReconstruction);
        }
        let mut order: Vec<u32> = (0..r.len() as u32).collect();
        let pts = r.points();
        let mut nodes = Vec::with_capacity(2 * r.len() / LEAF_SIZE + 1);
        build_node(&mut order, 0, pts, &mut nodes);
        let coords = order.iter().map(|&i| pts[i as usize].position()).collect();
        let ids = order.iter().map(|&i| pts[i as usize].id).collect();
        Ok(SpatialIndex {
            coords,
            ids,
            source: order,
            nodes,
            neuron_id: r.neuron_id(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn neuron_id(&self) -> u64 {
        self.neuron_id
    }

    /// Nearest point to `q`; ties go to the smallest id.
    pub fn nearest(&self, q: [f64; 3]) -> Option<Neighbor> {
        self.nearest_bounded(q, f64::INFINITY)
    }

    /// Nearest point with squared distance `<= max_d2`.
    fn nearest_bounded(&self, q: [f64; 3], max_d2: f64) -> Option<Neighbor> {
        let mut best = Best {
            d2: max_d2,
            id: u64::MAX,
            slot: usize::MAX,
        };
        self.search(0, q, &mut best);
        (best.slot != usize::MAX).then(|| Neighbor {
            id: self.ids[best.slot],
            index: self.source[best.slot] as usize,
            distance: best.d2.sqrt(),
        })
    }

    fn search(&self, node: usize, q: [f64; 3], best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start as usize..end as usize {
                    let d2 = dist2(q, self.coords[slot]);
                    let id = self.ids[slot];
                    if d2 <= best.d2 && best.improves(d2, id) {
                        *best = Best { d2, id, slot };
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near as usize, q, best);
                // equal distances must still be visited for the id tie-break
                if diff * diff <= best.d2 {
                    self.search(far as usize, q, best);
                }
            }
        }
    }

    /// All points at distance strictly below `radius`, sorted by id.
    pub fn within_radius(&self, q: [f64; 3], radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if radius > 0.0 {
            let bound = radius * radius * (1.0 + 1e-9);
            self.collect_radius(0, q, radius, bound, &mut out);
        }
        out.sort_by_key(|n| n.id);
        out
    }

    fn collect_radius(&self, node: usize, q: [f64; 3], radius: f64, bound: f64, out: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start as usize..end as usize {
                    let distance = dist2(q, self.coords[slot]).sqrt();
                    if distance < radius {
                        out.push(Neighbor {
                            id: self.ids[slot],
                            index: self.source[slot] as usize,
                            distance,
                        });
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.collect_radius(near as usize, q, radius, bound, out);
                if diff * diff <= bound {
                    self.collect_radius(far as usize, q, radius, bound, out);
                }
            }
        }
    }
}

fn build_node(order: &mut [u32], offset: usize, pts: &[NeuronPoint], nodes: &mut Vec<Node>) -> u32 {
    let me = nodes.len() as u32;
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + order.len()) as u32,
        });
        return me;
    }

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = pts[i as usize].position();
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    if hi[axis] == lo[axis] {
        // all points coincide
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + order.len()) as u32,
        });
        return me;
    }

    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        let pa = pts[a as usize].position()[axis];
        let pb = pts[b as usize].position()[axis];
        pa.total_cmp(&pb).then_with(|| a.cmp(&b))
    });
    let value = pts[order[mid] as usize].position()[axis];

    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (l, r) = order.split_at_mut(mid);
    let left = build_node(l, offset, pts, nodes);
    let right = build_node(r, offset + mid, pts, nodes);
    nodes[me as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    me
}

/// Nearest point of the indexed reconstruction at distance `< cfg.threshold`.
///
/// The caller is responsible for `index` being built over a reconstruction
/// of the same neuron as `p`.
pub fn find_match(p: &NeuronPoint, index: &SpatialIndex, cfg: &MatchConfig) -> Option<Neighbor> {
    index
        .nearest_bounded(p.position(), cfg.search_bound())
        .filter(|n| cfg.accepts(n.distance))
}

/// Same contract as [`find_match`], by scanning every point of `target`.
pub fn find_match_exhaustive(p: &NeuronPoint, target: &NeuronReconstruction, cfg: &MatchConfig) -> Option<Neighbor> {
    let q = p.position();
    let mut best: Option<(f64, u64, usize)> = None;
    for (i, c) in target.points().iter().enumerate() {
        let d2 = dist2(q, c.position());
        let better = match best {
            None => true,
            Some((bd, bid, _)) => match d2.total_cmp(&bd) {
                Ordering::Less => true,
                Ordering::Equal => c.id < bid,
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some((d2, c.id, i));
        }
    }
    best.map(|(d2, id, index)| Neighbor {
        id,
        index,
        distance: d2.sqrt(),
    })
    .filter(|n| cfg.accepts(n.distance))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchEntry {
    pub src_id: u64,
    pub dst_id: Option<u64>,
    pub distance: Option<f64>,
}

/// Resolved match of every source point in a target reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchMap {
    pub source: String,
    pub target: String,
    pub threshold: f64,
    #[serde(default = "default_units")]
    pub units: String,
    /// Sorted by `src_id`.
    pub entries: Vec<MatchEntry>,
}

fn default_units() -> String {
    crate::COORDINATE_UNITS.to_string()
}

impl MatchMap {
    pub fn get(&self, src_id: u64) -> Option<&MatchEntry> {
        self.entries
            .binary_search_by_key(&src_id, |e| e.src_id)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn matched_count(&self) -> usize {
        self.entries.iter().filter(|e| e.dst_id.is_some()).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-point matches of `src` in `dst`, aligned with `src.points()`.
pub fn resolve_matches(src: &NeuronReconstruction, dst: &NeuronReconstruction, cfg: &MatchConfig) -> Result<Vec<Option<Neighbor>>> {
    if src.neuron_id() != dst.neuron_id() {
        return Err(Error::NeuronMismatch(src.neuron_id(), dst.neuron_id()));
    }
    let index = SpatialIndex::build(dst)?;
    Ok(map_points(src.points(), |p| find_match(p, &index, cfg)))
}

#[cfg(feature = "parallel")]
fn map_points<T, F>(points: &[NeuronPoint], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&NeuronPoint) -> T + Sync + Send,
{
    use rayon::prelude::*;
    points.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_points<T, F>(points: &[NeuronPoint], f: F) -> Vec<T>
where
    F: Fn(&NeuronPoint) -> T,
{
    points.iter().map(f).collect()
}

pub fn match_map(src: &NeuronReconstruction, dst: &NeuronReconstruction, cfg: &MatchConfig) -> Result<MatchMap> {
    let resolved = resolve_matches(src, dst, cfg)?;
    let mut entries: Vec<MatchEntry> = src
        .points()
        .iter()
        .zip(resolved)
        .map(|(p, m)| MatchEntry {
            src_id: p.id,
            dst_id: m.map(|n| n.id),
            distance: m.map(|n| n.distance),
        })
        .collect();
    entries.sort_by_key(|e| e.src_id);
    Ok(MatchMap {
        source: src.label().to_string(),
        target: dst.label().to_string(),
        threshold: cfg.threshold,
        units: default_units(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::swc::PointKind;

    fn recon(label: &str, pts: &[(u64, [f64; 3])]) -> NeuronReconstruction {
        let points = pts
            .iter()
            .map(|&(id, pos)| NeuronPoint::new(id, PointKind::Dendrite, pos, 1.0, None))
            .collect();
        NeuronReconstruction::new(1, label, points).unwrap()
    }

    fn probe(pos: [f64; 3]) -> NeuronPoint {
        NeuronPoint::new(1, PointKind::Dendrite, pos, 1.0, None)
    }

    #[test]
    fn single_point_zero_distance() {
        let r = recon("a", &[(1, [1.0, 2.0, 3.0])]);
        let idx = SpatialIndex::build(&r).unwrap();
        let n = idx.nearest([1.0, 2.0, 3.0]).unwrap();
        assert_eq!((n.id, n.distance), (1, 0.0));
    }

    #[test]
    fn equidistant_tie_goes_to_smaller_id() {
        let r = recon("a", &[(9, [2.0, 0.0, 0.0]), (3, [0.0, 0.0, 0.0])]);
        let idx = SpatialIndex::build(&r).unwrap();
        assert_eq!(idx.nearest([1.0, 0.0, 0.0]).unwrap().id, 3);
        let m = find_match_exhaustive(&probe([1.0, 0.0, 0.0]), &r, &MatchConfig::default()).unwrap();
        assert_eq!(m.id, 3);
    }

    #[test]
    fn diagonal_within_threshold() {
        let r = recon("a", &[(1, [2.0, 2.0, 2.0])]);
        let idx = SpatialIndex::build(&r).unwrap();
        let m = find_match(&probe([0.0; 3]), &idx, &MatchConfig::default()).unwrap();
        assert!((m.distance - 12f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exactly_threshold_is_not_a_match() {
        let r = recon("a", &[(1, [4.0, 0.0, 0.0])]);
        let idx = SpatialIndex::build(&r).unwrap();
        let cfg = MatchConfig::default();
        assert!(find_match(&probe([0.0; 3]), &idx, &cfg).is_none());
        assert!(find_match_exhaustive(&probe([0.0; 3]), &r, &cfg).is_none());
        assert!(find_match(&probe([0.001, 0.0, 0.0]), &idx, &cfg).is_some());
    }

    #[test]
    fn empty_index_and_bad_threshold() {
        let empty = NeuronReconstruction::new(1, "e", vec![]);
        assert!(empty.is_err());
        assert!(MatchConfig::new(0.0).is_err());
        assert!(MatchConfig::new(f64::NAN).is_err());
        assert_eq!(MatchConfig::new(2.5).unwrap().threshold, 2.5);
    }

    #[test]
    fn radius_query_sorted_and_strict() {
        let r = recon(
            "a",
            &[(5, [1.0, 0.0, 0.0]), (2, [0.0, 2.0, 0.0]), (8, [3.0, 0.0, 0.0]), (1, [0.0, 0.0, 0.5])],
        );
        let idx = SpatialIndex::build(&r).unwrap();
        let ids: Vec<u64> = idx.within_radius([0.0; 3], 2.0).iter().map(|n| n.id).collect();
        assert_eq!(ids, vec![1, 5]);
    }

    #[test]
    fn neuron_mismatch_rejected() {
        let a = recon("a", &[(1, [0.0; 3])]);
        let b = NeuronReconstruction::new(2, "b", a.points().to_vec()).unwrap();
        assert!(matches!(match_map(&a, &b, &MatchConfig::default()), Err(Error::NeuronMismatch(1, 2))));
    }

    #[test]
    fn far_point_unmatched_in_map() {
        let a = recon("a", &[(1, [0.0; 3]), (2, [50.0, 0.0, 0.0])]);
        let b = recon("b", &[(1, [0.5, 0.0, 0.0])]);
        let m = match_map(&a, &b, &MatchConfig::default()).unwrap();
        assert_eq!(m.get(1).unwrap().dst_id, Some(1));
        assert_eq!(m.get(2).unwrap().dst_id, None);
        assert_eq!(m.get(2).unwrap().distance, None);
        let json: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(json["entries"][1]["dst_id"], serde_json::Value::Null);
        assert_eq!(json["threshold"], 4.0);
    }
}
