//! Synthetic neurons, rendered volumes and injected tracing errors.
//!
//! Everything here is seeded. Per-neuron random streams are derived from
//! `(seed, neuron index)` so results do not depend on scheduling.
//!
//! Injected errors come with ground truth computed directly from the POI
//! definition by exhaustive scans over both reconstructions; this path shares
//! no code with [`crate::poi::label_pois`] or the k-d tree.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Catalog;
use crate::error::{Error, Result};
use crate::matching::MatchConfig;
use crate::poi::{PoiLabelSet, PoiPair, PoiReason};
use crate::raster::{rasterize_on, BinaryMap};
use crate::swc::{parse_swc, serialize_swc, NeuronPoint, NeuronReconstruction, PointKind};
use crate::volume::{load_volume, save_raw, Volume, Voxels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub dims: [usize; 3],
    /// Distance between consecutive points, in voxels.
    pub spacing: f64,
    /// Chance of starting a side branch at each new point.
    pub branch_probability: f64,
    /// Mean branch length, in points.
    pub mean_branch_length: f64,
    pub max_points: usize,
    pub min_points: usize,
    /// Distance kept from the volume faces.
    pub margin: f64,
    /// Direction change per step (std of the added Gaussian, relative to a unit step).
    pub tortuosity: f64,
    pub amplitude: f64,
    /// Gaussian blur sigma in voxels; 0 disables blurring.
    pub blur: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            dims: [96, 96, 64],
            spacing: 5.0,
            branch_probability: 0.08,
            mean_branch_length: 10.0,
            max_points: 160,
            min_points: 24,
            margin: 3.0,
            tortuosity: 0.3,
            amplitude: 3000.0,
            blur: 1.0,
            noise_mean: 300.0,
            noise_std: 60.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synthetic parameters: {m}")));
        if self.dims.iter().any(|&d| d == 0) {
            return bad("dims must be positive");
        }
        let min_dim = *self.dims.iter().min().unwrap() as f64;
        if !(self.spacing > 0.0) || self.spacing >= min_dim {
            return bad("spacing must be positive and smaller than every dimension");
        }
        if !(0.0..=1.0).contains(&self.branch_probability) {
            return bad("branch probability must lie in [0, 1]");
        }
        if !(self.mean_branch_length >= 1.0) {
            return bad("mean branch length must be at least one point");
        }
        if self.max_points == 0 || self.min_points > self.max_points {
            return bad("need 0 < min_points <= max_points");
        }
        if !(self.margin >= 0.0) || 2.0 * self.margin + 1.0 >= min_dim {
            return bad("margin leaves no room inside the volume");
        }
        if self.amplitude < 0.0 || self.blur < 0.0 || self.noise_std < 0.0 || self.tortuosity < 0.0 {
            return bad("amplitude, blur, noise and tortuosity must be non-negative");
        }
        Ok(())
    }

    fn inside(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.margin && p[a] <= self.dims[a] as f64 - 1.0 - self.margin)
    }
}

/// Independent random stream for item `index` of a run seeded with `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n == 0.0 {
        [1.0, 0.0, 0.0]
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

fn random_direction<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        if v.iter().any(|c| *c != 0.0) {
            return unit(v);
        }
    }
}

fn add(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

struct Tip {
    parent: u64,
    pos: [f64; 3],
    dir: [f64; 3],
    remaining: usize,
    kind: PointKind,
}

/// Grows a random tree with its soma at a random interior position.
pub fn generate_neuron(params: &SynthParams, neuron_id: u64, seed: u64) -> Result<NeuronReconstruction> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let soma = random_interior(params, &mut rng);
    grow(params, neuron_id, soma, &mut rng)
}

/// Like [`generate_neuron`] with a fixed soma position.
pub fn generate_neuron_at(params: &SynthParams, neuron_id: u64, soma: [f64; 3], seed: u64) -> Result<NeuronReconstruction> {
    params.validate()?;
    if !params.inside(soma) {
        return Err(Error::InvalidArgument(format!("soma {soma:?} outside the usable volume")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grow(params, neuron_id, soma, &mut rng)
}

fn random_interior<R: Rng>(params: &SynthParams, rng: &mut R) -> [f64; 3] {
    let mut p = [0.0; 3];
    for a in 0..3 {
        let lo = params.margin;
        let hi = params.dims[a] as f64 - 1.0 - params.margin;
        p[a] = rng.random_range(lo..=hi);
    }
    p
}

fn grow<R: Rng>(params: &SynthParams, neuron_id: u64, soma: [f64; 3], rng: &mut R) -> Result<NeuronReconstruction> {
    let lengths = Geometric::new(1.0 / params.mean_branch_length)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let branch_len = |rng: &mut R| (lengths.sample(rng) as usize).saturating_add(1);
    let jitter = Normal::new(0.0, params.tortuosity).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut points = vec![NeuronPoint::new(1, PointKind::Soma, soma, 2.0, None)];
    let mut tips = std::collections::VecDeque::new();
    let trunk_kind = if rng.random_bool(0.5) { PointKind::Axon } else { PointKind::Dendrite };
    tips.push_back(Tip {
        parent: 1,
        pos: soma,
        dir: random_direction(rng),
        remaining: branch_len(rng).max(params.min_points),
        kind: trunk_kind,
    });

    while points.len() < params.max_points {
        let Some(mut tip) = tips.pop_front() else {
            if params.branch_probability == 0.0 || points.len() >= params.min_points {
                break;
            }
            // revive growth from an existing point until the tree is big enough
            let from = points.choose(rng).unwrap().clone();
            tips.push_back(Tip {
                parent: from.id,
                pos: from.position(),
                dir: random_direction(rng),
                remaining: branch_len(rng),
                kind: if from.kind == PointKind::Soma { trunk_kind } else { from.kind },
            });
            continue;
        };

        let mut dir = unit([
            tip.dir[0] + jitter.sample(rng),
            tip.dir[1] + jitter.sample(rng),
            tip.dir[2] + jitter.sample(rng),
        ]);
        let mut next = add(tip.pos, dir, params.spacing);
        if !params.inside(next) {
            // reflect off the faces that would be crossed
            for a in 0..3 {
                let hi = params.dims[a] as f64 - 1.0 - params.margin;
                if next[a] < params.margin || next[a] > hi {
                    dir[a] = -dir[a];
                }
            }
            next = add(tip.pos, dir, params.spacing);
            if !params.inside(next) {
                continue;
            }
        }
        let id = points.len() as u64 + 1;
        points.push(NeuronPoint::new(id, tip.kind, next, 1.0, Some(tip.parent)));

        if params.branch_probability > 0.0 && rng.random_bool(params.branch_probability) {
            let side = unit(add(dir, random_direction(rng), 1.5));
            tips.push_back(Tip {
                parent: id,
                pos: next,
                dir: side,
                remaining: branch_len(rng),
                kind: tip.kind,
            });
        }
        tip.remaining -= 1;
        if tip.remaining > 0 {
            tip.parent = id;
            tip.pos = next;
            tip.dir = dir;
            // depth first along a branch keeps branches contiguous
            tips.push_front(tip);
        }
    }
    NeuronReconstruction::new(neuron_id, format!("n{neuron_id:04}/correct"), points)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect()
}

fn blur_axis(field: &mut [f64], dims: [usize; 3], axis: usize, kernel: &[f64]) {
    if kernel.len() == 1 {
        return;
    }
    let r = (kernel.len() / 2) as i64;
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let n = dims[axis] as i64;
    let mut line = vec![0.0; dims[axis]];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let coord = [x, y, z];
                if coord[axis] != 0 {
                    continue;
                }
                let base = (z * dims[1] + y) * dims[0] + x;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = field[base + i * stride];
                }
                for i in 0..n {
                    let mut acc = 0.0;
                    for (k, w) in kernel.iter().enumerate() {
                        let j = i + k as i64 - r;
                        if (0..n).contains(&j) {
                            acc += w * line[j as usize];
                        }
                    }
                    field[base + i as usize * stride] = acc;
                }
            }
        }
    }
}

/// Renders neurons as blurred tubes over Gaussian background noise (u16).
///
/// Intensity is `min(amplitude * blur(map), amplitude) + noise`, clipped to
/// the u16 range, where the unnormalised kernel peaks at 1.
pub fn render_volume(neurons: &[NeuronReconstruction], params: &SynthParams, seed: u64) -> Result<Volume> {
    params.validate()?;
    let dims = params.dims;
    let mut map = BinaryMap::empty(dims, [0; 3]);
    for n in neurons {
        map = rasterize_on(n, map).map;
    }
    let mut field: Vec<f64> = map.data().iter().map(|&v| v as f64).collect();
    let kernel = gaussian_kernel(params.blur);
    for axis in 0..3 {
        blur_axis(&mut field, dims, axis, &kernel);
    }
    let noise = Normal::new(params.noise_mean, params.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let voxels = field
        .iter()
        .map(|&f| {
            let signal = (params.amplitude * f).min(params.amplitude);
            let v = signal + noise.sample(&mut rng);
            v.round().clamp(0.0, u16::MAX as f64) as u16
        })
        .collect();
    Volume::new(dims, [0; 3], Voxels::U16(voxels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    TruncateSubtree,
    GraftForeignBranch,
    BackgroundLeak,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 3] = [
        ErrorKind::TruncateSubtree,
        ErrorKind::GraftForeignBranch,
        ErrorKind::BackgroundLeak,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpec {
    pub kind: ErrorKind,
    pub count: usize,
    /// Minimum distance of grafted or leaked points from every original point.
    pub min_displacement: f64,
    /// Points per grafted or leaked branch (upper bound for grafts).
    pub branch_points: usize,
    /// Leaked points stay inside `[0, bounds)` when set.
    pub bounds: Option<[usize; 3]>,
    pub seed: u64,
}

impl ErrorSpec {
    pub fn new(kind: ErrorKind, seed: u64) -> Self {
        ErrorSpec {
            kind,
            count: 1,
            min_displacement: 6.0,
            branch_points: 5,
            bounds: None,
            seed,
        }
    }
}

const ATTEMPTS: usize = 200;

struct Editor<'a> {
    original: &'a NeuronReconstruction,
    points: Vec<NeuronPoint>,
    next_id: u64,
}

impl Editor<'_> {
    fn present(&self, id: u64) -> bool {
        self.points.iter().any(|p| p.id == id)
    }

    fn min_distance_to_original(&self, pos: [f64; 3]) -> f64 {
        self.original
            .points()
            .iter()
            .map(|p| dist(p.position(), pos))
            .fold(f64::INFINITY, f64::min)
    }

    /// Original points still present in the edited tree.
    fn original_sites(&self) -> Vec<NeuronPoint> {
        self.points
            .iter()
            .filter(|p| p.id <= self.original.max_id())
            .cloned()
            .collect()
    }

    fn push_chain(&mut self, attach: u64, chain: &[[f64; 3]], kind: PointKind) {
        let mut parent = attach;
        for &pos in chain {
            let id = self.next_id;
            self.next_id += 1;
            self.points.push(NeuronPoint::new(id, kind, pos, 1.0, Some(parent)));
            parent = id;
        }
    }

    fn truncate<R: Rng>(&mut self, rng: &mut R, threshold: f64) -> Result<()> {
        let tree = NeuronReconstruction::new(self.original.neuron_id(), "edit", self.points.clone())?;
        let mut candidates: Vec<u64> = self
            .original_sites()
            .iter()
            .filter(|p| p.parent.is_some())
            .map(|p| p.id)
            .collect();
        candidates.sort_unstable();
        while !candidates.is_empty() {
            let c = candidates.swap_remove(rng.random_range(0..candidates.len()));
            let removed = tree.subtree_ids(c)?;
            let root = tree.get(c).unwrap().position();
            // the cut must leave the subtree root unmatched, or nothing is missing
            let visible = tree
                .points()
                .iter()
                .filter(|p| !removed.contains(&p.id))
                .all(|p| !(dist(p.position(), root) < threshold));
            if visible {
                self.points.retain(|p| !removed.contains(&p.id));
                return Ok(());
            }
        }
        Err(Error::InvalidArgument("no subtree can be truncated visibly".into()))
    }

    fn graft<R: Rng>(&mut self, rng: &mut R, neighbors: &[NeuronReconstruction], spec: &ErrorSpec) -> Result<()> {
        if neighbors.is_empty() {
            return Err(Error::InvalidArgument("no neighbor available for grafting".into()));
        }
        for _ in 0..ATTEMPTS {
            let donor = neighbors.choose(rng).unwrap();
            let start = donor.points().choose(rng).unwrap();
            let mut chain = Vec::new();
            let mut cur = Some(start);
            while let Some(p) = cur {
                if chain.len() == spec.branch_points || self.min_distance_to_original(p.position()) <= spec.min_displacement {
                    break;
                }
                chain.push(p.position());
                cur = p.parent.and_then(|id| donor.get(id));
            }
            if chain.is_empty() {
                continue;
            }
            // jump from the closest remaining original point onto the foreign branch
            let sites = self.original_sites();
            let attach = sites
                .iter()
                .min_by(|a, b| {
                    dist(a.position(), chain[0])
                        .total_cmp(&dist(b.position(), chain[0]))
                        .then(a.id.cmp(&b.id))
                })
                .ok_or_else(|| Error::InvalidArgument("no attachment site left".into()))?;
            let kind = attach.kind;
            let attach_id = attach.id;
            self.push_chain(attach_id, &chain, kind);
            return Ok(());
        }
        Err(Error::InvalidArgument("no neighbor branch lies far enough from the neuron".into()))
    }

    fn leak<R: Rng>(&mut self, rng: &mut R, spec: &ErrorSpec) -> Result<()> {
        let in_bounds = |p: [f64; 3]| match spec.bounds {
            Some(b) => (0..3).all(|a| p[a] >= 0.0 && p[a] <= b[a] as f64 - 1.0),
            None => true,
        };
        let sites = self.original_sites();
        if sites.is_empty() {
            return Err(Error::InvalidArgument("no attachment site left".into()));
        }
        let step = spec.min_displacement * 1.25;
        for _ in 0..ATTEMPTS {
            let attach = sites.choose(rng).unwrap();
            let mut chain: Vec<[f64; 3]> = Vec::new();
            let mut pos = attach.position();
            let mut dir = random_direction(rng);
            'walk: while chain.len() < spec.branch_points {
                for _ in 0..20 {
                    let d = unit(add(dir, random_direction(rng), 0.5));
                    let next = add(pos, d, step);
                    if in_bounds(next) && self.min_distance_to_original(next) > spec.min_displacement {
                        chain.push(next);
                        pos = next;
                        dir = d;
                        continue 'walk;
                    }
                }
                break;
            }
            if !chain.is_empty() {
                let attach_id = attach.id;
                self.push_chain(attach_id, &chain, PointKind::Other(0));
                return Ok(());
            }
        }
        Err(Error::InvalidArgument("no room to leak into the background".into()))
    }
}

/// Applies `spec` to a copy of `r` and returns the wrong reconstruction with
/// its ground-truth POIs against `r`.
pub fn inject_errors(
    r: &NeuronReconstruction,
    neighbors: &[NeuronReconstruction],
    spec: &ErrorSpec,
    cfg: &MatchConfig,
    wrong_label: &str,
) -> Result<(NeuronReconstruction, PoiLabelSet)> {
    if !(spec.min_displacement > cfg.threshold) {
        return Err(Error::InvalidArgument(format!(
            "minimum displacement {} must exceed the match threshold {}",
            spec.min_displacement, cfg.threshold
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut ed = Editor {
        original: r,
        points: r.points().to_vec(),
        next_id: r.max_id() + 1,
    };
    for _ in 0..spec.count {
        match spec.kind {
            ErrorKind::TruncateSubtree => ed.truncate(&mut rng, cfg.threshold)?,
            ErrorKind::GraftForeignBranch => ed.graft(&mut rng, neighbors, spec)?,
            ErrorKind::BackgroundLeak => ed.leak(&mut rng, spec)?,
        }
    }
    debug_assert!(ed.present(r.points()[0].id) || r.points()[0].parent.is_some());
    let wrong = NeuronReconstruction::new(r.neuron_id(), wrong_label, ed.points)?;
    let truth = poi_truth(&wrong, r, cfg.threshold)?;
    Ok((wrong, truth))
}

/// POIs of `wrong` against `correct` by direct application of the definition:
/// exhaustive nearest-point scans, children found from parent fields.
pub fn poi_truth(wrong: &NeuronReconstruction, correct: &NeuronReconstruction, threshold: f64) -> Result<PoiLabelSet> {
    // nearest point of `to` strictly within the threshold; ties to the smallest id
    fn nearest(p: &NeuronPoint, to: &NeuronReconstruction, threshold: f64) -> Option<u64> {
        let mut best: Option<(f64, u64)> = None;
        for q in to.points() {
            let dx = p.x - q.x;
            let dy = p.y - q.y;
            let dz = p.z - q.z;
            let d2 = dx * dx + dy * dy + dz * dz;
            if best.is_none_or(|(bd, bid)| d2 < bd || (d2 == bd && q.id < bid)) {
                best = Some((d2, q.id));
            }
        }
        best.filter(|(d2, _)| d2.sqrt() < threshold).map(|(_, id)| id)
    }
    let has_match = |p: &NeuronPoint, to: &NeuronReconstruction| nearest(p, to, threshold).is_some();

    let mut pairs = Vec::new();
    for p in wrong.points() {
        let Some(j) = nearest(p, correct, threshold) else { continue };
        let wrong_child = wrong
            .points()
            .iter()
            .filter(|c| c.parent == Some(p.id))
            .any(|c| !has_match(c, correct));
        let missing_child = correct
            .points()
            .iter()
            .filter(|c| c.parent == Some(j))
            .any(|c| !has_match(c, wrong));
        if let Some(reason) = PoiReason::from_flags(wrong_child, missing_child) {
            pairs.push(PoiPair {
                poi_id: p.id,
                control_id: j,
                reason,
            });
        }
    }
    PoiLabelSet::new(wrong.label(), correct.label(), threshold, pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub neurons: usize,
    /// Neurons rendered into each shared volume.
    pub per_volume: usize,
    /// Somata of one volume lie within this distance of the group center.
    pub cluster_radius: f64,
    pub threshold: f64,
    pub synth: SynthParams,
    pub seed: u64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            neurons: 40,
            per_volume: 4,
            cluster_radius: 12.0,
            threshold: crate::matching::DEFAULT_THRESHOLD,
            synth: SynthParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WrongCase {
    pub reconstruction: NeuronReconstruction,
    pub truth: PoiLabelSet,
    pub kind: ErrorKind,
}

#[derive(Debug, Clone)]
pub struct CorpusNeuron {
    pub neuron_id: u64,
    pub volume: usize,
    pub correct: NeuronReconstruction,
    pub wrong: Vec<WrongCase>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub params: CorpusParams,
    pub neurons: Vec<CorpusNeuron>,
    /// Empty unless rendering was requested.
    pub volumes: Vec<Volume>,
}

/// Generates neurons in groups sharing a volume, then one or two wrong
/// reconstructions per neuron with injected errors. Error kinds rotate so
/// every kind is represented.
pub fn generate_corpus(params: &CorpusParams, render: bool) -> Result<Corpus> {
    params.synth.validate()?;
    if params.per_volume == 0 {
        return Err(Error::InvalidArgument("per_volume must be positive".into()));
    }
    let cfg = MatchConfig::new(params.threshold)?;
    let groups = params.neurons.div_ceil(params.per_volume);
    let synth = &params.synth;

    let make_group = |g: usize| -> Result<Vec<NeuronReconstruction>> {
        let mut rng = stream(params.seed, g as u64);
        let center = random_interior(synth, &mut rng);
        let members = (g * params.per_volume..((g + 1) * params.per_volume).min(params.neurons)).collect::<Vec<_>>();
        members
            .into_iter()
            .map(|i| {
                let soma = (0..ATTEMPTS)
                    .map(|_| add(center, random_direction(&mut rng), rng.random_range(0.0..=params.cluster_radius)))
                    .find(|p| synth.inside(*p))
                    .unwrap_or(center);
                let seed = rng.random::<u64>();
                generate_neuron_at(synth, i as u64, soma, seed)
            })
            .collect()
    };
    let grouped: Vec<Vec<NeuronReconstruction>> = par_map(groups, make_group)?;

    let make_wrongs = |i: usize| -> Result<CorpusNeuron> {
        let g = i / params.per_volume;
        let group = &grouped[g];
        let correct = &group[i % params.per_volume];
        let neighbors: Vec<NeuronReconstruction> = group
            .iter()
            .filter(|n| n.neuron_id() != correct.neuron_id())
            .cloned()
            .collect();
        let mut rng = stream(params.seed ^ 0x5eed_e770, i as u64);
        let n_wrong = rng.random_range(1..=2usize);
        let mut wrong = Vec::with_capacity(n_wrong);
        for w in 0..n_wrong {
            let first = (i * 2 + w) % ErrorKind::ALL.len();
            let seed = rng.random::<u64>();
            let label = format!("n{:04}/wrong{}", correct.neuron_id(), w + 1);
            let mut last_err = None;
            for k in 0..ErrorKind::ALL.len() {
                let kind = ErrorKind::ALL[(first + k) % ErrorKind::ALL.len()];
                let mut spec = ErrorSpec::new(kind, seed);
                spec.bounds = Some(synth.dims);
                spec.min_displacement = (cfg.threshold * 1.5).max(cfg.threshold + 1.0);
                match inject_errors(correct, &neighbors, &spec, &cfg, &label) {
                    Ok((reconstruction, truth)) => {
                        wrong.push(WrongCase {
                            reconstruction,
                            truth,
                            kind,
                        });
                        last_err = None;
                        break;
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            if let Some(e) = last_err {
                return Err(e);
            }
        }
        Ok(CorpusNeuron {
            neuron_id: correct.neuron_id(),
            volume: g,
            correct: correct.clone(),
            wrong,
        })
    };
    let neurons = par_map(params.neurons, make_wrongs)?;

    let volumes = if render {
        par_map(groups, |g| render_volume(&grouped[g], synth, synth.seed ^ stream_seed(params.seed, g)))?
    } else {
        Vec::new()
    };
    Ok(Corpus {
        params: params.clone(),
        neurons,
        volumes,
    })
}

fn stream_seed(seed: u64, index: usize) -> u64 {
    stream(seed.wrapping_add(1), index as u64).random()
}

#[cfg(feature = "parallel")]
fn par_map<T: Send, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..n).map(f).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestReconstruction {
    pub label: String,
    pub reconstruction_id: u64,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestWrong {
    #[serde(flatten)]
    pub reconstruction: ManifestReconstruction,
    pub truth: String,
    pub error: ErrorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestNeuron {
    pub neuron_id: u64,
    pub volume: String,
    pub correct: ManifestReconstruction,
    pub wrong: Vec<ManifestWrong>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestVolume {
    pub key: String,
    pub path: String,
}

/// Index of a corpus directory. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub units: String,
    pub threshold: f64,
    pub params: CorpusParams,
    pub volumes: Vec<ManifestVolume>,
    pub neurons: Vec<ManifestNeuron>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn volume_key(g: usize) -> String {
    format!("vol_{g:03}")
}

/// Writes SWC files, truth label sets, volumes and the manifest under `dir`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir.join("neurons"))?;
    let mut volumes = Vec::new();
    if !corpus.volumes.is_empty() {
        fs::create_dir_all(dir.join("volumes"))?;
        for (g, vol) in corpus.volumes.iter().enumerate() {
            let rel = format!("volumes/{}.raw", volume_key(g));
            save_raw(vol, &dir.join(&rel))?;
            volumes.push(ManifestVolume { key: volume_key(g), path: rel });
        }
    }
    let mut neurons = Vec::new();
    for n in &corpus.neurons {
        let ndir = format!("neurons/n{:04}", n.neuron_id);
        fs::create_dir_all(dir.join(&ndir))?;
        let correct_rel = format!("{ndir}/correct.swc");
        fs::write(dir.join(&correct_rel), serialize_swc(&n.correct))?;
        let mut wrong = Vec::new();
        for (w, case) in n.wrong.iter().enumerate() {
            let swc_rel = format!("{ndir}/wrong{}.swc", w + 1);
            let truth_rel = format!("{ndir}/truth{}.json", w + 1);
            fs::write(dir.join(&swc_rel), serialize_swc(&case.reconstruction))?;
            fs::write(dir.join(&truth_rel), case.truth.to_json()?)?;
            wrong.push(ManifestWrong {
                reconstruction: ManifestReconstruction {
                    label: case.reconstruction.label().to_string(),
                    reconstruction_id: n.neuron_id * 10 + w as u64 + 1,
                    path: swc_rel,
                },
                truth: truth_rel,
                error: case.kind,
            });
        }
        neurons.push(ManifestNeuron {
            neuron_id: n.neuron_id,
            volume: volume_key(n.volume),
            correct: ManifestReconstruction {
                label: n.correct.label().to_string(),
                reconstruction_id: n.neuron_id * 10,
                path: correct_rel,
            },
            wrong,
        });
    }
    let manifest = Manifest {
        units: crate::COORDINATE_UNITS.to_string(),
        threshold: corpus.params.threshold,
        params: corpus.params.clone(),
        volumes,
        neurons,
    };
    fs::write(dir.join(MANIFEST_NAME), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn neuron_ids(&self) -> Vec<u64> {
        self.neurons.iter().map(|n| n.neuron_id).collect()
    }

    /// Parses every reconstruction and loads every volume listed.
    pub fn load_catalog(&self, root: &Path) -> Result<Catalog> {
        let mut cat = Catalog::new();
        for v in &self.volumes {
            cat.add_volume(v.key.clone(), load_volume(&root.join(&v.path))?);
        }
        for n in &self.neurons {
            let recs = std::iter::once(&n.correct).chain(n.wrong.iter().map(|w| &w.reconstruction));
            for rec in recs {
                let text = fs::read_to_string(root.join(&rec.path))?;
                let r = parse_swc(&text, n.neuron_id, rec.label.clone())?;
                cat.add_reconstruction(rec.reconstruction_id, r, n.volume.clone())?;
            }
        }
        Ok(cat)
    }

    pub fn truth_paths(&self, root: &Path) -> Vec<PathBuf> {
        self.neurons
            .iter()
            .flat_map(|n| n.wrong.iter().map(|w| root.join(&w.truth)))
            .collect()
    }
}
