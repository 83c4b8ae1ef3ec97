#![allow(dead_code)]

use std::collections::BTreeSet;

use neuroqc::patch::Patch;
use neuroqc::raster::BinaryMap;
use neuroqc::volume::Volume;
use neuroqc::{NeuronPoint, NeuronReconstruction, PointKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random forest of `n` points in `[0, extent)^3`. Ids are sparse and
/// points are stored in shuffled order so parents may follow children.
pub fn random_tree(neuron_id: u64, n: usize, extent: f64, seed: u64) -> NeuronReconstruction {
    let mut rng = rng(seed);
    let mut ids: Vec<u64> = (1..=n as u64).map(|i| i * 3 + rng.random_range(0..3)).collect();
    ids.sort_unstable();
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let parent = if i == 0 || rng.random_bool(0.02) {
            None
        } else {
            Some(ids[rng.random_range(i.saturating_sub(20)..i)])
        };
        let kind = PointKind::from_code(rng.random_range(1..=7));
        let pos = [
            rng.random_range(0.0..extent),
            rng.random_range(0.0..extent),
            rng.random_range(0.0..extent),
        ];
        pts.push(NeuronPoint::new(ids[i], kind, pos, rng.random_range(0.1..3.0), parent));
    }
    for i in (1..pts.len()).rev() {
        let j = rng.random_range(0..=i);
        pts.swap(i, j);
    }
    NeuronReconstruction::new(neuron_id, format!("t{seed}"), pts).expect("random tree is valid")
}

/// Same topology with every coordinate moved by `f`.
pub fn moved(r: &NeuronReconstruction, label: &str, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> NeuronReconstruction {
    let pts = r
        .points()
        .iter()
        .map(|p| NeuronPoint::new(p.id, p.kind, f(p.position()), p.radius, p.parent))
        .collect();
    NeuronReconstruction::new(r.neuron_id(), label, pts).unwrap()
}

pub fn d2(a: &NeuronPoint, b: &NeuronPoint) -> f64 {
    (a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)
}

/// Exhaustive nearest point within `t`, ties to the smallest id.
pub fn naive_match(p: &NeuronPoint, to: &NeuronReconstruction, t: f64) -> Option<(u64, f64)> {
    let mut best: Option<(u64, f64)> = None;
    for q in to.points() {
        let d = d2(p, q);
        match best {
            Some((bid, bd)) if bd < d || (bd == d && bid < q.id) => {}
            _ => best = Some((q.id, d)),
        }
    }
    best.map(|(id, d)| (id, d.sqrt())).filter(|&(_, d)| d < t)
}

/// The POI definition applied literally: (poi, control, wrong_child, missing_child).
pub fn naive_pois(wrong: &NeuronReconstruction, correct: &NeuronReconstruction, t: f64) -> Vec<(u64, u64, bool, bool)> {
    let mut out = Vec::new();
    for p in wrong.points() {
        let Some((j, _)) = naive_match(p, correct, t) else { continue };
        let wc = wrong
            .points()
            .iter()
            .any(|c| c.parent == Some(p.id) && naive_match(c, correct, t).is_none());
        let mc = correct
            .points()
            .iter()
            .any(|c| c.parent == Some(j) && naive_match(c, wrong, t).is_none());
        if wc || mc {
            out.push((p.id, j, wc, mc));
        }
    }
    out.sort_by_key(|e| e.0);
    out
}

/// Voxels of each segment drawn independently with float rounding, then unioned.
pub fn naive_raster(r: &NeuronReconstruction, origin: [i64; 3], dims: [usize; 3]) -> BTreeSet<[i64; 3]> {
    let vox = |p: &NeuronPoint| {
        [
            (p.x - origin[0] as f64).round() as i64,
            (p.y - origin[1] as f64).round() as i64,
            (p.z - origin[2] as f64).round() as i64,
        ]
    };
    let mut set = BTreeSet::new();
    for p in r.points() {
        let b = vox(p);
        set.insert(b);
        if let Some(parent) = p.parent {
            let a = vox(r.get(parent).unwrap());
            let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let n = d.iter().map(|v| v.abs()).max().unwrap();
            for k in 0..=n {
                let step = |c: usize| {
                    if n == 0 {
                        a[c]
                    } else {
                        a[c] + ((k * d[c]) as f64 / n as f64).round() as i64
                    }
                };
                set.insert([step(0), step(1), step(2)]);
            }
        }
    }
    set.into_iter()
        .filter(|v| (0..3).all(|a| v[a] >= 0 && v[a] < dims[a] as i64))
        .collect()
}

/// Triple-loop crop: element by element, zero outside the volume.
pub fn naive_crop(vol: &Volume, map: &BinaryMap, center: &NeuronPoint, size: usize) -> Vec<f32> {
    let o = vol.origin();
    let c = [
        (center.x - o[0] as f64).round() as i64,
        (center.y - o[1] as f64).round() as i64,
        (center.z - o[2] as f64).round() as i64,
    ];
    let half = size as i64 / 2;
    let max = vol.dtype().max_value() as f32;
    let mut out = vec![0.0f32; 2 * size * size * size];
    for z in 0..size {
        for y in 0..size {
            for x in 0..size {
                let (vx, vy, vz) = (c[0] - half + x as i64, c[1] - half + y as i64, c[2] - half + z as i64);
                let i = (z * size + y) * size + x;
                if let Some(v) = vol.get_signed(vx, vy, vz) {
                    out[i] = v as f32 / max;
                    out[size * size * size + i] = map.get_signed(vx, vy, vz) as f32;
                }
            }
        }
    }
    out
}

pub fn patch_bits(p: &Patch) -> Vec<u32> {
    p.data.iter().map(|v| v.to_bits()).collect()
}

/// (#{pos > neg} + 0.5 #{ties}) / (npos nneg) by enumerating every pair.
pub fn pair_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Scores drawn from a small grid so ties are frequent.
pub fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<u8>) {
    loop {
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if labels.contains(&0) && labels.contains(&1) {
            let scores = (0..n).map(|_| rng.random_range(0..=20) as f64 / 20.0).collect();
            return (scores, labels);
        }
    }
}
