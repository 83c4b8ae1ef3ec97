//! Browser demo: synthesize a traced neuron with one injected error, label
//! its points of interest at an adjustable threshold, look at the patch
//! slices around them, and explore how score overlap moves the metrics.

use neuroqc::metrics::{confusion_at, roc_auc};
use neuroqc::patch::{crop_patch, PATCH_SIZE};
use neuroqc::raster::rasterize;
use neuroqc::synthetic::{generate_neuron_at, inject_errors, render_volume, ErrorKind, ErrorSpec, SynthParams};
use neuroqc::volume::Volume;
use neuroqc::{label_pois, MatchConfig, NeuronReconstruction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn params() -> SynthParams {
    SynthParams {
        dims: [64, 64, 40],
        max_points: 70,
        min_points: 20,
        ..SynthParams::default()
    }
}

fn kind_of(name: &str) -> Result<ErrorKind, String> {
    match name {
        "truncate" => Ok(ErrorKind::TruncateSubtree),
        "graft" => Ok(ErrorKind::GraftForeignBranch),
        "leak" => Ok(ErrorKind::BackgroundLeak),
        other => Err(format!("unknown error kind {other:?}")),
    }
}

#[derive(Serialize)]
struct Pt {
    id: u64,
    x: f64,
    y: f64,
    z: f64,
    parent: Option<u64>,
}

fn pts(r: &NeuronReconstruction) -> Vec<Pt> {
    r.points()
        .iter()
        .map(|p| Pt {
            id: p.id,
            x: p.x,
            y: p.y,
            z: p.z,
            parent: p.parent,
        })
        .collect()
}

/// One synthetic QC case: correct and wrong tracing over a rendered volume.
#[wasm_bindgen]
pub struct Case {
    correct: NeuronReconstruction,
    wrong: NeuronReconstruction,
    neighbor: NeuronReconstruction,
    volume: Volume,
}

impl Case {
    pub fn build(seed: u32, kind: &str) -> Result<Case, String> {
        let p = params();
        let seed = seed as u64;
        let correct = generate_neuron_at(&p, 1, [30.0, 30.0, 20.0], seed).map_err(|e| e.to_string())?;
        let neighbor = generate_neuron_at(&p, 2, [38.0, 34.0, 20.0], seed ^ 0x9e37).map_err(|e| e.to_string())?;
        let mut spec = ErrorSpec::new(kind_of(kind)?, seed);
        spec.bounds = Some(p.dims);
        let (wrong, _) = inject_errors(&correct, std::slice::from_ref(&neighbor), &spec, &MatchConfig::default(), "wrong")
            .map_err(|e| e.to_string())?;
        let volume = render_volume(&[correct.clone(), neighbor.clone()], &p, seed).map_err(|e| e.to_string())?;
        Ok(Case {
            correct,
            wrong,
            neighbor,
            volume,
        })
    }

    pub fn label_json(&self, threshold: f64) -> Result<String, String> {
        #[derive(Serialize)]
        struct Out<'a> {
            dims: [usize; 3],
            correct: Vec<Pt>,
            wrong: Vec<Pt>,
            neighbor: Vec<Pt>,
            pairs: &'a [neuroqc::poi::PoiPair],
        }
        let cfg = MatchConfig::new(threshold).map_err(|e| e.to_string())?;
        let set = label_pois(&self.wrong, &self.correct, &cfg).map_err(|e| e.to_string())?;
        serde_json::to_string(&Out {
            dims: self.volume.dims(),
            correct: pts(&self.correct),
            wrong: pts(&self.wrong),
            neighbor: pts(&self.neighbor),
            pairs: &set.pairs,
        })
        .map_err(|e| e.to_string())
    }

    /// Both channels of the z-slice `z` (0..32) of the patch around a point,
    /// each `32 * 32` values, intensity first.
    pub fn slice(&self, wrong: bool, point_id: u64, z: usize) -> Result<Vec<f32>, String> {
        let r = if wrong { &self.wrong } else { &self.correct };
        let point = r.get(point_id).ok_or_else(|| format!("no point {point_id}"))?;
        let map = rasterize(r, &self.volume).map;
        let patch = crop_patch(&self.volume, &map, point, PATCH_SIZE).map_err(|e| e.to_string())?;
        let z = z.min(PATCH_SIZE - 1);
        let plane = PATCH_SIZE * PATCH_SIZE;
        let mut out = Vec::with_capacity(2 * plane);
        for c in 0..2 {
            let start = patch.index(c, 0, 0, z);
            out.extend_from_slice(&patch.data[start..start + plane]);
        }
        Ok(out)
    }
}

#[wasm_bindgen]
impl Case {
    /// `kind` is one of "truncate", "graft" or "leak".
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, kind: &str) -> Result<Case, JsValue> {
        Case::build(seed, kind).map_err(|e| JsValue::from_str(&e))
    }

    /// Points of both tracings and the POI pairs at `threshold`, as JSON.
    pub fn label(&self, threshold: f64) -> Result<String, JsValue> {
        self.label_json(threshold).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen(js_name = patchSlice)]
    pub fn patch_slice(&self, wrong: bool, point_id: u32, z: u32) -> Result<Vec<f32>, JsValue> {
        self.slice(wrong, point_id as u64, z as usize).map_err(|e| JsValue::from_str(&e))
    }
}

#[derive(Serialize)]
struct Explored {
    auc: f64,
    accuracy: Option<f64>,
    sensitivity: Option<f64>,
    specificity: Option<f64>,
    precision: Option<f64>,
    /// (false positive rate, true positive rate) at each distinct score
    roc: Vec<(f64, f64)>,
}

/// Metrics for `n` positives and `n` negatives with Gaussian scores centred
/// at 0.5 ± `separation` / 2, clipped to [0, 1].
pub fn explore_json(n: u32, separation: f64, spread: f64, threshold: f64, seed: u32) -> Result<String, String> {
    let n = n.max(1) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let mut scores = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(2 * n);
    for label in [1u8, 0] {
        let centre = 0.5 + if label == 1 { separation / 2.0 } else { -separation / 2.0 };
        let dist = Normal::new(centre, spread.max(1e-6)).map_err(|e| e.to_string())?;
        for _ in 0..n {
            // quantized so ties show up
            let s: f64 = dist.sample(&mut rng);
            scores.push((s.clamp(0.0, 1.0) * 100.0).round() / 100.0);
            labels.push(label);
        }
    }
    let auc = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
    let c = confusion_at(&scores, &labels, threshold).map_err(|e| e.to_string())?;
    let mut cuts: Vec<f64> = scores.clone();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut roc = vec![(0.0, 0.0)];
    for t in cuts {
        let k = confusion_at(&scores, &labels, t).map_err(|e| e.to_string())?;
        roc.push((1.0 - k.specificity().unwrap_or(1.0), k.sensitivity().unwrap_or(0.0)));
    }
    serde_json::to_string(&Explored {
        auc,
        accuracy: c.accuracy(),
        sensitivity: c.sensitivity(),
        specificity: c.specificity(),
        precision: c.precision(),
        roc,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn explore(n: u32, separation: f64, spread: f64, threshold: f64, seed: u32) -> Result<String, JsValue> {
    explore_json(n, separation, spread, threshold, seed).map_err(|e| JsValue::from_str(&e))
}
