//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{moved, naive_crop, naive_match, naive_pois, pair_auc, patch_bits, random_scores, random_tree, rng};
use neuroqc::dataset::{export_dataset, import_dataset, split_folds, Group, SampleRecord, HEADER_LEN, RECORD_LEN};
use neuroqc::metrics::{confusion_at, roc_auc, Summary};
use neuroqc::patch::{crop_patch, PATCH_SIZE};
use neuroqc::raster::rasterize;
use neuroqc::synthetic::{generate_corpus, generate_neuron, CorpusParams, ErrorKind, SynthParams};
use neuroqc::volume::{Volume, Voxels};
use neuroqc::{find_match, label_pois, match_map, Error, MatchConfig, NeuronPoint, PoiReason, PointKind, SpatialIndex};
use rand::Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, format!("took {t:.1?}, limit {limit:?}"))?;
    Ok(t)
}

fn matching_equivalence() -> Outcome {
    let start = Instant::now();
    let cfg = MatchConfig::default();
    let mut r = rng(2024);
    let mut compared = 0usize;
    let mut matched = 0usize;
    let mut largest = 0usize;
    for pair in 0..100u64 {
        let n = if pair % 10 == 0 { 5000 } else { r.random_range(1..=5000) };
        let m = if pair % 10 == 5 { 5000 } else { r.random_range(1..=5000) };
        largest = largest.max(n).max(m);
        // density keeps a good share of points near the threshold
        let extent = (n.max(m) as f64).cbrt() * 4.0;
        let src = random_tree(7, n, extent, r.random());
        let dst = if pair % 2 == 0 {
            random_tree(7, m, extent, r.random())
        } else {
            let mut jr = rng(r.random());
            moved(&src, "jittered", |p| {
                [
                    p[0] + jr.random_range(-4.0..4.0),
                    p[1] + jr.random_range(-4.0..4.0),
                    p[2] + jr.random_range(-4.0..4.0),
                ]
            })
        };
        let fast = match_map(&src, &dst, &cfg).map_err(|e| e.to_string())?;
        let oracle: Vec<(u64, Option<(u64, f64)>)> = src
            .points()
            .par_iter()
            .map(|p| (p.id, naive_match(p, &dst, cfg.threshold)))
            .collect();
        let mut oracle = oracle;
        oracle.sort_by_key(|e| e.0);
        ensure(fast.entries.len() == oracle.len(), format!("pair {pair}: entry count"))?;
        for (e, (id, o)) in fast.entries.iter().zip(&oracle) {
            let got = e.dst_id.zip(e.distance);
            ensure(e.src_id == *id && got == *o, format!("pair {pair}: point {id} gave {got:?}, oracle {o:?}"))?;
        }
        compared += oracle.len();
        matched += fast.matched_count();
    }
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!("100 pairs, {compared} points ({matched} matched), largest {largest}, {t:.1?}"))
}

fn strict_boundary() -> Outcome {
    let cfg = MatchConfig::default();
    let at = |x: f64| {
        let target = neuroqc::NeuronReconstruction::new(1, "t", vec![NeuronPoint::new(1, PointKind::Soma, [x, 0.0, 0.0], 1.0, None)]).unwrap();
        let probe = NeuronPoint::new(9, PointKind::Soma, [0.0; 3], 1.0, None);
        find_match(&probe, &SpatialIndex::build(&target).unwrap(), &cfg).map(|n| n.distance)
    };
    ensure(at(3.999) == Some(3.999), "3.999 should match")?;
    ensure(at(4.0).is_none(), "4.0 must not match")?;
    ensure(cfg.threshold == 4.0, "default threshold is 4")?;
    Ok("3.999 matches, 4.0 does not".into())
}

fn poi_equivalence() -> Outcome {
    let start = Instant::now();
    let params = CorpusParams {
        neurons: 150,
        seed: 99,
        ..CorpusParams::default()
    };
    let corpus = generate_corpus(&params, false).map_err(|e| e.to_string())?;
    let cfg = MatchConfig::new(params.threshold).unwrap();
    let mut cases = 0;
    let mut kinds = BTreeSet::new();
    let mut pois = 0;
    let mut reasons = BTreeSet::new();
    for n in &corpus.neurons {
        for case in &n.wrong {
            let got = label_pois(&case.reconstruction, &n.correct, &cfg).map_err(|e| e.to_string())?;
            ensure(got == case.truth, format!("neuron {}: {:?} vs truth {:?}", n.neuron_id, got.pairs, case.truth.pairs))?;
            let naive = naive_pois(&case.reconstruction, &n.correct, cfg.threshold);
            ensure(got.pairs.len() == naive.len(), format!("neuron {}: brute force disagrees", n.neuron_id))?;
            cases += 1;
            pois += got.len();
            kinds.insert(format!("{:?}", case.kind));
            reasons.extend(got.pairs.iter().map(|p| format!("{:?}", p.reason)));
        }
    }
    ensure(cases >= 200, format!("only {cases} wrong reconstructions"))?;
    ensure(kinds.len() == ErrorKind::ALL.len(), format!("kinds covered: {kinds:?}"))?;
    let t = within(Duration::from_secs(120), start)?;
    Ok(format!("{cases} cases, {pois} POIs, kinds {kinds:?}, reasons {reasons:?}, {t:.1?}"))
}

fn identity_null() -> Outcome {
    let params = SynthParams::default();
    let cfg = MatchConfig::default();
    let mut points = 0;
    for seed in 0..100 {
        let r = generate_neuron(&params, seed, seed).map_err(|e| e.to_string())?;
        let set = label_pois(&r, &r, &cfg).map_err(|e| e.to_string())?;
        ensure(set.is_empty(), format!("neuron {seed}: {} POIs against itself", set.len()))?;
        points += r.len();
    }
    Ok(format!("100 neurons, {points} points, no POIs"))
}

fn patch_oracle() -> Outcome {
    let mut r = rng(500);
    let mut records = Vec::new();
    let (mut inside, mut border, mut outside) = (0, 0, 0);
    for case in 0..500u64 {
        let small = if case % 3 == 0 { 40 } else { 8 };
        let dims = [r.random_range(small..90), r.random_range(small..90), r.random_range(small..90)];
        let origin = [r.random_range(-30..30), r.random_range(-30..30), r.random_range(-30..30)];
        let n: usize = dims.iter().product();
        let voxels = if case % 2 == 0 {
            Voxels::U8((0..n).map(|_| r.random()).collect())
        } else {
            Voxels::U16((0..n).map(|_| r.random()).collect())
        };
        let vol = Volume::new(dims, origin, voxels).unwrap();
        let tree = random_tree(3, 40, 80.0, case);
        let tree = moved(&tree, "t", |p| [p[0] + origin[0] as f64 - 4.0, p[1] + origin[1] as f64 - 4.0, p[2] + origin[2] as f64 - 4.0]);
        let map = rasterize(&tree, &vol).map;
        // a third each: interior, within half a patch of a face, far outside
        let pos: [f64; 3] = std::array::from_fn(|a| {
            let (lo, hi) = (origin[a] as f64, (origin[a] + dims[a] as i64) as f64);
            match case % 3 {
                0 => r.random_range(lo + 16.0..hi - 16.0),
                1 => {
                    let edge = if r.random_bool(0.5) { lo } else { hi };
                    edge + r.random_range(-16.0..16.0)
                }
                _ => r.random_range(lo - 60.0..hi + 60.0),
            }
        });
        let center = NeuronPoint::new(case + 1, PointKind::Other(0), pos, 1.0, None);
        let patch = crop_patch(&vol, &map, &center, PATCH_SIZE).map_err(|e| e.to_string())?;
        let oracle: Vec<u32> = naive_crop(&vol, &map, &center, PATCH_SIZE).iter().map(|v| v.to_bits()).collect();
        ensure(patch_bits(&patch) == oracle, format!("center {case} at {pos:?} differs from the naive copy"))?;
        let contained = (0..3).all(|a| patch.corner[a] >= 0 && patch.corner[a] + PATCH_SIZE as i64 <= dims[a] as i64);
        match (patch.degenerate, contained) {
            (true, _) => outside += 1,
            (false, true) => inside += 1,
            (false, false) => border += 1,
        }
        if case < 24 {
            let group = [Group::Poi, Group::MatchControl, Group::RandomControl][case as usize % 3];
            records.push(SampleRecord::from_patch(3, case, group, patch).map_err(|e| e.to_string())?);
        }
    }
    ensure(border > 0 && outside > 0, "border and outside cases must occur")?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("patches.nqcd");
    export_dataset(&records, &path).map_err(|e| e.to_string())?;
    let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    ensure(bytes.len() == HEADER_LEN + records.len() * RECORD_LEN, "file size")?;
    let back = import_dataset(&path).map_err(|e| e.to_string())?;
    for (a, b) in records.iter().zip(&back) {
        let bits = |r: &SampleRecord| r.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        ensure(
            (a.neuron_id, a.reconstruction_id, a.point_id, a.label, a.group) == (b.neuron_id, b.reconstruction_id, b.point_id, b.label, b.group)
                && bits(a) == bits(b),
            format!("record {} changed in the round trip", a.point_id),
        )?;
    }
    ensure(back.len() == records.len(), "record count")?;
    let again = dir.path().join("again.nqcd");
    export_dataset(&back, &again).map_err(|e| e.to_string())?;
    ensure(std::fs::read(&again).map_err(|e| e.to_string())? == bytes, "re-export not byte-identical")?;

    let mut corrupt = bytes.clone();
    let victim = HEADER_LEN + 5 * RECORD_LEN + 40 + 1234;
    corrupt[victim] ^= 0x10;
    let bad = dir.path().join("bad.nqcd");
    std::fs::write(&bad, &corrupt).map_err(|e| e.to_string())?;
    match import_dataset(&bad) {
        Err(Error::Checksum { record: 5, .. }) => {}
        other => return Err(format!("corrupted payload not caught: {:?}", other.map(|v| v.len()))),
    }
    Ok(format!(
        "500 centers ({inside} interior, {border} partial, {outside} empty) exact; {} records round-trip bit-exact; flipped byte rejected by CRC",
        records.len()
    ))
}

fn fold_integrity() -> Outcome {
    let ids: Vec<u64> = (0..254).map(|i| 1000 + 7 * i).collect();
    for seed in [0, 1, 42, 12345] {
        let split = split_folds(&ids, 5, seed).map_err(|e| e.to_string())?;
        let mut sizes = split.sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        ensure(sizes == [51, 51, 51, 51, 50], format!("seed {seed}: sizes {sizes:?}"))?;
        let mut seen = BTreeSet::new();
        for fold in split.folds() {
            for id in fold {
                ensure(seen.insert(id), format!("seed {seed}: neuron {id} in two folds"))?;
            }
        }
        ensure(seen == ids.iter().copied().collect(), format!("seed {seed}: neurons lost"))?;
    }
    Ok("254 neurons, k=5, sizes {51,51,51,51,50}, disjoint, 4 seeds".into())
}

fn metrics() -> Outcome {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = r.random_range(2..150);
        let (scores, labels) = random_scores(&mut r, n);
        let auc = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((auc - pair_auc(&scores, &labels)).abs());
        let remapped: Vec<f64> = scores.iter().map(|s| (s * 5.0).exp() / 1000.0).collect();
        ensure(roc_auc(&remapped, &labels).unwrap() == auc, "AUC changed under a monotone transform")?;
        let c = confusion_at(&scores, &labels, 0.5).map_err(|e| e.to_string())?;
        let count = |p: bool, l: u8| scores.iter().zip(&labels).filter(|(s, y)| (**s >= 0.5) == p && **y == l).count() as u64;
        ensure(
            (c.tp, c.fp, c.tn, c.fn_) == (count(true, 1), count(true, 0), count(false, 0), count(false, 1)),
            "confusion counts differ from a direct count",
        )?;
    }
    ensure(worst <= 1e-12, format!("max AUC deviation {worst:e}"))?;
    let cell = Summary { mean: 0.949, std: 0.014, folds: 5 }.render();
    ensure(cell == "94.9±1.4", format!("rendered {cell}"))?;
    ensure(PoiReason::from_flags(true, true) == Some(PoiReason::Both), "reason flags")?;
    Ok(format!("1000 tables, max |AUC - pair count| = {worst:e}; monotone invariant; confusion exact; renders {cell}"))
}

fn run(bin: &Path, args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(bin).args(args).current_dir(cwd).output().map_err(|e| e.to_string())?;
    ensure(
        out.status.success(),
        format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)),
    )
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn cli_determinism() -> Outcome {
    let bin = Path::new(env!("CARGO_BIN_EXE_neuroqc"));
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut scores = String::from("record_index,neuron_id,point_id,fold,label,score\n");
    let mut r = rng(3);
    for i in 0..200 {
        scores.push_str(&format!("{i},{},{},{},{},{}\n", i / 4, i, i % 5, i % 2, r.random_range(0..=100) as f64 / 100.0));
    }

    let mut checked = Vec::new();
    for run_id in ["a", "b"] {
        let workers = if run_id == "a" { "1" } else { "4" };
        // identical relative paths in two separate directories
        let w = work.path().join(run_id);
        std::fs::create_dir_all(w.join("out")).unwrap();
        std::fs::write(w.join("ids.txt"), (0..254).map(|i| format!("{i}\n")).collect::<String>()).unwrap();
        std::fs::write(w.join("scores.csv"), &scores).unwrap();
        let o = |name: &str| format!("out/{name}");
        let corpus = o("corpus");
        let manifest = format!("{corpus}/manifest.json");
        let steps: Vec<Vec<String>> = vec![
            vec!["synth".into(), "--neurons".into(), "12".into(), "--seed".into(), "7".into(), "--out".into(), corpus.clone()],
            vec!["validate".into(), format!("{corpus}/neurons/n0003/correct.swc"), format!("{corpus}/neurons/n0003/wrong1.swc"), "--out".into(), o("validate.json")],
            vec![
                "label".into(),
                "--wrong".into(),
                format!("{corpus}/neurons/n0003/wrong1.swc"),
                "--correct".into(),
                format!("{corpus}/neurons/n0003/correct.swc"),
                "--neuron-id".into(),
                "3".into(),
                "--out".into(),
                o("labels.json"),
                "--matches".into(),
                o("matches.json"),
            ],
            vec![
                "crop".into(),
                "--labels".into(),
                o("labels.json"),
                "--wrong".into(),
                format!("{corpus}/neurons/n0003/wrong1.swc"),
                "--correct".into(),
                format!("{corpus}/neurons/n0003/correct.swc"),
                "--volume".into(),
                format!("{corpus}/volumes/vol_000.raw"),
                "--neuron-id".into(),
                "3".into(),
                "--out".into(),
                o("single.nqcd"),
            ],
            vec!["crop".into(), "--manifest".into(), manifest.clone(), "--out".into(), o("pairs.nqcd")],
            vec!["pool".into(), "--manifest".into(), manifest.clone(), "--count".into(), "25".into(), "--seed".into(), "5".into(), "--out".into(), o("pool.nqcd")],
            vec!["split".into(), "--ids".into(), "ids.txt".into(), "--seed".into(), "9".into(), "--out".into(), o("folds.json")],
            vec!["split".into(), "--manifest".into(), manifest.clone(), "--seed".into(), "9".into(), "--out".into(), o("folds_manifest.json")],
            vec!["eval".into(), "--scores".into(), "scores.csv".into(), "--out".into(), o("report.json"), "--table".into(), o("report.txt")],
        ];
        for step in &steps {
            let mut args: Vec<&str> = vec!["--workers", workers];
            args.extend(step.iter().map(String::as_str));
            run(bin, &args, &w)?;
            if run_id == "a" {
                checked.push(step[0].clone());
            }
        }
    }
    let a = tree_bytes(&work.path().join("a"));
    let b = tree_bytes(&work.path().join("b"));
    ensure(a.len() == b.len(), "different file sets")?;
    for ((pa, da), (pb, db)) in a.iter().zip(&b) {
        ensure(pa == pb && da == db, format!("{pa} differs between runs"))?;
    }
    checked.dedup();
    Ok(format!("{} files byte-identical across reruns (1 vs 4 workers): {}", a.len(), checked.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("matching oracle equivalence", matching_equivalence),
        ("strict match boundary", strict_boundary),
        ("POI oracle equivalence", poi_equivalence),
        ("identity null result", identity_null),
        ("patch oracle and dataset round trip", patch_oracle),
        ("fold integrity", fold_integrity),
        ("metrics", metrics),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
