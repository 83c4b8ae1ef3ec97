use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use log::info;
use neuroqc::dataset::{build_control_pool, build_pairs, export_dataset, split_folds, Catalog};
use neuroqc::metrics::{report_with_population, ScoreTable};
use neuroqc::synthetic::{generate_corpus, write_corpus, CorpusParams, Manifest, SynthParams};
use neuroqc::volume::load_volume;
use neuroqc::{label_pois, match_map, parse_swc, Error, MatchConfig, NeuronReconstruction, PoiLabelSet, Result};
use serde::Serialize;

use crate::args::Command;

/// Fails with a not-found I/O error unless every path exists.
fn require(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.exists() {
            return Err(Error::Io(io::Error::new(
                io::ErrorKind::NotFound,
                format!("{} does not exist", p.display()),
            )));
        }
    }
    Ok(())
}

/// Output files go into existing directories only.
fn writable(out: &Path) -> Result<()> {
    match out.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => require(&[dir]),
        _ => Ok(()),
    }
}

fn read_swc(path: &Path, neuron_id: u64, label: &str) -> Result<NeuronReconstruction> {
    let text = fs::read_to_string(path)?;
    parse_swc(&text, neuron_id, label).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn label_of(path: &Path) -> String {
    path.display().to_string()
}

fn manifest_root(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Catalog of a manifest plus freshly computed label sets for every wrong
/// reconstruction, in manifest order.
fn labelled_corpus(path: &Path, cfg: &MatchConfig) -> Result<(Manifest, Catalog, Vec<PoiLabelSet>)> {
    let manifest = Manifest::load(path)?;
    let catalog = manifest.load_catalog(&manifest_root(path))?;
    let mut sets = Vec::new();
    for n in &manifest.neurons {
        let correct = &catalog.entry(&n.correct.label)?.reconstruction;
        for w in &n.wrong {
            let wrong = &catalog.entry(&w.reconstruction.label)?.reconstruction;
            sets.push(label_pois(wrong, correct, cfg)?);
        }
    }
    Ok((manifest, catalog, sets))
}

#[derive(Serialize)]
struct ValidationResult {
    file: String,
    ok: bool,
    points: Option<usize>,
    roots: Option<usize>,
    error: Option<String>,
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { files, out } => {
            let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
            require(&refs)?;
            if let Some(out) = &out {
                writable(out)?;
            }
            let mut results = Vec::new();
            for f in &files {
                let r = read_swc(f, 0, &label_of(f));
                match &r {
                    Ok(r) => eprintln!("{}: ok, {} points, {} roots", f.display(), r.len(), r.roots().count()),
                    Err(e) => eprintln!("{}: {e}", f.display()),
                }
                if let Err(Error::Io(e)) = r {
                    return Err(Error::Io(e));
                }
                results.push(ValidationResult {
                    file: label_of(f),
                    ok: r.is_ok(),
                    points: r.as_ref().ok().map(|r| r.len()),
                    roots: r.as_ref().ok().map(|r| r.roots().count()),
                    error: r.as_ref().err().map(|e| e.to_string()),
                });
            }
            if let Some(out) = &out {
                fs::write(out, serde_json::to_string_pretty(&results)?)?;
            }
            let bad = results.iter().filter(|r| !r.ok).count();
            if bad > 0 {
                return Err(Error::Validation(format!("{bad} of {} files invalid", results.len())));
            }
            Ok(())
        }

        Command::Label {
            wrong,
            correct,
            out,
            matches,
            neuron_id,
            threshold,
        } => {
            require(&[&wrong, &correct])?;
            writable(&out)?;
            let cfg = MatchConfig::new(threshold.threshold)?;
            let w = read_swc(&wrong, neuron_id, &label_of(&wrong))?;
            let c = read_swc(&correct, neuron_id, &label_of(&correct))?;
            let set = label_pois(&w, &c, &cfg)?;
            info!("{} points of interest in {}", set.len(), wrong.display());
            fs::write(&out, set.to_json()?)?;
            if let Some(m) = matches {
                fs::write(m, match_map(&w, &c, &cfg)?.to_json()?)?;
            }
            Ok(())
        }

        Command::Crop {
            manifest,
            labels,
            wrong,
            correct,
            volume,
            neuron_id,
            wrong_id,
            correct_id,
            out,
            threshold,
        } => {
            writable(&out)?;
            let (catalog, sets) = if let Some(m) = manifest {
                require(&[&m])?;
                let cfg = MatchConfig::new(threshold.threshold)?;
                let (_, catalog, sets) = labelled_corpus(&m, &cfg)?;
                (catalog, sets)
            } else {
                let (Some(labels), Some(wrong), Some(correct), Some(volume)) = (labels, wrong, correct, volume) else {
                    return Err(Error::InvalidArgument(
                        "crop needs --manifest, or --labels with --wrong, --correct and --volume".into(),
                    ));
                };
                require(&[&labels, &wrong, &correct, &volume])?;
                let set = PoiLabelSet::from_json(&fs::read_to_string(&labels)?)?;
                let mut catalog = Catalog::new();
                catalog.add_volume("volume", load_volume(&volume)?);
                catalog.add_reconstruction(wrong_id, read_swc(&wrong, neuron_id, &set.wrong)?, "volume")?;
                catalog.add_reconstruction(correct_id, read_swc(&correct, neuron_id, &set.correct)?, "volume")?;
                (catalog, vec![set])
            };
            let records = build_pairs(&sets, &catalog)?;
            info!("writing {} records to {}", records.len(), out.display());
            export_dataset(&records, &out)
        }

        Command::Pool {
            manifest,
            count,
            seed,
            out,
            threshold,
        } => {
            require(&[&manifest])?;
            writable(&out)?;
            let cfg = MatchConfig::new(threshold.threshold)?;
            let (m, catalog, sets) = labelled_corpus(&manifest, &cfg)?;
            let correct: Vec<&str> = m.neurons.iter().map(|n| n.correct.label.as_str()).collect();
            let records = build_control_pool(&catalog, &correct, &sets, count, seed)?;
            info!("writing {} control candidates to {}", records.len(), out.display());
            export_dataset(&records, &out)
        }

        Command::Split {
            ids,
            manifest,
            k,
            seed,
            out,
        } => {
            writable(&out)?;
            let neuron_ids: Vec<u64> = if let Some(m) = manifest {
                require(&[&m])?;
                Manifest::load(&m)?.neuron_ids()
            } else {
                let path = ids.expect("clap enforces --ids or --manifest");
                require(&[&path])?;
                let text = fs::read_to_string(&path)?;
                text.lines()
                    .enumerate()
                    .map(|(i, l)| (i, l.trim()))
                    .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
                    .map(|(i, l)| {
                        l.parse().map_err(|_| Error::Parse {
                            line: i + 1,
                            message: format!("{l:?} is not a neuron id"),
                        })
                    })
                    .collect::<Result<_>>()?
            };
            let split = split_folds(&neuron_ids, k, seed)?;
            info!("fold sizes {:?}", split.sizes());
            fs::write(&out, split.to_json()?)?;
            Ok(())
        }

        Command::Synth {
            neurons,
            per_volume,
            seed,
            params,
            no_volumes,
            out,
            threshold,
        } => {
            let synth: SynthParams = match &params {
                Some(p) => {
                    require(&[p])?;
                    serde_json::from_str(&fs::read_to_string(p)?)?
                }
                None => SynthParams::default(),
            };
            let corpus_params = CorpusParams {
                neurons,
                per_volume,
                threshold: MatchConfig::new(threshold.threshold)?.threshold,
                synth,
                seed,
                ..CorpusParams::default()
            };
            let corpus = generate_corpus(&corpus_params, !no_volumes)?;
            let manifest = write_corpus(&corpus, &out)?;
            let wrong: usize = manifest.neurons.iter().map(|n| n.wrong.len()).sum();
            info!(
                "{} neurons, {wrong} wrong reconstructions, {} volumes in {}",
                manifest.neurons.len(),
                manifest.volumes.len(),
                out.display()
            );
            Ok(())
        }

        Command::Eval {
            scores,
            other,
            threshold,
            name,
            out,
            table,
        } => {
            require(&[&scores])?;
            if let Some(o) = &other {
                require(&[o])?;
            }
            for p in out.iter().chain(table.iter()) {
                writable(p)?;
            }
            let main = ScoreTable::read_csv(fs::File::open(&scores)?)?;
            let other = other.map(|o| fs::File::open(o).map_err(Error::from).and_then(ScoreTable::read_csv)).transpose()?;
            let report = report_with_population(&main, other.as_ref(), threshold)?;
            let text = report.render_table(&name);
            eprint!("{text}");
            if let Some(out) = out {
                fs::write(out, report.to_json()?)?;
            }
            if let Some(t) = table {
                fs::write(t, text)?;
            }
            Ok(())
        }
    }
}
