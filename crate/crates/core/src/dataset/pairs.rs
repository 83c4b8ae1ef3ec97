use std::collections::{BTreeMap, HashSet};

use crate::dataset::nqcd::{Group, SampleRecord};
use crate::error::{Error, Result};
use crate::patch::{crop_patch, PATCH_SIZE};
use crate::poi::{control_exclusions, sample_controls, PoiLabelSet};
use crate::raster::{rasterize, BinaryMap};
use crate::swc::NeuronReconstruction;
use crate::volume::Volume;

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub reconstruction_id: u64,
    pub reconstruction: NeuronReconstruction,
    /// Key of the volume the reconstruction was traced in.
    pub volume: String,
}

/// Reconstructions keyed by label, and the volumes they live in.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: BTreeMap<String, CatalogEntry>,
    volumes: BTreeMap<String, Volume>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_volume(&mut self, key: impl Into<String>, vol: Volume) {
        self.volumes.insert(key.into(), vol);
    }

    pub fn add_reconstruction(&mut self, reconstruction_id: u64, reconstruction: NeuronReconstruction, volume: impl Into<String>) -> Result<()> {
        let label = reconstruction.label().to_string();
        if self.entries.contains_key(&label) {
            return Err(Error::InvalidArgument(format!("reconstruction {label:?} added twice")));
        }
        self.entries.insert(
            label,
            CatalogEntry {
                reconstruction_id,
                reconstruction,
                volume: volume.into(),
            },
        );
        Ok(())
    }

    pub fn entry(&self, label: &str) -> Result<&CatalogEntry> {
        self.entries
            .get(label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown reconstruction {label:?}")))
    }

    pub fn volume_of(&self, label: &str) -> Result<&Volume> {
        let entry = self.entry(label)?;
        self.volumes
            .get(&entry.volume)
            .ok_or_else(|| Error::Volume(format!("missing volume {:?} for {label:?}", entry.volume)))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &CatalogEntry)> {
        self.entries.iter()
    }

    /// Binary map of one reconstruction on its own volume grid.
    pub fn binary_map(&self, label: &str) -> Result<BinaryMap> {
        let vol = self.volume_of(label)?;
        Ok(rasterize(&self.entry(label)?.reconstruction, vol).map)
    }

    fn maps_for<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> Result<BTreeMap<String, BinaryMap>> {
        let mut maps = BTreeMap::new();
        for label in labels {
            if !maps.contains_key(label) {
                maps.insert(label.to_string(), self.binary_map(label)?);
            }
        }
        Ok(maps)
    }
}

struct Job<'a> {
    label: &'a str,
    point_id: u64,
    group: Group,
}

fn run_jobs(catalog: &Catalog, maps: &BTreeMap<String, BinaryMap>, jobs: &[Job<'_>]) -> Result<Vec<SampleRecord>> {
    let crop = |job: &Job<'_>| -> Result<SampleRecord> {
        let entry = catalog.entry(job.label)?;
        let point = entry.reconstruction.get(job.point_id).ok_or_else(|| {
            Error::InvalidArgument(format!("point {} not found in {:?}", job.point_id, job.label))
        })?;
        let patch = crop_patch(catalog.volume_of(job.label)?, &maps[job.label], point, PATCH_SIZE)?;
        SampleRecord::from_patch(
            entry.reconstruction.neuron_id(),
            entry.reconstruction_id,
            job.group,
            patch,
        )
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(crop).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(crop).collect()
    }
}

/// One POI record (label 1) followed by its match-control record (label 0)
/// for every pair of every label set. Each patch's binary channel comes from
/// the reconstruction the point belongs to.
pub fn build_pairs(labelsets: &[PoiLabelSet], catalog: &Catalog) -> Result<Vec<SampleRecord>> {
    for set in labelsets {
        let w = catalog.entry(&set.wrong)?;
        let c = catalog.entry(&set.correct)?;
        if w.reconstruction.neuron_id() != c.reconstruction.neuron_id() {
            return Err(Error::NeuronMismatch(
                w.reconstruction.neuron_id(),
                c.reconstruction.neuron_id(),
            ));
        }
    }
    let maps = catalog.maps_for(
        labelsets
            .iter()
            .flat_map(|s| [s.wrong.as_str(), s.correct.as_str()]),
    )?;
    let jobs: Vec<Job<'_>> = labelsets
        .iter()
        .flat_map(|set| {
            set.pairs.iter().flat_map(move |p| {
                [
                    Job {
                        label: &set.wrong,
                        point_id: p.poi_id,
                        group: Group::Poi,
                    },
                    Job {
                        label: &set.correct,
                        point_id: p.control_id,
                        group: Group::MatchControl,
                    },
                ]
            })
        })
        .collect();
    run_jobs(catalog, &maps, &jobs)
}

/// Candidate random-control records: `n` points drawn from the given correct
/// reconstructions, excluding the match controls of `labelsets`.
pub fn build_control_pool(catalog: &Catalog, correct: &[&str], labelsets: &[PoiLabelSet], n: usize, seed: u64) -> Result<Vec<SampleRecord>> {
    let corpus: Vec<&NeuronReconstruction> = correct
        .iter()
        .map(|l| catalog.entry(l).map(|e| &e.reconstruction))
        .collect::<Result<_>>()?;
    let exclude: HashSet<_> = control_exclusions(labelsets, |label| correct.iter().position(|c| *c == label));
    let picks = sample_controls(&corpus, n, &exclude, seed)?;
    let maps = catalog.maps_for(picks.iter().map(|&(ri, _)| correct[ri]))?;
    let jobs: Vec<Job<'_>> = picks
        .iter()
        .map(|&(ri, point_id)| Job {
            label: correct[ri],
            point_id,
            group: Group::RandomControl,
        })
        .collect();
    run_jobs(catalog, &maps, &jobs)
}
