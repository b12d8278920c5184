//! Simulated datasets on disk: one JSON file per configuration and matching,
//! and a manifest tying them together.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fpmatch_core::estimation::TrainingPair;
use fpmatch_core::simulate::{Dataset, Subset};
use fpmatch_core::{Matching, MinutiaConfig};

use crate::formats::{
    read_config, read_json, write_json, ConfigFile, ManifestEntry, ManifestFile, MatchingFile, ParamsFile,
    MANIFEST_SCHEMA,
};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const PAIRS_DIR: &str = "pairs";

/// Writes `out/manifest.json`, `out/params.json` and `out/pairs/*.json`.
/// Returns the manifest path.
pub fn write_dataset(out: &Path, d: &Dataset) -> Result<PathBuf> {
    let pairs_dir = out.join(PAIRS_DIR);
    fs::create_dir_all(&pairs_dir).with_context(|| format!("creating {}", pairs_dir.display()))?;
    let mut entries = Vec::with_capacity(d.pairs.len());
    for (i, (p, &subset)) in d.pairs.iter().zip(&d.subsets).enumerate() {
        let name = fpmatch_core::simulate::pair_name(i);
        let a = format!("{PAIRS_DIR}/{name}_a.json");
        let b = format!("{PAIRS_DIR}/{name}_b.json");
        write_json(&out.join(&a), &ConfigFile::from_config(&p.a))?;
        write_json(&out.join(&b), &ConfigFile::from_config(&p.b))?;
        let matching = match &p.true_xi {
            Some(xi) => {
                let m = format!("{PAIRS_DIR}/{name}_xi.json");
                write_json(&out.join(&m), &MatchingFile::new(&p.a, &p.b, xi))?;
                Some(m)
            }
            None => None,
        };
        entries.push(ManifestEntry {
            name,
            a,
            b,
            matching,
            subset,
            n_a: p.a.len(),
            n_b: p.b.len(),
        });
    }
    write_json(&out.join("params.json"), &ParamsFile::new(d.config.fixed))?;
    let manifest = ManifestFile {
        schema: MANIFEST_SCHEMA.into(),
        seed: d.config.seed,
        hypothesis: d.config.hypothesis,
        params: d.config.fixed,
        pairs: entries,
    };
    let path = out.join(MANIFEST_NAME);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// A manifest entry with its configurations loaded.
#[derive(Debug, Clone)]
pub struct LoadedPair {
    pub name: String,
    pub a: MinutiaConfig,
    pub b: MinutiaConfig,
    pub matching: Option<Matching>,
    pub subset: Subset,
}

#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: ManifestFile,
    pub pairs: Vec<LoadedPair>,
}

pub fn load_manifest(path: &Path) -> Result<LoadedManifest> {
    let manifest: ManifestFile = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut pairs = Vec::with_capacity(manifest.pairs.len());
    for e in &manifest.pairs {
        let a = read_config(&dir.join(&e.a)).with_context(|| format!("pair {}", e.name))?;
        let b = read_config(&dir.join(&e.b)).with_context(|| format!("pair {}", e.name))?;
        let matching = match &e.matching {
            Some(m) => {
                let f: MatchingFile = read_json(&dir.join(m)).with_context(|| format!("pair {}", e.name))?;
                if f.a_id != a.id() || f.b_id != b.id() {
                    bail!("pair {}: matching refers to {} / {}", e.name, f.a_id, f.b_id);
                }
                let xi = f.to_matching().with_context(|| format!("pair {}", e.name))?;
                xi.check_sizes(&a, &b).with_context(|| format!("pair {}", e.name))?;
                Some(xi)
            }
            None => None,
        };
        pairs.push(LoadedPair {
            name: e.name.clone(),
            a,
            b,
            matching,
            subset: e.subset,
        });
    }
    Ok(LoadedManifest { manifest, pairs })
}

/// Training corpus for estimation; every pair needs a ground-truth matching.
pub fn training_corpus(m: &LoadedManifest) -> Result<Vec<TrainingPair>> {
    m.pairs
        .iter()
        .map(|p| match &p.matching {
            Some(xi) => Ok(TrainingPair::new(p.a.clone(), p.b.clone(), xi.clone())?),
            None => bail!("pair {} has no ground-truth matching", p.name),
        })
        .collect()
}
