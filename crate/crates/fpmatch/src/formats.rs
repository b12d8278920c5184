//! JSON file formats. Every document carries a `schema` tag naming its kind
//! and version; readers reject documents with a different tag.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use fpmatch_core::chib::LrResult;
use fpmatch_core::estimation::FitReport;
use fpmatch_core::model::FixedParams;
use fpmatch_core::simulate::{Hypothesis, Subset};
use fpmatch_core::{Complex64, Matching, Minutia, MinutiaConfig, MinutiaType};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const CONFIG_SCHEMA: &str = "fpmatch/config/v1";
pub const MATCHING_SCHEMA: &str = "fpmatch/matching/v1";
pub const PARAMS_SCHEMA: &str = "fpmatch/params/v1";
pub const MANIFEST_SCHEMA: &str = "fpmatch/manifest/v1";
pub const RESULT_SCHEMA: &str = "fpmatch/result/v1";
pub const FIT_SCHEMA: &str = "fpmatch/fit/v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinutiaRecord {
    pub x: f64,
    pub y: f64,
    /// Radians.
    pub angle: f64,
    /// 1 bifurcation, -1 ridge ending, 0 unobserved.
    #[serde(rename = "type")]
    pub mtype: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: String,
    pub id: String,
    pub minutiae: Vec<MinutiaRecord>,
}

impl ConfigFile {
    pub fn from_config(c: &MinutiaConfig) -> Self {
        ConfigFile {
            schema: CONFIG_SCHEMA.into(),
            id: c.id().into(),
            minutiae: c
                .minutiae()
                .iter()
                .map(|m| MinutiaRecord {
                    x: m.location().re,
                    y: m.location().im,
                    angle: m.angle(),
                    mtype: m.mtype().code().into(),
                })
                .collect(),
        }
    }

    pub fn to_config(&self) -> Result<MinutiaConfig> {
        let minutiae = self
            .minutiae
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let t = MinutiaType::from_code(r.mtype).with_context(|| format!("minutia {i}"))?;
                Minutia::new(Complex64::new(r.x, r.y), r.angle, t).with_context(|| format!("minutia {i}"))
            })
            .collect::<Result<Vec<_>>>()
            .with_context(|| format!("configuration {}", self.id))?;
        Ok(MinutiaConfig::new(self.id.clone(), minutiae))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingFile {
    pub schema: String,
    pub a_id: String,
    pub b_id: String,
    pub n_a: usize,
    pub n_b: usize,
    /// `[index in A, index in B]`, zero-based.
    pub edges: Vec<(usize, usize)>,
}

impl MatchingFile {
    pub fn new(a: &MinutiaConfig, b: &MinutiaConfig, xi: &Matching) -> Self {
        let mut edges: Vec<_> = xi.edges().collect();
        edges.sort_unstable();
        MatchingFile {
            schema: MATCHING_SCHEMA.into(),
            a_id: a.id().into(),
            b_id: b.id().into(),
            n_a: xi.n_a(),
            n_b: xi.n_b(),
            edges,
        }
    }

    pub fn to_matching(&self) -> Result<Matching> {
        Ok(Matching::from_edges(self.n_a, self.n_b, self.edges.iter().copied())?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    pub schema: String,
    #[serde(flatten)]
    pub params: FixedParams,
}

impl ParamsFile {
    pub fn new(params: FixedParams) -> Self {
        ParamsFile {
            schema: PARAMS_SCHEMA.into(),
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    /// Paths are relative to the manifest's directory.
    pub a: String,
    pub b: String,
    pub matching: Option<String>,
    pub subset: Subset,
    pub n_a: usize,
    pub n_b: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub schema: String,
    pub seed: u64,
    pub hypothesis: Hypothesis,
    pub params: FixedParams,
    pub pairs: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema: String,
    #[serde(flatten)]
    pub result: LrResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitFile {
    pub schema: String,
    #[serde(flatten)]
    pub report: FitReport,
}

/// Documents that carry a schema tag.
pub trait Tagged {
    const SCHEMA: &'static str;
    fn schema(&self) -> &str;
}

macro_rules! tagged {
    ($t:ty, $s:expr) => {
        impl Tagged for $t {
            const SCHEMA: &'static str = $s;
            fn schema(&self) -> &str {
                &self.schema
            }
        }
    };
}

tagged!(ConfigFile, CONFIG_SCHEMA);
tagged!(MatchingFile, MATCHING_SCHEMA);
tagged!(ParamsFile, PARAMS_SCHEMA);
tagged!(ManifestFile, MANIFEST_SCHEMA);
tagged!(ResultFile, RESULT_SCHEMA);
tagged!(FitFile, FIT_SCHEMA);

pub fn read_json<T: DeserializeOwned + Tagged>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: T = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if doc.schema() != T::SCHEMA {
        bail!("{}: schema {:?}, expected {:?}", path.display(), doc.schema(), T::SCHEMA);
    }
    Ok(doc)
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_config(path: &Path) -> Result<MinutiaConfig> {
    read_json::<ConfigFile>(path)?.to_config()
}

pub fn read_params(path: &Path) -> Result<FixedParams> {
    let p = read_json::<ParamsFile>(path)?.params;
    p.validate().with_context(|| format!("parameters in {}", path.display()))?;
    Ok(p)
}
