//! Load → augment → enumerate → rank → annotate → attribute.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compartments::{
    enumerate_candidates, rank_compartments, retire, CompartmentReport, Program, Status,
};
use crate::coverage::{load_coverage_manifest, load_profile, merge_profiles, AnalysisConfig};
use crate::coverage::{BlockCounts, InputCoverage, ProfileSnapshot};
use crate::error::{Error, Result};
use crate::evaluation::{attribute_corpus, evaluate_candidate, CandidateEvaluation};
use crate::icfg::{load_callgraph_log, load_icfg, CallGraph, DominatorForest, Icfg};
use crate::labels::{annotate, load_labels, LabelMap};

/// Where a report's inputs live. Stored in exported reports so later
/// commands can reload the artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactPaths {
    pub icfg: PathBuf,
    pub profiles: Vec<PathBuf>,
    pub callgraph: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
}

/// The same artifacts as in-memory text, as uploaded to the service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactDocuments {
    pub icfg: String,
    pub profiles: Vec<String>,
    #[serde(default)]
    pub callgraph: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
    /// Snapshot tag for the merged profile.
    #[serde(default)]
    pub snapshot: String,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))
}

impl ArtifactDocuments {
    pub fn read(paths: &ArtifactPaths) -> Result<Self> {
        Ok(ArtifactDocuments {
            icfg: read(&paths.icfg)?,
            profiles: paths
                .profiles
                .iter()
                .map(|p| read(p))
                .collect::<Result<_>>()?,
            callgraph: read(&paths.callgraph)?,
            labels: paths.labels.as_deref().map(read).transpose()?,
            corpus: paths.corpus.as_deref().map(read).transpose()?,
            snapshot: snapshot_tag(paths),
        })
    }
}

fn snapshot_tag(paths: &ArtifactPaths) -> String {
    paths
        .profiles
        .first()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Attaches the artifact's path, when known, to a parse error.
fn within<T>(r: Result<T>, path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => r.map_err(|e| e.in_file(p)),
        None => r,
    }
}

/// Loaded and cross-validated artifacts plus the analysis configuration.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub icfg: Icfg,
    pub doms: DominatorForest,
    pub callgraph: CallGraph,
    pub profile: ProfileSnapshot,
    pub counts: BlockCounts,
    pub labels: LabelMap,
    pub corpus: Vec<InputCoverage>,
    pub config: AnalysisConfig,
    pub sources: Option<ArtifactPaths>,
}

impl Workspace {
    pub fn from_paths(paths: &ArtifactPaths, config: AnalysisConfig) -> Result<Self> {
        let docs = ArtifactDocuments::read(paths)?;
        Self::load(&docs, Some(paths), config)
    }

    pub fn from_documents(docs: &ArtifactDocuments, config: AnalysisConfig) -> Result<Self> {
        Self::load(docs, None, config)
    }

    /// Loads documents that were read from `paths`, so errors and the
    /// exported report name the files.
    pub fn load(
        docs: &ArtifactDocuments,
        paths: Option<&ArtifactPaths>,
        config: AnalysisConfig,
    ) -> Result<Self> {
        config.validate()?;
        if docs.profiles.is_empty() {
            return Err(Error::InvalidConfig("at least one profile is required".into()));
        }
        let icfg = within(load_icfg(docs.icfg.as_bytes()), paths.map(|p| p.icfg.as_path()))?;

        let mut profile = ProfileSnapshot::new(docs.snapshot.clone());
        for (i, text) in docs.profiles.iter().enumerate() {
            let path = paths.and_then(|p| p.profiles.get(i)).map(PathBuf::as_path);
            let snap = within(load_profile(text.as_bytes(), &docs.snapshot), path)?;
            profile = within(merge_profiles(&profile, &snap), path)?;
        }
        let counts = within(profile.resolve(&icfg), paths.and_then(|p| p.profiles.first()).map(PathBuf::as_path))?;

        let cg_path = paths.map(|p| p.callgraph.as_path());
        let edges = within(load_callgraph_log(docs.callgraph.as_bytes()), cg_path)?;
        let callgraph = within(CallGraph::new(&icfg).augment(&icfg, &edges), cg_path)?;

        let labels = match &docs.labels {
            Some(text) => within(
                load_labels(text.as_bytes()),
                paths.and_then(|p| p.labels.as_deref()),
            )?,
            None => LabelMap::default(),
        };
        let corpus = match &docs.corpus {
            Some(text) => within(
                load_coverage_manifest(BufReader::new(text.as_bytes())),
                paths.and_then(|p| p.corpus.as_deref()),
            )?,
            None => Vec::new(),
        };
        for name in &config.roots {
            if icfg.func_id(name).is_none() {
                return Err(Error::UnknownFunction(name.clone()));
            }
        }

        let doms = DominatorForest::build(&icfg);
        for f in icfg.func_ids() {
            let dead = doms.tree(f).unreachable();
            if !dead.is_empty() {
                let func = icfg.function(f);
                let names: Vec<&str> = dead.iter().map(|&b| func.block(b).name.as_str()).collect();
                tracing::warn!(function = %func.name, blocks = ?names, "unreachable blocks are never candidates");
            }
        }
        tracing::debug!(
            functions = icfg.functions().len(),
            blocks = icfg.block_count(),
            observed = callgraph.observed().len(),
            "artifacts loaded"
        );
        Ok(Workspace {
            icfg,
            doms,
            callgraph,
            profile,
            counts,
            labels,
            corpus,
            config,
            sources: paths.cloned(),
        })
    }

    pub fn program(&self) -> Program<'_> {
        Program {
            icfg: &self.icfg,
            doms: &self.doms,
            callgraph: &self.callgraph,
        }
    }

    /// Applies labels and corpus attribution.
    pub fn finish(&self, report: &CompartmentReport) -> CompartmentReport {
        let mut out = attribute_corpus(&annotate(report, &self.labels), &self.corpus);
        out.sources = self.sources.clone();
        out
    }

    pub fn report(&self) -> Result<CompartmentReport> {
        let candidates = enumerate_candidates(self.program(), &self.counts, &self.config)?;
        tracing::debug!(candidates = candidates.len(), "candidates enumerated");
        let ranked = rank_compartments(
            candidates,
            self.program(),
            &self.counts,
            &self.config,
            &self.profile.tag,
        )?;
        Ok(self.finish(&ranked))
    }

    /// Retires `ids` from `report` and re-ranks under the hypothetical
    /// snapshot.
    pub fn retire(&self, report: &CompartmentReport, ids: &[(&str, Status)]) -> Result<CompartmentReport> {
        let next = retire(report, ids, self.program(), &self.counts)?;
        Ok(self.finish(&next))
    }

    /// Evaluates `candidate` and retires every compartment whose entry it
    /// covers as unlocked. The candidate becomes the Solution of those rows
    /// unless the corpus already names one.
    pub fn apply_candidate(
        &self,
        report: &CompartmentReport,
        candidate: &InputCoverage,
    ) -> Result<(CandidateEvaluation, CompartmentReport)> {
        let eval = evaluate_candidate(report, candidate);
        let unlocked: Vec<(&str, Status)> = eval.unlocked().map(|id| (id, Status::Unlocked)).collect();
        if unlocked.is_empty() {
            return Ok((eval, report.clone()));
        }
        let mut next = self.retire(report, &unlocked)?;
        for c in &mut next.retired {
            if c.solution.is_empty() && unlocked.iter().any(|(id, _)| *id == c.id()) {
                c.solution = candidate.input.clone();
            }
        }
        Ok((eval, next))
    }
}

pub fn run_pipeline(paths: &ArtifactPaths, config: AnalysisConfig) -> Result<CompartmentReport> {
    Workspace::from_paths(paths, config)?.report()
}
