//! Event-sourced analysis sessions.
//!
//! A session directory holds `session.json` (the uploaded artifacts and the
//! analysis configuration) and `actions.jsonl` (one action per line). The
//! served report is always the initial report with every action replayed.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use compass_core::coverage::InputCoverage;
use compass_core::{
    AnalysisConfig, ArtifactDocuments, ArtifactPaths, CandidateEvaluation, CompartmentReport, Error,
    Status, Workspace,
};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

const MANIFEST: &str = "session.json";
const ACTIONS: &str = "actions.jsonl";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    documents: ArtifactDocuments,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sources: Option<ArtifactPaths>,
    config: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Resolve { compartment: String },
    Candidate { coverage: InputCoverage },
}

#[derive(Debug)]
pub enum Applied {
    Report(CompartmentReport),
    Evaluation(CandidateEvaluation),
}

#[derive(Debug)]
pub enum SessionError {
    Analysis(Error),
    Storage(std::io::Error),
}

impl From<Error> for SessionError {
    fn from(e: Error) -> Self {
        SessionError::Analysis(e)
    }
}

impl From<std::io::Error> for SessionError {
    fn from(e: std::io::Error) -> Self {
        SessionError::Storage(e)
    }
}

pub struct Session {
    pub id: Uuid,
    workspace: Workspace,
    initial: CompartmentReport,
    report: CompartmentReport,
    actions: Vec<Action>,
    dir: PathBuf,
}

fn step(ws: &Workspace, report: &CompartmentReport, action: &Action) -> Result<(Applied, CompartmentReport), Error> {
    match action {
        Action::Resolve { compartment } => {
            let next = ws.retire(report, &[(compartment, Status::Resolved)])?;
            Ok((Applied::Report(next.clone()), next))
        }
        Action::Candidate { coverage } => {
            let (eval, next) = ws.apply_candidate(report, coverage)?;
            Ok((Applied::Evaluation(eval), next))
        }
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(tmp, path)
}

impl Session {
    /// Loads the artifacts, computes the initial report and persists the
    /// session under `root/<id>`.
    pub fn create(
        root: &Path,
        documents: ArtifactDocuments,
        sources: Option<ArtifactPaths>,
        config: AnalysisConfig,
    ) -> Result<Self, SessionError> {
        let manifest = Manifest {
            documents,
            sources,
            config,
        };
        let id = Uuid::new_v4();
        let dir = root.join(id.to_string());
        let (workspace, initial) = Self::load(&manifest)?;
        fs::create_dir_all(&dir)?;
        let text = serde_json::to_vec(&manifest).expect("manifest serializes");
        write_atomically(&dir.join(MANIFEST), &text)?;
        File::create(dir.join(ACTIONS))?.sync_all()?;
        Ok(Session {
            id,
            workspace,
            report: initial.clone(),
            initial,
            actions: Vec::new(),
            dir,
        })
    }

    fn load(m: &Manifest) -> Result<(Workspace, CompartmentReport), Error> {
        let ws = Workspace::load(&m.documents, m.sources.as_ref(), m.config.clone())?;
        let report = ws.report()?;
        Ok((ws, report))
    }

    /// Rebuilds a persisted session by replaying its action log.
    pub fn open(dir: &Path) -> Result<Self, SessionError> {
        let id: Uuid = dir
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| std::io::Error::other(format!("{} is not a session", dir.display())))?;
        let text = fs::read(dir.join(MANIFEST))?;
        let manifest: Manifest = serde_json::from_slice(&text)
            .map_err(|e| Error::MalformedDocument(e.to_string()).in_file(dir.join(MANIFEST)))?;
        let (workspace, initial) = Self::load(&manifest)?;
        let mut actions = Vec::new();
        for (i, line) in BufReader::new(File::open(dir.join(ACTIONS))?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let action: Action = serde_json::from_str(&line).map_err(|e| {
                Error::Malformed {
                    line: i + 1,
                    message: e.to_string(),
                }
                .in_file(dir.join(ACTIONS))
            })?;
            actions.push(action);
        }
        let mut session = Session {
            id,
            workspace,
            report: initial.clone(),
            initial,
            actions: Vec::new(),
            dir: dir.to_path_buf(),
        };
        session.report = session.replay_all(&actions)?;
        session.actions = actions;
        Ok(session)
    }

    fn replay_all(&self, actions: &[Action]) -> Result<CompartmentReport, Error> {
        let mut report = self.initial.clone();
        for a in actions {
            report = step(&self.workspace, &report, a)?.1;
        }
        Ok(report)
    }

    /// The report recomputed from the initial state and the action log.
    pub fn replay(&self) -> Result<CompartmentReport, Error> {
        self.replay_all(&self.actions)
    }

    pub fn report(&self) -> &CompartmentReport {
        &self.report
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.workspace.config
    }

    /// Applies `action`, logs it and swaps in the new report. Nothing
    /// changes if the action is rejected or cannot be persisted.
    pub fn apply(&mut self, action: Action) -> Result<Applied, SessionError> {
        let (applied, next) = step(&self.workspace, &self.report, &action)?;
        let mut line = serde_json::to_string(&action).expect("action serializes");
        line.push('\n');
        let mut log = OpenOptions::new().append(true).open(self.dir.join(ACTIONS))?;
        let len = log.metadata()?.len();
        if let Err(e) = log.write_all(line.as_bytes()).and_then(|_| log.sync_data()) {
            // Drop a torn line so replay still parses.
            let _ = log.set_len(len);
            return Err(e.into());
        }
        self.actions.push(action);
        self.report = next;
        Ok(applied)
    }
}
