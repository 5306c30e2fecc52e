//! Cohort directories: one E4 folder per subject, each with a `truth.json`
//! sidecar holding the generator's ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use physiogait_core::container::write_atomic;
use physiogait_core::ingest::{parse_e4_folder, write_e4_folder};
use physiogait_core::synthgen::{GroundTruth, Rendered, TruthWindow};
use physiogait_core::Recording;

use crate::error::{Error, Result};
use crate::Labelled;

pub const TRUTH_FILE: &str = "truth.json";

pub struct CohortMember {
    pub folder: PathBuf,
    pub recording: Recording,
    pub truth: Option<GroundTruth>,
}

impl CohortMember {
    pub fn truth_windows(&self) -> Result<&[TruthWindow]> {
        self.truth
            .as_ref()
            .map(|t| t.windows.as_slice())
            .ok_or_else(|| Error::InsufficientData(format!("{}: no {TRUTH_FILE}", self.folder.display())))
    }
}

/// Write every subject as `<dir>/<subject_id>/` plus its truth sidecar.
pub fn write_cohort(dir: &Path, cohort: &[Rendered]) -> Result<Vec<PathBuf>> {
    cohort
        .iter()
        .map(|r| {
            let folder = write_e4_folder(&r.recording, &dir.join(&r.recording.subject_id))?;
            let mut json = serde_json::to_string_pretty(&r.truth)?;
            json.push('\n');
            write_atomic(&folder.join(TRUTH_FILE), json.as_bytes())?;
            Ok(folder)
        })
        .collect()
}

/// Read the subject folders of `dir` in name order. A folder counts as a
/// subject when it contains `ACC.csv`.
pub fn read_cohort(dir: &Path) -> Result<Vec<CohortMember>> {
    let mut folders: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("ACC.csv").is_file())
        .collect();
    folders.sort();
    if folders.is_empty() {
        return Err(Error::InsufficientData(format!("{}: no E4 subject folders", dir.display())));
    }
    folders
        .into_iter()
        .map(|folder| {
            let parsed = parse_e4_folder(&folder)?;
            for w in &parsed.warnings {
                log::warn!("{}: {w:?}", folder.display());
            }
            let truth_path = folder.join(TRUTH_FILE);
            let truth = if truth_path.is_file() {
                let text = fs::read_to_string(&truth_path).map_err(|e| Error::io(&truth_path, e))?;
                Some(serde_json::from_str(&text)?)
            } else {
                None
            };
            Ok(CohortMember { folder, recording: parsed.recording, truth })
        })
        .collect()
}

/// Members paired with their truth windows; fails if any member lacks truth.
pub fn labelled_members(members: &[CohortMember]) -> Result<Vec<Labelled<'_>>> {
    members.iter().map(|m| Ok((&m.recording, m.truth_windows()?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use physiogait_core::synthgen::{generate_cohort, CohortSpec};

    #[test]
    fn cohort_directory_round_trips() {
        let cohort = generate_cohort(&CohortSpec { n_subjects: 2, episodes_per_subject: 3, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_cohort(dir.path(), &cohort).unwrap();
        let back = read_cohort(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        for (m, r) in back.iter().zip(&cohort) {
            assert_eq!(m.truth.as_ref(), Some(&r.truth));
            assert_eq!(m.recording.streams, r.recording.streams);
        }
        assert!(labelled_members(&back).is_ok());
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_cohort(dir.path()).is_err());
    }
}
