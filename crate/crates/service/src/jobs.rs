//! Collection jobs, persisted to `DATA/.jobs.json` so a restart can report
//! interrupted work.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use mugtrack_core::store::timestamp_now;
use mugtrack_core::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub const JOBS_FILE: &str = ".jobs.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_active(self) -> bool {
        matches!(self, JobState::Queued | JobState::Running)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JobProgress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub clip_id: String,
    pub config: PipelineConfig,
    pub state: JobState,
    pub progress: JobProgress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<JobFailure>,
    pub created_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Persisted {
    next_id: u64,
    jobs: BTreeMap<String, Job>,
}

#[derive(Debug)]
pub struct JobTable {
    path: PathBuf,
    inner: Mutex<Persisted>,
}

impl JobTable {
    /// Loads the table; jobs that were queued or running when the previous
    /// process stopped are marked failed with code `RESTARTED`.
    pub fn load(data_dir: &Path) -> Self {
        let path = data_dir.join(JOBS_FILE);
        let mut table: Persisted = fs::read_to_string(&path)
            .ok()
            .and_then(|s| match serde_json::from_str(&s) {
                Ok(t) => Some(t),
                Err(e) => {
                    log::warn!("ignoring unreadable {}: {e}", path.display());
                    None
                }
            })
            .unwrap_or_default();
        let now = timestamp_now();
        let mut interrupted = 0;
        for job in table.jobs.values_mut().filter(|j| j.state.is_active()) {
            job.state = JobState::Failed;
            job.error = Some(JobFailure { code: "RESTARTED".into(), message: "service restarted before the job finished".into() });
            job.finished_at = Some(now.clone());
            interrupted += 1;
        }
        let out = Self { path, inner: Mutex::new(table) };
        if interrupted > 0 {
            log::info!("{interrupted} interrupted job(s) marked failed");
            out.persist(&out.inner.lock().unwrap());
        }
        out
    }

    fn persist(&self, table: &Persisted) {
        let tmp = self.path.with_extension("json.tmp");
        let json = serde_json::to_vec_pretty(table).expect("job table serialisation cannot fail");
        if let Err(e) = fs::write(&tmp, json).and_then(|_| fs::rename(&tmp, &self.path)) {
            log::error!("cannot persist {}: {e}", self.path.display());
        }
    }

    /// Queues a job unless another one is active on the same clip.
    pub fn submit(&self, clip_id: &str, config: PipelineConfig) -> Result<Job, ApiError> {
        let mut t = self.inner.lock().unwrap();
        if let Some(busy) = t.jobs.values().find(|j| j.clip_id == clip_id && j.state.is_active()) {
            return Err(ApiError::new(
                axum::http::StatusCode::CONFLICT,
                "CLIP_BUSY",
                format!("clip {clip_id} already has job {}", busy.job_id),
            ));
        }
        t.next_id += 1;
        let job = Job {
            job_id: format!("job-{:06}", t.next_id),
            clip_id: clip_id.into(),
            config,
            state: JobState::Queued,
            progress: JobProgress::default(),
            error: None,
            created_at: timestamp_now(),
            finished_at: None,
        };
        t.jobs.insert(job.job_id.clone(), job.clone());
        self.persist(&t);
        Ok(job)
    }

    pub fn get(&self, id: &str) -> Option<Job> {
        self.inner.lock().unwrap().jobs.get(id).cloned()
    }

    pub fn list(&self) -> Vec<Job> {
        self.inner.lock().unwrap().jobs.values().cloned().collect()
    }

    pub fn set_running(&self, id: &str) {
        self.update(id, true, |j| j.state = JobState::Running);
    }

    pub fn set_progress(&self, id: &str, done: usize, total: usize) {
        self.update(id, false, |j| j.progress = JobProgress { done, total });
    }

    pub fn finish(&self, id: &str, result: Result<(), JobFailure>) {
        let now = timestamp_now();
        self.update(id, true, |j| {
            match result {
                Ok(()) => {
                    j.state = JobState::Done;
                    j.progress.done = j.progress.total;
                }
                Err(f) => {
                    j.state = JobState::Failed;
                    j.error = Some(f);
                }
            }
            j.finished_at = Some(now);
        });
    }

    fn update(&self, id: &str, persist: bool, f: impl FnOnce(&mut Job)) {
        let mut t = self.inner.lock().unwrap();
        if let Some(j) = t.jobs.get_mut(id) {
            f(j);
            if persist {
                self.persist(&t);
            }
        }
    }
}
