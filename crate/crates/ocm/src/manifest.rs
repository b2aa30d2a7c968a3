//! Run manifests: what was run, with which inputs, and how long it took.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::error::{OcmError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub ocm: &'static str,
    pub ocm_core: &'static str,
    pub arch: &'static str,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            ocm: env!("CARGO_PKG_VERSION"),
            ocm_core: ocm_core::VERSION,
            arch: std::env::consts::ARCH,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: Value,
    pub versions: Versions,
    pub seeds: BTreeMap<String, u64>,
    pub threads: usize,
    /// Seconds since the Unix epoch at start; the only field that differs
    /// between identical reruns besides the wall times.
    pub started_unix: u64,
    pub wall_seconds: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl Manifest {
    pub fn start(command: &str, config: Value, threads: usize) -> Self {
        Manifest {
            command: command.into(),
            config,
            versions: Versions::default(),
            seeds: BTreeMap::new(),
            threads,
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_seconds: BTreeMap::new(),
            outputs: Vec::new(),
            clock: Some(Instant::now()),
        }
    }

    /// Runs `f`, recording its wall time under `label`.
    pub fn timed<T>(&mut self, label: impl Into<String>, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f();
        self.wall_seconds.insert(label.into(), t.elapsed().as_secs_f64());
        out
    }

    pub fn seed(&mut self, label: impl Into<String>, seed: u64) {
        self.seeds.insert(label.into(), seed);
    }

    pub fn output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    pub fn write(&mut self, dir: &Path) -> Result<()> {
        if let Some(c) = self.clock {
            self.wall_seconds.insert("total".into(), c.elapsed().as_secs_f64());
        }
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| OcmError::Internal(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| OcmError::io(path, e))
    }
}

/// Worker count from `OCM_THREADS`; all cores when unset.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var("OCM_THREADS") {
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(OcmError::config("OCM_THREADS", format!("expected a positive integer, got {s:?}"))),
        },
    }
}

pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| OcmError::Resource(format!("cannot start {threads} worker threads: {e}")))
}
