use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_UPLOAD: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub max_upload_bytes: u64,
    /// Sessions untouched for this long are dropped.
    pub session_timeout_secs: u64,
    /// Concurrent image-processing jobs.
    pub workers: usize,
    /// Where session snapshots are kept; none disables persistence.
    pub snapshot_dir: Option<PathBuf>,
    pub snapshot_interval_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            max_upload_bytes: DEFAULT_MAX_UPLOAD,
            session_timeout_secs: 3600,
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
            snapshot_dir: None,
            snapshot_interval_secs: 60,
        }
    }
}

impl ServiceConfig {
    pub fn session_timeout(&self) -> Duration {
        Duration::from_secs(self.session_timeout_secs)
    }

    pub fn snapshot_interval(&self) -> Duration {
        Duration::from_secs(self.snapshot_interval_secs.max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ServiceConfig::default();
        assert_eq!(c.max_upload_bytes, 64 * 1024 * 1024);
        assert!(c.workers >= 1);
        assert_eq!(c.snapshot_dir, None);
    }

    #[test]
    fn partial_json_fills_defaults_and_rejects_unknown() {
        let c: ServiceConfig =
            serde_json::from_str(r#"{"bind":"0.0.0.0:9000","workers":2}"#).unwrap();
        assert_eq!(c.bind, "0.0.0.0:9000");
        assert_eq!(c.workers, 2);
        assert_eq!(c.session_timeout_secs, 3600);
        assert!(serde_json::from_str::<ServiceConfig>(r#"{"bnd":"x"}"#).is_err());
    }

    #[test]
    fn snapshot_interval_is_never_zero() {
        let c = ServiceConfig {
            snapshot_interval_secs: 0,
            ..Default::default()
        };
        assert_eq!(c.snapshot_interval(), Duration::from_secs(1));
    }
}
