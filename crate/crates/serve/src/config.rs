use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;

use pmu_core::detect::DetectorConfig;
use pmu_core::game::MatchConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub bind: IpAddr,
    /// PMU NDJSON port; 0 picks a free port.
    pub tcp_port: u16,
    /// HTTP port for the console, `/ws` and `/state`; 0 picks a free port.
    pub http_port: u16,
    /// Shared secret every connection must present first.
    pub token: String,
    /// Console assets served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Applied events are appended here as JSON Lines.
    pub event_log: Option<PathBuf>,
    /// Pending-message bound before non-hit messages are shed.
    pub queue_capacity: usize,
    #[serde(rename = "match")]
    pub match_config: MatchConfig,
    /// Defaults handed to PMU-side detectors.
    pub detector: DetectorConfig,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            tcp_port: 7401,
            http_port: 7402,
            token: "changeme".into(),
            static_dir: None,
            event_log: None,
            queue_capacity: 256,
            match_config: MatchConfig::default(),
            detector: DetectorConfig::default(),
        }
    }
}

impl ServeConfig {
    pub fn tcp_addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.tcp_port)
    }

    pub fn http_addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.http_port)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.token.is_empty() {
            return Err("token must not be empty".into());
        }
        if self.queue_capacity == 0 {
            return Err("queue_capacity must be positive".into());
        }
        self.match_config.validate().map_err(|e| e.to_string())?;
        self.detector.validate().map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_json() {
        let c: ServeConfig = serde_json::from_str(r#"{"token": "s3cret", "match": {"refractory_ms": 100}}"#).unwrap();
        assert_eq!(c.tcp_port, 7401);
        assert_eq!(c.http_port, 7402);
        assert_eq!(c.match_config.refractory_ms, 100);
        assert_eq!(c.match_config.roles, MatchConfig::default().roles);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(serde_json::from_str::<ServeConfig>(r#"{"tcp": 1}"#).is_err());
        let c = ServeConfig {
            token: String::new(),
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
