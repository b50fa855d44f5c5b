use std::net::IpAddr;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args;
use pmu_serve::{ServeConfig, Service};

use super::overlay;

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address for both ports.
    #[arg(long)]
    pub bind: Option<IpAddr>,
    /// PMU NDJSON port; 0 picks a free one.
    #[arg(long)]
    pub tcp_port: Option<u16>,
    /// Console HTTP/WebSocket port; 0 picks a free one.
    #[arg(long)]
    pub http_port: Option<u16>,
    /// Shared secret clients present in their first message.
    #[arg(long, env = "PMU_TOKEN")]
    pub token: Option<String>,
    /// Directory of console assets served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Append applied events to this JSON Lines file.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
    /// Pending-message bound before non-hit traffic is shed.
    #[arg(long)]
    pub queue_capacity: Option<usize>,
}

impl ServeArgs {
    pub fn resolve(&self, mut s: ServeConfig) -> ServeConfig {
        overlay!(s, self;
            set bind, set tcp_port, set http_port, set token, some static_dir, some event_log,
            set queue_capacity);
        s
    }
}

pub fn run(config: ServeConfig) -> anyhow::Result<()> {
    config.validate().map_err(|e| anyhow!("invalid serve config: {e}"))?;
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(async move {
        let service = Service::start(config).await?;
        eprintln!("listening tcp={} http={}", service.tcp_addr(), service.http_addr());
        tokio::signal::ctrl_c().await.context("waiting for ctrl-c")?;
        eprintln!("shutting down");
        service.shutdown();
        Ok(())
    })
}
