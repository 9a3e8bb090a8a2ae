use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use fishmonger_play::{router, SessionStore, DEFAULT_ROUND_CAP};

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Session logs live here; existing sessions are restored on start.
    #[arg(long, default_value = "sessions")]
    pub data_dir: PathBuf,
    /// Round cap for sessions that do not ask for one.
    #[arg(long, default_value_t = DEFAULT_ROUND_CAP)]
    pub round_cap: u64,
}

pub fn run(args: &ServeArgs) -> anyhow::Result<bool> {
    let store = SessionStore::open(&args.data_dir)?.with_default_round_cap(args.round_cap);
    let restored = store.len();
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| crate::config::ConfigError(format!("bad listen address: {e}")))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        println!("restored {restored} sessions from {}", args.data_dir.display());
        std::io::stdout().flush()?;
        axum::serve(listener, router(Arc::new(store)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(true)
}
