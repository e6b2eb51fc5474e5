use std::net::IpAddr;
use std::path::PathBuf;

use clap::Parser;
use macsel_service::{router, AppState, RegistrySource};

/// Serve the macsel API.
#[derive(Parser)]
#[command(name = "macsel-service", version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Registry file, re-read when it changes. The seed registry if omitted.
    #[arg(long, env = "MACSEL_REGISTRY")]
    registry: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let source = match args.registry {
        Some(p) => RegistrySource::File(p),
        None => RegistrySource::Seed,
    };
    let listener = tokio::net::TcpListener::bind((args.bind, args.port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(source))).await
}
