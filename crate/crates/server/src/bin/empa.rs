use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use empa_core::curriculum::load_curriculum;
use empa_server::{router, AppState, ServiceConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "empa", version, about = "Empa intercultural-mentoring service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API, configured from environment variables.
    Serve {
        /// Overrides BIND_ADDR.
        #[arg(long)]
        bind: Option<SocketAddr>,
    },
    /// Validate a curriculum document and print its module summary.
    CheckCurriculum { path: PathBuf },
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Serve { bind } => serve(bind).await,
        Command::CheckCurriculum { path } => check_curriculum(&path),
    }
}

async fn serve(bind: Option<SocketAddr>) -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stdout)
        .init();

    let mut config = ServiceConfig::from_env().context("invalid configuration")?;
    if let Some(bind) = bind {
        config.bind_addr = bind;
    }
    let mentor = config.build_mentor().context("could not start service")?;
    let app = router(AppState::new(mentor), &config.allowed_origins);

    let listener = tokio::net::TcpListener::bind(config.bind_addr)
        .await
        .with_context(|| format!("could not bind {}", config.bind_addr))?;
    tracing::info!(addr = %config.bind_addr, origins = ?config.allowed_origins, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn check_curriculum(path: &PathBuf) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let curriculum = load_curriculum(&text).with_context(|| format!("invalid curriculum {}", path.display()))?;
    println!("curriculum version {}", curriculum.version);
    for m in curriculum.modules() {
        let quiz = m
            .quiz
            .as_ref()
            .map(|q| format!(", quiz `{}` ({} items)", q.quiz_id, q.items.len()))
            .unwrap_or_default();
        println!(
            "  {}. {} [{:?}, {} prompts{}]",
            m.id.order(),
            m.title,
            m.completion_rule,
            m.reflection_prompts.len(),
            quiz
        );
    }
    Ok(())
}
