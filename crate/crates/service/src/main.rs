use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use ipnet::IpNet;
use rosterd_core::model::{Account, AccountId, Locale, Role};
use rosterd_service::{app, auth, openapi, AppState, Config};
use rosterd_store::Store;

/// Serve the rosterd HTTP API.
#[derive(Parser, Debug)]
#[command(name = "rosterd", version)]
struct Args {
    #[arg(long, env = "ROSTERD_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, env = "ROSTERD_DATA_DIR", default_value = "./data")]
    data_dir: PathBuf,
    /// Overrides the stored default locale.
    #[arg(long, env = "ROSTERD_LOCALE")]
    locale: Option<Locale>,
    /// Comma-separated CIDR list; overrides the stored allowlist.
    #[arg(long, env = "ROSTERD_ALLOWLIST", value_delimiter = ',')]
    allowlist: Option<Vec<IpNet>>,
    /// Base URL used in published links.
    #[arg(long, env = "ROSTERD_PUBLIC_URL")]
    public_url: Option<String>,
    /// Creates this Admin account on an empty database.
    #[arg(long, env = "ROSTERD_ADMIN_EMAIL")]
    admin_email: Option<String>,
    #[arg(long, env = "ROSTERD_ADMIN_PASSWORD", hide_env_values = true)]
    admin_password: Option<String>,
    /// Print the API description and exit.
    #[arg(long)]
    print_openapi: bool,
}

fn bootstrap(store: &Store, email: &str, password: &str) -> anyhow::Result<()> {
    let hash = auth::hash_password(password).map_err(|e| anyhow::anyhow!(e.code))?;
    let email = email.to_string();
    store
        .transact(&[], move |r| {
            if r.accounts.values().any(|a| a.is_admin()) {
                return Ok(());
            }
            let id = AccountId(r.allocate());
            let mut admin = Account::new(id, "Admin", "", &email);
            admin.role = Role::Admin;
            r.upsert_account(admin).map_err(|e| format!("{e:?}"))?;
            r.auth.password_hashes.insert(id, hash);
            tracing::info!(%email, "created bootstrap admin");
            Ok::<_, String>(())
        })
        .map_err(|e| anyhow::anyhow!("bootstrap failed: {e:?}"))?;
    Ok(())
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into())).init();
    let args = Args::parse();
    if args.print_openapi {
        print!("{}", openapi::render());
        return Ok(());
    }
    std::fs::create_dir_all(&args.data_dir).with_context(|| format!("creating {}", args.data_dir.display()))?;
    let store = Store::open(&args.data_dir).context("opening the store")?;
    if let (Some(email), Some(password)) = (&args.admin_email, &args.admin_password) {
        bootstrap(&store, email, password)?;
    }
    let config = Config {
        public_base_url: args.public_url.unwrap_or_else(|| format!("http://{}", args.bind)),
        allowlist: args.allowlist,
        locale_default: args.locale,
        outbox_file: Some(args.data_dir.join("outbox.jsonl")),
        ..Config::default()
    };
    let router = app(AppState::new(store, config));
    let listener = tokio::net::TcpListener::bind(args.bind).await.with_context(|| format!("binding {}", args.bind))?;
    tracing::info!("listening on {}", args.bind);
    axum::serve(listener, router.into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
