use std::path::PathBuf;
use std::process::ExitCode;

use des_server::ServerConfig;

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let mut config = ServerConfig::default();
    while let Some(a) = args.next() {
        match a.as_str() {
            "--config" => match args.next().map(PathBuf::from) {
                Some(p) => match ServerConfig::from_toml_file(&p) {
                    Ok(c) => config = c,
                    Err(e) => {
                        eprintln!("des-server: {e}");
                        return ExitCode::from(2);
                    }
                },
                None => {
                    eprintln!("des-server: --config needs a path");
                    return ExitCode::from(2);
                }
            },
            "-h" | "--help" => {
                println!("usage: des-server [--config FILE]\nenvironment: DES_HOST DES_PORT DES_BUGS DES_ENABLE_RESET");
                return ExitCode::SUCCESS;
            }
            other => {
                eprintln!("des-server: unexpected argument `{other}`");
                return ExitCode::from(2);
            }
        }
    }
    let config = match config.apply_env(|k| std::env::var(k).ok()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("des-server: {e}");
            return ExitCode::from(2);
        }
    };
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((config.host.as_str(), config.port)).await?;
        eprintln!(
            "des-server listening on {} (faults: {})",
            listener.local_addr()?,
            config.faults
        );
        des_server::serve(listener, &config, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("des-server: {e}");
            ExitCode::from(3)
        }
    }
}
