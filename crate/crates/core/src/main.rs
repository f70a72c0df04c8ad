mod cli;

use clap::Parser;

// Exit codes: 0 success, 2 usage, 3 I/O, 4 validation, 5 divergence.
const EXIT_USAGE: i32 = 2;
const EXIT_IO: i32 = 3;
const EXIT_VALIDATION: i32 = 4;
const EXIT_DIVERGENCE: i32 = 5;

fn main() {
    let args = cli::Cli::parse();
    init_logging(args.log_level.as_deref());
    if let Err(err) = cli::run(args) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn init_logging(level: Option<&str>) {
    let mut builder = env_logger::Builder::from_env(env_logger::Env::default());
    if let Some(level) = level {
        builder.parse_filters(level);
    }
    let _ = builder.format_timestamp(None).try_init();
}

fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<cli::UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<rematch::io::IoError>() {
            return match e {
                rematch::io::IoError::Io { .. } => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<rematch::embedding::TrainError>() {
            return match e {
                rematch::embedding::TrainError::Diverged { .. } => EXIT_DIVERGENCE,
                _ => EXIT_VALIDATION,
            };
        }
        let validation = cause.downcast_ref::<rematch::scene::SceneError>().is_some()
            || cause.downcast_ref::<rematch::embedding::ModelError>().is_some()
            || cause.downcast_ref::<rematch::clustering::ClusterError>().is_some()
            || cause.downcast_ref::<rematch::assignment::AssignError>().is_some()
            || cause.downcast_ref::<rematch::matching::MatchError>().is_some()
            || cause.downcast_ref::<rematch::scenegen::GenError>().is_some()
            || cause.downcast_ref::<rematch::online::OnlineError>().is_some()
            || cause.downcast_ref::<rematch::evaluation::EvalError>().is_some()
            || cause.downcast_ref::<serde_json::Error>().is_some();
        if validation {
            return EXIT_VALIDATION;
        }
    }
    1
}
