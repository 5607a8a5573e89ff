//! Protocol worker backed by the in-process surrogate.
//!
//! Serves requests on stdin/stdout, or on a TCP socket with `--listen`.
//! `--sleep-ms` delays every reply to emulate slow evaluation.

use std::io::{BufReader, BufWriter};
use std::net::TcpListener;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use compsearch::evaluator::protocol::{serve, Request};
use compsearch::evaluator::SurrogateModel;
use compsearch::genotype::ModelArch;

#[derive(Debug, Parser)]
#[command(name = "surrogate-worker")]
struct Args {
    #[arg(long)]
    arch: PathBuf,
    #[arg(long)]
    surrogate: PathBuf,
    #[arg(long, default_value_t = 0)]
    sleep_ms: u64,
    /// Exit without replying once this many requests have been answered.
    #[arg(long)]
    exit_after: Option<usize>,
    /// Serve TCP connections on this address instead of stdin/stdout.
    #[arg(long)]
    listen: Option<String>,
}

fn handler(
    arch: ModelArch,
    model: SurrogateModel,
    sleep: Duration,
    exit_after: Option<usize>,
) -> impl FnMut(&Request) -> Result<f64, String> {
    let mut answered = 0usize;
    move |req: &Request| {
        if exit_after.is_some_and(|n| answered >= n) {
            std::process::exit(1);
        }
        if req.arch != arch.name {
            return Err(format!("unknown architecture '{}'", req.arch));
        }
        if !sleep.is_zero() {
            std::thread::sleep(sleep);
        }
        answered += 1;
        model
            .accuracy(&arch, &req.spec)
            .map(|a| a.value())
            .map_err(|e| e.to_string())
    }
}

fn main() {
    let args = Args::parse();
    let arch = ModelArch::load(&args.arch).unwrap_or_else(|e| {
        eprintln!("surrogate-worker: {e}");
        std::process::exit(2)
    });
    let model = SurrogateModel::load(&args.surrogate).unwrap_or_else(|e| {
        eprintln!("surrogate-worker: {e}");
        std::process::exit(2)
    });
    let sleep = Duration::from_millis(args.sleep_ms);

    match &args.listen {
        None => {
            let stdin = std::io::stdin().lock();
            let stdout = std::io::stdout().lock();
            if let Err(e) = serve(stdin, stdout, handler(arch, model, sleep, args.exit_after)) {
                eprintln!("surrogate-worker: {e}");
                std::process::exit(3);
            }
        }
        Some(addr) => {
            let listener = TcpListener::bind(addr).unwrap_or_else(|e| {
                eprintln!("surrogate-worker: bind {addr}: {e}");
                std::process::exit(2)
            });
            println!(
                "{}",
                listener
                    .local_addr()
                    .map(|a| a.to_string())
                    .unwrap_or_default()
            );
            for stream in listener.incoming().flatten() {
                let (arch, model) = (arch.clone(), model.clone());
                let exit_after = args.exit_after;
                std::thread::spawn(move || {
                    let Ok(read) = stream.try_clone() else { return };
                    let _ = serve(
                        BufReader::new(read),
                        BufWriter::new(stream),
                        handler(arch, model, sleep, exit_after),
                    );
                });
            }
        }
    }
}
