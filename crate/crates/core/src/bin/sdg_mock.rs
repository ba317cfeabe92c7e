//! Mock model services (rewriter, generator/expander jobs, judge) over HTTP.

use std::net::SocketAddr;

use clap::Parser;
use sdg_core::pipeline::{serve_mock, MockJudge};

#[derive(Parser)]
#[command(name = "sdg-mock", version, about = "Mock model services for pipeline tests")]
struct Cli {
    #[arg(long, default_value_t = 9090)]
    port: u16,
    /// Fraction of chunks the judge flags, as `numerator/denominator`.
    #[arg(long, default_value = "3/100")]
    flag_rate: String,
}

fn parse_rate(s: &str) -> Option<(u64, u64)> {
    let (n, d) = s.split_once('/')?;
    let (n, d) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
    (d > 0 && n <= d).then_some((n, d))
}

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let Some((n, d)) = parse_rate(&cli.flag_rate) else {
        eprintln!("error: --flag-rate must look like 3/100");
        return std::process::ExitCode::FAILURE;
    };
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    let addr = SocketAddr::from(([127, 0, 0, 1], cli.port));
    if let Err(e) = rt.block_on(serve_mock(addr, MockJudge::hash_partition(n, d))) {
        eprintln!("error: {e}");
        return std::process::ExitCode::FAILURE;
    }
    std::process::ExitCode::SUCCESS
}
