use clap::Parser;
use wtbouss::cli::{dispatch, CommandSpec};
use wtbouss::evolve::thread_cap;

fn main() {
    let cmd = CommandSpec::parse();
    if let Some(n) = thread_cap() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::process::exit(dispatch(&cmd));
}
