fn main() {
    // SEQSUB_THREADS caps the worker pool; unset or 0 means one per core.
    if let Some(n) = std::env::var("SEQSUB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    std::process::exit(seqsub::cli::run(std::env::args_os()));
}
