fn main() {
    std::process::exit(vessel_metrics_cli::run(std::env::args_os()));
}
