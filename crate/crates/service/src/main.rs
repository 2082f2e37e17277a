fn main() {
    std::process::exit(fusionloc_service::cli::run(std::env::args_os()));
}
