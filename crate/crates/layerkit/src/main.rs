fn main() {
    std::process::exit(layerkit::cli::run(std::env::args_os()));
}
