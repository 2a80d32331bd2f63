fn main() {
    std::process::exit(blocksynth::cli::run(std::env::args_os()));
}
