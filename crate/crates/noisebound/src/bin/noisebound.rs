fn main() {
    std::process::exit(noisebound::cli::run());
}
