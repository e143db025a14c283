fn main() {
    std::process::exit(embedding_channels::spectra::run_cli(std::env::args_os()));
}
