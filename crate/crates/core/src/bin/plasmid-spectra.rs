fn main() {
    std::process::exit(plasmid_spectra::cli::run(std::env::args_os()));
}
