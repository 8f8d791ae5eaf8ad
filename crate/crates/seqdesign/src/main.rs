fn main() {
    std::process::exit(seqdesign::cli::run_cli());
}
