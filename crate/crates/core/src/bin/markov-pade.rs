fn main() {
    std::process::exit(markov_pade::cli::run(std::env::args_os()));
}
