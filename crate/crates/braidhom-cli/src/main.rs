fn main() {
    std::process::exit(braidhom::cli::run(std::env::args().skip(1).collect()));
}
