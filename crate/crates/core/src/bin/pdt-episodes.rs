fn main() {
    std::process::exit(pdt_episodes::cli::run(std::env::args_os()));
}
