fn main() {
    std::process::exit(opinion_sim::cli::cli_main(std::env::args_os()));
}
