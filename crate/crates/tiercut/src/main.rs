use tiercut::cli;

fn main() {
    std::process::exit(cli::run());
}
