use qif::cli;

fn main() {
    std::process::exit(cli::run());
}
