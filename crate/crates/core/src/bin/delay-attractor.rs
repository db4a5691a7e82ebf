fn main() {
    std::process::exit(delay_attractor::cli::main_entry());
}
