fn main() {
    std::process::exit(conflictsim::run(std::env::args_os()));
}
