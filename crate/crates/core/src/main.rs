fn main() {
    std::process::exit(goal_discovery::cli::run(std::env::args_os()));
}
