fn main() {
    std::process::exit(defect_tower::cli::run(std::env::args_os()));
}
