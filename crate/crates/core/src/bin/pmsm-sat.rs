fn main() {
    std::process::exit(pmsm_sat::cli::run(std::env::args_os()));
}
