fn main() {
    std::process::exit(snnq::cli::dispatch(std::env::args_os()));
}
