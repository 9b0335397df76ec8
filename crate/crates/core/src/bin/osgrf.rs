fn main() {
    std::process::exit(osgrf::cli::dispatch(std::env::args_os()));
}
