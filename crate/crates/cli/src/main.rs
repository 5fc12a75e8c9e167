fn main() {
    std::process::exit(ctv::run(std::env::args_os()));
}
