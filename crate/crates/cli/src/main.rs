fn main() {
    std::process::exit(ccsched::run(std::env::args_os()));
}
