fn main() {
    std::process::exit(uavnoma_cli::main_with(std::env::args_os()));
}
