fn main() {
    std::process::exit(openwdvv::cli::main_entry(std::env::args_os()));
}
