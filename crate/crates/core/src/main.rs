fn main() {
    std::process::exit(bmm_mtc::cli::main(std::env::args_os()));
}
