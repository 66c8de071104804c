fn main() {
    std::process::exit(judgekit_cli::main_impl(std::env::args_os()));
}
