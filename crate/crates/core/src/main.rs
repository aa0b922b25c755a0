fn main() {
    std::process::exit(pwdyn::cli::run(std::env::args_os()));
}
