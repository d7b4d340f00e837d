fn main() {
    std::process::exit(xtreval::main_with_args(std::env::args_os()));
}
