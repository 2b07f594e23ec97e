fn main() {
    let (code, text, to_stderr) = stochdual::cli::main_with_args(std::env::args_os());
    if to_stderr {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
    std::process::exit(code);
}
