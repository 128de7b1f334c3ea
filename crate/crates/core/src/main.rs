use std::io;

fn main() {
    let code = dialogue_policy::cli::run_cli(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
