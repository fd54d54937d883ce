use std::io;

fn main() {
    let code = chopthin::cli::run(
        std::env::args_os(),
        io::stdin().lock(),
        io::stdout().lock(),
        io::stderr().lock(),
    );
    std::process::exit(code);
}
