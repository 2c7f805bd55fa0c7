use std::io::{stderr, stdout};

fn main() {
    let code = geoscore::run_with(std::env::args_os(), &mut stdout().lock(), &mut stderr().lock());
    std::process::exit(code);
}
