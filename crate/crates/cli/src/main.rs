use std::process::ExitCode;

fn main() -> ExitCode {
    let code = stl_grid_miner_cli::run(std::env::args().collect());
    ExitCode::from(code as u8)
}
