mod args;
mod commands;
mod error;
mod files;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Grid(a) => commands::grid_cmd(a),
        Command::Compare(a) => commands::compare_cmd(a),
        Command::EvalExact(a) => commands::eval_exact(a),
        Command::EvalParzen(a) => commands::eval_parzen(a),
        Command::Sample(a) => commands::sample_cmd(a),
        Command::ExportProfile(a) => commands::export_profile(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
