mod args;
mod commands;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = commands::load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Store(c) => commands::store(c, cfg),
        Command::Vocab(c) => commands::vocab(c, cfg),
        Command::Decompose(a) => commands::decompose(a, cfg),
        Command::Prompt(c) => commands::prompt(c, cfg),
        Command::Generate(a) => commands::generate(a, cfg),
        Command::Evaluate(a) => commands::evaluate(a, cfg),
        Command::Pipeline(c) => commands::pipeline(c, cfg),
        Command::Ablate(a) => commands::ablate(a, cfg),
        Command::Synth(c) => commands::synth_gen(c, cfg),
        Command::ServeFixture(a) => commands::serve_fixture(a),
    }
}
