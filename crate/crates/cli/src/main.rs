use anyhow::{bail, Context, Result};
use clap::parser::ValueSource;
use clap::{Arg, ArgMatches};
use plate_green_cli::{execute, parse_config_text, Command, ScenarioConfig, Status, KEYS};
use std::collections::BTreeMap;
use std::process::ExitCode;

fn with_keys(cmd: clap::Command) -> clap::Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("Read 'key = value' lines from FILE; flags override them"),
    );
    KEYS.iter().fold(cmd, |cmd, key| {
        let mut arg = Arg::new(key.name)
            .long(key.name)
            .value_name("VALUE")
            .allow_hyphen_values(true)
            .help(key.help);
        if let Some(d) = key.default {
            arg = arg.default_value(d);
        }
        cmd.arg(arg)
    })
}

fn cli() -> clap::Command {
    let mut root = clap::Command::new("plate-green")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Biharmonic Green function experiments on planar domains and balls")
        .after_help("Exit status: 0 when every check passes, 1 when violations are found, 2 on errors.")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for c in Command::ALL {
        root = root.subcommand(with_keys(clap::Command::new(c.name()).about(c.about())));
    }
    root.subcommand(with_keys(
        clap::Command::new("run")
            .about("Run the scenario named by the 'command' key of a config file")
            .arg(
                Arg::new("command")
                    .long("command")
                    .value_name("NAME")
                    .help("Override the file's command"),
            ),
    ))
}

fn given_on_command_line(m: &ArgMatches, id: &str) -> Option<String> {
    (m.value_source(id) == Some(ValueSource::CommandLine))
        .then(|| m.get_one::<String>(id).cloned())
        .flatten()
}

fn scenario(name: &str, m: &ArgMatches) -> Result<ScenarioConfig> {
    let file = match m.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {path}"))?;
            parse_config_text(&text).with_context(|| format!("in {path}"))?
        }
        None => BTreeMap::new(),
    };
    let flags: BTreeMap<String, String> = KEYS
        .iter()
        .filter_map(|k| given_on_command_line(m, k.name).map(|v| (k.name.to_string(), v)))
        .collect();
    let command = if name == "run" {
        let Some(c) = m.get_one::<String>("command").or(file.get("command")) else {
            bail!("run needs a command, from --command or a 'command' line in the config");
        };
        c.parse()?
    } else {
        let command: Command = name.parse()?;
        if let Some(other) = file.get("command").filter(|c| *c != name) {
            bail!("config file names command '{other}' but '{name}' was invoked");
        }
        command
    };
    ScenarioConfig::resolve(command, &file, &flags)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let outcome = scenario(name, sub).and_then(|config| execute(&config));
    match outcome {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            match report.status {
                Status::Pass => ExitCode::SUCCESS,
                Status::Violations => ExitCode::from(1),
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
