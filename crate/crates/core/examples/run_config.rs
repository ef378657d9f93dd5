//! Drive the command layer from a TOML string instead of the binary.

use laakso::cli::{dispatch, Command, RunConfig};

const CONFIG: &str = r#"
level = 4
seed = 5

[space]
j = 2

[walk]
walkers = 500
radii = [0.125, 0.25]

[verify]
checks = ["vd", "theta"]
"#;

fn main() -> laakso::Result<()> {
    let mut config = RunConfig::parse(CONFIG)?;
    config.output = Some(std::env::temp_dir().join("laakso-example"));
    println!("config hash {}", config.hash());
    for cmd in [Command::Build, Command::Spectrum, Command::Walk, Command::Verify, Command::Report] {
        let out = dispatch(cmd, &config)?;
        println!("{}", out.summary);
        for a in out.artifacts {
            println!("    {}", a.display());
        }
    }
    Ok(())
}
