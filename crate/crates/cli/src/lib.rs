//! Library half of the `ddfreq` binary: argument parsing, command dispatch,
//! output rendering and run manifests.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod output;
pub mod tables;

use args::{Cli, Command};
use clap::error::ErrorKind;
use clap::Parser;
use commands::{execute, Failure};
use manifest::{OutputChecksum, RunManifest, MANIFEST_VERSION};
use output::{Format, Table};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

/// Where the process streams go and whether standard output is a terminal.
pub struct Io<'a> {
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
    pub stdout_is_terminal: bool,
}

/// Parse `args` (without the program name), run, and return the exit status.
pub fn run<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(std::iter::once(OsString::from("ddfreq")).chain(args.iter().cloned())) {
        Ok(cli) => cli,
        Err(e) => {
            let help = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let target: &mut dyn Write = if help { &mut *io.stdout } else { &mut *io.stderr };
            let _ = write!(target, "{}", e.render());
            return if help { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let status = match &cli.command {
        Command::Replay(r) => replay(&cli, &r.manifest_path, io),
        _ => run_command(&cli, &args, io),
    };
    match status {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(io.stderr, "error: {}", f.message());
            f.code()
        }
    }
}

fn resolve_format(cli: &Cli, terminal: bool) -> Format {
    if cli.json {
        return Format::Json;
    }
    cli.format.unwrap_or(if terminal && cli.output.is_none() {
        Format::Table
    } else {
        Format::Csv
    })
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn run_command(cli: &Cli, args: &[OsString], io: &mut Io<'_>) -> Result<i32, Failure> {
    let format = resolve_format(cli, io.stdout_is_terminal);
    let out = execute(&cli.command, format, cli.digits)?;

    let main_name = cli
        .output
        .as_ref()
        .map_or("stdout".to_string(), |p| p.display().to_string());
    let mut checksums = vec![OutputChecksum::of(&main_name, &out.main)];
    match &cli.output {
        Some(path) => write_file(path, &out.main)?,
        None => io
            .stdout
            .write_all(&out.main)
            .map_err(|e| Failure::Usage(format!("cannot write standard output: {e}")))?,
    }
    for artifact in &out.extra {
        let path = artifact.path.as_ref().expect("extra artifacts have paths");
        write_file(path, &artifact.bytes)?;
        checksums.push(OutputChecksum::of(&path.display().to_string(), &artifact.bytes));
    }

    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        command: cli.command.name().to_string(),
        args: args.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        parameters: serde_json::to_value(cli).expect("arguments serialize"),
        seed: out.seed,
        format,
        digits: cli.digits,
        versions: manifest::versions(),
        outputs: checksums,
    };
    let manifest_path = cli.manifest.clone().or_else(|| {
        cli.output
            .as_ref()
            .map(|p| PathBuf::from(format!("{}.manifest.json", p.display())))
    });
    match manifest_path {
        Some(path) => {
            let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            text.push('\n');
            write_file(&path, text.as_bytes())?;
        }
        None => {
            let _ = writeln!(
                io.stderr,
                "{}",
                serde_json::to_string(&manifest).expect("manifest serializes")
            );
        }
    }

    if let Some(message) = out.check_failure {
        let _ = writeln!(io.stderr, "check failed: {message}");
        return Ok(EXIT_CHECK);
    }
    Ok(EXIT_OK)
}

/// Re-run the command recorded in a manifest without writing any files and
/// compare every output checksum.
fn replay(cli: &Cli, path: &PathBuf, io: &mut Io<'_>) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read manifest {}: {e}", path.display())))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid manifest {}: {e}", path.display())))?;
    let recorded = Cli::try_parse_from(std::iter::once("ddfreq".to_string()).chain(manifest.args.iter().cloned()))
        .map_err(|e| Failure::Usage(format!("manifest arguments do not parse: {e}")))?;
    if matches!(recorded.command, Command::Replay(_)) {
        return Err(Failure::Usage(
            "a replay manifest cannot point at another replay".into(),
        ));
    }
    let out = execute(&recorded.command, manifest.format, manifest.digits)?;
    let mut produced = vec![out.main];
    produced.extend(out.extra.into_iter().map(|a| a.bytes));

    let mut table = Table::new(["output", "expected_sha256", "actual_sha256", "matches"]);
    let mut all_match = produced.len() == manifest.outputs.len();
    for (i, expected) in manifest.outputs.iter().enumerate() {
        let actual = produced.get(i).map_or_else(String::new, |b| manifest::sha256_hex(b));
        let ok = actual == expected.sha256;
        all_match &= ok;
        table.push(vec![
            expected.name.as_str().into(),
            expected.sha256.as_str().into(),
            actual.into(),
            ok.into(),
        ]);
    }
    let format = resolve_format(cli, io.stdout_is_terminal);
    io.stdout
        .write_all(table.render(format, cli.digits).as_bytes())
        .map_err(|e| Failure::Usage(format!("cannot write standard output: {e}")))?;
    if manifest.versions != manifest::versions() {
        let _ = writeln!(io.stderr, "note: manifest was written by different crate versions");
    }
    if !all_match {
        let _ = writeln!(io.stderr, "replay mismatch for {}", path.display());
        return Ok(EXIT_CHECK);
    }
    Ok(EXIT_OK)
}
