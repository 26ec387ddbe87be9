//! `ofhsim`: scenario runner, capture analyzer and delay-profile tools.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ofh_core::delay_profile::{
    derive_du_profile, du_preset, preset, ru_preset, validate_pair, DuDelayProfile, FindingStatus, FronthaulDelay,
    PresetName, Profile, RuDelayProfile, Side,
};
use ofh_core::report::{eaxc_name, run_status, ExitStatus, Report};
use ofh_core::scenario::{parse_profile_file, ScenarioConfig, ScenarioError};
use ofh_core::ru_engine::RuStream;
use ofh_core::sim_transport::{analyze, run, CaptureDirection, SimError};

/// Directory that relative output paths are resolved against.
const OUT_DIR_ENV: &str = "OFHSIM_OUT_DIR";
const SHOWN_ASSERTIONS: usize = 8;

#[derive(Parser)]
#[command(name = "ofhsim", version, about = "Split 7.2 open fronthaul simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write a CSV report.
    Run(RunArgs),
    /// Replay a capture and classify every frame.
    Analyze(AnalyzeArgs),
    /// Delay-profile tools.
    Profile {
        #[command(subcommand)]
        cmd: ProfileCmd,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    config: PathBuf,
    /// CSV report path.
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
    /// Also write a frame capture.
    #[arg(long)]
    capture: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    capture: PathBuf,
    /// Preset name or profile file; defaults to the profiles in the capture.
    #[arg(long)]
    profile: Option<String>,
    /// Print one line per frame after the summary.
    #[arg(long)]
    frames: bool,
}

#[derive(Args)]
struct FronthaulArgs {
    #[arg(long, default_value_t = 0)]
    t12_min: u32,
    #[arg(long, default_value_t = 0)]
    t12_max: u32,
    #[arg(long, default_value_t = 0)]
    t34_min: u32,
    #[arg(long, default_value_t = 0)]
    t34_max: u32,
}

impl FronthaulArgs {
    fn delay(&self) -> Result<FronthaulDelay, Failure> {
        FronthaulDelay::new(self.t12_min, self.t12_max, self.t34_min, self.t34_max).map_err(Failure::usage)
    }
}

#[derive(Subcommand)]
enum ProfileCmd {
    /// Print a preset.
    Show {
        preset: String,
        /// ru, du, or both when omitted.
        #[arg(long)]
        side: Option<String>,
    },
    /// Derive the DU profile that matches an RU profile over a fronthaul.
    Derive {
        /// RU preset or profile file.
        #[arg(long)]
        ru: String,
        #[command(flatten)]
        fh: FronthaulArgs,
    },
    /// Audit a DU profile against an RU profile.
    Validate {
        #[arg(long)]
        ru: String,
        #[arg(long)]
        du: String,
        #[command(flatten)]
        fh: FronthaulArgs,
    },
}

/// A failed command: message and exit status.
#[derive(Debug)]
struct Failure {
    status: ExitStatus,
    message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self { status: ExitStatus::ConfigError, message: e.to_string() }
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Self { status: ExitStatus::Failed, message: format!("runtime error: {e}") }
    }

    fn output(path: &Path, e: impl std::fmt::Display) -> Self {
        Self { status: ExitStatus::Failed, message: format!("cannot write {}: {e}", path.display()) }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let message = match &e {
            ScenarioError::Io(_) => format!("config error: {e}"),
            ScenarioError::Parse(m) => format!("parse error: {m}"),
            ScenarioError::Invalid(m) => format!("validation error: {m}"),
        };
        Self { status: ExitStatus::ConfigError, message }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(m) => Self { status: ExitStatus::ConfigError, message: format!("validation error: {m}") },
            other => Self::runtime(other),
        }
    }
}

fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

/// Temporary file next to `target`, renamed into place on success.
fn staged(target: &Path) -> Result<tempfile::NamedTempFile, Failure> {
    let dir = match target.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Failure::output(target, e))?;
    let f = tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::output(target, e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(f.path(), fs::Permissions::from_mode(0o644)).map_err(|e| Failure::output(target, e))?;
    }
    Ok(f)
}

fn cmd_run(a: &RunArgs) -> Result<ExitStatus, Failure> {
    let scenario = ScenarioConfig::load(&a.config)?.build(a.seed)?;
    let out = out_path(&a.out);
    let capture = a.capture.as_deref().map(out_path);

    let mut capture_file = capture.as_deref().map(staged).transpose()?;
    let outcome = {
        let mut w = capture_file.as_mut().map(|f| BufWriter::new(f.as_file_mut()));
        let outcome = run(&scenario.sim, w.as_mut().map(|w| w as &mut dyn Write))?;
        if let Some(w) = w.as_mut() {
            w.flush().map_err(Failure::runtime)?;
        }
        outcome
    };
    let report = Report::from_outcome(&outcome, &scenario.findings, scenario.sim.seed);
    let mut report_file = staged(&out)?;
    report.write_csv(report_file.as_file_mut()).map_err(|e| Failure::output(&out, e))?;
    report_file.persist(&out).map_err(|e| Failure::output(&out, e))?;
    if let (Some(f), Some(path)) = (capture_file, capture.as_deref()) {
        f.persist(path).map_err(|e| Failure::output(path, e))?;
    }

    for m in outcome.assertions.iter().take(SHOWN_ASSERTIONS) {
        eprintln!("assertion: {m}");
    }
    if outcome.assertion_count > SHOWN_ASSERTIONS as u64 {
        eprintln!("... {} more assertion(s)", outcome.assertion_count - SHOWN_ASSERTIONS as u64);
    }
    let status = run_status(&outcome);
    let late: u64 = RuStream::ALL.iter().map(|&s| outcome.ru.stream(s).late).sum();
    println!(
        "{}: {} slots, {} frames to RU, {} late, integrity {}, report {}",
        if status == ExitStatus::Ok { "ok" } else { "FAILED" },
        scenario.sim.n_slots(),
        outcome.du.sent_total(),
        late,
        if outcome.integrity.passed() { "pass" } else { "fail" },
        out.display(),
    );
    Ok(status)
}

/// A preset name, or a path to a profile file.
fn load_profiles(source: &str) -> Result<(Option<RuDelayProfile>, Option<DuDelayProfile>), Failure> {
    if let Ok(name) = source.parse::<PresetName>() {
        return Ok((Some(ru_preset(name)), Some(du_preset(name))));
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(Failure::usage(format!("`{source}` is neither a preset nor a profile file")));
    }
    Ok(parse_profile_file(&fs::read_to_string(path).map_err(Failure::usage)?)?)
}

fn load_ru(source: &str) -> Result<RuDelayProfile, Failure> {
    load_profiles(source)?.0.ok_or_else(|| Failure::usage(format!("`{source}` has no RU profile")))
}

fn load_du(source: &str) -> Result<DuDelayProfile, Failure> {
    load_profiles(source)?.1.ok_or_else(|| Failure::usage(format!("`{source}` has no DU profile")))
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<ExitStatus, Failure> {
    let (ru, du) = match &a.profile {
        Some(p) => load_profiles(p)?,
        None => (None, None),
    };
    let bytes = fs::read(&a.capture).map_err(Failure::usage)?;
    let analysis = analyze(&bytes, ru, du).map_err(|e| Failure::usage(format!("corrupt capture: {e}")))?;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    Report::from_analysis(&analysis).write_csv(&mut w).map_err(Failure::runtime)?;
    if a.frames {
        writeln!(w).map_err(Failure::runtime)?;
        writeln!(w, "time_us,direction,eaxc,class").map_err(Failure::runtime)?;
        for f in &analysis.frames {
            let eaxc = f.eaxc.map(eaxc_name).unwrap_or_default();
            let dir = match f.direction {
                CaptureDirection::ToRu => "to_ru",
                CaptureDirection::ToDu => "to_du",
                CaptureDirection::Meta => "meta",
            };
            writeln!(w, "{},{dir},{eaxc},{}", f.time_us, f.class.name()).map_err(Failure::runtime)?;
        }
    }
    Ok(ExitStatus::Ok)
}

fn print_profile(p: &Profile, out: &mut String) {
    let (title, rows) = match p {
        Profile::Ru(_) => ("RU", p.rows()),
        Profile::Du(_) => ("DU", p.rows()),
    };
    let _ = writeln!(out, "{title}");
    for (name, v) in rows {
        let _ = writeln!(out, "  {name:<14} {v:>6} us");
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = io::stdout().lock().write_all(text.as_bytes());
}

fn cmd_profile(c: &ProfileCmd) -> Result<ExitStatus, Failure> {
    let mut out = String::new();
    match c {
        ProfileCmd::Show { preset: name, side } => {
            let sides = match side.as_deref() {
                Some(s) => vec![s.parse::<Side>().map_err(Failure::usage)?],
                None => vec![Side::Ru, Side::Du],
            };
            for s in sides {
                print_profile(&preset(name, s).map_err(Failure::usage)?, &mut out);
            }
        }
        ProfileCmd::Derive { ru, fh } => {
            let du = derive_du_profile(&load_ru(ru)?, &fh.delay()?).map_err(Failure::usage)?;
            print_profile(&Profile::Du(du), &mut out);
        }
        ProfileCmd::Validate { ru, du, fh } => {
            let findings = validate_pair(&load_ru(ru)?, &load_du(du)?, &fh.delay()?);
            let warnings = findings.iter().filter(|f| f.is_warning()).count();
            for f in &findings {
                let _ = match &f.status {
                    FindingStatus::Ok => writeln!(out, "ok       {}", f.field),
                    FindingStatus::Warning(m) => writeln!(out, "warning  {} (+{} us): {m}", f.field, f.excess_us),
                };
            }
            let _ = writeln!(out, "{warnings} warning(s)");
        }
    }
    emit(&out);
    Ok(ExitStatus::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Command::Run(a) => cmd_run(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Profile { cmd } => cmd_profile(cmd),
    };
    let status = result.unwrap_or_else(|f| {
        eprintln!("ofhsim: {}", f.message);
        f.status
    });
    ExitCode::from(status.code() as u8)
}
