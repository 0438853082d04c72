use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use erp_lab::{
    quantize_onsets, run_pipeline, synthesize_eeg, AverageMode, EventList, Execution, PipelineConfig, Recording,
    SynthSpec,
};
use face_service::engine::EngineConfig;
use face_service::server::{self, ServerConfig};
use face_service::{export_session, replay, run_scripted, ReplayLog, RunConfig, Service, ServiceConfig};
use hybrid_face::render::{to_vector_text, RenderMode};
use hybrid_face::{load_basis, BasisSet};

#[derive(Parser)]
#[command(name = "hybridface", version, about = "Hybrid face control service and ERP analysis")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the command server and frame stream.
    Serve(ServeArgs),
    /// Forced-choice sessions.
    #[command(subcommand)]
    Session(SessionCmd),
    /// Re-run a replay log and check every frame.
    Replay(ReplayArgs),
    /// EEG analysis.
    #[command(subcommand)]
    Erp(ErpCmd),
}

#[derive(Args)]
struct ServeArgs {
    /// TCP command port.
    #[arg(long, default_value_t = 7070)]
    port: u16,
    /// HTTP/websocket port; command port + 1 when unset.
    #[arg(long)]
    http_port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    /// Basis TOML; the built-in set when unset.
    #[arg(long)]
    basis: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30.0)]
    tick_hz: f64,
    #[arg(long, value_parser = parse_mode, default_value = "hybrid_full")]
    mode: RenderMode,
    /// Blinks and twitches outside sessions.
    #[arg(long)]
    realism: bool,
    /// Static token required on every command.
    #[arg(long)]
    token: Option<String>,
    /// Write the replay log here on shutdown.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Export finished sessions below this directory.
    #[arg(long)]
    session_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SessionCmd {
    /// Run a session offline with a scripted responder.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ReplayArgs {
    log: PathBuf,
    /// Write the replayed frames as JSON lines.
    #[arg(long)]
    frames_out: Option<PathBuf>,
    /// Write one SVG per replayed frame.
    #[arg(long)]
    svg_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ErpCmd {
    /// Filter, epoch, reject, average and measure the N170.
    Run(Box<ErpRunArgs>),
    /// Generate a synthetic recording with known ERP and artifacts.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Args)]
struct ErpRunArgs {
    #[arg(long)]
    rec: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.1, 20.0])]
    band: Vec<f64>,
    /// Band applied to averages before peak picking.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    erp_band: Option<Vec<f64>>,
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Absolute amplitude limit on the reject channels, µV.
    #[arg(long, default_value_t = 70.0)]
    reject: f64,
    #[arg(long, value_delimiter = ',', default_value = "Fp1,Fp2")]
    channels: Vec<String>,
    #[arg(long, num_args = 2, value_names = ["START", "END"], default_values_t = [130.0, 190.0])]
    window: Vec<f64>,
    #[arg(long, default_value_t = 100.0)]
    pre_ms: f64,
    #[arg(long, default_value_t = 400.0)]
    post_ms: f64,
    /// CSV with an event_index column.
    #[arg(long)]
    exclusions: Option<PathBuf>,
    /// Floor onsets to a camera frame grid before epoching.
    #[arg(long)]
    quantize_fps: Option<f64>,
    /// Pool all trials instead of averaging subjects first.
    #[arg(long)]
    pooled: bool,
    #[arg(long)]
    stats_channel: Option<String>,
    #[arg(long, default_value = "s01")]
    subject: String,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: PathBuf,
}

fn parse_mode(s: &str) -> Result<RenderMode, String> {
    match s {
        "hybrid_full" => Ok(RenderMode::HybridFull),
        "eyes_only" => Ok(RenderMode::EyesOnly),
        _ => Err(format!("unknown mode {s:?}; expected hybrid_full or eyes_only")),
    }
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn read_basis(path: Option<&Path>) -> AnyResult<BasisSet> {
    Ok(match path {
        Some(p) => load_basis(
            &std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
            false,
        )?,
        None => BasisSet::default_set(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Serve(args) => serve(args),
        Cmd::Session(SessionCmd::Run { config, out }) => session_run(&config, &out),
        Cmd::Replay(args) => replay_cmd(args),
        Cmd::Erp(ErpCmd::Run(args)) => erp_run(*args),
        Cmd::Erp(ErpCmd::Synth {
            spec,
            seed,
            out,
            sequential,
        }) => erp_synth(&spec, seed, &out, sequential),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn serve(args: ServeArgs) -> AnyResult<ExitCode> {
    let basis = read_basis(args.basis.as_deref())?;
    let engine = EngineConfig {
        seed: args.seed,
        tick_hz: args.tick_hz,
        mode: args.mode,
        realism_enabled: args.realism,
        ..Default::default()
    };
    let service = Service::new(
        basis,
        ServiceConfig {
            engine,
            render: true,
            token: args.token.clone(),
        },
    )?;
    // Next port up by default; an ephemeral command port gets an ephemeral HTTP port.
    let http_port = args
        .http_port
        .unwrap_or(if args.port == 0 { 0 } else { args.port.wrapping_add(1) });
    let config = ServerConfig {
        command_addr: (args.bind, args.port).into(),
        http_addr: (args.bind, http_port).into(),
        token: args.token,
        session_out: args.session_out,
        frame_buffer: 64,
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let handle = server::start(service, config).await?;
        println!("commands on {} (newline-delimited JSON)", handle.command_addr);
        println!("frames on ws://{}/ws", handle.http_addr);
        tokio::signal::ctrl_c().await?;
        let svc = handle.shutdown().await;
        if let Some(path) = args.record {
            std::fs::write(&path, svc.log().to_jsonl())?;
            println!("replay log written to {}", path.display());
        }
        Ok(ExitCode::SUCCESS)
    })
}

fn session_run(config_path: &Path, out: &Path) -> AnyResult<ExitCode> {
    let text = std::fs::read_to_string(config_path).map_err(|e| format!("{}: {e}", config_path.display()))?;
    let config = RunConfig::from_toml(&text)?;
    let basis_path = config
        .basis
        .as_ref()
        .map(|b| config_path.parent().unwrap_or(Path::new(".")).join(b));
    let basis = read_basis(basis_path.as_deref())?;
    let outcome = run_scripted(basis, &config)?;
    let files = export_session(&outcome.record, Some(&outcome.log), out)?;
    let r = &outcome.record;
    println!(
        "{} trials, {} choices, {} files in {}",
        r.onsets.len(),
        r.choices.len(),
        files.len(),
        out.display()
    );
    if !r.choices.is_empty() {
        print!("{}", r.confusion.percent_csv());
    }
    Ok(ExitCode::SUCCESS)
}

fn replay_cmd(args: ReplayArgs) -> AnyResult<ExitCode> {
    let text = std::fs::read_to_string(&args.log).map_err(|e| format!("{}: {e}", args.log.display()))?;
    let log = ReplayLog::from_jsonl(&text)?;
    let report = replay(&log)?;
    if let Some(path) = &args.frames_out {
        let mut out = String::new();
        for f in &report.frames {
            out.push_str(&f.to_json());
            out.push('\n');
        }
        std::fs::write(path, out)?;
    }
    if let Some(dir) = &args.svg_dir {
        std::fs::create_dir_all(dir)?;
        for f in &report.frames {
            std::fs::write(dir.join(format!("frame_{:06}.svg", f.index)), to_vector_text(&f.scene))?;
        }
    }
    println!(
        "{} commands, {} frames logged, {} frames replayed, {} sessions",
        report.commands,
        report.frames_expected,
        report.frames_replayed,
        report.sessions.len()
    );
    match &report.first_mismatch {
        None if report.is_identical() => {
            println!("identical");
            Ok(ExitCode::SUCCESS)
        }
        None => {
            println!("frame count differs");
            Ok(ExitCode::from(2))
        }
        Some((index, expected, actual)) => {
            println!("frame {index} differs: expected {expected}, got {actual}");
            Ok(ExitCode::from(2))
        }
    }
}

fn read_exclusions(path: &Path) -> AnyResult<Vec<usize>> {
    Ok(erp_lab::epoch::read_exclusions(path)?)
}

fn erp_run(args: ErpRunArgs) -> AnyResult<ExitCode> {
    let rec = Recording::read(&args.rec)?;
    let mut events = EventList::read_for(&args.events, &rec)?;
    if let Some(fps) = args.quantize_fps {
        events = quantize_onsets(&events, fps)?;
    }
    let config = PipelineConfig {
        band: (args.band[0], args.band[1]),
        order: args.order,
        erp_band: args.erp_band.map(|b| (b[0], b[1])),
        reject_uv: args.reject,
        reject_channels: args.channels,
        pre_ms: args.pre_ms,
        post_ms: args.post_ms,
        window_ms: (args.window[0], args.window[1]),
        average: if args.pooled {
            AverageMode::Pooled
        } else {
            AverageMode::SubjectsThenGrand
        },
        exclusions: match &args.exclusions {
            Some(p) => read_exclusions(p)?,
            None => Vec::new(),
        },
        subject: args.subject,
        stats_channel: args.stats_channel,
        execution: if args.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
    };
    let output = run_pipeline(&rec, &events, &config)?;
    output.write(&args.out)?;

    let mut summary = String::new();
    for (label, counts) in &output.report.per_label {
        let _ = writeln!(
            summary,
            "{label}: {} events, {} kept, {} rejected, {} skipped",
            counts.events, counts.kept, counts.rejected, counts.skipped
        );
    }
    if let Some(a) = &output.anova {
        let _ = writeln!(
            summary,
            "ANOVA on {} by {:?}: F({}, {}) = {:.4}, p = {:.4e}",
            a.channel, a.group_by, a.result.df_between, a.result.df_within, a.result.f, a.result.p
        );
    }
    for w in &output.average.warnings {
        let _ = writeln!(summary, "warning: {w}");
    }
    let _ = writeln!(summary, "tables written to {}", args.out.display());
    print!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn erp_synth(spec_path: &Path, seed: u64, out: &Path, sequential: bool) -> AnyResult<ExitCode> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| format!("{}: {e}", spec_path.display()))?;
    let spec = SynthSpec::from_toml(&text)?;
    let exec = if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let s = synthesize_eeg(&spec, seed, exec)?;
    std::fs::create_dir_all(out)?;
    s.recording.write(out.join("recording.csv"))?;
    s.events.write(out.join("events.csv"))?;
    let mut artifacts = String::from("event_index,time_s,label\n");
    for &i in &s.artifact_events {
        let e = &s.events.events[i];
        let _ = writeln!(artifacts, "{i},{:.9},{}", e.time, e.label);
    }
    std::fs::write(out.join("artifacts.csv"), artifacts)?;
    println!(
        "{} channels × {} samples at {} Hz, {} events, {} with artifacts, written to {}",
        s.recording.channels.len(),
        s.recording.samples(),
        s.recording.sample_rate,
        s.events.len(),
        s.artifact_events.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}
