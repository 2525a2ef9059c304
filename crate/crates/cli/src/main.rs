use std::fs;
use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use haunted_core::analyzer::{
    aggregate_by_agent, render, AggregateOptions, BeliefMode, ReportFormat,
};
use haunted_core::engine::Scenario;
use haunted_core::messages::{parse_command, InstructionVariant, MessageCatalog, DEFAULT_LOCALE};
use haunted_core::oracle::derived_values;
use haunted_core::transcript::{read_jsonl, write_jsonl, AgentInfo, Recorder, Transcript};
use haunted_harness::{
    chat_agent, optimal_agent, random_agent, run_batch, Agent, AgentConfig, BatchOptions,
    BatchResult, TrialPolicy,
};
use haunted_service::ServiceConfig;

#[derive(Debug, Parser)]
#[command(name = "haunted", version, about = "The Haunted House grid game")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variant {
    Original,
    Ghost,
    Coordinates,
}

impl From<Variant> for InstructionVariant {
    fn from(v: Variant) -> InstructionVariant {
        match v {
            Variant::Original => InstructionVariant::Original,
            Variant::Ghost => InstructionVariant::Ghost,
            Variant::Coordinates => InstructionVariant::Coordinates,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimAgent {
    Optimal,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Walls,
    Clues,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Play in the terminal. Type a move per line, or "quit".
    Play {
        #[arg(long, value_enum, default_value = "original")]
        variant: Variant,
        #[arg(long, default_value = DEFAULT_LOCALE)]
        locale: String,
        /// Transcript file; defaults to ./transcripts/<timestamp>.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a batch of trials against a chat-completion endpoint.
    Eval {
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
        n: u32,
        #[arg(long, value_enum, default_value = "original")]
        variant: Variant,
        #[arg(long, default_value = DEFAULT_LOCALE)]
        locale: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Environment variable holding the endpoint credential.
        #[arg(long, default_value = haunted_harness::chat::DEFAULT_CREDENTIAL_VAR)]
        credential_env: String,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        top_p: Option<f64>,
        #[arg(long)]
        top_k: Option<u32>,
        #[arg(long, default_value_t = 60)]
        timeout_secs: u64,
        /// Minimum milliseconds between requests.
        #[arg(long, default_value_t = 1000)]
        pacing_ms: u64,
        #[arg(long, default_value_t = 3)]
        max_retries: u32,
        #[arg(long, default_value_t = 1000)]
        backoff_ms: u64,
        #[arg(long, default_value_t = 2)]
        max_parse_retries: u32,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
    /// Run scripted agents.
    Sim {
        #[arg(long, value_enum)]
        agent: SimAgent,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        n: u32,
        #[arg(long, value_enum, default_value = "original")]
        variant: Variant,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
    /// Summarise transcripts per agent: sub-objectives and error kinds.
    Analyze {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "walls")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Count invalid trials in the denominators.
        #[arg(long)]
        include_invalid: bool,
    },
    /// Compute the derived reference values.
    Oracle {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the session HTTP service.
    Serve {
        #[arg(long, env = "HAUNTED_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, env = "HAUNTED_STORE", default_value = "haunted-events.jsonl")]
        store: PathBuf,
        #[arg(long, env = "HAUNTED_ADMIN_TOKEN")]
        admin_token: Option<String>,
        #[arg(long, env = "HAUNTED_LOCALE", default_value = DEFAULT_LOCALE)]
        locale: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Cmd) -> Result<()> {
    match command {
        Cmd::Play {
            variant,
            locale,
            out,
        } => play(variant.into(), &locale, out),
        Cmd::Eval {
            endpoint,
            model,
            n,
            variant,
            locale,
            out,
            credential_env,
            temperature,
            top_p,
            top_k,
            timeout_secs,
            pacing_ms,
            max_retries,
            backoff_ms,
            max_parse_retries,
            parallelism,
        } => {
            let mut config = AgentConfig::new(endpoint, model);
            config.credential = credential_env;
            config.sampling.temperature = temperature;
            config.sampling.top_p = top_p;
            config.sampling.top_k = top_k;
            config.timeout = Duration::from_secs(timeout_secs);
            config.request_pacing = Duration::from_millis(pacing_ms);
            config.max_retries = max_retries;
            config.backoff = Duration::from_millis(backoff_ms);
            config.max_parse_retries = max_parse_retries;
            let agent = chat_agent(config).context("configuring the chat agent")?;
            let variant = InstructionVariant::from(variant);
            let policy = TrialPolicy {
                max_parse_retries,
                locale,
                ..TrialPolicy::for_variant(variant)
            };
            let out = out.unwrap_or_else(default_transcript_path);
            let result = batch(
                |_| Box::new(agent.clone()) as Box<dyn Agent>,
                n as usize,
                &policy,
                parallelism,
                &out,
            )?;
            if result.summary.completed == 0 {
                bail!("no trial completed; see {}", out.display());
            }
            Ok(())
        }
        Cmd::Sim {
            agent,
            seed,
            n,
            variant,
            out,
            parallelism,
        } => {
            let variant = InstructionVariant::from(variant);
            let policy = TrialPolicy::for_variant(variant);
            let out = out.unwrap_or_else(default_transcript_path);
            batch(
                move |i| match agent {
                    SimAgent::Optimal => Box::new(optimal_agent(variant)) as Box<dyn Agent>,
                    SimAgent::Random => Box::new(random_agent(seed, i as u64, variant)),
                },
                n as usize,
                &policy,
                parallelism,
                &out,
            )?;
            Ok(())
        }
        Cmd::Analyze {
            inputs,
            mode,
            format,
            include_invalid,
        } => {
            let mut transcripts = Vec::new();
            for path in &inputs {
                let file =
                    fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                transcripts.extend(
                    read_jsonl(io::BufReader::new(file))
                        .with_context(|| format!("reading {}", path.display()))?,
                );
            }
            let options = AggregateOptions {
                mode: match mode {
                    Mode::Walls => BeliefMode::WallsOnly,
                    Mode::Clues => BeliefMode::ClueAugmented,
                },
                include_invalid,
            };
            let format = match format {
                Format::Text => ReportFormat::Text,
                Format::Csv => ReportFormat::Csv,
                Format::Json => ReportFormat::Json,
            };
            let report = aggregate_by_agent(&transcripts, options);
            print!("{}", render(&report, format));
            Ok(())
        }
        Cmd::Oracle { out } => {
            let text = serde_json::to_string_pretty(&derived_values())? + "\n";
            match out {
                Some(path) => write_file(&path, text.as_bytes()),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Cmd::Serve {
            addr,
            store,
            admin_token,
            locale,
        } => {
            let mut config = ServiceConfig::new(store);
            config.admin_token = admin_token.filter(|t| !t.is_empty());
            config.default_locale = locale;
            if config.admin_token.is_none() {
                log::warn!("no admin token set; /export is disabled");
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(haunted_service::serve(config, addr))?;
            Ok(())
        }
    }
}

fn default_transcript_path() -> PathBuf {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    PathBuf::from("transcripts").join(format!("{stamp}.jsonl"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

/// Runs a batch into `out` (replacing it) and writes the summary beside it.
fn batch<F>(
    agents: F,
    n: usize,
    policy: &TrialPolicy,
    parallelism: usize,
    out: &Path,
) -> Result<BatchResult>
where
    F: Fn(usize) -> Box<dyn Agent> + Sync,
{
    let result = run_batch(
        agents,
        n,
        &Scenario::canonical(),
        policy,
        &BatchOptions {
            parallelism,
            ..BatchOptions::default()
        },
    )?;
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &result.transcripts)?;
    write_file(out, &buf)?;
    let summary = serde_json::to_string_pretty(&result.summary)? + "\n";
    write_file(&summary_path(out), summary.as_bytes())?;

    let s = &result.summary;
    println!(
        "pass {}/{} ({}%), invalid {}, transcripts {}",
        s.passes,
        s.completed,
        haunted_core::analyzer::percent(s.passes, s.completed),
        s.invalid_protocol + s.invalid_transport,
        out.display()
    );
    Ok(result)
}

fn play(variant: InstructionVariant, locale: &str, out: Option<PathBuf>) -> Result<()> {
    let catalog = MessageCatalog::for_locale(locale)?;
    let reprompt = catalog.reprompt(variant.command_form()).to_owned();
    let limit = Scenario::canonical().move_limit;
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    writeln!(stdout, "{}\n", catalog.instructions(variant))?;
    let mut recorder = Recorder::new(Scenario::canonical(), catalog)?;
    let mut lines = io::stdin().lock().lines();

    while !recorder.game().is_over() {
        write!(stdout, "> ")?;
        stdout.flush()?;
        let Some(line) = lines.next().transpose()? else {
            break;
        };
        if line.trim().eq_ignore_ascii_case("quit") {
            break;
        }
        let Some(command) = parse_command(&line, variant) else {
            writeln!(stdout, "{reprompt}")?;
            continue;
        };
        let (record, _) = recorder.play(command)?;
        writeln!(stdout, "{}", record.rendered_feedback)?;
        writeln!(stdout, "move {}/{limit}", record.index)?;
    }

    let session_id = format!("play-{}", chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ"));
    let mut transcript: Transcript = recorder.finish(session_id, AgentInfo::human(), variant);
    transcript.created_at = Some(chrono::Utc::now().to_rfc3339());
    let out = out.unwrap_or_else(default_transcript_path);
    let mut buf = Vec::new();
    write_jsonl(&mut buf, [&transcript])?;
    write_file(&out, &buf)?;
    let status = serde_json::to_value(transcript.outcome.status)?;
    writeln!(
        stdout,
        "{}; transcript saved to {}",
        status.as_str().unwrap_or_default(),
        out.display()
    )?;
    Ok(())
}
