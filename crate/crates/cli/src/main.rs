use std::io::{self, BufWriter, Write};
use std::net::TcpListener;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pebbling::inplace::{InPlacePebbler, Variant};
use pebbling::pebbler::{run_trace, FrameworkPebbler, Pebbler};
use pebbling::protocol::wire::{self, Client, Reply};
use pebbling::protocol::{Engine, Prover};
use pebbling::schedule::{make_schedule, unrounded_schedule, work_sequence, Family};
use pebbling::selfcheck::{self, Fault};
use pebbling::{Error, Owf, Value};

const USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "pebble",
    version,
    about = "Hash chain reversal with binary pebblers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the schedule T_k of a family
    Schedule(ScheduleArgs),
    /// Print a per-round trace of hashes, storage and outputs
    Trace(TraceArgs),
    /// Stream the reversed chain as hex, one value per line
    Reverse(ReverseArgs),
    /// Run the built-in property suites
    Verify(VerifyArgs),
    /// Run an identification server
    Serve(ServeArgs),
    /// Register with a server and identify for a number of rounds
    Client(ClientArgs),
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Optimal)]
    family: FamilyArg,
    #[arg(long, value_parser = order_parser())]
    k: u32,
    /// Print the half-integer optimal schedule before rounding
    #[arg(long, conflicts_with = "work")]
    unrounded: bool,
    /// Print the work sequence W_k instead of T_k
    #[arg(long)]
    work: bool,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Optimal)]
    family: FamilyArg,
    #[arg(long, value_parser = order_parser())]
    k: u32,
    #[command(flatten)]
    owf: OwfArgs,
}

#[derive(Args)]
struct OwfArgs {
    /// One-way function
    #[arg(long, value_enum, default_value_t = OwfArg::Md5)]
    owf: OwfArg,
    /// Chain seed as lowercase hex. Defaults to md5 of the empty string for
    /// md5, and to f(0...0) for the other functions.
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct ReverseArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Use the in-place pebbler (speed2 or optimal only)
    #[arg(long)]
    inplace: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 10, value_parser = order_parser())]
    k_max: u32,
    #[command(flatten)]
    owf: OwfArgs,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<FaultArg>,
}

#[derive(Args)]
struct NetArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 7878)]
    port: u16,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, value_enum, default_value_t = OwfArg::Md5)]
    owf: OwfArg,
}

#[derive(Args)]
struct ClientArgs {
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    net: NetArgs,
    /// Use the in-place pebbler (speed2 or optimal only)
    #[arg(long)]
    inplace: bool,
    /// Identification rounds to run [default: 2^k]
    #[arg(long)]
    rounds: Option<u64>,
    /// Send a corrupted value first in this round
    #[arg(long)]
    tamper: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Rushing,
    Speed1,
    Speed2,
    Optimal,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Rushing => Family::Rushing,
            FamilyArg::Speed1 => Family::Speed1,
            FamilyArg::Speed2 => Family::Speed2,
            FamilyArg::Optimal => Family::Optimal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OwfArg {
    Md5,
    #[value(name = "davies-meyer-aes128")]
    DaviesMeyerAes128,
    Testmix64,
}

impl OwfArg {
    fn name(self) -> &'static str {
        match self {
            OwfArg::Md5 => "md5",
            OwfArg::DaviesMeyerAes128 => "davies-meyer-aes128",
            OwfArg::Testmix64 => "testmix64",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
    Plain,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    ScheduleOffByOne,
    CorruptOutput,
}

fn order_parser() -> clap::builder::RangedI64ValueParser<u32> {
    clap::value_parser!(u32).range(0..=30)
}

/// A problem with the invocation rather than with the run.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl OwfArgs {
    fn resolve(&self) -> anyhow::Result<(Owf, Value)> {
        let owf = Owf::builtin(self.owf.name())?;
        let seed = match &self.seed {
            None => owf.default_seed(),
            Some(hex) => owf
                .parse_value(hex)
                .map_err(|e| usage(format!("--seed: {e}")))?,
        };
        Ok((owf, seed))
    }
}

fn variant_for(family: FamilyArg) -> anyhow::Result<Variant> {
    Variant::from_family(family.into())
        .ok_or_else(|| usage("--inplace requires --family speed2 or optimal"))
}

fn cmd_schedule(args: &ScheduleArgs) -> anyhow::Result<()> {
    let family = Family::from(args.family);
    let line = if args.work {
        work_sequence(family, args.k).to_string()
    } else if args.unrounded {
        if family != Family::Optimal {
            return Err(usage("--unrounded requires --family optimal"));
        }
        unrounded_schedule(args.k).to_string()
    } else {
        make_schedule(family, args.k).to_string()
    };
    println!("{line}");
    Ok(())
}

fn cmd_trace(args: &TraceArgs) -> anyhow::Result<()> {
    let (owf, seed) = args.chain.owf.resolve()?;
    let trace = run_trace(&owf, args.chain.family.into(), args.chain.k, &seed)?;
    let out = BufWriter::new(io::stdout().lock());
    match args.format {
        Format::Csv => trace.write_csv(out)?,
        Format::Jsonl => trace.write_jsonl(out)?,
        Format::Plain => {
            let mut out = out;
            writeln!(out, "round hashes storage output")?;
            for row in &trace.rows {
                let output = row.output.as_ref().map_or("-".to_string(), Value::to_hex);
                writeln!(
                    out,
                    "{} {} {} {}",
                    row.round, row.hashes, row.storage, output
                )?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn cmd_reverse(args: &ReverseArgs) -> anyhow::Result<()> {
    let (owf, seed) = args.chain.owf.resolve()?;
    let k = args.chain.k;
    let pebbler: Box<dyn Pebbler> = if args.inplace {
        Box::new(InPlacePebbler::new(
            owf,
            variant_for(args.chain.family)?,
            k,
            seed,
        )?)
    } else {
        Box::new(FrameworkPebbler::new(
            owf,
            args.chain.family.into(),
            k,
            seed,
        )?)
    };
    stream_outputs(pebbler)
}

fn stream_outputs(mut pebbler: Box<dyn Pebbler>) -> anyhow::Result<()> {
    let mut out = BufWriter::new(io::stdout().lock());
    while !pebbler.is_exhausted() {
        if let Some(v) = pebbler.step()?.output {
            writeln!(out, "{v}")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<bool> {
    let (owf, seed) = args.owf.resolve()?;
    let fault = match args.inject_fault {
        None => Fault::None,
        Some(FaultArg::ScheduleOffByOne) => Fault::ScheduleOffByOne,
        Some(FaultArg::CorruptOutput) => Fault::CorruptOutput,
    };
    let results = selfcheck::run_all(&owf, &seed, args.k_max, fault);
    for r in &results {
        if r.passed {
            println!("PASS {}", r.name);
        } else {
            println!("FAIL {}: {}", r.name, r.detail);
        }
    }
    Ok(results.iter().all(|r| r.passed))
}

fn cmd_serve(args: &ServeArgs) -> anyhow::Result<()> {
    let owf = Owf::builtin(args.owf.name())?;
    let listener = TcpListener::bind((args.net.host.as_str(), args.net.port))
        .with_context(|| format!("cannot listen on {}:{}", args.net.host, args.net.port))?;
    println!("listening on {}", listener.local_addr()?);
    io::stdout().flush()?;
    wire::serve(listener, owf)?;
    Ok(())
}

fn cmd_client(args: &ClientArgs) -> anyhow::Result<()> {
    let (owf, seed) = args.chain.owf.resolve()?;
    let k = args.chain.k;
    let engine = if args.inplace {
        Engine::InPlace(variant_for(args.chain.family)?)
    } else {
        Engine::Framework(args.chain.family.into())
    };
    let (mut prover, endpoint) = Prover::new(owf, engine, k, seed)?;
    let addr = format!("{}:{}", args.net.host, args.net.port);
    let mut client =
        Client::connect(addr.as_str()).with_context(|| format!("cannot connect to {addr}"))?;

    let reply = client.register(k, &endpoint)?;
    println!("register {endpoint} {reply}");
    if reply != Reply::Ok(0) {
        bail!("registration refused: {reply}");
    }

    let rounds = args.rounds.unwrap_or(prover.len());
    for round in 1..=rounds {
        let release = match prover.next_release() {
            Ok(release) => release,
            Err(Error::ChainExhausted { released }) => {
                bail!("chain exhausted after {released} rounds; round {round} cannot be run")
            }
            Err(e) => return Err(e.into()),
        };
        if args.tamper == Some(round) {
            let reply = client.auth(&release.value.with_bit_flipped(0))?;
            println!("round {round} tampered {reply}");
            if reply != Reply::Fail {
                bail!("tampered value was not rejected: {reply}");
            }
        }
        let reply = client.auth(&release.value)?;
        println!("round {round} hashes {} {reply}", release.hashes);
        if !matches!(reply, Reply::Ok(_)) {
            bail!("round {round} rejected: {reply}");
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    match &cli.command {
        Command::Schedule(a) => cmd_schedule(a)?,
        Command::Trace(a) => cmd_trace(a)?,
        Command::Reverse(a) => cmd_reverse(a)?,
        Command::Verify(a) => return cmd_verify(a),
        Command::Serve(a) => cmd_serve(a)?,
        Command::Client(a) => cmd_client(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE)
        }
        Err(e) => {
            // a closed stdout pipe is not a failure of the run
            if let Some(io) = e.downcast_ref::<io::Error>() {
                if io.kind() == io::ErrorKind::BrokenPipe {
                    return ExitCode::SUCCESS;
                }
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
