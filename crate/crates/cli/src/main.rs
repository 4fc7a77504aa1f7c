use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use benford_core::kernel::{Digit, DEFAULT_LIMBS, MAX_LIMBS, MIN_LIMBS};
use benford_core::oracle;
use benford_core::sources::{
    digit_stream, DigitGenerator, Family, SequenceKind, SourceError, StreamMeta,
};
use benford_core::stats::{
    self, checkpoints, BenfordModel, CheckpointTracker, StatsError, StatsState, DEFAULT_ORDER,
};
use benford_core::store::{
    build_report, emit_report, Cell, DigitReader, DigitWriter, Format, Report, ReportKind,
    ResumeState, StoreError,
};

const CHUNK: u64 = 1 << 22;

#[derive(Parser)]
#[command(
    name = "benford",
    version,
    about = "Certified leading digits and Benford statistics"
)]
struct Cli {
    /// Worker threads for generation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Default directory for digit files.
    #[arg(long, global = true, env = "BENFORD_DATA_DIR", default_value = ".")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the leading digits of terms 1..=N to a digit file.
    Generate(GenerateArgs),
    /// Compute a statistic over a digit file and write a report.
    Analyze(AnalyzeArgs),
    /// Compare the pipeline against exact big-integer digits.
    Verify(VerifyArgs),
    /// Print u_n = log a_(n+1) − log a_n in double precision.
    DeltaLog(DeltaLogArgs),
}

#[derive(Args, Clone)]
struct SeqArgs {
    /// mersenne | random-mersenne | pow2 | pow2-nsq | pow2-nlogn | npown | factorial | primorial
    #[arg(long = "seq")]
    seq: Option<String>,
    /// Number of terms.
    #[arg(short = 'n', long = "count")]
    count: Option<u64>,
    /// Seed (random-mersenne only).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 10)]
    base: u32,
    /// Kernel precision in 64-bit limbs.
    #[arg(long, default_value_t = DEFAULT_LIMBS)]
    limbs: usize,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    seq: SeqArgs,
    /// Tuple order tracked for progress statistics.
    #[arg(short = 'k', long = "tuple-order", default_value_t = DEFAULT_ORDER)]
    k: usize,
    /// Print progress at every checkpoint N_i.
    #[arg(long)]
    checkpoints: bool,
    /// Resume file; created or continued, removed on completion.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
    /// Stop once this many terms are written, keeping the resume file.
    #[arg(long, hide = true)]
    stop_at: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// counts | waits | tuples | tvd | zscore
    report: String,
    /// Digit file (defaults to the data-directory name for --seq and -n).
    #[arg(short = 'i', long = "input")]
    input: Option<PathBuf>,
    /// Generate in process instead of reading a file.
    #[arg(long)]
    pipe: bool,
    #[command(flatten)]
    seq: SeqArgs,
    #[arg(short = 'k', long = "tuple-order", default_value_t = DEFAULT_ORDER)]
    k: usize,
    /// Restrict per-digit reports to one digit.
    #[arg(short = 'd', long = "digit")]
    digit: Option<u32>,
    /// Report at every checkpoint N_i as well as at N.
    #[arg(long)]
    checkpoints: bool,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    seq: SeqArgs,
    /// Check a digit file instead of a fresh stream.
    #[arg(short = 'i', long = "input")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct DeltaLogArgs {
    #[command(flatten)]
    seq: SeqArgs,
    /// First index.
    #[arg(long, default_value_t = 1)]
    from: u64,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Io(String),
    Ambiguous(String),
    Mismatch(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::Ambiguous(_) => 4,
            Failure::Mismatch(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Ambiguous(m) | Failure::Mismatch(m) => m,
        }
    }
}

impl From<SourceError> for Failure {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::InvalidSequence(_) => Failure::Usage(e.to_string()),
            _ => Failure::Ambiguous(e.to_string()),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Report(_) => Failure::Usage(e.to_string()),
            _ => Failure::Io(e.to_string()),
        }
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Failure::Usage(msg.into()))
}

impl SeqArgs {
    fn kind(&self) -> Result<SequenceKind> {
        let Some(name) = &self.seq else {
            return usage("--seq is required");
        };
        let family: Family = name.parse()?;
        Ok(SequenceKind::new(family, self.seed, self.base)?)
    }

    fn count(&self) -> Result<u64> {
        match self.count {
            Some(n) => Ok(n),
            None => usage("-n/--count is required"),
        }
    }

    fn limbs(&self) -> Result<usize> {
        if !(MIN_LIMBS..=MAX_LIMBS).contains(&self.limbs) {
            return usage(format!(
                "--limbs must be in {MIN_LIMBS}..={MAX_LIMBS}, got {}",
                self.limbs
            ));
        }
        Ok(self.limbs)
    }

    fn meta(&self) -> Result<StreamMeta> {
        Ok(StreamMeta {
            kind: self.kind()?,
            count: self.count()?,
            limbs: self.limbs()?,
        })
    }
}

fn default_path(dir: &Path, kind: &SequenceKind, n: u64) -> PathBuf {
    let mut name = kind.family().name().to_string();
    if let Some(s) = kind.seed() {
        name += &format!("-seed{s}");
    }
    if kind.base() != 10 {
        name += &format!("-base{}", kind.base());
    }
    dir.join(format!("{name}-{n}.bdig"))
}

fn parse_format(s: &str) -> Result<Format> {
    s.parse().map_err(Failure::Usage)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn progress(s: &StatsState, model: &BenfordModel) {
    let zmax = (1..s.base())
        .map(|d| stats::z_score(s, d, model).abs())
        .fold(0.0, f64::max);
    eprintln!("n={} max|z|={zmax:.3}", s.len());
}

fn generate(cli: &Cli, args: &GenerateArgs) -> Result<()> {
    let meta = args.seq.meta()?;
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| default_path(&cli.data_dir, &meta.kind, meta.count));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let model = BenfordModel::new(meta.kind.base())?;
    let resumed = match &args.resume {
        Some(r) if r.exists() => Some(ResumeState::load(r)?),
        _ => None,
    };
    let (mut gen, mut writer, state) = match resumed {
        Some(rs) => {
            if rs.meta != meta {
                return usage(format!(
                    "resume file is for {} × {} at {} limbs",
                    rs.meta.kind, rs.meta.count, rs.meta.limbs
                ));
            }
            let Some(state) = rs.stats else {
                return usage("resume file carries no statistics");
            };
            if state.order() != args.k {
                return usage(format!("resume file tracks {}-tuples", state.order()));
            }
            eprintln!("resuming at n={}", rs.generator.position);
            (
                DigitGenerator::resume(&rs.generator)?,
                DigitWriter::reopen(&path, meta, rs.file)?,
                state,
            )
        }
        None => (
            DigitGenerator::new(meta.kind, meta.limbs)?,
            DigitWriter::create(&path, meta)?,
            StatsState::new(meta.kind.base(), args.k)?,
        ),
    };
    let marks = if args.checkpoints {
        checkpoints(meta.count)
    } else {
        Vec::new()
    };
    let mut tracker = CheckpointTracker::new(state, marks);
    let stop = args.stop_at.unwrap_or(u64::MAX).min(meta.count);
    let started = Instant::now();
    let mut buf: Vec<Digit> = Vec::new();
    while gen.position() < stop {
        let take = CHUNK.min(stop - gen.position());
        buf.clear();
        gen.fill(&mut buf, take)?;
        writer.push(&buf)?;
        tracker.feed(&buf, |s| progress(s, &model));
        if let Some(r) = &args.resume {
            let rs = ResumeState {
                meta,
                generator: gen.checkpoint(),
                file: writer.checkpoint()?,
                stats: Some(tracker.state().clone()),
            };
            rs.save(r)?;
        }
    }
    if gen.position() < meta.count {
        eprintln!("stopped at n={}", gen.position());
        return Ok(());
    }
    writer.finish()?;
    if let Some(r) = &args.resume {
        if r.exists() {
            fs::remove_file(r)?;
        }
    }
    eprintln!(
        "wrote {} digits of {} to {} in {:.1?}",
        meta.count,
        meta.kind,
        path.display(),
        started.elapsed()
    );
    Ok(())
}

fn analyze(cli: &Cli, args: &AnalyzeArgs) -> Result<()> {
    let kind: ReportKind = args.report.parse().map_err(Failure::Usage)?;
    let format = parse_format(&args.format)?;

    enum Input {
        File(DigitReader<io::BufReader<File>>),
        Pipe(Box<DigitGenerator>),
    }
    let (meta, mut input) = if args.pipe {
        let meta = args.seq.meta()?;
        let gen = DigitGenerator::new(meta.kind, meta.limbs)?;
        (meta, Input::Pipe(Box::new(gen)))
    } else {
        let path = match &args.input {
            Some(p) => p.clone(),
            None => default_path(&cli.data_dir, &args.seq.kind()?, args.seq.count()?),
        };
        if !path.exists() {
            return Err(Failure::Io(format!("no such file: {}", path.display())));
        }
        let r = DigitReader::open(&path)?;
        (*r.meta(), Input::File(r))
    };
    let model = BenfordModel::new(meta.kind.base())?;
    let state = StatsState::new(meta.kind.base(), args.k)?;
    let mut marks = vec![meta.count];
    if args.checkpoints && kind != ReportKind::Waits {
        marks.extend(checkpoints(meta.count));
    }
    let mut tracker = CheckpointTracker::new(state, marks);
    let mut report: Option<Report> = None;
    let mut failed: Option<Failure> = None;
    let mut at = |s: &StatsState| {
        if failed.is_some() {
            return;
        }
        match build_report(kind, std::slice::from_ref(s), &model, args.digit) {
            Ok(r) => match &mut report {
                Some(acc) => acc.rows.extend(r.rows),
                None => report = Some(r),
            },
            Err(e) => failed = Some(e.into()),
        }
    };
    let mut buf: Vec<Digit> = Vec::new();
    tracker.feed(&[], &mut at);
    let mut done = 0u64;
    while done < meta.count {
        buf.clear();
        let take = CHUNK.min(meta.count - done);
        match &mut input {
            Input::File(r) => {
                r.read_chunk(&mut buf, take as usize)?;
            }
            Input::Pipe(g) => g.fill(&mut buf, take)?,
        }
        done += buf.len() as u64;
        tracker.feed(&buf, &mut at);
    }
    if let Some(e) = failed {
        return Err(e);
    }
    let report = report.expect("final mark fires");
    let mut out = open_out(&args.out)?;
    emit_report(&report, format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn verify(args: &VerifyArgs) -> Result<()> {
    let (meta, got) = match &args.input {
        Some(path) => {
            let mut r = DigitReader::open(path)?;
            let meta = *r.meta();
            let n = args.seq.count.unwrap_or(meta.count).min(meta.count);
            let mut buf = Vec::new();
            loop {
                let want = (n - buf.len() as u64) as usize;
                if want == 0 || r.read_chunk(&mut buf, want)? == 0 {
                    break;
                }
            }
            (StreamMeta { count: n, ..meta }, buf)
        }
        None => {
            let meta = args.seq.meta()?;
            if meta.count > oracle::MAX_COUNT {
                return usage(format!("verify is limited to n ≤ {}", oracle::MAX_COUNT));
            }
            let s = digit_stream(meta.kind, meta.count, meta.limbs)?;
            (meta, s.digits)
        }
    };
    if meta.count > oracle::MAX_COUNT {
        return usage(format!("verify is limited to n ≤ {}", oracle::MAX_COUNT));
    }
    let expected =
        oracle::digits(&meta.kind, meta.count).map_err(|e| Failure::Ambiguous(e.to_string()))?;
    let got: Vec<u8> = got.iter().map(|d| d.get()).collect();
    let (first, mismatches) = oracle::compare(&expected, &got);
    println!(
        "{}: {} terms, {mismatches} mismatches",
        meta.kind, meta.count
    );
    match first {
        None => Ok(()),
        Some(i) => Err(Failure::Mismatch(format!(
            "first mismatch at n={i}: expected {}, got {}",
            expected
                .get(i as usize - 1)
                .map_or("-".into(), |d| d.to_string()),
            got.get(i as usize - 1)
                .map_or("-".into(), |d| d.to_string()),
        ))),
    }
}

fn delta_log(args: &DeltaLogArgs) -> Result<()> {
    let kind = args.seq.kind()?;
    let n = args.seq.count()?;
    let format = parse_format(&args.format)?;
    let end = args
        .from
        .checked_add(n)
        .ok_or_else(|| Failure::Usage("range overflows".into()))?;
    let u = stats::delta_log_profile(&kind, args.from..end)?;
    let report = Report {
        columns: vec!["n", "u"],
        rows: u
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![Cell::Int(args.from + i as u64), Cell::Sci(v)])
            .collect(),
    };
    let mut out = open_out(&args.out)?;
    emit_report(&report, format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Analyze(a) => analyze(cli, a),
        Command::Verify(a) => verify(a),
        Command::DeltaLog(a) => delta_log(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
