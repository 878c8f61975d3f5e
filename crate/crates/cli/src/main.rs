use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use ocrsynth::align::{align, DelimiterSet};
use ocrsynth::corrector::{builtin_evaluator, corrector_space, train_noisy_channel, CorrectorHyper, NoisyChannelModel};
use ocrsynth::error_model::{
    classify_errors, extract_confusions, inject_lines, ErrorProfile, ErrorTypeHistogram, InjectionStats, NoiseConfig,
};
use ocrsynth::metrics::evaluate_corrector;
use ocrsynth::optimizer::external::ExternalEvaluator;
use ocrsynth::optimizer::{
    greedy_search_with, read_trial_log, recurrent_default_space, write_trial_record, Config, HyperParamSpace,
    SearchOptions,
};
use ocrsynth::text::{
    load_parallel_corpus, load_tsv_corpus, normalize_line, plain_lines, split_train_valid, CharCounts, Corpus,
};

const DEFAULT_SEED: u64 = 42;
const BLOCK: usize = 4096;

/// OCR error profiling, synthetic noise injection, correction metrics and
/// greedy hyperparameter search.
#[derive(Parser)]
#[command(name = "ocrsynth", version)]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Leave timestamps and trial durations out of written reports.
    #[arg(long, global = true)]
    no_timestamp: bool,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a confusion profile and error-type histogram from a parallel corpus.
    Profile(ProfileArgs),
    /// Generate a synthetic parallel corpus from clean text.
    Inject(InjectArgs),
    /// Score corrected text against gold and the original OCR output.
    Evaluate(EvaluateArgs),
    /// Train the noisy-channel corrector.
    Train(TrainArgs),
    /// Correct a file line by line with a trained model.
    Correct(CorrectArgs),
    /// Greedy hyperparameter search.
    Optimize(OptimizeArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// OCR side of a parallel corpus, one sentence per line.
    #[arg(long, requires = "gold", conflicts_with = "tsv")]
    noisy: Option<PathBuf>,
    /// Gold side of a parallel corpus.
    #[arg(long, requires = "noisy")]
    gold: Option<PathBuf>,
    /// Parallel corpus as one `noisy<TAB>gold` file.
    #[arg(long, required_unless_present = "noisy")]
    tsv: Option<PathBuf>,
}

impl CorpusArgs {
    fn paths(&self) -> Vec<&Path> {
        [&self.noisy, &self.gold, &self.tsv]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path)
            .collect()
    }

    fn load(&self) -> Result<Corpus, Failure> {
        Ok(match (&self.noisy, &self.gold, &self.tsv) {
            (Some(n), Some(g), None) => load_parallel_corpus(n, g)?,
            (None, None, Some(t)) => load_tsv_corpus(t)?,
            _ => return Err(Failure::input("give either --noisy and --gold or --tsv")),
        })
    }
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Output directory for profile.tsv and error_types.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InjectArgs {
    /// Clean text, one sentence per line.
    #[arg(long)]
    input: PathBuf,
    /// Confusion profile to replay (omit for generic noise only).
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Gate probability of each corruption step, 0 < NR < 1.
    #[arg(long)]
    noise_ratio: f64,
    /// Upper bound on adjacent swaps per swap event.
    #[arg(long, default_value_t = 2)]
    max_swaps: usize,
    /// Reference text for character frequencies (defaults to the input).
    #[arg(long)]
    frequencies: Option<PathBuf>,
    /// Output directory for noisy.txt and gold.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    /// Uncorrected OCR output.
    #[arg(long)]
    ocred: PathBuf,
    /// Corrector output.
    #[arg(long)]
    fixed: PathBuf,
    /// Characters separating words.
    #[arg(long)]
    delimiters: Option<String>,
    /// Row label in the report.
    #[arg(long, default_value = "corrector")]
    label: String,
    /// Write the TSV report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HyperArgs {
    #[arg(long, default_value_t = 3)]
    ngram_order: usize,
    #[arg(long, default_value_t = 1.0)]
    channel_weight: f64,
    #[arg(long, default_value_t = 4)]
    beam_width: usize,
    #[arg(long, default_value_t = 2)]
    max_edits: usize,
    #[arg(long, default_value_t = 0.1)]
    smoothing_k: f64,
}

impl HyperArgs {
    fn hyper(&self) -> CorrectorHyper {
        CorrectorHyper {
            ngram_order: self.ngram_order,
            channel_weight: self.channel_weight,
            beam_width: self.beam_width,
            max_edits_per_word: self.max_edits,
            smoothing_k: self.smoothing_k,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Hold out this share of the corpus and report scores on it.
    #[arg(long)]
    valid_fraction: Option<f64>,
    /// Model directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    max_edits: Option<usize>,
    #[arg(long)]
    channel_weight: Option<f64>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// `corrector`, `recurrent` or a space file.
    #[arg(long, default_value = "corrector")]
    space: String,
    /// `builtin` or a command speaking the JSON evaluator protocol.
    #[arg(long, default_value = "builtin")]
    evaluator: String,
    /// Training corpus, `noisy<TAB>gold` lines.
    #[arg(long)]
    train: PathBuf,
    /// Validation corpus, `noisy<TAB>gold` lines.
    #[arg(long)]
    valid: PathBuf,
    /// Output directory for trials.jsonl and best.txt.
    #[arg(long)]
    out: PathBuf,
    /// Reuse trials already logged in the output directory.
    #[arg(long)]
    resume: bool,
    /// Evaluate repeated configurations again.
    #[arg(long)]
    no_cache: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn write(path: &Path, e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<ocrsynth::Error> for Failure {
    fn from(e: ocrsynth::Error) -> Self {
        use ocrsynth::Error::*;
        let code = match e {
            Io { .. } | Structural(_) | Argument(_) => 2,
            Evaluation(_) => 1,
            Protocol(_) => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn require_files(paths: &[&Path]) -> CmdResult {
    for p in paths {
        if !p.is_file() {
            return Err(Failure::input(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::write(dir, e))
}

fn write_file(path: &Path, body: &str) -> CmdResult {
    fs::write(path, body).map_err(|e| Failure::write(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::write(path, e))
}

fn stamp(no_timestamp: bool) -> String {
    if no_timestamp {
        return String::new();
    }
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated at unix time {secs}\n")
}

fn read_lines(path: &Path) -> Result<Vec<String>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(normalize_line).collect())
}

fn shown(c: char) -> String {
    match c {
        ' ' => "<space>".to_string(),
        c => c.to_string(),
    }
}

fn profile(args: &ProfileArgs, no_timestamp: bool) -> CmdResult {
    require_files(&args.corpus.paths())?;
    let corpus = args.corpus.load()?;
    let profile = extract_confusions(&corpus)?;
    let mut histogram = ErrorTypeHistogram::default();
    for pair in &corpus {
        histogram.merge(&classify_errors(&align(&pair.gold, &pair.noisy)));
    }
    if profile.is_empty() {
        log::warn!("no character substitutions found; writing an empty profile");
    }
    create_dir(&args.out)?;
    let profile_path = args.out.join("profile.tsv");
    profile.save(&profile_path)?;
    write_file(
        &args.out.join("error_types.tsv"),
        &format!("{}{}", stamp(no_timestamp), histogram.to_tsv()),
    )?;

    println!("{:<10} {:<12} {:>11}", "Error char", "Correct char", "Probability");
    for e in profile.entries().iter().take(8) {
        println!(
            "{:<10} {:<12} {:>11.4}",
            shown(e.error_char),
            shown(e.correct_char),
            e.probability
        );
    }
    println!(
        "{} confusions from {} substitutions in {} pairs -> {}",
        profile.len(),
        profile.total_substitutions_observed,
        corpus.len(),
        profile_path.display()
    );
    Ok(())
}

fn inject(args: &InjectArgs, seed: u64) -> CmdResult {
    let nr = args.noise_ratio;
    if !(nr > 0.0 && nr < 1.0) {
        return Err(Failure::input(format!("noise ratio {nr} violates 0 < NR < 1")));
    }
    let freq_path = args.frequencies.as_deref().unwrap_or(&args.input);
    let mut inputs = vec![args.input.as_path(), freq_path];
    inputs.extend(args.profile.as_deref());
    require_files(&inputs)?;
    let profile = args.profile.as_deref().map(ErrorProfile::load).transpose()?;

    // first pass: character frequencies
    let mut counts = CharCounts::default();
    for line in plain_lines(freq_path)? {
        counts.add_line(&line?);
    }
    let table = counts.into_table()?;
    let mut config = NoiseConfig::new(nr, table)?
        .with_seed(seed)
        .with_max_swaps(args.max_swaps);
    if let Some(p) = profile {
        config = config.with_profile(p);
    }
    config.validate()?;

    create_dir(&args.out)?;
    let (noisy_path, gold_path) = (args.out.join("noisy.txt"), args.out.join("gold.txt"));
    let mut noisy_out = create(&noisy_path)?;
    let mut gold_out = create(&gold_path)?;
    let mut stats = InjectionStats::default();
    let mut block: Vec<String> = Vec::with_capacity(BLOCK);
    let mut index = 0u64;
    let mut flush = |block: &mut Vec<String>, index: &mut u64| -> CmdResult {
        for (gold, line) in block.iter().zip(inject_lines(block, *index, &config)?) {
            stats.record(&line.events);
            writeln!(noisy_out, "{}", line.text).map_err(|e| Failure::write(&noisy_path, e))?;
            writeln!(gold_out, "{gold}").map_err(|e| Failure::write(&gold_path, e))?;
        }
        *index += block.len() as u64;
        block.clear();
        Ok(())
    };
    for line in plain_lines(&args.input)? {
        block.push(line?);
        if block.len() == BLOCK {
            flush(&mut block, &mut index)?;
        }
    }
    flush(&mut block, &mut index)?;
    if index == 0 {
        return Err(Failure::input(format!(
            "{}: corpus has no non-empty lines",
            args.input.display()
        )));
    }
    noisy_out.flush().map_err(|e| Failure::write(&noisy_path, e))?;
    gold_out.flush().map_err(|e| Failure::write(&gold_path, e))?;

    println!("lines\t{}", stats.lines);
    println!("deletion_rate\t{:.4}", stats.deletion_rate());
    println!("insertion_rate\t{:.4}", stats.insertion_rate());
    println!("swap_rate\t{:.4}", stats.swap_rate());
    println!("replacements_per_line\t{:.4}", stats.replacement_rate());
    Ok(())
}

fn evaluate(args: &EvaluateArgs, no_timestamp: bool) -> CmdResult {
    require_files(&[&args.gold, &args.ocred, &args.fixed])?;
    let delimiters = match &args.delimiters {
        Some(d) => DelimiterSet::parse(d)?,
        None => DelimiterSet::default(),
    };
    let gold = read_lines(&args.gold)?;
    let ocred = read_lines(&args.ocred)?;
    let fixed = read_lines(&args.fixed)?;
    if gold.len() != ocred.len() || gold.len() != fixed.len() {
        return Err(Failure::input(format!(
            "line count mismatch: gold {}, ocred {}, fixed {}",
            gold.len(),
            ocred.len(),
            fixed.len()
        )));
    }
    let eval = evaluate_corrector(&gold, &ocred, &fixed, &delimiters)?;
    print!("{}", eval.to_table(&args.label));
    let tsv = eval.to_tsv(&args.label);
    match &args.out {
        Some(path) => write_file(path, &format!("{}{tsv}", stamp(no_timestamp)))?,
        None => print!("\n{tsv}"),
    }
    Ok(())
}

fn train(args: &TrainArgs, seed: u64) -> CmdResult {
    require_files(&args.corpus.paths())?;
    let hyper = args.hyper.hyper();
    hyper.validate()?;
    let corpus = args.corpus.load()?;
    let (train, valid) = match args.valid_fraction {
        Some(f) => {
            let (t, v) = split_train_valid(&corpus, 1.0 - f, seed)?;
            (t, Some(v))
        }
        None => (corpus, None),
    };
    let model = train_noisy_channel(&train, hyper)?;
    model.save(&args.out)?;
    println!(
        "trained on {} pairs: {} words, {} confusions -> {}",
        train.len(),
        model.vocabulary().len(),
        model.profile().len(),
        args.out.display()
    );
    if let Some(valid) = valid.filter(|v| !v.is_empty()) {
        let noisy = valid.noisy_lines();
        let fixed = model.correct_lines(&noisy);
        let fixed: Vec<&str> = fixed.iter().map(String::as_str).collect();
        let gold = valid.gold_lines();
        let eval = evaluate_corrector(&gold, &noisy, &fixed, &DelimiterSet::default())?;
        let exact = ocrsynth::metrics::validation_accuracy(&gold, &fixed)?;
        println!("validation lines\t{}", valid.len());
        println!("Acc_Char\t{:.2}", eval.acc_char);
        println!("validation accuracy\t{exact:.4}");
        print!("{}", eval.to_table("noisy-channel"));
    }
    Ok(())
}

fn correct(args: &CorrectArgs) -> CmdResult {
    require_files(&[&args.input])?;
    if !args.model.is_dir() {
        return Err(Failure::input(format!(
            "{}: no such model directory",
            args.model.display()
        )));
    }
    let model = NoisyChannelModel::load(&args.model)?;
    let mut hyper = *model.hyper();
    hyper.beam_width = args.beam_width.unwrap_or(hyper.beam_width);
    hyper.max_edits_per_word = args.max_edits.unwrap_or(hyper.max_edits_per_word);
    hyper.channel_weight = args.channel_weight.unwrap_or(hyper.channel_weight);
    let model = model.with_decoding(hyper)?;

    let input = File::open(&args.input).map_err(|e| Failure::input(format!("{}: {e}", args.input.display())))?;
    let mut out = create(&args.out)?;
    let mut block = Vec::with_capacity(BLOCK);
    let mut total = 0usize;
    let mut lines = BufReader::new(input).lines();
    loop {
        let next = lines.next();
        let done = next.is_none();
        if let Some(line) = next {
            let line = line.map_err(|e| Failure::input(format!("{}: {e}", args.input.display())))?;
            block.push(normalize_line(&line));
        }
        if block.len() == BLOCK || (done && !block.is_empty()) {
            for fixed in model.correct_lines(&block) {
                writeln!(out, "{fixed}").map_err(|e| Failure::write(&args.out, e))?;
            }
            total += block.len();
            block.clear();
        }
        if done {
            break;
        }
    }
    out.flush().map_err(|e| Failure::write(&args.out, e))?;
    println!("corrected {total} lines -> {}", args.out.display());
    Ok(())
}

fn load_space(spec: &str) -> Result<HyperParamSpace, Failure> {
    match spec {
        "corrector" => Ok(corrector_space()),
        "recurrent" => Ok(recurrent_default_space()),
        path => {
            require_files(&[Path::new(path)])?;
            Ok(HyperParamSpace::load(Path::new(path))?)
        }
    }
}

fn optimize(args: &OptimizeArgs, no_timestamp: bool, parallel: bool) -> CmdResult {
    require_files(&[&args.train, &args.valid])?;
    let space = load_space(&args.space)?;
    create_dir(&args.out)?;
    let log_path = args.out.join("trials.jsonl");
    let prior = if args.resume {
        read_trial_log(&log_path)?
    } else {
        Vec::new()
    };
    let mut log = OpenOptions::new()
        .create(true)
        .append(args.resume)
        .write(true)
        .truncate(!args.resume)
        .open(&log_path)
        .map(BufWriter::new)
        .map_err(|e| Failure::write(&log_path, e))?;
    let options = SearchOptions {
        cache: !args.no_cache,
        parallel,
    };
    let observer = |r: &ocrsynth::optimizer::TrialRecord| -> ocrsynth::Result<()> {
        let mut r = r.clone();
        if no_timestamp {
            r.duration = 0.0;
        }
        println!(
            "{}\t{}\t{}",
            r.stage,
            r.config,
            if r.failed() {
                "failed".to_string()
            } else {
                format!("{:.4}", r.score)
            }
        );
        write_trial_record(&mut log, &r)
            .and_then(|_| log.flush())
            .map_err(|e| ocrsynth::Error::Evaluation(format!("{}: {e}", log_path.display())))
    };

    let result = if args.evaluator == "builtin" {
        CorrectorHyper::from_config(&space.default_config())
            .map_err(|e| Failure::input(format!("builtin evaluator cannot use this space: {e}")))?;
        let train = load_tsv_corpus(&args.train)?;
        let valid = load_tsv_corpus(&args.valid)?;
        train.ensure_non_empty()?;
        valid.ensure_non_empty()?;
        greedy_search_with(&space, builtin_evaluator(&train, &valid), options, &prior, observer)?
    } else {
        let external = ExternalEvaluator::new(&args.evaluator, &args.train, &args.valid, &args.out.join("models"))?;
        greedy_search_with(&space, |c: &Config| external.evaluate(c), options, &prior, observer)?
    };

    let mut best = stamp(no_timestamp);
    best.push_str(&format!("# score {}\n", result.best_score));
    for (k, v) in result.best_config.iter() {
        best.push_str(&format!("{k} = {v}\n"));
    }
    write_file(&args.out.join("best.txt"), &best)?;

    let trials = result.trials.len();
    let grid = space.grid_size().map_or("overflow".to_string(), |g| g.to_string());
    println!("best\t{}\t{:.4}", result.best_config, result.best_score);
    println!(
        "greedy trials {trials} (bound {}), full grid {grid} configurations{}",
        space.value_count(),
        space
            .grid_size()
            .filter(|_| trials > 0)
            .map_or(String::new(), |g| format!(", {:.1}x fewer", g as f64 / trials as f64))
    );
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::input("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure {
                code: 1,
                message: e.to_string(),
            })?;
    }
    let parallel = cli.jobs != Some(1);
    match &cli.command {
        Command::Profile(a) => profile(a, cli.no_timestamp),
        Command::Inject(a) => inject(a, cli.seed),
        Command::Evaluate(a) => evaluate(a, cli.no_timestamp),
        Command::Train(a) => train(a, cli.seed),
        Command::Correct(a) => correct(a),
        Command::Optimize(a) => optimize(a, cli.no_timestamp, parallel),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(1),
    }
}
