use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sparse_unary::cycles::{circular_type_in, universal_sequence, CycleWord};
use sparse_unary::intervals::{ValueSystem, DEFAULT_LEVEL_CAP};
use sparse_unary::logic::{self, Builtin, ModelView, Vocabulary};
use sparse_unary::markov::{kvalue_distribution, limit_coefficients, ChainSpec, Numerics};
use sparse_unary::monoid::{MonoidTable, DEFAULT_CAP};
use sparse_unary::simulate::{
    self, default_delta, p_from_alpha, regime_stats, theorem1_cells, PSpec, ProbeConfig, SentenceSpec, SweepCell,
    SweepResult, TrialPlan, CATALOG_MAX_K,
};
use sparse_unary::word_types::{Alphabet, Word};

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "sparse-unary", version, about = "Ehrenfeucht types, interval values and zero-one checks for sparse unary predicates")]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON instead of text/CSV.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate and export a type monoid.
    Monoid {
        #[arg(long)]
        t: usize,
        /// Alphabet size; letters are named 0, 1, ... (binary by default).
        #[arg(long, default_value_t = 2)]
        letters: usize,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// List the interval values per level.
    Values {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_LEVEL_CAP)]
        cap: usize,
    },
    /// Split a word into intervals at a level.
    Decompose {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        level: usize,
        #[command(flatten)]
        word: WordInput,
    },
    /// Value distribution at a level: exact at `--p`, or limit coefficients.
    Chain {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        level: usize,
        #[arg(long, conflicts_with = "limit")]
        p: Option<f64>,
        #[arg(long)]
        limit: bool,
    },
    /// Universal sequence of the binary (or larger) type monoid.
    Universal {
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 2)]
        letters: usize,
    },
    /// Circular type of a cycle, as monoid elements of its rotations.
    CycleType {
        #[arg(long)]
        t: usize,
        #[command(flatten)]
        word: WordInput,
    },
    /// Evaluate a sentence; exit status 0 if true, 1 if false.
    Eval {
        #[command(flatten)]
        sentence: SentenceInput,
        #[command(flatten)]
        word: WordInput,
        /// Read the word as a cycle.
        #[arg(long)]
        circular: bool,
    },
    /// Empirical probability of one sentence.
    Simulate {
        #[command(flatten)]
        sentence: SentenceInput,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        prob: ProbInput,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Grid of empirical probabilities.
    Sweep {
        /// `theorem1`: the zero-one categories and knife edges for `k`.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 2)]
        t: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        /// Built-in names for a custom grid.
        #[arg(long, value_delimiter = ',')]
        sentences: Vec<String>,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        /// Also report interval statistics at this level for each `(n, alpha)`.
        #[arg(long)]
        interval_level: Option<usize>,
    },
    /// Right classes of the word and its reversal, niceness, and catalog
    /// agreement.
    Probe {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        prob: ProbInput,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_LEVEL_CAP)]
        cap: usize,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct WordInput {
    /// File holding a 0/1 word; whitespace is ignored.
    #[arg(long)]
    word: Option<PathBuf>,
    /// The word inline.
    #[arg(long)]
    bits: Option<String>,
}

impl WordInput {
    fn read(&self) -> AnyResult<Word> {
        let text = match (&self.word, &self.bits) {
            (Some(path), _) => fs::read_to_string(path)?,
            (_, Some(bits)) => bits.clone(),
            _ => unreachable!("clap group"),
        };
        let clean: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        Ok(Word::parse_bits(&clean)?)
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SentenceInput {
    #[arg(long)]
    sentence: Option<String>,
    #[arg(long)]
    builtin: Option<String>,
}

impl SentenceInput {
    fn spec(&self, circular: Option<bool>) -> AnyResult<SentenceSpec> {
        if let Some(name) = &self.builtin {
            return Ok(SentenceSpec::Builtin(Builtin::parse_name(name)?));
        }
        let text = self.sentence.as_deref().expect("clap group");
        let s = match circular {
            Some(true) => logic::parse_with(text, Vocabulary::Circular)?,
            _ => logic::parse(text)?,
        };
        Ok(SentenceSpec::Formula(s))
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ProbInput {
    #[arg(long)]
    p: Option<f64>,
    /// `p = n^-alpha`.
    #[arg(long)]
    alpha: Option<f64>,
}

impl ProbInput {
    fn resolve(&self, n: usize) -> (f64, Option<f64>) {
        match (self.p, self.alpha) {
            (Some(p), _) => (p, None),
            (_, Some(a)) => (p_from_alpha(n, a), Some(a)),
            _ => unreachable!("clap group"),
        }
    }
}

fn alphabet(letters: usize) -> AnyResult<Alphabet> {
    Ok(if letters == 2 { Alphabet::binary() } else { Alphabet::indexed("", letters)? })
}

fn run(cli: &Cli) -> AnyResult<(String, ExitCode)> {
    let ok = |s: String| Ok((s, ExitCode::SUCCESS));
    match &cli.cmd {
        Cmd::Monoid { t, letters, cap } => {
            let m = MonoidTable::generate(alphabet(*letters)?, *t, *cap)?;
            if cli.json {
                let elements: Vec<_> = (0..m.len())
                    .map(|x| json!({"rep": m.serialize(x), "persistent": m.is_persistent(x)}))
                    .collect();
                let table: Vec<Vec<usize>> =
                    (0..m.len()).map(|x| (0..m.len()).map(|y| m.compose(x, y)).collect()).collect();
                ok(json!({"depth": t, "elements": elements, "table": table}).to_string())
            } else {
                ok(m.export())
            }
        }
        Cmd::Values { t, k, cap } => {
            let vs = ValueSystem::build(*t, *k, *cap)?;
            let mut levels = Vec::new();
            for j in 1..=*k {
                let l = vs.level(j)?;
                let values: Vec<_> = l.values.iter().map(|v| json!({"name": v.name, "persistent": v.persistent})).collect();
                levels.push(json!({"level": j, "values": values}));
            }
            if cli.json {
                return ok(json!({"t": t, "s": vs.s(), "levels": levels}).to_string());
            }
            let mut out = format!("# interval values v1\nt {t}\ns {}\n", vs.s());
            for (j, (e, p, tr)) in vs.summary().into_iter().enumerate() {
                out += &format!("level {} values={e} persistent={p} transient={tr}\n", j + 1);
                for v in &vs.level(j + 1)?.values {
                    out += &format!("  {} {}\n", v.name, if v.persistent { "P" } else { "T" });
                }
            }
            ok(out)
        }
        Cmd::Decompose { t, level, word } => {
            let w = word.read()?;
            let vs = ValueSystem::build(*t, *level, DEFAULT_LEVEL_CAP)?;
            let d = vs.decompose(&w, *level)?;
            let names = simulate::value_names(&vs, &d)?;
            if cli.json {
                let ivs: Vec<_> = d
                    .intervals
                    .iter()
                    .zip(&names)
                    .map(|(iv, name)| json!({"start": iv.start, "end": iv.end, "value": name, "persistent": iv.persistent}))
                    .collect();
                return ok(json!({"level": level, "intervals": ivs, "tail": d.tail}).to_string());
            }
            let mut out = format!("# decomposition v1\nlevel {level}\nintervals {}\n", d.intervals.len());
            for (iv, name) in d.intervals.iter().zip(&names) {
                out += &format!("{} {} {} {}\n", iv.start, iv.end, name, if iv.persistent { "P" } else { "T" });
            }
            if let Some(s) = d.tail {
                out += &format!("tail {s} {}\n", w.len());
            }
            ok(out)
        }
        Cmd::Chain { t, level, p, limit } => {
            let vs = ValueSystem::build(*t, *level, DEFAULT_LEVEL_CAP)?;
            let dist = match (p, limit) {
                (Some(p), _) => kvalue_distribution(&vs, *p, *level)?,
                (None, true) => limit_coefficients(&vs, *level)?,
                _ => return Err("give --p or --limit".into()),
            };
            let values = &vs.level(*level)?.values;
            let mut absorption = None;
            if let (Some(p), true) = (p, *level > 1) {
                let chain = ChainSpec::at_level(&vs, level - 1, *p, Numerics::default())?;
                absorption = Some(chain.walk.absorption()?);
            }
            if cli.json {
                let rows: Vec<_> =
                    values.iter().zip(&dist.probabilities).map(|(v, q)| json!({"value": v.name, "weight": q})).collect();
                let abs = absorption.map(|a| json!({"classes": a.classes, "probabilities": a.probabilities}));
                return ok(json!({"level": level, "values": rows, "transient_mass": dist.transient_mass, "absorption": abs}).to_string());
            }
            let mut out = format!("# value distribution v1\nlevel {level}\ntransient_mass {:.12e}\n", dist.transient_mass);
            for (v, q) in values.iter().zip(&dist.probabilities) {
                out += &format!("{} {:.12e}\n", v.name, q);
            }
            if let Some(a) = absorption {
                for (class, q) in a.classes.iter().zip(&a.probabilities) {
                    out += &format!("absorb {class:?} {q:.12}\n");
                }
            }
            ok(out)
        }
        Cmd::Universal { t, letters } => {
            let m = MonoidTable::generate(alphabet(*letters)?, *t, DEFAULT_CAP)?;
            let r = universal_sequence(&m)?;
            let text = m.alphabet().format_word(&r);
            if cli.json {
                return ok(json!({"depth": t, "length": r.len(), "sequence": text}).to_string());
            }
            ok(format!("{text}\n"))
        }
        Cmd::CycleType { t, word } => {
            let w = word.read()?;
            let m = MonoidTable::generate(Alphabet::binary(), *t, DEFAULT_CAP)?;
            let set = circular_type_in(&m, &CycleWord::new(w)?);
            let reps: Vec<String> = set.iter().map(|&x| m.serialize(x)).collect();
            if cli.json {
                return ok(json!({"depth": t, "elements": set, "representatives": reps}).to_string());
            }
            ok(set.iter().zip(&reps).map(|(x, r)| format!("{x} {r}\n")).collect())
        }
        Cmd::Eval { sentence, word, circular } => {
            let w = word.read()?;
            let spec = sentence.spec(Some(*circular))?;
            let s = match &spec {
                SentenceSpec::Builtin(b) => b.sentence()?,
                SentenceSpec::Formula(s) => s.clone(),
            };
            let model = if *circular { ModelView::circular(&w) } else { ModelView::linear(&w) };
            let truth = logic::evaluate(&model, &s)?;
            let text = if cli.json { json!({"sentence": s.to_string(), "value": truth}).to_string() } else { truth.to_string() };
            Ok((text, if truth { ExitCode::SUCCESS } else { ExitCode::from(1) }))
        }
        Cmd::Simulate { sentence, n, prob, trials, seed } => {
            let spec = sentence.spec(None)?;
            let (p, alpha) = prob.resolve(*n);
            let mut plan = TrialPlan::new(*n, p, *trials, *seed, spec);
            plan.alpha = alpha;
            let row = simulate::empirical_probability(&plan)?;
            ok(rows_out(cli.json, &SweepResult { rows: vec![row] }))
        }
        Cmd::Sweep { preset, t, k, n, alpha, sentences, trials, seed, interval_level } => {
            let cells = match preset.as_deref() {
                Some("theorem1") => theorem1_cells(*k, n),
                Some(other) => return Err(format!("unknown preset `{other}`").into()),
                None => {
                    let names = if sentences.is_empty() { vec![format!("A_{k}")] } else { sentences.clone() };
                    let mut cells = Vec::new();
                    for &n in n {
                        for &a in alpha {
                            for name in &names {
                                cells.push(SweepCell {
                                    label: format!("alpha={a}"),
                                    n,
                                    p: PSpec::Alpha { alpha: a, c: 1.0 },
                                    sentence: SentenceSpec::Builtin(Builtin::parse_name(name)?),
                                });
                            }
                        }
                    }
                    cells
                }
            };
            let result = simulate::regime_sweep(&cells, *trials, *seed);
            let mut out = rows_out(cli.json, &result);
            if let Some(level) = interval_level {
                let vs = ValueSystem::build(*t, level + 1, DEFAULT_LEVEL_CAP)?;
                out += "\nn,p,level,trials,mean_intervals,n_ratio,transient_fraction,block_fraction\n";
                for &n in n {
                    for &a in alpha {
                        let st = regime_stats(&vs, *level, n, p_from_alpha(n, a), *trials, *seed)?;
                        out += &format!(
                            "{},{:.6e},{},{},{:.4},{:.4},{:.6},{:.6}\n",
                            st.n, st.p, st.level, st.trials, st.mean_intervals, st.n_ratio, st.transient_fraction, st.block_fraction
                        );
                    }
                }
            }
            ok(out)
        }
        Cmd::Probe { t, k, n, prob, trials, seed, pairs, delta, cap } => {
            let vs = simulate::probe_system(*t, *k, *cap)?;
            let (p, _) = prob.resolve(*n);
            let cfg = ProbeConfig {
                n: *n,
                p,
                level: *k,
                trials: *trials,
                seed: *seed,
                delta: delta.unwrap_or_else(|| default_delta(*t)),
                pairs: *pairs,
                catalog: logic::catalog(CATALOG_MAX_K),
            };
            let probe = simulate::theorem2_probe(&vs, &cfg)?;
            if cli.json {
                ok(serde_json::to_string(&probe)?)
            } else {
                ok(probe.report())
            }
        }
    }
}

fn rows_out(json: bool, result: &SweepResult) -> String {
    if json {
        serde_json::to_string(&result.rows).expect("rows serialize")
    } else {
        result.to_csv()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((text, code)) => {
            let written = match &cli.out {
                Some(path) => fs::write(path, &text),
                None => {
                    print!("{text}");
                    if !text.ends_with('\n') {
                        println!();
                    }
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
