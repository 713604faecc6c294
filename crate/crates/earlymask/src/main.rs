use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use earlymask::commands::{self, ablation_ladder, config_name};
use earlymask::{compile_grammar, load_vocab, parse_grammar_text, read_grammar, synthetic_vocab, Status, SynthParams};
use earlymask_core::{Config, Grammar, Vocabulary};

#[derive(Parser)]
#[command(name = "earlymask", version, about = "Grammar-constrained token masks over a byte-level Earley engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check whether an input is a sentence of the grammar.
    Validate {
        #[command(flatten)]
        grammar: GrammarArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        no_prune: bool,
    },
    /// Print the token mask after a prefix.
    Mask {
        #[command(flatten)]
        grammar: GrammarArgs,
        #[command(flatten)]
        vocab: VocabArgs,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        ablation: Ablation,
    },
    /// Sample a sequence using the masks.
    Decode {
        #[command(flatten)]
        grammar: GrammarArgs,
        #[command(flatten)]
        vocab: VocabArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 256)]
        max_steps: usize,
        #[command(flatten)]
        ablation: Ablation,
    },
    /// Time repeated decodes under optimization configurations. Without
    /// ablation flags the full ladder is run.
    Bench {
        #[command(flatten)]
        grammar: GrammarArgs,
        #[command(flatten)]
        vocab: VocabArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 128)]
        max_steps: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[command(flatten)]
        ablation: Ablation,
    },
    /// Report what each grammar transformation does.
    Analyze {
        #[command(flatten)]
        grammar: GrammarArgs,
    },
}

#[derive(Args)]
struct GrammarArgs {
    #[arg(long)]
    grammar: PathBuf,
    /// Start nonterminal.
    #[arg(long)]
    start: Option<String>,
}

#[derive(Args)]
struct VocabArgs {
    /// Vocabulary JSON. Without it a synthetic vocabulary is cut from
    /// random sentences of the grammar.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    vocab_size: usize,
    #[arg(long, default_value_t = 0)]
    vocab_seed: u64,
}

#[derive(Args)]
struct InputArgs {
    /// Input bytes, given as a string.
    #[arg(long, alias = "prefix", conflicts_with = "input_file")]
    input: Option<String>,
    #[arg(long, alias = "prefix-file")]
    input_file: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct Ablation {
    #[arg(long)]
    no_prune: bool,
    #[arg(long)]
    no_ci_cache: bool,
    #[arg(long)]
    no_trie: bool,
    #[arg(long)]
    no_state_cache: bool,
}

impl Ablation {
    fn any(self) -> bool {
        self.no_prune || self.no_ci_cache || self.no_trie || self.no_state_cache
    }

    fn config(self) -> Config {
        Config {
            prune: !self.no_prune,
            ci_cache: !self.no_ci_cache,
            trie: !self.no_trie,
            state_cache: !self.no_state_cache,
            ..Config::default()
        }
    }
}

impl GrammarArgs {
    fn load(&self) -> Result<Arc<Grammar>> {
        let text = read_grammar(&self.grammar)?;
        compile_grammar(&text, self.start.as_deref()).with_context(|| format!("in {}", self.grammar.display()))
    }
}

impl VocabArgs {
    fn load(&self, g: &Grammar) -> Result<Arc<Vocabulary>> {
        if let Some(path) = &self.vocab {
            return Ok(Arc::new(load_vocab(path)?));
        }
        if self.vocab_size < 2 {
            bail!("--vocab-size must be at least 2");
        }
        Ok(Arc::new(synthetic_vocab(
            g,
            SynthParams {
                size: self.vocab_size,
                seed: self.vocab_seed,
                ..SynthParams::default()
            },
        )))
    }
}

impl InputArgs {
    fn bytes(&self) -> Result<Vec<u8>> {
        match (&self.input, &self.input_file) {
            (Some(s), _) => Ok(s.as_bytes().to_vec()),
            (None, Some(p)) => std::fs::read(p).with_context(|| format!("reading {}", p.display())),
            (None, None) => Ok(Vec::new()),
        }
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<Status> {
    match cli.command {
        Command::Validate { grammar, input, no_prune } => {
            let g = grammar.load()?;
            commands::validate(&g, &input.bytes()?, !no_prune, out)
        }
        Command::Mask {
            grammar,
            vocab,
            input,
            ablation,
        } => {
            let g = grammar.load()?;
            let v = vocab.load(&g)?;
            commands::mask(&g, &v, &input.bytes()?, ablation.config(), out)
        }
        Command::Decode {
            grammar,
            vocab,
            seed,
            max_steps,
            ablation,
        } => {
            let g = grammar.load()?;
            let v = vocab.load(&g)?;
            commands::decode(&g, &v, seed, max_steps, ablation.config(), out)
        }
        Command::Bench {
            grammar,
            vocab,
            seed,
            max_steps,
            repeats,
            ablation,
        } => {
            let g = grammar.load()?;
            let v = vocab.load(&g)?;
            let configs: Vec<(String, Config)> = if ablation.any() {
                vec![(config_name(ablation.config()), ablation.config())]
            } else {
                ablation_ladder().into_iter().map(|(n, c)| (n.to_string(), c)).collect()
            };
            commands::bench(&g, &v, &configs, repeats, seed, max_steps, out)
        }
        Command::Analyze { grammar } => {
            let text = read_grammar(&grammar.grammar)?;
            let raw = parse_grammar_text(&text, grammar.start.as_deref())
                .with_context(|| format!("in {}", grammar.grammar.display()))?;
            commands::analyze(&raw, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let status = match run(cli, &mut out) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {:#}", e);
            Status::InputError
        }
    };
    let _ = out.flush();
    ExitCode::from(status.code() as u8)
}
