//! The five subcommands as library functions. Each writes JSON lines to
//! `out` and returns the process status; diagnostics go to the caller.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use anyhow::Result;
use earlymask_core::grammar::{
    detect_hrr_rules, eliminate_nullables, nullable_symbols, remove_useless_rules, TerminalSource,
};
use earlymask_core::{
    CiTokenCache, Config, Engine, EngineConfig, Grammar, Session, StepMask, TokenId, TokenMask, Vocabulary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Reject = 1,
    InputError = 2,
    InvalidPrefix = 3,
    DeadEnd = 4,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

fn line(out: &mut dyn Write, value: serde_json::Value) -> Result<()> {
    writeln!(out, "{}", value)?;
    Ok(())
}

pub fn validate(grammar: &Arc<Grammar>, input: &[u8], prune: bool, out: &mut dyn Write) -> Result<Status> {
    let mut engine = Engine::new(grammar.clone(), EngineConfig { prune })?;
    let mut live = Vec::with_capacity(input.len() + 1);
    live.push(engine.live_item_count());
    let mut rejected_at = None;
    for (i, &b) in input.iter().enumerate() {
        if !engine.accept_byte(b) {
            rejected_at = Some(i);
            break;
        }
        live.push(engine.live_item_count());
    }
    let accepted = rejected_at.is_none() && engine.is_accepting();
    line(
        out,
        json!({
            "accepted": accepted,
            "consumed": engine.consumed(),
            "rejected_at": rejected_at,
            "live_items": live,
        }),
    )?;
    Ok(if accepted { Status::Ok } else { Status::Reject })
}

pub fn mask(
    grammar: &Arc<Grammar>,
    vocab: &Arc<Vocabulary>,
    prefix: &[u8],
    config: Config,
    out: &mut dyn Write,
) -> Result<Status> {
    let mut session = Session::new(grammar.clone(), vocab.clone(), config)?;
    if let Err(offset) = session.accept_bytes(prefix) {
        eprintln!("prefix rejected at byte {}", offset);
        return Ok(Status::InvalidPrefix);
    }
    let m = session.mask();
    line(
        out,
        json!({
            "prefix_len": prefix.len(),
            "mask": m.mask.to_hex(),
            "allowed": m.mask.count(),
            "eos": m.mask.get(vocab.eos()),
            "fingerprint": m.fingerprint.to_string(),
            "live_items": session.engine().live_item_count(),
        }),
    )?;
    Ok(Status::Ok)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub fingerprint: String,
    pub allowed: usize,
    pub token: TokenId,
    pub cache_hit: bool,
    pub live_items: usize,
    pub trials: u32,
    pub mask_digest: u64,
}

impl StepRecord {
    fn to_json(&self) -> serde_json::Value {
        json!({
            "step": self.step,
            "fingerprint": self.fingerprint,
            "allowed": self.allowed,
            "token": self.token,
            "cache_hit": self.cache_hit,
            "live_items": self.live_items,
            "trials": self.trials,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeEnd {
    Eos,
    DeadEnd,
    MaxSteps,
}

impl DecodeEnd {
    pub fn name(self) -> &'static str {
        match self {
            DecodeEnd::Eos => "eos",
            DecodeEnd::DeadEnd => "dead_end",
            DecodeEnd::MaxSteps => "max_steps",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecodeRun {
    pub steps: Vec<StepRecord>,
    pub output: Vec<u8>,
    pub end: DecodeEnd,
    /// The engine accepted the output as a complete sentence.
    pub accepting: bool,
}

impl DecodeRun {
    pub fn status(&self) -> Status {
        match self.end {
            DecodeEnd::Eos => Status::Ok,
            DecodeEnd::DeadEnd => Status::DeadEnd,
            DecodeEnd::MaxSteps if self.accepting => Status::Ok,
            DecodeEnd::MaxSteps => Status::DeadEnd,
        }
    }
}

pub const EOS_PROBABILITY: f64 = 0.1;

/// EOS with probability [`EOS_PROBABILITY`] when legal, otherwise uniform
/// over the other allowed tokens.
pub fn sample(mask: &TokenMask, eos: TokenId, rng: &mut ChaCha8Rng) -> Option<TokenId> {
    let eos_ok = mask.get(eos);
    let others: Vec<TokenId> = mask.ones().filter(|&t| t != eos).collect();
    if eos_ok && (others.is_empty() || rng.gen_bool(EOS_PROBABILITY)) {
        return Some(eos);
    }
    if others.is_empty() {
        return None;
    }
    Some(others[rng.gen_range(0..others.len())])
}

fn digest(mask: &TokenMask) -> u64 {
    let mut h = DefaultHasher::new();
    mask.hash(&mut h);
    h.finish()
}

/// Samples from `session` until EOS, a dead end, or `max_steps` masks.
pub fn run_decode(session: &mut Session, seed: u64, max_steps: usize) -> DecodeRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eos = session.vocab().eos();
    let mut steps = Vec::new();
    let mut output = Vec::new();
    let mut end = DecodeEnd::MaxSteps;
    for step in 0..max_steps {
        let StepMask {
            mask,
            stats,
            fingerprint,
            cache_hit,
        } = session.mask();
        let Some(token) = sample(&mask, eos, &mut rng) else {
            end = DecodeEnd::DeadEnd;
            break;
        };
        steps.push(StepRecord {
            step,
            fingerprint: fingerprint.to_string(),
            allowed: mask.count(),
            token,
            cache_hit,
            live_items: session.engine().live_item_count(),
            trials: stats.trials,
            mask_digest: digest(&mask),
        });
        let accepted = session.accept_token(token);
        debug_assert_eq!(accepted, earlymask_core::TokenOutcome::Accepted);
        if token == eos {
            end = DecodeEnd::Eos;
            break;
        }
        output.extend_from_slice(session.vocab().bytes(token));
    }
    let accepting = session.engine().is_finished() || session.engine().is_accepting();
    DecodeRun {
        steps,
        output,
        end,
        accepting,
    }
}

/// Re-checks a decoded sequence on a fresh unpruned engine.
pub fn revalidate(grammar: &Arc<Grammar>, run: &DecodeRun) -> bool {
    let mut e = Engine::new(grammar.clone(), EngineConfig { prune: false }).expect("grammar was accepted before");
    e.accept_bytes(&run.output).is_ok() && (run.end != DecodeEnd::Eos || e.is_accepting())
}

pub fn decode(
    grammar: &Arc<Grammar>,
    vocab: &Arc<Vocabulary>,
    seed: u64,
    max_steps: usize,
    config: Config,
    out: &mut dyn Write,
) -> Result<Status> {
    let mut session = Session::new(grammar.clone(), vocab.clone(), config)?;
    let run = run_decode(&mut session, seed, max_steps);
    for s in &run.steps {
        line(out, s.to_json())?;
    }
    line(
        out,
        json!({
            "end": run.end.name(),
            "steps": run.steps.len(),
            "output": String::from_utf8_lossy(&run.output),
            "accepting": run.accepting,
            "valid": revalidate(grammar, &run),
        }),
    )?;
    if run.end == DecodeEnd::DeadEnd {
        eprintln!("dead end after {} steps", run.steps.len());
    }
    Ok(run.status())
}

/// Named configurations compared by `bench` when no ablation flag is given.
pub fn ablation_ladder() -> Vec<(&'static str, Config)> {
    let full = Config::default();
    vec![
        ("full", full),
        ("no-prune", Config { prune: false, ..full }),
        (
            "no-prune+no-ci-cache",
            Config {
                prune: false,
                ci_cache: false,
                ..full
            },
        ),
        ("baseline", Config::baseline()),
    ]
}

pub fn config_name(c: Config) -> String {
    let mut parts = Vec::new();
    for (on, name) in [
        (c.prune, "no-prune"),
        (c.ci_cache, "no-ci-cache"),
        (c.trie, "no-trie"),
        (c.state_cache, "no-state-cache"),
    ] {
        if !on {
            parts.push(name);
        }
    }
    if parts.is_empty() {
        "full".into()
    } else {
        parts.join("+")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub name: String,
    pub config: Config,
    pub masks: usize,
    pub seconds: f64,
    pub mean_trials: f64,
    pub mean_live_items: f64,
    pub max_live_items: usize,
    pub cache_hits: u64,
    pub cache_misses: u64,
    /// Per-repeat digests of every mask, for the cross-config self-check.
    pub digests: Vec<Vec<u64>>,
}

impl BenchRow {
    pub fn masks_per_sec(&self) -> f64 {
        self.masks as f64 / self.seconds.max(1e-9)
    }

    pub fn hit_rate(&self) -> f64 {
        let n = self.cache_hits + self.cache_misses;
        if n == 0 {
            0.0
        } else {
            self.cache_hits as f64 / n as f64
        }
    }

    pub fn to_json(&self, repeats: usize) -> serde_json::Value {
        json!({
            "config": self.name,
            "prune": self.config.prune,
            "ci_cache": self.config.ci_cache,
            "trie": self.config.trie,
            "state_cache": self.config.state_cache,
            "repeats": repeats,
            "masks": self.masks,
            "seconds": self.seconds,
            "masks_per_sec": self.masks_per_sec(),
            "mean_trials": self.mean_trials,
            "mean_live_items": self.mean_live_items,
            "max_live_items": self.max_live_items,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "hit_rate": self.hit_rate(),
        })
    }
}

/// `repeats` seeded decodes (seeds `seed..seed + repeats`) per
/// configuration. One session per configuration, reset between repeats, so
/// the state cache carries over. The CI cache is built before timing.
pub fn bench_configs(
    grammar: &Arc<Grammar>,
    vocab: &Arc<Vocabulary>,
    configs: &[(String, Config)],
    repeats: usize,
    seed: u64,
    max_steps: usize,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for (name, config) in configs {
        let ci = Arc::new(if config.ci_cache {
            CiTokenCache::build(grammar, vocab)
        } else {
            CiTokenCache::new(grammar)
        });
        let mut session = Session::with_ci_cache(grammar.clone(), vocab.clone(), ci, *config)?;
        let mut seconds = 0.0;
        let mut runs = Vec::with_capacity(repeats);
        for r in 0..repeats {
            session.reset();
            let t = Instant::now();
            let run = run_decode(&mut session, seed.wrapping_add(r as u64), max_steps);
            seconds += t.elapsed().as_secs_f64();
            runs.push(run);
        }
        let steps: Vec<&StepRecord> = runs.iter().flat_map(|r| &r.steps).collect();
        let masks = steps.len();
        let mean = |f: &dyn Fn(&StepRecord) -> f64| {
            if masks == 0 {
                0.0
            } else {
                steps.iter().map(|s| f(s)).sum::<f64>() / masks as f64
            }
        };
        rows.push(BenchRow {
            name: name.clone(),
            config: *config,
            masks,
            seconds,
            mean_trials: mean(&|s| s.trials as f64),
            mean_live_items: mean(&|s| s.live_items as f64),
            max_live_items: steps.iter().map(|s| s.live_items).max().unwrap_or(0),
            cache_hits: session.mask_cache().hits(),
            cache_misses: session.mask_cache().misses(),
            digests: runs.iter().map(|r| r.steps.iter().map(|s| s.mask_digest).collect()).collect(),
        });
    }
    Ok(rows)
}

pub fn bench(
    grammar: &Arc<Grammar>,
    vocab: &Arc<Vocabulary>,
    configs: &[(String, Config)],
    repeats: usize,
    seed: u64,
    max_steps: usize,
    out: &mut dyn Write,
) -> Result<Status> {
    let rows = bench_configs(grammar, vocab, configs, repeats, seed, max_steps)?;
    for row in &rows {
        line(out, row.to_json(repeats))?;
    }
    let consistent = rows.windows(2).all(|w| w[0].digests == w[1].digests);
    line(
        out,
        json!({
            "self_check": if consistent { "ok" } else { "mismatch" },
            "configs": rows.len(),
            "vocab_size": vocab.len(),
        }),
    )?;
    if !consistent {
        eprintln!("masks differ between configurations");
        return Ok(Status::Reject);
    }
    Ok(Status::Ok)
}

fn stage(name: &str, g: &Grammar) -> serde_json::Value {
    json!({
        "stage": name,
        "nonterminals": g.nonterminal_count(),
        "terminals": g.terminals().len(),
        "productions": g.productions().len(),
    })
}

pub fn analyze(raw: &Grammar, out: &mut dyn Write) -> Result<Status> {
    line(out, stage("parsed", raw))?;
    let useful = remove_useless_rules(raw)?;
    let mut s = stage("remove_useless", &useful);
    s["removed"] = json!(raw.productions().len() - useful.productions().len());
    line(out, s)?;

    let (nt_null, t_null) = nullable_symbols(&useful);
    let nullable: Vec<String> = nt_null
        .iter()
        .enumerate()
        .filter(|&(_, &n)| n)
        .map(|(i, _)| useful.nonterminal_name(i as u32).to_string())
        .chain(
            t_null
                .iter()
                .enumerate()
                .filter(|&(_, &n)| n)
                .map(|(i, _)| match &useful.terminal(i as u32).source {
                    TerminalSource::Literal(b) => format!("{:?}", String::from_utf8_lossy(b)),
                    TerminalSource::Pattern(p) => format!("#{:?}", p),
                }),
        )
        .collect();
    line(out, json!({ "nullable": nullable }))?;

    let no_null = eliminate_nullables(&useful);
    let mut s = stage("eliminate_nullables", &no_null);
    s["rules"] = json!((0..no_null.productions().len())
        .map(|p| no_null.display_production(p as u32).to_string())
        .collect::<Vec<_>>());
    line(out, s)?;

    let prepared = remove_useless_rules(&no_null)?;
    let mut s = stage("remove_useless", &prepared);
    s["removed"] = json!(no_null.productions().len() - prepared.productions().len());
    line(out, s)?;

    let hrr: Vec<serde_json::Value> = detect_hrr_rules(&prepared)
        .into_iter()
        .map(|(p, form)| json!({ "rule": prepared.display_production(p).to_string(), "form": form.tag() }))
        .collect();
    line(out, json!({ "hrr": hrr }))?;
    Ok(Status::Ok)
}
