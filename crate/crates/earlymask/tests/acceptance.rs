//! Acceptance checks, one PASS/FAIL line each. Run with
//! `cargo test -p earlymask --test acceptance`.

use std::collections::{BTreeSet, HashMap};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use earlymask::commands::ablation_ladder;
use earlymask::{compile_grammar, parse_grammar_text, synthetic_vocab, SynthParams};
use earlymask_core::grammar::{eliminate_nullables, prepare, remove_useless_rules, Symbol};
use earlymask_core::testing::{
    brute_force_mask, engine_language, enumerate_language, enumerate_language_over, random_grammar,
    RandomGrammarParams,
};
use earlymask_core::{
    compute_mask, fingerprint, CiTokenCache, Config, Engine, EngineConfig, Grammar, MaskConfig,
    RejectedPrefixTrie, Session, TokenOutcome, Vocabulary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const JSON: &str = include_str!("../../../grammars/json.grammar");
const SUM: &str = include_str!("../../../grammars/sum.grammar");
const PLUS: &str = include_str!("../../../grammars/plus.grammar");
const HRR: &str = include_str!("../../../grammars/hrr.grammar");
const NULLABLE: &str = include_str!("../../../grammars/nullable.grammar");

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, ok: impl Into<String>, fail: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(fail.into())
    }
}

fn engine(g: &Arc<Grammar>, prune: bool) -> Engine {
    Engine::new(g.clone(), EngineConfig { prune }).unwrap()
}

fn all_configs() -> Vec<Config> {
    (0..16u32)
        .map(|bits| Config {
            prune: bits & 1 != 0,
            ci_cache: bits & 2 != 0,
            trie: bits & 4 != 0,
            state_cache: bits & 8 != 0,
            ..Config::default()
        })
        .collect()
}

fn mask_oracle() -> Outcome {
    let mut details = Vec::new();
    for (name, text, size) in [("json", JSON, 512), ("sum", SUM, 256), ("plus", PLUS, 1024)] {
        let g = compile_grammar(text, None).unwrap();
        let vocab = Arc::new(synthetic_vocab(&g, SynthParams { size, seed: 1, ..Default::default() }));
        if vocab.len() != size {
            return Err(format!("{}: vocabulary has {} tokens", name, vocab.len()));
        }
        let ci = Arc::new(CiTokenCache::new(&g));
        let mut sessions: Vec<Session> = all_configs()
            .into_iter()
            .map(|c| Session::with_ci_cache(g.clone(), vocab.clone(), ci.clone(), c).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut steps = 0;
        while steps < 120 {
            let truth = brute_force_mask(sessions[0].engine(), &vocab);
            for s in sessions.iter_mut() {
                if s.mask().mask != truth {
                    return Err(format!("{}: step {} differs under {:?}", name, steps, s.config()));
                }
            }
            steps += 1;
            let allowed: Vec<u32> = truth.ones().collect();
            let eos_p = if allowed.contains(&vocab.eos()) && rng.gen_bool(0.1) { Some(vocab.eos()) } else { None };
            let others: Vec<u32> = allowed.iter().copied().filter(|&t| t != vocab.eos()).collect();
            let pick = eos_p.or_else(|| (!others.is_empty()).then(|| others[rng.gen_range(0..others.len())]));
            match pick {
                Some(t) if t != vocab.eos() => {
                    for s in sessions.iter_mut() {
                        if s.accept_token(t) != TokenOutcome::Accepted {
                            return Err(format!("{}: allowed token {} rejected", name, t));
                        }
                    }
                }
                _ => sessions.iter_mut().for_each(|s| s.reset()),
            }
        }
        details.push(format!("{} {} steps x16 configs, |V|={}", name, steps, vocab.len()));
    }
    Ok(details.join("; "))
}

fn recognition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut done = 0;
    let mut strings = 0;
    while done < 20 {
        let params = RandomGrammarParams {
            nonterminals: rng.gen_range(2..=5),
            terminals: rng.gen_range(1..=3),
            max_alternatives: 3,
            max_rhs: 3,
            alphabet: b"ab",
            epsilon: true,
            regex: true,
        };
        let text = random_grammar(&params, &mut |n| rng.gen_range(0..n));
        let Ok(g) = parse_grammar_text(&text, None).and_then(|g| Ok(prepare(&g)?)) else {
            continue;
        };
        let g = Arc::new(g);
        let expected = enumerate_language(&g, 10);
        let pruned = engine_language(&engine(&g, true), b"ab", 10);
        let plain = engine_language(&engine(&g, false), b"ab", 10);
        if pruned != expected || plain != expected {
            return Err(format!("languages differ on\n{}", text));
        }
        strings += expected.len();
        done += 1;
    }
    Ok(format!("20 grammars, {} accepted strings of length <= 10", strings))
}

fn worked_example() -> Outcome {
    let g = compile_grammar(r#"A ::= A B | B; B ::= "a";"#, Some("A")).unwrap();
    let mut e = engine(&g, true);
    e.accept_byte(b'a');
    let set1: BTreeSet<String> = e
        .set(1)
        .unwrap()
        .items()
        .iter()
        .map(|it| it.display(&g, 1).to_string())
        .collect();
    let expected: BTreeSet<String> = [
        r#"(B ::= "a" •, 0, 1)"#,
        r#"(A ::= B •, 0, 1)"#,
        r#"(A ::= A • B, 0, 1)"#,
        r#"(B ::= • "a", 1, 1)"#,
    ]
    .into_iter()
    .map(String::from)
    .collect();
    if set1 != expected {
        return Err(format!("set 1 = {:?}", set1));
    }
    e.accept_byte(b'a');
    let after: Vec<String> = e
        .set(1)
        .map(|s| s.items().iter().map(|it| it.display(&g, 1).to_string()).collect())
        .unwrap_or_default();
    check(
        !after.iter().any(|s| s == r#"(B ::= "a" •, 0, 1)"#),
        format!("set 1 holds 4 items, then {:?}", after),
        format!("completed B survived: {:?}", after),
    )
}

fn bounded_live_state() -> Outcome {
    let g = compile_grammar(JSON, Some("array")).unwrap();
    let live = |n: usize, prune: bool| {
        let mut e = engine(&g, prune);
        e.accept_byte(b'[');
        for i in 0..n {
            if i > 0 {
                e.accept_byte(b',');
            }
            e.accept_byte(b'7');
        }
        e.live_item_count()
    };
    let (p5, p50, u50) = (live(5, true), live(50, true), live(50, false));
    check(
        p5 == p50 && p50 < u50,
        format!("pruned 5:{} 50:{}, unpruned 50:{}", p5, p50, u50),
        format!("pruned 5:{} 50:{}, unpruned 50:{}", p5, p50, u50),
    )
}

fn fingerprint_convergence() -> Outcome {
    let g = compile_grammar(JSON, None).unwrap();
    let vocab = Arc::new(
        Vocabulary::new(vec![b"{\"ab\":1,".to_vec(), b"{\"xy\":2,".to_vec(), b"\"".to_vec(), vec![]], 3).unwrap(),
    );
    let mut s = Session::new(g.clone(), vocab, Config::default()).unwrap();
    s.accept_token(0);
    let a = s.mask();
    s.reset();
    s.accept_token(1);
    let b = s.mask();
    let fp = |prune: bool, input: &[u8]| {
        let mut e = engine(&g, prune);
        e.accept_bytes(input).unwrap();
        fingerprint(&e)
    };
    let off_a = fp(false, b"{\"ab\":1,");
    let off_b = fp(false, b"{\"xy\":2,");
    let detail = format!(
        "pruned equal: {}, second hit: {}, unpruned differ: {}",
        a.fingerprint == b.fingerprint,
        b.cache_hit,
        off_a != off_b
    );
    check(a.fingerprint == b.fingerprint && b.cache_hit && off_a != off_b, detail.clone(), detail)
}

fn ablation_ordering() -> Outcome {
    let dir = std::env::temp_dir().join(format!("earlymask-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let grammar = dir.join("json.grammar");
    std::fs::write(&grammar, JSON).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_earlymask"))
        .args(["bench", "--grammar"])
        .arg(&grammar)
        .args(["--repeats", "5", "--seed", "1", "--max-steps", "96", "--vocab-size", "512"])
        .output()
        .map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    if !out.status.success() {
        return Err(format!("bench exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    let mut rate: HashMap<String, f64> = HashMap::new();
    for l in String::from_utf8_lossy(&out.stdout).lines() {
        let v: serde_json::Value = serde_json::from_str(l).map_err(|e| e.to_string())?;
        if let (Some(name), Some(r)) = (v["config"].as_str(), v["masks_per_sec"].as_f64()) {
            rate.insert(name.to_string(), r);
        }
        if let Some(c) = v["self_check"].as_str() {
            if c != "ok" {
                return Err("bench self-check found differing masks".into());
            }
        }
    }
    let names: Vec<&str> = ablation_ladder().iter().map(|(n, _)| *n).collect();
    let [full, no_prune, both] = [names[0], names[1], names[2]].map(|n| rate.get(n).copied().unwrap_or(0.0));
    let detail = format!(
        "masks/s full {:.0}, no-prune {:.0}, no-prune+no-ci-cache {:.0} ({:.2}x)",
        full,
        no_prune,
        both,
        full / both.max(1e-9)
    );
    check(full >= no_prune && no_prune >= both && full >= 1.5 * both, detail.clone(), detail)
}

fn only_start_epsilon(g: &Grammar) -> bool {
    let start_on_rhs = g
        .productions()
        .iter()
        .any(|p| p.rhs.contains(&Symbol::Nonterminal(g.start())));
    g.productions()
        .iter()
        .filter(|p| p.rhs.is_empty())
        .all(|p| p.lhs == g.start() && !start_on_rhs)
}

fn transformation_preservation() -> Outcome {
    let fixed: Vec<(&str, &str, &[u8])> = vec![
        ("json", JSON, b"{}[]\":,1"),
        ("sum", SUM, b"abcd+"),
        ("plus", PLUS, b"ab"),
        ("hrr", HRR, b"ab"),
        ("nullable", NULLABLE, b"abcz"),
        ("dyck", r#"start ::= "(" start ")" start | ;"#, b"()"),
        ("nullable-regex", r#"start ::= A A "b"; A ::= #"a*" | "c" A;"#, b"abc"),
    ];
    let mut cases: Vec<(String, String, Vec<u8>)> =
        fixed.into_iter().map(|(n, t, a)| (n.to_string(), t.to_string(), a.to_vec())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for i in 0..20 {
        let params = RandomGrammarParams {
            nonterminals: 4,
            terminals: 3,
            max_alternatives: 3,
            max_rhs: 3,
            alphabet: b"ab",
            epsilon: true,
            regex: true,
        };
        cases.push((format!("random{}", i), random_grammar(&params, &mut |n| rng.gen_range(0..n)), b"ab".to_vec()));
    }
    let mut count = 0;
    for (name, text, alphabet) in &cases {
        let raw = parse_grammar_text(text, None).unwrap();
        let expected = enumerate_language_over(&raw, alphabet, 8);
        let Ok(useful) = remove_useless_rules(&raw) else {
            if expected.is_empty() {
                continue;
            }
            return Err(format!("{}: useless-rule removal failed on a nonempty language", name));
        };
        let no_null = eliminate_nullables(&useful);
        let prepared = prepare(&raw).unwrap();
        for (stage, g) in [("remove_useless", &useful), ("eliminate_nullables", &no_null), ("prepare", &prepared)] {
            if enumerate_language_over(g, alphabet, 8) != expected {
                return Err(format!("{}: {} changed the language", name, stage));
            }
        }
        if !only_start_epsilon(&no_null) || !only_start_epsilon(&prepared) {
            return Err(format!("{}: ε-rule left outside the start symbol", name));
        }
        count += 1;
    }
    Ok(format!("{} grammars x 3 transformations, length <= 8", count))
}

fn trie_behavior() -> Outcome {
    let g = compile_grammar(r#"start ::= X "b"; X ::= #"a+";"#, None).unwrap();
    let e = engine(&g, true);
    let ci = CiTokenCache::new(&g);
    let mut trie = RejectedPrefixTrie::new();
    trie.reset_for_state(fingerprint(&e));
    let first = Vocabulary::new(vec![b"aaacdefrf".to_vec(), vec![]], 1).unwrap();
    let out1 = compute_mask(&e, &first, &ci, &mut trie, MaskConfig::default());
    if trie.prefixes() != vec![b"aaac".to_vec()] {
        return Err(format!("stored prefixes {:?}", trie.prefixes()));
    }
    if out1.mask.get(0) {
        return Err("aaacdefrf accepted".into());
    }
    let later: Vec<Vec<u8>> = vec![b"aaacd".to_vec(), b"aaac".to_vec(), b"aaacx".to_vec(), b"aaacdefrf".to_vec(), vec![]];
    let later = Vocabulary::new(later, 4).unwrap();
    trie.reset_for_state(fingerprint(&e));
    let out2 = compute_mask(&e, &later, &ci, &mut trie, MaskConfig::default());
    let truth = brute_force_mask(&e, &later);
    check(
        out2.stats.trials == 0 && out2.stats.trie_hits == 4 && out2.mask == truth,
        format!("prefix \"aaac\" stored; {} later tokens rejected with 0 trials", out2.stats.trie_hits),
        format!("trials {}, trie hits {}, exact {}", out2.stats.trials, out2.stats.trie_hits, out2.mask == truth),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("mask equals brute force under every configuration", mask_oracle),
        ("recognition equivalence on random grammars", recognition),
        ("left-recursive worked example", worked_example),
        ("bounded live state on JSON arrays", bounded_live_state),
        ("fingerprint convergence", fingerprint_convergence),
        ("ablation ordering", ablation_ordering),
        ("transformation preservation", transformation_preservation),
        ("rejected-prefix trie", trie_behavior),
    ];
    // `cargo test --test acceptance -- 3 7` runs a subset
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut passed = 0;
    let mut ran = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => {
                passed += 1;
                println!("criterion {}: PASS {} ({}; {:.1}s)", i + 1, name, detail, secs);
            }
            Err(detail) => println!("criterion {}: FAIL {} ({}; {:.1}s)", i + 1, name, detail, secs),
        }
    }
    println!("acceptance: {}/{} criteria passed", passed, ran);
}
