//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

use std::collections::{BTreeSet, HashSet};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use contract_rl::compile::{default_solc_dir, CompileBackend, CompileError, SolcCompiler, VersionConstraint};
use contract_rl::data::{dedup, segment_windows, TokenStream, DEFAULT_STRIDE, DEFAULT_THRESHOLD, MAX_WINDOW};
use contract_rl::grpo::{
    gradient_check, group_advantages, kl_estimate, kl_penalty, lm_cross_entropy, random_instance, rollout_group,
    train_toy, CeiTask, GrpoHyperparams, ToyPolicy, TrainConfig,
};
use contract_rl::metrics::{compute_metrics, Metric, MetricsReport, SampleVerdict};
use contract_rl::parser::{check_format, extract_think_answer, ParsedOutput, RawOutput};
use contract_rl::reward::{preset, RewardConfig, RewardEngine, RewardError, PRESET_NAMES};
use contract_rl::sample::GenerationSample;
use contract_rl::scanner::{classify_severity, Category, Scanner, Severity};
use contract_rl::Exact;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

// 1 -------------------------------------------------------------------------

fn metric_identity() -> Check {
    let r = MetricsReport::from_counts(756, 663, 57, 407, 382);
    for (m, want) in [(Metric::ComPass, 87.70), (Metric::VulRate, 8.60), (Metric::SafeAval, 80.16)] {
        let got = r.percent(m);
        ensure!((got - want).abs() <= 0.01, "{} = {got}, want {want}", m.key());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for corpus in 0..1000 {
        let n = rng.gen_range(1..60);
        let verdicts: Vec<SampleVerdict> = (0..n)
            .map(|i| {
                let compiled = rng.gen_bool(0.7);
                SampleVerdict {
                    sample_id: format!("{corpus}-{i}"),
                    compiled,
                    vulnerable: compiled.then(|| rng.gen_bool(0.3)),
                    functional: if compiled { Some(rng.gen_bool(0.6)) } else { None },
                }
            })
            .collect();
        let rep = compute_metrics(&verdicts).map_err(|e| e.to_string())?;
        let compiled = verdicts.iter().filter(|v| v.compiled).count() as i64;
        let secure = verdicts.iter().filter(|v| v.vulnerable == Some(false)).count() as i64;
        let compass = rep.exact(Metric::ComPass);
        let vulrate = rep.exact(Metric::VulRate);
        let safeaval = rep.exact(Metric::SafeAval);
        ensure!(compass == Exact::new(compiled, n), "corpus {corpus}: compass {compass}");
        ensure!(safeaval == Exact::new(secure, n), "corpus {corpus}: safeaval {safeaval}");
        ensure!(
            safeaval == compass * (Exact::from_integer(1) - vulrate),
            "corpus {corpus}: {safeaval} != {compass} * (1 - {vulrate})"
        );
    }
    Ok("756/663/57 -> 87.70/8.60/80.16; identity exact on 1000 corpora".into())
}

// 2 -------------------------------------------------------------------------

fn reward_exhaustion() -> Check {
    let table: [(&str, [i64; 3]); 7] = [
        ("Ours", [3, 5, 2]),
        ("Security+", [2, 6, 2]),
        ("Security++", [1, 7, 2]),
        ("Compile+", [4, 4, 2]),
        ("Compile++", [5, 3, 2]),
        ("Compile+++", [6, 2, 2]),
        ("Compile++++", [7, 1, 2]),
    ];
    ensure!(PRESET_NAMES.len() == table.len(), "preset count {}", PRESET_NAMES.len());
    let mut cases = 0;
    for (name, tenths) in table {
        let exact: RewardConfig<Exact> = preset(name).map_err(|e| e.to_string())?;
        let float: RewardConfig<f64> = preset(name).map_err(|e| e.to_string())?;
        for bits in 0..8u8 {
            let r = [bits >> 2 & 1, bits >> 1 & 1, bits & 1];
            let dot: Exact = (0..3).map(|i| Exact::new(tenths[i] * i64::from(r[i]), 10)).sum();
            let got = exact.total(r[0], r[1], r[2]);
            ensure!(got == dot, "{name} {r:?}: {got} != {dot}");
            let w = float.weights();
            let fdot = w[0] * f64::from(r[0]) + w[1] * f64::from(r[1]) + w[2] * f64::from(r[2]);
            ensure!(float.total(r[0], r[1], r[2]) == fdot, "{name} {r:?}: f64 total differs");
            cases += 1;
        }
    }
    let ours = RewardConfig::<Exact>::default();
    let values: BTreeSet<Exact> = (0..8u8).map(|b| ours.total(b >> 2 & 1, b >> 1 & 1, b & 1)).collect();
    let want: BTreeSet<Exact> = [0, 2, 3, 5, 7, 8, 10].iter().map(|&t| Exact::new(t, 10)).collect();
    ensure!(values == want, "value set {values:?}");
    Ok(format!("{cases} cases exact; default value set {{0,.2,.3,.5,.7,.8,1}}"))
}

// 3 -------------------------------------------------------------------------

fn grpo_math() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut guarded = 0;
    for g in 0..1000 {
        let n = rng.gen_range(2..17);
        let rewards: Vec<f64> = if g % 10 == 0 {
            vec![rng.gen_range(0.0..1.0); n]
        } else {
            (0..n).map(|_| [0.0, 0.2, 0.3, 0.5, 0.7, 0.8, 1.0][rng.gen_range(0..7)]).collect()
        };
        let adv = group_advantages(&rewards);
        let mean_r = rewards.iter().sum::<f64>() / n as f64;
        let std_r = (rewards.iter().map(|r| (r - mean_r).powi(2)).sum::<f64>() / n as f64).sqrt();
        if std_r < 1e-8 {
            guarded += 1;
            ensure!(adv.iter().all(|&a| a == 0.0), "group {g}: guard not applied");
            continue;
        }
        let mean = adv.iter().sum::<f64>() / n as f64;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        ensure!(mean.abs() < 1e-12, "group {g}: mean {mean}");
        ensure!((std - 1.0).abs() < 1e-12, "group {g}: std {std}");
    }

    let hp = GrpoHyperparams { beta: 0.04, ..Default::default() };
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let (p, groups) = random_instance(seed, hp.epsilon, 1e-3);
        worst = worst.max(gradient_check(&p, &groups, &hp, 1e-4, 1e-6));
    }
    ensure!(worst < 1e-5, "worst gradient relative error {worst:e}");

    for _ in 0..10_000 {
        let a: f64 = rng.gen_range(-20.0..0.0);
        let b: f64 = rng.gen_range(-20.0..0.0);
        let k = kl_estimate(a, b);
        ensure!(k >= 0.0, "kl({a}, {b}) = {k}");
        ensure!(kl_estimate(a, a) == 0.0, "kl({a}, {a}) != 0");
    }
    for seed in 0..50 {
        let p = ToyPolicy::<f64>::random(4, 2, 2.0, seed);
        let g = rollout_group(&p, &[1], 6, 5, seed);
        for lp in &g.logp_current {
            let est = kl_penalty(lp, lp).map_err(|e| e.to_string())?;
            ensure!(est.per_token.iter().all(|&k| k == 0.0) && est.mean == 0.0, "kl of identical policies nonzero");
        }
    }
    Ok(format!("1000 groups ({guarded} guarded); worst FD rel err {worst:.1e}; KL >= 0, = 0 on identity"))
}

// 4 -------------------------------------------------------------------------

fn toy_learning() -> Check {
    let env = CeiTask::default();
    let hp = GrpoHyperparams { epsilon: 0.2, beta: 0.001, group_size: 8, learning_rate: 1.0 };
    let cfg = TrainConfig { epochs: 200, seed: 42, ..Default::default() };
    let (_, curve) = train_toy(&env, &hp, &cfg).map_err(|e| e.to_string())?;
    ensure!(curve.points.len() == 200, "{} points", curve.points.len());
    let start = curve.initial_expected_reward;
    let end = curve.final_expected_reward();
    ensure!(end - start >= 0.2, "expected reward {start:.4} -> {end:.4}");
    let sampled_first = curve.points[..10].iter().map(|p| p.mean_reward).sum::<f64>() / 10.0;
    let sampled_last = curve.points[190..].iter().map(|p| p.mean_reward).sum::<f64>() / 10.0;
    ensure!(sampled_last - sampled_first >= 0.2, "sampled reward {sampled_first:.4} -> {sampled_last:.4}");
    let (_, again) = train_toy(&env, &hp, &cfg).map_err(|e| e.to_string())?;
    ensure!(curve.to_csv() == again.to_csv(), "rerun differs");
    Ok(format!(
        "expected reward {start:.4} -> {end:.4}; sampled (10-step means) {sampled_first:.3} -> {sampled_last:.3}; rerun identical"
    ))
}

// 5 -------------------------------------------------------------------------

#[derive(serde::Deserialize)]
struct FixtureEntry {
    file: String,
    category: String,
    vulnerable: bool,
}

fn scanner_fixtures() -> Check {
    let severity_table = [
        ("Reentrancy Vulnerabilities", Severity::High),
        ("Array Bounds Unchecked", Severity::Med),
        ("Access Control Missing", Severity::High),
        ("State Validation Missing", Severity::Med),
        ("Integer Overflow/Underflow", Severity::Med),
        ("Improper Error Handling", Severity::Med),
        ("Timestamp Dependence", Severity::Med),
        ("Gas Limit DoS Risk", Severity::Low),
        ("Function Visibility Issues", Severity::Low),
        ("tx.origin Authentication", Severity::High),
        ("Selfdestruct Usage", Severity::High),
        ("Delegatecall Context Risk", Severity::High),
    ];
    ensure!(Category::ALL.len() == severity_table.len(), "{} categories", Category::ALL.len());
    for (name, sev) in severity_table {
        let got = classify_severity(name).map_err(|e| e.to_string())?;
        ensure!(got == sev, "{name}: {got:?} != {sev:?}");
    }

    let dir = manifest_dir().join("fixtures/scanner");
    let manifest: Vec<FixtureEntry> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    ensure!(manifest.len() >= 24, "only {} fixtures", manifest.len());
    let scanner = Scanner::new();
    let (mut vuln, mut clean) = (HashSet::new(), HashSet::new());
    for e in &manifest {
        let src = std::fs::read_to_string(dir.join(&e.file)).map_err(|err| format!("{}: {err}", e.file))?;
        let category: Category = e.category.parse().map_err(|err| format!("{}: {err}", e.file))?;
        let report = scanner.scan_source(&src);
        if e.vulnerable {
            ensure!(report.count(category) >= 1, "{}: {} not detected", e.file, e.category);
            vuln.insert(category);
        } else {
            ensure!(report.findings.is_empty(), "{}: {} findings on clean fixture", e.file, report.findings.len());
            clean.insert(category);
        }
    }
    ensure!(vuln.len() == 12 && clean.len() == 12, "coverage {} vuln / {} clean categories", vuln.len(), clean.len());
    Ok(format!("{} fixtures: recall 100%, clean 0 findings; 12 severities match", manifest.len()))
}

// 6 -------------------------------------------------------------------------

fn compile_gate() -> Check {
    let fixture = |n: &str| std::fs::read_to_string(manifest_dir().join("fixtures/compile").join(n)).map_err(|e| e.to_string());
    let valid = fixture("minimal_valid.sol")?;
    let broken = fixture("syntax_error.sol")?;
    let caret: VersionConstraint = "^0.8.0".parse().map_err(|e: CompileError| e.to_string())?;

    let empty = tempfile::tempdir().map_err(|e| e.to_string())?;
    let absent = SolcCompiler::discover(empty.path());
    match absent.compile(&valid, &caret) {
        Err(e @ CompileError::Unavailable { .. }) if e.to_string().starts_with("compiler unavailable") => {}
        other => return Err(format!("without a compiler: {other:?}")),
    }
    let engine = RewardEngine::new(RewardConfig::<f64>::default(), &absent);
    let sample = GenerationSample::new(
        "g",
        "<think>Check the caller first. Then store the value. Nothing else happens.</think><answer>function f() public {}</answer>",
    );
    match engine.score(&sample) {
        Err(RewardError::Compile(CompileError::Unavailable { .. })) => {}
        other => return Err(format!("engine without a compiler returned {other:?}")),
    }

    let solc = SolcCompiler::discover(default_solc_dir());
    let version = solc
        .resolve(&caret)
        .map_err(|e| format!("{e}; install one with scripts/install-solcjs.sh"))?;
    let ok = solc.compile(&valid, &caret).map_err(|e| e.to_string())?;
    ensure!(ok.score() == 1, "valid fixture failed: {:?}", ok.diagnostics);
    let bad = solc.compile(&broken, &caret).map_err(|e| e.to_string())?;
    ensure!(bad.score() == 0, "syntax-error fixture compiled");
    Ok(format!("solc {version}: valid -> 1, syntax error -> 0; missing compiler -> \"compiler unavailable\""))
}

// 7 -------------------------------------------------------------------------

fn jaccard(a: &TokenStream, b: &TokenStream) -> f64 {
    let sa: HashSet<&String> = a.tokens.iter().collect();
    let sb: HashSet<&String> = b.tokens.iter().collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / sa.union(&sb).count() as f64
}

fn pipeline_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let len = rng.gen_range(1..6000);
        let stream = TokenStream::new(format!("s{case}"), (0..len).map(|i| format!("t{i}")).collect());
        let (window, stride) = if case % 2 == 0 {
            (MAX_WINDOW, DEFAULT_STRIDE)
        } else {
            let w = rng.gen_range(1..=MAX_WINDOW);
            (w, rng.gen_range(1..=w))
        };
        let ws = segment_windows(&stream, window, stride).map_err(|e| e.to_string())?;
        let mut covered = vec![false; len];
        for w in &ws {
            ensure!(w.end - w.start <= window && w.end - w.start <= MAX_WINDOW, "case {case}: window too long");
            ensure!(w.tokens == stream.tokens[w.start..w.end], "case {case}: token mismatch");
            covered[w.start..w.end].iter_mut().for_each(|c| *c = true);
        }
        ensure!(covered.iter().all(|&c| c), "case {case}: tokens not covered");
    }

    let vocab: Vec<String> = (0..14).map(|i| format!("w{i}")).collect();
    for case in 0..100 {
        let n = rng.gen_range(0..=50);
        let mut corpus: Vec<TokenStream> = Vec::new();
        for i in 0..n {
            let tokens = if i > 0 && rng.gen_bool(0.4) {
                let mut t = corpus[rng.gen_range(0..i)].tokens.clone();
                if rng.gen_bool(0.5) {
                    t.push(vocab.choose(&mut rng).unwrap().clone());
                }
                t
            } else {
                (0..rng.gen_range(1..12)).map(|_| vocab.choose(&mut rng).unwrap().clone()).collect()
            };
            corpus.push(TokenStream::new(format!("d{i}"), tokens));
        }
        let out = dedup(&corpus, DEFAULT_THRESHOLD).map_err(|e| e.to_string())?;

        let mut oracle: Vec<usize> = Vec::new();
        for i in 0..corpus.len() {
            if oracle.iter().all(|&k| jaccard(&corpus[k], &corpus[i]) < DEFAULT_THRESHOLD) {
                oracle.push(i);
            }
        }
        ensure!(out.kept == oracle, "case {case}: kept {:?} vs oracle {oracle:?}", out.kept);
        for (x, &a) in out.kept.iter().enumerate() {
            for &b in &out.kept[x + 1..] {
                ensure!(jaccard(&corpus[a], &corpus[b]) < DEFAULT_THRESHOLD, "case {case}: kept pair {a},{b}");
            }
        }
        let kept: Vec<TokenStream> = out.kept.iter().map(|&i| corpus[i].clone()).collect();
        let again = dedup(&kept, DEFAULT_THRESHOLD).map_err(|e| e.to_string())?;
        ensure!(again.kept == (0..kept.len()).collect::<Vec<_>>(), "case {case}: not idempotent");
    }

    let uniform = ToyPolicy::<f64>::uniform(4, 1, 0);
    let windows: Vec<Vec<usize>> = (0..20).map(|_| (0..rng.gen_range(1..40)).map(|_| rng.gen_range(0..4)).collect()).collect();
    let ce = lm_cross_entropy(&uniform, &windows).map_err(|e| e.to_string())?;
    let err = (ce.per_token() - 4f64.ln()).abs();
    ensure!(err <= 1e-12, "uniform CE off by {err:e}");
    Ok(format!("200 window cases covered; 100 dedup corpora match oracle and are idempotent; CE - ln4 = {err:.0e}"))
}

// 8 -------------------------------------------------------------------------

const LONG: &str = "check the balance.";
const SHORT: &str = "ok.";

/// First occurrence of `needle` in `hay` at or after `from`, ASCII case-insensitive.
fn find_from(hay: &str, needle: &str, from: usize) -> Option<usize> {
    let lower = hay.to_ascii_lowercase();
    lower.get(from..)?.find(needle).map(|i| i + from)
}

fn reference_format(text: &str) -> u8 {
    let Some(ao) = find_from(text, "<answer>", 0) else { return 0 };
    let Some(ac) = find_from(text, "</answer>", ao + 8) else { return 0 };
    let Some(to) = find_from(text, "<think>", 0) else { return 0 };
    let Some(tc) = find_from(text, "</think>", to + 7) else { return 0 };
    if tc + 8 > ao {
        return 0;
    }
    let reasoning = &text[to + 7..tc];
    let code = text[ao + 8..ac].trim();
    if code.is_empty() {
        return 0;
    }
    for part in [reasoning, code] {
        let lower = part.to_ascii_lowercase();
        if ["<think>", "</think>", "<answer>", "</answer>"].iter().any(|t| lower.contains(t)) {
            return 0;
        }
    }
    u8::from(reasoning.matches(LONG).count() >= 3)
}

fn random_case(rng: &mut ChaCha8Rng) -> String {
    let tags = ["<think>", "</think>", "<answer>", "</answer>", "<THINK>", "</Answer>"];
    let mut pieces: Vec<String> = Vec::new();
    let n = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..6) };
    for _ in 0..n {
        pieces.push(tags[rng.gen_range(0..tags.len())].to_string());
    }
    if rng.gen_bool(0.6) {
        let well = ["<think>", "</think>", "<answer>", "</answer>"];
        let at = rng.gen_range(0..=pieces.len());
        for (k, t) in well.iter().enumerate() {
            pieces.insert(at + k, t.to_string());
        }
    }
    let mut out = String::new();
    for p in pieces {
        for _ in 0..rng.gen_range(0..6) {
            out.push_str(match rng.gen_range(0..4) {
                0 | 1 => LONG,
                2 => SHORT,
                _ => "x = 1.",
            });
            out.push(' ');
        }
        out.push_str(&p);
    }
    if rng.gen_bool(0.5) {
        out.push_str(" trailing words here.");
    }
    out
}

fn format_compliance() -> Check {
    let with_code = |reasoning: Option<&str>| {
        let text = match reasoning {
            Some(r) => format!("<think>{r}</think><answer>function f() public {{}}</answer>"),
            None => "<answer>function f() public {}</answer>".to_string(),
        };
        check_format(&extract_think_answer(&RawOutput::new(text)))
    };
    let three = with_code(Some("First check balance. Then update state. Finally emit event."));
    ensure!(three.score == 1, "three steps: {:?}", three.diagnostics);
    let absent = with_code(None);
    ensure!(absent.score == 0, "reasoning absent scored 1");
    let two = with_code(Some("First check balance. Then update state."));
    ensure!(
        two.score == 0 && two.diagnostics.iter().any(|d| d.to_string().starts_with("insufficient reasoning steps")),
        "two steps: {:?}",
        two.diagnostics
    );

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut passes = 0;
    for case in 0..200 {
        let text = random_case(&mut rng);
        let parsed: ParsedOutput = extract_think_answer(&RawOutput::new(text.clone()));
        let got = check_format(&parsed).score;
        let want = reference_format(&text);
        ensure!(got == want, "case {case}: got {got}, reference {want} for {text:?}");
        passes += usize::from(want == 1);
    }
    ensure!(passes > 0 && passes < 200, "generated suite is degenerate ({passes} passes)");
    Ok(format!("3 examples; 200 generated cases agree ({passes} compliant)"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check, Duration); 8] = [
        ("1 metric identity", metric_identity, Duration::from_secs(1)),
        ("2 reward exhaustion", reward_exhaustion, Duration::from_secs(1)),
        ("3 grpo math", grpo_math, Duration::from_secs(30)),
        ("4 toy learning", toy_learning, Duration::from_secs(60)),
        ("5 scanner fixtures", scanner_fixtures, Duration::from_secs(5)),
        ("6 compile gate", compile_gate, Duration::from_secs(30)),
        ("7 pipeline properties", pipeline_properties, Duration::from_secs(10)),
        ("8 format compliance", format_compliance, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let t = Instant::now();
        let result = check();
        let elapsed = t.elapsed();
        let result = match result {
            Ok(msg) if elapsed > limit => Err(format!("{msg}; exceeded {limit:?}")),
            r => r,
        };
        match result {
            Ok(msg) => println!("PASS  {name:<22} {:>8.3}s  {msg}", elapsed.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name:<22} {:>8.3}s  {msg}", elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
