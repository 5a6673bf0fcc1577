//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit
//! if any criterion fails. The desk-scale criteria share a single pipeline
//! run through the command-line entry point.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unravel_core::eval::Report;
use unravel_core::rnn::{read_checkpoint, write_checkpoint, Dims, LstmModel};
use unravel_core::rules::{induce_decision_list, read_rules, root_split, write_rules};
use unravel_core::skipgram::{enumerate_skipgrams, score_skipgrams, FeatureRow, MAX_LENGTH, MAX_SKIPS};
use unravel_core::{FeatureTable, InductionParams, Label, Level};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

// ---------------------------------------------------------------- gradients

const FD_STEP: f64 = 1e-3;
const FD_TOLERANCE: f64 = 1e-4;

/// Share of input coordinates whose analytic gradient matches a central
/// finite difference of the target logit.
fn gradient_agreement(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims {
        vocab: 6,
        embed: 2,
        hidden: 3,
        classes: 2,
    };
    let mut model = LstmModel::new(dims, seed);
    for block in model.parameters_mut() {
        for v in block.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let seq: Vec<u32> = (0..5).map(|_| rng.gen_range(0..dims.vocab as u32)).collect();
    let net = model.compile();
    let inputs = net.embed(&seq).unwrap();
    let trace = net.forward_inputs(inputs.clone());
    let analytic = net.trace_gradients(&trace);
    let target = analytic.target_class;
    let logit = |x| net.forward_inputs(x).logits[target];

    let (mut agree, mut total) = (0, 0);
    for ((t, k), &a) in analytic.rows.indexed_iter() {
        let mut plus = inputs.clone();
        plus[[t, k]] += FD_STEP;
        let mut minus = inputs.clone();
        minus[[t, k]] -= FD_STEP;
        let numeric = (logit(plus) - logit(minus)) / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        agree += usize::from(rel <= FD_TOLERANCE);
        total += 1;
    }
    agree as f64 / total as f64
}

fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let shares: Vec<f64> = (0..100).map(gradient_agreement).collect();
    let passing = shares.iter().filter(|&&s| s >= 0.99).count();
    let worst = shares.iter().copied().fold(1.0, f64::min);
    let elapsed = start.elapsed();
    verdict(
        passing == 100 && within(elapsed, 60),
        format!("{passing}/100 models with >=99% coordinates within 1e-4, worst share {worst:.3}, {elapsed:.1?}"),
    )
}

// ---------------------------------------------------------------- skipgrams

/// Skipgram position sets by direct subset filtering: all subsets of size
/// 1..=4 whose span exceeds their size by at most two.
fn subset_oracle(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut push = |pos: Vec<usize>| {
        let span = pos[pos.len() - 1] - pos[0] + 1;
        if pos.len() <= MAX_LENGTH && span - pos.len() <= MAX_SKIPS {
            out.push(pos);
        }
    };
    if n <= 16 {
        for mask in 1u32..(1 << n) {
            push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    } else {
        for a in 0..n {
            push(vec![a]);
            for b in a + 1..n {
                push(vec![a, b]);
                for c in b + 1..n {
                    push(vec![a, b, c]);
                    for d in c + 1..n.min(a + MAX_LENGTH + MAX_SKIPS) {
                        push(vec![a, b, c, d]);
                    }
                }
            }
        }
    }
    out.sort_by_key(|p| (p[0], p.len(), p[p.len() - 1] - p[0], p.clone()));
    out
}

/// Expected scored skipgrams: per key, the occurrence with the largest
/// |mean saliency|, the earliest in enumeration order on ties.
fn scoring_oracle(tokens: &[String], saliency: &[f64]) -> HashMap<String, (f64, usize, usize)> {
    let mut best: HashMap<String, (f64, usize, usize)> = HashMap::new();
    for pos in subset_oracle(tokens.len()) {
        let key = pos.iter().map(|&p| tokens[p].as_str()).collect::<Vec<_>>().join(" ");
        let score = pos.iter().map(|&p| saliency[p]).sum::<f64>() / pos.len() as f64;
        let entry = (score, pos[0], pos[pos.len() - 1] - pos[0] + 1);
        match best.get(&key) {
            Some(&(s, _, _)) if s.abs() >= score.abs() => {}
            _ => {
                best.insert(key, entry);
            }
        }
    }
    best
}

fn skipgram_oracle() -> Verdict {
    let start = Instant::now();
    let positions = |n: usize| -> Vec<Vec<usize>> { enumerate_skipgrams(n).iter().map(|s| s.positions().collect()).collect() };
    let mut failures = Vec::new();
    for n in 0..=8 {
        if positions(n) != subset_oracle(n) {
            failures.push(format!("n={n}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..1000 {
        let n = rng.gen_range(9..=40);
        let tokens: Vec<String> = (0..n).map(|_| format!("t{}", rng.gen_range(0..6))).collect();
        let saliency: Vec<f64> = (0..n).map(|_| (rng.gen_range(-8..=8) as f64) / 4.0).collect();
        if positions(n) != subset_oracle(n) {
            failures.push(format!("random case {case} enumeration"));
            continue;
        }
        let got: HashMap<String, (f64, usize, usize)> = score_skipgrams(&tokens, &saliency)
            .unwrap()
            .into_iter()
            .map(|s| (s.key, (s.score, s.first, s.span)))
            .collect();
        if got != scoring_oracle(&tokens, &saliency) {
            failures.push(format!("random case {case} scoring"));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures.is_empty() && within(elapsed, 60),
        if failures.is_empty() {
            format!("exhaustive n<=8 and 1000 random sequences (n 9..=40) agree, {elapsed:.1?}")
        } else {
            format!("{} mismatches, first {}", failures.len(), failures[0])
        },
    )
}

// ---------------------------------------------------------------- PART

fn entropy(counts: &[usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn label_counts<'a>(rows: impl Iterator<Item = &'a FeatureRow>) -> [usize; 2] {
    let mut c = [0; 2];
    for r in rows {
        c[r.label.index()] += 1;
    }
    c
}

/// Root split chosen by the stated gain-ratio rule, computed directly from
/// class counts.
fn gain_ratio_oracle(table: &FeatureTable, m: usize) -> Option<String> {
    const EPS: f64 = 1e-12;
    let n = table.len();
    let parent = label_counts(table.rows.iter());
    if n < 2 * m || parent.iter().filter(|&&c| c > 0).count() <= 1 {
        return None;
    }
    // (key, gain, gain ratio) of every valid split
    let mut valid: Vec<(String, f64, f64)> = Vec::new();
    for (a, key) in table.keys.iter().enumerate() {
        let branches: Vec<[usize; 2]> = Level::ALL
            .iter()
            .map(|&l| label_counts(table.rows.iter().filter(|r| r.levels[a] == l)))
            .filter(|c| c[0] + c[1] > 0)
            .collect();
        if branches.iter().filter(|c| c[0] + c[1] >= m).count() < 2 {
            continue;
        }
        let mut remainder = 0.0;
        let mut split_info = 0.0;
        for c in &branches {
            let w = (c[0] + c[1]) as f64 / n as f64;
            remainder += w * entropy(c);
            split_info -= w * w.log2();
        }
        let gain = entropy(&parent) - remainder;
        valid.push((key.clone(), gain, gain / split_info));
    }
    let positive: Vec<&(String, f64, f64)> = valid.iter().filter(|v| v.1 > EPS).collect();
    if positive.is_empty() {
        return valid.iter().map(|v| v.0.clone()).min();
    }
    let mean = positive.iter().map(|v| v.1).sum::<f64>() / positive.len() as f64;
    let eligible: Vec<&&(String, f64, f64)> = positive.iter().filter(|v| v.1 >= mean - EPS).collect();
    let top = eligible.iter().map(|v| v.2).fold(f64::NEG_INFINITY, f64::max);
    eligible
        .iter()
        .filter(|v| v.2 >= top - EPS)
        .map(|v| v.0.clone())
        .min()
}

fn random_table(rng: &mut ChaCha8Rng, consistent: bool) -> FeatureTable {
    let attrs = rng.gen_range(1..=3);
    let n = rng.gen_range(1..=12);
    let levels_used = rng.gen_range(2..=5);
    let keys: Vec<String> = (0..attrs).map(|a| format!("a{a}")).collect();
    let labels_of: HashMap<Vec<usize>, Label> = HashMap::new();
    let mut labels_of = labels_of;
    let rows = (0..n)
        .map(|i| {
            let idx: Vec<usize> = (0..attrs).map(|_| rng.gen_range(0..levels_used)).collect();
            let fresh = Label::ALL[rng.gen_range(0..2)];
            let label = if consistent {
                *labels_of.entry(idx.clone()).or_insert(fresh)
            } else {
                fresh
            };
            FeatureRow {
                doc_id: format!("r{i}"),
                label,
                levels: idx.iter().map(|&l| Level::ALL[l]).collect(),
            }
        })
        .collect();
    FeatureTable { keys, rows }
}

fn part_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut split_mismatch = 0;
    let mut splits_checked = 0;
    for _ in 0..20_000 {
        let table = random_table(&mut rng, false);
        let m = rng.gen_range(1..=3);
        let params = InductionParams {
            confidence: 0.25,
            min_instances: m,
        };
        splits_checked += 1;
        if root_split(&table, &params) != gain_ratio_oracle(&table, m) {
            split_mismatch += 1;
        }
    }
    let mut inconsistent_fits = 0;
    let consistent_tables = 5_000;
    for _ in 0..consistent_tables {
        let table = random_table(&mut rng, true);
        let list = induce_decision_list(&table, &InductionParams::unpruned()).unwrap();
        if list.predict(&table).unwrap() != table.labels() {
            inconsistent_fits += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        split_mismatch == 0 && inconsistent_fits == 0 && within(elapsed, 120),
        format!(
            "root split mismatches {split_mismatch}/{splits_checked}; unpruned fit failures \
             {inconsistent_fits}/{consistent_tables}; {elapsed:.1?}"
        ),
    )
}

// ---------------------------------------------------------------- pipeline

fn cli(out_dir: &Path, args: &[&str]) -> Result<Duration, String> {
    let start = Instant::now();
    let mut argv = vec!["unravel".to_owned(), "--out-dir".to_owned(), out_dir.display().to_string()];
    argv.extend(args.iter().map(|a| a.to_string()));
    match unravel_cli::run(argv) {
        0 => Ok(start.elapsed()),
        code => Err(format!("`{}` exited with {code}", args.join(" "))),
    }
}

fn report(path: PathBuf) -> Report {
    Report::parse(&fs::read_to_string(&path).unwrap_or_default()).unwrap_or_default()
}

fn number(report: &Report, section: &str, key: &str) -> f64 {
    report
        .get(section, key)
        .and_then(|v| v.parse().ok())
        .unwrap_or(f64::NAN)
}

struct DeskRun {
    dir: PathBuf,
    train_time: Duration,
    explain_time: Duration,
    baseline_time: Duration,
}

fn desk_pipeline(dir: &Path) -> Result<DeskRun, String> {
    cli(dir, &["synth"])?;
    let train_time = cli(dir, &["train"])?;
    for pool in ["dot", "l2", "sum"] {
        cli(dir, &["saliency", "--pool", pool, "--eval-gold"])?;
    }
    let explain_time = cli(dir, &["explain"])?;
    let baseline_time = cli(dir, &["baseline"])?;
    cli(dir, &["eval", "--split", "test"])?;
    Ok(DeskRun {
        dir: dir.to_owned(),
        train_time,
        explain_time,
        baseline_time,
    })
}

fn classifier_quality(run: &DeskRun) -> Verdict {
    let acc = number(&report(run.dir.join("train_report.txt")), "model", "test_accuracy");
    verdict(
        acc >= 0.85 && within(run.train_time, 600),
        format!("test accuracy {acc:.4} (>= 0.85), training {:.1?}", run.train_time),
    )
}

fn pooling_ordering(run: &DeskRun) -> Verdict {
    let gold = |pool: &str| {
        number(
            &report(run.dir.join(format!("saliency_{pool}_gold.txt"))),
            "saliency",
            "mean_topk_gold_accuracy",
        )
    };
    let (dot, sum, l2) = (gold("dot"), gold("sum"), gold("l2"));
    verdict(
        dot > sum && dot > l2,
        format!("mean top-k gold accuracy dot {dot:.4}, sum {sum:.4}, l2 {l2:.4}"),
    )
}

fn fidelity_gap(run: &DeskRun) -> Verdict {
    let unravel = number(&report(run.dir.join("report.txt")), "fidelity", "test");
    let baseline = number(&report(run.dir.join("baseline_report.txt")), "fidelity", "test");
    let eval = number(&report(run.dir.join("eval_test.txt")), "fidelity", "test");
    let combined = run.explain_time + run.baseline_time;
    verdict(
        unravel >= 0.90 && unravel - baseline >= 0.05 && eval == unravel && within(combined, 300),
        format!(
            "test macro-F1 fidelity {unravel:.4} vs baseline {baseline:.4} (gap {:.1} points), \
             eval rerun {eval:.4}, explain+baseline {combined:.1?}",
            100.0 * (unravel - baseline)
        ),
    )
}

fn transferability(run: &DeskRun) -> Verdict {
    let r = report(run.dir.join("report.txt"));
    let (valid, test) = (number(&r, "fidelity", "valid"), number(&r, "fidelity", "test"));
    verdict(
        (valid - test).abs() <= 0.05,
        format!("valid {valid:.4} vs test {test:.4} (|diff| {:.1} points)", 100.0 * (valid - test).abs()),
    )
}

fn header_lines(text: &str) -> Vec<String> {
    text.lines()
        .map_while(|l| l.strip_prefix("# "))
        .map(str::to_owned)
        .collect()
}

fn round_trips(run: &DeskRun) -> Verdict {
    let model_bytes = fs::read(run.dir.join("model.unrv")).unwrap_or_default();
    let model_ok = read_checkpoint(model_bytes.as_slice())
        .map(|c| {
            let mut out = Vec::new();
            write_checkpoint(&mut out, &c).unwrap();
            out == model_bytes
        })
        .unwrap_or(false);
    let mut rules_ok = true;
    for name in ["rules.txt", "baseline_rules.txt"] {
        let text = fs::read_to_string(run.dir.join(name)).unwrap_or_default();
        rules_ok &= read_rules(text.as_bytes())
            .map(|list| {
                let mut out = Vec::new();
                write_rules(&mut out, &list, &header_lines(&text)).unwrap();
                out == text.as_bytes()
            })
            .unwrap_or(false);
    }
    verdict(
        model_ok && rules_ok,
        format!(
            "checkpoint ({} bytes) {}, rule files {}",
            model_bytes.len(),
            if model_ok { "identical" } else { "differs" },
            if rules_ok { "identical" } else { "differ" }
        ),
    )
}

/// Every artifact of two pipeline runs with identical flags, compared byte
/// for byte. Runs at reduced size to bound the suite's runtime.
fn determinism(root: &Path) -> Verdict {
    let small = [
        "--keyword-docs",
        "300",
        "--distractor-docs",
        "120",
    ];
    let run = |dir: &Path| -> Result<(), String> {
        let mut synth = vec!["synth"];
        synth.extend_from_slice(&small);
        cli(dir, &synth)?;
        cli(dir, &["train", "--epochs", "3"])?;
        cli(dir, &["saliency", "--pool", "dot", "--eval-gold"])?;
        cli(dir, &["explain"])?;
        cli(dir, &["baseline"])?;
        cli(dir, &["eval", "--split", "test"])?;
        cli(dir, &["heatmap", "--doc", "kw000000"])?;
        Ok(())
    };
    let (a, b) = (root.join("det_a"), root.join("det_b"));
    if let Err(e) = run(&a).and_then(|_| run(&b)) {
        return verdict(false, e);
    }
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| fs::read(a.join(n)).ok() != fs::read(b.join(n)).ok())
        .collect();
    verdict(
        differing.is_empty() && names.len() >= 15,
        if differing.is_empty() {
            format!("{} artifacts byte-identical across two runs (300+120 documents, 3 epochs)", names.len())
        } else {
            format!("differing artifacts: {differing:?}")
        },
    )
}

fn main() {
    let root = tempfile::tempdir().expect("temporary directory");
    let mut results: Vec<(&str, Verdict)> = vec![
        ("gradient correctness", gradient_correctness()),
        ("skipgram oracle", skipgram_oracle()),
        ("PART oracle", part_oracle()),
    ];
    match desk_pipeline(&root.path().join("desk")) {
        Ok(run) => {
            results.push(("classifier quality", classifier_quality(&run)));
            results.push(("pooling ordering", pooling_ordering(&run)));
            results.push(("fidelity gap", fidelity_gap(&run)));
            results.push(("transferability", transferability(&run)));
            results.push(("round-trips", round_trips(&run)));
        }
        Err(e) => {
            for name in [
                "classifier quality",
                "pooling ordering",
                "fidelity gap",
                "transferability",
                "round-trips",
            ] {
                results.push((name, verdict(false, format!("pipeline failed: {e}"))));
            }
        }
    }
    results.push(("determinism", determinism(root.path())));

    println!();
    for (name, v) in &results {
        println!("[{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed = results.iter().filter(|(_, v)| !v.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
