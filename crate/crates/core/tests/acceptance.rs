//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use pex_core::backend::{Backend, BackendError, CompletionParams, OracleBackend};
use pex_core::corpus::{derive_follows, Corpus, NodeKind, RawBehaviorGraph, EVALUATION_IDS};
use pex_core::eval::{
    align, f1, fmt2, macro_average, match_phrase, normalize, score_document, ElementRow, MatchConfig, MatchKind,
    MetricTriple,
};
use pex_core::pipeline::{ActivitySource, Extractor};
use pex_core::prompting::{Prompt, QuestionKind, Setting, DEFINITIONS, PREAMBLE};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn oracle_round_trip() -> Outcome {
    let start = Instant::now();
    let corpus = Corpus::bundled();
    let oracle = OracleBackend::new(&corpus);
    let rows = [ElementRow::Activity, ElementRow::Participant, ElementRow::FollowsGs, ElementRow::PerformsGs];
    for id in EVALUATION_IDS {
        let entry = corpus.get(id).ok_or(format!("{id} missing"))?;
        let run = Extractor::default()
            .extract(&entry.document, Setting::Raw, &oracle, ActivitySource::Gold(&entry.gold))
            .map_err(|e| e.to_string())?;
        let scores = score_document(&entry.gold, None, Some(&run.model), &MatchConfig::bundled()).map_err(|e| e.to_string())?;
        for row in rows {
            let s = scores.rows.get(&row).ok_or(format!("{id} {} missing", row.label()))?;
            ensure(s.precision == 1.0 && s.recall == 1.0 && s.f1 == 1.0, || {
                format!("{id} {}: {} {} {}", row.label(), fmt2(s.precision), fmt2(s.recall), fmt2(s.f1))
            })?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("7 documents x 4 rows at 1.00 in {elapsed:.2?}"))
}

struct Counting<B> {
    inner: B,
    calls: [AtomicUsize; 3],
}

impl<B: Backend> Backend for Counting<B> {
    fn complete(&self, p: &Prompt, params: &CompletionParams) -> Result<String, BackendError> {
        let k = QuestionKind::ALL.iter().position(|q| *q == p.question).unwrap();
        self.calls[k].fetch_add(1, Ordering::SeqCst);
        self.inner.complete(p, params)
    }
}

struct ListN(usize);

impl Backend for ListN {
    fn complete(&self, p: &Prompt, _: &CompletionParams) -> Result<String, BackendError> {
        Ok(match p.question {
            QuestionKind::Q1 => (0..self.0).map(|i| format!("step {i}")).collect::<Vec<_>>().join("\n"),
            QuestionKind::Q2 => "agent".into(),
            QuestionKind::Q3 => "No".into(),
        })
    }
}

fn counts<B: Backend>(backend: &Counting<B>) -> [usize; 3] {
    [0, 1, 2].map(|i| backend.calls[i].load(Ordering::SeqCst))
}

fn query_counts() -> Outcome {
    let corpus = Corpus::bundled();
    let entry = corpus.get("10.1").ok_or("10.1 missing")?;
    let backend = Counting {
        inner: OracleBackend::new(&corpus),
        calls: Default::default(),
    };
    let run = Extractor::default()
        .extract(&entry.document, Setting::Raw, &backend, ActivitySource::Gold(&entry.gold))
        .map_err(|e| e.to_string())?;
    let issued = counts(&backend);
    ensure(issued == [0, 4, 12] && (run.counts.q2, run.counts.q3) == (4, 12), || {
        format!("10.1 issued {issued:?}, counted {:?}", run.counts)
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let doc = pex_core::corpus::Document::new("n", "Someone performs steps.").unwrap();
    for _ in 0..40 {
        let n = rng.gen_range(0..=10);
        let backend = Counting {
            inner: ListN(n),
            calls: Default::default(),
        };
        Extractor::default()
            .extract(&doc, Setting::Raw, &backend, ActivitySource::Extracted)
            .map_err(|e| e.to_string())?;
        let issued = counts(&backend);
        ensure(issued == [1, n, n * n.saturating_sub(1)], || format!("n={n} issued {issued:?}"))?;
    }
    Ok("10.1: 4 Q2, 12 Q3; 40 random n <= 10 match n and n(n-1)".into())
}

fn table2_rows() -> Result<Vec<(String, String, String, [f64; 3])>, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/table2.csv");
    let mut reader = csv::Reader::from_path(&path).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| format!("{rec:?}: {e}"));
        rows.push((rec[0].to_string(), rec[1].to_string(), rec[2].to_string(), [num(3)?, num(4)?, num(5)?]));
    }
    Ok(rows)
}

fn table2_arithmetic() -> Outcome {
    let rows = table2_rows()?;
    let tolerance = 0.01 + 1e-9;
    let mut per_doc = 0;
    let mut f1_failures = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<MetricTriple>> = BTreeMap::new();
    for (doc, element, setting, [p, r, f]) in rows.iter().filter(|r| r.0 != "average") {
        per_doc += 1;
        let recomputed = fmt2(f1(*p, *r)).parse::<f64>().unwrap();
        if (recomputed - f).abs() > tolerance {
            f1_failures.push(format!("{doc} {element} {setting}: P={p:.2} R={r:.2} F1={f:.2}, 2PR/(P+R)={recomputed:.2}"));
        }
        groups.entry((element.clone(), setting.clone())).or_default().push(MetricTriple {
            precision: *p,
            recall: *r,
            f1: *f,
        });
    }
    let mut average_failures = Vec::new();
    for (_, element, setting, [p, r, f]) in rows.iter().filter(|r| r.0 == "average") {
        let values = &groups[&(element.clone(), setting.clone())];
        let m = macro_average(values).map_err(|e| e.to_string())?;
        let got = [m.precision, m.recall, m.f1].map(|x| fmt2(x).parse::<f64>().unwrap());
        if got.iter().zip([p, r, f]).any(|(a, b)| (a - b).abs() > tolerance) {
            average_failures.push(format!("average {element} {setting}: {got:?} vs {:?}", [p, r, f]));
        }
    }
    let activity = macro_average(&groups[&("Activity".to_string(), "2shots".to_string())]).unwrap();
    let triple = [activity.precision, activity.recall, activity.f1].map(fmt2);
    ensure(triple == ["0.96", "0.93", "0.94"], || format!("2SHOTS Activity average {triple:?}"))?;
    ensure(average_failures.is_empty(), || average_failures.join("; "))?;
    ensure(f1_failures.is_empty(), || {
        format!("{} of {per_doc} cells violate F1 = 2PR/(P+R): {}", f1_failures.len(), f1_failures.join("; "))
    })?;
    Ok(format!("{per_doc} cells consistent; averages reproduce, 2SHOTS Activity 0.96/0.93/0.94"))
}

fn golden_prompts() -> Outcome {
    let bad = common::golden_mismatches();
    ensure(bad.is_empty(), || bad.join("; "))?;
    let expect: [(QuestionKind, &[&str]); 3] = [
        (QuestionKind::Q1, &["Activity"]),
        (QuestionKind::Q2, &["Activity", "Participant"]),
        (QuestionKind::Q3, &["Activity", "Process Model", "Flow", "Sequence Flow"]),
    ];
    for (q, names) in expect {
        for s in Setting::ALL {
            let text = common::render_golden(q, s);
            let found: Vec<&str> = DEFINITIONS
                .iter()
                .filter(|d| text.lines().any(|l| l == format!("{}:", d.name)))
                .map(|d| d.name)
                .collect();
            let want: &[&str] = if s.has_definitions() { names } else { &[] };
            ensure(found == want, || format!("{q} {s}: definitions {found:?}"))?;
            ensure(text.starts_with(PREAMBLE) == s.has_definitions(), || format!("{q} {s}: preamble"))?;
        }
    }
    Ok("12 prompts byte-identical; definitions per question as labeled".into())
}

fn pex(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pex"))
        .args(args)
        .env_remove("PEX_API_KEY")
        .env_remove("PEX_CONFIG")
        .env_remove("PEX_CORPUS")
        .output()
        .expect("pex runs")
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn replay_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cache = dir.path().join("cache.jsonl");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let record = pex(&["run-suite", "--backend", "oracle", "--cache", &s(&cache), "--out", &s(&dir.path().join("rec"))]);
    ensure(record.status.success(), || format!("recording failed: {}", String::from_utf8_lossy(&record.stderr)))?;
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = pex(&["run-suite", "--backend", "replay", "--cache", &s(&cache), "--out", &s(&out)]);
        ensure(o.status.success(), || format!("replay failed: {}", String::from_utf8_lossy(&o.stderr)))?;
        trees.push(tree(&out));
    }
    ensure(trees[0] == trees[1], || "replay outputs differ".into())?;
    let models = trees[0].keys().filter(|k| k.starts_with("models")).count();
    ensure(models == 56, || format!("{models} model files"))?;
    for f in ["report.json", "report.csv", "report.txt"] {
        ensure(trees[0].contains_key(Path::new(f)), || format!("{f} missing"))?;
    }
    let missing = dir.path().join("missing.jsonl");
    let o = pex(&["run-suite", "--backend", "replay", "--cache", &s(&missing), "--out", &s(&dir.path().join("c"))]);
    let stderr = String::from_utf8_lossy(&o.stderr);
    ensure(o.status.code() == Some(3) && stderr.contains("cache miss"), || {
        format!("missing cache exit {:?}: {stderr}", o.status.code())
    })?;
    Ok(format!("{} files identical across two replays; cache miss exits 3", trees[0].len()))
}

/// Reference: `a -> b` iff an edge leads from `a` to `b` directly or through
/// a chain of non-activity nodes, computed by Warshall closure.
fn reachability_oracle(kinds: &[NodeKind], edges: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
    let n = kinds.len();
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
    }
    let inner: Vec<bool> = kinds.iter().map(|k| !k.is_activity()).collect();
    let mut via = vec![vec![false; n]; n];
    for a in 0..n {
        for b in 0..n {
            via[a][b] = inner[a] && inner[b] && (a == b || adj[a][b]);
        }
    }
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                if via[a][k] && via[k][b] {
                    via[a][b] = true;
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    for a in (0..n).filter(|&a| !inner[a]) {
        for b in (0..n).filter(|&b| !inner[b] && b != a) {
            let through = (0..n).any(|g| adj[a][g] && (0..n).any(|h| via[g][h] && adj[h][b]));
            if adj[a][b] || through {
                out.insert((a, b));
            }
        }
    }
    out
}

fn random_graph(rng: &mut ChaCha8Rng, with_cycle: bool) -> (Vec<NodeKind>, Vec<(usize, usize)>) {
    let n = rng.gen_range(1..=8);
    let mut kinds: Vec<NodeKind> = (0..n)
        .map(|_| match rng.gen_range(0..10) {
            0..=4 => NodeKind::Activity,
            5..=7 => NodeKind::Gateway,
            8 => NodeKind::Condition,
            _ => NodeKind::Other,
        })
        .collect();
    let mut edges = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(0.25) {
                edges.insert((a, b));
            }
        }
    }
    if with_cycle && n >= 3 {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let (g, h) = (idx[0], idx[1]);
        kinds[g] = NodeKind::Gateway;
        kinds[h] = NodeKind::Gateway;
        edges.insert((g, h));
        edges.insert((h, g));
        edges.insert((idx[2], g));
    }
    (kinds, edges.into_iter().collect())
}

fn follows_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cyclic = 0;
    for i in 0..200 {
        let (kinds, edges) = random_graph(&mut rng, i % 4 == 0);
        let graph = RawBehaviorGraph::new(kinds.clone(), &edges).map_err(|e| e.to_string())?;
        let got = derive_follows(&graph);
        let want = reachability_oracle(&kinds, &edges);
        ensure(got == want, || format!("graph {i}: {kinds:?} {edges:?}: got {got:?}, want {want:?}"))?;
        if edges.iter().any(|&(a, b)| !kinds[a].is_activity() && !kinds[b].is_activity() && edges.contains(&(b, a))) {
            cyclic += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(2), || format!("took {elapsed:?}"))?;
    Ok(format!("200 graphs ({cyclic} with gateway cycles) agree in {elapsed:.2?}"))
}

fn matching_suite() -> Outcome {
    let cfg = MatchConfig::default();
    let set = |w: &[&str]| w.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    ensure(normalize("Send the Invoice.", &cfg) == set(&["send", "invoice"]), || "normalize Send the Invoice.".into())?;
    ensure(normalize("sends invoice", &cfg) == set(&["send", "invoice"]), || "normalize sends invoice".into())?;
    ensure(normalize("", &cfg).is_empty(), || "normalize empty".into())?;
    let m = match_phrase("send the invoice", "sends invoice", &cfg);
    ensure(m.matched && m.score == 1.0, || format!("send the invoice: {m:?}"))?;
    let m = match_phrase("pay bill", "send invoice", &cfg);
    ensure(!m.matched && m.score == 0.0, || format!("pay bill: {m:?}"))?;
    let bundled = MatchConfig::bundled();
    let m = match_phrase("check and repair the computer", "check the computer", &bundled);
    ensure(m.matched && m.kind == MatchKind::Alias && m.score == 1.0, || format!("alias: {m:?}"))?;
    let gold = ["send invoice", "pay bill", "file receipt"];
    ensure(align(&gold, &gold, &cfg).len() == 3, || "identity alignment".into())?;
    ensure(align(&["pay bill"], &gold, &cfg).to_gold == vec![Some(1)], || "subset alignment".into())?;
    ensure(align(&["send invoice", "sends the invoice"], &gold, &cfg).len() == 1, || "one-to-one".into())?;
    Ok("normalize, match_phrase, alias and align examples hold".into())
}

fn degradation() -> Outcome {
    let corpus = Corpus::bundled();
    let entry = corpus.get("1.3").ok_or("1.3 missing")?;
    let n = entry.gold.activities.len();
    ensure(n == 11, || format!("{n} gold activities"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for k in 0..n {
        for _ in 0..3 {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let oracle = OracleBackend::new(&corpus).omit_activities("1.3", idx[..k].iter().copied());
            let run = Extractor::default()
                .extract(&entry.document, Setting::Raw, &oracle, ActivitySource::Extracted)
                .map_err(|e| e.to_string())?;
            let scores =
                score_document(&entry.gold, Some(&run.model), None, &MatchConfig::bundled()).map_err(|e| e.to_string())?;
            let a = scores.rows[&ElementRow::Activity];
            let want = (n - k) as f64 / n as f64;
            ensure(a.recall == want && a.precision == 1.0, || {
                format!("k={k} omitted {:?}: P={} R={} want R={want}", &idx[..k], a.precision, a.recall)
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} runs, k = 0..10: recall (11-k)/11, precision 1.00"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("oracle round-trip", oracle_round_trip),
        ("query-count law", query_counts),
        ("results table arithmetic", table2_arithmetic),
        ("prompt golden files", golden_prompts),
        ("replay determinism", replay_determinism),
        ("derive_follows vs reachability oracle", follows_oracle),
        ("matching suite", matching_suite),
        ("degradation sanity", degradation),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
