//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod support;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use mapeval::commands::seg::SegSummary;
use mapeval::Env;
use mapeval_core::ingest::ply::{decode_ply, encode_ply};
use mapeval_core::ingest::LabeledPointCloud;
use mapeval_core::seg::{
    aggregate_conditions, associate_points, build_confusion, compute_fmiou, compute_iou_per_class, compute_macc,
    AssociationParams, ConfusionMatrix, SegmentationResult,
};
use mapeval_core::labels::MatchMode;
use mapeval_core::ConditionKind;
use mapeval_gateway::transport::FailOnUse;
use mapeval_gateway::{
    ChatRequest, ChatResponse, Gateway, GatewayConfig, Message, Mode, PreparedRequest, Transport, TransportError,
};
use mapeval_vqa::store;
use mapeval_vqa::{
    balance_questions, judge_exact, AnsweredBy, CategoryQuota, QACategory, QAItem, QAStatus, SystemAnswer,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{fixture_config_text, run_cli, snapshot, write_config};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// 1. Metric oracle

struct Tally {
    tp: Vec<u64>,
    gt: Vec<u64>,
    pred: Vec<u64>,
}

/// Per-point tally over an explicit list of (GT class, matched class).
fn tally_points(points: &[(usize, Option<usize>)], classes: usize) -> Tally {
    let mut t = Tally {
        tp: vec![0; classes],
        gt: vec![0; classes],
        pred: vec![0; classes],
    };
    for &(g, p) in points {
        t.gt[g] += 1;
        if let Some(p) = p {
            t.pred[p] += 1;
            if p == g {
                t.tp[g] += 1;
            }
        }
    }
    t
}

fn oracle_metrics(t: &Tally) -> (f64, Vec<Option<f64>>, f64) {
    let present: Vec<usize> = (0..t.gt.len()).filter(|&c| t.gt[c] > 0).collect();
    let macc = present.iter().map(|&c| t.tp[c] as f64 / t.gt[c] as f64).sum::<f64>() / present.len() as f64;
    let iou: Vec<Option<f64>> = (0..t.gt.len())
        .map(|c| {
            let union = t.gt[c] + t.pred[c] - t.tp[c];
            (union > 0).then(|| t.tp[c] as f64 / union as f64)
        })
        .collect();
    let total: u64 = t.gt.iter().sum();
    let fmiou = present.iter().map(|&c| t.gt[c] as f64 * iou[c].unwrap()).sum::<f64>() / total as f64;
    (macc, iou, fmiou)
}

fn metric_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05b1);
    let mut worst = 0.0f64;
    let mut points_total = 0usize;
    // Only the implementation under test is timed; expanding the oracle's
    // per-point lists dominates a debug build.
    let mut timed = Duration::ZERO;
    for trial in 0..100 {
        let classes = rng.gen_range(1..=10);
        let mut rows = vec![vec![0u64; classes]; classes];
        let mut unmatched = vec![0u64; classes];
        for g in 0..classes {
            // Some classes have no GT points at all.
            if classes > 1 && rng.gen_bool(0.15) {
                continue;
            }
            for p in 0..classes {
                rows[g][p] = rng.gen_range(0..=10_000);
            }
            unmatched[g] = rng.gen_range(0..=10_000);
        }
        if rows.iter().flatten().chain(&unmatched).all(|&n| n == 0) {
            rows[0][0] = 1;
        }
        let mut points = Vec::new();
        for g in 0..classes {
            for p in 0..classes {
                points.extend(std::iter::repeat((g, Some(p))).take(rows[g][p] as usize));
            }
            points.extend(std::iter::repeat((g, None)).take(unmatched[g] as usize));
        }
        points.shuffle(&mut rng);
        let (o_macc, o_iou, o_fmiou) = oracle_metrics(&tally_points(&points, classes));

        let gt: Vec<i32> = points.iter().map(|(g, _)| *g as i32).collect();
        let matched: Vec<Option<i32>> = points.iter().map(|(_, p)| p.map(|p| p as i32)).collect();
        points_total += points.len();
        let start = Instant::now();
        let from_points = build_confusion(&gt, &matched, classes).map_err(|e| e.to_string())?;
        let from_rows = ConfusionMatrix::from_rows(&rows, &unmatched).map_err(|e| e.to_string())?;
        ensure(from_points == from_rows, || format!("trial {trial}: tallies disagree"))?;

        let macc = compute_macc(&from_rows).map_err(|e| e.to_string())?;
        let fmiou = compute_fmiou(&from_rows).map_err(|e| e.to_string())?;
        let iou = compute_iou_per_class(&from_rows);
        timed += start.elapsed();
        let mut diffs = vec![(macc - o_macc).abs(), (fmiou - o_fmiou).abs()];
        for (c, (a, b)) in iou.iter().zip(&o_iou).enumerate() {
            match (a, b) {
                (Some(a), Some(b)) => diffs.push((a - b).abs()),
                (None, None) => {}
                _ => return Err(format!("trial {trial}: IoU presence differs for class {c}")),
            }
        }
        let d = diffs.into_iter().fold(0.0, f64::max);
        ensure(d <= 1e-12, || format!("trial {trial}: deviation {d:e}"))?;
        worst = worst.max(d);
    }
    let secs = timed.as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("100 matrices ({points_total} points), max deviation {worst:e}, {secs:.2} s"))
}

// ---------------------------------------------------------------------------
// 2. Worked example

fn worked_example() -> Check {
    let cm = ConfusionMatrix::from_rows(&[vec![2, 1], vec![0, 3]], &[0, 0]).map_err(|e| e.to_string())?;
    let macc = compute_macc(&cm).map_err(|e| e.to_string())?;
    let fmiou = compute_fmiou(&cm).map_err(|e| e.to_string())?;
    // Class 0: recall 2/3, IoU 2/3. Class 1: recall 1, IoU 3/4.
    ensure((macc - 0.833333).abs() <= 1e-6 && (macc - 5.0 / 6.0).abs() <= 1e-9, || format!("mAcc {macc}"))?;
    ensure((fmiou - 0.708333).abs() <= 1e-6 && (fmiou - 17.0 / 24.0).abs() <= 1e-9, || {
        format!("f-mIoU {fmiou}")
    })?;
    Ok(format!("mAcc {macc:.6}, f-mIoU {fmiou:.6}"))
}

// ---------------------------------------------------------------------------
// 3 and 4. Report rendering

fn result(method: &str, condition: ConditionKind, macc: f64) -> SegmentationResult {
    SegmentationResult {
        method: method.into(),
        scene_id: "s0".into(),
        condition,
        macc,
        fmiou: macc,
        per_class_iou: vec![],
        class_point_counts: vec![],
        params: AssociationParams {
            radius: 0.05,
            matcher: MatchMode::Exact,
            similarity_threshold: None,
        },
    }
}

/// Renders a report from hand-made segmentation results and returns the
/// Markdown text.
fn render_report(results: &[SegmentationResult]) -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    std::fs::write(dir.join("classes.txt"), "a\n").unwrap();
    std::fs::write(
        dir.join("manifest.toml"),
        "dataset_name = \"table\"\nclass_vocabulary_path = \"classes.txt\"\n\n[[scenes]]\nscene_id = \"s0\"\n\n\
         [[scenes.sequences]]\ncondition = \"baseline\"\ngt_cloud = \"gt.ply\"\n",
    )
    .unwrap();
    let config = write_config(dir, "manifest = \"manifest.toml\"\noutput_dir = \"out\"\n");
    let summary = SegSummary {
        aggregates: aggregate_conditions(results).map_err(|e| e.to_string())?,
        omitted: vec![],
    };
    std::fs::create_dir_all(dir.join("out/seg")).unwrap();
    std::fs::write(dir.join("out/seg/summary.json"), serde_json::to_string_pretty(&summary).unwrap()).unwrap();
    run_cli(&config, &["report"], Env::default()).map_err(|e| format!("{e:#}"))?;
    std::fs::read_to_string(dir.join("out/report/report.md")).map_err(|e| e.to_string())
}

/// Cells of the first table row starting with `method` after `heading`.
fn table_row(md: &str, heading: &str, method: &str) -> Option<Vec<String>> {
    let section = md.split(heading).nth(1)?;
    let header: Vec<String> = section.lines().find(|l| l.starts_with("| Method"))?.split('|').map(|c| c.trim().to_string()).collect();
    let row = section.lines().find(|l| l.starts_with(&format!("| {method} |")))?;
    let cells: Vec<String> = row.split('|').map(|c| c.trim().to_string()).collect();
    // Pair header names with cells so callers can look up by column.
    Some(header.into_iter().zip(cells).map(|(h, c)| format!("{h}={c}")).collect())
}

fn cell(row: &[String], column: &str) -> Option<String> {
    row.iter().find_map(|kv| kv.strip_prefix(&format!("{column}=")).map(String::from))
}

fn degradation_fidelity() -> Check {
    let other = ConditionKind::CameraLight;
    let md = render_report(&[
        result("A", ConditionKind::Baseline, 0.291),
        result("A", other, 0.276),
        result("B", ConditionKind::Baseline, 0.130),
        result("B", other, 0.140),
    ])?;
    let heading = "## Degradation against Baseline: mAcc";
    let mut shown = Vec::new();
    for (method, expected) in [("A", -5.15), ("B", 7.69)] {
        let row = table_row(&md, heading, method).ok_or_else(|| format!("no degradation row for {method}"))?;
        let text = cell(&row, other.title()).ok_or("missing column")?;
        let value: f64 = text.trim_end_matches('%').parse().map_err(|_| format!("unparsable `{text}`"))?;
        ensure((value - expected).abs() <= 0.01, || format!("{method}: shows {text}, expected {expected}%"))?;
        ensure(cell(&row, "Baseline").as_deref() == Some("0.00%"), || format!("{method}: reference column"))?;
        shown.push(text);
    }
    ensure(shown == ["-5.15%", "+7.69%"], || format!("rendered {shown:?}"))?;
    Ok(format!("rendered {} and {}", shown[0], shown[1]))
}

fn aggregation_fidelity() -> Check {
    let values = [0.291, 0.276, 0.260, 0.258, 0.283];
    let results: Vec<_> = ConditionKind::ALL
        .into_iter()
        .zip(values)
        .map(|(c, v)| result("ConceptGraphs", c, v))
        .collect();
    let md = render_report(&results)?;
    let row = table_row(&md, "## Segmentation: mAcc", "ConceptGraphs").ok_or("no ConceptGraphs row")?;
    let got: Vec<String> = ["Min", "Max", "Avg"].iter().map(|c| cell(&row, c).unwrap_or_default()).collect();
    ensure(got == ["0.258", "0.291", "0.274"], || format!("rendered {got:?}"))?;
    Ok(format!("Min {} / Max {} / Avg {}", got[0], got[1], got[2]))
}

// ---------------------------------------------------------------------------
// 5. Association oracle

fn exhaustive_association(gt: &LabeledPointCloud, pred: &LabeledPointCloud, radius: f64) -> Vec<Option<i32>> {
    gt.points
        .iter()
        .map(|g| {
            let mut best: Option<(f64, usize)> = None;
            for (j, p) in pred.points.iter().enumerate() {
                if pred.class_ids[j] < 0 {
                    continue;
                }
                let d = ((g[0] - p[0]).powi(2) + (g[1] - p[1]).powi(2) + (g[2] - p[2]).powi(2)).sqrt();
                if d <= radius && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, j));
                }
            }
            best.map(|(_, j)| pred.class_ids[j])
        })
        .collect()
}

fn association_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xa550c);
    let mut matched = 0usize;
    let mut total = 0usize;
    for trial in 0..100 {
        let n = rng.gen_range(1..=200);
        let m = rng.gen_range(1..=200);
        let point = |rng: &mut ChaCha8Rng| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.5)];
        let gt_pts: Vec<[f64; 3]> = (0..n).map(|_| point(&mut rng)).collect();
        let mut pred_pts: Vec<[f64; 3]> = (0..m).map(|_| point(&mut rng)).collect();
        // Duplicated coordinates exercise tie-breaking.
        for k in 0..m / 10 {
            let src = pred_pts[k];
            let dst = rng.gen_range(0..m);
            pred_pts[dst] = src;
        }
        let gt = LabeledPointCloud::new(gt_pts, (0..n).map(|_| rng.gen_range(0..6)).collect());
        let pred = LabeledPointCloud::new(pred_pts, (0..m).map(|_| rng.gen_range(-1..6)).collect());
        let radius = rng.gen_range(0.02..0.2);
        let fast = associate_points(&gt, &pred, radius).map_err(|e| e.to_string())?;
        let slow = exhaustive_association(&gt, &pred, radius);
        ensure(fast == slow, || format!("trial {trial}: associations differ"))?;
        matched += slow.iter().filter(|s| s.is_some()).count();
        total += n;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("100 pairs, {matched}/{total} GT points matched, {secs:.2} s"))
}

// ---------------------------------------------------------------------------
// 6. VQA determinism (also feeds 10 and 11)

const VQA_STAGES: [&str; 5] = ["qa-gen", "qa-validate", "qa-answer", "qa-eval", "report"];

struct ReplayRun {
    _tmp: tempfile::TempDir,
    out: std::path::PathBuf,
    files: BTreeMap<std::path::PathBuf, Vec<u8>>,
}

fn replay_run(transport: Arc<FailOnUse>) -> Result<ReplayRun, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path().join("out");
    let config = write_config(tmp.path(), &fixture_config_text(&out, true));
    let env = Env {
        transport: Some(transport),
    };
    for stage in VQA_STAGES {
        let code = run_cli(&config, &[stage], env.clone()).map_err(|e| format!("{stage}: {e:#}"))?;
        ensure(code == 0, || format!("{stage} exited with {code}"))?;
    }
    let files = snapshot(&out);
    Ok(ReplayRun { _tmp: tmp, out, files })
}

fn vqa_determinism(transport: &Arc<FailOnUse>) -> Result<(String, ReplayRun), String> {
    let first = replay_run(transport.clone())?;
    let second = replay_run(transport.clone())?;
    ensure(first.files.keys().eq(second.files.keys()), || "runs wrote different file sets".into())?;
    for (path, bytes) in &first.files {
        ensure(second.files[path] == *bytes, || format!("{} differs between runs", path.display()))?;
    }
    let qa_sets = first.files.keys().filter(|p| p.ends_with("qa_set.jsonl")).count();
    ensure(qa_sets == 2, || format!("{qa_sets} QA sets written"))?;
    Ok((format!("{} output files byte-identical across two replay runs", first.files.len()), first))
}

// ---------------------------------------------------------------------------
// 7. Quota

/// Largest remainder on integer per-mille ratios, ties to the lower index.
fn oracle_targets(per_mille: &[u64; 8], n: u64) -> [u64; 8] {
    let mut counts = [0u64; 8];
    let mut rems = Vec::new();
    for (i, r) in per_mille.iter().enumerate() {
        counts[i] = r * n / 1000;
        rems.push(((r * n) % 1000, i));
    }
    let left = n - counts.iter().sum::<u64>();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rems.iter().take(left as usize) {
        counts[i] += 1;
    }
    counts
}

fn quota_fidelity() -> Check {
    let per_mille = [186, 166, 184, 52, 170, 8, 187, 47];
    let q = CategoryQuota::default();
    for (r, pm) in q.ratios().iter().zip(per_mille) {
        ensure((r - pm as f64 / 1000.0).abs() < 1e-12, || format!("default ratio {r} != {pm}/1000"))?;
    }
    for n in [184, 76, 24, 1, 0, 1000] {
        let got: Vec<u64> = q.targets(n).iter().map(|&c| c as u64).collect();
        let want = oracle_targets(&per_mille, n as u64);
        ensure(got == want, || format!("n={n}: {got:?} vs {want:?}"))?;
    }
    let t = q.targets(184);
    let bg = t[QACategory::BinaryGeneral.index()];
    ensure(bg == 34, || format!("BinaryGeneral = {bg}"))?;
    Ok(format!("n=184 gives {t:?} (BinaryGeneral {bg})"))
}

// ---------------------------------------------------------------------------
// 8. Balancing

fn item(idx: usize, object: &str) -> QAItem {
    QAItem {
        qa_id: format!("s-baseline-OA-{idx:03}"),
        category: QACategory::ObjectAttributes,
        question: format!("What color is object {idx}?"),
        gt_answer: "red".into(),
        source_frames: vec![0],
        referenced_objects: vec![object.into()],
        status: QAStatus::Validated,
    }
}

fn balancing_property() -> Check {
    let others = ["chair", "lamp", "door", "table", "plant", "rug", "bed", "desk", "tv", "sink"];
    let items: Vec<QAItem> = (0..10)
        .map(|i| item(i, "sofa"))
        .chain(others.iter().enumerate().map(|(i, o)| item(10 + i, o)))
        .collect();
    let (balanced, report) = balance_questions(&items, 0.3).map_err(|e| e.to_string())?;
    let live: Vec<&QAItem> = balanced.iter().filter(|i| !i.is_rejected()).collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for i in &live {
        for o in &i.referenced_objects {
            *counts.entry(o.as_str()).or_default() += 1;
        }
    }
    let bound = 0.3 + 1.0 / 20.0;
    for (o, c) in &counts {
        let share = *c as f64 / live.len() as f64;
        ensure(share <= bound, || format!("{o} holds {share:.3} of {} items", live.len()))?;
    }
    let sofa = counts.get("sofa").copied().unwrap_or(0);
    Ok(format!(
        "{} of 20 kept, sofa {sofa}/{} = {:.3}, {} removed",
        live.len(),
        live.len(),
        sofa as f64 / live.len() as f64,
        report.removed.len()
    ))
}

// ---------------------------------------------------------------------------
// 9. Exact judging

fn judging_suite() -> Check {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../vqa/tests/fixtures/exact_judging.tsv");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut n = 0;
    let mut saw_fifteen = false;
    for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split('\t').collect();
        let [category, gt, answer, verdict] = cols[..] else {
            return Err(format!("line {}: expected 4 columns", line_no + 1));
        };
        let category: QACategory = category.parse().map_err(|e| format!("line {}: {e}", line_no + 1))?;
        let expected = verdict == "correct";
        let qa = QAItem {
            qa_id: format!("s-baseline-{}-{line_no:03}", category.code()),
            category,
            question: "q".into(),
            gt_answer: gt.into(),
            source_frames: vec![],
            referenced_objects: vec![],
            status: QAStatus::Validated,
        };
        let ans = SystemAnswer {
            qa_id: qa.qa_id.clone(),
            answer: answer.into(),
            answered_by: AnsweredBy::SceneGraphLlm,
        };
        let v = judge_exact(&qa, &ans).map_err(|e| e.to_string())?;
        ensure(v.correct == expected, || format!("line {}: `{gt}` vs `{answer}` judged {}", line_no + 1, v.correct))?;
        if gt == "1" && answer == "15" {
            saw_fifteen = !v.correct;
        }
        n += 1;
    }
    ensure(n == 40, || format!("{n} triples, expected 40"))?;
    ensure(saw_fifteen, || "the 1 vs 15 case is missing".into())?;
    Ok("40/40 agree, `1` vs `15` judged incorrect".into())
}

// ---------------------------------------------------------------------------
// 10. Gateway contract

#[derive(Default)]
struct CountingStub {
    current: AtomicUsize,
    peak: AtomicUsize,
    calls: AtomicUsize,
}

impl Transport for CountingStub {
    fn send(&self, req: &PreparedRequest) -> Result<ChatResponse, TransportError> {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        self.calls.fetch_add(1, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(3));
        self.current.fetch_sub(1, Ordering::SeqCst);
        Ok(ChatResponse::text(format!("ok {}", req.digest)))
    }
}

fn gateway_contract(replay_transport: &FailOnUse) -> Check {
    ensure(replay_transport.calls() == 0, || {
        format!("replay runs reached the transport {} time(s)", replay_transport.calls())
    })?;
    let stub = Arc::new(CountingStub::default());
    let config = GatewayConfig::default();
    let bound = config.max_in_flight;
    let gw = Gateway::new(Mode::Live, Some(stub.clone()), None, config).map_err(|e| e.to_string())?;
    let failures = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for i in 0..100 {
            let gw = &gw;
            let failures = &failures;
            s.spawn(move || {
                let req = ChatRequest::new("stub", vec![Message::user(format!("request {i}"))]);
                if gw.complete(&req).is_err() {
                    failures.fetch_add(1, Ordering::SeqCst);
                }
            });
        }
    });
    let peak = stub.peak.load(Ordering::SeqCst);
    let calls = stub.calls.load(Ordering::SeqCst);
    ensure(failures.load(Ordering::SeqCst) == 0, || "some burst requests failed".into())?;
    ensure(calls == 100, || format!("{calls} transport calls"))?;
    ensure(peak <= bound && gw.stats().peak_in_flight <= bound as u64, || format!("peak {peak} > bound {bound}"))?;
    Ok(format!("replay: 0 transport calls; burst of 100: peak in flight {peak} (bound {bound})"))
}

// ---------------------------------------------------------------------------
// 11. Round trips

fn round_trips(run: &ReplayRun) -> Check {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let mut plys = 0;
    for name in ["canonical_ascii_f32.ply", "canonical_ascii_f64_instances.ply"] {
        let path = fixtures.join(name);
        let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let (cloud, layout) = decode_ply(&bytes, "class_id", &path).map_err(|e| e.to_string())?;
        let again = encode_ply(&cloud, &layout);
        ensure(again == bytes, || format!("{name} changed on re-encoding"))?;
        let (back, _) = decode_ply(&again, "class_id", &path).map_err(|e| e.to_string())?;
        ensure(back == cloud, || format!("{name} reloaded differently"))?;
        plys += 1;
    }
    let mut qa_sets = 0;
    for rel in run.files.keys().filter(|p| p.ends_with("qa_set.jsonl")) {
        let path = run.out.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        let (header, items) = store::load_qa_set(&path).map_err(|e| e.to_string())?;
        let text = store::to_jsonl(&header, &items);
        ensure(text.as_bytes() == bytes.as_slice(), || format!("{} changed on re-store", rel.display()))?;
        let (h2, i2): (store::QaSetHeader, Vec<QAItem>) =
            store::from_jsonl(&text, &path).map_err(|e| e.to_string())?;
        ensure(h2 == header && i2 == items, || format!("{} reloaded differently", rel.display()))?;
        qa_sets += 1;
    }
    ensure(qa_sets > 0, || "no QA set to round-trip".into())?;
    Ok(format!("{plys} PLY fixtures and {qa_sets} QA sets byte-identical"))
}

// ---------------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Check) -> Check {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() {
    let replay_transport = Arc::new(FailOnUse::default());
    let mut replay: Option<ReplayRun> = None;
    let results: Vec<(&str, Check)> = vec![
        ("Metric oracle equivalence", guarded(metric_oracle)),
        ("Worked example fidelity", guarded(worked_example)),
        ("Degradation fidelity", guarded(degradation_fidelity)),
        ("Aggregation fidelity", guarded(aggregation_fidelity)),
        ("Association oracle", guarded(association_oracle)),
        (
            "VQA determinism",
            guarded(|| {
                let (msg, run) = vqa_determinism(&replay_transport)?;
                replay = Some(run);
                Ok(msg)
            }),
        ),
        ("Quota fidelity", guarded(quota_fidelity)),
        ("Balancing property", guarded(balancing_property)),
        ("Judging fixture suite", guarded(judging_suite)),
        ("Gateway contract", guarded(|| gateway_contract(&replay_transport))),
        (
            "Parser round trip",
            guarded(|| round_trips(replay.as_ref().ok_or("needs the VQA determinism run")?)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(detail) => println!("PASS {:>2}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2}. {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
