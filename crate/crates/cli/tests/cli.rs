//! End-to-end checks through the compiled binary.

use chemval_core::curation::TaskCategory;
use chemval_core::synth;
use std::path::Path;
use std::process::{Command, Output};

fn chemval(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chemval"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn validate_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("mols.smi"), "CCO\nc1ccccc1\nCC(=O)O\n").unwrap();
    let out = chemval(&["validate", "mols.smi", "-o", "reports.jsonl"], dir.path());
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("3/3"));
    let reports = std::fs::read_to_string(dir.path().join("reports.jsonl")).unwrap();
    assert_eq!(reports.trim().lines().count(), 3);
}

#[test]
fn validate_invalid_data_is_not_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("mols.smi"), "C(C\nCCO\n").unwrap();
    let out = chemval(&["validate", "mols.smi", "-o", "r.jsonl"], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("1/2"));
    let reports = std::fs::read_to_string(dir.path().join("r.jsonl")).unwrap();
    assert!(reports.contains("mismatched_brackets"));
}

#[test]
fn validate_missing_file_is_operational_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = chemval(&["validate", "no-such-file.smi"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn format_check_directory() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs");
    std::fs::create_dir(&docs).unwrap();
    std::fs::write(docs.join("a.md"), synth::compliant_document("CCO")).unwrap();
    std::fs::write(
        docs.join("b.md"),
        synth::violating_document(synth::DocViolation::MissingSummary, "CCO"),
    )
    .unwrap();
    let out = chemval(&["format-check", "docs", "-o", "fmt.jsonl"], dir.path());
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("1/2"));
    let lines = std::fs::read_to_string(dir.path().join("fmt.jsonl")).unwrap();
    assert!(lines.contains("section_headers"));
}

fn record_line(id: &str, category: &str, instruction: &str, mol: &str) -> String {
    serde_json::json!({
        "id": id,
        "task_category": category,
        "instruction": instruction,
        "input": "",
        "output": "",
        "molecules": [mol],
    })
    .to_string()
}

#[test]
fn curate_reports_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = [
        record_line("1", "property_prediction", "predict logp", "CCO"),
        record_line("2", "property_prediction", "predict logp", "OCC"),
        record_line("3", "property_prediction", "predict tpsa", "c1ccccc1"),
    ]
    .join("\n");
    std::fs::write(dir.path().join("corpus.jsonl"), corpus).unwrap();
    let out = chemval(
        &[
            "curate",
            "corpus.jsonl",
            "--out-records",
            "records.jsonl",
            "--out-qc",
            "qc.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("1 duplicates removed"));
    let emitted = std::fs::read_to_string(dir.path().join("records.jsonl")).unwrap();
    assert_eq!(emitted.trim().lines().count(), 2);
    let first = emitted.lines().next().unwrap();
    let i = first.find("\"instruction\"").unwrap();
    let j = first.find("\"input\"").unwrap();
    let k = first.find("\"output\"").unwrap();
    assert!(i < j && j < k, "field order wrong: {first}");
}

#[test]
fn split_matches_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    for i in 0..6 {
        lines.push(record_line(
            &format!("a{i}"),
            "property_prediction",
            &format!("task {i}"),
            "Cc1ccccc1",
        ));
    }
    for i in 0..3 {
        lines.push(record_line(
            &format!("b{i}"),
            "property_prediction",
            &format!("task {i}"),
            "CC1CCNCC1",
        ));
    }
    lines.push(record_line("c0", "property_prediction", "task", "CC1CCCCC1C"));
    std::fs::write(dir.path().join("corpus.jsonl"), lines.join("\n")).unwrap();
    let out = chemval(
        &["split", "corpus.jsonl", "-o", "manifest.jsonl"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("train: 9"), "{text}");
    assert!(text.contains("validation: 1"), "{text}");
    assert!(text.contains("test: 0"), "{text}");
    assert!(text.contains("warning"), "{text}");

    // Byte-identical on rerun.
    let first = std::fs::read(dir.path().join("manifest.jsonl")).unwrap();
    let out = chemval(
        &["split", "corpus.jsonl", "-o", "manifest2.jsonl"],
        dir.path(),
    );
    assert!(out.status.success());
    let second = std::fs::read(dir.path().join("manifest2.jsonl")).unwrap();
    assert_eq!(first, second);
}

/// Two synthetic models over eight shared tasks: model-a emits valid
/// structures everywhere, model-b breaks tasks 7 and 8, so the validity
/// comparison must carry b=2, c=0.
#[test]
fn evaluate_reproduces_discordant_counts() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = dir.path().join("outputs");
    std::fs::create_dir(&outputs).unwrap();
    let mut manifest = Vec::new();
    for model in ["model-a", "model-b"] {
        for task in 1..=8 {
            let mol = if model == "model-b" && task >= 7 {
                "C(C)(C)(C)(C)C" // five-bond carbon
            } else {
                "CCO"
            };
            let name = format!("{model}-t{task}.md");
            std::fs::write(outputs.join(&name), synth::compliant_document(mol)).unwrap();
            manifest.push(
                serde_json::json!({
                    "id": format!("{model}-t{task}"),
                    "model": model,
                    "task_id": format!("t{task}"),
                    "task_category": "property_prediction",
                    "difficulty": 1,
                    "path": name,
                })
                .to_string(),
            );
        }
    }
    std::fs::write(dir.path().join("manifest.jsonl"), manifest.join("\n")).unwrap();
    let out = chemval(
        &[
            "evaluate",
            "--outputs",
            "outputs",
            "--manifest",
            "manifest.jsonl",
            "--report",
            "report.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let report = std::fs::read_to_string(dir.path().join("report.jsonl")).unwrap();
    let comparison = report
        .lines()
        .find(|l| l.contains("\"comparison\"") && l.contains("chemical_validity"))
        .expect("validity comparison present");
    let v: serde_json::Value = serde_json::from_str(comparison).unwrap();
    assert_eq!(v["result"]["b_discordant"], 2, "{comparison}");
    assert_eq!(v["result"]["c_discordant"], 0);
    assert_eq!(v["result"]["shared_tasks"], 8);
    // Self-consistency: overall = weighted mean over categories, and the
    // report is deterministic.
    let out2 = chemval(
        &[
            "evaluate",
            "--outputs",
            "outputs",
            "--manifest",
            "manifest.jsonl",
            "--report",
            "report2.jsonl",
        ],
        dir.path(),
    );
    assert!(out2.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("report.jsonl")).unwrap(),
        std::fs::read(dir.path().join("report2.jsonl")).unwrap()
    );
}

#[test]
fn evaluate_single_model_has_no_comparisons() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = dir.path().join("outputs");
    std::fs::create_dir(&outputs).unwrap();
    std::fs::write(outputs.join("only.md"), synth::compliant_document("CCO")).unwrap();
    let manifest = serde_json::json!({
        "id": "only", "model": "solo", "task_id": "t1",
        "task_category": "property_prediction", "path": "only.md",
    })
    .to_string();
    std::fs::write(dir.path().join("manifest.jsonl"), manifest).unwrap();
    let out = chemval(
        &[
            "evaluate",
            "--outputs",
            "outputs",
            "--manifest",
            "manifest.jsonl",
            "--report",
            "report.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let report = std::fs::read_to_string(dir.path().join("report.jsonl")).unwrap();
    assert!(!report.contains("\"comparison\""));
}

#[test]
fn evaluate_missing_metadata_fails() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = dir.path().join("outputs");
    std::fs::create_dir(&outputs).unwrap();
    std::fs::write(dir.path().join("manifest.jsonl"), "").unwrap();
    let out = chemval(
        &[
            "evaluate",
            "--outputs",
            "outputs",
            "--manifest",
            "manifest.jsonl",
            "--report",
            "r.jsonl",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
}

#[test]
fn evaluate_scores_routes() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = dir.path().join("outputs");
    std::fs::create_dir(&outputs).unwrap();
    let mut manifest = Vec::new();
    for (i, feasible) in [true, true, false].iter().enumerate() {
        let doc = format!(
            "{}\n{}",
            synth::compliant_document("CC(=O)O"),
            synth::route_block(*feasible)
        );
        let name = format!("route-{i}.md");
        std::fs::write(outputs.join(&name), doc).unwrap();
        manifest.push(
            serde_json::json!({
                "id": format!("route-{i}"), "model": "model-a",
                "task_id": format!("r{i}"), "task_category": "retrosynthesis",
                "path": name,
            })
            .to_string(),
        );
    }
    std::fs::write(dir.path().join("manifest.jsonl"), manifest.join("\n")).unwrap();
    let out = chemval(
        &[
            "evaluate",
            "--outputs",
            "outputs",
            "--manifest",
            "manifest.jsonl",
            "--report",
            "report.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let report = std::fs::read_to_string(dir.path().join("report.jsonl")).unwrap();
    let row = report
        .lines()
        .find(|l| l.contains("synthesis_feasibility") && l.contains("overall"))
        .expect("feasibility row");
    let v: serde_json::Value = serde_json::from_str(row).unwrap();
    assert_eq!(v["successes"], 2);
    assert_eq!(v["trials"], 3);
}

#[test]
fn compare_from_verdict_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    for task in 1..=8 {
        lines.push(
            serde_json::json!({"task": format!("t{task}"), "model": "model-a", "pass": true})
                .to_string(),
        );
        lines.push(
            serde_json::json!({"task": format!("t{task}"), "model": "model-b", "pass": task <= 6})
                .to_string(),
        );
    }
    std::fs::write(dir.path().join("verdicts.jsonl"), lines.join("\n")).unwrap();
    let out = chemval(
        &["compare", "verdicts.jsonl", "-o", "cmp.jsonl"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("b=2 c=0"), "{text}");
}

#[test]
fn lora_demo_prints_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let out = chemval(
        &[
            "lora-demo",
            "--dim",
            "16",
            "--rank",
            "4",
            "--samples",
            "64",
            "--checkpoint-dir",
            "ckpt",
            "--log",
            "train.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    // 4 adapters x 4 x (16 + 16).
    assert!(text.contains("trainable = 512"), "{text}");
    assert!(text.contains("frozen base intact = true"), "{text}");
    let err_line = text
        .lines()
        .find(|l| l.contains("gradient check"))
        .expect("gradient check line");
    let err: f64 = err_line
        .split('=')
        .next_back()
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(err < 1e-6, "gradient error {err}");
    assert!(dir.path().join("ckpt/manifest.json").exists());
    assert!(dir.path().join("train.jsonl").exists());
}

/// A 500-document synthetic corpus at 96.3%-ish adherence: the overall
/// format row must come out with a half-width near 1.7 percentage points,
/// and the overall rate must equal the task-count-weighted mean of the
/// category rates.
#[test]
fn evaluate_500_doc_adherence_row() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = dir.path().join("outputs");
    std::fs::create_dir(&outputs).unwrap();
    let mut manifest = Vec::new();
    let violations = synth::DocViolation::all();
    for i in 0..500 {
        // 482 compliant, 18 violating: 482/500 = 96.4%.
        let text = if i < 482 {
            synth::compliant_document("CCO")
        } else {
            synth::violating_document(violations[i % violations.len()], "CCO")
        };
        let category = if i % 3 == 0 {
            "property_prediction"
        } else {
            "structure_optimization"
        };
        let name = format!("doc-{i:03}.md");
        std::fs::write(outputs.join(&name), text).unwrap();
        manifest.push(
            serde_json::json!({
                "id": format!("doc-{i:03}"), "model": "model-a",
                "task_id": format!("t{i}"), "task_category": category,
                "path": name,
            })
            .to_string(),
        );
    }
    std::fs::write(dir.path().join("manifest.jsonl"), manifest.join("\n")).unwrap();
    let out = chemval(
        &[
            "evaluate",
            "--outputs",
            "outputs",
            "--manifest",
            "manifest.jsonl",
            "--report",
            "report.jsonl",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let report = std::fs::read_to_string(dir.path().join("report.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = report
        .lines()
        .filter(|l| l.contains("\"rate\"") && l.contains("format_adherence"))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let overall = rows
        .iter()
        .find(|r| r["category"] == "overall")
        .expect("overall row");
    assert_eq!(overall["trials"], 500);
    assert_eq!(overall["successes"], 482);
    let est = &overall["estimate"];
    let half_width =
        (est["ci_high"].as_f64().unwrap() - est["ci_low"].as_f64().unwrap()) / 2.0;
    assert!(
        (0.015..=0.019).contains(&half_width),
        "half-width {half_width}"
    );
    // Overall equals the task-count-weighted mean of the category rates.
    let (mut successes, mut trials) = (0u64, 0u64);
    for row in rows.iter().filter(|r| r["category"] != "overall") {
        successes += row["successes"].as_u64().unwrap();
        trials += row["trials"].as_u64().unwrap();
    }
    assert_eq!(successes, 482);
    assert_eq!(trials, 500);
}

#[test]
fn lora_demo_default_dim64_rank16() {
    let dir = tempfile::tempdir().unwrap();
    let out = chemval(&["lora-demo", "--samples", "64"], dir.path());
    assert!(out.status.success(), "{out:?}");
    // 4 x 16 x (64 + 64) = 8192.
    assert!(stdout(&out).contains("trainable = 8192"), "{}", stdout(&out));
}
