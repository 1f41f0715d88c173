//! Subcommand implementations. Data-level failures (invalid molecules,
//! non-adherent documents) are results and never change the exit status;
//! only operational failures (missing files, bad config) do.

use crate::config::Config;
use crate::report::{build_report, DocMeta, DocResult};
use anyhow::{anyhow, Context};
use chemval_core::curation::{self, DatasetRecord};
use chemval_core::lora::{self, TargetTag, ToyTrainConfig};
use chemval_core::protocol::{self, FormatProfile};
use chemval_core::routes::{self, Catalog, FeasibilityConfig, Route, RuleTable};
use chemval_core::stats;
use chemval_core::validity;
use rayon::prelude::*;
use serde::Deserialize;
use std::io::Write;
use std::path::{Path, PathBuf};

fn write_output(path: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match path {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            let mut f = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            f.write_all(content.as_bytes())?;
            if !content.ends_with('\n') && !content.is_empty() {
                f.write_all(b"\n")?;
            }
            Ok(())
        }
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

pub fn cmd_validate(input: &Path, output: Option<&Path>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))?;
    let lines: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    let reports: Vec<validity::ValidityReport> =
        lines.par_iter().map(|l| validity::validate(l)).collect();
    let body = reports
        .iter()
        .map(|r| r.to_record().to_string())
        .collect::<Vec<_>>()
        .join("\n");
    write_output(output, &body)?;
    if reports.is_empty() {
        println!("validity: 0/0 (empty input)");
        return Ok(());
    }
    let rate = validity::corpus_validity_rate(&reports)?;
    println!(
        "validity: {}/{} = {:.1}% (95% CI {:.1}%..{:.1}%)",
        rate.successes,
        rate.trials,
        rate.point * 100.0,
        rate.ci_low * 100.0,
        rate.ci_high * 100.0
    );
    Ok(())
}

#[derive(Deserialize)]
struct DocLine {
    id: String,
    text: String,
}

/// Documents from a directory of text files or a JSONL of {id, text}.
fn load_documents(input: &Path) -> anyhow::Result<Vec<(String, String)>> {
    if input.is_dir() {
        let mut docs = Vec::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(input)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("md") | Some("txt")
                )
            })
            .collect();
        paths.sort();
        for path in paths {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("doc")
                .to_string();
            docs.push((id, std::fs::read_to_string(&path)?));
        }
        Ok(docs)
    } else {
        let text = std::fs::read_to_string(input)
            .with_context(|| format!("reading {}", input.display()))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let parsed: DocLine = serde_json::from_str(l)?;
                Ok((parsed.id, parsed.text))
            })
            .collect()
    }
}

fn load_profile(path: Option<&Path>) -> anyhow::Result<FormatProfile> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading profile {}", p.display()))?;
            Ok(FormatProfile::from_config_text(&text))
        }
        None => Ok(FormatProfile::default()),
    }
}

pub fn cmd_format_check(
    input: &Path,
    profile: Option<&Path>,
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let profile = load_profile(profile)?;
    let docs = load_documents(input)?;
    let reports: Vec<(String, protocol::FormatReport)> = docs
        .par_iter()
        .map(|(id, text)| {
            let parsed = protocol::parse_document(text);
            (id.clone(), protocol::check_format(&parsed, &profile))
        })
        .collect();
    let body = reports
        .iter()
        .map(|(id, r)| {
            serde_json::json!({
                "id": id,
                "adherent": r.adherent,
                "failed": r.failed_requirements().iter().map(|q| q.as_str()).collect::<Vec<_>>(),
            })
            .to_string()
        })
        .collect::<Vec<_>>()
        .join("\n");
    write_output(output, &body)?;
    if reports.is_empty() {
        println!("format adherence: 0/0 (no documents)");
        return Ok(());
    }
    let only: Vec<protocol::FormatReport> = reports.into_iter().map(|(_, r)| r).collect();
    let rate = protocol::corpus_adherence_rate(&only)?;
    println!(
        "format adherence: {}/{} = {:.1}% (95% CI {:.1}%..{:.1}%)",
        rate.successes,
        rate.trials,
        rate.point * 100.0,
        rate.ci_low * 100.0,
        rate.ci_high * 100.0
    );
    Ok(())
}

fn load_records(input: &Path) -> anyhow::Result<Vec<DatasetRecord>> {
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str::<DatasetRecord>(l)
                .map_err(|e| anyhow!("{}:{}: {e}", input.display(), i + 1))
        })
        .collect()
}

pub fn cmd_curate(
    input: &Path,
    out_records: &Path,
    out_qc: Option<&Path>,
) -> anyhow::Result<()> {
    let raw = load_records(input)?;
    let prepared: Vec<DatasetRecord> = raw
        .into_par_iter()
        .map(curation::prepare_record)
        .collect::<Result<Vec<_>, _>>()?;
    let qc = curation::quality_control(&prepared);
    let total = prepared.len();
    let (kept, removed) = curation::deduplicate(prepared);
    let body = kept
        .iter()
        .map(curation::emit_instruction_record)
        .collect::<Vec<_>>()
        .join("\n");
    write_output(Some(out_records), &body)?;
    if let Some(qc_path) = out_qc {
        let mut lines: Vec<String> = Vec::new();
        for (check, count) in &qc.counts {
            lines.push(serde_json::json!({"kind": "count", "check": check, "count": count}).to_string());
        }
        for flag in &qc.flags {
            lines.push(serde_json::to_string(flag)?);
        }
        write_output(Some(qc_path), &lines.join("\n"))?;
    }
    println!(
        "curate: {total} records in, {} kept, {removed} duplicates removed, {} QC flags",
        kept.len(),
        qc.flags.len()
    );
    Ok(())
}

pub fn cmd_split(
    input: &Path,
    ratios: (f64, f64, f64),
    seed: u64,
    output: &Path,
) -> anyhow::Result<()> {
    let records = load_records(input)?;
    let prepared: Vec<DatasetRecord> = records
        .into_par_iter()
        .map(|r| {
            if r.key_molecules.is_empty() && r.key_product.is_none() {
                curation::prepare_record(r)
            } else {
                Ok(r)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let assignment = curation::scaffold_split(&prepared, ratios, seed)?;
    let body = assignment
        .splits
        .iter()
        .map(|(id, split)| {
            serde_json::json!({
                "id": id,
                "split": split.as_str(),
                "group": assignment.group_keys.get(id),
            })
            .to_string()
        })
        .collect::<Vec<_>>()
        .join("\n");
    write_output(Some(output), &body)?;
    let counts = assignment.counts();
    let total: usize = counts.values().sum();
    for (split, count) in &counts {
        println!(
            "{}: {count} ({:.2}%)",
            split.as_str(),
            100.0 * *count as f64 / total.max(1) as f64
        );
    }
    for warning in &assignment.warnings {
        println!("warning: {warning}");
    }
    Ok(())
}

fn load_manifest(path: &Path) -> anyhow::Result<Vec<DocMeta>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str::<DocMeta>(l)
                .map_err(|e| anyhow!("{}:{}: {e}", path.display(), i + 1))
        })
        .collect()
}

/// Route sections are fenced blocks tagged `route` in the dedicated line
/// format.
fn extract_route(doc: &protocol::StructuredDoc) -> Option<Result<Route, routes::RouteError>> {
    doc.code_blocks
        .iter()
        .find(|b| b.language.as_deref() == Some("route"))
        .map(|b| Route::parse(&b.content))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_evaluate(
    outputs: &Path,
    manifest: &Path,
    profile: Option<&Path>,
    catalog: Option<&Path>,
    rules: Option<&Path>,
    report_path: &Path,
    config: &Config,
) -> anyhow::Result<()> {
    let profile = load_profile(profile)?;
    let metas = load_manifest(manifest)?;
    if metas.is_empty() {
        return Err(anyhow!("manifest {} lists no documents", manifest.display()));
    }
    let catalog = match catalog {
        Some(p) => Catalog::from_smiles_lines(
            &std::fs::read_to_string(p)
                .with_context(|| format!("reading catalog {}", p.display()))?,
        ),
        None => Catalog::from_smiles_lines(chemval_core::synth::SYNTH_CATALOG),
    };
    let rules = match rules {
        Some(p) => RuleTable::parse(
            &std::fs::read_to_string(p)
                .with_context(|| format!("reading rules {}", p.display()))?,
        )?,
        None => RuleTable::builtin(),
    };
    let feasibility_cfg = FeasibilityConfig {
        max_steps: config.get_parsed("max_steps")?.unwrap_or(12),
        ..Default::default()
    };

    let results: Vec<DocResult> = metas
        .par_iter()
        .map(|meta| -> anyhow::Result<DocResult> {
            let path = outputs.join(&meta.path);
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("document {} missing", path.display()))?;
            let doc = protocol::parse_document(&text);
            let format = protocol::check_format(&doc, &profile);
            let validity_reports: Vec<validity::ValidityReport> = protocol::extract_smiles(&doc)
                .iter()
                .map(|s| validity::validate(s))
                .collect();
            let feasibility = match extract_route(&doc) {
                Some(Ok(route)) => Some(routes::assess_feasibility(
                    &route,
                    Some(&catalog),
                    Some(&rules),
                    &feasibility_cfg,
                )?),
                Some(Err(e)) => Some(routes::FeasibilityReport {
                    reaction_validity: false,
                    reagent_compatibility: false,
                    condition_reasonableness: false,
                    starting_material_availability: false,
                    step_efficiency: false,
                    stereochemical_control: None,
                    protecting_group_strategy: None,
                    feasible: false,
                    flaws: vec![format!("route parse: {e}")],
                }),
                None => None,
            };
            let reasoning = protocol::analyze_reasoning(doc.think_block.as_deref());
            Ok(DocResult {
                meta: meta.clone(),
                format,
                validity: validity_reports,
                feasibility,
                reasoning,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let margin = config.get_parsed("margin")?.unwrap_or(0.05);
    let alpha = config.get_parsed("alpha")?.unwrap_or(0.05);
    let confidence = config.get_parsed("confidence")?.unwrap_or(0.95);
    let report = build_report(&results, margin, alpha, confidence)?;
    write_output(Some(report_path), &report.to_jsonl())?;
    print!("{}", report.render_text());
    Ok(())
}

#[derive(Deserialize)]
struct VerdictLine {
    task: String,
    model: String,
    pass: bool,
}

pub fn cmd_compare(
    verdicts: &Path,
    output: Option<&Path>,
    config: &Config,
) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(verdicts)
        .with_context(|| format!("reading verdicts {}", verdicts.display()))?;
    let mut table = stats::VerdictTable::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: VerdictLine = serde_json::from_str(line)
            .map_err(|e| anyhow!("{}:{}: {e}", verdicts.display(), i + 1))?;
        table.entry(v.model).or_default().insert(v.task, v.pass);
    }
    if table.len() < 2 {
        println!("comparisons: need at least two models, found {}", table.len());
        return Ok(());
    }
    let margin = config.get_parsed("margin")?.unwrap_or(0.05);
    let alpha = config.get_parsed("alpha")?.unwrap_or(0.05);
    let results = stats::compare_models(&table, margin, alpha)?;
    let body = results
        .iter()
        .map(|r| serde_json::to_string(r).unwrap())
        .collect::<Vec<_>>()
        .join("\n");
    write_output(output, &body)?;
    for r in &results {
        println!(
            "{} vs {}: b={} c={} mcnemar={:.4} p={:.4} adj_p={:.4} h={:+.4} tost_equiv={}",
            r.model_a,
            r.model_b,
            r.b_discordant,
            r.c_discordant,
            r.mcnemar_statistic,
            r.mcnemar_p,
            r.adjusted_p,
            r.cohens_h,
            r.tost_equivalent
        );
    }
    Ok(())
}

pub struct LoraDemoArgs {
    pub dim: usize,
    pub rank: usize,
    pub alpha: f64,
    pub samples: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
}

pub fn cmd_lora_demo(args: &LoraDemoArgs, seed: u64, config: &Config) -> anyhow::Result<()> {
    let cfg = ToyTrainConfig {
        epochs: config.get_parsed("epochs")?.unwrap_or(8),
        batch_size: config.get_parsed("batch_size")?.unwrap_or(8),
        learning_rate: config.get_parsed("learning_rate")?.unwrap_or(2e-2),
        weight_decay: config.get_parsed("weight_decay")?.unwrap_or(0.01),
        accumulation_steps: config.get_parsed("accumulation_steps")?.unwrap_or(4),
        warmup_ratio: config.get_parsed("warmup_ratio")?.unwrap_or(0.03),
        seed,
        checkpoint_interval: config.get_parsed("checkpoint_interval")?.unwrap_or(4),
    };
    cfg.validate().map_err(|e| anyhow!("{e}"))?;

    let mut model = lora::ToyModel::new(args.dim, seed);
    model
        .attach_adapters(&TargetTag::all(), args.rank, args.alpha, 0.0, seed ^ 0x5eed)
        .map_err(|e| anyhow!("{e}"))?;
    println!("trainable = {}", model.trainable_parameter_count());
    println!(
        "full fine-tune would update {} parameters",
        model.full_finetune_parameter_count()
    );

    let data = lora::make_toy_dataset(&model, seed.wrapping_add(1), args.samples);
    let eval_len = (args.samples / 8).max(1);
    let (eval, train) = data.split_at(eval_len);

    // Gradient check on a fresh model with B nudged off zero.
    let mut probe = model.clone();
    for adapter in probe.adapters.values_mut() {
        for (i, v) in adapter.b.data.iter_mut().enumerate() {
            *v = ((i % 11) as f64 - 5.0) * 0.02;
        }
    }
    let grad_err = lora::gradient_check(&mut probe, &train[..cfg.batch_size.min(train.len())], 1e-5)
        .map_err(|e| anyhow!("{e}"))?;
    println!("gradient check max relative error = {grad_err:.3e}");

    let before = model.base_bytes();
    let log = lora::train_toy(
        &mut model,
        train,
        eval,
        &cfg,
        &[],
        args.checkpoint_dir.as_deref(),
    )
    .map_err(|e| anyhow!("{e}"))?;
    let frozen = model.base_bytes() == before;
    println!("frozen base intact = {frozen}");
    if let (Some(first), Some(last)) = (log.first_train_loss(), log.last_train_loss()) {
        println!("train loss: {first:.6} -> {last:.6}");
    }
    if let Some(path) = &args.log_path {
        write_output(Some(path), &log.to_jsonl())?;
    }
    if !frozen {
        return Err(anyhow!("base weights changed during training"));
    }
    Ok(())
}

/// Parses "0.85,0.10,0.05".
pub fn parse_ratios(text: &str) -> anyhow::Result<(f64, f64, f64)> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| anyhow!("ratios '{text}': {e}"))?;
    if parts.len() != 3 {
        return Err(anyhow!("ratios need three comma-separated numbers"));
    }
    Ok((parts[0], parts[1], parts[2]))
}

pub fn run_in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}
