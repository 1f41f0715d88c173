//! Rule-based parsing of model-output documents and format-adherence
//! checking: think blocks, markdown structure, fenced SMILES blocks, lists,
//! tables, JSON-ish braces, and chemical-equation arrows, plus lexical
//! analysis of reasoning traces.

use crate::molgraph::parse_smiles;
use crate::stats::{RateEstimate, StatsError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub level: usize,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeBlock {
    pub language: Option<String>,
    pub content: String,
    /// Byte span of the whole fence in the source.
    pub span: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ListStyle {
    Bullet,
    Numbered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocList {
    pub items: Vec<(ListStyle, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocTable {
    pub column_counts: Vec<usize>,
    pub rows: usize,
    pub aligned: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DocDefect {
    UnterminatedFence { language: Option<String>, at: usize },
    UnterminatedThink,
    ThinkAfterContent,
}

/// Parsed model-output document. Parsing is total: malformed constructs are
/// recorded as defects, never errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct StructuredDoc {
    pub think_block: Option<String>,
    pub think_first: bool,
    pub sections: Vec<Section>,
    pub code_blocks: Vec<CodeBlock>,
    pub lists: Vec<DocList>,
    pub tables: Vec<DocTable>,
    pub defects: Vec<DocDefect>,
    /// (lhs non-empty, rhs non-empty) per arrow-bearing line.
    pub equation_lines: Vec<(bool, bool)>,
    /// Balanced flag per brace-delimited candidate (json fences and inline).
    pub brace_candidates: Vec<bool>,
    /// Lines with unbalanced emphasis markers.
    pub emphasis_issues: Vec<usize>,
    /// Whether any emphasis markers appear at all.
    pub has_emphasis: bool,
}

pub fn parse_document(text: &str) -> StructuredDoc {
    let mut doc = StructuredDoc::default();

    // Think block: first <think>...</think> pair.
    let mut body = text.to_string();
    if let Some(open) = text.find("<think>") {
        let prefix = &text[..open];
        let think_first = prefix.trim().is_empty();
        match text[open + 7..].find("</think>") {
            Some(rel_close) => {
                let content = &text[open + 7..open + 7 + rel_close];
                doc.think_block = Some(content.trim().to_string());
                doc.think_first = think_first;
                if !think_first {
                    doc.defects.push(DocDefect::ThinkAfterContent);
                }
                // Blank the think region so its internals do not count as
                // document structure.
                let mut replaced = String::new();
                replaced.push_str(prefix);
                for c in text[open..open + 7 + rel_close + 8].chars() {
                    replaced.push(if c == '\n' { '\n' } else { ' ' });
                }
                replaced.push_str(&text[open + 7 + rel_close + 8..]);
                body = replaced;
            }
            None => {
                doc.defects.push(DocDefect::UnterminatedThink);
            }
        }
    }

    // Fenced code blocks.
    let mut fence_spans: Vec<(usize, usize)> = Vec::new();
    {
        let mut offset = 0;
        let mut open: Option<(usize, Option<String>, usize)> = None; // (start, lang, content_start)
        for line in body.split_inclusive('\n') {
            let trimmed = line.trim_end_matches('\n').trim();
            if let Some(rest) = trimmed.strip_prefix("```") {
                match open.take() {
                    None => {
                        let lang = rest.trim();
                        let lang = if lang.is_empty() {
                            None
                        } else {
                            Some(lang.to_string())
                        };
                        open = Some((offset, lang, offset + line.len()));
                    }
                    Some((start, lang, content_start)) => {
                        doc.code_blocks.push(CodeBlock {
                            language: lang,
                            content: body[content_start..offset].to_string(),
                            span: (start, offset + line.len()),
                        });
                        fence_spans.push((start, offset + line.len()));
                    }
                }
            }
            offset += line.len();
        }
        if let Some((start, language, _)) = open {
            doc.defects.push(DocDefect::UnterminatedFence {
                language,
                at: start,
            });
            // Everything after an unterminated fence is opaque; mask it so a
            // stray "## Summary" inside does not count as structure.
            fence_spans.push((start, body.len()));
        }
    }
    let in_fence =
        |pos: usize| -> bool { fence_spans.iter().any(|&(s, e)| pos >= s && pos < e) };

    // Line-level structure outside fences.
    let mut offset = 0;
    let mut current_list: Vec<(ListStyle, String)> = Vec::new();
    let mut current_table: Vec<usize> = Vec::new();
    let mut section_starts: Vec<(usize, usize, String)> = Vec::new(); // (level, offset, title)
    for (lineno, line) in body.split_inclusive('\n').enumerate() {
        let raw = line.trim_end_matches('\n');
        let line_start = offset;
        offset += line.len();
        if in_fence(line_start) {
            continue;
        }
        let trimmed = raw.trim_start();

        // Headers.
        if trimmed.starts_with('#') {
            let level = trimmed.chars().take_while(|&c| c == '#').count();
            let title = trimmed[level..].trim().to_string();
            if trimmed.chars().nth(level) == Some(' ') || trimmed.len() == level {
                section_starts.push((level, line_start, title));
            }
        }

        // Lists: contiguous item lines form one list.
        let item_style = list_item_style(trimmed);
        match item_style {
            Some((style, text)) => current_list.push((style, text.to_string())),
            None => {
                if !trimmed.is_empty() && !current_list.is_empty() || trimmed.is_empty() {
                    flush_list(&mut doc, &mut current_list);
                }
            }
        }

        // Pipe tables: contiguous |...| lines form one table.
        if trimmed.starts_with('|') && trimmed.len() > 1 {
            let cells = trimmed
                .trim_matches('|')
                .split('|')
                .count();
            let is_separator = trimmed
                .chars()
                .all(|c| matches!(c, '|' | '-' | ':' | ' '));
            if !is_separator {
                current_table.push(cells);
            }
        } else if !current_table.is_empty() {
            let aligned = current_table.windows(2).all(|w| w[0] == w[1]);
            doc.tables.push(DocTable {
                column_counts: current_table.clone(),
                rows: current_table.len(),
                aligned,
            });
            current_table.clear();
        }

        // Chemical-equation arrows.
        for arrow in ["->", "→"] {
            if let Some(pos) = raw.find(arrow) {
                let lhs = !raw[..pos].trim().is_empty();
                let rhs = !raw[pos + arrow.len()..].trim().is_empty();
                doc.equation_lines.push((lhs, rhs));
                break;
            }
        }

        // Emphasis balance per line: ** pairs, then remaining * pairs
        // (ignoring a leading bullet marker).
        let for_emphasis = match item_style {
            Some((ListStyle::Bullet, rest)) => rest,
            _ => trimmed,
        };
        let double = for_emphasis.matches("**").count();
        let singles = for_emphasis.replace("**", "").matches('*').count();
        if double > 0 || singles > 0 {
            doc.has_emphasis = true;
        }
        if double % 2 != 0 || singles % 2 != 0 {
            doc.emphasis_issues.push(lineno + 1);
        }
    }
    flush_list(&mut doc, &mut current_list);
    if !current_table.is_empty() {
        let aligned = current_table.windows(2).all(|w| w[0] == w[1]);
        doc.tables.push(DocTable {
            column_counts: current_table.clone(),
            rows: current_table.len(),
            aligned,
        });
    }

    // Sections: header to next header.
    for (i, (level, start, title)) in section_starts.iter().enumerate() {
        let end = section_starts
            .get(i + 1)
            .map(|(_, s, _)| *s)
            .unwrap_or(body.len());
        let body_text = body[*start..end]
            .lines()
            .skip(1)
            .collect::<Vec<_>>()
            .join("\n");
        doc.sections.push(Section {
            level: *level,
            title: title.clone(),
            body: body_text.trim().to_string(),
        });
    }

    // Brace candidates: json-tagged fences plus inline brace spans.
    for block in &doc.code_blocks {
        if block.language.as_deref() == Some("json") {
            doc.brace_candidates.push(braces_balance(&block.content));
        }
    }
    let mut depth = 0i64;
    let mut any_open = false;
    for (pos, c) in body.char_indices() {
        if in_fence(pos) {
            continue;
        }
        match c {
            '{' => {
                depth += 1;
                any_open = true;
            }
            '}' => depth -= 1,
            _ => {}
        }
    }
    if any_open || depth != 0 {
        doc.brace_candidates.push(depth == 0);
    }

    doc
}

fn list_item_style(trimmed: &str) -> Option<(ListStyle, &str)> {
    if let Some(rest) = trimmed
        .strip_prefix("- ")
        .or_else(|| trimmed.strip_prefix("* "))
        .or_else(|| trimmed.strip_prefix("+ "))
    {
        return Some((ListStyle::Bullet, rest));
    }
    let digits = trimmed.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &trimmed[digits..];
        if let Some(text) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return Some((ListStyle::Numbered, text));
        }
    }
    None
}

fn flush_list(doc: &mut StructuredDoc, items: &mut Vec<(ListStyle, String)>) {
    if !items.is_empty() {
        doc.lists.push(DocList {
            items: std::mem::take(items),
        });
    }
}

fn braces_balance(text: &str) -> bool {
    let mut depth = 0i64;
    for c in text.chars() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

/// The seven format requirements tracked per output.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    SectionHeaders,
    SmilesCodeBlocks,
    MarkdownFormatting,
    BulletedLists,
    TabularData,
    JsonStructures,
    ChemicalEquations,
}

impl Requirement {
    pub fn all() -> [Requirement; 7] {
        [
            Requirement::SectionHeaders,
            Requirement::SmilesCodeBlocks,
            Requirement::MarkdownFormatting,
            Requirement::BulletedLists,
            Requirement::TabularData,
            Requirement::JsonStructures,
            Requirement::ChemicalEquations,
        ]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Requirement::SectionHeaders => "section_headers",
            Requirement::SmilesCodeBlocks => "smiles_code_blocks",
            Requirement::MarkdownFormatting => "markdown_formatting",
            Requirement::BulletedLists => "bulleted_lists",
            Requirement::TabularData => "tabular_data",
            Requirement::JsonStructures => "json_structures",
            Requirement::ChemicalEquations => "chemical_equations",
        }
    }
}

/// Which requirements are mandatory for a corpus. The default mirrors the
/// evaluation template: a leading think block, SMILES fences for molecules,
/// and a final Summary section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatProfile {
    pub mandatory: BTreeSet<Requirement>,
}

impl Default for FormatProfile {
    fn default() -> Self {
        FormatProfile {
            mandatory: [Requirement::SectionHeaders, Requirement::SmilesCodeBlocks]
                .into_iter()
                .collect(),
        }
    }
}

impl FormatProfile {
    /// Flat key=value text: `mandatory = section_headers, smiles_code_blocks`.
    pub fn from_config_text(text: &str) -> FormatProfile {
        let mut mandatory = BTreeSet::new();
        for line in text.lines() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("mandatory") {
                if let Some((_, names)) = rest.split_once('=') {
                    for name in names.split(',') {
                        for req in Requirement::all() {
                            if req.as_str() == name.trim() {
                                mandatory.insert(req);
                            }
                        }
                    }
                }
            }
        }
        if mandatory.is_empty() {
            FormatProfile::default()
        } else {
            FormatProfile { mandatory }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail(String),
    NotApplicable,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
    pub fn failed(&self) -> bool {
        matches!(self, Verdict::Fail(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatReport {
    pub verdicts: BTreeMap<Requirement, Verdict>,
    pub adherent: bool,
}

impl FormatReport {
    pub fn failed_requirements(&self) -> Vec<Requirement> {
        self.verdicts
            .iter()
            .filter(|(_, v)| v.failed())
            .map(|(r, _)| *r)
            .collect()
    }
}

fn looks_like_smiles(line: &str) -> bool {
    let line = line.trim();
    if line.is_empty() || line.contains(char::is_whitespace) {
        return false;
    }
    match parse_smiles(line) {
        Ok(g) => g.atoms.len() >= 2,
        Err(_) => false,
    }
}

/// Judges each requirement against the document. Requirements that are
/// neither mandated nor present are recorded as not applicable and excluded
/// from the adherence conjunction.
pub fn check_format(doc: &StructuredDoc, profile: &FormatProfile) -> FormatReport {
    let mut verdicts = BTreeMap::new();
    for req in Requirement::all() {
        let mandated = profile.mandatory.contains(&req);
        let verdict = judge(doc, req, mandated);
        verdicts.insert(req, verdict);
    }
    let adherent = verdicts.values().all(|v| !v.failed());
    FormatReport { verdicts, adherent }
}

fn judge(doc: &StructuredDoc, req: Requirement, mandated: bool) -> Verdict {
    use Requirement::*;
    match req {
        SectionHeaders => {
            let applicable =
                mandated || !doc.sections.is_empty() || doc.think_block.is_some();
            if !applicable {
                return Verdict::NotApplicable;
            }
            if doc.think_block.is_none() {
                return Verdict::Fail("missing think block".into());
            }
            if !doc.think_first {
                return Verdict::Fail("think block does not come first".into());
            }
            if doc.defects.contains(&DocDefect::UnterminatedThink) {
                return Verdict::Fail("unterminated think block".into());
            }
            if !doc.sections.iter().any(|s| s.level == 2) {
                return Verdict::Fail("no level-2 section headers".into());
            }
            match doc.sections.last() {
                Some(s) if s.title.eq_ignore_ascii_case("summary") => Verdict::Pass,
                _ => Verdict::Fail("last section is not Summary".into()),
            }
        }
        SmilesCodeBlocks => {
            let smiles_fences: Vec<&CodeBlock> = doc
                .code_blocks
                .iter()
                .filter(|b| b.language.as_deref() == Some("smiles"))
                .collect();
            let unterminated_smiles = doc.defects.iter().any(|d| {
                matches!(d, DocDefect::UnterminatedFence { language, .. }
                    if language.as_deref() == Some("smiles"))
            });
            let stray = doc.code_blocks.iter().any(|b| {
                b.language.as_deref() != Some("smiles")
                    && b.content.lines().any(looks_like_smiles)
            });
            let applicable = mandated || !smiles_fences.is_empty() || unterminated_smiles;
            if !applicable {
                return Verdict::NotApplicable;
            }
            if unterminated_smiles {
                return Verdict::Fail("unterminated smiles fence".into());
            }
            if mandated && stray {
                return Verdict::Fail("molecule outside a smiles-tagged fence".into());
            }
            if smiles_fences.iter().any(|b| b.content.trim().is_empty()) {
                return Verdict::Fail("empty smiles fence".into());
            }
            Verdict::Pass
        }
        MarkdownFormatting => {
            if !doc.emphasis_issues.is_empty() {
                return Verdict::Fail(format!(
                    "unbalanced emphasis on line(s) {:?}",
                    doc.emphasis_issues
                ));
            }
            if mandated || doc.has_emphasis {
                Verdict::Pass
            } else {
                Verdict::NotApplicable
            }
        }
        BulletedLists => {
            if doc.lists.is_empty() {
                return if mandated {
                    Verdict::Fail("no lists present".into())
                } else {
                    Verdict::NotApplicable
                };
            }
            for list in &doc.lists {
                let mixed = list
                    .items
                    .windows(2)
                    .any(|w| w[0].0 != w[1].0);
                if mixed {
                    return Verdict::Fail("mixed numbering and bullet styles in one list".into());
                }
            }
            Verdict::Pass
        }
        TabularData => {
            if doc.tables.is_empty() {
                return if mandated {
                    Verdict::Fail("no tables present".into())
                } else {
                    Verdict::NotApplicable
                };
            }
            if doc.tables.iter().all(|t| t.aligned) {
                Verdict::Pass
            } else {
                Verdict::Fail("table with varying column counts".into())
            }
        }
        JsonStructures => {
            if doc.brace_candidates.is_empty() {
                return if mandated {
                    Verdict::Fail("no JSON structures present".into())
                } else {
                    Verdict::NotApplicable
                };
            }
            if doc.brace_candidates.iter().all(|b| *b) {
                Verdict::Pass
            } else {
                Verdict::Fail("unbalanced braces".into())
            }
        }
        ChemicalEquations => {
            if doc.equation_lines.is_empty() {
                return if mandated {
                    Verdict::Fail("no chemical equations present".into())
                } else {
                    Verdict::NotApplicable
                };
            }
            if doc.equation_lines.iter().all(|&(l, r)| l && r) {
                Verdict::Pass
            } else {
                Verdict::Fail("equation arrow with an empty side".into())
            }
        }
    }
}

/// Contents of closed `smiles`-tagged fences, one candidate per non-empty
/// line, in document order.
pub fn extract_smiles(doc: &StructuredDoc) -> Vec<String> {
    doc.code_blocks
        .iter()
        .filter(|b| b.language.as_deref() == Some("smiles"))
        .flat_map(|b| {
            b.content
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    High,
    Moderate,
    Low,
    Unstated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub step_count: usize,
    pub confidence: Confidence,
    pub factual_claims: usize,
}

const LOW_MARKERS: [&str; 4] = ["uncertain", "unclear", "cannot determine", "unsure"];
const MODERATE_MARKERS: [&str; 5] = ["might", "may", "possibly", "could", "uncertainty"];
const HIGH_MARKERS: [&str; 4] = ["clearly", "reliably", "will", "is optimal"];
const TRANSITION_MARKERS: [&str; 8] = [
    "First", "Next", "Then", "Therefore", "However", "Examining", "To", "Instead",
];

fn contains_marker(text_lower: &str, marker: &str) -> bool {
    let mut start = 0;
    while let Some(pos) = text_lower[start..].find(marker) {
        let abs = start + pos;
        let before_ok = abs == 0
            || !text_lower[..abs]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_alphanumeric());
        let after = abs + marker.len();
        let after_ok = after >= text_lower.len()
            || !text_lower[after..]
                .chars()
                .next()
                .is_some_and(|c| c.is_alphanumeric());
        if before_ok && after_ok {
            return true;
        }
        start = abs + marker.len();
    }
    false
}

/// Lexical analysis of a think block: enumerated items plus
/// transition-marker sentences count as steps; confidence is the
/// highest-priority bucket that matches (low beats moderate beats high).
pub fn analyze_reasoning(think: Option<&str>) -> ReasoningTrace {
    let Some(text) = think else {
        return ReasoningTrace {
            step_count: 0,
            confidence: Confidence::Unstated,
            factual_claims: 0,
        };
    };
    if text.trim().is_empty() {
        return ReasoningTrace {
            step_count: 0,
            confidence: Confidence::Unstated,
            factual_claims: 0,
        };
    }

    let mut step_count = 0usize;
    let mut prose = String::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if list_item_style(trimmed).is_some() {
            step_count += 1;
        } else {
            prose.push_str(trimmed);
            prose.push('\n');
        }
    }
    let sentences: Vec<&str> = prose
        .split(|c: char| matches!(c, '.' | '!' | '?'))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    for sentence in &sentences {
        let first_word: String = sentence
            .chars()
            .take_while(|c| c.is_alphanumeric())
            .collect();
        if TRANSITION_MARKERS.contains(&first_word.as_str()) {
            step_count += 1;
        }
    }

    let lower = text.to_lowercase();
    let confidence = if LOW_MARKERS.iter().any(|m| contains_marker(&lower, m)) {
        Confidence::Low
    } else if MODERATE_MARKERS.iter().any(|m| contains_marker(&lower, m)) {
        Confidence::Moderate
    } else if HIGH_MARKERS.iter().any(|m| contains_marker(&lower, m)) {
        Confidence::High
    } else {
        Confidence::Unstated
    };

    // Declarative sentences: full-stop-terminated prose sentences.
    let factual_claims = prose
        .split('.')
        .map(str::trim)
        .filter(|s| !s.is_empty() && !s.ends_with('?') && !s.ends_with('!'))
        .filter(|s| s.split_whitespace().count() >= 2)
        .count();

    ReasoningTrace {
        step_count,
        confidence,
        factual_claims,
    }
}

/// Proportion of adherent reports with a 95% Wilson interval.
pub fn corpus_adherence_rate(reports: &[FormatReport]) -> Result<RateEstimate, StatsError> {
    if reports.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let adherent = reports.iter().filter(|r| r.adherent).count() as u64;
    RateEstimate::from_counts(adherent, reports.len() as u64, 0.95)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: &str = "<think>\n1. Identify the scaffold.\n2. Weigh substituents.\n</think>\n\n## Molecular Design\n\nThe polar group improves solubility.\n\n```smiles\nCCO\n```\n\n- Improved solubility\n- Retained potency\n\n## Summary\n\nDone.\n";

    #[test]
    fn golden_doc_parses() {
        let doc = parse_document(GOLDEN);
        assert!(doc.think_block.is_some());
        assert!(doc.think_first);
        assert!(doc.sections.len() >= 2);
        assert_eq!(doc.code_blocks.len(), 1);
        assert_eq!(doc.lists.len(), 1);
        assert!(doc.defects.is_empty());
    }

    #[test]
    fn golden_doc_adheres() {
        let report = check_format(&parse_document(GOLDEN), &FormatProfile::default());
        assert!(report.adherent, "{report:?}");
    }

    #[test]
    fn unterminated_fence_recorded_not_crashed() {
        let text = "## Summary\n\n```smiles\nCCO\n";
        let doc = parse_document(text);
        assert!(doc.code_blocks.is_empty());
        assert!(matches!(
            doc.defects[0],
            DocDefect::UnterminatedFence { .. }
        ));
    }

    #[test]
    fn empty_string_yields_empty_doc() {
        let doc = parse_document("");
        assert!(doc.think_block.is_none());
        assert!(doc.sections.is_empty());
        assert!(doc.code_blocks.is_empty());
    }

    #[test]
    fn missing_summary_fails_section_headers() {
        let text = "<think>x</think>\n\n## Design\n\n```smiles\nCCO\n```\n";
        let report = check_format(&parse_document(text), &FormatProfile::default());
        assert!(!report.adherent);
        assert!(report
            .failed_requirements()
            .contains(&Requirement::SectionHeaders));
    }

    #[test]
    fn mixed_list_styles_fail() {
        let text = format!("{GOLDEN}\n1. numbered\n- bullet\n");
        let report = check_format(&parse_document(&text), &FormatProfile::default());
        assert!(report
            .failed_requirements()
            .contains(&Requirement::BulletedLists));
    }

    #[test]
    fn extraction_order_and_content() {
        let text = "```smiles\nCCO\n```\nmid\n```smiles\nc1ccccc1\nCC(=O)O\n```\n";
        let doc = parse_document(text);
        assert_eq!(extract_smiles(&doc), vec!["CCO", "c1ccccc1", "CC(=O)O"]);
    }

    #[test]
    fn untagged_fence_with_molecule_is_a_defect_when_mandated() {
        let text = "<think>x</think>\n## Design\n```\nCCO\n```\n## Summary\nok\n";
        let report = check_format(&parse_document(text), &FormatProfile::default());
        assert!(report
            .failed_requirements()
            .contains(&Requirement::SmilesCodeBlocks));
        // Not mandated: the same fence passes unnoticed.
        let lenient = FormatProfile {
            mandatory: [Requirement::SectionHeaders].into_iter().collect(),
        };
        let report = check_format(&parse_document(text), &lenient);
        assert!(!report
            .failed_requirements()
            .contains(&Requirement::SmilesCodeBlocks));
    }

    #[test]
    fn table_alignment() {
        let good = "| a | b |\n|---|---|\n| 1 | 2 |\n";
        assert!(parse_document(good).tables[0].aligned);
        let bad = "| a | b |\n|---|---|\n| 1 | 2 | 3 |\n";
        let doc = parse_document(bad);
        assert!(!doc.tables[0].aligned);
        let report = check_format(&doc, &FormatProfile::default());
        assert!(report
            .failed_requirements()
            .contains(&Requirement::TabularData));
    }

    #[test]
    fn equations_and_braces() {
        let doc = parse_document("CCO + [O] -> CC=O\n");
        assert_eq!(doc.equation_lines, vec![(true, true)]);
        let doc = parse_document("CCO + [O] ->\n");
        assert_eq!(doc.equation_lines, vec![(true, false)]);
        let doc = parse_document("payload {\"a\": {\"b\": 1}} done\n");
        assert_eq!(doc.brace_candidates, vec![true]);
        let doc = parse_document("payload {\"a\": {\"b\": 1} done\n");
        assert_eq!(doc.brace_candidates, vec![false]);
    }

    #[test]
    fn emphasis_balance() {
        let doc = parse_document("some **bold** and *italic* text\n");
        assert!(doc.emphasis_issues.is_empty());
        let doc = parse_document("some **bold text\n");
        assert_eq!(doc.emphasis_issues.len(), 1);
    }

    #[test]
    fn adherence_conjunction_law() {
        for text in [
            GOLDEN.to_string(),
            format!("{GOLDEN}\n| a |\n| 1 | 2 |\n"),
            "## Summary\nplain\n".to_string(),
        ] {
            let report = check_format(&parse_document(&text), &FormatProfile::default());
            let all_pass = report.verdicts.values().all(|v| !v.failed());
            assert_eq!(report.adherent, all_pass);
        }
    }

    #[test]
    fn reasoning_steps_enumerated_and_transitions() {
        let think = "1. First consideration.\n2. Another point.\n3. Third.\n4. Fourth.\n5. Fifth.\n6. Sixth.\n7. Seventh.\n";
        let trace = analyze_reasoning(Some(think));
        assert_eq!(trace.step_count, 7);
        let think = "First we examine the core. Then we check sterics. The ring is strained. However, relief is possible.";
        let trace = analyze_reasoning(Some(think));
        assert_eq!(trace.step_count, 3);
    }

    #[test]
    fn confidence_lexicon() {
        let trace = analyze_reasoning(Some("we might expect competitive O-alkylation"));
        assert_eq!(trace.confidence, Confidence::Moderate);
        let trace = analyze_reasoning(Some("the outcome is unclear here"));
        assert_eq!(trace.confidence, Confidence::Low);
        let trace = analyze_reasoning(Some("this will clearly proceed"));
        assert_eq!(trace.confidence, Confidence::High);
        let trace = analyze_reasoning(Some("the reaction proceeds at room temperature."));
        assert_eq!(trace.confidence, Confidence::Unstated);
        // Low outranks moderate when both appear.
        let trace = analyze_reasoning(Some("might work but the mechanism is unclear"));
        assert_eq!(trace.confidence, Confidence::Low);
        // Word boundaries: "dismay" does not read as "may".
        let trace = analyze_reasoning(Some("to our dismay the yield dropped."));
        assert_eq!(trace.confidence, Confidence::Unstated);
    }

    #[test]
    fn empty_think_is_unstated() {
        let trace = analyze_reasoning(None);
        assert_eq!(trace.step_count, 0);
        assert_eq!(trace.confidence, Confidence::Unstated);
        let trace = analyze_reasoning(Some("  "));
        assert_eq!(trace.step_count, 0);
    }

    #[test]
    fn corpus_adherence_examples() {
        let pass = check_format(&parse_document(GOLDEN), &FormatProfile::default());
        let fail = check_format(&parse_document("no structure"), &FormatProfile::default());
        let rate =
            corpus_adherence_rate(&[pass.clone(), pass.clone(), pass.clone(), fail]).unwrap();
        assert_eq!(rate.point, 0.75);
        let rate = corpus_adherence_rate(&[pass.clone(), pass]).unwrap();
        assert_eq!(rate.point, 1.0);
        // Anchor: 0.963 at n = 500 gives half-width near 0.0169.
        let est = crate::stats::wilson_interval(0.963, 500, 0.95).unwrap();
        assert!((est.half_width() - 0.0169).abs() < 4e-4);
    }

    #[test]
    fn parser_total_on_arbitrary_text() {
        for text in [
            "```", "|||", "<think>", "#", "{{{", "***", "1. ", "- ", "> -> <-",
        ] {
            let _ = parse_document(text);
        }
    }
}
