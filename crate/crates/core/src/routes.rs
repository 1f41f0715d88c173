//! Reaction SMILES, multi-step routes, and the programmatic slice of the
//! synthesis-feasibility assessment: mass balance, transformation-template
//! matching, reagent-compatibility screens, condition bounds, starting
//! material availability, and step-count limits.

use crate::molgraph::{find_substructure, parse_smiles, MoleculeGraph, SyntaxError};
use crate::stats::{RateEstimate, StatsError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum RouteError {
    #[error("component {index} ({role}): {source}")]
    Component {
        role: &'static str,
        index: usize,
        source: SyntaxError,
    },
    #[error("reaction must contain exactly two '>' separators, found {0}")]
    Separators(usize),
    #[error("reaction has no products")]
    NoProducts,
    #[error("malformed route line {line}: {reason}")]
    RouteLine { line: usize, reason: String },
    #[error("route has no steps")]
    EmptyRoute,
    #[error("rule table missing")]
    RuleTableMissing,
    #[error("starting-material catalog missing")]
    CatalogMissing,
    #[error("rule table line {line}: {reason}")]
    RuleLine { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub reactants: Vec<MoleculeGraph>,
    pub agents: Vec<MoleculeGraph>,
    pub products: Vec<MoleculeGraph>,
    /// Original component texts, kept for reporting.
    pub source: String,
}

/// Parses `reactants>agents>products`, each side a `.`-separated molecule
/// list; the agent field may be empty.
pub fn parse_reaction(text: &str) -> Result<Reaction, RouteError> {
    let text = text.trim();
    let parts: Vec<&str> = text.split('>').collect();
    if parts.len() != 3 {
        return Err(RouteError::Separators(parts.len().saturating_sub(1)));
    }
    let parse_side = |side: &str, role: &'static str| -> Result<Vec<MoleculeGraph>, RouteError> {
        if side.trim().is_empty() {
            return Ok(Vec::new());
        }
        side.split('.')
            .enumerate()
            .map(|(index, s)| {
                parse_smiles(s.trim()).map_err(|source| RouteError::Component {
                    role,
                    index,
                    source,
                })
            })
            .collect()
    };
    let reactants = parse_side(parts[0], "reactant")?;
    let agents = parse_side(parts[1], "agent")?;
    let products = parse_side(parts[2], "product")?;
    if products.is_empty() {
        return Err(RouteError::NoProducts);
    }
    Ok(Reaction {
        reactants,
        agents,
        products,
        source: text.to_string(),
    })
}

/// Heavy-atom element counts; hydrogen is excluded from balance checking.
fn element_counts(mols: &[MoleculeGraph]) -> BTreeMap<&'static str, i64> {
    let mut counts = BTreeMap::new();
    for m in mols {
        for atom in &m.atoms {
            if atom.element.atomic_number() == 1 {
                continue;
            }
            *counts.entry(atom.element.symbol()).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceVerdict {
    pub balanced: bool,
    /// Elements the left side is short of, with the missing count.
    pub deficit: BTreeMap<String, i64>,
}

/// Balanced when the product heavy-atom multiset is a sub-multiset of
/// reactants plus agents. Sub-multiset, not equality: leaving groups and
/// small byproducts routinely go unwritten on the product side.
pub fn check_mass_balance(r: &Reaction) -> BalanceVerdict {
    let mut left = element_counts(&r.reactants);
    for (el, n) in element_counts(&r.agents) {
        *left.entry(el).or_insert(0) += n;
    }
    let right = element_counts(&r.products);
    let mut deficit = BTreeMap::new();
    for (el, needed) in right {
        let have = left.get(el).copied().unwrap_or(0);
        if needed > have {
            deficit.insert(el.to_string(), needed - have);
        }
    }
    BalanceVerdict {
        balanced: deficit.is_empty(),
        deficit,
    }
}

/// A transformation template: the step matches when some reactant contains
/// the reactant pattern and some product contains the product pattern.
#[derive(Debug, Clone)]
pub struct Template {
    pub id: String,
    pub reactant_pattern: MoleculeGraph,
    pub product_pattern: MoleculeGraph,
    /// Functional-group pairs that must not co-occur among the reactants of
    /// a step matched by this template.
    pub incompatible: Vec<(MoleculeGraph, MoleculeGraph)>,
    pub source_line: String,
}

#[derive(Debug, Clone)]
pub struct RuleTable {
    pub templates: Vec<Template>,
}

/// Built-in transformation templates; patterns are plain SMILES fragments.
/// Format per line: id|reactant pattern|product pattern|incompatible pairs
/// (`a~b` entries separated by `;`).
pub const BUILTIN_RULES: &str = "\
ester_hydrolysis|C(=O)OC|C(=O)O|
esterification|C(=O)O|C(=O)OC|C(=O)Cl~O
aryl_ester_hydrolysis|C(=O)Oc|C(=O)O|
amide_coupling|C(=O)O|C(=O)N|C(=O)O~N=C=O
amide_hydrolysis|C(=O)N|C(=O)O|
acyl_chlorination|C(=O)O|C(=O)Cl|
amine_acylation|C(=O)Cl|C(=O)N|C(=O)Cl~CO
ketone_reduction|CC(=O)C|CC(O)C|
aldehyde_reduction|CC=O|CCO|CC=O~C(=O)Cl
alcohol_oxidation|CCO|CC=O|
aldehyde_oxidation|CC=O|CC(=O)O|
nitro_reduction|[N+](=O)[O-]|N|[N+](=O)[O-]~C=C
alkene_hydrogenation|C=C|CC|C=C~CBr
alkyne_semihydrogenation|C#C|C=C|
sn2_amine_alkylation|CCl|CN|
sn2_ether_formation|CBr|COC|
williamson_ether|CO|COC|
suzuki_coupling|cBr|c-c|
dehydration|CC(O)|C=C|
dihalogenation|C=C|ClCCCl|
epoxidation|C=C|C1CO1|C=C~CC=O
epoxide_opening|C1CO1|CC(O)|
reductive_amination|C=O|CN|
";

impl RuleTable {
    pub fn builtin() -> RuleTable {
        RuleTable::parse(BUILTIN_RULES).expect("builtin rule table parses")
    }

    /// Parses the line-delimited table; `#` lines are comments.
    pub fn parse(text: &str) -> Result<RuleTable, RouteError> {
        let mut templates = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('|').collect();
            if fields.len() != 4 {
                return Err(RouteError::RuleLine {
                    line: lineno + 1,
                    reason: format!("expected 4 '|'-separated fields, found {}", fields.len()),
                });
            }
            let pat = |s: &str| -> Result<MoleculeGraph, RouteError> {
                parse_smiles(s).map_err(|e| RouteError::RuleLine {
                    line: lineno + 1,
                    reason: format!("pattern '{s}': {e}"),
                })
            };
            let incompatible = fields[3]
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|pair| {
                    let (a, b) = pair.split_once('~').ok_or_else(|| RouteError::RuleLine {
                        line: lineno + 1,
                        reason: format!("incompatible pair '{pair}' lacks '~'"),
                    })?;
                    Ok((pat(a.trim())?, pat(b.trim())?))
                })
                .collect::<Result<Vec<_>, RouteError>>()?;
            templates.push(Template {
                id: fields[0].trim().to_string(),
                reactant_pattern: pat(fields[1].trim())?,
                product_pattern: pat(fields[2].trim())?,
                incompatible,
                source_line: line.to_string(),
            });
        }
        Ok(RuleTable { templates })
    }

    /// Templates whose reactant and product patterns both embed in the step.
    pub fn matches(&self, reaction: &Reaction) -> Vec<&Template> {
        self.templates
            .iter()
            .filter(|t| {
                reaction
                    .reactants
                    .iter()
                    .any(|m| find_substructure(&t.reactant_pattern, m).is_some())
                    && reaction
                        .products
                        .iter()
                        .any(|m| find_substructure(&t.product_pattern, m).is_some())
            })
            .collect()
    }
}

/// Canonical-SMILES set of purchasable starting materials.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: BTreeSet<String>,
}

impl Catalog {
    pub fn from_smiles_lines(text: &str) -> Catalog {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| parse_smiles(l).ok())
            .map(|g| g.canonical_smiles())
            .collect();
        Catalog { entries }
    }

    pub fn contains(&self, mol: &MoleculeGraph) -> bool {
        self.entries.contains(&mol.canonical_smiles())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteStep {
    pub reaction: Reaction,
    pub conditions: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub target: MoleculeGraph,
    pub steps: Vec<RouteStep>,
    pub starting_materials: Vec<MoleculeGraph>,
}

impl Route {
    /// Parses the dedicated line format:
    ///
    /// ```text
    /// TARGET: <smiles>            (optional; defaults to the last product)
    /// SM: <smiles>                (repeatable; defaults to unproduced reactants)
    /// STEP 1: <reaction smiles> | <conditions text>
    /// ```
    pub fn parse(text: &str) -> Result<Route, RouteError> {
        let mut target: Option<MoleculeGraph> = None;
        let mut declared_sm: Vec<MoleculeGraph> = Vec::new();
        let mut steps: Vec<RouteStep> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| RouteError::RouteLine {
                line: lineno + 1,
                reason,
            };
            if let Some(rest) = line.strip_prefix("TARGET:") {
                let g = parse_smiles(rest.trim()).map_err(|e| err(e.to_string()))?;
                target = Some(g);
            } else if let Some(rest) = line.strip_prefix("SM:") {
                for part in rest.trim().split('.') {
                    declared_sm.push(parse_smiles(part.trim()).map_err(|e| err(e.to_string()))?);
                }
            } else if line.starts_with("STEP") {
                let rest = line
                    .split_once(':')
                    .ok_or_else(|| err("STEP line lacks ':'".into()))?
                    .1;
                let (rxn_text, conditions) = match rest.split_once('|') {
                    Some((r, c)) => (r.trim(), c.trim().to_string()),
                    None => (rest.trim(), String::new()),
                };
                let reaction = parse_reaction(rxn_text)?;
                steps.push(RouteStep {
                    reaction,
                    conditions,
                });
            } else {
                return Err(err(format!("unrecognized line '{line}'")));
            }
        }
        if steps.is_empty() {
            return Err(RouteError::EmptyRoute);
        }
        let target = match target {
            Some(t) => t,
            None => steps
                .last()
                .unwrap()
                .reaction
                .products
                .first()
                .cloned()
                .ok_or(RouteError::NoProducts)?,
        };
        let route = Route {
            target,
            steps,
            starting_materials: declared_sm,
        };
        Ok(route.with_default_starting_materials())
    }

    /// When no SM lines were given, starting materials are the reactants not
    /// produced by any earlier step.
    fn with_default_starting_materials(mut self) -> Route {
        if !self.starting_materials.is_empty() {
            return self;
        }
        let mut produced: BTreeSet<String> = BTreeSet::new();
        let mut materials: Vec<MoleculeGraph> = Vec::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for step in &self.steps {
            for reactant in &step.reaction.reactants {
                let key = reactant.canonical_smiles();
                if !produced.contains(&key) && seen.insert(key) {
                    materials.push(reactant.clone());
                }
            }
            for product in &step.reaction.products {
                produced.insert(product.canonical_smiles());
            }
        }
        self.starting_materials = materials;
        self
    }

    /// Intermediates produced but never consumed downstream and different
    /// from the target.
    pub fn wiring_issues(&self) -> Vec<String> {
        let target_key = self.target.canonical_smiles();
        let mut issues = Vec::new();
        for (i, step) in self.steps.iter().enumerate() {
            for product in &step.reaction.products {
                let key = product.canonical_smiles();
                if key == target_key {
                    continue;
                }
                let consumed = self.steps.iter().skip(i + 1).any(|later| {
                    later
                        .reaction
                        .reactants
                        .iter()
                        .chain(&later.reaction.agents)
                        .any(|r| r.canonical_smiles() == key)
                });
                if !consumed {
                    issues.push(format!("step {} product {key} is never consumed", i + 1));
                }
            }
        }
        issues
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityConfig {
    pub min_temperature_c: f64,
    pub max_temperature_c: f64,
    pub max_pressure_atm: f64,
    pub max_steps: usize,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        FeasibilityConfig {
            min_temperature_c: -100.0,
            max_temperature_c: 300.0,
            max_pressure_atm: 100.0,
            max_steps: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub reaction_validity: bool,
    pub reagent_compatibility: bool,
    pub condition_reasonableness: bool,
    pub starting_material_availability: bool,
    pub step_efficiency: bool,
    /// Expert judgments, reported as not assessed rather than guessed.
    pub stereochemical_control: Option<bool>,
    pub protecting_group_strategy: Option<bool>,
    pub feasible: bool,
    /// Every distinct flaw found; one route can carry several.
    pub flaws: Vec<String>,
}

/// Numeric condition tokens with a small unit grammar: temperatures in
/// C or K, pressures in atm or bar.
fn conditions_reasonable(text: &str, cfg: &FeasibilityConfig) -> Result<(), String> {
    let tokens: Vec<&str> = text
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .filter(|t| !t.is_empty())
        .collect();
    let mut idx = 0;
    while idx < tokens.len() {
        let tok = tokens[idx];
        // Accept "25C", "-78 C", "300K", "1 atm", "2.5bar", "25°C".
        let (num_part, unit_inline) = split_number_unit(tok);
        if let Some(value) = num_part {
            let unit = if !unit_inline.is_empty() {
                unit_inline.to_string()
            } else if idx + 1 < tokens.len() {
                tokens[idx + 1].to_string()
            } else {
                String::new()
            };
            let unit = unit.trim_start_matches('°').to_lowercase();
            match unit.as_str() {
                "c" => {
                    if value < cfg.min_temperature_c || value > cfg.max_temperature_c {
                        return Err(format!("temperature {value} C outside bounds"));
                    }
                }
                "k" => {
                    let celsius = value - 273.15;
                    if celsius < cfg.min_temperature_c || celsius > cfg.max_temperature_c {
                        return Err(format!("temperature {value} K outside bounds"));
                    }
                }
                "atm" | "bar" => {
                    let atm = if unit == "bar" { value * 0.98692 } else { value };
                    if atm <= 0.0 || atm > cfg.max_pressure_atm {
                        return Err(format!("pressure {value} {unit} outside bounds"));
                    }
                }
                _ => {}
            }
        }
        idx += 1;
    }
    Ok(())
}

fn split_number_unit(token: &str) -> (Option<f64>, &str) {
    let end = token
        .char_indices()
        .take_while(|(i, c)| c.is_ascii_digit() || *c == '.' || (*i == 0 && *c == '-'))
        .map(|(i, c)| i + c.len_utf8())
        .last()
        .unwrap_or(0);
    match token[..end].parse::<f64>() {
        Ok(v) => (Some(v), &token[end..]),
        Err(_) => (None, token),
    }
}

/// Runs the five programmatic feasibility components. Missing rule table or
/// catalog is an operational error, not a verdict.
pub fn assess_feasibility(
    route: &Route,
    catalog: Option<&Catalog>,
    rules: Option<&RuleTable>,
    cfg: &FeasibilityConfig,
) -> Result<FeasibilityReport, RouteError> {
    let rules = rules.ok_or(RouteError::RuleTableMissing)?;
    let catalog = catalog.ok_or(RouteError::CatalogMissing)?;

    let mut flaws = Vec::new();

    let mut reaction_validity = true;
    let mut reagent_compatibility = true;
    for (i, step) in route.steps.iter().enumerate() {
        let matched = rules.matches(&step.reaction);
        if matched.is_empty() {
            reaction_validity = false;
            flaws.push(format!("step {}: no transformation template matches", i + 1));
            continue;
        }
        // A step is compatible when at least one matching template raises no
        // functional-group conflict among the step's reactants.
        let compatible = matched.iter().any(|t| {
            t.incompatible.iter().all(|(a, b)| {
                let has = |pat: &MoleculeGraph| {
                    step.reaction
                        .reactants
                        .iter()
                        .any(|m| find_substructure(pat, m).is_some())
                };
                !(has(a) && has(b))
            })
        });
        if !compatible {
            reagent_compatibility = false;
            flaws.push(format!(
                "step {}: incompatible functional-group pair among reactants",
                i + 1
            ));
        }
    }

    let mut condition_reasonableness = true;
    for (i, step) in route.steps.iter().enumerate() {
        if let Err(reason) = conditions_reasonable(&step.conditions, cfg) {
            condition_reasonableness = false;
            flaws.push(format!("step {}: {reason}", i + 1));
        }
    }

    let mut starting_material_availability = true;
    for sm in &route.starting_materials {
        if !catalog.contains(sm) {
            starting_material_availability = false;
            flaws.push(format!(
                "starting material {} not in catalog",
                sm.canonical_smiles()
            ));
        }
    }

    let step_efficiency = route.steps.len() <= cfg.max_steps;
    if !step_efficiency {
        flaws.push(format!(
            "route has {} steps, limit {}",
            route.steps.len(),
            cfg.max_steps
        ));
    }

    let feasible = reaction_validity
        && reagent_compatibility
        && condition_reasonableness
        && starting_material_availability
        && step_efficiency;
    Ok(FeasibilityReport {
        reaction_validity,
        reagent_compatibility,
        condition_reasonableness,
        starting_material_availability,
        step_efficiency,
        stereochemical_control: None,
        protecting_group_strategy: None,
        feasible,
        flaws,
    })
}

/// Proportion of feasible routes with a 95% Wilson interval.
pub fn corpus_feasibility_rate(reports: &[FeasibilityReport]) -> Result<RateEstimate, StatsError> {
    if reports.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let feasible = reports.iter().filter(|r| r.feasible).count() as u64;
    RateEstimate::from_counts(feasible, reports.len() as u64, 0.95)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reaction_component_counts() {
        let r = parse_reaction("CC=O.[H][H]>>CCO").unwrap();
        assert_eq!(r.reactants.len(), 2);
        assert_eq!(r.agents.len(), 0);
        assert_eq!(r.products.len(), 1);
    }

    #[test]
    fn identity_reaction_parses() {
        let r = parse_reaction("C>>C").unwrap();
        assert_eq!(r.reactants.len(), 1);
        assert_eq!(r.products.len(), 1);
    }

    #[test]
    fn single_separator_rejected() {
        assert!(matches!(
            parse_reaction("CC>O"),
            Err(RouteError::Separators(1))
        ));
    }

    #[test]
    fn balance_hand_counts() {
        // C2O on both sides.
        let r = parse_reaction("CC=O.[H][H]>>CCO").unwrap();
        assert!(check_mass_balance(&r).balanced);
        // Ethanol C2O1 cannot yield acetic acid C2O2.
        let r = parse_reaction("CCO>>CC(=O)O").unwrap();
        let v = check_mass_balance(&r);
        assert!(!v.balanced);
        assert_eq!(v.deficit.get("O"), Some(&1));
        let r = parse_reaction("C>>C").unwrap();
        assert!(check_mass_balance(&r).balanced);
    }

    #[test]
    fn balance_monotone_in_reactants() {
        let balanced = parse_reaction("CC=O>>CC=O").unwrap();
        assert!(check_mass_balance(&balanced).balanced);
        let extra = parse_reaction("CC=O.c1ccccc1>>CC=O").unwrap();
        assert!(check_mass_balance(&extra).balanced);
    }

    #[test]
    fn agents_count_toward_balance() {
        let r = parse_reaction("CC>O=O>CCO").unwrap();
        assert!(check_mass_balance(&r).balanced);
    }

    fn ester_route() -> Route {
        Route::parse(
            "TARGET: CC(=O)O\nSM: CC(=O)OC\nSTEP 1: CC(=O)OC.O>[Na+].[OH-]>CC(=O)O | 25 C, 1 atm",
        )
        .unwrap()
    }

    #[test]
    fn one_step_hydrolysis_is_feasible() {
        let route = ester_route();
        let catalog = Catalog::from_smiles_lines("CC(=O)OC\nO\nCCO");
        let rules = RuleTable::builtin();
        let report =
            assess_feasibility(&route, Some(&catalog), Some(&rules), &Default::default()).unwrap();
        assert!(report.feasible, "{:?}", report.flaws);
        assert!(report.stereochemical_control.is_none());
    }

    #[test]
    fn missing_starting_material_blocks() {
        let route = ester_route();
        let catalog = Catalog::from_smiles_lines("CCO");
        let rules = RuleTable::builtin();
        let report =
            assess_feasibility(&route, Some(&catalog), Some(&rules), &Default::default()).unwrap();
        assert!(!report.starting_material_availability);
        assert!(!report.feasible);
    }

    #[test]
    fn step_limit() {
        let steps: String = (1..=15)
            .map(|i| format!("STEP {i}: CCO>>CC=O | 25 C\n"))
            .collect();
        let route = Route::parse(&steps).unwrap();
        let catalog = Catalog::from_smiles_lines("CCO");
        let rules = RuleTable::builtin();
        let report =
            assess_feasibility(&route, Some(&catalog), Some(&rules), &Default::default()).unwrap();
        assert!(!report.step_efficiency);
        assert!(!report.feasible);
    }

    #[test]
    fn missing_rules_or_catalog_is_operational() {
        let route = ester_route();
        assert!(matches!(
            assess_feasibility(&route, None, Some(&RuleTable::builtin()), &Default::default()),
            Err(RouteError::CatalogMissing)
        ));
        let catalog = Catalog::from_smiles_lines("CCO");
        assert!(matches!(
            assess_feasibility(&route, Some(&catalog), None, &Default::default()),
            Err(RouteError::RuleTableMissing)
        ));
    }

    #[test]
    fn unreasonable_conditions_flagged() {
        let route = Route::parse("STEP 1: CCO>>CC=O | 450 C").unwrap();
        let catalog = Catalog::from_smiles_lines("CCO");
        let rules = RuleTable::builtin();
        let report =
            assess_feasibility(&route, Some(&catalog), Some(&rules), &Default::default()).unwrap();
        assert!(!report.condition_reasonableness);
        // Missing conditions count as reasonable.
        let bare = Route::parse("STEP 1: CCO>>CC=O").unwrap();
        let report =
            assess_feasibility(&bare, Some(&catalog), Some(&rules), &Default::default()).unwrap();
        assert!(report.condition_reasonableness);
    }

    #[test]
    fn kelvin_and_bar_units() {
        let cfg = FeasibilityConfig::default();
        assert!(conditions_reasonable("reflux at 350 K under 2 bar H2", &cfg).is_ok());
        assert!(conditions_reasonable("700 K", &cfg).is_err());
        assert!(conditions_reasonable("150 bar", &cfg).is_err());
        assert!(conditions_reasonable("Pd/C, -78°C", &cfg).is_ok());
        assert!(conditions_reasonable("-120 C", &cfg).is_err());
    }

    #[test]
    fn conjunction_law() {
        let route = ester_route();
        let catalog = Catalog::from_smiles_lines("CC(=O)OC\nO");
        let rules = RuleTable::builtin();
        let r =
            assess_feasibility(&route, Some(&catalog), Some(&rules), &Default::default()).unwrap();
        let conj = r.reaction_validity
            && r.reagent_compatibility
            && r.condition_reasonableness
            && r.starting_material_availability
            && r.step_efficiency;
        assert_eq!(r.feasible, conj);
    }

    #[test]
    fn multiple_flaws_all_recorded() {
        let steps: String = (1..=15)
            .map(|i| format!("STEP {i}: CCO>>CC=O | 500 C\n"))
            .collect();
        let route = Route::parse(&steps).unwrap();
        let catalog = Catalog::from_smiles_lines("c1ccccc1");
        let rules = RuleTable::builtin();
        let report =
            assess_feasibility(&route, Some(&catalog), Some(&rules), &Default::default()).unwrap();
        assert!(!report.feasible);
        assert!(report.flaws.len() >= 3, "{:?}", report.flaws);
    }

    #[test]
    fn route_wiring() {
        let route = Route::parse(
            "TARGET: CC(=O)O\nSTEP 1: CCO>>CC=O | \nSTEP 2: CC=O>>CC(=O)O | ",
        )
        .unwrap();
        assert!(route.wiring_issues().is_empty());
        let dangling = Route::parse(
            "TARGET: CC(=O)O\nSTEP 1: CCO>>CCOC | \nSTEP 2: CC=O>>CC(=O)O | ",
        )
        .unwrap();
        assert_eq!(dangling.wiring_issues().len(), 1);
    }

    #[test]
    fn default_starting_materials_are_unproduced_reactants() {
        let route = Route::parse("STEP 1: CCO>>CC=O |\nSTEP 2: CC=O.OC>>CC(=O)OC |").unwrap();
        let keys: Vec<String> = route
            .starting_materials
            .iter()
            .map(|m| m.canonical_smiles())
            .collect();
        assert!(keys.contains(&"CCO".to_string()));
        assert!(keys.iter().any(|k| k == "CO"));
        assert!(!keys.iter().any(|k| k.contains('=')));
    }

    #[test]
    fn corpus_rate() {
        let feasible = FeasibilityReport {
            reaction_validity: true,
            reagent_compatibility: true,
            condition_reasonableness: true,
            starting_material_availability: true,
            step_efficiency: true,
            stereochemical_control: None,
            protecting_group_strategy: None,
            feasible: true,
            flaws: vec![],
        };
        let mut infeasible = feasible.clone();
        infeasible.feasible = false;
        let rate = corpus_feasibility_rate(&[feasible.clone(), infeasible.clone()]).unwrap();
        assert_eq!(rate.point, 0.5);
        let rate = corpus_feasibility_rate(&[infeasible.clone(), infeasible]).unwrap();
        assert_eq!(rate.point, 0.0);
        assert_eq!(rate.ci_low, 0.0);
        assert!(corpus_feasibility_rate(&[]).is_err());
        // 372 of 500 is the shape of the headline feasibility row.
        let r = RateEstimate::from_counts(372, 500, 0.95).unwrap();
        assert!((r.point - 0.744).abs() < 1e-12);
    }
}
