//! Subcommands on finite menu games.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use common_agency::assembly::{
    check_compatibility, check_sufficiency, classify_pbe, describe_profile, find_p3_induced_profiles, pareto_compare,
    report_json, SearchOptions, SufficiencyInput, Variant,
};
use common_agency::game::{
    mechanism_to_doc, mechanisms_from_doc, profile_from_doc, profile_to_doc, strategy_from_doc, strategy_to_doc,
    MechanismDoc, MenuProfileDoc, SelectionRule, StrategyEntryDoc,
};
use common_agency::indirect::{dump, indirect_utility};
use common_agency::screening::{solve_screening_with, Objective, ScreeningOptions, ScreeningProblem};
use common_agency::verifier::{
    adversarial_strategy, construct_agent_strategy, support_feasibility, verify_pbe, EquilibriumCertificate,
    Feasibility, FeasibilityOptions, Verdict as PbeVerdict,
};
use common_agency::{AgentStrategy, Error, FiniteGame, Menu, Rational};
use serde_json::{json, Value};

use crate::report::{Inputs, Outcome, Verdict};

#[derive(Args, Debug)]
pub struct GameArgs {
    /// Game document (JSON)
    #[arg(long, value_name = "FILE")]
    pub game: PathBuf,

    /// Parameter override NAME=VALUE; `p` sets the probability of the first type
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
}

impl GameArgs {
    pub fn load(&self, inputs: &mut Inputs) -> Result<FiniteGame> {
        let text = inputs.read(&self.game)?;
        let mut game = common_agency::load_game(&text).with_context(|| format!("invalid game {}", self.game.display()))?;
        for param in &self.params {
            let Some((name, value)) = param.split_once('=') else { bail!("parameter {param:?} is not NAME=VALUE") };
            let value: Rational = value.trim().parse().with_context(|| format!("parameter {name} is not a rational"))?;
            match name.trim() {
                "p" => game = game.with_first_prob(value)?,
                other => bail!("unknown parameter {other:?} (supported: p)"),
            }
        }
        Ok(game)
    }
}

fn read_profile(game: &FiniteGame, inputs: &mut Inputs, path: &Path) -> Result<Vec<Menu>> {
    let doc: MenuProfileDoc = inputs.json(path)?;
    Ok(profile_from_doc(game, &doc)?)
}

fn read_strategy(game: &FiniteGame, inputs: &mut Inputs, path: &Path, fallback: Fallback) -> Result<AgentStrategy> {
    let docs: Vec<StrategyEntryDoc> = inputs.json(path)?;
    let mut s = strategy_from_doc(game, &docs)?;
    s.fallback = fallback.rule();
    Ok(s)
}

fn principal_index(game: &FiniteGame, label: &str) -> Result<usize> {
    if let Ok(i) = game.principal_index(label) {
        return Ok(i);
    }
    match label.parse::<usize>() {
        Ok(k) if (1..=game.n()).contains(&k) => Ok(k - 1),
        _ => bail!("unknown principal {label:?}"),
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialize")
}

fn menu_list(game: &FiniteGame, i: usize, menus: &[Menu]) -> Vec<Vec<String>> {
    menus.iter().map(|m| game.menu_labels(i, *m)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Fallback {
    /// Every node must be listed explicitly
    None,
    /// Unlisted nodes take the first agent-optimal selection
    Lexicographic,
}

impl Fallback {
    fn rule(self) -> Option<SelectionRule> {
        match self {
            Fallback::None => None,
            Fallback::Lexicographic => Some(SelectionRule::Lexicographic),
        }
    }
}

// ---------------------------------------------------------------------------
// solve

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// Principal to solve for (label or 1-based index)
    #[arg(long)]
    pub principal: String,

    /// Rival menus (menu-profile document); defaults to the full menus
    #[arg(long, value_name = "FILE")]
    pub rivals: Option<PathBuf>,

    /// Largest number of optimal mechanisms listed
    #[arg(long, default_value_t = 64)]
    pub cap: usize,
}

pub fn solve(args: &SolveArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let game = args.game.load(inputs)?;
    let i = principal_index(&game, &args.principal)?;
    let rivals = match &args.rivals {
        Some(path) => {
            let mut doc: MenuProfileDoc = inputs.json(path)?;
            doc.entry(game.principals()[i].clone()).or_insert_with(|| game.outcome_labels(i).to_vec());
            profile_from_doc(&game, &doc)?
        }
        None => game.full_profile(),
    };
    let fallback = AgentStrategy::rule(SelectionRule::Lexicographic);
    let mut problem = ScreeningProblem::new(&game, i, rivals);
    if !game.is_independent() {
        problem.objective = Objective::General(&fallback);
    }
    let opts = ScreeningOptions { cap: args.cap, ..Default::default() };
    let sol = match solve_screening_with(&problem, opts) {
        Ok(s) => s,
        Err(Error::Infeasible(why)) => {
            return Ok(Outcome::new(
                json!({ "principal": game.principals()[i], "infeasible": why }),
                Verdict::Fail(format!("infeasible: {why}")),
                vec![format!("no feasible mechanism for {}", game.principals()[i])],
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let output = json!({
        "principal": game.principals()[i],
        "rival_menus": profile_to_doc(&game, &problem.rival_menus),
        "value": sol.value,
        "mechanisms": sol.mechanisms.iter().map(|m| mechanism_to_doc(&game, std::slice::from_ref(m))).collect::<Vec<_>>(),
        "menus": menu_list(&game, i, &sol.menus),
        "optimal_menus": menu_list(&game, i, &sol.optimal_menus),
        "truncated": sol.truncated,
    });
    let text = vec![
        format!("principal {}: optimal value {}", game.principals()[i], sol.value),
        format!("optimal menus: {:?}", menu_list(&game, i, &sol.optimal_menus)),
        format!("{} optimal mechanism(s) listed{}", sol.mechanisms.len(), if sol.truncated { " (truncated)" } else { "" }),
    ];
    Ok(Outcome::new(output, Verdict::Info, text))
}

// ---------------------------------------------------------------------------
// verify / support

fn certificate_json(game: &FiniteGame, c: &EquilibriumCertificate) -> Value {
    let verdict = match &c.verdict {
        PbeVerdict::Pbe => json!({ "kind": "pbe" }),
        PbeVerdict::NotPbe { principal, menu, gain } => json!({
            "kind": "not_pbe",
            "principal": game.principals()[*principal],
            "menu": game.menu_labels(*principal, *menu),
            "gain": gain,
        }),
        PbeVerdict::InvalidStrategy { node, reason } => json!({ "kind": "invalid_strategy", "node": node, "reason": reason }),
    };
    json!({
        "profile": profile_to_doc(game, &c.profile),
        "payoffs": c.payoffs,
        "deviations": c.deviations.iter().map(|d| json!({
            "principal": game.principals()[d.principal],
            "menu": game.menu_labels(d.principal, d.menu),
            "payoff": d.payoff,
            "gain": d.gain,
        })).collect::<Vec<_>>(),
        "verdict": verdict,
    })
}

fn certificate_verdict(c: &EquilibriumCertificate) -> Verdict {
    match &c.verdict {
        PbeVerdict::Pbe => Verdict::Pass("PBE".into()),
        PbeVerdict::NotPbe { .. } => Verdict::Fail("not a PBE: a profitable deviation exists".into()),
        PbeVerdict::InvalidStrategy { .. } => Verdict::Fail("invalid agent strategy".into()),
    }
}

fn certificate_text(game: &FiniteGame, c: &EquilibriumCertificate) -> Vec<String> {
    let mut out = vec![format!("checked {} unilateral deviation(s)", c.deviations.len())];
    if !c.payoffs.is_empty() {
        let p: Vec<String> = c.payoffs.iter().map(ToString::to_string).collect();
        out.push(format!("principal payoffs: ({})", p.join(", ")));
    }
    match &c.verdict {
        PbeVerdict::Pbe => {}
        PbeVerdict::NotPbe { principal, menu, gain } => out.push(format!(
            "{} gains {} by offering {:?}",
            game.principals()[*principal],
            gain,
            game.menu_labels(*principal, *menu)
        )),
        PbeVerdict::InvalidStrategy { node, reason } => out.push(format!("strategy invalid at {node}: {reason}")),
    }
    out
}

fn feasibility_json(game: &FiniteGame, f: &Feasibility, full_system: bool) -> Value {
    let sys = f.system();
    let variables: Vec<String> = (0..sys.n_vars).map(|v| sys.variable_label(game, v)).collect();
    let mut out = json!({
        "feasible": f.is_feasible(),
        "n_vars": sys.n_vars,
        "n_constraints": sys.constraints.len(),
        "variables": variables,
    });
    if full_system {
        out["constraints"] = sys
            .constraints
            .iter()
            .map(|c| json!({ "label": c.label, "coeffs": c.constraint.coeffs, "constant": c.constraint.constant }))
            .collect();
    }
    match f {
        Feasibility::Feasible { weights, strategy, .. } => {
            out["weights"] = to_value(weights);
            out["strategy"] = to_value(&strategy_to_doc(game, strategy));
        }
        Feasibility::Infeasible { system, certificate } => {
            let constraints: Vec<_> = system.constraints.iter().map(|c| c.constraint.clone()).collect();
            out["certificate"] = json!({
                "multipliers": certificate.multipliers.iter().map(|(k, w)| json!({
                    "constraint": system.constraints[*k].label,
                    "weight": w,
                })).collect::<Vec<_>>(),
                "combined_constant": certificate.combined_constant,
                "variable": certificate.variable.map(|v| sys.variable_label(game, v)),
                "checks": certificate.check(&constraints),
            });
        }
    }
    out
}

fn feasibility_text(game: &FiniteGame, f: &Feasibility) -> Vec<String> {
    let sys = f.system();
    let mut out = vec![format!("{} tie weight(s), {} constraint(s)", sys.n_vars, sys.constraints.len())];
    match f {
        Feasibility::Feasible { weights, .. } => {
            for (v, w) in weights.iter().enumerate() {
                out.push(format!("  {} = {}", sys.variable_label(game, v), w));
            }
        }
        Feasibility::Infeasible { system, certificate } => {
            out.push("infeasible: no agent tie-breaking supports this profile".into());
            for (k, w) in &certificate.multipliers {
                out.push(format!("  {} × [{}]", w, system.constraints[*k].label));
            }
            out.push(format!("  combine to {} ≥ 0", certificate.combined_constant));
        }
    }
    out
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// Menu profile to verify (menu-profile document)
    #[arg(long, value_name = "FILE")]
    pub profile: PathBuf,

    /// Agent strategy (array of strategy entries); without it, decide whether any
    /// tie-breaking supports the profile
    #[arg(long, value_name = "FILE")]
    pub strategy: Option<PathBuf>,

    /// Rule for nodes absent from the strategy file
    #[arg(long, value_enum, default_value = "lexicographic")]
    pub fallback: Fallback,

    /// Largest number of tie weights handed to elimination
    #[arg(long, default_value_t = 32)]
    pub max_vars: usize,
}

pub fn verify(args: &VerifyArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let game = args.game.load(inputs)?;
    let profile = read_profile(&game, inputs, &args.profile)?;
    if let Some(path) = &args.strategy {
        let strategy = read_strategy(&game, inputs, path, args.fallback)?;
        let cert = verify_pbe(&game, &profile, &strategy)?;
        return Ok(Outcome::new(
            json!({ "mode": "strategy", "certificate": certificate_json(&game, &cert) }),
            certificate_verdict(&cert),
            certificate_text(&game, &cert),
        ));
    }
    let feas = support_feasibility(&game, &profile, FeasibilityOptions { max_vars: args.max_vars })?;
    let mut output = json!({ "mode": "support", "feasibility": feasibility_json(&game, &feas, false) });
    let mut text = feasibility_text(&game, &feas);
    let verdict = match &feas {
        Feasibility::Feasible { strategy, .. } => {
            let cert = verify_pbe(&game, &profile, strategy)?;
            text.extend(certificate_text(&game, &cert));
            output["certificate"] = certificate_json(&game, &cert);
            certificate_verdict(&cert)
        }
        Feasibility::Infeasible { .. } => {
            Verdict::Fail("infeasible: no agent tie-breaking makes the profile an equilibrium".into())
        }
    };
    Ok(Outcome::new(output, verdict, text))
}

#[derive(Args, Debug)]
pub struct SupportArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// Menu profile (menu-profile document)
    #[arg(long, value_name = "FILE")]
    pub profile: PathBuf,

    /// Largest number of tie weights handed to elimination
    #[arg(long, default_value_t = 32)]
    pub max_vars: usize,
}

pub fn support(args: &SupportArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let game = args.game.load(inputs)?;
    let profile = read_profile(&game, inputs, &args.profile)?;
    let feas = support_feasibility(&game, &profile, FeasibilityOptions { max_vars: args.max_vars })?;
    let verdict = Verdict::from_bool(feas.is_feasible(), "feasible", "infeasible");
    Ok(Outcome::new(feasibility_json(&game, &feas, true), verdict, feasibility_text(&game, &feas)))
}

// ---------------------------------------------------------------------------
// check

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    /// The UPR variant matching the game's outside options
    Auto,
    Upr,
    UprI,
    UprD,
    Men,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// Direct mechanisms (principal → type → outcome label)
    #[arg(long, value_name = "FILE")]
    pub mechanisms: PathBuf,

    #[arg(long, value_enum, default_value = "auto")]
    pub variant: VariantArg,

    /// Agent strategy for the MEN check; defaults to the lexicographic rule
    #[arg(long, value_name = "FILE")]
    pub strategy: Option<PathBuf>,

    /// Include every principal's indirect-utility table against the others' ranges
    #[arg(long)]
    pub dump_indirect: bool,
}

pub fn check(args: &CheckArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let game = args.game.load(inputs)?;
    let doc: MechanismDoc = inputs.json(&args.mechanisms)?;
    let mechs = mechanisms_from_doc(&game, &doc)?;
    let variant = match args.variant {
        VariantArg::Auto => Variant::for_mode(game.mode()),
        VariantArg::Upr => Variant::Upr,
        VariantArg::UprI => Variant::UprI,
        VariantArg::UprD => Variant::UprD,
        VariantArg::Men => Variant::Men,
    };
    let strategy = match &args.strategy {
        Some(path) => Some(read_strategy(&game, inputs, path, Fallback::Lexicographic)?),
        None if variant == Variant::Men => Some(AgentStrategy::rule(SelectionRule::Lexicographic)),
        None => None,
    };
    let report = check_compatibility(&game, &mechs, variant, strategy.as_ref())?;
    let flags = check_sufficiency(&game, SufficiencyInput::Mechanisms(&mechs)).ok();
    let mut output = json!({
        "compatibility": report_json(&game, &report),
        "sufficiency": flags,
    });
    if args.dump_indirect {
        let ranges: Vec<Menu> = mechs.iter().map(|m| m.range()).collect();
        let tables = (0..game.n())
            .map(|i| indirect_utility(&game, i, &ranges).map(|t| to_value(&dump(&game, &t))))
            .collect::<common_agency::Result<Vec<_>>>()?;
        output["indirect"] = Value::Array(tables);
    }
    let name = to_value(&variant).as_str().unwrap_or_default().to_uppercase();
    let mut text = vec![format!("{name} check on {} mechanism(s)", mechs.len())];
    let verdict = match &report.violation {
        None if report.pass => Verdict::Pass(format!("{name} holds")),
        Some(v) => {
            let t = &game.types()[v.type_];
            text.push(format!("violating type {t}: {}", v.reason));
            Verdict::Fail(format!("{name} fails at type {t}"))
        }
        None => Verdict::Fail(format!("{name} fails")),
    };
    Ok(Outcome::new(output, verdict, text))
}

// ---------------------------------------------------------------------------
// find-equilibria

#[derive(Args, Debug)]
pub struct FindArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// Largest number of menu profiles the search may visit
    #[arg(long, default_value_t = 1 << 20)]
    pub bound: usize,

    /// Certify every compatible profile with the brute-force deviation check
    #[arg(long)]
    pub verify: bool,
}

pub fn find_equilibria(args: &FindArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let game = args.game.load(inputs)?;
    let found = find_p3_induced_profiles(&game, SearchOptions { bound: args.bound, ..Default::default() })?;
    let mut entries = Vec::with_capacity(found.len());
    let mut text = Vec::new();
    for p in &found {
        let mut entry = to_value(&describe_profile(&game, p));
        let mut line = format!("{:?}: compatible={}", profile_to_doc(&game, &p.menus), p.report.pass);
        if args.verify && p.report.pass {
            let strategy = construct_agent_strategy(&game, &p.mechanisms)?;
            let cert = verify_pbe(&game, &p.menus, &strategy)?;
            line.push_str(&format!(" pbe={}", cert.is_pbe()));
            entry["certificate"] = certificate_json(&game, &cert);
        }
        text.push(line);
        entries.push(entry);
    }
    let compatible = found.iter().filter(|p| p.report.pass).count();
    text.insert(0, format!("{} mutual screening profile(s), {} compatible", found.len(), compatible));
    let verdict = if found.is_empty() {
        Verdict::Fail("no mutual screening profile".into())
    } else {
        Verdict::Pass(format!("{} profile(s), {} compatible", found.len(), compatible))
    };
    Ok(Outcome::new(json!({ "profiles": entries, "compatible": compatible }), verdict, text))
}

// ---------------------------------------------------------------------------
// pareto

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    /// Agent punishes deviators; lexicographic elsewhere
    Adversarial,
    /// First agent-optimal selection everywhere
    Lexicographic,
}

#[derive(Args, Debug)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// Menu profile to compare (repeat for each entry)
    #[arg(long = "profile", value_name = "FILE", required = true)]
    pub profiles: Vec<PathBuf>,

    /// Agent behaviour used to evaluate each profile
    #[arg(long, value_enum, default_value = "adversarial")]
    pub rule: Rule,
}

pub fn pareto(args: &ParetoArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let game = args.game.load(inputs)?;
    let mut entries = Vec::with_capacity(args.profiles.len());
    for path in &args.profiles {
        let profile = read_profile(&game, inputs, path)?;
        let strategy = match args.rule {
            Rule::Adversarial => adversarial_strategy(&game, &profile)?,
            Rule::Lexicographic => AgentStrategy::rule(SelectionRule::Lexicographic),
        };
        entries.push((profile, strategy));
    }
    let report = pareto_compare(&game, &entries)?;
    let classes = entries
        .iter()
        .map(|(p, s)| classify_pbe(&game, p, s, false))
        .collect::<common_agency::Result<Vec<_>>>()?;
    let mut text = Vec::new();
    for (k, payoffs) in report.payoffs.iter().enumerate() {
        let p: Vec<String> = payoffs.iter().map(ToString::to_string).collect();
        let tag = if report.frontier.contains(&k) { " (frontier)" } else { "" };
        text.push(format!("entry {}: payoffs ({}){}", k + 1, p.join(", "), tag));
    }
    for (a, b) in &report.dominance {
        text.push(format!("entry {} dominates entry {}", a + 1, b + 1));
    }
    let output = json!({
        "profiles": entries.iter().map(|(p, _)| profile_to_doc(&game, p)).collect::<Vec<_>>(),
        "comparison": report,
        "classification": classes,
    });
    Ok(Outcome::new(output, Verdict::Info, text))
}
