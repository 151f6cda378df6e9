//! Subcommands on the continuous delegation and bundling models and on
//! sampled function families.

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, Subcommand, ValueEnum};
use common_agency::bundling::{
    build_base_plus_upgrades, bundle_label, check_market_splitting, check_md_star, find_tstar, jointly_optimal_pairs,
    parse_bundle, participation_audit, unordered_count, BundlingModel, PricedMenu, TStarVariant,
};
use common_agency::delegation::{
    build_delegation_profile, check_regime, cross_validate_discretized, DelegationModel, RegimeSpec,
};
use common_agency::envelope::{envelope_integral_check, kink_audit, pointwise_envelope, SampledFamily, Sense};
use common_agency::Error;
use serde_json::{json, Value};

use crate::report::{Inputs, Outcome, Verdict};

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialize")
}

// ---------------------------------------------------------------------------
// delegation

#[derive(Subcommand, Debug)]
pub enum DelegationCommand {
    /// Check the sufficient conditions of a regime on a grid
    Check(DelegationArgs),
    /// Check, then construct the menus and allocation of a passing regime
    Build(DelegationArgs),
    /// Compare the closed-form allocation with the finite solver on a discretized game
    Xval(XvalArgs),
}

#[derive(Args, Debug)]
pub struct DelegationArgs {
    /// Delegation model (JSON)
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,

    /// Regime specification (JSON)
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,

    /// Grid size; defaults to the model's grid
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Args, Debug)]
pub struct XvalArgs {
    /// Delegation model (JSON)
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,

    /// Regime specification (JSON)
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,

    /// Number of sampled types
    #[arg(long, default_value_t = 9)]
    pub types: usize,

    /// Number of sampled outcomes per principal
    #[arg(long, default_value_t = 17)]
    pub outcomes: usize,
}

fn load_delegation(inputs: &mut Inputs, model: &Path, spec: &Path) -> Result<(DelegationModel, RegimeSpec)> {
    let m: DelegationModel = inputs.json(model)?;
    m.validate()?;
    Ok((m, inputs.json(spec)?))
}

fn failing_conditions(r: &common_agency::delegation::ConditionReport) -> Vec<String> {
    r.conditions.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect()
}

fn condition_text(r: &common_agency::delegation::ConditionReport) -> Vec<String> {
    let mut out: Vec<String> = r
        .conditions
        .iter()
        .map(|c| {
            let margin = c.margin.map_or("n/a".to_string(), |m| format!("{:.3e}", m + 0.0));
            format!("{} {}: margin {} ({})", if c.pass { "ok  " } else { "FAIL" }, c.name, margin, c.detail)
        })
        .collect();
    if let Some(k) = r.kappa {
        out.push(format!("kappa = {k}"));
    }
    out
}

pub fn delegation(cmd: &DelegationCommand, inputs: &mut Inputs) -> Result<Outcome> {
    match cmd {
        DelegationCommand::Check(a) => {
            let (m, spec) = load_delegation(inputs, &a.model, &a.spec)?;
            let r = check_regime(&m, &spec, a.grid.unwrap_or_else(|| m.grid_size()))?;
            let failed = failing_conditions(&r);
            let verdict = Verdict::from_bool(r.pass, "all conditions hold", &format!("failing: {}", failed.join(", ")));
            Ok(Outcome::new(json!({ "spec": spec, "report": r }), verdict, condition_text(&r)))
        }
        DelegationCommand::Build(a) => {
            let (m, spec) = load_delegation(inputs, &a.model, &a.spec)?;
            let r = check_regime(&m, &spec, a.grid.unwrap_or_else(|| m.grid_size()))?;
            let mut text = condition_text(&r);
            if !r.pass {
                let failed = failing_conditions(&r);
                let verdict = Verdict::Fail(format!("not constructed; failing: {}", failed.join(", ")));
                return Ok(Outcome::new(json!({ "spec": spec, "report": r, "profile": null }), verdict, text));
            }
            let p = build_delegation_profile(&m, &spec, &r)?;
            if let Some(b) = p.bliss_residual {
                text.push(format!("bliss residual {b:.3e}"));
            }
            if let Some(s) = p.slack {
                text.push(format!("envelope slack {s:.3e}"));
            }
            Ok(Outcome::new(json!({ "spec": spec, "report": r, "profile": p }), Verdict::Pass("constructed".into()), text))
        }
        DelegationCommand::Xval(a) => {
            let (m, spec) = load_delegation(inputs, &a.model, &a.spec)?;
            let x = cross_validate_discretized(&m, &spec, a.types, a.outcomes)?;
            let close = x.found && x.sup_distance.is_some_and(|d| d <= x.outcome_step);
            let mut text = vec![format!(
                "{} types × {} outcomes, step {}, {} round(s)",
                x.n_types, x.n_outcomes, x.outcome_step, x.rounds
            )];
            match x.sup_distance {
                Some(d) => text.push(format!("sup distance to closed form {d}")),
                None => text.push("no mutual screening profile reached".into()),
            }
            let verdict = Verdict::from_bool(close, "within one outcome step", "finite solution departs from closed form");
            Ok(Outcome::new(to_value(&x), verdict, text))
        }
    }
}

// ---------------------------------------------------------------------------
// bundling

#[derive(Subcommand, Debug)]
pub enum BundlingCommand {
    /// Participation cutoff type
    Tstar {
        #[command(flatten)]
        model: ModelArg,
        /// Base bundle (e.g. "1"); defaults to the jointly optimal pair
        #[arg(long)]
        base: Option<String>,
    },
    /// Jointly optimal bundle pairs
    Pairs {
        #[command(flatten)]
        model: ModelArg,
    },
    /// Check a pair of priced menus for market splitting
    SplitCheck {
        #[command(flatten)]
        model: ModelArg,
        /// Menu of seller 1 (array of {bundle, price})
        #[arg(long, value_name = "FILE")]
        menu1: PathBuf,
        /// Menu of seller 2
        #[arg(long, value_name = "FILE")]
        menu2: PathBuf,
    },
    /// Construct a base-plus-upgrades menu
    BuildUpgrades {
        #[command(flatten)]
        model: ModelArg,
        /// Base bundle held by seller 1
        #[arg(long, default_value = "1")]
        base: String,
    },
    /// Monotone-differences check on virtual surplus
    Mdstar {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value = "1")]
        base: String,
    },
}

#[derive(Args, Debug)]
pub struct ModelArg {
    /// Bundling model (JSON)
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
}

impl ModelArg {
    fn load(&self, inputs: &mut Inputs) -> Result<BundlingModel> {
        let m: BundlingModel = inputs.json(&self.model)?;
        m.validate()?;
        Ok(m)
    }
}

fn pair_labels(pairs: &[(u32, u32)]) -> Vec<(String, String)> {
    pairs.iter().map(|&(a, b)| (bundle_label(a), bundle_label(b))).collect()
}

pub fn bundling(cmd: &BundlingCommand, inputs: &mut Inputs) -> Result<Outcome> {
    match cmd {
        BundlingCommand::Tstar { model, base } => {
            let m = model.load(inputs)?;
            let variant = match base {
                Some(b) => TStarVariant::Base { bundle: parse_bundle(b, m.goods)? },
                None => TStarVariant::MarketSplit,
            };
            let ts = find_tstar(&m, variant)?;
            let text = vec![format!("t* = {:.12}{}", ts.t, if ts.boundary { " (lower boundary)" } else { "" })];
            Ok(Outcome::new(json!({ "variant": variant, "tstar": ts }), Verdict::Info, text))
        }
        BundlingCommand::Pairs { model } => {
            let m = model.load(inputs)?;
            let pairs = jointly_optimal_pairs(&m)?;
            let labels = pair_labels(&pairs);
            let text = vec![
                format!("{} ordered pair(s), {} unordered", pairs.len(), unordered_count(&pairs)),
                labels.iter().map(|(a, b)| format!("({a}, {b})")).collect::<Vec<_>>().join(" "),
            ];
            let output = json!({ "ordered": labels, "ordered_count": pairs.len(), "unordered_count": unordered_count(&pairs) });
            Ok(Outcome::new(output, Verdict::Info, text))
        }
        BundlingCommand::SplitCheck { model, menu1, menu2 } => {
            let m = model.load(inputs)?;
            let m1: PricedMenu = inputs.json(menu1)?;
            let m2: PricedMenu = inputs.json(menu2)?;
            let r = check_market_splitting(&m, &m1, &m2)?;
            let audit = participation_audit(&m, &m1, &m2, r.tstar);
            let mut text = vec![format!("t* = {:.12}, common price {:.12}", r.tstar, r.price)];
            if let Some(v) = &r.violation {
                text.push(format!("violation: {v}"));
            }
            text.push(format!("participation: {} grid violation(s)", audit.violations.len()));
            let verdict = Verdict::from_bool(r.pass && audit.pass, "market splitting", "not market splitting");
            Ok(Outcome::new(json!({ "split": r, "participation": audit }), verdict, text))
        }
        BundlingCommand::BuildUpgrades { model, base } => {
            let m = model.load(inputs)?;
            let base = parse_bundle(base, m.goods)?;
            match build_base_plus_upgrades(&m, base) {
                Ok(u) => {
                    let items: Vec<String> =
                        u.upgrade_menu.iter().map(|i| format!("{} @ {:.9}", bundle_label(i.bundle), i.price)).collect();
                    let text = vec![
                        format!("structure {:?}, upgrades: {}", u.structure, items.join(", ")),
                        format!("breakpoints {:?}; IC {} IR {}", u.breakpoints, u.ic_pass, u.ir_pass),
                    ];
                    let verdict = Verdict::from_bool(u.ic_pass && u.ir_pass, "incentive compatible", "IC or IR fails");
                    Ok(Outcome::new(to_value(&u), verdict, text))
                }
                Err(Error::Precondition(why)) => {
                    let md = check_md_star(&m, base)?;
                    let text = vec![format!("not constructed: {why}")];
                    Ok(Outcome::new(json!({ "mdstar": md }), Verdict::Fail(format!("not constructed: {why}")), text))
                }
                Err(e) => Err(e.into()),
            }
        }
        BundlingCommand::Mdstar { model, base } => {
            let m = model.load(inputs)?;
            let md = check_md_star(&m, parse_bundle(base, m.goods)?)?;
            let text = vec![format!(
                "worst reversal {:.3e}, {} violating pair(s), scope: {}",
                md.worst_reversal,
                md.violations.len(),
                md.scope
            )];
            let verdict = Verdict::from_bool(md.pass, "monotone differences", "differences reverse");
            Ok(Outcome::new(to_value(&md), verdict, text))
        }
    }
}

// ---------------------------------------------------------------------------
// envelope-audit

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SenseArg {
    Max,
    Min,
}

#[derive(Args, Debug)]
pub struct EnvelopeArgs {
    /// Sampled family (JSON grid plus member arrays)
    #[arg(long, value_name = "FILE")]
    pub family: PathBuf,

    #[arg(long, value_enum, default_value = "max")]
    pub sense: SenseArg,

    /// Largest accepted integral-identity residual
    #[arg(long, default_value_t = 1e-6)]
    pub residual_tol: f64,

    /// Include the sampled envelope and active sets
    #[arg(long)]
    pub full: bool,
}

pub fn envelope(args: &EnvelopeArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let family: SampledFamily = inputs.json(&args.family)?;
    family.validate()?;
    let sense = match args.sense {
        SenseArg::Max => Sense::Max,
        SenseArg::Min => Sense::Min,
    };
    let audit = pointwise_envelope(&family, sense)?;
    let kinks = kink_audit(&audit);
    let residual = envelope_integral_check(&audit);
    let mut output = json!({
        "sense": audit.sense,
        "kinks": audit.kinks,
        "kink_audit": kinks,
        "lipschitz": audit.lipschitz,
        "max_integral_residual": residual,
        "tolerance": audit.tolerance,
    });
    if args.full {
        output["t"] = to_value(&audit.t);
        output["values"] = to_value(&audit.values);
        output["active"] = to_value(&audit.active);
        output["integral_residual"] = to_value(&audit.integral_residual);
    }
    let mut text: Vec<String> = audit
        .kinks
        .iter()
        .map(|k| format!("kink at {:.6}: slope {:.6} → {:.6} ({})", k.at, k.left_slope, k.right_slope, if k.upward { "upward" } else { "DOWNWARD" }))
        .collect();
    text.push(format!(
        "Lipschitz quotient {:.6} vs member bound {:.6}; integral residual {:.3e}",
        audit.lipschitz.quotient, audit.lipschitz.member_bound, residual
    ));
    let pass = kinks.pass && audit.lipschitz.pass && residual <= args.residual_tol;
    let verdict = Verdict::from_bool(pass, "upward kinks, Lipschitz, integral identity", "envelope audit fails");
    Ok(Outcome::new(output, verdict, text))
}
