use clap::{Args, ValueEnum};
use latentid::bounds::{
    certify_against_lp_with, closed_form_bounds, lp_bounds_both, stratified_bounds_with, stratify, Binary, BoundsResult,
    Convention, Proxies, ProxyRoles, ProxyTable,
};
use latentid::data::load_csv;
use latentid::rational::{format_rational, to_f64};
use latentid::JointTable;
use serde_json::json;

use super::{bounds_failure, split_list, table_failure, Ctx, Outcome};
use crate::report::Failure;
use crate::OutputArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    /// Cells are `P(t, s | x)`.
    Conditional,
    /// Cells are the joint `P(t, s, x)`.
    JointCompat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Exact linear program over response types.
    Lp,
    /// Four-term closed forms (assume monotonicity).
    Closed,
    /// Both, with the program certifying the closed forms.
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// Observed joint with a binary exposure and two binary proxies.
    pub data: String,
    #[arg(long)]
    pub exposure: String,
    /// The two proxies of the unobserved outcome, `T` first.
    #[arg(long, value_name = "T,S")]
    pub proxies: String,
    /// Covariates to stratify on; bounds are averaged with weights `P(z)`.
    #[arg(long, value_name = "Z1,Z2,...")]
    pub stratify: Option<String>,
    /// Assume every arrow is non-decreasing in its parent.
    #[arg(long)]
    pub monotone: bool,
    #[arg(long, value_enum, default_value = "conditional")]
    pub convention: ConventionArg,
    /// Defaults to `lp`; not accepted with `--stratify`.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Category coded as level 0 and level 1, e.g. `S=s1,s0`.
    #[arg(long, value_name = "VAR=ZERO,ONE")]
    pub levels: Vec<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(args: &BoundsArgs, ctx: &mut Ctx) -> Result<Outcome, Failure> {
    let proxies = split_list("proxies", &args.proxies)?;
    let strata_vars = match &args.stratify {
        Some(s) => split_list("stratify", s)?,
        None => Vec::new(),
    };
    let convention = match args.convention {
        ConventionArg::Conditional => Convention::Conditional,
        ConventionArg::JointCompat => Convention::JointCompat,
    };
    let overrides = args.levels.iter().map(|l| parse_levels(l)).collect::<Result<Vec<_>, _>>()?;
    ctx.parameters = json!({
        "exposure": args.exposure,
        "proxies": proxies,
        "stratify": strata_vars,
        "monotone": args.monotone,
        "convention": convention,
        "method": args.method.map(|m| format!("{m:?}").to_lowercase()),
        "levels": overrides.iter().map(|(v, z, o)| json!({"variable": v, "levels": [z, o]})).collect::<Vec<_>>(),
    });
    let [t, s] = <[String; 2]>::try_from(proxies).map_err(|p| Failure::input("usage", format!("--proxies needs two names, got {p:?}")))?;
    if !strata_vars.is_empty() && args.method.is_some() {
        return Err(Failure::input(
            "usage",
            "--method is not accepted with --stratify: strata use closed forms when monotone and the exact program otherwise",
        ));
    }
    let method = args.method.unwrap_or(MethodArg::Lp);
    if convention == Convention::JointCompat && method != MethodArg::Closed {
        return Err(Failure::input(
            "usage",
            "the exact program reads conditionals; --convention joint-compat applies to closed forms only",
        ));
    }

    let text = ctx.read(&args.data)?;
    let table = load_csv(text.as_bytes(), None).map_err(|e| table_failure(&args.data, e))?;
    let roles = roles(&table, &args.exposure, &t, &s, &overrides)?;
    let mut summary = format!(
        "levels: {} = ({}, {}), {} = ({}, {}), {} = ({}, {})\n",
        roles.x.name, roles.x.levels[0], roles.x.levels[1], roles.t.name, roles.t.levels[0], roles.t.levels[1], roles.s.name,
        roles.s.levels[0], roles.s.levels[1],
    );
    let outputs = if !strata_vars.is_empty() {
        let z: Vec<&str> = strata_vars.iter().map(String::as_str).collect();
        let strata = stratify(&table, &roles, &z, convention).map_err(bounds_failure)?;
        let res = stratified_bounds_with(&strata, args.monotone, ctx.exec).map_err(bounds_failure)?;
        summary.push_str(&format!("{} strata with positive mass\n", strata.len()));
        push_bounds(&mut summary, &roles, &res);
        let weights: Vec<_> = strata
            .iter()
            .map(|s| json!({"z": s.z, "weight": format_rational(&s.weight)}))
            .collect();
        json!({"roles": roles, "strata": weights, "bounds": res})
    } else {
        let p = ProxyTable::from_joint(&table, &roles, convention).map_err(bounds_failure)?;
        match method {
            MethodArg::Lp => {
                let res = lp_bounds_both(&p, args.monotone, Proxies::Both, ctx.exec).map_err(bounds_failure)?;
                push_bounds(&mut summary, &roles, &res);
                json!({"roles": roles, "bounds": res})
            }
            MethodArg::Closed => {
                if !args.monotone {
                    ctx.warn("assumes-monotone", "closed forms are valid only under monotonicity; pass --monotone to assert it");
                }
                let res = closed_form_bounds(&p).map_err(bounds_failure)?;
                push_bounds(&mut summary, &roles, &res);
                json!({"roles": roles, "bounds": res})
            }
            MethodArg::Both => {
                let cert = certify_against_lp_with(&p, args.monotone, ctx.exec).map_err(bounds_failure)?;
                for t in &cert.targets {
                    push_bounds(&mut summary, &roles, std::slice::from_ref(&t.lp));
                    if let (Some(cf), Some(agrees)) = (&t.closed_form, t.agrees) {
                        summary.push_str(&format!(
                            "  closed form [{}, {}]: {}\n",
                            format_rational(&cf.lower),
                            format_rational(&cf.upper),
                            if agrees { "agrees" } else { "differs" }
                        ));
                    }
                }
                json!({"roles": roles, "certification": cert})
            }
        }
    };
    Ok(Outcome::ok(outputs, summary))
}

fn parse_levels(spec: &str) -> Result<(String, String, String), Failure> {
    let bad = || Failure::input("usage", format!("--levels expects VAR=ZERO,ONE, got {spec:?}"));
    let (var, rest) = spec.split_once('=').ok_or_else(bad)?;
    let (zero, one) = rest.split_once(',').ok_or_else(bad)?;
    let (var, zero, one) = (var.trim(), zero.trim(), one.trim());
    if var.is_empty() || zero.is_empty() || one.is_empty() || zero == one {
        return Err(bad());
    }
    Ok((var.to_string(), zero.to_string(), one.to_string()))
}

fn roles(table: &JointTable, x: &str, t: &str, s: &str, overrides: &[(String, String, String)]) -> Result<ProxyRoles, Failure> {
    let mut roles = ProxyRoles::infer(table, x, t, s).map_err(bounds_failure)?;
    for (var, zero, one) in overrides {
        let slot = [&mut roles.x, &mut roles.t, &mut roles.s]
            .into_iter()
            .find(|b| &b.name == var)
            .ok_or_else(|| Failure::input("usage", format!("--levels: {var} is not the exposure or a proxy")))?;
        let mut given = [zero.clone(), one.clone()];
        given.sort();
        let mut have = slot.levels.clone();
        have.sort();
        if given != have {
            return Err(Failure::input(
                "usage",
                format!("--levels: {var} has categories {:?}", slot.levels),
            ));
        }
        *slot = Binary::new(var, zero, one);
    }
    Ok(roles)
}

fn push_bounds(out: &mut String, roles: &ProxyRoles, res: &[BoundsResult]) {
    for r in res {
        out.push_str(&format!(
            "P(outcome at level 1 | set({} = {})) in [{}, {}] = [{:.6}, {:.6}]\n",
            roles.x.name,
            roles.x.levels[r.target.level()],
            format_rational(&r.lower),
            format_rational(&r.upper),
            to_f64(&r.lower),
            to_f64(&r.upper),
        ));
    }
}
