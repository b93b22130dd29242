use clap::Args;
use latentid::data::load_csv;
use latentid::identify::{
    effect_from_joint, identify_joint_with, order_free_bounds, select_max_det, CausalEffect, IdentifyOptions,
    ProxyDesign,
};
use latentid::{CausalDiagram, Criterion, JointTable};
use serde_json::{json, Value};

use super::{graph_failure, identify_failure, table_failure, Ctx, Outcome};
use crate::report::{Diagnostic, Failure};
use crate::OutputArgs;

#[derive(Debug, Clone, Args)]
pub struct IdentifyArgs {
    /// Observed joint: `var1,...,varN,count` or `...,prob`.
    pub data: String,
    /// Latent declaration, proxy roles and selected value vectors.
    pub design: String,
    /// Diagram over the observed variables and the latent.
    pub model: String,
    /// Exposure for the causal effect (inferred from the diagram if omitted).
    #[arg(long, requires = "outcome")]
    pub exposure: Option<String>,
    #[arg(long, requires = "exposure")]
    pub outcome: Option<String>,
    /// Replace the design's proxy selections with the best-conditioned pair.
    #[arg(long)]
    pub select_max_det: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(args: &IdentifyArgs, ctx: &mut Ctx) -> Result<Outcome, Failure> {
    ctx.parameters = json!({
        "exposure": args.exposure,
        "outcome": args.outcome,
        "select_max_det": args.select_max_det,
    });
    let data = ctx.read(&args.data)?;
    let table = load_csv(data.as_bytes(), None).map_err(|e| table_failure(&args.data, e))?;
    let design_text = ctx.read(&args.design)?;
    let mut design = ProxyDesign::parse_json(&design_text).map_err(|e| Failure::input("design", format!("{}: {e}", args.design)))?;
    let model_text = ctx.read(&args.model)?;
    let g = CausalDiagram::parse_json(&model_text).map_err(graph_failure)?;

    if args.select_max_det {
        design = select_max_det(&table, &design).map_err(identify_failure)?;
    }
    let opts = IdentifyOptions {
        exec: ctx.exec,
        ..IdentifyOptions::default()
    };
    let pair = match (&args.exposure, &args.outcome) {
        (Some(x), Some(y)) => Some((x.clone(), y.clone())),
        _ => infer_pair(&g, &design).map_err(graph_failure)?,
    };

    if !design.latent.order_known {
        return order_free(ctx, &table, &design, pair, &opts);
    }

    let joint = identify_joint_with(&table, &design, &opts).map_err(identify_failure)?;
    let mut summary = String::new();
    for s in &joint.strata {
        let z = if s.matrices.z.is_empty() {
            "all data".to_string()
        } else {
            s.matrices.z.iter().map(|(n, l)| format!("{n}={l}")).collect::<Vec<_>>().join(",")
        };
        summary.push_str(&format!(
            "stratum {z}: eigenvalues {}, f({} | z) = {}\n",
            fmt_list(&s.lambdas),
            design.latent.name,
            fmt_list(&s.factors.m)
        ));
    }

    let mut effects: Vec<CausalEffect> = Vec::new();
    match &pair {
        None => ctx.diagnostics.push(Diagnostic::info(
            "no-effect",
            format!("no proxy of {} is its cause or effect in the diagram", design.latent.name),
        )),
        Some((x, y)) => {
            let cats = joint.table.variable(x).map_err(|e| table_failure("reconstructed joint", e))?.categories.clone();
            for c in &cats {
                match effect_from_joint(&joint, &g, &design, (x, c), y) {
                    Ok(e) => effects.push(e),
                    Err(e @ latentid::identify::IdentifyError::NoCriterion(_)) => {
                        ctx.warn(e.code(), format!("effect of {x} on {y}: {e}"));
                        break;
                    }
                    Err(e) => return Err(identify_failure(e)),
                }
            }
        }
    }
    for e in &effects {
        summary.push_str(&effect_line(e));
    }
    let outputs = json!({
        "design": design,
        "reconstruction": joint.to_json(),
        "effects": effects.iter().map(CausalEffect::to_json).collect::<Vec<Value>>(),
    });
    Ok(Outcome::ok(outputs, summary))
}

/// With the latent's order unknown, only labeling-free intervals are reported.
fn order_free(
    ctx: &mut Ctx,
    table: &JointTable,
    design: &ProxyDesign,
    pair: Option<(String, String)>,
    opts: &IdentifyOptions,
) -> Result<Outcome, Failure> {
    ctx.warn(
        "order-unknown",
        format!(
            "the order of {}'s categories is not asserted; reporting intervals valid under every labeling",
            design.latent.name
        ),
    );
    let x = match pair {
        Some((x, y)) if y == design.latent.name => x,
        _ => {
            return Err(Failure::input(
                "pattern",
                format!("order-free intervals need an exposure that causes {}", design.latent.name),
            ))
        }
    };
    let cats = table.variable(&x).map_err(|e| table_failure("data", e))?.categories.clone();
    let mut rows = Vec::new();
    let mut summary = String::new();
    for c in &cats {
        let b = order_free_bounds(table, design, (&x, c), opts).map_err(identify_failure)?;
        summary.push_str(&format!(
            "f({} = y | set({x}={c})) under any labeling of y: [{:.6}, {:.6}]\n",
            design.latent.name, b.lower, b.upper
        ));
        rows.push(json!({"exposure": {"variable": x, "value": c}, "bounds": b}));
    }
    Ok(Outcome::ok(json!({"design": design, "order_free": rows}), summary))
}

/// The first `W` variable that is a cause or an effect of the latent.
fn infer_pair(g: &CausalDiagram, design: &ProxyDesign) -> Result<Option<(String, String)>, latentid::GraphError> {
    let u = &design.latent.name;
    if !g.contains(u) {
        return Ok(None);
    }
    for w in &design.roles.w {
        if !g.contains(w) {
            continue;
        }
        if g.is_descendant(u, w)? {
            return Ok(Some((w.clone(), u.clone())));
        }
        if g.is_descendant(w, u)? {
            return Ok(Some((u.clone(), w.clone())));
        }
    }
    Ok(None)
}

fn effect_line(e: &CausalEffect) -> String {
    let how = match e.criterion {
        Criterion::FrontDoor => "front-door",
        _ => "back-door",
    };
    let probs: Vec<String> = e
        .distribution
        .cells()
        .map(|(idx, p)| format!("{}={p:.6}", e.distribution.variables()[0].categories[idx[0]]))
        .collect();
    format!(
        "f({} | set({}={})): {} ({how}, adjusting for {{{}}})\n",
        e.outcome,
        e.exposure.0,
        e.exposure.1,
        probs.join(", "),
        e.adjustment.join(", ")
    )
}

fn fmt_list(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", "))
}
