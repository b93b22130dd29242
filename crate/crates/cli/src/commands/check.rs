use clap::{Args, ValueEnum};
use latentid::{CausalDiagram, CriterionReport};
use serde_json::json;

use super::{graph_failure, split_list, Ctx, Outcome};
use crate::report::{Failure, EXIT_CRITERION};
use crate::OutputArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Backdoor,
    Frontdoor,
    Dsep,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Diagram as `{"vertices": [...], "directed": [[a, b]], "bidirected": [[a, b]]}`.
    pub model: String,
    /// Exposure and outcome (or the two vertices to separate).
    #[arg(long, value_name = "X,Y")]
    pub pair: String,
    /// Adjustment or conditioning set.
    #[arg(long, value_name = "Z1,Z2,...")]
    pub set: Option<String>,
    #[arg(long, value_enum)]
    pub criterion: CriterionArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(args: &CheckArgs, ctx: &mut Ctx) -> Result<Outcome, Failure> {
    let pair = split_list("pair", &args.pair)?;
    let set = match &args.set {
        Some(s) if !s.trim().is_empty() => split_list("set", s)?,
        _ => Vec::new(),
    };
    ctx.parameters = json!({
        "criterion": format!("{:?}", args.criterion).to_lowercase(),
        "pair": pair,
        "set": set,
    });
    let [x, y] = <[String; 2]>::try_from(pair).map_err(|p| Failure::input("usage", format!("--pair needs two names, got {p:?}")))?;

    let text = ctx.read(&args.model)?;
    let g = CausalDiagram::parse_json(&text).map_err(graph_failure)?;
    let report = match args.criterion {
        CriterionArg::Backdoor => g.satisfies_backdoor(&x, &y, &set),
        CriterionArg::Frontdoor => g.satisfies_frontdoor(&x, &y, &set),
        CriterionArg::Dsep => g.d_separation_report(std::slice::from_ref(&x), std::slice::from_ref(&y), &set),
    }
    .map_err(graph_failure)?;

    let summary = summarize(&report, &x, &y, &set);
    let mut out = Outcome::ok(serde_json::to_value(&report).expect("report serializes"), summary);
    if !report.holds {
        out.exit = EXIT_CRITERION;
    }
    Ok(out)
}

fn summarize(r: &CriterionReport, x: &str, y: &str, set: &[String]) -> String {
    let name = match r.criterion {
        latentid::Criterion::DSeparation => "d-separation",
        latentid::Criterion::BackDoor => "back-door criterion",
        latentid::Criterion::FrontDoor => "front-door criterion",
    };
    let given = format!("{{{}}}", set.join(", "));
    if r.holds {
        return format!("{name} holds for ({x}, {y}) with {given}\n");
    }
    let mut s = format!("{name} fails for ({x}, {y}) with {given}");
    if let Some(c) = r.failing_clause {
        s.push_str(&format!(": clause {c}"));
    }
    if let Some(p) = &r.path_display {
        s.push_str(&format!(", open path {p}"));
    }
    s.push('\n');
    s
}
