use clap::Args;
use latentid::adjust::intervene_truncated;
use latentid::data::write_probs;
use latentid::latent::{generate_latent_model, proxy_design, random_spec, LatentModelSpec, SyntheticConfig};
use latentid::{CausalDiagram, Rational};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{Ctx, Outcome};
use crate::report::Failure;
use crate::OutputArgs;

pub const K_RANGE: std::ops::RangeInclusive<usize> = 2..=8;
pub const MAX_STRATA: usize = 16;

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Number of latent categories.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of covariate strata.
    #[arg(long, default_value_t = 1)]
    pub strata: usize,
    /// Writes `PREFIX.csv`, `PREFIX.design.json`, `PREFIX.model.json` and `PREFIX.truth.json`.
    #[arg(long, value_name = "PREFIX")]
    pub out_prefix: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(args: &SimulateArgs, ctx: &mut Ctx) -> Result<Outcome, Failure> {
    ctx.parameters = json!({"k": args.k, "seed": args.seed, "strata": args.strata});
    if !K_RANGE.contains(&args.k) {
        return Err(Failure::input(
            "usage",
            format!("--k {} outside {}..={}", args.k, K_RANGE.start(), K_RANGE.end()),
        ));
    }
    if !(1..=MAX_STRATA).contains(&args.strata) {
        return Err(Failure::input("usage", format!("--strata {} outside 1..={MAX_STRATA}", args.strata)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let spec = random_spec(&SyntheticConfig::new(args.k, args.strata), &mut rng)
        .map_err(|e| Failure::input("spec", e.to_string()))?;
    let (truth, observable) = generate_latent_model(&spec).map_err(|e| Failure::input("spec", e.to_string()))?;
    let design = proxy_design(&spec);
    let g = diagram(&spec);
    let (u, w) = (spec.latent.name.as_str(), spec.children[2].variable.name.as_str());

    let effects = spec
        .latent
        .categories
        .iter()
        .map(|c| {
            intervene_truncated(&truth, &g, (u, c), w)
                .map(|d| json!({"exposure": {"variable": u, "value": c}, "outcome": w, "distribution": d.to_json()}))
                .map_err(|e| Failure::input("spec", e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut csv = Vec::new();
    write_probs(&observable, &mut csv).map_err(|e| Failure::input("io", e.to_string()))?;
    let pretty = |v: &serde_json::Value| serde_json::to_string_pretty(v).expect("json serializes") + "\n";
    let files = [
        (format!("{}.csv", args.out_prefix), String::from_utf8(csv).expect("csv is UTF-8")),
        (format!("{}.design.json", args.out_prefix), pretty(&json!(design))),
        (format!("{}.model.json", args.out_prefix), pretty(&json!(g.to_json()))),
        (
            format!("{}.truth.json", args.out_prefix),
            pretty(&json!({"spec": spec.to_json(), "joint": truth.to_json(), "effects": effects})),
        ),
    ];
    for (path, text) in &files {
        std::fs::write(path, text).map_err(|e| Failure::input("io", format!("cannot write {path}: {e}")))?;
    }
    let names: Vec<&str> = files.iter().map(|(p, _)| p.as_str()).collect();
    let summary = format!(
        "k = {}, {} strata, seed {}: wrote {}\n",
        args.k,
        args.strata,
        args.seed,
        names.join(", ")
    );
    Ok(Outcome::ok(json!({"files": names, "observed": observable.names()}), summary))
}

/// The latent causes every child; the covariate, if any, causes everything.
fn diagram(spec: &LatentModelSpec<Rational>) -> CausalDiagram {
    let u = spec.latent.name.as_str();
    let children: Vec<&str> = spec.children.iter().map(|c| c.variable.name.as_str()).collect();
    let mut vertices = vec![u];
    vertices.extend(&children);
    let mut edges: Vec<(&str, &str)> = children.iter().map(|c| (u, *c)).collect();
    if let Some(z) = &spec.stratum {
        vertices.push(&z.name);
        edges.extend(std::iter::once(u).chain(children.iter().copied()).map(|v| (z.name.as_str(), v)));
    }
    CausalDiagram::new(&vertices, &edges, &[]).expect("generator diagram is acyclic")
}
