//! Canonical diagrams for the proxy-variable scenarios.
//!
//! `X` is the exposure, `Y` the outcome, `Z` a covariate or mediator, and
//! `S`, `T` proxies of `Y`.

use super::CausalDiagram;

/// Observed confounder `Z` of `X` and `Y`; `Y` has two proxies.
pub fn observed_confounder() -> CausalDiagram {
    CausalDiagram::new(
        &["X", "Z", "Y", "S", "T"],
        &[("Z", "X"), ("Z", "Y"), ("X", "Y"), ("Y", "S"), ("Y", "T")],
        &[],
    )
    .expect("fixture is valid")
}

/// Mediator `Z` on the only directed path from `X` to `Y`, with a latent
/// `X <-> Y` confounder.
pub fn latent_confounder_mediator() -> CausalDiagram {
    CausalDiagram::new(
        &["X", "Z", "Y", "S", "T"],
        &[("X", "Z"), ("Z", "Y"), ("Y", "S"), ("Y", "T")],
        &[("X", "Y")],
    )
    .expect("fixture is valid")
}

/// Unconfounded exposure with two proxies of the outcome.
pub fn proxied_outcome() -> CausalDiagram {
    CausalDiagram::new(&["X", "Y", "S", "T"], &[("X", "Y"), ("Y", "S"), ("Y", "T")], &[]).expect("fixture is valid")
}

/// As [`proxied_outcome`], with latent confounding among the outcome and its proxies.
pub fn proxied_outcome_confounded() -> CausalDiagram {
    CausalDiagram::new(
        &["X", "Y", "S", "T"],
        &[("X", "Y"), ("Y", "S"), ("Y", "T")],
        &[("Y", "S"), ("Y", "T"), ("S", "T")],
    )
    .expect("fixture is valid")
}
