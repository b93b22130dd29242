//! The two-proxy worked example: observed `X`, `S`, `T` for a latent `Y`.

use crate::identify::{LatentDecl, ProxyDesign, Roles, Selection};
use crate::rational::ratio;
use crate::table::{JointTable, Variable};

/// Joint `f(x, s, t)` over `[X, S, T]`, entered exactly.
pub fn worked_table() -> JointTable {
    let vars = vec![
        Variable::new("X", ["x1", "x0"]),
        Variable::new("S", ["s1", "s0"]),
        Variable::new("T", ["t1", "t0"]),
    ];
    let cells = [648, 432, 1392, 528, 1092, 2478, 1568, 1862];
    JointTable::new(vars, cells.iter().map(|&c| ratio(c, 10_000)).collect()).expect("fixture is normalized")
}

/// `Y` latent with `f(y1) < f(y2)`, `W = {X}`, no covariates.
pub fn worked_design() -> ProxyDesign {
    let v = |s: &str| vec![s.to_string()];
    ProxyDesign {
        latent: LatentDecl {
            name: "Y".into(),
            categories: vec!["y1".into(), "y2".into()],
            order_known: true,
        },
        roles: Roles {
            s: v("S"),
            t: v("T"),
            w: v("X"),
            z: vec![],
        },
        select: Selection {
            s: vec![v("s1")],
            t: vec![v("t1")],
            w: v("x1"),
        },
    }
}
