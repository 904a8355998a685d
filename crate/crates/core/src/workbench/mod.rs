//! Scenario-driven front end: load a JSON scenario, run one construction, and
//! emit a report listing every asserted clause with its residual.

mod commands;
pub mod report;
pub mod scenario;

use serde_json::json;

use crate::error::{Error, Result};
use crate::numerics::{self, real, CMat, ONE};

pub use commands::{compare, run, Command};
pub use report::{Clause, Report};
pub use scenario::{Overrides, RawScenario, Scenario};

pub const DEMOS: [&str; 3] = ["scalar", "automorphism", "tower"];

/// Built-in scenarios: the scalar contraction `0.6` on `ℂ`, a twisted block
/// swap on `M_2 ⊕ M_2 ⊕ ℂ`, and a rank-one shift on the tower over `M_2`.
pub fn demo_scenario(name: &str) -> Result<RawScenario> {
    let v = match name {
        "scalar" => json!({
            "schema": 1, "backend": "finite-dim", "blocks": [1], "alpha": "identity",
            "T": [[0.6]], "N": 3, "M": 3
        }),
        "automorphism" => {
            let u0 = json!([[0, 1], [1, 0]]);
            let u1 = json!([[1, 0], [0, [0, 1]]]);
            // T = 0.7i · [[0, u1*, 0], [u0*, 0, 0], [0, 0, 1]]
            let mut t = numerics::zeros(5, 5);
            t[(0, 2)] = ONE;
            t[(1, 3)] = numerics::c(0.0, -1.0);
            t[(2, 1)] = ONE;
            t[(3, 0)] = ONE;
            t[(4, 4)] = ONE;
            let t: CMat = t * numerics::c(0.0, 0.7);
            json!({
                "schema": 1, "backend": "finite-dim", "blocks": [2, 2, 1],
                "alpha": {"automorphism": {"permutation": [1, 0, 2], "unitaries": [u0, u1, [[1]]]}},
                "pi": {"multiplicities": [1, 1, 1]},
                "T": scenario::matrix_value(&t), "N": 2, "M": 2, "seed": 7
            })
        }
        "tower" => {
            // Z = c·v u* with u = (0.6, 0.8), v = e_1, c = 0.5
            let mut z = numerics::zeros(2, 2);
            z[(1, 0)] = real(0.3);
            z[(1, 1)] = real(0.4);
            json!({
                "schema": 1, "backend": "tower", "k": 2, "d_max": 4, "depth": 2,
                "T": {"shift": scenario::matrix_value(&z)},
                "strategy": {"kind": "adapted", "phi": "trace"},
                "N": 2, "M": 1
            })
        }
        other => {
            return Err(Error::validation(
                "demo",
                format!("unknown demo '{other}' (available: {})", DEMOS.join(", ")),
            ))
        }
    };
    serde_json::from_value(v).map_err(|e| Error::Parse(e.to_string()))
}

/// The partner scenario a demo is compared against: the tower with the vector
/// state `e_0` in place of `tr/k`, and otherwise the same scenario reseeded.
pub fn demo_partner(name: &str) -> Result<RawScenario> {
    let mut raw = demo_scenario(name)?;
    if name == "tower" {
        raw.strategy = Some(scenario::RawStrategy {
            kind: scenario::StrategyKind::Adapted,
            phi: Some(scenario::RawPhi::Vector(json!([1, 0]))),
            map: None,
        });
    } else {
        raw.seed = Some(raw.seed.unwrap_or(0) + 1);
    }
    Ok(raw)
}
