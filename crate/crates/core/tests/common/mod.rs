#![allow(dead_code)]

use std::io::Write;
use std::time::{Duration, Instant};

use covariant_dilation::covariant::{CovariantPair, Strategy};
use covariant_dilation::dynamics::{ExpectationSpec, TransferSpec};
use covariant_dilation::extension::ChainOptions;
use covariant_dilation::fixtures;
use covariant_dilation::numerics::{random_complex_matrix, CMat};
use covariant_dilation::Tolerance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Case {
    pub name: String,
    pub pair: CovariantPair,
    pub levels: usize,
    pub copies: usize,
    pub strategy: Strategy,
}

impl Case {
    pub fn options(&self) -> ChainOptions {
        ChainOptions::new(self.levels, self.strategy.clone())
    }

    pub fn is_tower(&self) -> bool {
        self.pair.dynamics().is_tower()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit vector state on `M_k` from a random vector.
pub fn random_vector_state<R: Rng>(rng: &mut R, k: usize) -> CMat {
    let v = random_complex_matrix(k, 1, rng);
    let v = &v / covariant_dilation::numerics::real(v.norm());
    &v * v.adjoint()
}

/// Seeded corpus over both backends: fixtures, random finite pairs with
/// `N, M ≤ 3`, and random tower pairs at depth 2 with `N ≤ 2`, `M = 1`.
pub fn corpus(seed: u64) -> Vec<Case> {
    let tol = Tolerance::default();
    let mut r = rng(seed);
    let mut out = Vec::new();
    out.push(Case {
        name: "scalar 0.6".into(),
        pair: fixtures::scalar_pair(0.6, &tol).unwrap(),
        levels: 3,
        copies: 3,
        strategy: Strategy::Adapted(TransferSpec::Inverse),
    });
    out.push(Case {
        name: "automorphism fixture".into(),
        pair: fixtures::automorphism_pair(&mut r, 0.7, &tol).unwrap(),
        levels: 2,
        copies: 2,
        strategy: Strategy::Adapted(TransferSpec::Inverse),
    });
    out.push(Case {
        name: "tower fixture".into(),
        pair: fixtures::tower_pair(2, 4, 2, 0.5, &tol).unwrap(),
        levels: 2,
        copies: 1,
        strategy: Strategy::Adapted(TransferSpec::Phi(CMat::identity(2, 2) * covariant_dilation::numerics::real(0.5))),
    });
    for i in 0..40 {
        let strategy = if i % 4 == 3 {
            Strategy::Gns(ExpectationSpec::Identity)
        } else {
            Strategy::Adapted(TransferSpec::Inverse)
        };
        out.push(Case {
            name: format!("finite #{i}"),
            pair: fixtures::random_finite_pair(&mut r, &tol).unwrap(),
            levels: 1 + i % 3,
            copies: 1 + (i / 3) % 3,
            strategy,
        });
    }
    for i in 0..12 {
        let phi = if i % 3 == 1 {
            random_vector_state(&mut r, 2)
        } else {
            CMat::identity(2, 2) * covariant_dilation::numerics::real(0.5)
        };
        let strategy = if i % 3 == 2 {
            Strategy::Gns(ExpectationSpec::Phi(phi))
        } else {
            Strategy::Adapted(TransferSpec::Phi(phi))
        };
        out.push(Case {
            name: format!("tower #{i}"),
            pair: fixtures::random_tower_pair(&mut r, &tol).unwrap(),
            levels: 1 + i % 2,
            copies: 1,
            strategy,
        });
    }
    out
}

pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

pub const TIME_BUDGET: Duration = Duration::from_secs(10);

/// Runs one criterion and writes its PASS/FAIL line straight to stderr, so it
/// shows up even when the test harness captures output.
pub fn criterion(id: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= TIME_BUDGET;
    let ok = out.passed && in_time;
    let line = format!(
        "{} [{id}] {title}: {}{} ({:.2} s)\n",
        if ok { "PASS" } else { "FAIL" },
        out.detail,
        if in_time { "" } else { "; over the 10 s budget" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    ok
}
