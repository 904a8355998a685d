//! Scenario files: the JSON schema, complex-matrix parsing, and the validation
//! gates every scenario passes before a construction runs.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algebra::{Algebra, BlockAutomorphism, DenseMap, LinearMap, Representation};
use crate::cpmaps::verify_transfer;
use crate::covariant::{CovariantPair, Strategy};
use crate::dynamics::{Dynamics, ExpectationSpec, FiniteDynamics, TransferSpec};
use crate::error::{Error, Result};
use crate::extension::ChainOptions;
use crate::numerics::{self, spectral_norm, CMat, Tolerance, C64};
use crate::tower::{ShiftTower, DEFAULT_SIZE_CAP};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    FiniteDim,
    Tower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawAlpha {
    Identity,
    Shift,
    Automorphism { permutation: Vec<usize>, unitaries: Vec<Value> },
    CoordinateMap(Value),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicities: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Adapted,
    Gns,
}

/// Slice state on `M_k` for the tower backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawPhi {
    Trace,
    Vector(Value),
    Density(Value),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStrategy {
    pub kind: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<RawPhi>,
    /// Coordinate matrix of `τ` (adapted) or `E` (gns), finite backend only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Value>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd_floor: Option<f64>,
}

/// A scenario exactly as written in the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub schema: u32,
    pub backend: Backend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<RawAlpha>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<RawRep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicity: Option<usize>,
    #[serde(rename = "T")]
    pub t: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<RawStrategy>,
    #[serde(rename = "N")]
    pub levels: usize,
    #[serde(rename = "M")]
    pub copies: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<RawTolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Command-line overrides, applied before validation.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub residual_tol: Option<f64>,
    pub levels: Option<usize>,
    pub copies: Option<usize>,
    pub seed: Option<u64>,
}

impl RawScenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(x) = o.residual_tol {
            self.tolerances.get_or_insert_with(RawTolerances::default).residual_tol = Some(x);
        }
        if let Some(n) = o.levels {
            self.levels = n;
        }
        if let Some(m) = o.copies {
            self.copies = m;
        }
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("scenario serializes")
    }
}

/// A validated scenario: the covariant pair and everything needed to run on it.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub raw: RawScenario,
    pub pair: CovariantPair,
    pub strategy: Strategy,
    pub levels: usize,
    pub copies: usize,
    pub tol: Tolerance,
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with(path, &Overrides::default())
    }

    pub fn load_with(path: &Path, o: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut raw = RawScenario::from_json(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        raw.apply(o);
        Self::from_raw(raw)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_raw(RawScenario::from_json(text)?)
    }

    pub fn from_raw(raw: RawScenario) -> Result<Self> {
        validate(raw)
    }

    pub fn chain_options(&self) -> ChainOptions {
        let opts = ChainOptions::new(self.levels, self.strategy.clone());
        match self.seed {
            Some(s) => opts.with_seed(s),
            None => opts,
        }
    }
}

// ---- complex values ------------------------------------------------------

pub fn parse_complex(v: &Value, path: &str) -> Result<C64> {
    let num = |x: &Value, p: &str| {
        x.as_f64()
            .filter(|f| f.is_finite())
            .ok_or_else(|| Error::Parse(format!("{p}: expected a finite number")))
    };
    match v {
        Value::Number(_) => Ok(numerics::real(num(v, path)?)),
        Value::Array(a) if a.len() == 2 => Ok(numerics::c(num(&a[0], &format!("{path}[0]"))?, num(&a[1], &format!("{path}[1]"))?)),
        _ => Err(Error::Parse(format!("{path}: expected a number or [re, im]"))),
    }
}

/// Row-major nested arrays of complex entries.
pub fn parse_matrix(v: &Value, path: &str) -> Result<CMat> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{path}: expected an array of rows")))?;
    let ncols = match rows.first() {
        Some(r) => r
            .as_array()
            .ok_or_else(|| Error::Parse(format!("{path}[0]: expected a row array")))?
            .len(),
        None => 0,
    };
    let mut m = numerics::zeros(rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Parse(format!("{path}[{i}]: expected a row array")))?;
        if row.len() != ncols {
            return Err(Error::Parse(format!("{path}[{i}]: row has {} entries, expected {ncols}", row.len())));
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = parse_complex(x, &format!("{path}[{i}][{j}]"))?;
        }
    }
    Ok(m)
}

/// A flat array of complex entries as a column.
pub fn parse_vector(v: &Value, path: &str) -> Result<CMat> {
    let xs = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{path}: expected an array")))?;
    let mut m = numerics::zeros(xs.len(), 1);
    for (i, x) in xs.iter().enumerate() {
        m[(i, 0)] = parse_complex(x, &format!("{path}[{i}]"))?;
    }
    Ok(m)
}

fn complex_value(z: C64) -> Value {
    if z.im == 0.0 {
        Value::from(z.re)
    } else {
        Value::from(vec![z.re, z.im])
    }
}

pub fn matrix_value(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_value(m[(i, j)])).collect()))
            .collect(),
    )
}

// ---- validation ----------------------------------------------------------

fn gate<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse(_) | Error::Validation { .. } => e,
        other => Error::validation(name, other.to_string()),
    })
}

fn tolerances(raw: &RawScenario) -> Result<Tolerance> {
    let d = Tolerance::default();
    let t = raw.tolerances.clone().unwrap_or_default();
    gate(
        "tolerances",
        Tolerance::new(
            t.rank_eps.unwrap_or(d.rank_eps),
            t.residual_tol.unwrap_or(d.residual_tol),
            t.psd_floor.unwrap_or(d.psd_floor),
        ),
    )
}

fn forbid(present: bool, field: &str, backend: &str) -> Result<()> {
    if present {
        return Err(Error::validation("backend", format!("\"{field}\" does not apply to the {backend} backend")));
    }
    Ok(())
}

fn validate(raw: RawScenario) -> Result<Scenario> {
    if raw.schema != SCHEMA_VERSION {
        return Err(Error::validation("schema", format!("schema {} is not supported (expected {SCHEMA_VERSION})", raw.schema)));
    }
    let tol = tolerances(&raw)?;
    if raw.levels == 0 {
        return Err(Error::validation("truncation", "N must be at least 1"));
    }
    if raw.copies == 0 {
        return Err(Error::validation("truncation", "M must be at least 1"));
    }
    let (dynamics, depth, pi, t, strategy) = match raw.backend {
        Backend::FiniteDim => finite_parts(&raw, &tol)?,
        Backend::Tower => tower_parts(&raw, &tol)?,
    };
    if t.shape() != (pi.dim(), pi.dim()) {
        return Err(Error::validation(
            "shape",
            format!("T is {}×{} but π acts on dimension {}", t.nrows(), t.ncols(), pi.dim()),
        ));
    }
    let norm = spectral_norm(&t);
    if norm > 1.0 + tol.rank_eps {
        return Err(Error::validation("contraction", format!("‖T‖ = {norm:.6} exceeds 1")));
    }
    let pair = CovariantPair::new(dynamics, depth, pi, t, &tol).map_err(|e| match e {
        Error::NotCovariant { .. } => Error::validation("covariance", e.to_string()),
        Error::NotContraction { .. } => Error::validation("contraction", e.to_string()),
        other => Error::validation("shape", other.to_string()),
    })?;
    check_strategy(&pair, &strategy, &tol)?;
    Ok(Scenario {
        levels: raw.levels,
        copies: raw.copies,
        seed: raw.seed,
        raw,
        pair,
        strategy,
        tol,
    })
}

type Parts = (Dynamics, usize, Representation, CMat, Strategy);

fn finite_parts(raw: &RawScenario, tol: &Tolerance) -> Result<Parts> {
    for (present, field) in [
        (raw.k.is_some(), "k"),
        (raw.d_max.is_some(), "d_max"),
        (raw.depth.is_some(), "depth"),
        (raw.multiplicity.is_some(), "multiplicity"),
    ] {
        forbid(present, field, "finite-dim")?;
    }
    let blocks = raw
        .blocks
        .clone()
        .ok_or_else(|| Error::validation("algebra", "the finite-dim backend needs \"blocks\""))?;
    let alg = gate("algebra", Algebra::new(blocks.clone()))?;
    let dynamics = match raw.alpha.as_ref().unwrap_or(&RawAlpha::Identity) {
        RawAlpha::Identity => FiniteDynamics::identity(alg.clone()),
        RawAlpha::Shift => return Err(Error::validation("alpha", "the shift needs the tower backend")),
        RawAlpha::Automorphism { permutation, unitaries } => {
            let us = unitaries
                .iter()
                .enumerate()
                .map(|(i, u)| parse_matrix(u, &format!("$.alpha.automorphism.unitaries[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            let aut = gate("alpha", BlockAutomorphism::new(alg.clone(), permutation.clone(), us, tol))?;
            gate("alpha", FiniteDynamics::new(Arc::new(aut), tol))?
        }
        RawAlpha::CoordinateMap(m) => {
            let m = parse_matrix(m, "$.alpha.coordinate_map")?;
            let map = gate("alpha", DenseMap::new(alg.clone(), alg.clone(), m))?;
            gate("alpha", FiniteDynamics::new(Arc::new(map), tol))?
        }
    };
    let t = parse_matrix(&raw.t, "$.T")?;
    let rep = raw.pi.clone().unwrap_or(RawRep {
        multiplicities: None,
        frame: None,
    });
    let mult = match rep.multiplicities {
        Some(m) => m,
        None => {
            let unit: usize = blocks.iter().sum();
            if t.nrows() % unit != 0 {
                return Err(Error::validation(
                    "representation",
                    format!("dimension {} is not a multiple of Σ n_i = {unit}; give \"pi.multiplicities\"", t.nrows()),
                ));
            }
            vec![t.nrows() / unit; blocks.len()]
        }
    };
    let pi = match rep.frame {
        Some(f) => {
            let f = parse_matrix(&f, "$.pi.frame")?;
            gate("representation", Representation::with_frame(alg.clone(), mult, f, tol))?
        }
        None => gate("representation", Representation::canonical(alg.clone(), mult))?,
    };
    let strategy = match raw.strategy.as_ref() {
        None => Strategy::Adapted(TransferSpec::Inverse),
        Some(s) => {
            if s.phi.is_some() {
                return Err(Error::validation("strategy", "a slice state φ only applies to the tower backend"));
            }
            let map = match &s.map {
                Some(m) => {
                    let m = parse_matrix(m, "$.strategy.map")?;
                    Some(Arc::new(gate("strategy", DenseMap::new(alg.clone(), alg.clone(), m))?) as Arc<dyn LinearMap>)
                }
                None => None,
            };
            match (s.kind, map) {
                (StrategyKind::Adapted, None) => Strategy::Adapted(TransferSpec::Inverse),
                (StrategyKind::Adapted, Some(m)) => Strategy::Adapted(TransferSpec::Map(m)),
                (StrategyKind::Gns, None) => Strategy::Gns(ExpectationSpec::Identity),
                (StrategyKind::Gns, Some(m)) => Strategy::Gns(ExpectationSpec::Map(m)),
            }
        }
    };
    Ok((Dynamics::Finite(dynamics), 0, pi, t, strategy))
}

fn tower_parts(raw: &RawScenario, tol: &Tolerance) -> Result<Parts> {
    forbid(raw.blocks.is_some(), "blocks", "tower")?;
    forbid(raw.pi.is_some(), "pi", "tower")?;
    if !matches!(raw.alpha, None | Some(RawAlpha::Shift)) {
        return Err(Error::validation("alpha", "the tower backend only supports the shift"));
    }
    let k = raw.k.ok_or_else(|| Error::validation("algebra", "the tower backend needs \"k\""))?;
    let d_max = raw
        .d_max
        .ok_or_else(|| Error::validation("algebra", "the tower backend needs \"d_max\""))?;
    let tw = gate("algebra", ShiftTower::new(k, d_max, DEFAULT_SIZE_CAP))?;
    let depth = raw.depth.unwrap_or(raw.copies + 1);
    if depth < raw.copies + 1 {
        return Err(Error::validation(
            "depth budget",
            format!("depth {depth} leaves no room for M = {} defect copies (needs depth ≥ M + 1)", raw.copies),
        ));
    }
    if depth + raw.levels > d_max {
        return Err(Error::validation(
            "depth budget",
            format!("depth {depth} + N = {} exceeds D_max = {d_max}", raw.levels),
        ));
    }
    let m = raw.multiplicity.unwrap_or(1);
    if m == 0 {
        return Err(Error::validation("representation", "multiplicity must be positive"));
    }
    let pi = gate("size cap", tw.standard_rep(depth, m))?;
    let t = match &raw.t {
        Value::Object(obj) => {
            let z = obj
                .get("shift")
                .filter(|_| obj.len() == 1)
                .ok_or_else(|| Error::Parse("$.T: expected a matrix or {\"shift\": Z}".into()))?;
            let z = parse_matrix(z, "$.T.shift")?;
            gate("shape", tw.shift_operator_from(depth, m, &z))?
        }
        other => parse_matrix(other, "$.T")?,
    };
    let (kind, phi) = match raw.strategy.as_ref() {
        None => (StrategyKind::Adapted, None),
        Some(s) => {
            if s.map.is_some() {
                return Err(Error::validation("strategy", "explicit maps only apply to the finite-dim backend"));
            }
            (s.kind, s.phi.clone())
        }
    };
    let phi = match phi.unwrap_or(RawPhi::Trace) {
        RawPhi::Trace => tw.trace_state(),
        RawPhi::Vector(v) => gate("strategy", tw.vector_state(&parse_vector(&v, "$.strategy.phi.vector")?))?,
        RawPhi::Density(d) => parse_matrix(&d, "$.strategy.phi.density")?,
    };
    gate("strategy", tw.validate_phi(&phi, tol))?;
    let strategy = match kind {
        StrategyKind::Adapted => Strategy::Adapted(TransferSpec::Phi(phi)),
        StrategyKind::Gns => Strategy::Gns(ExpectationSpec::Phi(phi)),
    };
    Ok((Dynamics::Tower(tw), depth, pi, t, strategy))
}

/// The strategy's map must exist at the pair's depth, and explicit maps must
/// pass their own checks.
fn check_strategy(pair: &CovariantPair, strategy: &Strategy, tol: &Tolerance) -> Result<()> {
    let d = pair.dynamics();
    let lower = gate("depth budget", d.below(pair.depth(), 1))?;
    match strategy {
        Strategy::Adapted(spec) => {
            let tau = gate("strategy", d.transfer(lower, spec, tol))?;
            if let TransferSpec::Map(_) = spec {
                let alpha = gate("strategy", d.alpha(lower))?;
                let rep = gate("strategy", verify_transfer(tau.as_ref(), alpha.as_ref(), tol))?;
                if !rep.passed {
                    return Err(Error::validation(
                        "strategy",
                        format!(
                            "τ is not a completely positive left inverse of α (left inverse {:.3e}, min Choi eigenvalue {:?})",
                            rep.left_inverse_residual, rep.cp.min_choi_eig
                        ),
                    ));
                }
            }
        }
        Strategy::Gns(spec) => {
            gate("strategy", d.expectation(lower, spec, tol))?;
        }
    }
    Ok(())
}
