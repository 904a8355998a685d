//! One pipeline per subcommand, each turning its verification reports into
//! report clauses.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde_json::Value;

use crate::algebra::SharedMap;
use crate::covariant::{defect_operators, Strategy};
use crate::cpmaps::{expectation_from_transfer, transfer_from_expectation, verify_completely_positive, verify_transfer};
use crate::dilation::{
    explicit_matricial_unitary, schaffer_dilate, unitary_from_chain, verify_isometric_dilation, DilationRecord, IsometricReport,
    UnitaryReport,
};
use crate::equivalence::{chain_intertwiner, dilation_intertwiner, EquivalenceCertificate, Verdict, INTERTWINING_BOUND, UNITARITY_BOUND};
use crate::error::{Error, Result};
use crate::extension::{chain_label, coisometric_extend, verify_coisometric_extension, ChainReport, DecompositionReport, ExtensionChain};
use crate::numerics::{self, spectral_norm};

use super::report::Report;
use super::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Command {
    Check,
    Extend,
    Dilate,
    Unitary,
    Matricial,
    Compare,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Check,
        Command::Extend,
        Command::Dilate,
        Command::Unitary,
        Command::Matricial,
        Command::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Extend => "extend",
            Command::Dilate => "dilate",
            Command::Unitary => "unitary",
            Command::Matricial => "matricial",
            Command::Compare => "compare",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown command '{s}'")))
    }
}

const NOTE_NORMS: &str = "residuals are operator norms of differences (absolute, not relative), maximized over matrix units of the relevant algebra";
const NOTE_CHAIN: &str = "the truncated extension lives on H ⊕ D* ⊕ D1* ⊕ … with N + 1 blocks; its last row is zero, so V_N V_N* is the projection onto every block except the last";
const NOTE_TOWER: &str = "tower backend: covariance is tested on the algebra one depth below π, and a dilation with M defect copies represents the algebra M depths below π";
const NOTE_WINDOW: &str = "unitarity of U is asserted on the interior window that drops the last defect copy and the last chain block; whole-space residuals are listed under diagnostics";
const NOTE_MATRICIAL: &str = "the matricial unitary routes H ⊕ D* ⊕ … into the first copy of D_V through the coisometry J with J*J = I − V*V; its restriction X to D* replaces a bare Δ* entry (for t = 0.6 on ℂ, X = −0.6 and Δ = 0.8)";
const NOTE_TRANSFER: &str = "transfer calculus runs on τ: A_p → A_{p−1} (finite backend: A → A) for the pair's depth p";

fn tower_note(rep: &mut Report, sc: &Scenario) {
    if sc.pair.dynamics().is_tower() {
        rep.note(NOTE_TOWER);
    }
}

fn base_report(command: Command, sc: &Scenario) -> Report {
    let mut rep = Report::new(command.name(), sc.raw.to_value());
    rep.dimension("H", sc.pair.dim());
    rep.dimension("depth", sc.pair.depth());
    rep.dimension("N", sc.levels);
    rep.dimension("M", sc.copies);
    rep.note(NOTE_NORMS);
    tower_note(&mut rep, sc);
    rep
}

pub fn run(sc: &Scenario, command: Command) -> Result<Report> {
    match command {
        Command::Check => check(sc),
        Command::Extend => extend(sc),
        Command::Dilate => dilate(sc),
        Command::Unitary => unitary(sc),
        Command::Matricial => matricial(sc),
        Command::Compare => Err(Error::InvalidParameter("compare needs two scenarios".into())),
    }
}

fn check(sc: &Scenario) -> Result<Report> {
    let mut rep = base_report(Command::Check, sc);
    pair_clauses(&mut rep, sc)?;
    transfer_clauses(&mut rep, sc)?;
    Ok(rep)
}

fn pair_clauses(rep: &mut Report, sc: &Scenario) -> Result<()> {
    let tol = &sc.tol;
    let pair = &sc.pair;
    rep.clause(
        "T π(α(a)) = π(a) T",
        "covariant pair / covariance",
        pair.covariance_residual(),
        tol.residual_tol,
    );
    rep.clause(
        "‖T‖ ≤ 1",
        "covariant pair / contraction",
        (spectral_norm(pair.t()) - 1.0).max(0.0),
        tol.rank_eps,
    );
    let defects = defect_operators(pair, tol)?;
    let anchor = "defect operators / commutation";
    rep.clause("[Δ*, π(a)] = 0", anchor, defects.report.delta_star_commutation, tol.residual_tol);
    rep.clause("[Δ, π(α(a))] = 0", anchor, defects.report.delta_commutation, tol.residual_tol);
    rep.clause("[TT*, π(a)] = 0", anchor, defects.report.tt_star_commutation, tol.residual_tol);
    Ok(())
}

fn min_choi(mins: &[f64]) -> f64 {
    mins.iter().fold(f64::INFINITY, |a, &m| a.min(m))
}

fn transfer_clauses(rep: &mut Report, sc: &Scenario) -> Result<()> {
    let tol = &sc.tol;
    let d = sc.pair.dynamics();
    let lower = d.below(sc.pair.depth(), 1)?;
    let alpha = d.alpha(lower)?;
    rep.note(NOTE_TRANSFER);
    let (tau, given_e): (SharedMap, Option<SharedMap>) = match &sc.strategy {
        Strategy::Adapted(spec) => (d.transfer(lower, spec, tol)?, None),
        Strategy::Gns(spec) => {
            let e = d.expectation(lower, spec, tol)?;
            let tau = transfer_from_expectation(alpha.as_ref(), e.as_ref(), tol)?;
            (Arc::new(tau), Some(e))
        }
    };
    let anchor = "transfer operator / left inverse of α";
    let tr = verify_transfer(tau.as_ref(), alpha.as_ref(), tol)?;
    rep.clause("τ(α(a)) = a", anchor, tr.left_inverse_residual, tol.residual_tol);
    rep.clause("τ(1) = 1", anchor, tr.unit_residual, tol.residual_tol);
    rep.clause(
        "Choi(τ) ≥ 0",
        "transfer operator / complete positivity",
        (-min_choi(&tr.cp.min_choi_eig)).max(0.0),
        tol.psd_floor,
    );
    if !tr.passed {
        return Ok(());
    }
    let (e, er) = expectation_from_transfer(alpha.clone(), tau.clone(), tol)?;
    let anchor = "conditional expectation / E = α∘τ";
    rep.clause("E(E(b)) = E(b)", anchor, er.idempotency_residual, tol.residual_tol);
    rep.clause("E(b) ∈ α(A)", anchor, er.range_residual, tol.residual_tol);
    let cp = verify_completely_positive(e.as_ref(), tol)?;
    rep.clause(
        "Choi(E) ≥ 0",
        "conditional expectation / complete positivity",
        (-min_choi(&cp.min_choi_eig)).max(0.0),
        tol.psd_floor,
    );
    let back = transfer_from_expectation(alpha.as_ref(), e.as_ref(), tol)?;
    rep.clause(
        "τ → E → τ",
        "transfer operator / round trip",
        numerics::diff_norm(back.matrix(), &tau.coordinate_matrix()),
        tol.residual_tol,
    );
    if let Some(given) = given_e {
        rep.clause(
            "α∘τ = E",
            "conditional expectation / round trip",
            numerics::diff_norm(&e.coordinate_matrix(), &given.coordinate_matrix()),
            tol.residual_tol,
        );
    }
    Ok(())
}

fn build_chain(rep: &mut Report, sc: &Scenario) -> Result<(ExtensionChain, ChainReport)> {
    let chain = coisometric_extend(&sc.pair, &sc.chain_options(), &sc.tol)?;
    let cr = verify_coisometric_extension(&chain, &sc.tol)?;
    chain_clauses(rep, &chain, &cr, sc);
    Ok((chain, cr))
}

fn chain_clauses(rep: &mut Report, chain: &ExtensionChain, cr: &ChainReport, sc: &Scenario) {
    let tol = sc.tol.residual_tol;
    rep.note(NOTE_CHAIN);
    rep.dimension("K_V", chain.dim());
    for (k, &dim) in cr.block_dims.iter().enumerate() {
        rep.dimension(format!("block {}", chain_label(k)), dim);
    }
    let a = "coisometric extension / restriction to H";
    rep.clause("P_H ρ_N(a)|H = π(a)", a, cr.restriction_rho, tol);
    rep.clause("(I − P_H) ρ_N(a)|H = 0", a, cr.rho_leakage, tol);
    rep.clause("P_H V_N|H = T", a, cr.restriction_v, tol);
    rep.clause("(I − P_H) V_N|H = 0", a, cr.v_leakage, tol);
    rep.clause(
        "V_N ρ_N(α(a)) = ρ_N(a) V_N",
        "coisometric extension / covariance",
        cr.covariance_residual,
        tol,
    );
    rep.clause(
        "V_N V_N* = P",
        "coisometric extension / VV* = P",
        cr.coisometry_residual,
        tol,
    );
    let a = "two-step block / partial isometry on H ⊕ D*";
    rep.clause("MM* = I_H ⊕ 0", a, cr.two_step.partial_isometry_residual, tol);
    rep.clause("MM*M = M", a, cr.two_step.mmm_residual, tol);
    rep.clause("M covariant for π ⊕ π̂", a, cr.two_step.covariance_residual, tol);
    rep.clause("ρ(A) D* ⊂ D*", a, cr.two_step.invariance_leakage, tol);
    for l in &cr.levels {
        let a = "extension step / W* ρ(α(a)) W = π(a)";
        let k = l.level;
        rep.clause(format!("level {k}: W*W = I"), a, l.extension.isometry_residual, tol);
        rep.clause(format!("level {k}: W* ρ(α(a)) W = π(a)"), a, l.extension.ext_residual, tol);
        rep.clause(format!("level {k}: [WW*, ρ(α(a))] = 0"), a, l.extension.commutation_residual, tol);
        rep.clause(format!("level {k}: ran W ⊂ defect space"), a, l.range_containment, tol);
        rep.diagnostic(format!("level {k}: containment defect"), l.containment_defect);
    }
}

fn extend(sc: &Scenario) -> Result<Report> {
    let mut rep = base_report(Command::Extend, sc);
    build_chain(&mut rep, sc)?;
    Ok(rep)
}

fn isometric_clauses(rep: &mut Report, prefix: &str, r: &IsometricReport, tol: f64) {
    let a = "isometric dilation / Tⁿ = P Wⁿ|H";
    rep.clause(format!("{prefix}W η(α(a)) = η(a) W"), "isometric dilation / covariance", r.covariance_residual, tol);
    rep.clause(format!("{prefix}η restricts to π on H"), a, r.restriction_residual, tol);
    rep.clause(format!("{prefix}W*W = P"), "isometric dilation / isometry", r.isometry_residual, tol);
    for (n, &res) in r.dilation.iter().enumerate() {
        rep.clause(format!("{prefix}P W^{n}|H = T^{n}"), a, res, tol);
    }
    rep.clause(
        format!("{prefix}span WⁿH = K"),
        "isometric dilation / minimality",
        (r.dim - r.span_rank.min(r.dim)) as f64,
        0.0,
    );
    if let Some(c) = r.coisometry_inheritance {
        rep.clause(
            format!("{prefix}(I − WW*) P = 0"),
            "isometric dilation / coisometry inheritance",
            c,
            tol,
        );
    }
}

fn dilate(sc: &Scenario) -> Result<Report> {
    let mut rep = base_report(Command::Dilate, sc);
    let rec = schaffer_dilate(&sc.pair, sc.copies, &sc.tol)?;
    rep.dimension("K_W", rec.dim());
    rep.dimension("dilation depth", rec.depth);
    let r = verify_isometric_dilation(&rec, &sc.pair, &sc.tol)?;
    isometric_clauses(&mut rep, "", &r, sc.tol.residual_tol);
    Ok(rep)
}

fn unitary_clauses(rep: &mut Report, prefix: &str, rec: &DilationRecord, r: &UnitaryReport, tol: f64) {
    rep.note(NOTE_WINDOW);
    let a = "unitary dilation / Tⁿ = P_H Uⁿ|H";
    rep.clause(format!("{prefix}U σ(α(a)) = σ(a) U"), "unitary dilation / covariance", r.covariance_residual, tol);
    rep.clause(format!("{prefix}σ restricts to π on H"), a, r.restriction_residual, tol);
    for (n, &res) in r.dilation.iter().enumerate() {
        rep.clause(format!("{prefix}P U^{n}|H = T^{n}"), a, res, tol);
    }
    let a = "unitary dilation / interior unitarity";
    rep.clause(format!("{prefix}(U*U − I) P_int = 0"), a, r.isometry_window, tol);
    rep.clause(format!("{prefix}(UU* − I) P_int = 0"), a, r.coisometry_window, tol);
    rep.diagnostic(format!("{prefix}‖U*U − I‖ whole space"), r.isometry_boundary);
    rep.diagnostic(format!("{prefix}‖UU* − I‖ whole space"), r.coisometry_boundary);
    rep.dimension(format!("{prefix}K_U"), rec.dim());
}

fn unitary(sc: &Scenario) -> Result<Report> {
    let mut rep = base_report(Command::Unitary, sc);
    let (chain, _) = build_chain(&mut rep, sc)?;
    let ud = unitary_from_chain(chain, sc.copies, &sc.tol)?;
    isometric_clauses(&mut rep, "extension dilation: ", &ud.isometric, sc.tol.residual_tol);
    unitary_clauses(&mut rep, "", &ud.record, &ud.report, sc.tol.residual_tol);
    Ok(rep)
}

fn decomposition_clauses(rep: &mut Report, d: &DecompositionReport, tol: f64) {
    let a = "defect space of V / D_V = ΔH ⊕ q₀D* ⊕ …";
    rep.dimension("D_V", d.dim_direct);
    rep.clause(
        "dim D_V = rank(I − V*V)",
        a,
        d.dim_direct.abs_diff(d.dim_defect) as f64,
        0.0,
    );
    rep.clause("J*J = I − V*V", a, d.defect_identity, tol);
    rep.clause("JJ* = I", a, d.coisometry, tol);
    rep.clause("T*Δ* = ΔT*", a, d.defect_swap, tol);
    rep.clause("ρ_N(α(a)) D_V ⊂ D_V", a, d.restriction_residual, tol);
    rep.clause("J ρ_N(α(a)) = ρ₁(a) J", a, d.j_intertwining, tol);
}

/// Residual clauses of a certificate; an `inequivalent` verdict fails when
/// `expect_equivalent`, and an undecided one always fails.
fn certificate_clauses(rep: &mut Report, name: &str, cert: &EquivalenceCertificate, expect_equivalent: bool) {
    let a = "unitary equivalence / intertwiner";
    for (res_name, &r) in &cert.residuals {
        let bound = if res_name.starts_with("unitarity") {
            UNITARITY_BOUND
        } else {
            INTERTWINING_BOUND
        };
        rep.clause(format!("{name}: {res_name}"), a, r, bound);
    }
    let decided = match cert.verdict {
        Verdict::Equivalent => true,
        Verdict::Inequivalent => !expect_equivalent,
        Verdict::Inconclusive => false,
    };
    rep.clause(format!("{name}: verdict settled"), a, if decided { 0.0 } else { 1.0 }, 0.0);
    rep.verdicts.insert(name.to_string(), cert.clone());
}

fn matricial(sc: &Scenario) -> Result<Report> {
    let mut rep = base_report(Command::Matricial, sc);
    rep.note(NOTE_MATRICIAL);
    let (chain, _) = build_chain(&mut rep, sc)?;
    let mat = explicit_matricial_unitary(&chain, sc.copies, &sc.tol)?;
    decomposition_clauses(&mut rep, &mat.decomposition_report, sc.tol.residual_tol);
    unitary_clauses(&mut rep, "", &mat.record, &mat.report, sc.tol.residual_tol);
    let composed = unitary_from_chain(chain, sc.copies, &sc.tol)?;
    let cert = dilation_intertwiner(&mat.record, &composed.record, &sc.tol)?;
    certificate_clauses(&mut rep, "matricial ≅ composed", &cert, true);
    Ok(rep)
}

/// Level-by-level comparison of the two truncated extensions. An
/// `inequivalent` verdict backed by a witness is a valid outcome.
pub fn compare(a: &Scenario, b: &Scenario) -> Result<Report> {
    let mut rep = Report::new(Command::Compare.name(), Value::Array(vec![a.raw.to_value(), b.raw.to_value()]));
    rep.note(NOTE_NORMS);
    rep.note(NOTE_CHAIN);
    tower_note(&mut rep, a);
    rep.dimension("H", a.pair.dim());
    let c1 = coisometric_extend(&a.pair, &a.chain_options(), &a.tol)?;
    let c2 = coisometric_extend(&b.pair, &b.chain_options(), &b.tol)?;
    for (tag, c, sc) in [("first", &c1, a), ("second", &c2, b)] {
        let cr = verify_coisometric_extension(c, &sc.tol)?;
        let tol = sc.tol.residual_tol;
        rep.dimension(format!("{tag} K_V"), c.dim());
        rep.clause(
            format!("{tag}: V_N ρ_N(α(a)) = ρ_N(a) V_N"),
            "coisometric extension / covariance",
            cr.covariance_residual,
            tol,
        );
        rep.clause(format!("{tag}: V_N V_N* = P"), "coisometric extension / VV* = P", cr.coisometry_residual, tol);
        rep.clause(
            format!("{tag}: P_H V_N|H = T"),
            "coisometric extension / restriction to H",
            cr.restriction_v,
            tol,
        );
    }
    let tol = a.tol.residual_tol.min(b.tol.residual_tol);
    let cert = chain_intertwiner(&c1, &c2, &crate::numerics::Tolerance { residual_tol: tol, ..a.tol })?;
    certificate_clauses(&mut rep, "extensions", &cert, false);
    Ok(rep)
}
