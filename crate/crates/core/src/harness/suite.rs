//! Named verification suites over a scenario.

use serde_json::json;

use crate::error::{Error, Result};
use crate::harness::oracle::{oracle_it, oracle_modification, oracle_scenario, oracle_split};
use crate::harness::scenario::Scenario;
use crate::lifting::{ev_json, verify_lifting, AnchorLifting};
use crate::process::{modify_process, verify_modification};
use crate::product::{check_IT, validate_rcp, ItOutcome, JointMeasure, Rcp};
use crate::report::{Law, SweepMode, VerificationReport};
use crate::split_ac::{
    build_split_densities, full_ac_pipeline, it_by_anchor_continuity, promote_to_split_liftings, prop27_report,
    verify_repair, verify_sectionwise_definition, verify_split_densities, verify_split_liftings,
};
use crate::split_chain::{general_split, verify_general_split};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    Validate,
    CheckIt,
    SplitAc,
    SplitGeneral,
    Prop27,
    ModifyProcess,
    OracleSweep,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Validate,
        Suite::CheckIt,
        Suite::SplitAc,
        Suite::SplitGeneral,
        Suite::Prop27,
        Suite::ModifyProcess,
        Suite::OracleSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Validate => "validate",
            Suite::CheckIt => "check-it",
            Suite::SplitAc => "split-ac",
            Suite::SplitGeneral => "split-general",
            Suite::Prop27 => "prop27",
            Suite::ModifyProcess => "modify-process",
            Suite::OracleSweep => "oracle-sweep",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteOptions {
    /// Run the repair stage of the absolutely continuous pipeline.
    pub repair: bool,
    /// Cap on candidate families in exact searches.
    pub budget: u128,
    /// Cap on `|X×Y|` for exhaustive sweeps.
    pub max_points: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { repair: false, budget: 1_000_000, max_points: crate::harness::gen::MAX_POINTS }
    }
}

/// 0 pass, 1 property failure, 2 input error, 3 budget exceeded.
pub fn exit_code(res: &Result<VerificationReport>) -> i32 {
    match res {
        Ok(r) if !r.pass => 1,
        Ok(r) if r.mode == SweepMode::Spot => 3,
        Ok(_) => 0,
        Err(Error::BudgetExceeded { .. }) => 3,
        Err(_) => 2,
    }
}

fn pipeline_failure(rep: &mut VerificationReport, stage: &str, err: &Error) {
    let mut law = Law::new(format!("{stage}.pipeline"));
    law.fail(json!({"error": err.to_string()}));
    rep.push(law);
}

fn it_law(rcp: &Rcp, rho: &AnchorLifting, r: &JointMeasure) -> Law {
    let mut law = Law::new("IT");
    match check_IT(rcp, rho, r) {
        ItOutcome::Ok => {
            law.check(true, || json!(null));
        }
        ItOutcome::Counterexample { a, b, y } => law.fail(json!({"a": ev_json(a), "b": ev_json(b), "y": y})),
    }
    law
}

/// Runs the named pipeline and its full sweep. Input problems are errors;
/// failures of the pipeline or of its laws are failing laws in the report.
pub fn run_suite(s: &Scenario, suite: Suite, opts: &SuiteOptions) -> Result<VerificationReport> {
    let prod = s.product();
    if prod.len() > opts.max_points {
        return Err(Error::BudgetExceeded { needed: prod.len() as u128, budget: opts.max_points as u128 });
    }
    let r = &s.r;
    let rcp = s.rcp_or_default()?;
    let rho = s.rho_or_default()?;
    let mut rep = VerificationReport::new(suite.name());
    match suite {
        Suite::Validate => {
            rep.absorb("rcp.", validate_rcp(&rcp, r));
            rep.absorb("rho.", verify_lifting(&rho));
            let chain = s.chain_or_default();
            rep.push_result("chain", chain.validate().is_ok(), None);
        }
        Suite::CheckIt => {
            let law = it_law(&rcp, &rho, r);
            let ok = !law.failed();
            rep.push(law);
            let agree = it_by_anchor_continuity(&rcp, &rho) == ok;
            rep.push_result("anchor_continuity_agrees", agree, None);
        }
        Suite::SplitAc => split_ac_suite(&mut rep, s, &rcp, &rho, opts.repair),
        Suite::SplitGeneral => match general_split(&s.chain_or_default(), &rcp, r, &rho) {
            Ok(gs) => rep.absorb("", verify_general_split(&gs, &rcp, r)),
            Err(e) => pipeline_failure(&mut rep, "general", &e),
        },
        Suite::Prop27 => match prop27_report(&rcp, &rho, r, opts.budget) {
            Ok(eq) => {
                rep.absorb("", eq.to_report());
                rep.push_result("anchor_continuity_agrees", it_by_anchor_continuity(&rcp, &rho) == eq.it, None);
            }
            Err(e) => pipeline_failure(&mut rep, "prop27", &e),
        },
        Suite::ModifyProcess => {
            let xi = s.process.clone().ok_or_else(|| Error::Validation {
                module: "process".into(),
                detail: "scenario has no process".into(),
            })?;
            match general_split(&s.chain_or_default(), &rcp, r, &rho) {
                Ok(gs) => match modify_process(&xi, &gs.split, &rcp).and_then(|z| {
                    let v = verify_modification(&xi, &z, &gs.split, &rcp)?;
                    Ok((z, v))
                }) {
                    Ok((zeta, v)) => {
                        rep.absorb("", v);
                        rep.note(format!("zeta: {}", serde_json::to_string(&zeta).expect("plain data")));
                    }
                    Err(e) => pipeline_failure(&mut rep, "modify", &e),
                },
                Err(e) => pipeline_failure(&mut rep, "general", &e),
            }
        }
        Suite::OracleSweep => oracle_suite(&mut rep, s, &rcp, &rho),
    }
    Ok(rep)
}

fn split_ac_suite(rep: &mut VerificationReport, s: &Scenario, rcp: &Rcp, rho: &AnchorLifting, repair: bool) {
    let r = &s.r;
    rep.absorb("rcp.", validate_rcp(rcp, r));
    if repair {
        match full_ac_pipeline(r, Some(rcp), Some(rho)) {
            Ok(p) => {
                let sigma = AnchorLifting::smallest(r.p()).expect("P has a positive point");
                rep.absorb("repair.", verify_repair(&p.original, &p.repair, &sigma, r));
                rep.absorb("densities.", verify_split_densities(&p.densities, &p.repair.t));
                rep.absorb("", verify_split_liftings(&p.split, &p.repair.t, r, true));
                rep.absorb("sectionwise.", verify_sectionwise_definition(&p.split, &p.densities));
                rep.count("repaired_points", p.repair.null_set.count() as u64);
            }
            Err(e) => pipeline_failure(rep, "ac", &e),
        }
        return;
    }
    let law = it_law(rcp, rho, r);
    let failed = law.failed();
    rep.push(law);
    if failed {
        rep.note("pipeline halted before construction: the intersection condition fails; rerun with --repair");
        return;
    }
    match build_split_densities(rcp, rho, r).and_then(|sd| Ok((promote_to_split_liftings(&sd)?, sd))) {
        Ok((sl, sd)) => {
            rep.absorb("densities.", verify_split_densities(&sd, rcp));
            rep.absorb("", verify_split_liftings(&sl, rcp, r, true));
            rep.absorb("sectionwise.", verify_sectionwise_definition(&sl, &sd));
        }
        Err(e) => pipeline_failure(rep, "ac", &e),
    }
}

fn oracle_suite(rep: &mut VerificationReport, s: &Scenario, rcp: &Rcp, rho: &AnchorLifting) {
    let r = &s.r;
    rep.absorb("", oracle_scenario(s, rcp));
    let it = oracle_it(rcp, rho.anchor(), r);
    rep.push_result("it_agrees", it == check_IT(rcp, rho, r).is_ok(), None);
    let gs = general_split(&s.chain_or_default(), rcp, r, rho);
    match &gs {
        Ok(gs) => rep.absorb("general.", oracle_split(&gs.split, rcp, r, false)),
        Err(e) => pipeline_failure(rep, "general", e),
    }
    if it {
        match build_split_densities(rcp, rho, r).and_then(|sd| promote_to_split_liftings(&sd)) {
            Ok(sl) => rep.absorb("ac.", oracle_split(&sl, rcp, r, true)),
            Err(e) => pipeline_failure(rep, "ac", &e),
        }
    }
    match full_ac_pipeline(r, Some(rcp), Some(rho)) {
        Ok(p) => {
            rep.absorb("repair.", oracle_split(&p.split, &p.repair.t, r, true));
            rep.push_result("repair.it", oracle_it(&p.repair.t, p.repair.rho_prime.anchor(), r), None);
            let null = (0..rcp.len()).all(|y| rcp.s(y) == p.repair.t.s(y) || !r.q().is_positive_point(y));
            rep.push_result("repair.changed_set_null", null, None);
        }
        Err(e) => pipeline_failure(rep, "repair", &e),
    }
    if let (Some(xi), Ok(gs)) = (&s.process, &gs) {
        match modify_process(xi, &gs.split, rcp) {
            Ok(zeta) => rep.absorb("process.", oracle_modification(xi, &zeta, &gs.split, rcp)),
            Err(e) => pipeline_failure(rep, "process", &e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::gen::{gen_diag, gen_no_rf, gen_random};

    fn space_a() -> Scenario {
        Scenario::parse(
            r#"{"x": {"labels": ["a","b","c"]}, "y": {"labels": ["u","v"]},
                "R": [["1/2","0"],["0","1/2"],["0","0"]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn space_a_split_ac_passes_with_rf_and_sp() {
        let rep = run_suite(&space_a(), Suite::SplitAc, &SuiteOptions::default()).unwrap();
        assert!(rep.pass, "{rep}");
        assert!(rep.law("RF").unwrap().pass && rep.law("SP").unwrap().pass);
    }

    #[test]
    fn space_b_split_ac_halts_without_repair() {
        let b = gen_no_rf();
        let res = run_suite(&b, Suite::SplitAc, &SuiteOptions::default());
        assert_eq!(exit_code(&res), 1);
        let rep = res.unwrap();
        let it = rep.law("IT").unwrap();
        assert_eq!(it.witness, Some(json!({"a": [1], "b": [0, 1], "y": 1})));
        assert!(rep.law("SP").is_none());
        let opts = SuiteOptions { repair: true, ..SuiteOptions::default() };
        let rep = run_suite(&b, Suite::SplitAc, &opts).unwrap();
        assert!(rep.pass, "{rep}");
    }

    #[test]
    fn space_b_split_general_passes() {
        let rep = run_suite(&gen_no_rf(), Suite::SplitGeneral, &SuiteOptions::default()).unwrap();
        assert!(rep.pass, "{rep}");
    }

    #[test]
    fn every_suite_on_fixtures() {
        let mut with_process = gen_random(3, 2, 1, 1, 7).unwrap();
        with_process.process = Some(crate::harness::gen::gen_process(3, 2, 1));
        for s in [space_a(), gen_no_rf(), gen_diag(3).unwrap(), with_process.clone()] {
            for suite in Suite::ALL {
                if suite == Suite::ModifyProcess && s.process.is_none() {
                    let res = run_suite(&s, suite, &SuiteOptions::default());
                    assert_eq!(exit_code(&res), 2);
                    continue;
                }
                if suite == Suite::SplitAc || suite == Suite::CheckIt {
                    continue;
                }
                let res = run_suite(&s, suite, &SuiteOptions::default());
                assert_eq!(exit_code(&res), 0, "{} {:?}", suite.name(), res);
            }
        }
    }

    #[test]
    fn determinism() {
        let s = gen_random(3, 3, 1, 1, 5).unwrap();
        let a = run_suite(&s, Suite::OracleSweep, &SuiteOptions::default()).unwrap();
        let b = run_suite(&s, Suite::OracleSweep, &SuiteOptions::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn oversize_is_budget() {
        let s = gen_random(4, 4, 1, 1, 0).unwrap();
        let opts = SuiteOptions { max_points: 12, ..SuiteOptions::default() };
        assert_eq!(exit_code(&run_suite(&s, Suite::Validate, &opts)), 3);
    }
}
