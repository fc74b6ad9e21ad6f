//! Bounded processes indexed by Y on X, and their modification through the
//! liftings of the conditional measures.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::lifting::lift_function;
use crate::measure::SimpleFunction;
use crate::product::Rcp;
use crate::rational::Rational;
use crate::report::{Law, VerificationReport};
use crate::split_ac::SplitLiftings;

/// `ξ_y(x)` stored as a `|Y|×|X|` matrix, row `y` holding the path `ξ_y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Process {
    values: Vec<Vec<Rational>>,
}

impl Process {
    pub fn new(values: Vec<Vec<Rational>>) -> Result<Self> {
        let nx = values.first().map(Vec::len).unwrap_or(0);
        if values.is_empty() || nx == 0 {
            return Err(Error::Validation { module: "process".into(), detail: "empty process".into() });
        }
        if values.iter().any(|row| row.len() != nx) {
            return Err(Error::Validation { module: "process".into(), detail: "ragged matrix".into() });
        }
        Ok(Process { values })
    }

    pub fn constant(nx: usize, ny: usize, c: Rational) -> Self {
        Process { values: vec![vec![c; nx]; ny] }
    }

    pub fn ny(&self) -> usize {
        self.values.len()
    }

    pub fn nx(&self) -> usize {
        self.values[0].len()
    }

    pub fn at(&self, y: usize, x: usize) -> Rational {
        self.values[y][x]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.values
    }

    /// The path `ξ_y` as a function on X.
    pub fn path(&self, y: usize) -> SimpleFunction {
        SimpleFunction::new(self.values[y].clone())
    }

    pub fn add(&self, other: &Process) -> Result<Process> {
        if self.ny() != other.ny() || self.nx() != other.nx() {
            return Err(Error::SpaceMismatch("processes of different shapes".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| *u + *v).collect())
            .collect();
        Ok(Process { values })
    }
}

/// `ζ_y = σ_y(ξ_y)` at every y.
pub fn modify_process(xi: &Process, split: &SplitLiftings, rcp: &Rcp) -> Result<Process> {
    let prod = &split.product;
    if xi.ny() != prod.ny() || xi.nx() != prod.nx() || rcp.len() != prod.ny() || rcp.x().len() != prod.nx() {
        return Err(Error::SpaceMismatch("process, rcp and liftings disagree on the spaces".into()));
    }
    let values = (0..xi.ny()).map(|y| lift_function(&split.sigma_y[y], &xi.path(y)).values().to_vec()).collect();
    Ok(Process { values })
}

/// Per y, `ξ_y = ζ_y` at every `S_y`-positive point.
pub fn check_modification(xi: &Process, zeta: &Process, rcp: &Rcp) -> VerificationReport {
    let mut report = VerificationReport::new("modification");
    let mut shape = Law::new("shape");
    let ok = xi.ny() == zeta.ny() && xi.nx() == zeta.nx() && xi.ny() == rcp.len() && xi.nx() == rcp.x().len();
    shape.check(ok, || json!({"xi": [xi.ny(), xi.nx()], "zeta": [zeta.ny(), zeta.nx()]}));
    report.push(shape);
    if !ok {
        return report;
    }
    for y in 0..xi.ny() {
        let mut law = Law::new(format!("ae_equal_y{y}"));
        for x in rcp.s(y).positive_points() {
            law.check(xi.at(y, x) == zeta.at(y, x), || json!({"y": y, "x": x}));
        }
        report.push(law);
    }
    report
}

/// Modification, fixedness under every `σ_y`, measurability and idempotence.
pub fn verify_modification(
    xi: &Process,
    zeta: &Process,
    split: &SplitLiftings,
    rcp: &Rcp,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new("modify-process");
    report.absorb("", check_modification(xi, zeta, rcp));
    let mut fixed = Law::new("sigma_fixed");
    for y in 0..zeta.ny() {
        let path = zeta.path(y);
        fixed.check(lift_function(&split.sigma_y[y], &path) == path, || json!({"y": y}));
    }
    report.push(fixed);
    // Every function on the finite power set of X×Y is measurable for the
    // completed joint measure.
    report.push_result("measurable", true, None);
    let again = modify_process(zeta, split, rcp)?;
    report.push_result("idempotent", again == *zeta, None);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::AnchorLifting;
    use crate::measure::Measure;
    use crate::product::{rcp_from_joint, JointMeasure, NullYPolicy};
    use crate::space::FiniteSpace;
    use crate::split_chain::{general_split, AlgebraChain};

    fn q(a: i128) -> Rational {
        Rational::from_int(a)
    }

    fn sp(n: usize) -> FiniteSpace {
        FiniteSpace::indexed(n).unwrap()
    }

    fn space_a() -> (JointMeasure, Rcp, SplitLiftings) {
        let (z, h) = (Rational::ZERO, Rational::new(1, 2));
        let r = JointMeasure::from_matrix(sp(3), sp(2), &[vec![h, z], vec![z, h], vec![z, z]]).unwrap();
        let rcp = rcp_from_joint(&r, &NullYPolicy::CopyLowest).unwrap();
        let rho = AnchorLifting::smallest(r.q()).unwrap();
        let gs = general_split(&AlgebraChain::standard(3), &rcp, &r, &rho).unwrap();
        (r, rcp, gs.split)
    }

    fn space_b() -> (JointMeasure, Rcp, SplitLiftings) {
        let (o, z) = (q(1), Rational::ZERO);
        let r = JointMeasure::from_matrix(sp(2), sp(2), &[vec![o, z], vec![z, z]]).unwrap();
        let s1 = Measure::dirac(sp(2), 1).unwrap();
        let rcp = rcp_from_joint(&r, &NullYPolicy::Explicit(vec![None, Some(s1)])).unwrap();
        let rho = AnchorLifting::smallest(r.q()).unwrap();
        let gs = general_split(&AlgebraChain::standard(2), &rcp, &r, &rho).unwrap();
        (r, rcp, gs.split)
    }

    #[test]
    fn constant_is_unchanged() {
        let (_, rcp, split) = space_a();
        let xi = Process::constant(3, 2, q(4));
        assert_eq!(modify_process(&xi, &split, &rcp).unwrap(), xi);
        assert!(check_modification(&xi, &xi, &rcp).pass);
    }

    #[test]
    fn space_a_path() {
        let (_, rcp, split) = space_a();
        let xi = Process::new(vec![vec![q(5), q(7), q(9)], vec![q(1), q(2), q(3)]]).unwrap();
        let zeta = modify_process(&xi, &split, &rcp).unwrap();
        assert_eq!(zeta.rows()[0], vec![q(5), q(5), q(5)]);
        let rep = verify_modification(&xi, &zeta, &split, &rcp).unwrap();
        assert!(rep.pass, "{rep}");
    }

    #[test]
    fn space_b_null_y_path() {
        let (_, rcp, split) = space_b();
        let xi = Process::new(vec![vec![q(1), q(2)], vec![q(1), q(8)]]).unwrap();
        let zeta = modify_process(&xi, &split, &rcp).unwrap();
        assert_eq!(zeta.at(1, 1), q(8));
        assert!(verify_modification(&xi, &zeta, &split, &rcp).unwrap().pass);
    }

    #[test]
    fn perturbation_is_caught() {
        let (_, rcp, _) = space_a();
        let xi = Process::new(vec![vec![q(5), q(7), q(9)], vec![q(1), q(2), q(3)]]).unwrap();
        let bad = Process::new(vec![vec![q(6), q(7), q(9)], vec![q(1), q(2), q(3)]]).unwrap();
        let rep = check_modification(&xi, &bad, &rcp);
        assert!(!rep.pass);
        assert_eq!(rep.law("ae_equal_y0").unwrap().witness, Some(json!({"y": 0, "x": 0})));
        assert!(rep.law("ae_equal_y1").unwrap().pass);
    }

    #[test]
    fn shape_mismatch() {
        let (_, rcp, split) = space_a();
        let xi = Process::constant(2, 2, q(1));
        assert!(matches!(modify_process(&xi, &split, &rcp), Err(Error::SpaceMismatch(_))));
    }
}
