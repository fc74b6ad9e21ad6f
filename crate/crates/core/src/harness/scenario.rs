//! Scenario files: the joint measure plus optional rcp, lifting of Y,
//! algebra chain and process, all with exact rationals.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::AnchorLifting;
use crate::process::Process;
use crate::product::{rcp_from_joint, validate_rcp, JointMeasure, NullYPolicy, ProductSpace, Rcp};
use crate::rational::Rational;
use crate::space::{Event, FiniteSpace};
use crate::split_chain::AlgebraChain;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub labels: Vec<String>,
}

/// The on-disk layout. `R[x][y]` is the mass of `(x, y)`; `rcp[y][x]` is
/// `S_y({x})`; `rho[y]` is the anchor of y; `chain` lists generator events.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub x: SpaceSpec,
    pub y: SpaceSpec,
    #[serde(rename = "R")]
    pub r: Vec<Vec<Rational>>,
    #[serde(default)]
    pub rcp: Option<Vec<Vec<Rational>>>,
    #[serde(default)]
    pub rho: Option<Vec<usize>>,
    #[serde(default)]
    pub chain: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<Vec<Vec<Rational>>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// A validated scenario. Missing parts fall back to defaults through the
/// `*_or_default` accessors but are kept absent for round trips.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub r: JointMeasure,
    pub rcp: Option<Rcp>,
    pub rho: Option<AnchorLifting>,
    pub chain: Option<AlgebraChain>,
    pub process: Option<Process>,
    pub seed: Option<u64>,
}

fn invalid(module: &str, e: impl std::fmt::Display) -> Error {
    Error::Validation { module: module.into(), detail: e.to_string() }
}

impl Scenario {
    pub fn new(r: JointMeasure) -> Self {
        Scenario { r, rcp: None, rho: None, chain: None, process: None, seed: None }
    }

    pub fn product(&self) -> &ProductSpace {
        self.r.product()
    }

    /// The given rcp, or the one copying the lowest positive y at null y.
    pub fn rcp_or_default(&self) -> Result<Rcp> {
        match &self.rcp {
            Some(r) => Ok(r.clone()),
            None => rcp_from_joint(&self.r, &NullYPolicy::CopyLowest),
        }
    }

    /// The given lifting of Q, or the smallest-anchor one.
    pub fn rho_or_default(&self) -> Result<AnchorLifting> {
        match &self.rho {
            Some(r) => Ok(r.clone()),
            None => AnchorLifting::smallest(self.r.q()),
        }
    }

    /// The given chain, or the one splitting off singletons.
    pub fn chain_or_default(&self) -> AlgebraChain {
        self.chain.clone().unwrap_or_else(|| AlgebraChain::standard(self.product().nx()))
    }

    pub fn from_file(f: ScenarioFile) -> Result<Self> {
        let x = FiniteSpace::new(f.x.labels).map_err(|e| invalid("space", e))?;
        let y = FiniteSpace::new(f.y.labels).map_err(|e| invalid("space", e))?;
        let (nx, ny) = (x.len(), y.len());
        let r = JointMeasure::from_matrix(x.clone(), y, &f.r).map_err(|e| invalid("measure", e))?;
        let rcp = match f.rcp {
            None => None,
            Some(rows) => {
                if rows.len() != ny {
                    return Err(invalid("product", format!("rcp needs {ny} rows, got {}", rows.len())));
                }
                let rcp = Rcp::from_rows(x, &rows).map_err(|e| invalid("product", e))?;
                let rep = validate_rcp(&rcp, &r);
                if let Some(law) = rep.laws.iter().find(|l| !l.pass) {
                    let w = law.witness.as_ref().map(|w| w.to_string()).unwrap_or_default();
                    return Err(invalid("product", format!("rcp law {} fails at {w}", law.name)));
                }
                Some(rcp)
            }
        };
        let rho = match f.rho {
            None => None,
            Some(anchor) => Some(AnchorLifting::new(r.q().clone(), anchor).map_err(|e| invalid("lifting", e))?),
        };
        let chain = match f.chain {
            None => None,
            Some(gens) => {
                let gens = gens
                    .into_iter()
                    .map(|g| Event::from_indices(nx, g))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| invalid("chain", e))?;
                let chain = AlgebraChain::from_generators(nx, &gens).map_err(|e| invalid("chain", e))?;
                chain.validate().map_err(|e| invalid("chain", e))?;
                Some(chain)
            }
        };
        let process = match f.process {
            None => None,
            Some(rows) => {
                let p = Process::new(rows).map_err(|e| invalid("process", e))?;
                if p.ny() != ny || p.nx() != nx {
                    return Err(invalid("process", format!("process must be {ny}×{nx}")));
                }
                Some(p)
            }
        };
        Ok(Scenario { r, rcp, rho, chain, process, seed: f.seed })
    }

    pub fn to_file(&self) -> ScenarioFile {
        let prod = self.product();
        ScenarioFile {
            x: SpaceSpec { labels: prod.x().labels().to_vec() },
            y: SpaceSpec { labels: prod.y().labels().to_vec() },
            r: self.r.matrix(),
            rcp: self.rcp.as_ref().map(Rcp::rows),
            rho: self.rho.as_ref().map(|l| l.anchor().to_vec()),
            chain: self.chain.as_ref().map(|c| c.generators().iter().map(|g| g.indices().collect()).collect()),
            process: self.process.as_ref().map(|p| p.rows().to_vec()),
            seed: self.seed,
        }
    }

    /// Parses and validates; syntax and type errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("plain data") + "\n"
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPACE_A: &str = r#"{
        "x": {"labels": ["a", "b", "c"]},
        "y": {"labels": ["u", "v"]},
        "R": [["1/2", "0"], ["0", "1/2"], ["0", "0"]],
        "rcp": null, "rho": null, "chain": null, "seed": null
    }"#;

    #[test]
    fn parse_round_trip() {
        let s = Scenario::parse(SPACE_A).unwrap();
        assert_eq!(s.product().nx(), 3);
        assert!(s.rcp.is_none());
        let back = Scenario::parse(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let mut full = s.clone();
        full.rcp = Some(s.rcp_or_default().unwrap());
        full.rho = Some(s.rho_or_default().unwrap());
        full.chain = Some(s.chain_or_default());
        full.process = Some(Process::constant(3, 2, Rational::ONE));
        full.seed = Some(9);
        assert_eq!(Scenario::parse(&full.to_json()).unwrap(), full);
    }

    #[test]
    fn bad_weights() {
        let text = SPACE_A.replace(r#"["0", "1/2"]"#, r#"["1", "1/2"]"#);
        let err = Scenario::parse(&text).unwrap_err();
        assert!(matches!(err, Error::Validation { ref module, .. } if module == "measure"), "{err}");
    }

    #[test]
    fn null_anchor_to_null() {
        let text = r#"{
            "x": {"labels": ["a", "b"]}, "y": {"labels": ["u", "v", "w"]},
            "R": [["1/2", "0", "0"], ["0", "1/2", "0"]], "rho": [0, 1, 2]
        }"#;
        let err = Scenario::parse(text).unwrap_err();
        assert!(matches!(err, Error::Validation { ref module, .. } if module == "lifting"), "{err}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = Scenario::parse("{\n  \"x\": 3\n}").unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.starts_with("line 2")), "{err}");
        let err = Scenario::parse(&SPACE_A.replace("1/2", "0.5")).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn rcp_must_disintegrate() {
        let text = SPACE_A.replace(r#""rcp": null"#, r#""rcp": [["0", "1", "0"], ["0", "1", "0"]]"#);
        let err = Scenario::parse(&text).unwrap_err();
        assert!(matches!(err, Error::Validation { ref module, .. } if module == "product"), "{err}");
    }
}
