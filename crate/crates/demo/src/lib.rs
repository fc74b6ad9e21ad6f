//! Browser grid explorer for split liftings. A scenario is shown as an
//! `|X|×|Y|` grid; clicking cells builds an event E and the page shows
//! `π(E)` from the general construction and from the repaired absolutely
//! continuous construction, section by section.
//!
//! [`Model`] holds the logic and returns JSON strings; [`Explorer`] is the
//! thin wasm-bindgen wrapper used by `www/index.html`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use splitlift::harness::{gen_random_with, RandomSpec, Scenario};
use splitlift::lifting::enumerate_liftings;
use splitlift::product::{check_IT, ProductSpace, Rcp};
use splitlift::split_ac::{full_ac_pipeline, prop27_report, RfSearch, SplitLiftings};
use splitlift::split_chain::general_split;
use splitlift::{AnchorLifting, Event};

const MAX_POINTS: usize = 16;
const SEARCH_BUDGET: u128 = 1_000_000;

/// A loaded scenario with both constructions already run.
pub struct Model {
    scenario: Scenario,
    rcp: Rcp,
    rho: AnchorLifting,
    it: bool,
    general: SplitLiftings,
    ac: SplitLiftings,
    ac_rcp: Rcp,
    repaired: Vec<usize>,
}

impl Model {
    pub fn generate(
        nx: usize,
        ny: usize,
        null_x: usize,
        null_y: usize,
        seed: u64,
        free: bool,
    ) -> Result<Model, String> {
        let spec = RandomSpec { free_null_rcp: free, ..RandomSpec::new(nx, ny, null_x, null_y, seed) };
        Model::new(gen_random_with(&spec, MAX_POINTS).map_err(|e| e.to_string())?)
    }

    pub fn from_json(text: &str) -> Result<Model, String> {
        Model::new(Scenario::parse(text).map_err(|e| e.to_string())?)
    }

    fn new(scenario: Scenario) -> Result<Model, String> {
        if scenario.product().len() > MAX_POINTS {
            return Err(format!("the demo handles at most {MAX_POINTS} points"));
        }
        let rcp = scenario.rcp_or_default().map_err(|e| e.to_string())?;
        let rho = scenario.rho_or_default().map_err(|e| e.to_string())?;
        let it = check_IT(&rcp, &rho, &scenario.r).is_ok();
        let general = general_split(&scenario.chain_or_default(), &rcp, &scenario.r, &rho)
            .map_err(|e| format!("general construction: {e}"))?
            .split;
        let ac =
            full_ac_pipeline(&scenario.r, Some(&rcp), Some(&rho)).map_err(|e| format!("repaired construction: {e}"))?;
        let repaired = (0..rcp.len()).filter(|&y| ac.repair.t.s(y) != rcp.s(y)).collect();
        Ok(Model { it, general, ac_rcp: ac.repair.t, ac: ac.split, repaired, scenario, rcp, rho })
    }

    fn product(&self) -> &ProductSpace {
        self.scenario.product()
    }

    /// Labels, masses, conditional measures and the lifting of Q.
    pub fn summary(&self) -> String {
        let prod = self.product();
        let r = &self.scenario.r;
        let rows = |rcp: &Rcp| -> Vec<Vec<String>> {
            (0..rcp.len()).map(|y| rcp.s(y).weights().iter().map(|w| w.to_string()).collect()).collect()
        };
        json!({
            "x": prod.x().labels(),
            "y": prod.y().labels(),
            "mass": (0..prod.nx()).map(|x| (0..prod.ny()).map(|y| r.mass(x, y).to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "p": r.p().weights().iter().map(|w| w.to_string()).collect::<Vec<_>>(),
            "q": r.q().weights().iter().map(|w| w.to_string()).collect::<Vec<_>>(),
            "rcp": rows(&self.rcp),
            "repaired_rcp": rows(&self.ac_rcp),
            "rho": self.rho.anchor(),
            "it": self.it,
            "repaired_y": self.repaired,
            "scenario": serde_json::from_str::<Value>(&self.scenario.to_json()).expect("valid json"),
        })
        .to_string()
    }

    /// `π(E)` from both constructions for the event whose cells are given as
    /// flat indices `x·|Y| + y`.
    pub fn lift(&self, cells: &[usize]) -> Result<String, String> {
        let prod = self.product();
        let e = Event::from_indices(prod.len(), cells.iter().copied()).map_err(|e| e.to_string())?;
        Ok(json!({
            "event": cells,
            "general": self.side(&self.general, &self.rcp, e),
            "ac": self.side(&self.ac, &self.ac_rcp, e),
        })
        .to_string())
    }

    fn side(&self, sl: &SplitLiftings, rcp: &Rcp, e: Event) -> Value {
        let prod = self.product();
        let img = sl.pi.apply(e);
        let sections: Vec<Value> = (0..prod.ny())
            .map(|y| {
                let sec = prod.section_y(img, y);
                json!({
                    "y": y,
                    "section": sec.indices().collect::<Vec<_>>(),
                    "fixed": sl.sigma_y[y].apply(sec) == sec,
                    "sigma_anchor": sl.sigma_y[y].anchor(),
                    "null": !self.scenario.r.q().is_positive_point(y),
                    "conditional": rcp.s(y).weights().iter().map(|w| w.to_string()).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "image": img.indices().collect::<Vec<_>>(),
            "ae_equal": self.scenario.r.r().ae_equal(img, e).unwrap_or(false),
            "sections": sections,
        })
    }

    /// The equivalence check and rectangle-formula search for every lifting
    /// of Q, the scenario's own lifting first.
    pub fn prop27(&self) -> Result<String, String> {
        let r = &self.scenario.r;
        let mut rhos = vec![self.rho.clone()];
        for l in enumerate_liftings(r.q()).map_err(|e| e.to_string())? {
            if l.anchor() != self.rho.anchor() {
                rhos.push(l);
            }
        }
        let cases: Vec<Value> = rhos
            .iter()
            .map(|rho| {
                let eq = prop27_report(&self.rcp, rho, r, SEARCH_BUDGET).map_err(|e| e.to_string())?;
                let search = match &eq.search {
                    RfSearch::Found { family, searched } => {
                        json!({"kind": "found", "family": family, "searched": searched})
                    }
                    RfSearch::NoWitness { searched, a, b, point } => {
                        json!({"kind": "none", "searched": searched, "a": a, "b": b, "point": point})
                    }
                    RfSearch::BudgetExceeded { needed, .. } => json!({"kind": "budget", "needed": needed.to_string()}),
                };
                Ok(json!({
                    "rho": rho.anchor(),
                    "it": eq.it,
                    "sections_open": eq.sections_open,
                    "strong": eq.strong,
                    "agree": eq.agree,
                    "search": search,
                    "witness_verified": eq.witness.as_ref().map(|w| w.pass),
                }))
            })
            .collect::<Result<_, String>>()?;
        Ok(json!({ "cases": cases }).to_string())
    }
}

#[wasm_bindgen]
pub struct Explorer {
    model: Model,
}

#[wasm_bindgen]
impl Explorer {
    /// Seeded random scenario; `free` draws the conditional measures at null
    /// y freely.
    pub fn generate(
        nx: usize,
        ny: usize,
        null_x: usize,
        null_y: usize,
        seed: u64,
        free: bool,
    ) -> Result<Explorer, JsError> {
        Model::generate(nx, ny, null_x, null_y, seed, free)
            .map(|model| Explorer { model })
            .map_err(|e| JsError::new(&e))
    }

    /// Scenario from its JSON file format.
    #[wasm_bindgen(js_name = fromJson)]
    pub fn from_json(text: &str) -> Result<Explorer, JsError> {
        Model::from_json(text).map(|model| Explorer { model }).map_err(|e| JsError::new(&e))
    }

    pub fn summary(&self) -> String {
        self.model.summary()
    }

    pub fn lift(&self, cells: Vec<usize>) -> Result<String, JsError> {
        self.model.lift(&cells).map_err(|e| JsError::new(&e))
    }

    pub fn prop27(&self) -> Result<String, JsError> {
        self.model.prop27().map_err(|e| JsError::new(&e))
    }
}
