//! The absolutely continuous pipeline: from the intersection condition to
//! split lower densities, then to liftings satisfying the section property
//! and the rectangle formula; the repair of an rcp and of the lifting on Y
//! when only `R ≪ P⊗Q` is known; and the equivalence report between the
//! intersection condition, strongness and the rectangle formula.

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::lifting::{enumerate_liftings, ev_json, extend_density_to_lifting, verify_density, verify_lifting};
use crate::lifting::{AnchorLifting, DensityTable, SetMap};
use crate::product::{
    check_IT, check_strong, positive_section_set, radon_nikodym, strong_witness, support_event,
    topology_strong_witness, uniform_ac_witness, ItOutcome, JointMeasure, ProductSpace, Rcp,
};
use crate::report::{Law, VerificationReport};
use crate::space::Event;

/// `(x, y) ↦ (σ.anchor(x), ρ.anchor(y))`, a lifting for the completion of `P ⊗ Q`.
pub fn product_anchor_lifting(prod: &ProductSpace, sigma: &AnchorLifting, rho: &AnchorLifting) -> AnchorLifting {
    let pq = JointMeasure::product_measure(sigma.measure(), rho.measure()).expect("complete marginals");
    let anchor = (0..prod.len())
        .map(|p| {
            let (x, y) = prod.coords(p);
            prod.index(sigma.anchor_of(x), rho.anchor_of(y))
        })
        .collect();
    AnchorLifting::new(pq.r().clone(), anchor).expect("products of anchors are anchors")
}

/// Checks the four base properties of a product density `φ` against `σ`
/// and `ρ`: full section unions, σ-fixed sections, measurable x-sections and
/// the rectangle inclusion `φ(A×B) ⊇ σ(A)×ρ(B)`.
pub fn verify_base_density(
    prod: &ProductSpace,
    phi: &impl SetMap,
    sigma: &AnchorLifting,
    rho: &AnchorLifting,
) -> VerificationReport {
    let mut report = VerificationReport::new("base-density");
    let p = sigma.measure();
    let n = prod.len();
    let mut full = Law::new("full_sections");
    let mut fixed = Law::new("sigma_fixed_sections");
    let mut xsec = Law::new("x_sections_measurable");
    for e in Event::all(n) {
        let img = phi.image(e).expect("power set");
        let cimg = phi.image(e.complement()).expect("power set");
        for y in 0..prod.ny() {
            let s = prod.section_y(img, y);
            let u = s | prod.section_y(cimg, y);
            full.check(p.support().is_subset(&u), || json!({"event": ev_json(e), "y": y}));
            fixed.check(sigma.apply(s) == s, || json!({"event": ev_json(e), "y": y}));
        }
        // Every subset of Y is measurable for the complete Q.
        xsec.check(true, || json!(null));
    }
    let mut rect = Law::new("rectangle_inclusion");
    for a in Event::all(prod.nx()) {
        for b in Event::all(prod.ny()) {
            let lhs = phi.image(prod.rectangle(a, b)).expect("power set");
            let rhs = prod.rectangle(sigma.apply(a), rho.apply(b));
            rect.check(rhs.is_subset(&lhs), || json!({"a": ev_json(a), "b": ev_json(b)}));
        }
    }
    report.push(full);
    report.push(fixed);
    report.push(xsec);
    report.push(rect);
    report
}

/// The homomorphism `φ_y(E) = τ_y(E^{ρ.anchor(y)})`.
#[derive(Clone, Debug)]
pub struct PhiY {
    prod: ProductSpace,
    tau: AnchorLifting,
    y: usize,
    source: usize,
}

impl PhiY {
    pub fn apply(&self, e: Event) -> Event {
        self.tau.apply(self.prod.section_y(e, self.source))
    }

    pub fn y(&self) -> usize {
        self.y
    }

    /// The point of Y whose sections `φ_y` reads.
    pub fn source(&self) -> usize {
        self.source
    }

    pub fn tau(&self) -> &AnchorLifting {
        &self.tau
    }
}

/// Builds `φ_y` and checks that it vanishes on `R`-null events. That holds
/// exactly when `S_y ≪ S_{ρ.anchor(y)}`; otherwise the intersection
/// condition fails at the returned rectangle.
pub fn boolean_hom_phi_y(tau_y: &AnchorLifting, rho: &AnchorLifting, y: usize, r: &JointMeasure) -> Result<PhiY> {
    let prod = r.product().clone();
    let source = rho.anchor_of(y);
    let s_src = (0..prod.nx()).filter(|&x| r.mass(x, source).is_positive());
    let src_support = Event::from_indices(prod.nx(), s_src).expect("in range");
    if let Some(x) = (tau_y.measure().support() - src_support).lowest() {
        return Err(Error::ItViolated { a: Event::singleton(prod.nx(), x), b: Event::singleton(prod.ny(), source), y });
    }
    Ok(PhiY { prod, tau: tau_y.clone(), y, source })
}

/// Exhaustive check of the properties claimed for `φ_y`.
pub fn verify_phi_y(phi: &PhiY, rho: &AnchorLifting, r: &JointMeasure) -> VerificationReport {
    let prod = r.product();
    let mut report = VerificationReport::new(format!("phi_y[{}]", phi.y));
    let mut hom = Law::new("homomorphism");
    let mut range = Law::new("range_tau_fixed");
    let mut null = Law::new("null_vanishing");
    let supp = r.r().support();
    for e in Event::all(prod.len()) {
        let img = phi.apply(e);
        range.check(phi.tau.apply(img) == img, || json!({"event": ev_json(e)}));
        hom.check(phi.apply(e.complement()) == img.complement(), || json!({"event": ev_json(e)}));
        if e.is_disjoint(&supp) {
            null.check(img.is_empty(), || json!({"event": ev_json(e), "image": ev_json(img)}));
        }
    }
    let mut meet = Law::new("intersection");
    for (i, e) in Event::all(prod.len()).enumerate().step_by(7) {
        for f in Event::all(prod.len()).skip(i % 5).step_by(11) {
            meet.check(phi.apply(e & f) == phi.apply(e) & phi.apply(f), || json!({"e": ev_json(e), "f": ev_json(f)}));
        }
    }
    let mut rect = Law::new("rectangle_values");
    for a in Event::all(prod.nx()) {
        let got = phi.apply(prod.rectangle(a, Event::full(prod.ny())));
        rect.check(got == phi.tau.apply(a), || json!({"a": ev_json(a)}));
    }
    for b in Event::all(prod.ny()) {
        let got = phi.apply(prod.rectangle(Event::full(prod.nx()), b));
        let want = if rho.apply(b).contains(phi.y) { Event::full(prod.nx()) } else { Event::empty(prod.nx()) };
        rect.check(got == want, || json!({"b": ev_json(b)}));
    }
    report.push(hom);
    report.push(meet);
    report.push(range);
    report.push(rect);
    report.push(null);
    report
}

/// The split lower densities together with the objects they are built from.
#[derive(Clone, Debug)]
pub struct SplitDensities {
    pub product: ProductSpace,
    /// `ψ` with every y-section closed under `ψ_y`.
    pub psi: DensityTable,
    /// `ψ` exactly as assembled from `ψ₁` and the `φ_y`, before closing.
    pub psi_raw: DensityTable,
    pub psi_y: Vec<DensityTable>,
    pub rho: AnchorLifting,
    pub sigma: AnchorLifting,
    pub phi: AnchorLifting,
    pub support: Event,
    pub null_set: Event,
    pub tau_y: Vec<Option<AnchorLifting>>,
}

/// Builds the densities after checking the intersection condition.
pub fn build_split_densities(rcp: &Rcp, rho: &AnchorLifting, r: &JointMeasure) -> Result<SplitDensities> {
    check_IT(rcp, rho, r).into_result()?;
    assemble_split_densities(rcp, rho, r)
}

/// The density construction without the up-front intersection check. Used
/// directly only to exhibit where the construction breaks without it.
pub fn assemble_split_densities(rcp: &Rcp, rho: &AnchorLifting, r: &JointMeasure) -> Result<SplitDensities> {
    let prod = r.product().clone();
    if rcp.len() != prod.ny() || rcp.x().len() != prod.nx() || rho.len() != prod.ny() {
        return Err(Error::SpaceMismatch("rcp, lifting and joint measure disagree".into()));
    }
    let (p, _) = r.marginals();
    let pq = r.marginal_product();
    let f = radon_nikodym(&prod, r.r(), pq.r())?;
    let sigma = AnchorLifting::smallest(p)?;
    let phi = product_anchor_lifting(&prod, &sigma, rho);
    let support = support_event(&f, &phi);

    let (nx, ny) = (prod.nx(), prod.ny());
    // Besides `S_y(E_R^y) < 1`, N also takes every y whose support is not
    // `E_R^y ∩ supp P`. Such y are Q-null, and for them `σ(A ∩ E_R^y)` would
    // not depend on A through its S_y-class only.
    let p_supp = p.support();
    let mut null_set = Event::empty(ny);
    for y in 0..ny {
        if rcp.s(y).support() != prod.section_y(support, y) & p_supp {
            null_set = null_set | Event::singleton(ny, y);
        }
    }

    let mut tau_y = vec![None; ny];
    let mut phis = Vec::new();
    let mut psi_y = Vec::with_capacity(ny);
    for y in 0..ny {
        let s = rcp.s(y);
        if null_set.contains(y) {
            let tau = AnchorLifting::smallest(s)?;
            phis.push(boolean_hom_phi_y(&tau, rho, y, r)?);
            psi_y.push(tau.to_table());
            tau_y[y] = Some(tau);
        } else {
            let ey = prod.section_y(support, y);
            let full = Event::full(nx);
            psi_y.push(DensityTable::from_fn(s.clone(), s.algebra().clone(), |a| {
                if s.ae_equal(a, full).expect("power set") {
                    full
                } else {
                    sigma.apply(a & ey)
                }
            }));
        }
    }

    let r_supp = r.r().support();
    let keep = prod.rectangle(Event::full(nx), null_set.complement());
    let zfull = Event::full(prod.len());
    let psi_raw = DensityTable::from_fn(r.r().clone(), r.r().algebra().clone(), |e| {
        let psi1 = if r_supp.is_subset(&e) { zfull } else { phi.apply(e & support) };
        let mut out = psi1 & keep;
        for py in &phis {
            out = out | prod.slice(py.apply(e), py.y());
        }
        out
    });
    // A section that is S_y-full but not X cannot be a fixed point of any
    // density for S_y, so each section is passed through ψ_y once. This
    // leaves every σ_y(section) unchanged.
    let psi = DensityTable::from_codes(r.r().clone(), r.r().algebra().clone(), |c, _| {
        let img = psi_raw.image_code(c);
        let secs: Vec<Event> = (0..ny).map(|y| psi_y[y].image(prod.section_y(img, y)).expect("power set")).collect();
        prod.assemble(&secs)
    });

    Ok(SplitDensities { product: prod, psi, psi_raw, psi_y, rho: rho.clone(), sigma, phi, support, null_set, tau_y })
}

/// Exhaustive check of the four split-density properties, plus the density
/// laws of `ψ` and every `ψ_y`.
pub fn verify_split_densities(sd: &SplitDensities, rcp: &Rcp) -> VerificationReport {
    verify_densities_with(sd, &sd.psi, rcp)
}

/// The same checks applied to `psi` in place of `sd.psi`.
pub fn verify_densities_with(sd: &SplitDensities, psi: &DensityTable, rcp: &Rcp) -> VerificationReport {
    let prod = &sd.product;
    let mut report = VerificationReport::new("split-densities");
    report.absorb("psi.", verify_density(psi));
    for (y, t) in sd.psi_y.iter().enumerate() {
        report.absorb(&format!("psi_y[{y}]."), verify_density(t));
    }
    let mut full = Law::new("full_sections");
    let mut fixed = Law::new("section_fixed");
    let mut xsec = Law::new("x_sections_measurable");
    let n = prod.len();
    let top = (1u64 << n) - 1;
    for c in 0..=top {
        let img = psi.image_code(c);
        let cimg = psi.image_code(c ^ top);
        for y in 0..prod.ny() {
            let s = prod.section_y(img, y);
            let u = s | prod.section_y(cimg, y);
            full.check(rcp.s(y).support().is_subset(&u), || json!({"event": ev_json(img), "y": y}));
            fixed.check(
                sd.psi_y[y].image(s) == Some(s),
                || json!({"event": ev_json(Event::from_bits(n, c).unwrap()), "y": y}),
            );
        }
        xsec.check(true, || json!(null));
    }
    let mut rect = Law::new("rectangle_inclusion");
    for a in Event::all(prod.nx()) {
        for b in Event::all(prod.ny()) {
            let lhs = psi.image(prod.rectangle(a, b)).expect("power set");
            let rb = sd.rho.apply(b);
            for y in rb.indices() {
                let piece = sd.psi_y[y].image(a).expect("power set");
                rect.check(
                    piece.is_subset(&prod.section_y(lhs, y)),
                    || json!({"a": ev_json(a), "b": ev_json(b), "y": y}),
                );
            }
        }
    }
    report.push(full);
    report.push(fixed);
    report.push(xsec);
    report.push(rect);
    report.count("null_set_size", sd.null_set.count() as u64);
    report
}

/// A lifting of the joint measure with a lifting of every conditional
/// measure and a lifting of Q.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitLiftings {
    #[serde(skip)]
    pub product: ProductSpace,
    #[serde(serialize_with = "ser_anchor")]
    pub pi: AnchorLifting,
    #[serde(serialize_with = "ser_anchors")]
    pub sigma_y: Vec<AnchorLifting>,
    #[serde(serialize_with = "ser_anchor")]
    pub rho: AnchorLifting,
}

fn ser_anchor<S: serde::Serializer>(l: &AnchorLifting, s: S) -> std::result::Result<S::Ok, S::Error> {
    l.anchor().serialize(s)
}

fn ser_anchors<S: serde::Serializer>(l: &[AnchorLifting], s: S) -> std::result::Result<S::Ok, S::Error> {
    l.iter().map(|a| a.anchor().to_vec()).collect::<Vec<_>>().serialize(s)
}

impl SplitLiftings {
    /// `⋃_{y∈ρ(B)} σ_y(A)×{y}`.
    pub fn rectangle_formula(&self, a: Event, b: Event) -> Event {
        let secs: Vec<Event> = (0..self.product.ny())
            .map(|y| if self.rho.apply(b).contains(y) { self.sigma_y[y].apply(a) } else { Event::empty(a.len()) })
            .collect();
        self.product.assemble(&secs)
    }
}

/// Liftings `σ_y ⊇ ψ_y` and `π` defined sectionwise by `[π(E)]^y = σ_y([ψ(E)]^y)`.
pub fn promote_to_split_liftings(sd: &SplitDensities) -> Result<SplitLiftings> {
    let sigma_y = sd.psi_y.iter().map(extend_density_to_lifting).collect::<Result<Vec<_>>>()?;
    let prod = &sd.product;
    let table = DensityTable::from_fn(sd.psi.measure().clone(), sd.psi.domain().clone(), |e| {
        let img = sd.psi.image(e).expect("power set");
        let secs: Vec<Event> = (0..prod.ny()).map(|y| sigma_y[y].apply(prod.section_y(img, y))).collect();
        prod.assemble(&secs)
    });
    let pi = AnchorLifting::from_table(&table)
        .map_err(|e| Error::InternalInvariantBroken(format!("sectionwise lifting: {e}")))?;
    Ok(SplitLiftings { product: prod.clone(), pi, sigma_y, rho: sd.rho.clone() })
}

/// Exhaustive check: `π` and each `σ_y` are liftings of the right measures,
/// the section property holds for every event and y, and (when asked) the
/// rectangle formula holds on every rectangle.
pub fn verify_split_liftings(sl: &SplitLiftings, rcp: &Rcp, r: &JointMeasure, rf: bool) -> VerificationReport {
    let prod = &sl.product;
    let mut report = VerificationReport::new("split-liftings");
    let mut measures = Law::new("measures");
    measures.check(sl.pi.measure() == r.r(), || json!("pi"));
    measures.check(sl.rho.measure() == r.q(), || json!("rho"));
    for (y, s) in sl.sigma_y.iter().enumerate() {
        measures.check(s.measure() == rcp.s(y), || json!({"sigma_y": y}));
    }
    report.push(measures);
    report.absorb("pi.", verify_lifting(&sl.pi));
    let mut sp = Law::new("SP");
    for e in Event::all(prod.len()) {
        let img = sl.pi.apply(e);
        for y in 0..prod.ny() {
            let s = prod.section_y(img, y);
            sp.check(sl.sigma_y[y].apply(s) == s, || json!({"event": ev_json(e), "y": y}));
        }
    }
    report.push(sp);
    if rf {
        let mut law = Law::new("RF");
        for a in Event::all(prod.nx()) {
            for b in Event::all(prod.ny()) {
                let lhs = sl.pi.apply(prod.rectangle(a, b));
                law.check(lhs == sl.rectangle_formula(a, b), || json!({"a": ev_json(a), "b": ev_json(b)}));
            }
        }
        report.push(law);
    }
    report.count("events", 1u64 << prod.len());
    report
}

/// `[π(E)]^y = σ_y([ψ(E)]^y)` for every event and y.
pub fn verify_sectionwise_definition(sl: &SplitLiftings, sd: &SplitDensities) -> VerificationReport {
    let prod = &sl.product;
    let mut report = VerificationReport::new("sectionwise");
    let mut law = Law::new("pi_from_psi");
    let mut dom = Law::new("sigma_dominates_psi");
    for e in Event::all(prod.len()) {
        let pi = sl.pi.apply(e);
        let psi = sd.psi.image(e).expect("power set");
        for y in 0..prod.ny() {
            let want = sl.sigma_y[y].apply(prod.section_y(psi, y));
            law.check(prod.section_y(pi, y) == want, || json!({"event": ev_json(e), "y": y}));
        }
    }
    for (y, t) in sd.psi_y.iter().enumerate() {
        dom.check(t.dominated_by(&sl.sigma_y[y]).is_none(), || json!({"y": y}));
    }
    report.push(law);
    report.push(dom);
    report
}

/// Replaces every `S_y` that charges a P-null point by `S_{y*}` for the
/// smallest Q-positive `y*`. Only Q-null y can be affected.
pub fn make_abs_continuous(rcp: &Rcp, r: &JointMeasure) -> Result<Rcp> {
    let lowest = r.q().support().lowest().ok_or(Error::NoPositivePoint)?;
    let mut out = rcp.clone();
    for y in 0..rcp.len() {
        if !rcp.s(y).support().is_subset(&r.p().support()) {
            if r.q().is_positive_point(y) {
                let x = (rcp.s(y).support() - r.p().support()).lowest().unwrap();
                return Err(Error::PreconditionFailed { y, x });
            }
            out = out.with(y, rcp.s(lowest).clone());
        }
    }
    Ok(out)
}

/// Output of the repair: the new rcp `T`, the new lifting `ρ'` on Y, the
/// repaired base density `φ'`, and the set `N` that was moved.
#[derive(Clone, Debug)]
pub struct Repair {
    pub t: Rcp,
    pub rho_prime: AnchorLifting,
    pub phi_prime: DensityTable,
    pub null_set: Event,
    pub y0: usize,
}

/// Moves every y of `N = {y : S_y(E_R^y) < 1}` onto the smallest `y₀ ∉ N`:
/// `T_y = S_{y₀}` and `y ∈ ρ'(B) ⟺ y₀ ∈ ρ(B)` for `y ∈ N`.
pub fn repair_rcp(rcp: &Rcp, rho: &AnchorLifting, r: &JointMeasure) -> Result<Repair> {
    if let Some((y, x)) = uniform_ac_witness(rcp, r.p()) {
        return Err(Error::PreconditionFailed { y, x });
    }
    let prod = r.product();
    let pq = r.marginal_product();
    let f = radon_nikodym(prod, r.r(), pq.r())?;
    let sigma = AnchorLifting::smallest(r.p())?;
    let phi = product_anchor_lifting(prod, &sigma, rho);
    let support = support_event(&f, &phi);
    let ny = prod.ny();
    let null_set =
        Event::from_indices(ny, (0..ny).filter(|&y| !rcp.s(y).support().is_subset(&prod.section_y(support, y))))
            .expect("in range");
    let y0 =
        null_set.complement().lowest().ok_or_else(|| Error::InternalInvariantBroken("every y lies in N".into()))?;
    let mut t = rcp.clone();
    let mut anchor = rho.anchor().to_vec();
    for y in null_set.indices() {
        t = t.with(y, rcp.s(y0).clone());
        anchor[y] = rho.anchor_of(y0);
    }
    let rho_prime = AnchorLifting::new(r.q().clone(), anchor)
        .map_err(|e| Error::InternalInvariantBroken(format!("N is not Q-null: {e}")))?;
    let keep = prod.rectangle(Event::full(prod.nx()), null_set.complement());
    let phi_prime = DensityTable::from_fn(pq.r().clone(), pq.r().algebra().clone(), |e| {
        let img = phi.apply(e);
        let mut out = img & keep;
        let at_y0 = prod.section_y(img, y0);
        for y in null_set.indices() {
            out = out | prod.slice(at_y0, y);
        }
        out
    });
    Ok(Repair { t, rho_prime, phi_prime, null_set, y0 })
}

/// Everything produced by the absolutely continuous pipeline.
#[derive(Clone, Debug)]
pub struct AcPipeline {
    pub original: Rcp,
    pub abs_continuous: Rcp,
    pub repair: Repair,
    pub densities: SplitDensities,
    pub split: SplitLiftings,
}

/// `R ≪ P⊗Q` is checked first. Then: make the rcp absolutely continuous,
/// repair it, build the split densities for `(T, ρ')` and promote them.
/// `start` defaults to the rcp copying the lowest positive y at null y, and
/// `rho` to the smallest-anchor lifting of Q.
pub fn full_ac_pipeline(r: &JointMeasure, start: Option<&Rcp>, rho: Option<&AnchorLifting>) -> Result<AcPipeline> {
    let pq = r.marginal_product();
    radon_nikodym(r.product(), r.r(), pq.r())?;
    let original = match start {
        Some(s) => s.clone(),
        None => crate::product::rcp_from_joint(r, &crate::product::NullYPolicy::CopyLowest)?,
    };
    let rho = match rho {
        Some(l) => l.clone(),
        None => AnchorLifting::smallest(r.q())?,
    };
    let abs_continuous = make_abs_continuous(&original, r)?;
    let repair = repair_rcp(&abs_continuous, &rho, r)?;
    let densities = build_split_densities(&repair.t, &repair.rho_prime, r)?;
    let split = promote_to_split_liftings(&densities)?;
    Ok(AcPipeline { original, abs_continuous, repair, densities, split })
}

/// Postconditions of the repair: the changed set is Q-null, the
/// intersection condition holds for `(T, ρ')`, `ρ'` is a lifting and `φ'`
/// is a density with the four base properties.
pub fn verify_repair(original: &Rcp, rep: &Repair, sigma: &AnchorLifting, r: &JointMeasure) -> VerificationReport {
    let mut report = VerificationReport::new("repair");
    let changed = Event::from_indices(original.len(), (0..original.len()).filter(|&y| original.s(y) != rep.t.s(y)))
        .expect("in range");
    let mut null = Law::new("changed_set_null");
    null.check(changed.is_disjoint(&r.q().support()), || json!({"changed": ev_json(changed)}));
    report.push(null);
    let mut it = Law::new("IT");
    if let ItOutcome::Counterexample { a, b, y } = check_IT(&rep.t, &rep.rho_prime, r) {
        it.fail(json!({"a": ev_json(a), "b": ev_json(b), "y": y}));
    } else {
        it.check(true, || json!(null));
    }
    report.push(it);
    report.absorb("rho_prime.", verify_lifting(&rep.rho_prime));
    // φ' is a density for the completion of P⊗Q and meets the base
    // properties with ρ'.
    let prod = r.product();
    report.absorb("phi_prime.", verify_density(&rep.phi_prime));
    let mut base = verify_base_density(prod, &rep.phi_prime, sigma, &rep.rho_prime);
    base.suite = "phi_prime-base".into();
    report.absorb("phi_prime.", base);
    report
}

/// Outcome of the exact search for a family `{σ_y}` making the rectangle
/// formula hold with some lifting of the joint measure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RfSearch {
    Found { family: Vec<Vec<usize>>, searched: u128 },
    NoWitness { searched: u128, a: Vec<usize>, b: Vec<usize>, point: (usize, usize) },
    BudgetExceeded { needed: u128, budget: u128 },
}

/// The rectangle formula forces `π.anchor(x,y) = (σ_y.anchor(x), ρ.anchor(y))`
/// on the product, so a family works iff every forced anchor is R-positive.
/// Families are enumerated in odometer order (first y fastest). For a
/// failing search, the obstruction is taken from the first family: the first
/// R-null rectangle (A ascending, B descending) whose formula image is
/// nonempty.
pub fn search_rf(rcp: &Rcp, rho: &AnchorLifting, r: &JointMeasure, budget: u128) -> Result<RfSearch> {
    let prod = r.product();
    let ny = prod.ny();
    let mut needed: u128 = 1;
    for y in 0..ny {
        needed = needed.saturating_mul(crate::lifting::count_liftings(rcp.s(y)));
    }
    if needed > budget {
        return Ok(RfSearch::BudgetExceeded { needed, budget });
    }
    let families: Vec<Vec<AnchorLifting>> =
        (0..ny).map(|y| enumerate_liftings(rcp.s(y)).map(|it| it.collect())).collect::<Result<_>>()?;
    let supp = r.r().support();
    let mut idx = vec![0usize; ny];
    let mut searched: u128 = 0;
    loop {
        searched += 1;
        let ok = (0..prod.len()).all(|p| {
            let (x, y) = prod.coords(p);
            supp.contains(prod.index(families[y][idx[y]].anchor_of(x), rho.anchor_of(y)))
        });
        if ok {
            let family = (0..ny).map(|y| families[y][idx[y]].anchor().to_vec()).collect();
            return Ok(RfSearch::Found { family, searched });
        }
        let mut carry = true;
        for (y, i) in idx.iter_mut().enumerate() {
            *i += 1;
            if *i < families[y].len() {
                carry = false;
                break;
            }
            *i = 0;
        }
        if carry {
            break;
        }
    }
    let first: Vec<AnchorLifting> = families.iter().map(|f| f[0].clone()).collect();
    for a in Event::all(prod.nx()) {
        for b in Event::all(ny).collect::<Vec<_>>().into_iter().rev() {
            if !r.rect_measure(a, b).is_zero() {
                continue;
            }
            let rb = rho.apply(b);
            for y in rb.indices() {
                if let Some(x) = first[y].apply(a).lowest() {
                    return Ok(RfSearch::NoWitness {
                        searched,
                        a: a.indices().collect(),
                        b: b.indices().collect(),
                        point: (x, y),
                    });
                }
            }
        }
    }
    Err(Error::InternalInvariantBroken("no family works but no obstruction found".into()))
}

/// The three equivalent conditions and the rectangle-formula outcome.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub it: bool,
    pub sections_open: bool,
    pub strong: bool,
    pub agree: bool,
    pub search: RfSearch,
    /// Verification of the witness built by the pipeline when the
    /// conditions hold.
    pub witness: Option<VerificationReport>,
}

impl EquivalenceReport {
    /// Sound iff the three booleans agree, the search agrees with them, and
    /// any constructed witness verifies.
    pub fn to_report(&self) -> VerificationReport {
        let mut rep = VerificationReport::new("prop27");
        rep.push_result(
            "conditions_agree",
            self.agree,
            (!self.agree).then(|| json!({"it": self.it, "sections_open": self.sections_open, "strong": self.strong})),
        );
        match &self.search {
            RfSearch::BudgetExceeded { needed, budget } => {
                rep.spot();
                rep.note(format!("family search skipped: {needed} candidates exceed budget {budget}"));
            }
            s => {
                let found = matches!(s, RfSearch::Found { .. });
                rep.push_result(
                    "rf_existence_matches",
                    found == self.it,
                    (found != self.it).then(|| serde_json::to_value(s).expect("plain data")),
                );
                if let RfSearch::NoWitness { .. } = s {
                    rep.note(format!("no rf witness: {}", serde_json::to_string(s).unwrap()));
                }
            }
        }
        if let Some(w) = &self.witness {
            rep.absorb("witness.", w.clone());
        }
        rep.count("it", self.it as u64);
        rep.count("sections_open", self.sections_open as u64);
        rep.count("strong", self.strong as u64);
        rep
    }
}

pub fn prop27_report(rcp: &Rcp, rho: &AnchorLifting, r: &JointMeasure, budget: u128) -> Result<EquivalenceReport> {
    let it = check_IT(rcp, rho, r).is_ok();
    let sections_open = strong_witness(rcp, rho).is_none();
    let strong = topology_strong_witness(rcp, rho).is_none();
    debug_assert_eq!(sections_open, check_strong(rcp, rho));
    let agree = it == sections_open && sections_open == strong;
    let search = search_rf(rcp, rho, r, budget)?;
    let witness = if it {
        let sd = build_split_densities(rcp, rho, r)?;
        let sl = promote_to_split_liftings(&sd)?;
        Some(verify_split_liftings(&sl, rcp, r, true))
    } else {
        None
    };
    Ok(EquivalenceReport { it, sections_open, strong, agree, search, witness })
}

/// Independent characterisation used as a cross-check: the intersection
/// condition holds iff every `S_y` is absolutely continuous with respect to
/// `S_{ρ.anchor(y)}`.
pub fn it_by_anchor_continuity(rcp: &Rcp, rho: &AnchorLifting) -> bool {
    (0..rcp.len()).all(|y| rcp.s(y).support().is_subset(&rcp.s(rho.anchor_of(y)).support()))
}

/// `B_A` for every event A of X, in code order.
pub fn section_sets(rcp: &Rcp) -> Vec<Event> {
    Event::all(rcp.x().len()).map(|a| positive_section_set(rcp, a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Measure;
    use crate::product::{rcp_from_joint, NullYPolicy};
    use crate::rational::Rational;
    use crate::space::FiniteSpace;

    fn q(a: i128, b: i128) -> Rational {
        Rational::new(a, b)
    }

    fn ev(n: usize, idx: &[usize]) -> Event {
        Event::from_indices(n, idx.iter().copied()).unwrap()
    }

    fn sp(n: usize) -> FiniteSpace {
        FiniteSpace::indexed(n).unwrap()
    }

    fn space_a() -> (JointMeasure, Rcp, AnchorLifting) {
        let z = q(0, 1);
        let h = q(1, 2);
        let r = JointMeasure::from_matrix(sp(3), sp(2), &[vec![h, z], vec![z, h], vec![z, z]]).unwrap();
        let rcp = rcp_from_joint(&r, &NullYPolicy::CopyLowest).unwrap();
        let rho = AnchorLifting::smallest(r.q()).unwrap();
        (r, rcp, rho)
    }

    fn space_b() -> (JointMeasure, Rcp, AnchorLifting) {
        let (o, z) = (q(1, 1), q(0, 1));
        let r = JointMeasure::from_matrix(sp(2), sp(2), &[vec![o, z], vec![z, z]]).unwrap();
        let s1 = Measure::dirac(sp(2), 1).unwrap();
        let rcp = rcp_from_joint(&r, &NullYPolicy::Explicit(vec![None, Some(s1)])).unwrap();
        let rho = AnchorLifting::smallest(r.q()).unwrap();
        (r, rcp, rho)
    }

    #[test]
    fn product_anchor_examples() {
        let (r, _, rho) = space_a();
        let sigma = AnchorLifting::smallest(r.p()).unwrap();
        let prod = r.product();
        let phi = product_anchor_lifting(prod, &sigma, &rho);
        let img = phi.apply(prod.rectangle(ev(3, &[0]), Event::full(2)));
        assert_eq!(img, prod.rectangle(ev(3, &[0, 2]), Event::full(2)));
        assert!(verify_base_density(prod, &phi, &sigma, &rho).pass);
        assert!(verify_lifting(&phi).pass);
    }

    #[test]
    fn phi_y_examples() {
        let (r, rcp, rho) = space_a();
        let tau = AnchorLifting::smallest(rcp.s(0)).unwrap();
        let phi = boolean_hom_phi_y(&tau, &rho, 0, &r).unwrap();
        let prod = r.product();
        assert_eq!(phi.apply(Event::full(6)), Event::full(3));
        for a in Event::all(3) {
            for b in Event::all(2) {
                let want = if b.contains(0) { tau.apply(a) } else { Event::empty(3) };
                assert_eq!(phi.apply(prod.rectangle(a, b)), want);
            }
        }
        assert!(verify_phi_y(&phi, &rho, &r).pass);
        let (rb, rcpb, rhob) = space_b();
        let tau1 = AnchorLifting::smallest(rcpb.s(1)).unwrap();
        let err = boolean_hom_phi_y(&tau1, &rhob, 1, &rb).unwrap_err();
        assert_eq!(err, Error::ItViolated { a: ev(2, &[1]), b: ev(2, &[0]), y: 1 });
    }

    #[test]
    fn space_a_pipeline() {
        let (r, rcp, rho) = space_a();
        let sd = build_split_densities(&rcp, &rho, &r).unwrap();
        assert!(sd.null_set.is_empty());
        let rep = verify_split_densities(&sd, &rcp);
        assert!(rep.pass, "{rep}");
        let sl = promote_to_split_liftings(&sd).unwrap();
        let rep = verify_split_liftings(&sl, &rcp, &r, true);
        assert!(rep.pass, "{rep}");
        assert!(verify_sectionwise_definition(&sl, &sd).pass);
        assert_eq!(sl.pi.apply(Event::empty(6)), Event::empty(6));
    }

    #[test]
    fn unclosed_sections_break_fixedness() {
        let (r, rcp, rho) = space_a();
        let sd = build_split_densities(&rcp, &rho, &r).unwrap();
        let rep = verify_densities_with(&sd, &sd.psi_raw, &rcp);
        let prod = r.product();
        let w = rep.law("section_fixed").unwrap().witness.clone().unwrap();
        assert_eq!(w, json!({"event": [prod.index(0, 0)], "y": 0}));
        assert!(!rep.law("rectangle_inclusion").unwrap().pass);
        assert!(rep.law("full_sections").unwrap().pass);
        assert!(rep.law("psi.intersection").unwrap().pass);
        // Closing the sections does not move the final lifting.
        let sl = promote_to_split_liftings(&sd).unwrap();
        let raw = SplitDensities { psi: sd.psi_raw.clone(), ..sd.clone() };
        assert_eq!(promote_to_split_liftings(&raw).unwrap(), sl);
    }

    #[test]
    fn product_measure_recovers_product_anchor() {
        let x = sp(3);
        let p = Measure::on_power_set(x.clone(), vec![q(1, 2), q(1, 2), q(0, 1)]).unwrap();
        let qm = Measure::on_power_set(sp(2), vec![q(1, 1), q(0, 1)]).unwrap();
        let r = JointMeasure::product_measure(&p, &qm).unwrap();
        let rcp = Rcp::new(x, vec![p.clone(), p.clone()]).unwrap();
        let rho = AnchorLifting::smallest(&qm).unwrap();
        let sd = build_split_densities(&rcp, &rho, &r).unwrap();
        assert_eq!(sd.support, Event::full(6));
        assert!(sd.null_set.is_empty());
        let sl = promote_to_split_liftings(&sd).unwrap();
        let sigma = AnchorLifting::smallest(&p).unwrap();
        let phi = product_anchor_lifting(r.product(), &sigma, &rho);
        assert_eq!(sl.pi.anchor(), phi.anchor());
        for s in &sl.sigma_y {
            assert_eq!(s, &sigma);
        }
    }

    #[test]
    fn space_b_needs_repair() {
        let (r, rcp, rho) = space_b();
        assert!(matches!(build_split_densities(&rcp, &rho, &r), Err(Error::ItViolated { .. })));
        let out = full_ac_pipeline(&r, Some(&rcp), None).unwrap();
        assert_eq!(out.abs_continuous.s(1), rcp.s(0));
        assert!(out.repair.null_set.is_empty());
        let rep = verify_split_liftings(&out.split, &out.repair.t, &r, true);
        assert!(rep.pass, "{rep}");
        let sigma = AnchorLifting::smallest(r.p()).unwrap();
        assert!(verify_repair(&rcp, &out.repair, &sigma, &r).pass);
    }

    /// Y = {0,1,2} with y = 2 Q-null and `S_2` a.c. w.r.t. P but charging a
    /// point outside `E_R^2`, so it lands in N and gets moved.
    fn n_fixture() -> (JointMeasure, Rcp, AnchorLifting) {
        let (z, h) = (q(0, 1), q(1, 2));
        let r = JointMeasure::from_matrix(sp(3), sp(3), &[vec![h, z, z], vec![z, h, z], vec![z, z, z]]).unwrap();
        let s2 = Measure::dirac(sp(3), 1).unwrap();
        let rcp = rcp_from_joint(&r, &NullYPolicy::Explicit(vec![None, None, Some(s2)])).unwrap();
        let rho = AnchorLifting::smallest(r.q()).unwrap();
        (r, rcp, rho)
    }

    #[test]
    fn repair_moves_n() {
        let (r, rcp, rho) = n_fixture();
        assert!(!check_IT(&rcp, &rho, &r).is_ok());
        let rep = repair_rcp(&rcp, &rho, &r).unwrap();
        assert_eq!(rep.null_set, ev(3, &[2]));
        assert_eq!(rep.y0, 0);
        assert_eq!(rep.t.s(2), rcp.s(0));
        assert_eq!(rep.rho_prime.anchor(), &[0, 1, 0]);
        let sigma = AnchorLifting::smallest(r.p()).unwrap();
        let v = verify_repair(&rcp, &rep, &sigma, &r);
        assert!(v.pass, "{v}");
        let phi2 = product_anchor_lifting(r.product(), &sigma, &rep.rho_prime);
        assert_eq!(rep.phi_prime, phi2.to_table());
    }

    #[test]
    fn n_branch_without_the_condition() {
        let (r, rcp, rho) = n_fixture();
        // The N branch is reached, and φ_y cannot vanish on R-null events.
        let err = assemble_split_densities(&rcp, &rho, &r).unwrap_err();
        assert!(matches!(err, Error::ItViolated { y: 2, .. }));
    }

    #[test]
    fn empty_repair_is_identity() {
        let (r, rcp, rho) = space_a();
        let rep = repair_rcp(&rcp, &rho, &r).unwrap();
        assert!(rep.null_set.is_empty());
        assert_eq!(rep.t, rcp);
        assert_eq!(rep.rho_prime, rho);
    }

    #[test]
    fn prop27_examples() {
        let (r, rcp, rho) = space_a();
        let e = prop27_report(&rcp, &rho, &r, 1_000_000).unwrap();
        assert!(e.it && e.sections_open && e.strong && e.agree);
        assert!(matches!(e.search, RfSearch::Found { .. }));
        assert!(e.to_report().pass);
        let (r, rcp, rho) = space_b();
        let e = prop27_report(&rcp, &rho, &r, 1_000_000).unwrap();
        assert!(!e.it && !e.sections_open && !e.strong);
        assert_eq!(e.search, RfSearch::NoWitness { searched: 1, a: vec![1], b: vec![0, 1], point: (0, 1) });
        assert!(e.to_report().pass);
        let over = prop27_report(&rcp, &rho, &r, 0).unwrap();
        assert!(matches!(over.search, RfSearch::BudgetExceeded { .. }));
    }

    #[test]
    fn anchor_continuity_matches_it() {
        for (r, rcp, rho) in [space_a(), space_b(), n_fixture()] {
            assert_eq!(it_by_anchor_continuity(&rcp, &rho), check_IT(&rcp, &rho, &r).is_ok());
        }
    }

    #[test]
    fn make_ac_only_touches_null_y() {
        let (r, rcp, _) = space_b();
        let ac = make_abs_continuous(&rcp, &r).unwrap();
        assert_eq!(ac.s(0), rcp.s(0));
        assert_eq!(ac.s(1), rcp.s(0));
    }
    #[test]
    fn null_y_with_a_smaller_support_goes_to_n() {
        let (h, z) = (q(1, 2), q(0, 1));
        let r = JointMeasure::from_matrix(sp(2), sp(2), &[vec![h, z], vec![h, z]]).unwrap();
        let s1 = Measure::dirac(sp(2), 0).unwrap();
        let rcp = rcp_from_joint(&r, &NullYPolicy::Explicit(vec![None, Some(s1)])).unwrap();
        let rho = AnchorLifting::smallest(r.q()).unwrap();
        assert!(check_IT(&rcp, &rho, &r).is_ok());
        let sd = build_split_densities(&rcp, &rho, &r).unwrap();
        assert_eq!(sd.null_set, ev(2, &[1]));
        let rep = verify_split_densities(&sd, &rcp);
        assert!(rep.pass, "{rep}");
        let sl = promote_to_split_liftings(&sd).unwrap();
        let rep = verify_split_liftings(&sl, &rcp, &r, true);
        assert!(rep.pass, "{rep}");
    }
}
