//! Liftings and lower densities on finite spaces.
//!
//! On a completed finite space every lifting is an *anchor map*: each null
//! point delegates its membership to a positive point, and positive points
//! delegate to themselves. [`AnchorLifting`] stores that map directly.
//! [`DensityTable`] stores an arbitrary event map on a (possibly coarser)
//! algebra, indexed by atom-subset code, and is what the constructions that
//! only produce lower densities or partial liftings work with.
//!
//! The law sweeps avoid the quadratic pair sweep for the intersection law:
//! a map respects finite intersections iff, for every point `p`, the family
//! `{E : p ∈ m(E)}` is a filter, and on a finite algebra every filter is
//! principal. So it suffices to compute each point's filter core and check
//! membership against it, which costs `O(points · events)`.

use serde_json::{json, Value};

use crate::algebra::SigmaAlgebra;
use crate::error::{Error, Result};
use crate::measure::{Measure, SimpleFunction};
use crate::report::{Law, VerificationReport};
use crate::space::Event;

pub(crate) fn ev_json(e: Event) -> Value {
    json!(e.indices().collect::<Vec<_>>())
}

/// An event map defined on the measurable events of `domain()`.
pub trait SetMap {
    fn measure(&self) -> &Measure;
    fn domain(&self) -> &SigmaAlgebra;
    /// Image of the measurable event with atom-subset code `code`.
    fn image_code(&self, code: u64) -> Event;

    fn image(&self, e: Event) -> Option<Event> {
        self.domain().encode(e).map(|c| self.image_code(c))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchorLifting {
    measure: Measure,
    anchor: Vec<usize>,
}

impl AnchorLifting {
    pub fn new(measure: Measure, anchor: Vec<usize>) -> Result<Self> {
        if !measure.is_complete() {
            return Err(Error::InvalidLifting("anchor liftings live on the power set".into()));
        }
        if anchor.len() != measure.len() {
            return Err(Error::InvalidLifting(format!("{} anchors for {} points", anchor.len(), measure.len())));
        }
        for (x, &a) in anchor.iter().enumerate() {
            if a >= measure.len() {
                return Err(Error::InvalidLifting(format!("anchor {a} of point {x} out of range")));
            }
            if measure.is_positive_point(x) && a != x {
                return Err(Error::InvalidLifting(format!("positive point {x} anchored to {a}")));
            }
            if !measure.is_positive_point(a) {
                return Err(Error::InvalidLifting(format!("point {x} anchored to null point {a}")));
            }
        }
        Ok(AnchorLifting { measure, anchor })
    }

    /// Every null point anchored to the smallest positive point.
    pub fn smallest(measure: &Measure) -> Result<Self> {
        let first = measure.support().lowest().ok_or(Error::NoPositivePoint)?;
        let anchor = (0..measure.len()).map(|x| if measure.is_positive_point(x) { x } else { first }).collect();
        AnchorLifting::new(measure.clone(), anchor)
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn anchor(&self) -> &[usize] {
        &self.anchor
    }

    pub fn anchor_of(&self, x: usize) -> usize {
        self.anchor[x]
    }

    pub fn len(&self) -> usize {
        self.anchor.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `{x : anchor(x) ∈ e}`.
    #[inline]
    pub fn apply(&self, e: Event) -> Event {
        let b = e.bits();
        let mut out = 0u64;
        for (x, &a) in self.anchor.iter().enumerate() {
            out |= (b >> a & 1) << x;
        }
        Event::from_bits_unchecked(self.anchor.len(), out)
    }

    pub fn to_table(&self) -> DensityTable {
        DensityTable::from_fn(self.measure.clone(), self.measure.algebra().clone(), |e| self.apply(e))
    }

    /// Recover the anchor map from a lifting given as a table on the power
    /// set. Fails unless the table passes every lifting law and coincides
    /// with the recovered anchor map on every event.
    pub fn from_table(table: &DensityTable) -> Result<Self> {
        if !table.domain().is_power_set() || !table.measure().is_complete() {
            return Err(Error::InvalidLifting("table is not on a completed power set".into()));
        }
        let report = verify_lifting(table);
        if !report.pass {
            return Err(Error::InvalidLifting(format!("table violates {:?}", report.failed_laws())));
        }
        let n = table.measure().len();
        let mut anchor = vec![usize::MAX; n];
        for q in 0..n {
            for p in table.image_code(1 << q).indices() {
                anchor[p] = q;
            }
        }
        if anchor.contains(&usize::MAX) {
            return Err(Error::InternalInvariantBroken("singleton images do not cover".into()));
        }
        let lift = AnchorLifting::new(table.measure().clone(), anchor)?;
        for c in 0..table.domain().event_count() {
            let e = Event::from_bits_unchecked(n, c);
            if lift.apply(e) != table.image_code(c) {
                return Err(Error::InternalInvariantBroken(format!("table differs from its anchor form at {e}")));
            }
        }
        Ok(lift)
    }
}

impl SetMap for AnchorLifting {
    fn measure(&self) -> &Measure {
        &self.measure
    }

    fn domain(&self) -> &SigmaAlgebra {
        self.measure.algebra()
    }

    fn image_code(&self, code: u64) -> Event {
        self.apply(Event::from_bits_unchecked(self.anchor.len(), code))
    }
}

/// An explicit event table on the measurable events of `algebra`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityTable {
    measure: Measure,
    algebra: SigmaAlgebra,
    images: Vec<Event>,
}

impl DensityTable {
    /// `algebra` must be coarser than (or equal to) the measure's algebra.
    pub fn from_fn(measure: Measure, algebra: SigmaAlgebra, mut f: impl FnMut(Event) -> Event) -> Self {
        assert!(algebra.is_coarser_than(measure.algebra()), "domain finer than the measure");
        let images = (0..algebra.event_count()).map(|c| f(algebra.decode(c))).collect();
        DensityTable { measure, algebra, images }
    }

    /// Like [`DensityTable::from_fn`] but the closure receives the atom code too.
    pub fn from_codes(measure: Measure, algebra: SigmaAlgebra, mut f: impl FnMut(u64, Event) -> Event) -> Self {
        assert!(algebra.is_coarser_than(measure.algebra()), "domain finer than the measure");
        let images = (0..algebra.event_count()).map(|c| f(c, algebra.decode(c))).collect();
        DensityTable { measure, algebra, images }
    }

    pub fn from_pairs(measure: Measure, algebra: SigmaAlgebra, pairs: &[(Event, Event)]) -> Result<Self> {
        let mut images = vec![None; algebra.event_count() as usize];
        for (e, img) in pairs {
            let c = algebra.encode(*e).ok_or(Error::NotMeasurable(*e))?;
            images[c as usize] = Some(*img);
        }
        let images = images
            .into_iter()
            .enumerate()
            .map(|(c, i)| {
                i.ok_or_else(|| Error::Validation {
                    module: "lifting".into(),
                    detail: format!("table has no entry for {}", algebra.decode(c as u64)),
                })
            })
            .collect::<Result<_>>()?;
        Ok(DensityTable { measure, algebra, images })
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn images(&self) -> &[Event] {
        &self.images
    }

    /// `(event, image)` pairs in code order.
    pub fn pairs(&self) -> impl Iterator<Item = (Event, Event)> + '_ {
        self.images.iter().enumerate().map(|(c, i)| (self.algebra.decode(c as u64), *i))
    }

    /// Pointwise `self(E) ⊆ other(E)` on a shared domain.
    pub fn dominated_by(&self, other: &impl SetMap) -> Option<Event> {
        (0..self.algebra.event_count())
            .find(|&c| !self.images[c as usize].is_subset(&other.image_code(c)))
            .map(|c| self.algebra.decode(c))
    }
}

impl SetMap for DensityTable {
    fn measure(&self) -> &Measure {
        &self.measure
    }

    fn domain(&self) -> &SigmaAlgebra {
        &self.algebra
    }

    #[inline]
    fn image_code(&self, code: u64) -> Event {
        self.images[code as usize]
    }
}

fn sweep_laws<M: SetMap>(m: &M, suite: &str, lifting: bool) -> VerificationReport {
    let mut report = VerificationReport::new(suite);
    let dom = m.domain();
    let mu = m.measure();
    let support = mu.support();
    let k = dom.atom_count();
    let full_code = dom.event_count() - 1;
    let n = dom.len();
    let pos_mask: u64 =
        dom.atoms().iter().enumerate().filter(|(_, a)| !a.is_disjoint(&support)).fold(0, |acc, (i, _)| acc | 1 << i);

    let mut empty = Law::new("empty");
    let img0 = m.image_code(0);
    empty.check(img0.is_empty(), || json!({"image": ev_json(img0)}));
    let mut full = Law::new("full");
    let imgz = m.image_code(full_code);
    full.check(imgz.is_full(), || json!({"image": ev_json(imgz)}));

    let mut measurable = Law::new("measurable");
    let mut ae = Law::new("ae_equal");
    let mut invariance = Law::new("ae_invariance");
    let mut complement = Law::new("complement");
    for c in 0..=full_code {
        let e = dom.decode(c);
        let img = m.image_code(c);
        let meas = dom.is_measurable(img);
        measurable.check(meas, || json!({"event": ev_json(e), "image": ev_json(img)}));
        if meas {
            ae.check((img ^ e).is_disjoint(&support), || json!({"event": ev_json(e), "image": ev_json(img)}));
        }
        let rep = c & pos_mask;
        if rep != c {
            let rep_img = m.image_code(rep);
            invariance.check(rep_img == img, || json!({"event": ev_json(e), "equivalent": ev_json(dom.decode(rep))}));
        }
        if lifting {
            let cimg = m.image_code(c ^ full_code);
            complement.check(
                cimg == img.complement(),
                || json!({"event": ev_json(e), "image": ev_json(img), "complement_image": ev_json(cimg)}),
            );
        }
    }

    let mut inter = Law::new("intersection");
    for p in 0..n {
        // Fold the filter {E : p ∈ m(E)} down to its core.
        let mut core: Option<u64> = None;
        let mut broken = false;
        for c in 0..=full_code {
            if !m.image_code(c).contains(p) {
                continue;
            }
            core = Some(match core {
                None => c,
                Some(a) => {
                    let meet = a & c;
                    if !m.image_code(meet).contains(p) {
                        inter.fail(json!({
                            "point": p,
                            "e": ev_json(dom.decode(a)),
                            "f": ev_json(dom.decode(c)),
                        }));
                        broken = true;
                        break;
                    }
                    meet
                }
            });
        }
        if broken {
            continue;
        }
        let Some(core) = core else { continue };
        // Upward closure: every superset of the core must contain p.
        let free = full_code & !core;
        let mut sub = free;
        loop {
            let c = core | sub;
            let ok = m.image_code(c).contains(p);
            if !inter.check(ok, || json!({"point": p, "e": ev_json(dom.decode(core)), "f": ev_json(dom.decode(c))})) {
                break;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
    }

    report.push(empty);
    report.push(full);
    report.push(measurable);
    report.push(ae);
    report.push(invariance);
    report.push(inter);
    if lifting {
        report.push(complement);
    }
    report.count("events", 1u64 << k);
    report.count("points", n as u64);
    report
}

/// Lower-density laws: `∅ ↦ ∅`, `Z ↦ Z`, images measurable and a.e. equal
/// to their argument, a.e.-equal arguments share an image, and finite
/// intersections are preserved.
pub fn verify_density<M: SetMap>(m: &M) -> VerificationReport {
    sweep_laws(m, "density", false)
}

/// The density laws plus the complement law `m(E^c) = m(E)^c`.
pub fn verify_lifting<M: SetMap>(m: &M) -> VerificationReport {
    sweep_laws(m, "lifting", true)
}

/// Number of liftings of a completed measure: `positives ^ nulls`.
pub fn count_liftings(mu: &Measure) -> u128 {
    let pos = mu.positive_points().len() as u128;
    let nul = mu.null_points().len() as u32;
    pos.pow(nul)
}

/// All liftings of a completed measure, in odometer order over the null
/// points (the first is [`AnchorLifting::smallest`]).
pub fn enumerate_liftings(mu: &Measure) -> Result<LiftingIter> {
    if !mu.is_complete() {
        return Err(Error::InvalidLifting("enumeration needs a completed measure".into()));
    }
    let positives = mu.positive_points();
    if positives.is_empty() {
        return Err(Error::NoPositivePoint);
    }
    let nulls = mu.null_points();
    Ok(LiftingIter { measure: mu.clone(), digits: vec![0; nulls.len()], positives, nulls, done: false })
}

#[derive(Clone, Debug)]
pub struct LiftingIter {
    measure: Measure,
    positives: Vec<usize>,
    nulls: Vec<usize>,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for LiftingIter {
    type Item = AnchorLifting;

    fn next(&mut self) -> Option<AnchorLifting> {
        if self.done {
            return None;
        }
        let mut anchor: Vec<usize> = (0..self.measure.len()).collect();
        for (z, d) in self.nulls.iter().zip(&self.digits) {
            anchor[*z] = self.positives[*d];
        }
        // Advance the odometer; the last digit varies slowest.
        self.done = true;
        for d in self.digits.iter_mut() {
            *d += 1;
            if *d < self.positives.len() {
                self.done = false;
                break;
            }
            *d = 0;
        }
        Some(AnchorLifting { measure: self.measure.clone(), anchor })
    }
}

/// A lifting dominating a lower density on the power set. Each null point
/// `z` is anchored to the smallest positive point of the core of its filter
/// `{E : z ∈ delta(E)}`.
pub fn extend_density_to_lifting(delta: &DensityTable) -> Result<AnchorLifting> {
    if !delta.domain().is_power_set() || !delta.measure().is_complete() {
        return Err(Error::InvalidLifting("density extension needs a power-set domain".into()));
    }
    let report = verify_density(delta);
    if let Some(law) = report.failed_laws().first() {
        return Err(Error::NotADensity { law: law.to_string() });
    }
    let mu = delta.measure();
    let n = mu.len();
    let support = mu.support();
    let full = delta.domain().event_count() - 1;
    let mut anchor: Vec<usize> = (0..n).collect();
    for z in mu.null_points() {
        let mut core = full;
        for c in 0..=full {
            if delta.image_code(c).contains(z) {
                core &= c;
            }
        }
        let core = Event::from_bits_unchecked(n, core) & support;
        anchor[z] = core
            .lowest()
            .ok_or_else(|| Error::InternalInvariantBroken(format!("filter core of null point {z} is null")))?;
    }
    AnchorLifting::new(mu.clone(), anchor)
}

/// `x ↦ f(anchor(x))`.
pub fn lift_function(lift: &AnchorLifting, f: &SimpleFunction) -> SimpleFunction {
    SimpleFunction::new(lift.anchor().iter().map(|&a| f.at(a)).collect())
}

/// Membership in the lifting topology `{B : B ⊆ ρ(B)}`.
pub fn lifting_topology_member(rho: &AnchorLifting, b: Event) -> bool {
    b.is_subset(&rho.apply(b))
}
