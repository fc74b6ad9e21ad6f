//! Product spaces, joint measures, product regular conditional probabilities
//! and the conditions that relate them to a lifting of the second marginal.
//!
//! Product points are flattened x-major: `(x, y) ↦ x·|Y| + y`. With this
//! order the lexicographically smallest pair is also the smallest index.

use serde_json::json;

use crate::error::{Error, Result};
use crate::lifting::{ev_json, AnchorLifting, SetMap};
use crate::measure::{Measure, SimpleFunction};
use crate::rational::Rational;
use crate::report::{Law, VerificationReport};
use crate::space::{Event, FiniteSpace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductSpace {
    x: FiniteSpace,
    y: FiniteSpace,
    flat: FiniteSpace,
}

impl ProductSpace {
    pub fn new(x: FiniteSpace, y: FiniteSpace) -> Result<Self> {
        let n = x.len() * y.len();
        let flat = FiniteSpace::indexed(n)
            .map_err(|_| Error::InvalidSpace(format!("product has {n} points, more than supported")))?;
        Ok(ProductSpace { x, y, flat })
    }

    pub fn x(&self) -> &FiniteSpace {
        &self.x
    }

    pub fn y(&self) -> &FiniteSpace {
        &self.y
    }

    pub fn flat(&self) -> &FiniteSpace {
        &self.flat
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        x * self.ny() + y
    }

    #[inline]
    pub fn coords(&self, p: usize) -> (usize, usize) {
        (p / self.ny(), p % self.ny())
    }

    pub fn rectangle(&self, a: Event, b: Event) -> Event {
        let ny = self.ny();
        let mut bits = 0u64;
        for x in a.indices() {
            bits |= b.bits() << (x * ny);
        }
        Event::from_bits_unchecked(self.len(), bits)
    }

    /// `E^y = {x : (x,y) ∈ E}`.
    pub fn section_y(&self, e: Event, y: usize) -> Event {
        let ny = self.ny();
        let mut bits = 0u64;
        for x in 0..self.nx() {
            bits |= (e.bits() >> (x * ny + y) & 1) << x;
        }
        Event::from_bits_unchecked(self.nx(), bits)
    }

    /// `E_x = {y : (x,y) ∈ E}`.
    pub fn section_x(&self, e: Event, x: usize) -> Event {
        let ny = self.ny();
        let mask = if ny == 64 { u64::MAX } else { (1u64 << ny) - 1 };
        Event::from_bits_unchecked(ny, e.bits() >> (x * ny) & mask)
    }

    /// The event whose `y`-section is `sections[y]`.
    pub fn assemble(&self, sections: &[Event]) -> Event {
        debug_assert_eq!(sections.len(), self.ny());
        let ny = self.ny();
        let mut bits = 0u64;
        for (y, s) in sections.iter().enumerate() {
            for x in s.indices() {
                bits |= 1 << (x * ny + y);
            }
        }
        Event::from_bits_unchecked(self.len(), bits)
    }

    /// `A × {y}`.
    pub fn slice(&self, a: Event, y: usize) -> Event {
        self.rectangle(a, Event::singleton(self.ny(), y))
    }
}

/// A probability on the product power set together with its marginals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointMeasure {
    product: ProductSpace,
    r: Measure,
    p: Measure,
    q: Measure,
}

impl JointMeasure {
    /// `matrix[x][y] = R({(x,y)})`.
    pub fn from_matrix(x: FiniteSpace, y: FiniteSpace, matrix: &[Vec<Rational>]) -> Result<Self> {
        if matrix.len() != x.len() || matrix.iter().any(|row| row.len() != y.len()) {
            return Err(Error::InvalidMeasure(format!("joint matrix must be {}×{}", x.len(), y.len())));
        }
        let product = ProductSpace::new(x, y)?;
        let masses = matrix.iter().flatten().copied().collect();
        let r = Measure::on_power_set(product.flat().clone(), masses)?;
        Self::from_measure(product, r)
    }

    pub fn from_measure(product: ProductSpace, r: Measure) -> Result<Self> {
        if r.len() != product.len() || !r.is_complete() {
            return Err(Error::SpaceMismatch("joint measure must live on the product power set".into()));
        }
        let (nx, ny) = (product.nx(), product.ny());
        let mut px = vec![Rational::ZERO; nx];
        let mut qy = vec![Rational::ZERO; ny];
        for p in 0..product.len() {
            let (x, y) = product.coords(p);
            let m = r.point_mass(p);
            px[x] = px[x] + m;
            qy[y] = qy[y] + m;
        }
        let p = Measure::on_power_set(product.x().clone(), px)?;
        let q = Measure::on_power_set(product.y().clone(), qy)?;
        Ok(JointMeasure { product, r, p, q })
    }

    /// `P ⊗ Q` for power-set measures.
    pub fn product_measure(p: &Measure, q: &Measure) -> Result<Self> {
        if !p.is_complete() || !q.is_complete() {
            return Err(Error::InvalidMeasure("product of non-complete measures".into()));
        }
        let matrix: Vec<Vec<Rational>> =
            (0..p.len()).map(|x| (0..q.len()).map(|y| p.point_mass(x) * q.point_mass(y)).collect()).collect();
        Self::from_matrix(p.space().clone(), q.space().clone(), &matrix)
    }

    pub fn product(&self) -> &ProductSpace {
        &self.product
    }

    pub fn r(&self) -> &Measure {
        &self.r
    }

    pub fn p(&self) -> &Measure {
        &self.p
    }

    pub fn q(&self) -> &Measure {
        &self.q
    }

    pub fn marginals(&self) -> (&Measure, &Measure) {
        (&self.p, &self.q)
    }

    pub fn mass(&self, x: usize, y: usize) -> Rational {
        self.r.point_mass(self.product.index(x, y))
    }

    pub fn matrix(&self) -> Vec<Vec<Rational>> {
        (0..self.product.nx()).map(|x| (0..self.product.ny()).map(|y| self.mass(x, y)).collect()).collect()
    }

    /// `P ⊗ Q` of this measure's own marginals.
    pub fn marginal_product(&self) -> JointMeasure {
        Self::product_measure(&self.p, &self.q).expect("marginals are power-set probabilities")
    }

    /// `R(A × B)`.
    pub fn rect_measure(&self, a: Event, b: Event) -> Rational {
        self.r.measure_of(self.product.rectangle(a, b)).expect("power set")
    }
}

/// One probability `S_y` on the power set of X for every point y of Y.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rcp {
    x: FiniteSpace,
    family: Vec<Measure>,
}

impl Rcp {
    pub fn new(x: FiniteSpace, family: Vec<Measure>) -> Result<Self> {
        if family.is_empty() {
            return Err(Error::InvalidMeasure("an rcp needs at least one measure".into()));
        }
        for (y, s) in family.iter().enumerate() {
            if s.len() != x.len() || !s.is_complete() {
                return Err(Error::SpaceMismatch(format!("S_{y} is not a power-set measure on X")));
            }
        }
        Ok(Rcp { x, family })
    }

    pub fn from_rows(x: FiniteSpace, rows: &[Vec<Rational>]) -> Result<Self> {
        let family = rows.iter().map(|row| Measure::on_power_set(x.clone(), row.clone())).collect::<Result<_>>()?;
        Rcp::new(x, family)
    }

    pub fn x(&self) -> &FiniteSpace {
        &self.x
    }

    pub fn s(&self, y: usize) -> &Measure {
        &self.family[y]
    }

    pub fn family(&self) -> &[Measure] {
        &self.family
    }

    pub fn len(&self) -> usize {
        self.family.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rows(&self) -> Vec<Vec<Rational>> {
        self.family.iter().map(|s| s.weights().to_vec()).collect()
    }

    /// A copy with `S_y` replaced.
    pub fn with(&self, y: usize, s: Measure) -> Rcp {
        let mut family = self.family.clone();
        family[y] = s;
        Rcp { x: self.x.clone(), family }
    }

    /// `S_y(A)`.
    pub fn prob(&self, y: usize, a: Event) -> Rational {
        self.family[y].measure_of(a).expect("power set")
    }
}

/// How `rcp_from_joint` fills in `S_y` at `Q`-null points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NullYPolicy {
    /// Copy `S_{y*}` for the smallest `Q`-positive `y*`.
    CopyLowest,
    /// User-supplied `S_y` for each null y, indexed by y. Entries at positive
    /// y are ignored.
    Explicit(Vec<Option<Measure>>),
}

pub fn rcp_from_joint(r: &JointMeasure, policy: &NullYPolicy) -> Result<Rcp> {
    let prod = r.product();
    let q = r.q();
    let mut family: Vec<Option<Measure>> = vec![None; prod.ny()];
    for y in q.positive_points() {
        let qy = q.point_mass(y);
        let row = (0..prod.nx()).map(|x| r.mass(x, y) / qy).collect();
        family[y] = Some(Measure::on_power_set(prod.x().clone(), row)?);
    }
    let lowest = q.support().lowest().ok_or(Error::NoPositivePoint)?;
    for y in q.null_points() {
        family[y] = Some(match policy {
            NullYPolicy::CopyLowest => family[lowest].clone().unwrap(),
            NullYPolicy::Explicit(map) => map.get(y).cloned().flatten().ok_or_else(|| Error::Validation {
                module: "product".into(),
                detail: format!("no explicit measure for Q-null point {y}"),
            })?,
        });
    }
    Rcp::new(prod.x().clone(), family.into_iter().map(Option::unwrap).collect())
}

/// Checks `R(A×B) = Σ_{y∈B} S_y(A)·Q({y})` on every rectangle.
pub fn validate_rcp(rcp: &Rcp, r: &JointMeasure) -> VerificationReport {
    let mut report = VerificationReport::new("rcp");
    let prod = r.product();
    let mut shape = Law::new("shape");
    let ok = rcp.len() == prod.ny() && rcp.x().len() == prod.nx();
    shape.check(ok, || json!({"rcp_len": rcp.len(), "ny": prod.ny()}));
    report.push(shape);
    if !ok {
        return report;
    }
    let q = r.q();
    let mut d2 = Law::new("D2");
    for a in Event::all(prod.nx()) {
        let col: Vec<Rational> = (0..prod.ny()).map(|y| rcp.prob(y, a) * q.point_mass(y)).collect();
        for b in Event::all(prod.ny()) {
            let lhs = r.rect_measure(a, b);
            let rhs: Rational = b.indices().map(|y| col[y]).sum();
            d2.check(
                lhs == rhs,
                || json!({"a": ev_json(a), "b": ev_json(b), "lhs": lhs.to_string(), "rhs": rhs.to_string()}),
            );
        }
    }
    report.push(d2);
    report
}

/// `Σ_y Q({y}) Σ_x S_y({x}) f(x,y)`.
pub fn disintegrate_integral(f: &SimpleFunction, rcp: &Rcp, q: &Measure) -> Rational {
    let ny = q.len();
    let mut total = Rational::ZERO;
    for y in 0..ny {
        let qy = q.point_mass(y);
        if qy.is_zero() {
            continue;
        }
        let s = rcp.s(y);
        let inner: Rational = (0..s.len()).map(|x| s.point_mass(x) * f.at(x * ny + y)).sum();
        total = total + qy * inner;
    }
    total
}

/// Density of `numer` with respect to `base`, both on the product power set:
/// `numer({p})/base({p})` on base-positive points and 0 elsewhere.
pub fn radon_nikodym(prod: &ProductSpace, numer: &Measure, base: &Measure) -> Result<SimpleFunction> {
    if numer.len() != prod.len() || base.len() != prod.len() {
        return Err(Error::SpaceMismatch("measures do not live on the product".into()));
    }
    let mut values = Vec::with_capacity(prod.len());
    for p in 0..prod.len() {
        let (n, b) = (numer.point_mass(p), base.point_mass(p));
        if b.is_zero() {
            if n.is_positive() {
                let (x, y) = prod.coords(p);
                return Err(Error::NotAbsolutelyContinuous { x, y });
            }
            values.push(Rational::ZERO);
        } else {
            values.push(n / b);
        }
    }
    Ok(SimpleFunction::new(values))
}

/// `E_R = φ({f > 0})`.
pub fn support_event(f: &SimpleFunction, phi: &impl SetMap) -> Event {
    let lvl = f.level_set_gt(Rational::ZERO);
    phi.image(lvl).expect("densities for the support live on the power set")
}

/// `B_A = {y : S_y(A) > 0}`.
pub fn positive_section_set(rcp: &Rcp, a: Event) -> Event {
    let bits = (0..rcp.len()).filter(|&y| !a.is_disjoint(&rcp.s(y).support())).fold(0u64, |b, y| b | 1 << y);
    Event::from_bits_unchecked(rcp.len(), bits)
}

/// First `A` (ascending code) with `B_A ⊄ ρ(B_A)`.
pub fn strong_witness(rcp: &Rcp, rho: &AnchorLifting) -> Option<Event> {
    Event::all(rcp.x().len()).find(|&a| {
        let b = positive_section_set(rcp, a);
        !b.is_subset(&rho.apply(b))
    })
}

/// `B_A ⊆ ρ(B_A)` for every event `A` of X.
pub fn check_strong(rcp: &Rcp, rho: &AnchorLifting) -> bool {
    strong_witness(rcp, rho).is_none()
}

/// The topology on Y generated by the sets `B_A`, as a sorted list of its
/// open sets.
pub fn section_topology(rcp: &Rcp) -> Vec<Event> {
    let ny = rcp.len();
    let mut subbase: Vec<Event> = Event::all(rcp.x().len()).map(|a| positive_section_set(rcp, a)).collect();
    subbase.push(Event::full(ny));
    subbase.sort();
    subbase.dedup();
    // Close under finite intersections, then under unions.
    let mut base = subbase.clone();
    loop {
        let mut next = base.clone();
        for i in 0..base.len() {
            for j in i + 1..base.len() {
                next.push(base[i] & base[j]);
            }
        }
        next.sort();
        next.dedup();
        if next.len() == base.len() {
            break;
        }
        base = next;
    }
    let mut opens = vec![Event::empty(ny)];
    for b in &base {
        let extra: Vec<Event> = opens.iter().map(|u| *u | *b).collect();
        opens.extend(extra);
        opens.sort();
        opens.dedup();
    }
    opens
}

/// First open set `U` of the generated topology with `U ⊄ ρ(U)`.
pub fn topology_strong_witness(rcp: &Rcp, rho: &AnchorLifting) -> Option<Event> {
    section_topology(rcp).into_iter().find(|u| !u.is_subset(&rho.apply(*u)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItOutcome {
    Ok,
    Counterexample { a: Event, b: Event, y: usize },
}

impl ItOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, ItOutcome::Ok)
    }

    pub fn into_result(self) -> Result<()> {
        match self {
            ItOutcome::Ok => Ok(()),
            ItOutcome::Counterexample { a, b, y } => Err(Error::ItViolated { a, b, y }),
        }
    }
}

/// Sweeps every rectangle with `R(A×B) = 0` and `Q(B) > 0` for a point
/// `y ∈ ρ(B)` with `S_y(A) > 0`. `A` runs in ascending code order, `B` in
/// descending order, `y` ascending.
#[allow(non_snake_case)]
pub fn check_IT(rcp: &Rcp, rho: &AnchorLifting, r: &JointMeasure) -> ItOutcome {
    let prod = r.product();
    let q = r.q();
    let ny = prod.ny();
    let bs: Vec<Event> = Event::all(ny).collect();
    for a in Event::all(prod.nx()) {
        let ba = positive_section_set(rcp, a);
        if ba.is_empty() {
            continue;
        }
        for b in bs.iter().rev() {
            if !b.intersection(&q.support()).is_empty() && r.rect_measure(a, *b).is_zero() {
                if let Some(y) = (rho.apply(*b) & ba).lowest() {
                    return ItOutcome::Counterexample { a, b: *b, y };
                }
            }
        }
    }
    ItOutcome::Ok
}

/// First `(y, x)` with `P({x}) = 0 < S_y({x})`.
pub fn uniform_ac_witness(rcp: &Rcp, p: &Measure) -> Option<(usize, usize)> {
    (0..rcp.len()).find_map(|y| (rcp.s(y).support() - p.support()).lowest().map(|x| (y, x)))
}

/// On a finite space uniform absolute continuity reduces to `S_y ≪ P` for
/// every y.
pub fn check_uniform_ac(rcp: &Rcp, p: &Measure) -> bool {
    uniform_ac_witness(rcp, p).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::enumerate_liftings;

    fn q(a: i128, b: i128) -> Rational {
        Rational::new(a, b)
    }

    fn ev(n: usize, idx: &[usize]) -> Event {
        Event::from_indices(n, idx.iter().copied()).unwrap()
    }

    fn sp(n: usize) -> FiniteSpace {
        FiniteSpace::indexed(n).unwrap()
    }

    fn space_a() -> (JointMeasure, Rcp) {
        let z = q(0, 1);
        let h = q(1, 2);
        let r = JointMeasure::from_matrix(sp(3), sp(2), &[vec![h, z], vec![z, h], vec![z, z]]).unwrap();
        let rcp = rcp_from_joint(&r, &NullYPolicy::CopyLowest).unwrap();
        (r, rcp)
    }

    fn space_b() -> (JointMeasure, Rcp) {
        let (o, z) = (q(1, 1), q(0, 1));
        let r = JointMeasure::from_matrix(sp(2), sp(2), &[vec![o, z], vec![z, z]]).unwrap();
        let s1 = Measure::dirac(sp(2), 1).unwrap();
        let rcp = rcp_from_joint(&r, &NullYPolicy::Explicit(vec![None, Some(s1)])).unwrap();
        (r, rcp)
    }

    fn diag(n: usize) -> (JointMeasure, Rcp) {
        let m: Vec<Vec<Rational>> =
            (0..n).map(|x| (0..n).map(|y| if x == y { q(1, n as i128) } else { q(0, 1) }).collect()).collect();
        let r = JointMeasure::from_matrix(sp(n), sp(n), &m).unwrap();
        let rcp = rcp_from_joint(&r, &NullYPolicy::CopyLowest).unwrap();
        (r, rcp)
    }

    #[test]
    fn sections() {
        let ps = ProductSpace::new(sp(3), sp(2)).unwrap();
        let (a, b) = (ev(3, &[0, 2]), ev(2, &[1]));
        let rect = ps.rectangle(a, b);
        assert_eq!(ps.section_y(rect, 1), a);
        assert_eq!(ps.section_y(rect, 0), ev(3, &[]));
        assert_eq!(ps.section_x(rect, 2), b);
        let d = ev(6, &[ps.index(0, 0), ps.index(1, 1)]);
        assert_eq!(ps.section_y(d, 1), ev(3, &[1]));
        assert_eq!(ps.assemble(&[ps.section_y(d, 0), ps.section_y(d, 1)]), d);
    }

    #[test]
    fn marginals_examples() {
        let (r, _) = space_a();
        assert_eq!(r.p().weights(), &[q(1, 2), q(1, 2), q(0, 1)]);
        assert_eq!(r.q().weights(), &[q(1, 2), q(1, 2)]);
        let pq = r.marginal_product();
        assert_eq!(pq.p(), r.p());
        assert_eq!(pq.q(), r.q());
        let (d, _) = diag(2);
        assert_eq!(d.p().weights(), &[q(1, 2), q(1, 2)]);
    }

    #[test]
    fn rcp_examples() {
        let (r, rcp) = space_a();
        assert_eq!(rcp.rows(), vec![vec![q(1, 1), q(0, 1), q(0, 1)], vec![q(0, 1), q(1, 1), q(0, 1)]]);
        assert!(validate_rcp(&rcp, &r).pass);
        let (d, drcp) = diag(3);
        for y in 0..3 {
            assert_eq!(drcp.s(y), &Measure::dirac(sp(3), y).unwrap());
        }
        assert!(validate_rcp(&drcp, &d).pass);
        let (b, brcp) = space_b();
        assert_eq!(brcp.s(1), &Measure::dirac(sp(2), 1).unwrap());
        assert!(validate_rcp(&brcp, &b).pass);
    }

    #[test]
    fn validate_rcp_witness() {
        let (r, rcp) = space_a();
        let bad = rcp.with(1, Measure::dirac(sp(3), 0).unwrap());
        let rep = validate_rcp(&bad, &r);
        let w = rep.law("D2").unwrap().witness.clone().unwrap();
        assert_eq!(w["a"], json!([0]));
        assert_eq!(w["b"], json!([1]));
    }

    #[test]
    fn disintegration_examples() {
        let (r, rcp) = space_a();
        let ps = r.product();
        assert_eq!(disintegrate_integral(&SimpleFunction::constant(6, Rational::ONE), &rcp, r.q()), Rational::ONE);
        let f = SimpleFunction::indicator(ev(6, &[ps.index(0, 0)]));
        assert_eq!(disintegrate_integral(&f, &rcp, r.q()), q(1, 2));
        let (d, drcp) = diag(2);
        let off = SimpleFunction::indicator(ev(4, &[1, 2]));
        assert_eq!(disintegrate_integral(&off, &drcp, d.q()), Rational::ZERO);
    }

    #[test]
    fn radon_nikodym_examples() {
        let (r, _) = space_a();
        let pq = r.marginal_product();
        let f = radon_nikodym(r.product(), r.r(), pq.r()).unwrap();
        let ps = r.product();
        for p in 0..6 {
            let (x, y) = ps.coords(p);
            let want = if x == y && x < 2 { q(2, 1) } else { q(0, 1) };
            assert_eq!(f.at(p), want);
        }
        let one = radon_nikodym(ps, r.r(), r.r()).unwrap();
        assert!(r.r().support().indices().all(|p| one.at(p) == Rational::ONE));
        let (d, _) = diag(2);
        let err = radon_nikodym(d.product(), d.marginal_product().r(), d.r()).unwrap_err();
        assert_eq!(err, Error::NotAbsolutelyContinuous { x: 0, y: 1 });
    }

    #[test]
    fn positive_sections_and_strongness() {
        let (_, drcp) = diag(3);
        assert_eq!(positive_section_set(&drcp, ev(3, &[])), ev(3, &[]));
        assert_eq!(positive_section_set(&drcp, ev(3, &[1])), ev(3, &[1]));
        let (b, brcp) = space_b();
        assert_eq!(positive_section_set(&brcp, ev(2, &[1])), ev(2, &[1]));
        let rho = AnchorLifting::smallest(b.q()).unwrap();
        assert!(!check_strong(&brcp, &rho));
        assert_eq!(strong_witness(&brcp, &rho), Some(ev(2, &[1])));
        let (d, _) = diag(3);
        assert!(check_strong(&drcp, &AnchorLifting::smallest(d.q()).unwrap()));
    }

    #[test]
    fn it_examples() {
        let (r, rcp) = space_a();
        let rho = AnchorLifting::smallest(r.q()).unwrap();
        assert_eq!(check_IT(&rcp, &rho, &r), ItOutcome::Ok);
        let (b, brcp) = space_b();
        let rho = AnchorLifting::smallest(b.q()).unwrap();
        assert_eq!(check_IT(&brcp, &rho, &b), ItOutcome::Counterexample { a: ev(2, &[1]), b: ev(2, &[0, 1]), y: 1 });
    }

    #[test]
    fn uniform_ac_examples() {
        let (r, rcp) = space_a();
        assert!(check_uniform_ac(&rcp, r.p()));
        let (b, brcp) = space_b();
        assert!(!check_uniform_ac(&brcp, b.p()));
        assert_eq!(uniform_ac_witness(&brcp, b.p()), Some((1, 1)));
        let all_p = Rcp::new(sp(3), vec![r.p().clone(); 2]).unwrap();
        assert!(check_uniform_ac(&all_p, r.p()));
    }

    #[test]
    fn topology_contains_generators() {
        let (_, drcp) = diag(3);
        let top = section_topology(&drcp);
        assert_eq!(top.len(), 8);
        let (b, brcp) = space_b();
        for rho in enumerate_liftings(b.q()).unwrap() {
            assert_eq!(topology_strong_witness(&brcp, &rho), Some(ev(2, &[1])));
        }
    }
}
