//! Re-derivation of the claimed laws from raw masses and images, sharing no
//! code with the constructions or the main verifiers.
//!
//! A map `m` on the subsets of an `n`-point space is a lifting of a measure
//! with support `S` exactly when there is a map `a` into `S`, fixing `S`
//! pointwise, with `m(E) = {p : a(p) ∈ E}` for every `E`. The oracle reads
//! `a(p)` off the images of singletons and compares every image.

use serde_json::json;

use crate::harness::scenario::Scenario;
use crate::process::Process;
use crate::product::{JointMeasure, Rcp};
use crate::rational::Rational;
use crate::report::{Law, VerificationReport};
use crate::split_ac::SplitLiftings;

fn bits(e: u64) -> Vec<usize> {
    (0..64).filter(|i| e >> i & 1 == 1).collect()
}

fn support_of(masses: &[Rational]) -> u64 {
    masses.iter().enumerate().filter(|(_, m)| m.is_positive()).fold(0, |s, (i, _)| s | 1 << i)
}

/// Checks `m` against the anchor characterization. `m` receives and returns
/// point bitmasks on `n` points.
pub fn oracle_lifting(law: &mut Law, n: usize, support: u64, m: impl Fn(u64) -> u64) {
    let mut anchor = vec![usize::MAX; n];
    for p in 0..n {
        let owners: Vec<usize> = (0..n).filter(|&q| support >> q & 1 == 1 && m(1 << q) >> p & 1 == 1).collect();
        if owners.len() != 1 {
            law.fail(json!({"point": p, "owners": owners}));
            return;
        }
        anchor[p] = owners[0];
        if support >> p & 1 == 1 && anchor[p] != p {
            law.fail(json!({"point": p, "anchor": anchor[p]}));
            return;
        }
    }
    for e in 0..(1u64 << n) {
        let want = (0..n).filter(|&p| e >> anchor[p] & 1 == 1).fold(0u64, |s, p| s | 1 << p);
        let got = m(e);
        if !law.check(got == want, || json!({"event": bits(e), "image": bits(got), "expected": bits(want)})) {
            return;
        }
    }
}

fn anchor_image(anchor: &[usize], e: u64) -> u64 {
    anchor.iter().enumerate().filter(|(_, &a)| e >> a & 1 == 1).fold(0, |s, (p, _)| s | 1 << p)
}

fn section(e: u64, nx: usize, ny: usize, y: usize) -> u64 {
    (0..nx).filter(|&x| e >> (x * ny + y) & 1 == 1).fold(0, |s, x| s | 1 << x)
}

/// Liftings of the right measures, the section property for every event
/// and y and, when asked, the rectangle formula on every rectangle.
pub fn oracle_split(sl: &SplitLiftings, rcp: &Rcp, r: &JointMeasure, rf: bool) -> VerificationReport {
    let prod = &sl.product;
    let (nx, ny) = (prod.nx(), prod.ny());
    let n = nx * ny;
    let mut rep = VerificationReport::new("oracle-split");
    let matrix = r.matrix();
    let flat: Vec<Rational> = matrix.iter().flatten().copied().collect();
    let q: Vec<Rational> = (0..ny).map(|y| (0..nx).map(|x| matrix[x][y]).sum()).collect();

    let pi = sl.pi.anchor();
    let mut law = Law::new("pi_lifting");
    oracle_lifting(&mut law, n, support_of(&flat), |e| anchor_image(pi, e));
    rep.push(law);
    let mut law = Law::new("rho_lifting");
    oracle_lifting(&mut law, ny, support_of(&q), |e| anchor_image(sl.rho.anchor(), e));
    rep.push(law);
    let mut law = Law::new("sigma_liftings");
    for y in 0..ny {
        let s: Vec<Rational> = (0..nx).map(|x| rcp.prob(y, crate::space::Event::singleton(nx, x))).collect();
        oracle_lifting(&mut law, nx, support_of(&s), |e| anchor_image(sl.sigma_y[y].anchor(), e));
    }
    rep.push(law);

    let mut sp = Law::new("SP");
    for e in 0..(1u64 << n) {
        let img = anchor_image(pi, e);
        for y in 0..ny {
            let s = section(img, nx, ny, y);
            sp.check(anchor_image(sl.sigma_y[y].anchor(), s) == s, || json!({"event": bits(e), "y": y}));
        }
    }
    rep.push(sp);
    if rf {
        let mut law = Law::new("RF");
        for a in 0..(1u64 << nx) {
            for b in 0..(1u64 << ny) {
                let rect =
                    (0..n).filter(|&p| a >> (p / ny) & 1 == 1 && b >> (p % ny) & 1 == 1).fold(0u64, |s, p| s | 1 << p);
                let rb = anchor_image(sl.rho.anchor(), b);
                let mut want = 0u64;
                for y in (0..ny).filter(|&y| rb >> y & 1 == 1) {
                    let sa = anchor_image(sl.sigma_y[y].anchor(), a);
                    for x in (0..nx).filter(|&x| sa >> x & 1 == 1) {
                        want |= 1 << (x * ny + y);
                    }
                }
                law.check(anchor_image(pi, rect) == want, || json!({"a": bits(a), "b": bits(b)}));
            }
        }
        rep.push(law);
    }
    rep
}

/// `R({(x,y)}) = S_y({x})·Q({y})` at every point.
pub fn oracle_rcp(rcp: &Rcp, r: &JointMeasure) -> bool {
    let matrix = r.matrix();
    let (nx, ny) = (matrix.len(), matrix[0].len());
    (0..ny).all(|y| {
        let qy: Rational = (0..nx).map(|x| matrix[x][y]).sum();
        (0..nx).all(|x| matrix[x][y] == rcp.prob(y, crate::space::Event::singleton(nx, x)) * qy)
    })
}

/// The intersection condition by its definition: `R(A×B) = 0` forces
/// `Q(B) = 0` or `S_y(A) = 0` for every `y ∈ ρ(B)`.
pub fn oracle_it(rcp: &Rcp, rho: &[usize], r: &JointMeasure) -> bool {
    let matrix = r.matrix();
    let (nx, ny) = (matrix.len(), matrix[0].len());
    let s = |y: usize, a: u64| -> Rational {
        (0..nx).filter(|x| a >> x & 1 == 1).map(|x| rcp.prob(y, crate::space::Event::singleton(nx, x))).sum()
    };
    for a in 0..(1u64 << nx) {
        for b in 0..(1u64 << ny) {
            let mut rab = Rational::ZERO;
            let mut qb = Rational::ZERO;
            for y in (0..ny).filter(|y| b >> y & 1 == 1) {
                for x in 0..nx {
                    qb = qb + matrix[x][y];
                    if a >> x & 1 == 1 {
                        rab = rab + matrix[x][y];
                    }
                }
            }
            if !rab.is_zero() || qb.is_zero() {
                continue;
            }
            let rb = anchor_image(rho, b);
            if (0..ny).any(|y| rb >> y & 1 == 1 && !s(y, a).is_zero()) {
                return false;
            }
        }
    }
    true
}

/// `ζ_y = ξ_y` at every `S_y`-positive point and `ζ_y` fixed by `σ_y`.
pub fn oracle_modification(xi: &Process, zeta: &Process, sl: &SplitLiftings, rcp: &Rcp) -> VerificationReport {
    let mut rep = VerificationReport::new("oracle-modification");
    let nx = xi.nx();
    let mut ae = Law::new("ae_equal");
    let mut fixed = Law::new("sigma_fixed");
    for y in 0..xi.ny() {
        for x in 0..nx {
            if rcp.prob(y, crate::space::Event::singleton(nx, x)).is_positive() {
                ae.check(xi.at(y, x) == zeta.at(y, x), || json!({"y": y, "x": x}));
            }
            let a = sl.sigma_y[y].anchor()[x];
            fixed.check(zeta.at(y, a) == zeta.at(y, x), || json!({"y": y, "x": x}));
        }
    }
    rep.push(ae);
    rep.push(fixed);
    rep
}

/// The scenario's measures re-derived: the rcp disintegrates R pointwise.
pub fn oracle_scenario(s: &Scenario, rcp: &Rcp) -> VerificationReport {
    let mut rep = VerificationReport::new("oracle-scenario");
    rep.push_result("rcp_pointwise", oracle_rcp(rcp, &s.r), None);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::AnchorLifting;

    #[test]
    fn oracle_accepts_anchor_maps_and_rejects_others() {
        let supp = 0b011;
        let mut law = Law::new("l");
        oracle_lifting(&mut law, 3, supp, |e| anchor_image(&[0, 1, 0], e));
        assert!(!law.failed());
        let mut law = Law::new("l");
        oracle_lifting(&mut law, 3, supp, |e| e);
        assert!(law.failed());
        let mut law = Law::new("l");
        oracle_lifting(&mut law, 3, supp, |e| if e == 0b111 { e } else { e & supp });
        assert!(law.failed());
    }

    #[test]
    fn oracle_it_matches_fixtures() {
        let b = crate::harness::gen::gen_no_rf();
        let rcp = b.rcp.clone().unwrap();
        let rho = AnchorLifting::smallest(b.r.q()).unwrap();
        assert!(!oracle_it(&rcp, rho.anchor(), &b.r));
        assert!(oracle_rcp(&rcp, &b.r));
        let d = crate::harness::gen::gen_diag(3).unwrap();
        let rho = AnchorLifting::smallest(d.r.q()).unwrap();
        assert!(oracle_it(d.rcp.as_ref().unwrap(), rho.anchor(), &d.r));
    }
}
