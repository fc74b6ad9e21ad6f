//! Fixture and counterexample generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::lifting::AnchorLifting;
use crate::measure::Measure;
use crate::process::Process;
use crate::product::{radon_nikodym, rcp_from_joint, JointMeasure, NullYPolicy, Rcp};
use crate::rational::Rational;
use crate::space::FiniteSpace;
use crate::split_chain::AlgebraChain;

/// Default cap on `|X×Y|` for generated scenarios.
pub const MAX_POINTS: usize = 16;

fn space(prefix: &str, n: usize) -> FiniteSpace {
    FiniteSpace::new((0..n).map(|i| format!("{prefix}{i}")).collect()).expect("distinct labels")
}

/// The uniform measure on the diagonal of an `n×n` product.
pub fn gen_diag(n: usize) -> Result<Scenario> {
    if n < 2 {
        return Err(Error::Validation { module: "gen".into(), detail: "diag needs n ≥ 2".into() });
    }
    let m: Vec<Vec<Rational>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Rational::new(1, n as i128) } else { Rational::ZERO }).collect())
        .collect();
    let r = JointMeasure::from_matrix(space("x", n), space("y", n), &m)?;
    let rcp = rcp_from_joint(&r, &NullYPolicy::CopyLowest)?;
    for y in 0..n {
        if rcp.s(y) != &Measure::dirac(space("x", n), y)? {
            return Err(Error::InternalInvariantBroken(format!("S_{y} is not a point mass at {y}")));
        }
    }
    let mut s = Scenario::new(r);
    s.rcp = Some(rcp);
    Ok(s)
}

/// The off-diagonal point witnessing that `P⊗Q` charges an R-null point.
pub fn diag_certificate(s: &Scenario) -> Option<(usize, usize)> {
    let pq = s.r.marginal_product();
    match radon_nikodym(s.product(), pq.r(), s.r.r()) {
        Err(Error::NotAbsolutelyContinuous { x, y }) => Some((x, y)),
        _ => None,
    }
}

/// `R = δ_{(0,0)}` on `2×2`, with `S_1 = δ_1` at the Q-null point 1. The
/// conditional measure at the null point lives on a P-null point, so no
/// lifting family satisfies the rectangle formula.
pub fn gen_no_rf() -> Scenario {
    let (o, z) = (Rational::ONE, Rational::ZERO);
    let r = JointMeasure::from_matrix(space("x", 2), space("y", 2), &[vec![o, z], vec![z, z]]).expect("valid");
    let s1 = Measure::dirac(space("x", 2), 1).expect("valid");
    let rcp = rcp_from_joint(&r, &NullYPolicy::Explicit(vec![None, Some(s1)])).expect("valid");
    let mut s = Scenario::new(r);
    s.rcp = Some(rcp);
    s
}

/// Parameters of the random generator. `nx`, `ny` count all points, of
/// which `null_x`, `null_y` are null for the marginals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomSpec {
    pub nx: usize,
    pub ny: usize,
    pub null_x: usize,
    pub null_y: usize,
    pub seed: u64,
    /// Draw every `S_y` at null y freely on X instead of copying the lowest
    /// positive y. Such `S_y` may charge P-null points.
    pub free_null_rcp: bool,
    /// Also draw a process.
    pub process: bool,
}

impl RandomSpec {
    pub fn new(nx: usize, ny: usize, null_x: usize, null_y: usize, seed: u64) -> Self {
        RandomSpec { nx, ny, null_x, null_y, seed, free_null_rcp: false, process: false }
    }
}

pub fn gen_random(nx: usize, ny: usize, null_x: usize, null_y: usize, seed: u64) -> Result<Scenario> {
    gen_random_with(&RandomSpec::new(nx, ny, null_x, null_y, seed), MAX_POINTS)
}

fn positions(rng: &mut ChaCha8Rng, n: usize, nulls: usize) -> Vec<bool> {
    let mut null = vec![false; n];
    for v in null.iter_mut().take(nulls) {
        *v = true;
    }
    null.shuffle(rng);
    null
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize, allowed: &[bool]) -> Vec<Rational> {
    let mut w: Vec<i128> = (0..n).map(|i| if allowed[i] { rng.random_range(0..4) } else { 0 }).collect();
    if w.iter().all(|&v| v == 0) {
        let first = allowed.iter().position(|&a| a).expect("some point allowed");
        w[first] = 1;
    }
    let total: i128 = w.iter().sum();
    w.into_iter().map(|v| Rational::new(v, total)).collect()
}

/// Seeded rational weights: integer cell weights in `0..4` on the block of
/// positive points, each positive row and column forced nonzero, then
/// normalized. Null points sit at shuffled positions. The lifting of Q
/// anchors each null y to a random positive y; the chain splits off
/// singletons.
pub fn gen_random_with(spec: &RandomSpec, max_points: usize) -> Result<Scenario> {
    let RandomSpec { nx, ny, null_x, null_y, seed, .. } = *spec;
    if nx * ny > max_points {
        return Err(Error::BudgetExceeded { needed: (nx * ny) as u128, budget: max_points as u128 });
    }
    if null_x >= nx || null_y >= ny {
        return Err(Error::Validation { module: "gen".into(), detail: "each side needs a positive point".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xnull = positions(&mut rng, nx, null_x);
    let ynull = positions(&mut rng, ny, null_y);
    let px: Vec<usize> = (0..nx).filter(|&x| !xnull[x]).collect();
    let py: Vec<usize> = (0..ny).filter(|&y| !ynull[y]).collect();
    let mut w = vec![vec![0i128; ny]; nx];
    for &x in &px {
        for &y in &py {
            w[x][y] = rng.random_range(0..4);
        }
    }
    for (i, &x) in px.iter().enumerate() {
        if w[x].iter().all(|&v| v == 0) {
            w[x][py[i % py.len()]] = 1;
        }
    }
    for (j, &y) in py.iter().enumerate() {
        if (0..nx).all(|x| w[x][y] == 0) {
            w[px[j % px.len()]][y] = 1;
        }
    }
    let total: i128 = w.iter().flatten().sum();
    let m: Vec<Vec<Rational>> = w.iter().map(|row| row.iter().map(|&v| Rational::new(v, total)).collect()).collect();
    let xs = space("x", nx);
    let r = JointMeasure::from_matrix(xs.clone(), space("y", ny), &m)?;
    let mut rcp = rcp_from_joint(&r, &NullYPolicy::CopyLowest)?;
    if spec.free_null_rcp {
        let all = vec![true; nx];
        for y in (0..ny).filter(|&y| ynull[y]) {
            rcp = rcp.with(y, Measure::on_power_set(xs.clone(), random_weights(&mut rng, nx, &all))?);
        }
    }
    let anchor: Vec<usize> = (0..ny).map(|y| if ynull[y] { py[rng.random_range(0..py.len())] } else { y }).collect();
    let rho = AnchorLifting::new(r.q().clone(), anchor)?;
    let process = spec.process.then(|| random_process(&mut rng, nx, ny));
    let mut s = Scenario::new(r);
    s.rcp = Some(rcp);
    s.rho = Some(rho);
    s.chain = Some(AlgebraChain::standard(nx));
    s.process = process;
    s.seed = Some(seed);
    Ok(s)
}

fn random_process(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> Process {
    let rows = (0..ny).map(|_| (0..nx).map(|_| Rational::from_int(rng.random_range(-5..=5))).collect()).collect();
    Process::new(rows).expect("nonempty")
}

/// A seeded `|Y|×|X|` process with integer values in `-5..=5`.
pub fn gen_process(nx: usize, ny: usize, seed: u64) -> Process {
    random_process(&mut ChaCha8Rng::seed_from_u64(seed), nx, ny)
}

/// Every `S_y` of `rcp` charging only P-positive points.
pub fn rcp_is_abs_continuous(rcp: &Rcp, p: &Measure) -> bool {
    rcp.family().iter().all(|s| s.support().is_subset(&p.support()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::product::validate_rcp;

    #[test]
    fn diag_examples() {
        let d2 = gen_diag(2).unwrap();
        assert_eq!(d2.r.mass(0, 0), Rational::new(1, 2));
        assert_eq!(d2.r.mass(0, 1), Rational::ZERO);
        assert_eq!(diag_certificate(&gen_diag(3).unwrap()), Some((0, 1)));
        for n in 2..5 {
            let d = gen_diag(n).unwrap();
            assert_eq!(d.r.p(), &Measure::uniform(space("x", n)));
        }
        assert!(gen_diag(1).is_err());
    }

    #[test]
    fn random_contract() {
        let s = gen_random(3, 2, 1, 1, 7).unwrap();
        let back = Scenario::parse(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert!(validate_rcp(s.rcp.as_ref().unwrap(), &s.r).pass);
        assert_eq!(s.r.p().null_points().len(), 1);
        assert_eq!(s.r.q().null_points().len(), 1);
        assert_eq!(gen_random(3, 2, 1, 1, 7).unwrap(), s);
        let err = gen_random(5, 4, 1, 1, 0).unwrap_err();
        assert_eq!(err, Error::BudgetExceeded { needed: 20, budget: 16 });
    }

    #[test]
    fn no_nulls_means_unique_liftings() {
        let s = gen_random(3, 3, 0, 0, 11).unwrap();
        assert_eq!(crate::lifting::count_liftings(s.r.q()), 1);
        assert_eq!(crate::lifting::count_liftings(s.r.p()), 1);
    }

    #[test]
    fn free_null_rcp_stays_valid() {
        for seed in 0..20 {
            let spec = RandomSpec { free_null_rcp: true, process: true, ..RandomSpec::new(4, 4, 1, 1, seed) };
            let s = gen_random_with(&spec, MAX_POINTS).unwrap();
            assert!(validate_rcp(s.rcp.as_ref().unwrap(), &s.r).pass);
            assert_eq!(Scenario::parse(&s.to_json()).unwrap(), s);
        }
    }
}
