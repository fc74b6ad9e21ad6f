//! The general pipeline, with no absolute continuity and no intersection
//! condition: section checks for conditional expectations, the one-step
//! extension of a lifting pair along a refinement of the algebra on X, the
//! chain construction with its truncated limit formula, the closing and
//! repair of sections, and the final lifting with the section property.

use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use crate::algebra::{generate_algebra, SigmaAlgebra};
use crate::error::{Error, Result};
use crate::lifting::{ev_json, extend_density_to_lifting, lift_function, verify_density, verify_lifting};
use crate::lifting::{AnchorLifting, DensityTable, SetMap};
use crate::measure::{conditional_expectation, Measure, SimpleFunction};
use crate::product::{positive_section_set, validate_rcp, JointMeasure, ProductSpace, Rcp};
use crate::rational::Rational;
use crate::report::{Law, VerificationReport};
use crate::space::Event;
use crate::split_ac::SplitLiftings;

/// An increasing chain of algebras on X starting at `{∅, X}`, where each
/// step splits exactly one atom of the previous one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraChain {
    len: usize,
    steps: Vec<SigmaAlgebra>,
    generators: Vec<Event>,
}

impl AlgebraChain {
    /// Splits every generator into its pieces inside the current atoms and
    /// adds one step per proper piece, in atom index order.
    pub fn from_generators(len: usize, gens: &[Event]) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidChain("empty space".into()));
        }
        let mut steps = vec![SigmaAlgebra::trivial(len)];
        let mut pieces = Vec::new();
        for g in gens {
            if g.len() != len {
                return Err(Error::InvalidChain(format!("generator {g} lives on a different space")));
            }
            let snapshot = steps.last().expect("nonempty").atoms().to_vec();
            for a in snapshot {
                let h = a & *g;
                if h.is_empty() || h == a {
                    continue;
                }
                let cur = steps.last().expect("nonempty");
                let k = cur.atom_index_of(a.lowest().expect("atoms are nonempty"));
                let next = cur.split_atom(k, h)?;
                steps.push(next);
                pieces.push(h);
            }
        }
        Ok(AlgebraChain { len, steps, generators: pieces })
    }

    /// Splits off the singletons `{0}, {1}, …, {len-2}` in turn.
    pub fn standard(len: usize) -> Self {
        let gens: Vec<Event> = (0..len.saturating_sub(1)).map(|i| Event::singleton(len, i)).collect();
        Self::from_generators(len, &gens).expect("singletons split atoms")
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn steps(&self) -> &[SigmaAlgebra] {
        &self.steps
    }

    /// The per-step generator pieces `H_m`, one per refinement.
    pub fn generators(&self) -> &[Event] {
        &self.generators
    }

    pub fn target(&self) -> &SigmaAlgebra {
        self.steps.last().expect("at least the trivial algebra")
    }

    /// Re-derives every structural invariant.
    pub fn validate(&self) -> Result<()> {
        if self.steps.first() != Some(&SigmaAlgebra::trivial(self.len)) {
            return Err(Error::InvalidChain("first step is not the trivial algebra".into()));
        }
        if self.generators.len() + 1 != self.steps.len() {
            return Err(Error::InvalidChain("one generator per refinement".into()));
        }
        for (m, h) in self.generators.iter().enumerate() {
            let cur = &self.steps[m];
            let k = h
                .lowest()
                .map(|p| cur.atom_index_of(p))
                .ok_or_else(|| Error::InvalidChain(format!("empty generator at step {m}")))?;
            if cur.split_atom(k, *h)? != self.steps[m + 1] {
                return Err(Error::InvalidChain(format!("step {m} is not the split of one atom by {h}")));
            }
        }
        if generate_algebra(self.len, &self.generators) != *self.target() {
            return Err(Error::InvalidChain("generators do not generate the final step".into()));
        }
        Ok(())
    }
}

impl Serialize for AlgebraChain {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.generators.serialize(s)
    }
}

/// The algebra on `X×Y` whose atoms are `C×{y}` for the atoms `C` of `alg`.
pub fn product_algebra(prod: &ProductSpace, alg: &SigmaAlgebra) -> SigmaAlgebra {
    let atoms = alg.atoms().iter().flat_map(|c| (0..prod.ny()).map(move |y| prod.slice(*c, y))).collect();
    SigmaAlgebra::new(prod.len(), atoms).expect("rectangles over a partition partition the product")
}

/// A lifting `φ` of R on `𝔠⊗𝔅` together with liftings `τ_y` of every `S_y`
/// on `𝔠`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainState {
    pub algebra: SigmaAlgebra,
    pub product_algebra: SigmaAlgebra,
    pub phi: DensityTable,
    pub tau_y: Vec<DensityTable>,
}

impl ChainState {
    /// Debug dump of the tables as `(event, image)` pairs.
    pub fn dump(&self) -> Value {
        let pairs = |t: &DensityTable| t.pairs().map(|(e, i)| json!([ev_json(e), ev_json(i)])).collect::<Vec<_>>();
        json!({
            "version": 1,
            "atoms": self.algebra.atoms().iter().map(|a| ev_json(*a)).collect::<Vec<_>>(),
            "phi": pairs(&self.phi),
            "tau_y": self.tau_y.iter().map(pairs).collect::<Vec<_>>(),
        })
    }
}

/// The state on `𝔠_1 = {∅, X}`: `φ(X×B) = X×ρ(B)` and the only lifting of
/// each `S_y` on the trivial algebra.
pub fn base_state(rcp: &Rcp, r: &JointMeasure, rho: &AnchorLifting) -> Result<ChainState> {
    let prod = r.product();
    check_shapes(rcp, r)?;
    if rho.measure() != r.q() {
        return Err(Error::SpaceMismatch("rho is not a lifting of the Y-marginal".into()));
    }
    let algebra = SigmaAlgebra::trivial(prod.nx());
    let product_algebra = product_algebra(prod, &algebra);
    let full_x = Event::full(prod.nx());
    let phi = DensityTable::from_fn(r.r().clone(), product_algebra.clone(), |e| {
        prod.rectangle(full_x, rho.apply(prod.section_x(e, 0)))
    });
    let tau_y = (0..prod.ny()).map(|y| DensityTable::from_fn(rcp.s(y).clone(), algebra.clone(), |a| a)).collect();
    Ok(ChainState { algebra, product_algebra, phi, tau_y })
}

fn check_shapes(rcp: &Rcp, r: &JointMeasure) -> Result<()> {
    let prod = r.product();
    if rcp.len() != prod.ny() || rcp.x().len() != prod.nx() {
        return Err(Error::SpaceMismatch("rcp does not match the product".into()));
    }
    Ok(())
}

/// Exceptional sets of the section hypotheses over every rectangle `A×B`
/// with `A ∈ 𝔠`: where `[φ(A×B)]^y ≠ τ_y(A)` for `y ∈ B`, and where
/// `[φ(A×B)]^y ≠ ∅` for `y ∉ B`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectionHypotheses {
    pub inside: Event,
    pub outside: Event,
    /// The first rectangle (A ascending, then B ascending) whose exceptional
    /// set is not Q-null.
    pub violation: Option<Error>,
}

impl SectionHypotheses {
    pub fn exceptional(&self) -> Event {
        self.inside | self.outside
    }
}

pub fn section_hypotheses(state: &ChainState, prod: &ProductSpace, q: &Measure) -> SectionHypotheses {
    let ny = prod.ny();
    let qsupp = q.support();
    let mut inside = Event::empty(ny);
    let mut outside = Event::empty(ny);
    let mut violation = None;
    for a in state.algebra.events() {
        let taus: Vec<Event> = state.tau_y.iter().map(|t| t.image(a).expect("measurable")).collect();
        for b in Event::all(ny) {
            let img = state.phi.image(prod.rectangle(a, b)).expect("rectangles over 𝔠 are measurable");
            let mut ex_in = Event::empty(ny);
            let mut ex_out = Event::empty(ny);
            for y in 0..ny {
                let s = prod.section_y(img, y);
                if b.contains(y) && s != taus[y] {
                    ex_in = ex_in | Event::singleton(ny, y);
                }
                if !b.contains(y) && !s.is_empty() {
                    ex_out = ex_out | Event::singleton(ny, y);
                }
            }
            if violation.is_none() {
                if !ex_in.is_disjoint(&qsupp) {
                    violation = Some(Error::HypothesisViolated { which: 4, a, b, exceptional: ex_in });
                } else if !ex_out.is_disjoint(&qsupp) {
                    violation = Some(Error::HypothesisViolated { which: 5, a, b, exceptional: ex_out });
                }
            }
            inside = inside | ex_in;
            outside = outside | ex_out;
        }
    }
    SectionHypotheses { inside, outside, violation }
}

/// `{y : NOT [E_{C⊗𝔅}(f)]^y = E^y_C(f^y) S_y-a.e.}`, both conditional
/// expectations taking the value 0 on null atoms.
pub fn verify_cond_exp_sections(f: &SimpleFunction, c: &SigmaAlgebra, rcp: &Rcp, r: &JointMeasure) -> Result<Event> {
    check_shapes(rcp, r)?;
    let prod = r.product();
    if f.len() != prod.len() || c.len() != prod.nx() {
        return Err(Error::SpaceMismatch("function or algebra does not match the product".into()));
    }
    let lhs = conditional_expectation(f, &product_algebra(prod, c), r.r())?;
    let mut bad = Event::empty(prod.ny());
    for y in 0..prod.ny() {
        let fy = SimpleFunction::new((0..prod.nx()).map(|x| f.at(prod.index(x, y))).collect());
        let s = rcp.s(y);
        let rhs = conditional_expectation(&fy, c, s)?;
        if s.support().indices().any(|x| lhs.at(prod.index(x, y)) != rhs.at(x)) {
            bad = bad | Event::singleton(prod.ny(), y);
        }
    }
    Ok(bad)
}

/// One refinement step `𝔠 → σ(𝔠 ∪ {H})` for `H` strictly inside one atom
/// `A_H` of `𝔠`. The coordinate liftings split `A_H` by the three-way case
/// distinction on `S_y(H) = 0`, `S_y(A_H∖H) = 0` or neither; the product
/// lifting is assembled from `φ` on the rectangles over `A_H` cut by the
/// positive section sets `B_H` and `B_{A_H∖H}`.
pub fn extend_lifting_step(state: &ChainState, h: Event, rcp: &Rcp, r: &JointMeasure) -> Result<ChainState> {
    check_shapes(rcp, r)?;
    let prod = r.product();
    let (nx, ny) = (prod.nx(), prod.ny());
    let alg = &state.algebra;
    if h.len() != nx {
        return Err(Error::SpaceMismatch(format!("generator {h} does not live on X")));
    }
    let k = h.lowest().map(|p| alg.atom_index_of(p)).ok_or(Error::NotInsideAtom { h })?;
    let a_h = alg.atoms()[k];
    if !h.is_subset(&a_h) || h == a_h {
        return Err(Error::NotInsideAtom { h });
    }
    if let Some(err) = section_hypotheses(state, prod, r.q()).violation {
        return Err(err);
    }
    let rest = a_h - h;
    let d = alg.split_atom(k, h)?;
    let pd = product_algebra(prod, &d);
    let empty_x = Event::empty(nx);

    let tau_y: Vec<DensityTable> = (0..ny)
        .map(|y| {
            let tau = &state.tau_y[y];
            let t = |e: Event| tau.image(e).expect("measurable in the coarser algebra");
            let s = rcp.s(y);
            let t_ah = t(a_h);
            let (xi_h, xi_rest) = if s.is_null(h).expect("power set") {
                (empty_x, t_ah)
            } else if s.is_null(rest).expect("power set") {
                (t_ah, empty_x)
            } else {
                (h, t_ah - h)
            };
            DensityTable::from_fn(s.clone(), d.clone(), |e| {
                let d0 = e - a_h;
                let a = if h.is_subset(&e) { d0 | a_h } else { d0 };
                let b = if rest.is_subset(&e) { d0 | a_h } else { d0 };
                (xi_h & t(a)) | (xi_rest & t(b)) | t(b - a_h)
            })
        })
        .collect();

    let phi = |e: Event| state.phi.image(e).expect("measurable in the coarser product algebra");
    let full_y = Event::full(ny);
    let full_x = Event::full(nx);
    let b_h = positive_section_set(rcp, h);
    let b_rest = positive_section_set(rcp, rest);
    let h_cyl = prod.rectangle(h, full_y);
    let hc_cyl = prod.rectangle(full_x - h, full_y);
    let ah_cyl = prod.rectangle(a_h, full_y);
    let xi_h = (h_cyl & phi(prod.rectangle(a_h, b_h))) | (hc_cyl & phi(prod.rectangle(a_h, full_y - b_rest)));
    let xi_rest = (h_cyl & phi(prod.rectangle(a_h, full_y - b_h))) | (hc_cyl & phi(prod.rectangle(a_h, b_rest)));
    let phi_table = DensityTable::from_fn(r.r().clone(), pd.clone(), |e| {
        let outer = e - ah_cyl;
        let mut yf = 0u64;
        let mut yg = 0u64;
        for y in 0..ny {
            if prod.slice(h, y).is_subset(&e) {
                yf |= 1 << y;
            }
            if prod.slice(rest, y).is_subset(&e) {
                yg |= 1 << y;
            }
        }
        let f = outer | prod.rectangle(a_h, Event::from_bits_unchecked(ny, yf));
        let g = outer | prod.rectangle(a_h, Event::from_bits_unchecked(ny, yg));
        (phi(f) & xi_h) | (phi(g) & xi_rest) | phi(g - ah_cyl)
    });
    Ok(ChainState { algebra: d, product_algebra: pd, phi: phi_table, tau_y })
}

/// Knobs for the truncated limit formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LimitOptions {
    /// Value of every conditional expectation on null atoms.
    pub null_value: Rational,
    /// Extra values of `k` evaluated beyond the guard.
    pub extra_k: u64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions { null_value: Rational::ZERO, extra_k: 0 }
    }
}

/// Output of the chain construction.
#[derive(Clone, Debug)]
pub struct ChainOutput {
    pub chain: AlgebraChain,
    pub states: Vec<ChainState>,
    /// Per state, the union of all rectangle exceptional sets of the section
    /// hypotheses. Always Q-null.
    pub exceptional: Vec<Event>,
    /// The truncated limit formula on the product algebra over the target.
    pub phi_tilde: DensityTable,
    /// The truncated limit formula for each `S_y` on the target.
    pub tau_tilde: Vec<DensityTable>,
    /// Per event code of the final product algebra, the set `N_F` outside
    /// of which `[φ̃(F)]^y = τ̃_y(F^y)`.
    pub n_f: Vec<Event>,
    /// Largest `k` evaluated in the limit formula.
    pub max_k: u64,
}

/// Per step, the atoms of an algebra with their masses.
struct Level {
    /// Atom bitmasks in code order.
    masks: Vec<u64>,
    /// Scaled masses of the atoms.
    dens: Vec<i128>,
}

impl Level {
    fn new(alg: &SigmaAlgebra, weights: &[i128]) -> Self {
        let masks: Vec<u64> = alg.atoms().iter().map(|a| a.bits()).collect();
        let dens = masks.iter().map(|&m| weighted(m, weights)).collect();
        Level { masks, dens }
    }

    fn nums(&self, f: u64, weights: &[i128], out: &mut Vec<i128>) {
        out.clear();
        out.extend(self.masks.iter().map(|&m| weighted(m & f, weights)));
    }

    /// Code of `{E(χ_F) > 1 − 1/k}`.
    fn level_code(&self, nums: &[i128], k: u64, null: Rational) -> u64 {
        let k = k as i128;
        let mut code = 0u64;
        for (i, (&num, &den)) in nums.iter().zip(&self.dens).enumerate() {
            let (n, d) = if den == 0 { (null.numer(), null.denom()) } else { (num, den) };
            if k * n > (k - 1) * d {
                code |= 1 << i;
            }
        }
        code
    }

    /// The smallest `k` with `v ≤ 1 − 1/k` for each value `v ∈ (0, 1)`.
    fn breakpoints(&self, nums: &[i128], null: Rational, out: &mut Vec<u64>) {
        for (&num, &den) in nums.iter().zip(&self.dens) {
            let (n, d) = if den == 0 { (null.numer(), null.denom()) } else { (num, den) };
            if n > 0 && n < d {
                let gap = d - n;
                out.push(((d + gap - 1) / gap) as u64);
            }
        }
    }
}

fn weighted(mask: u64, weights: &[i128]) -> i128 {
    let mut m = mask;
    let mut acc = 0i128;
    while m != 0 {
        acc += weights[m.trailing_zeros() as usize];
        m &= m - 1;
    }
    acc
}

/// `⋂_k ⋃_n ⋂_{m≥n} L_m(level_m(k))` over the finite ranges.
fn triple_limit(
    ks: &[u64],
    levels: &[Level],
    nums: &[Vec<i128>],
    null: Rational,
    lift: impl Fn(usize, u64) -> Event,
    full: Event,
) -> Event {
    let mm = levels.len();
    let mut result = full;
    let mut imgs = Vec::with_capacity(mm);
    for &k in ks {
        imgs.clear();
        imgs.extend((0..mm).map(|m| lift(m, levels[m].level_code(&nums[m], k, null))));
        let mut uni = Event::empty(full.len());
        let mut inter = full;
        // ⋂_{m≥n} grows as n increases; walking n downwards reuses the
        // running intersection.
        for n in (0..mm).rev() {
            inter = inter & imgs[n];
            uni = uni | inter;
        }
        result = result & uni;
    }
    result
}

fn k_range(bps: &mut Vec<u64>, extra: u64) -> Vec<u64> {
    bps.push(1);
    bps.sort_unstable();
    bps.dedup();
    let guard = bps.last().copied().unwrap_or(1) + 1;
    let mut ks = bps.clone();
    ks.extend(guard..=guard + extra);
    ks
}

pub fn chain_construct(chain: &AlgebraChain, rcp: &Rcp, r: &JointMeasure, rho: &AnchorLifting) -> Result<ChainOutput> {
    chain_construct_with(chain, rcp, r, rho, LimitOptions::default())
}

/// Runs the refinement steps along the chain, then evaluates the truncated
/// limit formula for every event of the target product algebra and every
/// event of the target.
pub fn chain_construct_with(
    chain: &AlgebraChain,
    rcp: &Rcp,
    r: &JointMeasure,
    rho: &AnchorLifting,
    opts: LimitOptions,
) -> Result<ChainOutput> {
    chain.validate()?;
    let prod = r.product();
    if chain.len() != prod.nx() {
        return Err(Error::SpaceMismatch("chain does not live on X".into()));
    }
    let mut states = vec![base_state(rcp, r, rho)?];
    let mut exceptional = Vec::with_capacity(chain.steps().len());
    for h in chain.generators() {
        let cur = states.last().expect("nonempty");
        exceptional.push(section_hypotheses(cur, prod, r.q()).exceptional());
        let next = extend_lifting_step(cur, *h, rcp, r)?;
        states.push(next);
    }
    let last = states.last().expect("nonempty");
    let hyp = section_hypotheses(last, prod, r.q());
    if let Some(err) = hyp.violation {
        return Err(Error::InternalInvariantBroken(format!("final step breaks the section hypotheses: {err}")));
    }
    exceptional.push(hyp.exceptional());

    let null = opts.null_value;
    let (nx, ny) = (prod.nx(), prod.ny());
    let wr = r.r().scaled_weights();
    let plevels: Vec<Level> = states.iter().map(|s| Level::new(&s.product_algebra, wr)).collect();
    let mm = states.len();
    let ex_all = exceptional.iter().fold(Event::empty(ny), |a, e| a | *e);

    // For each state and each pair (x-atom i, y), the product atom index.
    let patom_of: Vec<Vec<usize>> = states
        .iter()
        .map(|s| {
            let mut v = vec![0; s.algebra.atom_count() * ny];
            for (i, c) in s.algebra.atoms().iter().enumerate() {
                for y in 0..ny {
                    let code = s.product_algebra.encode(prod.slice(*c, y)).expect("atom");
                    v[i * ny + y] = code.trailing_zeros() as usize;
                }
            }
            v
        })
        .collect();

    let target = &last.product_algebra;
    let full = Event::full(prod.len());
    let mut nums: Vec<Vec<i128>> = vec![Vec::new(); mm];
    let mut bps = Vec::new();
    let mut max_k = 1;
    let mut phi_images = Vec::with_capacity(target.event_count() as usize);
    let mut n_f = Vec::with_capacity(target.event_count() as usize);
    for code in 0..target.event_count() {
        let f = target.decode(code);
        bps.clear();
        for m in 0..mm {
            plevels[m].nums(f.bits(), wr, &mut nums[m]);
            plevels[m].breakpoints(&nums[m], null, &mut bps);
        }
        if null.numer() > 0 && null.numer() < null.denom() {
            bps.push(((2 * null.denom() - null.numer() - 1) / (null.denom() - null.numer())) as u64);
        }
        let ks = k_range(&mut bps, opts.extra_k);
        max_k = max_k.max(*ks.last().expect("nonempty"));
        let img = triple_limit(&ks, &plevels, &nums, null, |m, c| states[m].phi.image_code(c), full);
        phi_images.push(img);

        // Section check of the conditional expectations at every step.
        let mut bad = ex_all;
        for m in 0..mm {
            for y in 0..ny {
                if bad.contains(y) {
                    continue;
                }
                let s = rcp.s(y);
                let ws = s.scaled_weights();
                let fy = prod.section_y(f, y).bits();
                let xalg = &states[m].algebra;
                let mismatch = xalg.atoms().iter().enumerate().any(|(i, c)| {
                    let den_s = weighted(c.bits(), ws);
                    if den_s == 0 {
                        return false;
                    }
                    let num_s = weighted(c.bits() & fy, ws);
                    let j = patom_of[m][i * ny + y];
                    let (nr, dr) = if plevels[m].dens[j] == 0 {
                        (null.numer(), null.denom())
                    } else {
                        (nums[m][j], plevels[m].dens[j])
                    };
                    nr * den_s != num_s * dr
                });
                if mismatch {
                    bad = bad | Event::singleton(ny, y);
                }
            }
        }
        n_f.push(bad);
    }
    let phi_tilde = DensityTable::from_fn(r.r().clone(), target.clone(), {
        let mut it = phi_images.into_iter();
        move |_| it.next().expect("one image per code")
    });

    let target_x = &last.algebra;
    let full_x = Event::full(nx);
    let tau_tilde = (0..ny)
        .map(|y| {
            let s = rcp.s(y);
            let ws = s.scaled_weights();
            let levels: Vec<Level> = states.iter().map(|st| Level::new(&st.algebra, ws)).collect();
            let mut nums: Vec<Vec<i128>> = vec![Vec::new(); mm];
            let mut bps = Vec::new();
            DensityTable::from_fn(s.clone(), target_x.clone(), |a| {
                bps.clear();
                for m in 0..mm {
                    levels[m].nums(a.bits(), ws, &mut nums[m]);
                    levels[m].breakpoints(&nums[m], null, &mut bps);
                }
                if null.numer() > 0 && null.numer() < null.denom() {
                    bps.push(((2 * null.denom() - null.numer() - 1) / (null.denom() - null.numer())) as u64);
                }
                let ks = k_range(&mut bps, opts.extra_k);
                triple_limit(&ks, &levels, &nums, null, |m, c| states[m].tau_y[y].image_code(c), full_x)
            })
        })
        .collect();
    Ok(ChainOutput { chain: chain.clone(), states, exceptional, phi_tilde, tau_tilde, n_f, max_k })
}

/// Every chain invariant: liftings at each step, exact restriction to the
/// previous step, Q-null exceptional sets, stabilization of the limit
/// formula, and the section identity outside `N_F`.
pub fn verify_chain(out: &ChainOutput, rcp: &Rcp, r: &JointMeasure) -> VerificationReport {
    let prod = r.product();
    let ny = prod.ny();
    let qsupp = r.q().support();
    let mut report = VerificationReport::new("chain");

    let mut measures = Law::new("measures");
    for (m, st) in out.states.iter().enumerate() {
        measures.check(st.phi.measure() == r.r(), || json!({"step": m, "map": "phi"}));
        for (y, t) in st.tau_y.iter().enumerate() {
            measures.check(t.measure() == rcp.s(y), || json!({"step": m, "map": "tau", "y": y}));
        }
    }
    report.push(measures);
    let mut liftings = Law::new("step_liftings");
    let mut restrict_phi = Law::new("restriction_phi");
    let mut restrict_tau = Law::new("restriction_tau");
    for (m, st) in out.states.iter().enumerate() {
        let rep = verify_lifting(&st.phi);
        liftings.check(rep.pass, || json!({"step": m, "map": "phi", "laws": rep.failed_laws()}));
        for (y, t) in st.tau_y.iter().enumerate() {
            let rep = verify_lifting(t);
            liftings.check(rep.pass, || json!({"step": m, "map": "tau", "y": y, "laws": rep.failed_laws()}));
        }
        if m == 0 {
            continue;
        }
        let prev = &out.states[m - 1];
        for e in prev.product_algebra.events() {
            let ok = st.phi.image(e) == prev.phi.image(e);
            restrict_phi.check(ok, || json!({"step": m, "event": ev_json(e)}));
        }
        for y in 0..ny {
            for a in prev.algebra.events() {
                let ok = st.tau_y[y].image(a) == prev.tau_y[y].image(a);
                restrict_tau.check(ok, || json!({"step": m, "y": y, "event": ev_json(a)}));
            }
        }
    }
    report.push(liftings);
    report.push(restrict_phi);
    report.push(restrict_tau);

    let mut hyp = Law::new("section_hypotheses_null");
    for (m, st) in out.states.iter().enumerate() {
        let h = section_hypotheses(st, prod, r.q());
        hyp.check(
            h.violation.is_none() && h.exceptional() == out.exceptional[m],
            || json!({"step": m, "exceptional": ev_json(h.exceptional())}),
        );
    }
    report.push(hyp);

    let last = out.states.last().expect("nonempty");
    let mut stab = Law::new("stabilization_phi");
    for (e, img) in out.phi_tilde.pairs() {
        stab.check(last.phi.image(e) == Some(img), || json!({"event": ev_json(e)}));
    }
    report.push(stab);
    let mut stab = Law::new("stabilization_tau");
    for (y, t) in out.tau_tilde.iter().enumerate() {
        for (a, img) in t.pairs() {
            stab.check(last.tau_y[y].image(a) == Some(img), || json!({"y": y, "event": ev_json(a)}));
        }
    }
    report.push(stab);

    let mut nf = Law::new("n_f_null");
    let mut ident = Law::new("section_identity");
    for (code, (f, img)) in out.phi_tilde.pairs().enumerate() {
        let n = out.n_f[code];
        nf.check(n.is_disjoint(&qsupp), || json!({"event": ev_json(f), "n_f": ev_json(n)}));
        for y in (0..ny).filter(|&y| !n.contains(y)) {
            let want = out.tau_tilde[y].image(prod.section_y(f, y)).expect("sections of target events are measurable");
            ident.check(prod.section_y(img, y) == want, || json!({"event": ev_json(f), "y": y}));
        }
    }
    report.push(nf);
    report.push(ident);
    report.absorb("phi_tilde.", verify_lifting(&out.phi_tilde));
    report.count("steps", out.states.len() as u64);
    report.count("max_k", out.max_k);
    report
}

/// Sectionwise conditional expectations over a battery: for every event `F`
/// of the product and every chain step, the exceptional set of `χ_F` is
/// Q-null.
pub fn verify_cond_exp_battery(chain: &AlgebraChain, rcp: &Rcp, r: &JointMeasure) -> Result<VerificationReport> {
    let prod = r.product();
    let qsupp = r.q().support();
    let mut report = VerificationReport::new("cond-exp-sections");
    let mut law = Law::new("exceptional_null");
    for f in Event::all(prod.len()) {
        let chi = SimpleFunction::indicator(f);
        for (m, c) in chain.steps().iter().enumerate() {
            let bad = verify_cond_exp_sections(&chi, c, rcp, r)?;
            law.check(bad.is_disjoint(&qsupp), || json!({"event": ev_json(f), "step": m, "exceptional": ev_json(bad)}));
        }
    }
    report.push(law);
    Ok(report)
}

/// `[ψ(F)]^y = τ_y([φ̃(F)]^y)` with every `τ_y` on the power set of X.
pub fn close_sections<M: SetMap>(prod: &ProductSpace, phi: &DensityTable, tau: &[M]) -> DensityTable {
    DensityTable::from_fn(phi.measure().clone(), phi.domain().clone(), |e| {
        let img = phi.image(e).expect("own domain");
        let secs: Vec<Event> =
            (0..prod.ny()).map(|y| tau[y].image(prod.section_y(img, y)).expect("power set on X")).collect();
        prod.assemble(&secs)
    })
}

/// Result of the section repair loop.
#[derive(Clone, Debug)]
pub struct SectionRepair {
    pub psi: DensityTable,
    /// The violations `(H, y₀)` repaired, in order.
    pub history: Vec<(Event, usize)>,
}

fn first_deficiency(prod: &ProductSpace, psi: &DensityTable, rcp: &Rcp) -> Option<(Event, usize, Event)> {
    let full = psi.domain().event_count() - 1;
    for c in 0..=full {
        let u = psi.image_code(c) | psi.image_code(c ^ full);
        for y in 0..prod.ny() {
            let s = prod.section_y(u, y);
            if !rcp.s(y).support().is_subset(&s) {
                return Some((psi.domain().decode(c), y, s));
            }
        }
    }
    None
}

/// While some `(H, y₀)` has `S_{y₀}([ψ(H)]^{y₀} ∪ [ψ(H^c)]^{y₀}) < 1`, set
/// `W = τ_{y₀}(that union)^c`, enlarge the `y₀`-sections by
/// `W ∩ [ψ(H∪E)]^{y₀}` and close the sections again.
pub fn repair_full_sections<M: SetMap>(
    prod: &ProductSpace,
    psi: &DensityTable,
    tau: &[M],
    rcp: &Rcp,
) -> Result<SectionRepair> {
    if !psi.domain().is_power_set() {
        return Err(Error::InvalidChain("section repair needs the product power set".into()));
    }
    let guard = (psi.domain().event_count() as usize) * prod.len() + 1;
    let mut cur = psi.clone();
    let mut history = Vec::new();
    while let Some((h, y0, u)) = first_deficiency(prod, &cur, rcp) {
        if history.len() >= guard {
            return Err(Error::InternalInvariantBroken("section repair did not terminate".into()));
        }
        history.push((h, y0));
        let w = tau[y0].image(u).expect("power set").complement();
        let hb = h.bits();
        let enlarged = DensityTable::from_codes(cur.measure().clone(), cur.domain().clone(), |c, _| {
            let img = cur.image_code(c);
            let extra = prod.slice(w & prod.section_y(cur.image_code(c | hb), y0), y0);
            img | extra
        });
        let next = close_sections(prod, &enlarged, tau);
        if next == cur {
            return Err(Error::InternalInvariantBroken(format!("repair at ({h}, {y0}) changed nothing")));
        }
        cur = next;
    }
    Ok(SectionRepair { psi: cur, history })
}

/// Full sections (every `S_y`-positive point lies in `[ψ(E)]^y ∪ [ψ(E^c)]^y`),
/// `τ_y`-fixed sections, measurable x-sections and the density laws.
pub fn verify_full_sections<M: SetMap>(
    prod: &ProductSpace,
    psi: &DensityTable,
    tau: &[M],
    rcp: &Rcp,
) -> VerificationReport {
    let mut report = VerificationReport::new("full-sections");
    let full = psi.domain().event_count() - 1;
    let mut fulls = Law::new("full_sections");
    let mut fixed = Law::new("tau_fixed_sections");
    for c in 0..=full {
        let img = psi.image_code(c);
        let u = img | psi.image_code(c ^ full);
        for y in 0..prod.ny() {
            let e = || json!({"event": ev_json(psi.domain().decode(c)), "y": y});
            fulls.check(rcp.s(y).support().is_subset(&prod.section_y(u, y)), e);
            let s = prod.section_y(img, y);
            fixed.check(tau[y].image(s) == Some(s), e);
        }
    }
    report.push(fulls);
    report.push(fixed);
    // Every x-section is a subset of the finite Y, measurable for the
    // completed Q; nothing to sweep.
    report.push_result("x_sections_measurable", true, None);
    report.absorb("psi.", verify_density(psi));
    report
}

/// Output of the general pipeline.
#[derive(Clone, Debug)]
pub struct GeneralSplit {
    pub chain: ChainOutput,
    /// `τ_y` on the power set of X.
    pub tau: Vec<DensityTable>,
    pub psi_closed: DensityTable,
    pub psi: DensityTable,
    pub repair_history: Vec<(Event, usize)>,
    pub split: SplitLiftings,
}

/// The chain construction, closed and repaired sections, `σ_y` extending
/// `τ_y` and `π` defined by `[π(E)]^y = σ_y([ψ(E)]^y)`.
pub fn general_split(chain: &AlgebraChain, rcp: &Rcp, r: &JointMeasure, rho: &AnchorLifting) -> Result<GeneralSplit> {
    let rep = validate_rcp(rcp, r);
    if let Some(law) = rep.failed_laws().first() {
        return Err(Error::Validation { module: "product".into(), detail: format!("rcp law `{law}` fails") });
    }
    if !chain.target().is_power_set() {
        return Err(Error::InvalidChain("the chain must end at the power set of X".into()));
    }
    let prod = r.product();
    let out = chain_construct(chain, rcp, r, rho)?;
    let tau = out.tau_tilde.clone();
    let psi_closed = close_sections(prod, &out.phi_tilde, &tau);
    let repaired = repair_full_sections(prod, &psi_closed, &tau, rcp)?;
    let sigma_y = tau.iter().map(extend_density_to_lifting).collect::<Result<Vec<_>>>()?;
    let psi = repaired.psi;
    let table = DensityTable::from_fn(psi.measure().clone(), psi.domain().clone(), |e| {
        let img = psi.image(e).expect("power set");
        let secs: Vec<Event> = (0..prod.ny()).map(|y| sigma_y[y].apply(prod.section_y(img, y))).collect();
        prod.assemble(&secs)
    });
    let pi = AnchorLifting::from_table(&table)
        .map_err(|e| Error::InternalInvariantBroken(format!("sectionwise lifting: {e}")))?;
    let split = SplitLiftings { product: prod.clone(), pi, sigma_y, rho: rho.clone() };
    Ok(GeneralSplit { chain: out, tau, psi_closed, psi, repair_history: repaired.history, split })
}

/// A fixed battery of simple functions on `n` points.
pub fn function_battery(n: usize) -> Vec<SimpleFunction> {
    (0..4i128)
        .map(|j| {
            SimpleFunction::new((0..n as i128).map(|p| Rational::new((p * (2 * j + 1) + j) % (j + 2), j + 1)).collect())
        })
        .collect()
}

/// `[π(f)]^y = σ_y([π(f)]^y)` for every function of `fs` and every y.
pub fn verify_function_sp(sl: &SplitLiftings, fs: &[SimpleFunction]) -> Law {
    let prod = &sl.product;
    let mut law = Law::new("SP_functions");
    for (i, f) in fs.iter().enumerate() {
        let pf = lift_function(&sl.pi, f);
        for y in 0..prod.ny() {
            let sec = SimpleFunction::new((0..prod.nx()).map(|x| pf.at(prod.index(x, y))).collect());
            let lifted = lift_function(&sl.sigma_y[y], &sec);
            law.check(lifted == sec, || json!({"function": i, "y": y}));
        }
    }
    law
}

/// Everything the general pipeline promises: the chain invariants, full and
/// fixed sections of `ψ`, domination of the closed sections, `π` a lifting
/// with the section property for events and functions.
pub fn verify_general_split(gs: &GeneralSplit, rcp: &Rcp, r: &JointMeasure) -> VerificationReport {
    let prod = r.product();
    let mut report = VerificationReport::new("split-general");
    report.absorb("chain.", verify_chain(&gs.chain, rcp, r));
    report.absorb("psi_closed.", verify_density(&gs.psi_closed));
    report.absorb("sections.", verify_full_sections(prod, &gs.psi, &gs.tau, rcp));
    let mut dom = Law::new("repair_dominates");
    let w = gs.psi_closed.dominated_by(&gs.psi);
    dom.check(w.is_none(), || json!({"event": w.map(ev_json)}));
    report.push(dom);
    report.absorb("", crate::split_ac::verify_split_liftings(&gs.split, rcp, r, false));
    report.push(verify_function_sp(&gs.split, &function_battery(prod.len())));
    report.count("repairs", gs.repair_history.len() as u64);
    report
}
