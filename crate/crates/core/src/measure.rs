//! Exact probability measures on finite σ-algebras, simple functions and
//! conditional expectation.

use num_integer::Integer;

use crate::algebra::SigmaAlgebra;
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::space::{Event, FiniteSpace};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Measure {
    space: FiniteSpace,
    algebra: SigmaAlgebra,
    weights: Vec<Rational>,
    support: Event,
    // Atom weights as integers over the common denominator `scale`.
    scaled: Vec<i128>,
    scale: i128,
}

impl Measure {
    /// Weights are per atom of `algebra`, in the algebra's atom order.
    pub fn new(space: FiniteSpace, algebra: SigmaAlgebra, weights: Vec<Rational>) -> Result<Self> {
        if algebra.len() != space.len() {
            return Err(Error::InvalidMeasure("algebra and space sizes differ".into()));
        }
        if weights.len() != algebra.atom_count() {
            return Err(Error::InvalidMeasure(format!("{} weights for {} atoms", weights.len(), algebra.atom_count())));
        }
        if let Some((k, w)) = weights.iter().enumerate().find(|(_, w)| w.is_negative()) {
            return Err(Error::InvalidMeasure(format!("negative weight {w} on atom {k}")));
        }
        let total: Rational = weights.iter().sum();
        if total != Rational::ONE {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        let mut support = Event::empty(space.len());
        for (a, w) in algebra.atoms().iter().zip(&weights) {
            if w.is_positive() {
                support = support | *a;
            }
        }
        let mut scale: i128 = 1;
        for w in &weights {
            scale = scale.lcm(&w.denom());
            if scale > 1 << 100 {
                return Err(Error::Overflow);
            }
        }
        let scaled = weights.iter().map(|w| w.numer() * (scale / w.denom())).collect();
        Ok(Measure { space, algebra, weights, support, scaled, scale })
    }

    /// A measure on the power set given by point masses.
    pub fn on_power_set(space: FiniteSpace, masses: Vec<Rational>) -> Result<Self> {
        let alg = SigmaAlgebra::power_set(space.len());
        Self::new(space, alg, masses)
    }

    pub fn dirac(space: FiniteSpace, point: usize) -> Result<Self> {
        if point >= space.len() {
            return Err(Error::InvalidMeasure(format!("point {point} outside the space")));
        }
        let mut w = vec![Rational::ZERO; space.len()];
        w[point] = Rational::ONE;
        Self::on_power_set(space, w)
    }

    pub fn uniform(space: FiniteSpace) -> Self {
        let n = space.len() as i128;
        Self::on_power_set(space.clone(), vec![Rational::new(1, n); n as usize]).expect("uniform weights sum to one")
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn algebra(&self) -> &SigmaAlgebra {
        &self.algebra
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    /// Union of the positive atoms. A measurable event is null iff it misses
    /// the support.
    pub fn support(&self) -> Event {
        self.support
    }

    pub fn is_complete(&self) -> bool {
        self.algebra.is_power_set()
    }

    /// Mass of a single point; only meaningful on the power set.
    pub fn point_mass(&self, x: usize) -> Rational {
        debug_assert!(self.is_complete());
        self.weights[self.algebra.atom_index_of(x)]
    }

    pub fn is_positive_point(&self, x: usize) -> bool {
        self.support.contains(x)
    }

    pub fn positive_points(&self) -> Vec<usize> {
        self.support.indices().collect()
    }

    pub fn null_points(&self) -> Vec<usize> {
        self.support.complement().indices().collect()
    }

    pub fn measure_of(&self, e: Event) -> Result<Rational> {
        let code = self.algebra.encode(e).ok_or(Error::NotMeasurable(e))?;
        Ok(self.measure_of_code(code))
    }

    pub(crate) fn measure_of_code(&self, code: u64) -> Rational {
        let mut sum = Rational::ZERO;
        let mut c = code;
        while c != 0 {
            let k = c.trailing_zeros() as usize;
            sum = sum + self.weights[k];
            c &= c - 1;
        }
        sum
    }

    /// Measure of a measurable event as an integer multiple of `1/scale()`.
    pub fn scaled_measure_of(&self, e: Event) -> Result<i128> {
        let code = self.algebra.encode(e).ok_or(Error::NotMeasurable(e))?;
        let mut sum = 0i128;
        let mut c = code;
        while c != 0 {
            let k = c.trailing_zeros() as usize;
            sum += self.scaled[k];
            c &= c - 1;
        }
        Ok(sum)
    }

    /// Integer atom weights over the common denominator [`Measure::scale`].
    pub fn scaled_weights(&self) -> &[i128] {
        &self.scaled
    }

    pub fn scale(&self) -> i128 {
        self.scale
    }

    pub fn is_null(&self, e: Event) -> Result<bool> {
        if !self.algebra.is_measurable(e) {
            return Err(Error::NotMeasurable(e));
        }
        Ok(e.is_disjoint(&self.support))
    }

    pub fn ae_equal(&self, e: Event, f: Event) -> Result<bool> {
        if !self.algebra.is_measurable(e) {
            return Err(Error::NotMeasurable(e));
        }
        if !self.algebra.is_measurable(f) {
            return Err(Error::NotMeasurable(f));
        }
        Ok((e ^ f).is_disjoint(&self.support))
    }

    /// Extension to the power set. Each positive atom's weight moves to its
    /// lowest-index point; every other point becomes null.
    pub fn complete(&self) -> Measure {
        if self.is_complete() {
            return self.clone();
        }
        let mut masses = vec![Rational::ZERO; self.len()];
        for (a, w) in self.algebra.atoms().iter().zip(&self.weights) {
            masses[a.lowest().expect("atoms are nonempty")] = *w;
        }
        Measure::on_power_set(self.space.clone(), masses).expect("mass is preserved")
    }

    /// The same measure viewed on a coarser algebra.
    pub fn restrict(&self, sub: &SigmaAlgebra) -> Result<Measure> {
        if !sub.is_coarser_than(&self.algebra) {
            return Err(Error::NotCoarser);
        }
        let weights = sub.atoms().iter().map(|a| self.measure_of(*a)).collect::<Result<_>>()?;
        Measure::new(self.space.clone(), sub.clone(), weights)
    }

    /// True when every null event of `other` (on the same power set) is null here.
    pub fn is_abs_continuous_wrt(&self, other: &Measure) -> bool {
        self.support.is_subset(&other.support)
    }
}

/// A real function on a finite space with exact values.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SimpleFunction {
    values: Vec<Rational>,
}

impl SimpleFunction {
    pub fn new(values: Vec<Rational>) -> Self {
        SimpleFunction { values }
    }

    pub fn constant(len: usize, c: Rational) -> Self {
        SimpleFunction { values: vec![c; len] }
    }

    pub fn indicator(e: Event) -> Self {
        SimpleFunction {
            values: (0..e.len()).map(|i| if e.contains(i) { Rational::ONE } else { Rational::ZERO }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn at(&self, x: usize) -> Rational {
        self.values[x]
    }

    /// Constant on every atom of `alg`.
    pub fn is_measurable(&self, alg: &SigmaAlgebra) -> bool {
        alg.atoms().iter().all(|a| {
            let mut it = a.indices().map(|i| self.values[i]);
            let first = it.next();
            it.all(|v| Some(v) == first)
        })
    }

    /// `{x : f(x) > t}`.
    pub fn level_set_gt(&self, t: Rational) -> Event {
        let idx = self.values.iter().enumerate().filter(|(_, v)| **v > t).map(|(i, _)| i);
        Event::from_indices(self.len(), idx).expect("indices in range")
    }

    pub fn integral(&self, mu: &Measure) -> Result<Rational> {
        if !self.is_measurable(mu.algebra()) {
            return Err(Error::Validation {
                module: "measure".into(),
                detail: "function is not measurable for the measure's algebra".into(),
            });
        }
        Ok(mu.algebra().atoms().iter().zip(mu.weights()).map(|(a, w)| self.values[a.lowest().unwrap()] * *w).sum())
    }

    pub fn add(&self, other: &SimpleFunction) -> SimpleFunction {
        SimpleFunction { values: self.values.iter().zip(&other.values).map(|(a, b)| *a + *b).collect() }
    }
}

/// Conditional expectation with the value 0 on null atoms of `sub`.
pub fn conditional_expectation(f: &SimpleFunction, sub: &SigmaAlgebra, mu: &Measure) -> Result<SimpleFunction> {
    conditional_expectation_with(f, sub, mu, Rational::ZERO)
}

/// Conditional expectation choosing `null_value` on `mu`-null atoms of `sub`.
/// Different choices are different versions of the same a.e. class.
pub fn conditional_expectation_with(
    f: &SimpleFunction,
    sub: &SigmaAlgebra,
    mu: &Measure,
    null_value: Rational,
) -> Result<SimpleFunction> {
    if !sub.is_coarser_than(mu.algebra()) {
        return Err(Error::NotCoarser);
    }
    if f.len() != mu.len() {
        return Err(Error::SpaceMismatch("function and measure sizes differ".into()));
    }
    if !f.is_measurable(mu.algebra()) {
        let bad = mu
            .algebra()
            .atoms()
            .iter()
            .find(|a| a.indices().any(|i| f.values[i] != f.values[a.lowest().unwrap()]))
            .copied()
            .unwrap();
        return Err(Error::NotMeasurable(bad));
    }
    let mut values = vec![Rational::ZERO; f.len()];
    for c in sub.atoms() {
        let mass = mu.measure_of(*c)?;
        let v = if mass.is_zero() {
            null_value
        } else {
            let mut acc = Rational::ZERO;
            for (a, w) in mu.algebra().atoms().iter().zip(mu.weights()) {
                if a.is_subset(c) {
                    acc = acc + f.values[a.lowest().unwrap()] * *w;
                }
            }
            acc / mass
        };
        for i in c.indices() {
            values[i] = v;
        }
    }
    Ok(SimpleFunction { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    fn space_a_p() -> Measure {
        let x = FiniteSpace::indexed(3).unwrap();
        Measure::on_power_set(x, vec![r(1, 2), r(1, 2), Rational::ZERO]).unwrap()
    }

    fn ev(idx: &[usize]) -> Event {
        Event::from_indices(3, idx.iter().copied()).unwrap()
    }

    #[test]
    fn measure_of_examples() {
        let p = space_a_p();
        assert_eq!(p.measure_of(ev(&[0, 1])).unwrap(), Rational::ONE);
        assert_eq!(p.measure_of(ev(&[])).unwrap(), Rational::ZERO);
        assert_eq!(p.measure_of(ev(&[2])).unwrap(), Rational::ZERO);
    }

    #[test]
    fn not_measurable() {
        let x = FiniteSpace::indexed(3).unwrap();
        let alg = SigmaAlgebra::new(3, vec![ev(&[0]), ev(&[1, 2])]).unwrap();
        let mu = Measure::new(x, alg, vec![r(1, 2), r(1, 2)]).unwrap();
        assert_eq!(mu.measure_of(ev(&[1])), Err(Error::NotMeasurable(ev(&[1]))));
    }

    #[test]
    fn rejects_bad_weights() {
        let x = FiniteSpace::indexed(2).unwrap();
        assert!(Measure::on_power_set(x.clone(), vec![Rational::ONE, Rational::ONE]).is_err());
        assert!(Measure::on_power_set(x, vec![r(3, 2), r(-1, 2)]).is_err());
    }

    #[test]
    fn ae_equal_examples() {
        let p = space_a_p();
        assert!(p.ae_equal(ev(&[0, 1]), ev(&[0, 1, 2])).unwrap());
        assert!(p.ae_equal(ev(&[1]), ev(&[1])).unwrap());
        assert!(!p.ae_equal(ev(&[0]), ev(&[1])).unwrap());
    }

    #[test]
    fn complete_examples() {
        let p = space_a_p();
        assert_eq!(p.complete(), p);

        let x = FiniteSpace::indexed(3).unwrap();
        let alg = SigmaAlgebra::new(3, vec![ev(&[0]), ev(&[1, 2])]).unwrap();
        let coarse = Measure::new(x.clone(), alg, vec![r(1, 2), r(1, 2)]).unwrap();
        assert_eq!(coarse.complete(), p);

        let one = Measure::new(x.clone(), SigmaAlgebra::trivial(3), vec![Rational::ONE]).unwrap();
        assert_eq!(one.complete(), Measure::dirac(x, 0).unwrap());
    }

    #[test]
    fn completion_preserves_original_values() {
        let x = FiniteSpace::indexed(4).unwrap();
        let alg = SigmaAlgebra::new(
            4,
            vec![Event::from_indices(4, [0, 3]).unwrap(), Event::from_indices(4, [1, 2]).unwrap()],
        )
        .unwrap();
        let mu = Measure::new(x, alg.clone(), vec![r(1, 3), r(2, 3)]).unwrap();
        let c = mu.complete();
        for e in alg.events() {
            assert_eq!(c.measure_of(e).unwrap(), mu.measure_of(e).unwrap());
        }
    }

    #[test]
    fn conditional_expectation_examples() {
        let p = space_a_p();
        let sub = SigmaAlgebra::new(3, vec![ev(&[0, 1]), ev(&[2])]).unwrap();
        let f = SimpleFunction::indicator(ev(&[0]));
        let g = conditional_expectation(&f, &sub, &p).unwrap();
        assert_eq!(g.values(), &[r(1, 2), r(1, 2), Rational::ZERO]);

        let one = SimpleFunction::constant(3, Rational::ONE);
        let g = conditional_expectation(&one, &SigmaAlgebra::trivial(3), &p).unwrap();
        assert_eq!(g.values(), &[Rational::ONE; 3]);

        let h = SimpleFunction::new(vec![r(5, 1), r(7, 1), r(9, 1)]);
        let g = conditional_expectation(&h, p.algebra(), &p).unwrap();
        assert_eq!(&g.values()[..2], &h.values()[..2]);
    }

    #[test]
    fn conditional_expectation_errors() {
        let x = FiniteSpace::indexed(3).unwrap();
        let alg = SigmaAlgebra::new(3, vec![ev(&[0]), ev(&[1, 2])]).unwrap();
        let mu = Measure::new(x, alg, vec![r(1, 2), r(1, 2)]).unwrap();
        let f = SimpleFunction::indicator(ev(&[1]));
        assert!(matches!(conditional_expectation(&f, &SigmaAlgebra::trivial(3), &mu), Err(Error::NotMeasurable(_))));
        let g = SimpleFunction::indicator(ev(&[0]));
        assert_eq!(conditional_expectation(&g, &SigmaAlgebra::power_set(3), &mu), Err(Error::NotCoarser));
    }

    #[test]
    fn scaled_weights_match() {
        let x = FiniteSpace::indexed(3).unwrap();
        let mu = Measure::on_power_set(x, vec![r(1, 6), r(1, 3), r(1, 2)]).unwrap();
        assert_eq!(mu.scale(), 6);
        assert_eq!(mu.scaled_weights(), &[1, 2, 3]);
        assert_eq!(mu.scaled_measure_of(ev(&[1, 2])).unwrap(), 5);
    }
}
