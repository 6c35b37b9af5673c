use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exterior::{Ambient, FlatMetric, Form, Mode, MultiIndex};
use crate::scalar::{CxOps, i_pow, real, Cx, Real};

/// Closed odd-degree scalar form `H`, constant or band-limited.
///
/// Terms are keyed by lattice vector and multi-index; the channel is always trivial.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxForm<T: Real> {
    n: usize,
    terms: BTreeMap<(Vec<i32>, MultiIndex), Cx<T>>,
}

impl<T: Real> FluxForm<T> {
    pub fn zero(n: usize) -> Self {
        FluxForm { n, terms: BTreeMap::new() }
    }

    /// Validated flux: odd degrees at least 3, closed.
    pub fn new(n: usize, terms: impl IntoIterator<Item = (Vec<i32>, MultiIndex, Cx<T>)>) -> Result<Self> {
        let h = Self::collect(n, terms)?;
        if let Some(d) = h.terms.keys().map(|(_, i)| i.degree()).find(|&d| d < 3) {
            return Err(Error::FluxInvalid(format!(
                "degree-{d} component; degree-1 parts belong in the flat connection"
            )));
        }
        h.check_closed()?;
        Ok(h)
    }

    /// Constant flux from its coefficients.
    pub fn constant(n: usize, coefficients: &[(MultiIndex, Cx<T>)]) -> Result<Self> {
        Self::new(n, coefficients.iter().map(|&(i, c)| (vec![0; n], i, c)))
    }

    /// Flux that may carry a degree-1 part, as produced by gauge transformations.
    pub(crate) fn with_connection_part(
        n: usize,
        terms: impl IntoIterator<Item = (Vec<i32>, MultiIndex, Cx<T>)>,
    ) -> Result<Self> {
        let h = Self::collect(n, terms)?;
        h.check_closed()?;
        Ok(h)
    }

    fn collect(n: usize, terms: impl IntoIterator<Item = (Vec<i32>, MultiIndex, Cx<T>)>) -> Result<Self> {
        let mut map: BTreeMap<(Vec<i32>, MultiIndex), Cx<T>> = BTreeMap::new();
        for (k, i, c) in terms {
            if k.len() != n || !i.fits(n) {
                return Err(Error::FluxInvalid(format!("term {k:?} {i:?} does not fit dimension {n}")));
            }
            if i.degree() % 2 == 0 {
                return Err(Error::FluxInvalid(format!("even-degree component {i:?}")));
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::FluxInvalid("non-finite coefficient".into()));
            }
            *map.entry((k, i)).or_insert_with(|| Cx::new(T::zero(), T::zero())) += c;
        }
        map.retain(|_, c| c.norm() > T::zero());
        Ok(FluxForm { n, terms: map })
    }

    fn check_closed(&self) -> Result<()> {
        let mut d: BTreeMap<(Vec<i32>, MultiIndex), Cx<T>> = BTreeMap::new();
        for ((k, i), c) in &self.terms {
            for (j, &kj) in k.iter().enumerate() {
                if let Some((s, idx)) = MultiIndex::axis(j).wedge(*i) {
                    let x = T::two_pi() * real::<T>((s * kj) as f64);
                    *d.entry((k.clone(), idx)).or_insert_with(|| Cx::new(T::zero(), T::zero())) +=
                        *c * Cx::new(T::zero(), x);
                }
            }
        }
        let defect = d.values().fold(T::zero(), |m, c| m.max(c.norm()));
        let scale = T::one().max(self.max_abs()) * T::two_pi() * real((self.radius() + 1) as f64);
        if defect > T::identity_tolerance() * scale {
            return Err(Error::FluxNotClosed(crate::scalar::to_f64(defect)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[i32], MultiIndex, Cx<T>)> {
        self.terms.iter().map(|((k, i), c)| (k.as_slice(), *i, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|(k, _)| k.iter().all(|&x| x == 0))
    }

    /// Largest `‖k‖_∞` among the flux modes.
    pub fn radius(&self) -> usize {
        self.terms
            .keys()
            .map(|(k, _)| k.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    pub fn max_abs(&self) -> T {
        self.terms.values().fold(T::zero(), |m, c| m.max(c.norm()))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d: Vec<_> = self.terms.keys().map(|(_, i)| i.degree()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Coefficients of the `k = 0` part.
    pub fn constant_part(&self) -> Vec<(MultiIndex, Cx<T>)> {
        self.terms
            .iter()
            .filter(|((k, _), _)| k.iter().all(|&x| x == 0))
            .map(|((_, i), c)| (*i, *c))
            .collect()
    }

    /// Terms grouped by lattice shift.
    pub fn by_mode(&self) -> BTreeMap<Vec<i32>, Vec<(MultiIndex, Cx<T>)>> {
        let mut out: BTreeMap<Vec<i32>, Vec<(MultiIndex, Cx<T>)>> = BTreeMap::new();
        for ((k, i), c) in &self.terms {
            out.entry(k.clone()).or_default().push((*i, *c));
        }
        out
    }

    fn map_terms(&self, f: impl Fn(&[i32], MultiIndex, Cx<T>) -> (Vec<i32>, Cx<T>)) -> Self {
        let mut terms = BTreeMap::new();
        for ((k, i), c) in &self.terms {
            let (k2, c2) = f(k, *i, *c);
            terms.insert((k2, *i), c2);
        }
        FluxForm { n: self.n, terms }
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        let mut h = self.map_terms(|k, _, c| (k.to_vec(), c * s));
        h.terms.retain(|_, c| c.norm() > T::zero());
        h
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::AmbientMismatch("fluxes on different tori".into()));
        }
        Self::with_connection_part(
            self.n,
            self.terms.iter().chain(&other.terms).map(|((k, i), c)| (k.clone(), *i, *c)),
        )
    }

    /// Complex conjugate `H̄` (modes `k ↦ -k`).
    pub fn conjugate(&self) -> Self {
        self.map_terms(|k, _, c| (k.iter().map(|x| -x).collect(), c.conj()))
    }

    /// `-H̄`.
    pub fn neg_conjugate(&self) -> Self {
        self.map_terms(|k, _, c| (k.iter().map(|x| -x).collect(), -c.conj()))
    }

    /// `H^{(λ)} = Σ λ^j H_{2j+1}`.
    pub fn rescale(&self, lambda: Cx<T>) -> Result<Self> {
        if lambda.norm() == T::zero() {
            return Err(Error::ZeroLambda);
        }
        Ok(self.map_terms(|k, i, c| (k.to_vec(), c * lambda.powi(((i.degree() - 1) / 2) as i32))))
    }

    /// Largest deviation of `i^{-(j+1)} H_{2j+1}` from a real form.
    pub fn admissibility_defect(&self) -> T {
        let twisted = self.map_terms(|k, i, c| (k.to_vec(), c * i_pow::<T>(-(((i.degree() - 1) / 2 + 1) as i64))));
        twisted.reality_defect()
    }

    pub fn is_admissible(&self) -> bool {
        self.admissibility_defect() <= T::identity_tolerance() * T::one().max(self.max_abs())
    }

    /// Largest coefficient of `H + H̄`.
    pub fn imaginary_defect(&self) -> T {
        let sum = self.add(&self.conjugate()).expect("same torus");
        sum.max_abs()
    }

    pub fn is_pure_imaginary(&self) -> bool {
        self.imaginary_defect() <= T::identity_tolerance() * T::one().max(self.max_abs())
    }

    fn reality_defect(&self) -> T {
        let diff = self.add(&self.conjugate().scale(Cx::new(-T::one(), T::zero()))).expect("same torus");
        diff.max_abs()
    }

    /// Pointwise RMS norm `(∫|H|² vol / vol)^{1/2}`.
    pub fn norm(&self, metric: &FlatMetric<T>) -> T {
        let f = self.to_form(metric, self.radius());
        f.norm() / metric.volume().sqrt()
    }

    /// Coordinate integral of the top-degree constant coefficient.
    pub fn integral(&self) -> Cx<T> {
        let top = MultiIndex::top(self.n);
        self.terms
            .get(&(vec![0; self.n], top))
            .copied()
            .unwrap_or_else(|| Cx::new(T::zero(), T::zero()))
    }

    pub fn to_form(&self, metric: &FlatMetric<T>, radius: usize) -> Form<T> {
        let ambient: Arc<Ambient<T>> = Ambient::scalar(metric.clone(), radius.max(self.radius()));
        Form::from_terms(ambient, self.terms.iter().map(|((k, i), c)| (Mode::new(k.clone(), 0), *i, *c)))
            .expect("flux fits its own radius")
    }

    /// Pullback along a projection `T^{n_total} → T^n` onto the axes starting at `offset`.
    pub fn pullback(&self, n_total: usize, offset: usize) -> Self {
        let mut terms = BTreeMap::new();
        for ((k, i), c) in &self.terms {
            let mut kk = vec![0; n_total];
            kk[offset..offset + self.n].copy_from_slice(k);
            terms.insert((kk, i.shifted(offset)), *c);
        }
        FluxForm { n: n_total, terms }
    }

    /// Flux with the same coefficients as a scalar form.
    pub fn from_form(form: &Form<T>) -> Result<Self> {
        Self::new(form.dim(), form.terms().map(|(m, i, c)| (m.k.clone(), i, c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    fn dx123() -> MultiIndex {
        MultiIndex::top(3)
    }

    #[test]
    fn rejects_low_and_even_degrees() {
        assert!(matches!(
            FluxForm::<f64>::constant(3, &[(MultiIndex::axis(0), cx(1.0, 0.0))]),
            Err(Error::FluxInvalid(_))
        ));
        assert!(FluxForm::<f64>::constant(3, &[(MultiIndex::new(&[0, 1]).unwrap(), cx(1.0, 0.0))]).is_err());
    }

    #[test]
    fn closedness() {
        // sin(2πx_0) dx_123 on T^3 is top degree, hence closed.
        let ok = FluxForm::<f64>::new(
            3,
            [(vec![1, 0, 0], dx123(), cx(0.0, -0.5)), (vec![-1, 0, 0], dx123(), cx(0.0, 0.5))],
        );
        assert!(ok.is_ok());
        // e^{2πi x_3} dx_012 on T^4 is not closed.
        let bad = FluxForm::<f64>::new(4, [(vec![0, 0, 0, 1], MultiIndex::new(&[0, 1, 2]).unwrap(), cx(1.0, 0.0))]);
        assert!(matches!(bad, Err(Error::FluxNotClosed(_))));
    }

    #[test]
    fn rescaling() {
        let h = FluxForm::<f64>::constant(3, &[(dx123(), cx(0.0, 0.7))]).unwrap();
        assert_eq!(h.rescale(cx(1.0, 0.0)).unwrap(), h);
        let hi = h.rescale(cx(0.0, 1.0)).unwrap();
        assert_eq!(hi.constant_part()[0].1, cx(-0.7, 0.0));
        assert!(matches!(h.rescale(cx(0.0, 0.0)), Err(Error::ZeroLambda)));
    }

    #[test]
    fn admissibility_classes() {
        let real3 = FluxForm::<f64>::constant(3, &[(dx123(), cx(0.4, 0.0))]).unwrap();
        assert!(real3.is_admissible());
        assert!(!real3.is_pure_imaginary());
        let imag3 = real3.scale(cx(0.0, 1.0));
        assert!(!imag3.is_admissible());
        assert!(imag3.is_pure_imaginary());
        let l = Cx::from_polar(1.0, 0.9);
        let lhs = imag3.rescale(l).unwrap().neg_conjugate();
        let rhs = imag3.rescale(l.conj()).unwrap();
        assert!(lhs.add(&rhs.scale(cx(-1.0, 0.0))).unwrap().max_abs() < 1e-15);
    }
}
