use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use super::{FiberBasis, FlatMetric, MultiIndex, Parity};
use crate::bundle::FlatBundle;
use crate::error::{Error, Result};
use crate::scalar::{CxOps, Cx, Real};

/// Fourier mode `e^{2πi(k+θ_a)·x}` of channel `a` of a flat bundle.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Mode {
    pub k: Vec<i32>,
    pub channel: usize,
}

impl Mode {
    pub fn new(k: Vec<i32>, channel: usize) -> Self {
        Mode { k, channel }
    }

    pub fn zero(n: usize) -> Self {
        Mode { k: vec![0; n], channel: 0 }
    }

    pub fn sup_norm(&self) -> usize {
        self.k.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn shifted(&self, q: &[i32]) -> Self {
        Mode {
            k: self.k.iter().zip(q).map(|(a, b)| a + b).collect(),
            channel: self.channel,
        }
    }
}

/// All lattice vectors with `‖k‖_∞ ≤ radius`, lexicographic.
pub fn lattice_box(n: usize, radius: usize) -> Vec<Vec<i32>> {
    let r = radius as i32;
    let side = 2 * radius + 1;
    let total = side.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut k = vec![0i32; n];
            for slot in k.iter_mut().rev() {
                *slot = (idx % side) as i32 - r;
                idx /= side;
            }
            k
        })
        .collect()
}

/// Torus, bundle and truncation radius shared by a family of forms.
#[derive(Clone, Debug, PartialEq)]
pub struct Ambient<T: Real> {
    metric: FlatMetric<T>,
    bundle: FlatBundle<T>,
    radius: usize,
}

impl<T: Real> Ambient<T> {
    pub fn new(metric: FlatMetric<T>, bundle: FlatBundle<T>, radius: usize) -> Result<Arc<Self>> {
        if metric.dim() != bundle.dim() {
            return Err(Error::AmbientMismatch(format!(
                "metric dimension {} vs bundle dimension {}",
                metric.dim(),
                bundle.dim()
            )));
        }
        Ok(Arc::new(Ambient { metric, bundle, radius }))
    }

    /// Ambient of scalar (trivial line bundle) forms.
    pub fn scalar(metric: FlatMetric<T>, radius: usize) -> Arc<Self> {
        let n = metric.dim();
        Arc::new(Ambient { metric, bundle: FlatBundle::trivial(n, 1), radius })
    }

    pub fn metric(&self) -> &FlatMetric<T> {
        &self.metric
    }

    pub fn bundle(&self) -> &FlatBundle<T> {
        &self.bundle
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn is_scalar(&self) -> bool {
        self.bundle.rank() == 1 && self.bundle.is_trivial()
    }

    pub fn with_radius(&self, radius: usize) -> Arc<Self> {
        Arc::new(Ambient { radius, ..self.clone() })
    }

    pub fn with_bundle(&self, bundle: FlatBundle<T>) -> Arc<Self> {
        Arc::new(Ambient { bundle, ..self.clone() })
    }

    fn same_space(&self, other: &Self) -> bool {
        self.metric == other.metric && self.bundle == other.bundle
    }
}

/// Bundle-valued differential form with finitely many Fourier modes.
#[derive(Clone, Debug)]
pub struct Form<T: Real> {
    ambient: Arc<Ambient<T>>,
    terms: BTreeMap<(Mode, MultiIndex), Cx<T>>,
}

impl<T: Real> Form<T> {
    pub fn zero(ambient: Arc<Ambient<T>>) -> Self {
        Form { ambient, terms: BTreeMap::new() }
    }

    /// Constant form in the lowest mode of channel 0.
    pub fn constant(ambient: Arc<Ambient<T>>, coefficients: &[(MultiIndex, Cx<T>)]) -> Result<Self> {
        let n = ambient.dim();
        let mut f = Form::zero(ambient);
        for &(i, c) in coefficients {
            f.add_term(Mode::zero(n), i, c)?;
        }
        Ok(f)
    }

    pub fn from_terms(
        ambient: Arc<Ambient<T>>,
        terms: impl IntoIterator<Item = (Mode, MultiIndex, Cx<T>)>,
    ) -> Result<Self> {
        let mut f = Form::zero(ambient);
        for (m, i, c) in terms {
            f.add_term(m, i, c)?;
        }
        Ok(f)
    }

    /// Adds `c · e_mode dx_I`.
    pub fn add_term(&mut self, mode: Mode, index: MultiIndex, c: Cx<T>) -> Result<()> {
        let n = self.ambient.dim();
        if mode.k.len() != n || !index.fits(n) || mode.channel >= self.ambient.bundle().rank() {
            return Err(Error::AmbientMismatch(format!("term {mode:?} {index:?} does not fit")));
        }
        if mode.sup_norm() > self.ambient.radius() {
            return Err(Error::TruncationOverflow { mode: mode.k, radius: self.ambient.radius() });
        }
        *self.terms.entry((mode, index)).or_insert_with(|| Cx::new(T::zero(), T::zero())) += c;
        Ok(())
    }

    pub fn ambient(&self) -> &Arc<Ambient<T>> {
        &self.ambient
    }

    pub fn dim(&self) -> usize {
        self.ambient.dim()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mode, MultiIndex, Cx<T>)> {
        self.terms.iter().map(|((m, i), c)| (m, *i, *c))
    }

    pub fn coefficient(&self, mode: &Mode, index: MultiIndex) -> Cx<T> {
        self.terms
            .get(&(mode.clone(), index))
            .copied()
            .unwrap_or_else(|| Cx::new(T::zero(), T::zero()))
    }

    pub fn max_abs(&self) -> T {
        self.terms.values().fold(T::zero(), |a, c| a.max(c.norm()))
    }

    pub fn max_mode(&self) -> usize {
        self.terms.keys().map(|(m, _)| m.sup_norm()).max().unwrap_or(0)
    }

    pub fn component(&self, degree: usize) -> Self {
        self.filter(|i| i.degree() == degree)
    }

    pub fn parity_component(&self, parity: Parity) -> Self {
        self.filter(|i| parity.admits(i.degree()))
    }

    fn filter(&self, keep: impl Fn(MultiIndex) -> bool) -> Self {
        Form {
            ambient: self.ambient.clone(),
            terms: self.terms.iter().filter(|((_, i), _)| keep(*i)).map(|(k, c)| (k.clone(), *c)).collect(),
        }
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        Form {
            ambient: self.ambient.clone(),
            terms: self.terms.iter().map(|(k, c)| (k.clone(), *c * s)).collect(),
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.ambient.same_space(&other.ambient) {
            Ok(())
        } else {
            Err(Error::AmbientMismatch("forms live on different tori or bundles".into()))
        }
    }

    /// Sum; the result keeps the larger truncation radius.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let ambient = if other.ambient.radius() > self.ambient.radius() {
            other.ambient.clone()
        } else {
            self.ambient.clone()
        };
        let mut terms = self.terms.clone();
        for (k, c) in &other.terms {
            *terms.entry(k.clone()).or_insert_with(|| Cx::new(T::zero(), T::zero())) += *c;
        }
        Ok(Form { ambient, terms })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Cx::new(-T::one(), T::zero())))
    }

    /// Wedge product. At most one factor may carry a nontrivial bundle.
    pub fn wedge(&self, other: &Self, out_radius: usize) -> Result<Self> {
        if self.ambient.metric() != other.ambient.metric() {
            return Err(Error::AmbientMismatch("wedge of forms on different tori".into()));
        }
        let target = match (self.ambient.is_scalar(), other.ambient.is_scalar()) {
            (_, true) => self.ambient.with_radius(out_radius),
            (true, false) => other.ambient.with_radius(out_radius),
            (false, false) => {
                return Err(Error::AmbientMismatch("wedge of two bundle-valued forms".into()))
            }
        };
        let mut out = Form::zero(target);
        for ((ma, ia), ca) in &self.terms {
            for ((mb, ib), cb) in &other.terms {
                if let Some((s, i)) = ia.wedge(*ib) {
                    let channel = ma.channel.max(mb.channel);
                    let mode = Mode::new(ma.k.iter().zip(&mb.k).map(|(x, y)| x + y).collect(), channel);
                    let c = *ca * *cb;
                    out.add_term(mode, i, if s > 0 { c } else { -c })?;
                }
            }
        }
        Ok(out)
    }

    pub fn hodge_star(&self) -> Self {
        let metric = self.ambient.metric();
        let n = metric.dim();
        let mut terms = BTreeMap::new();
        for ((m, i), c) in &self.terms {
            for j in MultiIndex::of_degree(n, i.degree()) {
                let minor = metric.form_inner(*i, j);
                if minor == T::zero() {
                    continue;
                }
                let jc = j.complement(n);
                let (s, _) = j.wedge(jc).unwrap();
                let v = metric.volume() * minor;
                let v = if s > 0 { v } else { -v };
                *terms.entry((m.clone(), jc)).or_insert_with(|| Cx::new(T::zero(), T::zero())) +=
                    *c * Cx::new(v, T::zero());
            }
        }
        Form { ambient: self.ambient.clone(), terms }
    }

    /// `⟨a, b⟩ = ∫ a ∧ ⋆ b̄`, conjugate-linear in `b`.
    pub fn inner_product(&self, other: &Self) -> Result<Cx<T>> {
        self.check_same(other)?;
        let metric = self.ambient.metric();
        let mut acc = Cx::new(T::zero(), T::zero());
        for ((m, i), a) in &self.terms {
            for j in MultiIndex::of_degree(metric.dim(), i.degree()) {
                if let Some(b) = other.terms.get(&(m.clone(), j)) {
                    let g = metric.volume() * metric.form_inner(*i, j);
                    acc += *a * b.conj() * Cx::new(g, T::zero());
                }
            }
        }
        Ok(acc)
    }

    pub fn norm(&self) -> T {
        self.inner_product(self).expect("same ambient").re.max(T::zero()).sqrt()
    }

    /// Complex conjugate, a form in the dual bundle.
    pub fn conjugate(&self) -> Self {
        let bundle = self.ambient.bundle();
        let shift = usize::from(!bundle.is_trivial());
        let ambient = Arc::new(Ambient {
            bundle: bundle.dual(),
            radius: self.ambient.radius + shift,
            metric: self.ambient.metric.clone(),
        });
        let terms = self
            .terms
            .iter()
            .map(|((m, i), c)| ((bundle.conjugate_mode(m), *i), c.conj()))
            .collect();
        Form { ambient, terms }
    }

    /// Coefficient vectors per mode in the given fiber basis.
    pub fn mode_vectors(&self, fiber: &FiberBasis) -> BTreeMap<Mode, DVector<Cx<T>>> {
        let mut out: BTreeMap<Mode, DVector<Cx<T>>> = BTreeMap::new();
        for ((m, i), c) in &self.terms {
            if let Some(p) = fiber.position(*i) {
                out.entry(m.clone()).or_insert_with(|| DVector::zeros(fiber.len()))[p] += *c;
            }
        }
        out
    }

    pub fn from_mode_vector(
        ambient: Arc<Ambient<T>>,
        mode: &Mode,
        fiber: &FiberBasis,
        v: &DVector<Cx<T>>,
    ) -> Result<Self> {
        let mut f = Form::zero(ambient);
        for (p, i) in fiber.indices().iter().enumerate() {
            if v[p].norm() > T::zero() {
                f.add_term(mode.clone(), *i, v[p])?;
            }
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;
    use nalgebra::DMatrix;

    fn unit(n: usize) -> Arc<Ambient<f64>> {
        Ambient::scalar(FlatMetric::euclidean(n), 4)
    }

    fn dx(amb: &Arc<Ambient<f64>>, axes: &[usize], c: Cx<f64>) -> Form<f64> {
        Form::constant(amb.clone(), &[(MultiIndex::new(axes).unwrap(), c)]).unwrap()
    }

    #[test]
    fn wedge_basis_and_unit() {
        let a = unit(3);
        let w = dx(&a, &[0], cx(1.0, 0.0)).wedge(&dx(&a, &[1], cx(1.0, 0.0)), 4).unwrap();
        assert_eq!(w.coefficient(&Mode::zero(3), MultiIndex::new(&[0, 1]).unwrap()), cx(1.0, 0.0));
        let one = dx(&a, &[], cx(1.0, 0.0));
        let omega = dx(&a, &[0, 2], cx(0.5, -2.0));
        let back = omega.wedge(&one, 4).unwrap();
        assert!(back.sub(&omega).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn wedge_by_bilinearity() {
        let a = unit(2);
        let p = dx(&a, &[0], cx(1.0, 0.0)).add(&dx(&a, &[1], cx(1.0, 0.0))).unwrap();
        let m = dx(&a, &[0], cx(1.0, 0.0)).sub(&dx(&a, &[1], cx(1.0, 0.0))).unwrap();
        let w = p.wedge(&m, 4).unwrap();
        assert_eq!(w.coefficient(&Mode::zero(2), MultiIndex::top(2)), cx(-2.0, 0.0));
    }

    #[test]
    fn truncation_overflow() {
        let a = Ambient::scalar(FlatMetric::<f64>::euclidean(1), 1);
        let f = Form::from_terms(a.clone(), [(Mode::new(vec![1], 0), MultiIndex::empty(), cx(1.0, 0.0))]).unwrap();
        assert!(matches!(f.wedge(&f, 1), Err(Error::TruncationOverflow { .. })));
        assert!(f.wedge(&f, 2).is_ok());
    }

    #[test]
    fn star_examples() {
        let a = unit(3);
        let s = dx(&a, &[0], cx(1.0, 0.0)).hodge_star();
        assert_eq!(s.coefficient(&Mode::zero(3), MultiIndex::new(&[1, 2]).unwrap()), cx(1.0, 0.0));
        let b = Ambient::scalar(FlatMetric::diagonal(&[4.0, 1.0]).unwrap(), 2);
        let s = dx(&b, &[0], cx(1.0, 0.0)).hodge_star();
        assert!((s.coefficient(&Mode::zero(2), MultiIndex::axis(1)) - cx(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn characters_orthogonal() {
        let a = unit(3);
        let e1 = Form::from_terms(a.clone(), [(Mode::new(vec![1, 0, 0], 0), MultiIndex::empty(), cx(1.0, 0.0))]).unwrap();
        let e2 = Form::from_terms(a.clone(), [(Mode::new(vec![0, 1, 0], 0), MultiIndex::empty(), cx(1.0, 0.0))]).unwrap();
        assert_eq!(e1.inner_product(&e2).unwrap(), cx(0.0, 0.0));
        let d1 = dx(&a, &[0], cx(1.0, 0.0));
        assert!((d1.inner_product(&d1).unwrap() - cx(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn conjugation() {
        let a = unit(1);
        let f = dx(&a, &[0], cx(0.0, 1.0));
        assert_eq!(f.conjugate().coefficient(&Mode::zero(1), MultiIndex::axis(0)), cx(0.0, -1.0));
        let e = Form::from_terms(a, [(Mode::new(vec![1], 0), MultiIndex::empty(), cx(1.0, 0.0))]).unwrap();
        assert_eq!(e.conjugate().coefficient(&Mode::new(vec![-1], 0), MultiIndex::empty()), cx(1.0, 0.0));
        // θ = 1/3: conj e^{2πi(1/3)x} = e^{2πi(-1 + 2/3)x}.
        let b = Ambient::new(FlatMetric::euclidean(1), FlatBundle::line(&[1.0 / 3.0]), 1).unwrap();
        let f = Form::from_terms(b, [(Mode::zero(1), MultiIndex::empty(), cx(2.0, 1.0))]).unwrap();
        let g = f.conjugate();
        assert_eq!(g.coefficient(&Mode::new(vec![-1], 0), MultiIndex::empty()), cx(2.0, -1.0));
        let xi = g.ambient().bundle().frequency(&[-1], 0)[0];
        assert!((xi + 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn mixed_metric_inner_product() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let metric = FlatMetric::new(g.clone()).unwrap();
        let a = Ambient::scalar(metric, 1);
        let ip = dx(&a, &[0], cx(1.0, 0.0)).inner_product(&dx(&a, &[1], cx(1.0, 0.0))).unwrap();
        let det: f64 = 2.0 - 0.36;
        let expected = -0.6 / det * det.sqrt();
        assert!((ip.re - expected).abs() < 1e-14);
    }
}
