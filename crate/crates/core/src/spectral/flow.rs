use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::operator::OddSignatureOperator;
use crate::error::{Error, Result};
use crate::scalar::Cx;
use crate::twisted::{sorted_eigen, FluxForm, TwistedTorus};

/// Crossings are counted at the level `-FLOW_LEVEL`, so kernel vectors at the endpoints count as positive.
pub const FLOW_LEVEL: f64 = 1e-7;
pub const OVERLAP_THRESHOLD: f64 = 0.7;
const LOCALIZATION: f64 = 1e-6;
const MAX_HALVINGS: u32 = 12;

#[derive(Clone, Debug, Serialize)]
pub struct Crossing {
    pub u: f64,
    /// `+1` for an upward crossing of the level.
    pub sign: i32,
    pub mode: Vec<i32>,
    pub channel: usize,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralFlowResult {
    pub flow: i64,
    pub crossings: Vec<Crossing>,
    pub steps: usize,
    pub overlap_threshold: f64,
    /// Smallest accepted step-to-step eigenvector overlap.
    pub min_overlap: f64,
    pub level: f64,
    pub convention: String,
}

/// Spectral flow of `u ↦ D^E_{uH}`, `u ∈ [0, 1]`.
pub fn spectral_flow(torus: &TwistedTorus<f64>, radius: usize, steps: usize) -> Result<SpectralFlowResult> {
    spectral_flow_between(torus, &FluxForm::zero(torus.dim()), torus.flux(), radius, steps)
}

/// Spectral flow along the affine path `u ↦ D^E_{(1-u)H₀ + uH₁}`.
pub fn spectral_flow_between(
    torus: &TwistedTorus<f64>,
    h0: &FluxForm<f64>,
    h1: &FluxForm<f64>,
    radius: usize,
    steps: usize,
) -> Result<SpectralFlowResult> {
    if steps < 16 {
        return Err(Error::InvalidParameter(format!("at least 16 path steps required, got {steps}")));
    }
    if !h0.is_admissible() || !h1.is_admissible() {
        return Err(Error::FluxInvalid("spectral flow needs admissible endpoint fluxes".into()));
    }
    let op0 = OddSignatureOperator::new(&torus.with_flux(h0.clone())?)?;
    let op1 = OddSignatureOperator::new(&torus.with_flux(h1.clone())?)?;
    // D is affine in the flux, so the path is affine in each block.
    let per_block: Vec<(Vec<Crossing>, f64)> = torus
        .modes(radius)
        .into_par_iter()
        .map(|m| {
            let tracker = BlockPath { d0: op0.block(&m), d1: op1.block(&m) };
            let (found, overlap) = tracker.track(steps)?;
            let crossings = found
                .into_iter()
                .map(|(u, delta)| Crossing {
                    u,
                    sign: -delta.signum() as i32,
                    mode: m.k.clone(),
                    channel: m.channel,
                    multiplicity: delta.unsigned_abs() as usize,
                })
                .collect();
            Ok((crossings, overlap))
        })
        .collect::<Result<_>>()?;
    let min_overlap = per_block.iter().map(|p| p.1).fold(1.0, f64::min);
    let mut crossings: Vec<Crossing> = per_block.into_iter().flat_map(|p| p.0).collect();
    crossings.sort_by(|a, b| a.u.total_cmp(&b.u).then_with(|| a.mode.cmp(&b.mode)).then(a.channel.cmp(&b.channel)));
    let flow = crossings.iter().map(|c| c.sign as i64 * c.multiplicity as i64).sum();
    Ok(SpectralFlowResult {
        flow,
        crossings,
        steps,
        overlap_threshold: OVERLAP_THRESHOLD,
        min_overlap,
        level: -FLOW_LEVEL,
        convention: format!("crossings of the level -{FLOW_LEVEL:e}; endpoint kernel counts as nonnegative"),
    })
}

struct BlockPath {
    d0: DMatrix<Cx<f64>>,
    d1: DMatrix<Cx<f64>>,
}

impl BlockPath {
    fn at(&self, u: f64) -> DMatrix<Cx<f64>> {
        self.d0.scale(1.0 - u) + self.d1.scale(u)
    }

    fn count(&self, u: f64) -> i64 {
        sorted_eigen(&self.at(u)).0.iter().filter(|&&v| v < -FLOW_LEVEL).count() as i64
    }

    /// Walks the grid with overlap-checked substeps; returns `(u, Δcount)` per localized crossing.
    fn track(&self, steps: usize) -> Result<(Vec<(f64, i64)>, f64)> {
        let mut found = Vec::new();
        let mut worst = 1.0f64;
        let (mut u, mut prev) = (0.0, sorted_eigen(&self.at(0.0)));
        let mut prev_count = count_below(&prev.0);
        let h = 1.0 / steps as f64;
        for j in 1..=steps {
            let target = j as f64 * h;
            while u < target - 1e-15 {
                let mut step = target - u;
                let mut halvings = 0;
                let next = loop {
                    let cand = sorted_eigen(&self.at(u + step));
                    let ov = step_overlap(&prev, &cand);
                    if ov >= OVERLAP_THRESHOLD {
                        worst = worst.min(ov);
                        break cand;
                    }
                    if halvings == MAX_HALVINGS {
                        return Err(Error::TrackingAmbiguity { u: u + step, overlap: ov });
                    }
                    step *= 0.5;
                    halvings += 1;
                };
                let next_count = count_below(&next.0);
                if next_count != prev_count {
                    self.localize(u, u + step, prev_count, next_count, &mut found);
                }
                u += step;
                prev = next;
                prev_count = next_count;
            }
        }
        Ok((found, worst))
    }

    fn localize(&self, a: f64, b: f64, ca: i64, cb: i64, found: &mut Vec<(f64, i64)>) {
        if ca == cb {
            return;
        }
        if b - a <= LOCALIZATION {
            found.push((0.5 * (a + b), cb - ca));
            return;
        }
        let mid = 0.5 * (a + b);
        let cm = self.count(mid);
        self.localize(a, mid, ca, cm, found);
        self.localize(mid, b, cm, cb, found);
    }
}

fn count_below(values: &[f64]) -> i64 {
    values.iter().filter(|&&v| v < -FLOW_LEVEL).count() as i64
}

/// Groups ascending eigenvalues into clusters closer than a relative gap.
fn clusters(values: &[f64]) -> Vec<Vec<usize>> {
    let scale = 1.0 + values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match out.last_mut() {
            Some(c) if v - values[*c.last().unwrap()] < 1e-8 * scale => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Worst best-match overlap between eigenvectors of one step and eigenspaces of the other.
///
/// A split of a degenerate eigenspace is matched from the new side, a merge from the old side.
fn step_overlap(prev: &(Vec<f64>, DMatrix<Cx<f64>>), next: &(Vec<f64>, DMatrix<Cx<f64>>)) -> f64 {
    let one_way = |from: &DMatrix<Cx<f64>>, to_vals: &[f64], to: &DMatrix<Cx<f64>>| -> f64 {
        let gram = from.adjoint() * to;
        let groups = clusters(to_vals);
        (0..from.ncols())
            .map(|a| {
                groups
                    .iter()
                    .map(|g| g.iter().map(|&b| gram[(a, b)].norm_sqr()).sum::<f64>().sqrt())
                    .fold(0.0, f64::max)
            })
            .fold(1.0, f64::min)
    };
    one_way(&next.1, &prev.0, &prev.1).max(one_way(&prev.1, &next.0, &next.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::FlatBundle;
    use crate::exterior::{FlatMetric, MultiIndex};
    use crate::scalar::cx;

    fn flux(h: f64) -> FluxForm<f64> {
        FluxForm::constant(3, &[(MultiIndex::top(3), cx(h, 0.0))]).unwrap()
    }

    fn t3(h: f64) -> TwistedTorus<f64> {
        TwistedTorus::new(FlatMetric::euclidean(3), FlatBundle::trivial(3, 1), flux(h)).unwrap()
    }

    #[test]
    fn constant_path_has_no_flow() {
        let r = spectral_flow(&t3(0.0), 2, 16).unwrap();
        assert_eq!(r.flow, 0);
        assert!(r.crossings.is_empty());
    }

    #[test]
    fn small_flux_crosses_in_zero_mode() {
        let r = spectral_flow(&t3(0.6), 2, 32).unwrap();
        assert_eq!(r.flow, -1);
        assert_eq!(r.crossings.len(), 1);
        let c = &r.crossings[0];
        assert_eq!(c.mode, vec![0, 0, 0]);
        assert!(c.u < 1e-5, "{c:?}");
        // Brute force: the k = 0 block is diag(-uh, 0, 0, 0).
        let up = spectral_flow(&t3(-0.6), 2, 32).unwrap();
        assert_eq!(up.flow, 0);
    }

    #[test]
    fn concatenation_and_reversal() {
        let t = t3(0.0);
        let sf = |a: f64, b: f64| spectral_flow_between(&t, &flux(a), &flux(b), 1, 16).unwrap().flow;
        assert_eq!(sf(0.0, 7.0) + sf(7.0, 14.0), sf(0.0, 14.0));
        assert_eq!(sf(0.0, 14.0), -sf(14.0, 0.0));
    }

    #[test]
    fn rejects_short_paths() {
        assert!(matches!(spectral_flow(&t3(0.5), 1, 8), Err(Error::InvalidParameter(_))));
    }
}
