//! Slice-matching maps: apply the 1D optimal transport along the first j
//! columns of an orthogonal frame and the identity along the rest,
//!
//!   T^j(x) = Σ_{i≤j} T_{σ^{θ_i}}^{μ^{θ_i}}(x·θ_i) θ_i + Σ_{i>j} (x·θ_i) θ_i
//!          = x + Σ_{i≤j} (T_i(x·θ_i) − x·θ_i) θ_i.
//!
//! j = 1 is the single-slice matching map, j = n the matrix-slice one. Every
//! such map is compatible with the frame: componentwise nondecreasing in the
//! frame coordinates, hence a Brenier map.

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::ot1d::SliceTransport1D;
use crate::slicing::{dot, OrthogonalFrame};

/// A j-slice matching map from a source to a target measure, built once and
/// then cheaply evaluable. Holds the per-direction 1D transports along the
/// matched columns and the source it was built from.
#[derive(Debug, Clone)]
pub struct SliceMatchingMap {
    frame: OrthogonalFrame,
    j: usize,
    transports: Vec<SliceTransport1D>,
    /// projections[i][a] = (source atom a)·θ_{i+1}, cached for atom-level use
    projections: Vec<Vec<f64>>,
    source: DiscreteMeasure,
}

impl SliceMatchingMap {
    /// Builds the map for `1 ≤ j ≤ n` matched directions.
    pub fn build(
        src: &DiscreteMeasure,
        tgt: &DiscreteMeasure,
        frame: &OrthogonalFrame,
        j: usize,
    ) -> Result<Self> {
        let n = src.dim();
        if tgt.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: tgt.dim(),
            });
        }
        if frame.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: frame.dim(),
            });
        }
        if j == 0 || j > n {
            return Err(Error::SliceCountOutOfRange { j, n });
        }
        let mut transports = Vec::with_capacity(j);
        let mut projections = Vec::with_capacity(j);
        for i in 0..j {
            let theta = frame.column(i);
            let a: Vec<f64> = src.points().map(|p| dot(p, theta)).collect();
            let b: Vec<f64> = tgt.points().map(|p| dot(p, theta)).collect();
            transports.push(SliceTransport1D::from_projections(
                &a,
                src.weights(),
                &b,
                tgt.weights(),
            ));
            projections.push(a);
        }
        Ok(Self {
            frame: frame.clone(),
            j,
            transports,
            projections,
            source: src.clone(),
        })
    }

    pub fn frame(&self) -> &OrthogonalFrame {
        &self.frame
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.source
    }

    pub fn transports(&self) -> &[SliceTransport1D] {
        &self.transports
    }

    /// Sum over matched directions of the squared slice distances
    /// Σ_{i≤j} W₂²(σ^{θ_i}, μ^{θ_i}).
    pub fn slice_loss_sum(&self) -> f64 {
        self.transports
            .iter()
            .map(|t| {
                let w = t.w2();
                w * w
            })
            .sum()
    }

    /// Evaluates the map at an arbitrary point of R^n using the pointwise
    /// composed CDF/quantile formula along each matched direction.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.frame.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.frame.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        let mut y = x.to_vec();
        for (i, t) in self.transports.iter().enumerate() {
            let theta = self.frame.column(i);
            let c = dot(x, theta);
            let delta = t.eval(c) - c;
            for (yd, td) in y.iter_mut().zip(theta) {
                *yd += delta * td;
            }
        }
        Ok(y)
    }

    /// Image of source atom `a`, using the atom-level 1D transports (stable
    /// under coincident projections, where a pointwise map could not split).
    pub fn apply_atom(&self, a: usize) -> Vec<f64> {
        let mut y = self.source.point(a).to_vec();
        for (i, t) in self.transports.iter().enumerate() {
            let theta = self.frame.column(i);
            let delta = t.atom_image(a) - self.projections[i][a];
            for (yd, td) in y.iter_mut().zip(theta) {
                *yd += delta * td;
            }
        }
        y
    }

    /// Like [`Self::apply_atom`] but moving only a `gamma` fraction of the
    /// displacement: (1−γ)x + γT^j(x).
    pub fn apply_atom_partial(&self, a: usize, gamma: f64) -> Vec<f64> {
        let mut y = self.source.point(a).to_vec();
        for (i, t) in self.transports.iter().enumerate() {
            let theta = self.frame.column(i);
            let delta = gamma * (t.atom_image(a) - self.projections[i][a]);
            for (yd, td) in y.iter_mut().zip(theta) {
                *yd += delta * td;
            }
        }
        y
    }

    /// Pushforward of the source by the map. For equal-count uniform source
    /// and target the θ_i-projections of the result equal the target's
    /// projections as multisets for every matched i.
    pub fn pushforward_matched(&self) -> DiscreteMeasure {
        let dim = self.source.dim();
        let mut coords = Vec::with_capacity(self.source.len() * dim);
        for a in 0..self.source.len() {
            coords.extend_from_slice(&self.apply_atom(a));
        }
        DiscreteMeasure::from_normalized_parts(dim, coords, self.source.weights().to_vec())
    }

    /// Verifies on the source support that the map has the compatible form
    /// x ↦ Σ_i f_i(x·θ_i) θ_i with every f_i nondecreasing: matched slots use
    /// the monotone 1D transport, unmatched slots the identity.
    pub fn is_compatible(&self) -> CompatibilityReport {
        let n = self.frame.dim();
        let m = self.source.len();
        let images: Vec<Vec<f64>> = (0..m).map(|a| self.apply_atom(a)).collect();
        let mut directions = Vec::with_capacity(n);
        for i in 0..n {
            let theta = self.frame.column(i);
            let matched = i < self.j;
            let proj: Vec<f64> = if matched {
                self.projections[i].clone()
            } else {
                self.source.points().map(|p| dot(p, theta)).collect()
            };
            // f_i measured from the actual images of the support
            let along: Vec<f64> = images.iter().map(|y| dot(y, theta)).collect();
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| proj[a].partial_cmp(&proj[b]).unwrap());
            let mut max_inversion = 0.0f64;
            for w in order.windows(2) {
                max_inversion = max_inversion.max(along[w[0]] - along[w[1]]);
            }
            let identity_residual = if matched {
                0.0
            } else {
                proj.iter()
                    .zip(&along)
                    .map(|(p, q)| (q - p).abs())
                    .fold(0.0, f64::max)
            };
            directions.push(DirectionWitness {
                index: i,
                matched,
                monotone: max_inversion <= COMPAT_TOL,
                max_inversion,
                identity_residual,
            });
        }
        let compatible = directions
            .iter()
            .all(|d| d.monotone && d.identity_residual <= COMPAT_TOL);
        CompatibilityReport {
            compatible,
            directions,
        }
    }
}

/// Slack for the compatibility witnesses; covers the rounding introduced by
/// projecting reconstructed points back onto the frame.
const COMPAT_TOL: f64 = 1e-9;

/// Per-direction witnesses produced by [`SliceMatchingMap::is_compatible`].
#[derive(Debug, Clone)]
pub struct CompatibilityReport {
    pub compatible: bool,
    pub directions: Vec<DirectionWitness>,
}

#[derive(Debug, Clone)]
pub struct DirectionWitness {
    pub index: usize,
    pub matched: bool,
    /// sorted source projections map to nondecreasing images
    pub monotone: bool,
    /// largest observed order inversion (≤ 0 means none)
    pub max_inversion: f64,
    /// max |f_i(c) − c| over the support for unmatched directions
    pub identity_residual: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slicing::{project, w2_1d, DirectionSampler};

    fn uniform(points: &[Vec<f64>]) -> DiscreteMeasure {
        DiscreteMeasure::from_points(points, None).unwrap()
    }

    fn sorted_projection(m: &DiscreteMeasure, theta: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = m.points().map(|p| dot(p, theta)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn identity_on_support_when_src_equals_tgt() {
        let m = uniform(&[vec![0.2, 1.0, -0.4], vec![1.5, 0.0, 2.0], vec![0.0, 0.0, 0.0]]);
        let frame = DirectionSampler::haar(3).sample_haar(3).unwrap();
        for j in 1..=3 {
            let map = SliceMatchingMap::build(&m, &m, &frame, j).unwrap();
            for a in 0..m.len() {
                assert_eq!(map.apply_atom(a), m.point(a).to_vec());
            }
        }
    }

    #[test]
    fn identity_frame_single_slice_assignment() {
        let src = uniform(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let tgt = uniform(&[vec![5.0, 0.0], vec![6.0, 1.0]]);
        let map = SliceMatchingMap::build(&src, &tgt, &OrthogonalFrame::identity(2), 1).unwrap();
        assert_eq!(map.apply_atom(0), vec![5.0, 0.0]);
        assert_eq!(map.apply_atom(1), vec![6.0, 1.0]);
    }

    #[test]
    fn identity_frame_full_matching() {
        let src = uniform(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let tgt = uniform(&[vec![10.0, 20.0], vec![11.0, 21.0]]);
        let map = SliceMatchingMap::build(&src, &tgt, &OrthogonalFrame::identity(2), 2).unwrap();
        assert_eq!(map.apply_atom(0), vec![10.0, 20.0]);
        assert_eq!(map.apply_atom(1), vec![11.0, 21.0]);
    }

    #[test]
    fn apply_off_support_keeps_orthogonal_component() {
        let src = uniform(&[vec![0.0, 0.0]]);
        let tgt = uniform(&[vec![4.0, 0.0]]);
        let map = SliceMatchingMap::build(&src, &tgt, &OrthogonalFrame::identity(2), 1).unwrap();
        assert_eq!(map.apply(&[0.0, 0.0]).unwrap(), vec![4.0, 0.0]);
        assert_eq!(map.apply(&[0.0, 7.0]).unwrap(), vec![4.0, 7.0]);
        assert!(map.apply(&[f64::NAN, 0.0]).is_err());
        assert!(map.apply(&[0.0]).is_err());
    }

    #[test]
    fn build_rejects_bad_inputs() {
        let src = uniform(&[vec![0.0, 0.0]]);
        let tgt3 = uniform(&[vec![0.0, 0.0, 0.0]]);
        let frame = OrthogonalFrame::identity(2);
        assert!(SliceMatchingMap::build(&src, &tgt3, &frame, 1).is_err());
        assert!(SliceMatchingMap::build(&src, &src, &frame, 0).is_err());
        assert!(SliceMatchingMap::build(&src, &src, &frame, 3).is_err());
        assert!(SliceMatchingMap::build(&src, &src, &OrthogonalFrame::identity(3), 1).is_err());
    }

    #[test]
    fn projection_commutation() {
        // (T^j x)·θ_i = T_i(x·θ_i) for i ≤ j and = x·θ_i for i > j
        let mut sampler = DirectionSampler::haar(99);
        let src = uniform(&[vec![0.3, -0.2, 1.1], vec![0.9, 0.5, -1.0], vec![2.0, 0.0, 0.3]]);
        let tgt = uniform(&[vec![1.0, 1.0, 0.0], vec![-0.5, 2.0, 0.7], vec![0.1, -1.2, 1.5]]);
        for j in 1..=3 {
            let frame = sampler.sample_haar(3).unwrap();
            let map = SliceMatchingMap::build(&src, &tgt, &frame, j).unwrap();
            for a in 0..src.len() {
                let x = src.point(a);
                let y = map.apply(x).unwrap();
                for i in 0..3 {
                    let theta = frame.column(i);
                    let got = dot(&y, theta);
                    let want = if i < j {
                        map.transports()[i].eval(dot(x, theta))
                    } else {
                        dot(x, theta)
                    };
                    assert!((got - want).abs() <= 1e-12, "j={j} i={i}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn slice_matching_multisets() {
        // projections along matched directions match the target exactly for
        // equal-count uniform inputs; unmatched directions keep the source
        let mut sampler = DirectionSampler::haar(7);
        let src = uniform(&[vec![0.0, 0.4], vec![1.0, -0.2], vec![-1.0, 0.9], vec![0.5, 2.0]]);
        let tgt = uniform(&[vec![3.0, 1.0], vec![0.2, 0.0], vec![1.4, -2.0], vec![-0.3, 0.8]]);
        for j in 1..=2 {
            let frame = sampler.sample_haar(2).unwrap();
            let map = SliceMatchingMap::build(&src, &tgt, &frame, j).unwrap();
            let result = map.pushforward_matched();
            for i in 0..2 {
                let theta = frame.column(i);
                let got = sorted_projection(&result, theta);
                let want = if i < j {
                    sorted_projection(&tgt, theta)
                } else {
                    sorted_projection(&src, theta)
                };
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() <= 1e-12, "j={j} i={i}");
                }
            }
        }
    }

    #[test]
    fn full_matching_identity_frame_exact_multisets() {
        let src = uniform(&[vec![0.9, 0.1], vec![0.2, 0.8], vec![0.5, 0.5]]);
        let tgt = uniform(&[vec![0.0, 0.3], vec![0.7, 0.6], vec![0.4, 0.9]]);
        let map = SliceMatchingMap::build(&src, &tgt, &OrthogonalFrame::identity(2), 2).unwrap();
        let result = map.pushforward_matched();
        for axis in 0..2 {
            let e = [f64::from(axis == 0), f64::from(axis == 1)];
            assert_eq!(sorted_projection(&result, &e), sorted_projection(&tgt, &e));
        }
    }

    #[test]
    fn pushforward_of_identity_map_is_source() {
        let m = uniform(&[vec![0.1, 0.2], vec![1.0, -1.0]]);
        let frame = DirectionSampler::haar(51).sample_haar(2).unwrap();
        let map = SliceMatchingMap::build(&m, &m, &frame, 2).unwrap();
        assert_eq!(map.pushforward_matched(), m);
    }

    #[test]
    fn weighted_matching_does_not_increase_slice_distance() {
        // atoms cannot split, so matched projections only approximate the
        // target; the approximation must never be worse than the source
        let mut sampler = DirectionSampler::haar(4242);
        for trial in 0..50 {
            let mut rng_pts = DirectionSampler::uniform_sphere(trial as u64 + 1);
            let rand_pts = |k: usize, s: &mut DirectionSampler| -> Vec<Vec<f64>> {
                (0..k).map(|_| s.sample_sphere(2).unwrap()).collect()
            };
            let src = DiscreteMeasure::from_points(
                &rand_pts(6, &mut rng_pts),
                Some(&[1.0, 2.0, 3.0, 1.0, 0.5, 2.5]),
            )
            .unwrap();
            let tgt = DiscreteMeasure::from_points(
                &rand_pts(4, &mut rng_pts),
                Some(&[2.0, 1.0, 1.0, 4.0]),
            )
            .unwrap();
            let frame = sampler.sample_haar(2).unwrap();
            let map = SliceMatchingMap::build(&src, &tgt, &frame, 2).unwrap();
            let result = map.pushforward_matched();
            for i in 0..2 {
                let theta = frame.column(i);
                let before = w2_1d(&project(&src, theta).unwrap(), &project(&tgt, theta).unwrap())
                    .unwrap();
                let after = w2_1d(
                    &project(&result, theta).unwrap(),
                    &project(&tgt, theta).unwrap(),
                )
                .unwrap();
                assert!(
                    after <= before + 1e-12,
                    "trial {trial} direction {i}: {after} > {before}"
                );
            }
        }
    }

    #[test]
    fn compatibility_report() {
        let src = uniform(&[vec![0.0, 0.4], vec![1.0, -0.2], vec![-1.0, 0.9]]);
        let tgt = uniform(&[vec![3.0, 1.0], vec![0.2, 0.0], vec![1.4, -2.0]]);
        let frame = DirectionSampler::haar(8).sample_haar(2).unwrap();
        let map = SliceMatchingMap::build(&src, &tgt, &frame, 1).unwrap();
        let report = map.is_compatible();
        assert!(report.compatible);
        assert!(report.directions[0].matched);
        assert!(report.directions[0].monotone);
        assert!(!report.directions[1].matched);
        assert!(report.directions[1].identity_residual <= 1e-12);
    }
}
