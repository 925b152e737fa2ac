//! Discrete probability measures on R^n: weighted point clouds with weights
//! normalized to sum 1 at construction.
//!
//! Measures are immutable; every operation returns a new value. Atoms are
//! never merged, even when a pushforward maps two of them to the same point,
//! so downstream 1D sorting can rely on a stable input order.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A finitely supported probability measure: `len()` atoms in R^`dim()`,
/// stored as flat row-major coordinates plus one weight per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from points and optional weights.
    ///
    /// Missing weights default to uniform 1/m; given weights must be
    /// nonnegative, not all zero, and are normalized to sum 1.
    pub fn from_points(points: &[Vec<f64>], weights: Option<&[f64]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords, weights.map(|w| w.to_vec()))
    }

    /// Builds a measure from flat row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::EmptyMeasure);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        let m = coords.len() / dim;
        let weights = match weights {
            None => vec![1.0 / m as f64; m],
            Some(w) => {
                if w.len() != m {
                    return Err(Error::LengthMismatch {
                        points: m,
                        weights: w.len(),
                    });
                }
                for (i, &wi) in w.iter().enumerate() {
                    if !wi.is_finite() || wi < 0.0 {
                        return Err(Error::NegativeWeight {
                            index: i,
                            weight: wi,
                        });
                    }
                }
                let total: f64 = w.iter().sum();
                if total <= 0.0 {
                    return Err(Error::ZeroTotalWeight);
                }
                w.iter().map(|wi| wi / total).collect()
            }
        };
        Ok(Self {
            dim,
            coords,
            weights,
        })
    }

    /// Internal constructor for operations that carry already-normalized
    /// weights over unchanged (pushforward, translate, projections).
    pub(crate) fn from_normalized_parts(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len(), weights.len() * dim);
        Self {
            dim,
            coords,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one atom
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Shifts every atom by `b`; weights unchanged.
    pub fn translate(&self, b: &[f64]) -> Result<Self> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(b).map(|(x, bi)| x + bi))
            .collect();
        Ok(Self::from_normalized_parts(
            self.dim,
            coords,
            self.weights.clone(),
        ))
    }

    /// Pushforward by `f`: atoms are relocated, weights carried over, and
    /// coincident images are kept as separate atoms.
    pub fn pushforward<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut coords = Vec::with_capacity(self.coords.len());
        for p in self.points() {
            let q = f(p);
            if q.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: q.len(),
                });
            }
            if q.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFiniteCoordinate);
            }
            coords.extend_from_slice(&q);
        }
        Ok(Self::from_normalized_parts(
            self.dim,
            coords,
            self.weights.clone(),
        ))
    }

    /// Second moment Σ_i w_i ‖x_i‖².
    pub fn second_moment(&self) -> f64 {
        self.points()
            .zip(&self.weights)
            .map(|(p, w)| w * p.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    /// Weighted mean Σ_i w_i x_i.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (p, w) in self.points().zip(&self.weights) {
            for (mi, xi) in m.iter_mut().zip(p) {
                *mi += w * xi;
            }
        }
        m
    }
}

/// Serializes a measure in the point-cloud text format: a `dim=<n>` header,
/// then one `x1,...,xn,w` line per atom.
pub fn format_point_cloud(m: &DiscreteMeasure) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dim={}", m.dim());
    for (p, w) in m.points().zip(m.weights()) {
        for x in p {
            let _ = write!(out, "{x},");
        }
        let _ = writeln!(out, "{w}");
    }
    out
}

/// Parses the point-cloud text format. The weight column is optional; when
/// absent, atoms get uniform weights. Blank lines and `#` comments are
/// skipped.
pub fn parse_point_cloud(text: &str) -> Result<DiscreteMeasure> {
    let malformed = |detail: String| Error::MalformedInput {
        format: "point-cloud",
        detail,
    };
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| malformed("empty input".into()))?;
    let dim: usize = header
        .strip_prefix("dim=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| malformed(format!("expected `dim=<n>` header, got `{header}`")))?;
    if dim == 0 {
        return Err(malformed("dimension must be positive".into()));
    }

    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut has_weights: Option<bool> = None;
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| malformed(format!("atom line {}: {e}", lineno + 1)))?;
        let weighted = match fields.len() {
            l if l == dim => false,
            l if l == dim + 1 => true,
            l => {
                return Err(malformed(format!(
                    "atom line {}: expected {dim} or {} fields, got {l}",
                    lineno + 1,
                    dim + 1
                )))
            }
        };
        if *has_weights.get_or_insert(weighted) != weighted {
            return Err(malformed("mixed weighted and unweighted atom lines".into()));
        }
        if weighted {
            weights.push(fields[dim]);
            points.push(fields[..dim].to_vec());
        } else {
            points.push(fields);
        }
    }
    let weights = if has_weights == Some(true) {
        Some(weights)
    } else {
        None
    };
    DiscreteMeasure::from_points(&points, weights.as_deref())
}

pub fn read_point_cloud<P: AsRef<Path>>(path: P) -> Result<DiscreteMeasure> {
    parse_point_cloud(&std::fs::read_to_string(path)?)
}

pub fn write_point_cloud<P: AsRef<Path>>(path: P, m: &DiscreteMeasure) -> Result<()> {
    Ok(std::fs::write(path, format_point_cloud(m))?)
}
