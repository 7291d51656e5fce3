use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::geometry::delaunay;
use super::synthetic::distance_kernel;
use super::KeypointPairSample;
use crate::error::{Error, Result};
use crate::problem::{AffinityDecomposition, GraphInstance, NodeMask, PermutationMatching};

/// Default denominator of the edge-distance kernel for 2-D point graphs.
pub const HOUSE_SCALE: f64 = 2500.0;

const CANVAS: f64 = 256.0;
/// Rotation per unit of frame gap.
const ROTATION_PER_GAP: f64 = PI / 6.0;
/// Jitter standard deviation, in pixels, per unit of frame gap.
const JITTER_PER_GAP: f64 = 8.0;

/// Two frames of a moving point cloud, both triangulated.
///
/// Frame 2 rotates the first `inlier_count` points of frame 1 by
/// `frame_gap · π/6` about the canvas centre and jitters them with standard
/// deviation `frame_gap · 8` pixels. The remaining points are redrawn in each
/// frame independently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointCloudSpec {
    pub n_points: usize,
    pub frame_gap: f64,
    pub inlier_count: usize,
    pub rng_seed: u64,
}

impl Default for PointCloudSpec {
    fn default() -> Self {
        Self { n_points: 30, frame_gap: 0.5, inlier_count: 30, rng_seed: 0 }
    }
}

impl PointCloudSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 3 {
            return Err(Error::Config(format!("need at least 3 points, got {}", self.n_points)));
        }
        if self.inlier_count > self.n_points {
            return Err(Error::Config(format!(
                "inlier_count {} exceeds n_points {}",
                self.inlier_count, self.n_points
            )));
        }
        if !(self.frame_gap >= 0.0) || !self.frame_gap.is_finite() {
            return Err(Error::Config(format!("frame_gap must be nonnegative, got {}", self.frame_gap)));
        }
        Ok(())
    }
}

fn random_point(rng: &mut impl Rng) -> [f64; 2] {
    [rng.random::<f64>() * CANVAS, rng.random::<f64>() * CANVAS]
}

fn triangulated(points: &[[f64; 2]]) -> Result<GraphInstance> {
    let edges = delaunay(points)?;
    GraphInstance::new(points.iter().map(|p| p.to_vec()).collect(), edges)
}

pub fn gen_point_pair(spec: &PointCloudSpec) -> Result<KeypointPairSample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let n = spec.n_points;
    let frame1: Vec<[f64; 2]> = (0..n).map(|_| random_point(&mut rng)).collect();

    let angle = spec.frame_gap * ROTATION_PER_GAP;
    let (sin, cos) = angle.sin_cos();
    let jitter = Normal::new(0.0, spec.frame_gap * JITTER_PER_GAP).map_err(|e| Error::Config(e.to_string()))?;
    let centre = CANVAS / 2.0;
    let moved: Vec<[f64; 2]> = frame1
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i < spec.inlier_count {
                let (x, y) = (p[0] - centre, p[1] - centre);
                [
                    centre + cos * x - sin * y + jitter.sample(&mut rng),
                    centre + sin * x + cos * y + jitter.sample(&mut rng),
                ]
            } else {
                random_point(&mut rng)
            }
        })
        .collect();

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut frame2 = vec![[0.0; 2]; n];
    for (i, &j) in perm.iter().enumerate() {
        frame2[j] = moved[i];
    }

    let mut mask = NodeMask::all(n);
    for i in spec.inlier_count..n {
        mask.rows[i] = false;
        mask.cols[perm[i]] = false;
    }
    Ok(KeypointPairSample {
        g1: triangulated(&frame1)?,
        g2: triangulated(&frame2)?,
        truth: PermutationMatching::new(perm)?,
        mask,
    })
}

/// Edge-pair affinity from 2-D point distances, `exp(−(d_ij − d_ab)² / scale)`.
pub fn house_affinity(sample: &KeypointPairSample, scale: f64) -> Result<AffinityDecomposition> {
    if sample.g1.dim() != 2 || sample.g2.dim() != 2 {
        return Err(Error::invalid("house_affinity expects 2-D point coordinates"));
    }
    distance_kernel(&sample.g1, &sample.g2, scale)
}

/// Reads a whitespace-separated landmark file with one `x y` pair per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn load_landmarks(path: &Path) -> Result<Vec<[f64; 2]>> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("line {}: {e}", lineno + 1)))?;
        match values[..] {
            [x, y] => points.push([x, y]),
            _ => {
                return Err(Error::invalid(format!(
                    "line {}: expected 2 columns, found {}",
                    lineno + 1,
                    values.len()
                )))
            }
        }
    }
    Ok(points)
}
