use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{digamma, log_gamma, EstimateWithError};
use crate::error::{Error, Result};

/// Points stored row-major in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::param(format!(
                "{} coordinates cannot be split into points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::Evaluation { at: *bad });
        }
        Ok(Self { dim, coords })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

/// Kozachenko–Leonenko nearest-neighbour entropy estimator.
#[derive(Debug, Clone, Copy)]
pub struct KnnEntropy {
    pub k: usize,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for KnnEntropy {
    fn default() -> Self {
        Self {
            k: 4,
            resamples: 20,
            seed: 0,
        }
    }
}

impl KnnEntropy {
    pub fn estimate(&self, cloud: &PointCloud) -> Result<EstimateWithError> {
        let n = cloud.len();
        if n < 1000 {
            return Err(Error::param(format!("need at least 1000 samples, got {n}")));
        }
        if self.k == 0 || self.k >= n {
            return Err(Error::param(format!("k = {} is out of range", self.k)));
        }
        let d = cloud.dim() as f64;
        let radii = if cloud.dim() == 1 {
            kth_distances_sorted(&cloud.coords, self.k)?
        } else {
            KdTree::build(cloud).kth_distances(self.k)?
        };
        let zeros = radii.iter().filter(|&&r| r == 0.0).count();
        if zeros > 0 {
            return Err(Error::DegenerateSample(format!(
                "{zeros} of {n} points have {} exact duplicates",
                self.k
            )));
        }
        let terms: Vec<f64> = radii.iter().map(|r| d * r.ln()).collect();
        let offset = digamma(n as f64)? - digamma(self.k as f64)? + ln_unit_ball_volume(d)?;
        let value = offset + mean(&terms);

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let boots: Vec<f64> = (0..self.resamples)
            .map(|_| (0..n).map(|_| terms[rng.random_range(0..n)]).sum::<f64>() / n as f64)
            .collect();
        let spread = if boots.len() > 1 {
            let m = mean(&boots);
            (boots.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (boots.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(EstimateWithError::monte_carlo(value, spread))
    }
}

/// Estimate with `k` neighbours and the default bootstrap.
pub fn knn_entropy(cloud: &PointCloud, k: usize, seed: u64) -> Result<EstimateWithError> {
    KnnEntropy {
        k,
        seed,
        ..KnnEntropy::default()
    }
    .estimate(cloud)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn ln_unit_ball_volume(d: f64) -> Result<f64> {
    Ok(0.5 * d * PI.ln() - log_gamma(1.0 + 0.5 * d)?)
}

fn kth_distances_sorted(values: &[f64], k: usize) -> Result<Vec<f64>> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let ties = sorted.windows(2).filter(|w| w[0] == w[1]).count();
    if ties * 100 >= n {
        return Err(Error::DegenerateSample(format!(
            "{ties} exact ties among {n} samples"
        )));
    }
    // Entropy is a symmetric function of the points, so sorted order is fine.
    let radii = (0..n)
        .map(|i| {
            let (mut left, mut right) = (i, i);
            let mut r = 0.0;
            for _ in 0..k {
                let dl = if left > 0 {
                    sorted[i] - sorted[left - 1]
                } else {
                    f64::INFINITY
                };
                let dr = if right + 1 < n {
                    sorted[right + 1] - sorted[i]
                } else {
                    f64::INFINITY
                };
                if dl <= dr {
                    left -= 1;
                    r = dl;
                } else {
                    right += 1;
                    r = dr;
                }
            }
            r
        })
        .collect();
    Ok(radii)
}

const LEAF: usize = 12;

/// Balanced kd-tree stored implicitly in a permutation of the points.
struct KdTree<'a> {
    cloud: &'a PointCloud,
    perm: Vec<usize>,
    axes: Vec<u8>,
}

impl<'a> KdTree<'a> {
    fn build(cloud: &'a PointCloud) -> Self {
        let n = cloud.len();
        let mut tree = KdTree {
            cloud,
            perm: (0..n).collect(),
            axes: vec![0; n],
        };
        tree.split(0, n);
        tree
    }

    fn coord(&self, idx: usize, axis: usize) -> f64 {
        self.cloud.coords[idx * self.cloud.dim + axis]
    }

    fn split(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF {
            return;
        }
        let dim = self.cloud.dim;
        let axis = (0..dim)
            .max_by(|&a, &b| self.spread(lo, hi, a).total_cmp(&self.spread(lo, hi, b)))
            .unwrap_or(0);
        let mid = (lo + hi) / 2;
        let coords = &self.cloud.coords;
        self.perm[lo..hi].select_nth_unstable_by(mid - lo, |&i, &j| {
            coords[i * dim + axis].total_cmp(&coords[j * dim + axis])
        });
        self.axes[mid] = axis as u8;
        self.split(lo, mid);
        self.split(mid + 1, hi);
    }

    fn spread(&self, lo: usize, hi: usize, axis: usize) -> f64 {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in &self.perm[lo..hi] {
            let c = self.coord(i, axis);
            min = min.min(c);
            max = max.max(c);
        }
        max - min
    }

    fn kth_distances(&self, k: usize) -> Result<Vec<f64>> {
        let n = self.cloud.len();
        let mut best = Neighbours::new(k);
        let mut radii = Vec::with_capacity(n);
        let mut first_zero = 0usize;
        for i in 0..n {
            best.reset();
            self.search(0, n, i, &mut best);
            if best.nearest() == 0.0 {
                first_zero += 1;
            }
            radii.push(best.worst().sqrt());
        }
        if first_zero * 100 >= n {
            return Err(Error::DegenerateSample(format!(
                "{first_zero} of {n} points coincide with another point"
            )));
        }
        Ok(radii)
    }

    fn search(&self, lo: usize, hi: usize, query: usize, best: &mut Neighbours) {
        if hi - lo <= LEAF {
            for &p in &self.perm[lo..hi] {
                if p != query {
                    best.offer(self.dist2(p, query));
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let pivot = self.perm[mid];
        if pivot != query {
            best.offer(self.dist2(pivot, query));
        }
        let axis = self.axes[mid] as usize;
        let diff = self.coord(query, axis) - self.coord(pivot, axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, query, best);
        if diff * diff <= best.worst() {
            self.search(far.0, far.1, query, best);
        }
    }

    fn dist2(&self, a: usize, b: usize) -> f64 {
        let d = self.cloud.dim;
        self.cloud.coords[a * d..(a + 1) * d]
            .iter()
            .zip(&self.cloud.coords[b * d..(b + 1) * d])
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }
}

/// The `k` smallest squared distances seen so far, kept sorted.
struct Neighbours {
    k: usize,
    d2: Vec<f64>,
}

impl Neighbours {
    fn new(k: usize) -> Self {
        Self {
            k,
            d2: Vec::with_capacity(k + 1),
        }
    }

    fn reset(&mut self) {
        self.d2.clear();
    }

    fn worst(&self) -> f64 {
        if self.d2.len() < self.k {
            f64::INFINITY
        } else {
            self.d2[self.k - 1]
        }
    }

    fn nearest(&self) -> f64 {
        self.d2.first().copied().unwrap_or(f64::INFINITY)
    }

    fn offer(&mut self, d2: f64) {
        if d2 >= self.worst() {
            return;
        }
        let pos = self.d2.partition_point(|&x| x <= d2);
        self.d2.insert(pos, d2);
        self.d2.truncate(self.k);
    }
}
