use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BinaryMask, Dims, MaskError, Point};

const KMEANS_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingStrategy {
    /// Foreground pixel centers drawn at random; without replacement unless
    /// more points than pixels are requested.
    UniformRandom,
    /// Lloyd's k-means over foreground coordinates, centroids snapped to the
    /// nearest foreground pixel.
    Kmeans,
    /// `per_side x per_side` cell centers tiling the whole image.
    Grid { per_side: usize },
}

pub fn sample_points(
    mask: &BinaryMask,
    n: usize,
    strategy: SamplingStrategy,
    seed: u64,
) -> Result<Vec<Point>, MaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_points_with(mask, n, strategy, &mut rng)
}

pub fn sample_points_with<R: Rng + ?Sized>(
    mask: &BinaryMask,
    n: usize,
    strategy: SamplingStrategy,
    rng: &mut R,
) -> Result<Vec<Point>, MaskError> {
    match strategy {
        SamplingStrategy::Grid { per_side } => Ok(grid_points(mask.dims(), per_side)),
        SamplingStrategy::UniformRandom => {
            let fg: Vec<(usize, usize)> = mask.pixels().collect();
            if fg.is_empty() {
                return Err(MaskError::EmptyMask);
            }
            let picks: Vec<usize> = if n <= fg.len() {
                index::sample(rng, fg.len(), n).into_vec()
            } else {
                (0..n).map(|_| rng.random_range(0..fg.len())).collect()
            };
            Ok(picks
                .into_iter()
                .map(|i| Point::new(fg[i].0 as f64, fg[i].1 as f64))
                .collect())
        }
        SamplingStrategy::Kmeans => kmeans_points(mask, n, rng),
    }
}

pub fn grid_points(dims: Dims, per_side: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(per_side * per_side);
    if per_side == 0 {
        return out;
    }
    let step_x = dims.width as f64 / per_side as f64;
    let step_y = dims.height as f64 / per_side as f64;
    for j in 0..per_side {
        for i in 0..per_side {
            let p = Point::new((i as f64 + 0.5) * step_x, (j as f64 + 0.5) * step_y);
            out.push(p.clamped(dims));
        }
    }
    out
}

/// k-means++ seeding followed by Lloyd iterations; returns
/// `min(k, area)` distinct foreground pixels, one per cluster.
pub fn kmeans_points<R: Rng + ?Sized>(mask: &BinaryMask, k: usize, rng: &mut R) -> Result<Vec<Point>, MaskError> {
    let fg: Vec<[f64; 2]> = mask.pixels().map(|(x, y)| [x as f64, y as f64]).collect();
    if fg.is_empty() {
        return Err(MaskError::EmptyMask);
    }
    let k = k.min(fg.len());
    if k == 0 {
        return Ok(Vec::new());
    }

    let mut centroids = seed_centroids(&fg, k, rng);
    let mut assign = vec![usize::MAX; fg.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in fg.iter().enumerate() {
            let c = nearest(&centroids, p);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        let mut sums = vec![[0.0f64; 2]; k];
        let mut sizes = vec![0usize; k];
        for (p, &c) in fg.iter().zip(&assign) {
            sums[c][0] += p[0];
            sums[c][1] += p[1];
            sizes[c] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                centroids[c] = [sums[c][0] / sizes[c] as f64, sums[c][1] / sizes[c] as f64];
            } else {
                // empty cluster: move it to the worst-served point
                let far = fg
                    .iter()
                    .enumerate()
                    .max_by(|(i, a), (j, b)| {
                        dist2(a, &centroids[assign[*i]])
                            .total_cmp(&dist2(b, &centroids[assign[*j]]))
                            .then(j.cmp(i))
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                centroids[c] = fg[far];
                assign[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    Ok(snap_to_foreground(&fg, &centroids))
}

fn seed_centroids<R: Rng + ?Sized>(fg: &[[f64; 2]], k: usize, rng: &mut R) -> Vec<[f64; 2]> {
    let mut centroids = vec![fg[rng.random_range(0..fg.len())]];
    let mut d2: Vec<f64> = fg.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..fg.len())
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = fg.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        let c = fg[next];
        for (slot, p) in d2.iter_mut().zip(fg) {
            *slot = slot.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Each centroid takes its nearest unused foreground pixel; ties go to the
/// smallest `(y, x)`.
fn snap_to_foreground(fg: &[[f64; 2]], centroids: &[[f64; 2]]) -> Vec<Point> {
    let mut used = vec![false; fg.len()];
    centroids
        .iter()
        .map(|c| {
            let best = fg
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .min_by(|(_, a), (_, b)| {
                    dist2(a, c)
                        .total_cmp(&dist2(b, c))
                        .then(a[1].total_cmp(&b[1]))
                        .then(a[0].total_cmp(&b[0]))
                })
                .map(|(i, _)| i)
                .expect("k never exceeds the foreground size");
            used[best] = true;
            Point::new(fg[best][0], fg[best][1])
        })
        .collect()
}

fn nearest(centroids: &[[f64; 2]], p: &[f64; 2]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}
