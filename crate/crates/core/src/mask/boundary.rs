use super::{BinaryMask, MaskError};

/// Foreground pixels with at least one 4-neighbour that is background or
/// outside the image.
pub fn boundary_extract(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    BinaryMask::from_fn(mask.dims(), |x, y| {
        if !mask.get(x, y) {
            return false;
        }
        x == 0
            || y == 0
            || x + 1 == w
            || y + 1 == h
            || !mask.get(x - 1, y)
            || !mask.get(x + 1, y)
            || !mask.get(x, y - 1)
            || !mask.get(x, y + 1)
    })
}

/// Tolerance in pixels used when none is given: `ceil(0.008 * diagonal)`.
pub fn default_boundary_tolerance(dims: super::Dims) -> f64 {
    let diag = ((dims.height * dims.height + dims.width * dims.width) as f64).sqrt();
    (0.008 * diag).ceil()
}

/// Boundary F-measure: boundary pixels of each mask count as matched when a
/// boundary pixel of the other lies within `tolerance` (Euclidean).
pub fn boundary_f_score(pred: &BinaryMask, gt: &BinaryMask, tolerance: f64) -> Result<f64, MaskError> {
    pred.dims().ensure_same(gt.dims())?;
    let pb = boundary_extract(pred);
    let gb = boundary_extract(gt);
    let (pn, gn) = (pb.area(), gb.area());
    if pn == 0 && gn == 0 {
        return Ok(1.0);
    }
    if pn == 0 || gn == 0 {
        return Ok(0.0);
    }
    let tolerance = tolerance.max(0.0);
    let precision = matched(&pb, &gb, tolerance) as f64 / pn as f64;
    let recall = matched(&gb, &pb, tolerance) as f64 / gn as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

fn matched(from: &BinaryMask, to: &BinaryMask, tolerance: f64) -> usize {
    let radius = tolerance.floor() as i64;
    let tol2 = tolerance * tolerance;
    let (w, h) = (to.width() as i64, to.height() as i64);
    from.pixels()
        .filter(|&(x, y)| {
            let (x, y) = (x as i64, y as i64);
            for dy in -radius..=radius {
                let yy = y + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                for dx in -radius..=radius {
                    let xx = x + dx;
                    if xx < 0 || xx >= w {
                        continue;
                    }
                    if ((dx * dx + dy * dy) as f64) <= tol2 && to.get(xx as usize, yy as usize) {
                        return true;
                    }
                }
            }
            false
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Dims;

    /// All-pairs distance matcher, independent of the windowed search.
    pub(crate) fn brute_force_f(pred: &BinaryMask, gt: &BinaryMask, tol: f64) -> f64 {
        let pb: Vec<_> = boundary_extract(pred).pixels().collect();
        let gb: Vec<_> = boundary_extract(gt).pixels().collect();
        if pb.is_empty() && gb.is_empty() {
            return 1.0;
        }
        let hit = |a: &(usize, usize), set: &[(usize, usize)]| {
            set.iter().any(|b| {
                let dx = a.0 as f64 - b.0 as f64;
                let dy = a.1 as f64 - b.1 as f64;
                (dx * dx + dy * dy).sqrt() <= tol
            })
        };
        let p = if pb.is_empty() { 0.0 } else { pb.iter().filter(|a| hit(a, &gb)).count() as f64 / pb.len() as f64 };
        let r = if gb.is_empty() { 0.0 } else { gb.iter().filter(|a| hit(a, &pb)).count() as f64 / gb.len() as f64 };
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    #[test]
    fn boundary_cases() {
        let one = BinaryMask::full(Dims::new(1, 1));
        assert_eq!(boundary_extract(&one), one);

        let full = BinaryMask::full(Dims::new(4, 4));
        let b = boundary_extract(&full);
        assert_eq!(b.area(), 12);
        assert!(!b.get(1, 1) && !b.get(2, 2));

        let empty = BinaryMask::empty(Dims::new(3, 5));
        assert_eq!(boundary_extract(&empty), empty);
    }

    #[test]
    fn f_identity_and_far() {
        let d = Dims::new(16, 16);
        let a = BinaryMask::from_fn(d, |x, y| (2..6).contains(&x) && (2..6).contains(&y));
        assert_eq!(boundary_f_score(&a, &a, 1.0).unwrap(), 1.0);
        let far = BinaryMask::from_fn(d, |x, y| (11..15).contains(&x) && (11..15).contains(&y));
        assert_eq!(boundary_f_score(&a, &far, 2.0).unwrap(), 0.0);
        let e = BinaryMask::empty(d);
        assert_eq!(boundary_f_score(&e, &e, 1.0).unwrap(), 1.0);
        assert_eq!(boundary_f_score(&e, &a, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn shifted_square_matches_oracle() {
        let d = Dims::new(16, 16);
        let a = BinaryMask::from_fn(d, |x, y| (4..12).contains(&x) && (4..12).contains(&y));
        let b = BinaryMask::from_fn(d, |x, y| (5..13).contains(&x) && (4..12).contains(&y));
        let got = boundary_f_score(&a, &b, 1.0).unwrap();
        let want = brute_force_f(&a, &b, 1.0);
        // frozen from the all-pairs matcher: every pixel of both boundaries is
        // within one pixel of the other boundary
        assert_eq!(want, 1.0);
        assert!((got - want).abs() < 1e-12);

        // at tolerance 0 only the shared boundary pixels match: 14 of 28 each way
        let got0 = boundary_f_score(&a, &b, 0.0).unwrap();
        let want0 = brute_force_f(&a, &b, 0.0);
        assert!((want0 - 0.5).abs() < 1e-12, "{want0}");
        assert!((got0 - want0).abs() < 1e-12);
    }

    #[test]
    fn default_tolerance_matches_benchmark_convention() {
        assert_eq!(default_boundary_tolerance(Dims::new(64, 64)), 1.0);
        assert_eq!(default_boundary_tolerance(Dims::new(480, 854)), 8.0);
    }

    #[test]
    fn randomized_against_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let d = Dims::new(rng.random_range(1..=32), rng.random_range(1..=32));
            let pa: f64 = rng.random();
            let pb: f64 = rng.random();
            let a = BinaryMask::from_fn(d, |_, _| rng.random_bool(pa));
            let b = BinaryMask::from_fn(d, |_, _| rng.random_bool(pb));
            let tol = [0.0, 1.0, 1.5, 2.0, 3.0][rng.random_range(0..5)];
            let got = boundary_f_score(&a, &b, tol).unwrap();
            assert!((got - brute_force_f(&a, &b, tol)).abs() < 1e-9);
        }
    }
}
