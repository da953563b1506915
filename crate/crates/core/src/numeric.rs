//! Small numerical helpers shared across modules.

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Bisection on a bracket with `f(lo)` and `f(hi)` of opposite sign (or zero).
/// Stops once the bracket is narrower than `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest root of `f` on `[lo, hi]` where `f` is positive at `lo`, located by
/// a uniform scan followed by bisection. Non-finite samples are skipped.
pub fn first_sign_change<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    samples: usize,
    tol: f64,
) -> Option<f64> {
    let mut prev_q = lo;
    let mut prev_f = f(lo);
    if prev_f == 0.0 {
        return Some(lo);
    }
    for j in 1..=samples {
        let q = lo + (hi - lo) * (j as f64) / (samples as f64);
        let fq = f(q);
        if !fq.is_finite() {
            continue;
        }
        if fq == 0.0 {
            return Some(q);
        }
        if prev_f.is_finite() && (fq > 0.0) != (prev_f > 0.0) {
            return Some(bisect(&f, prev_q, q, tol));
        }
        prev_q = q;
        prev_f = fq;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
        assert_ne!(xs.iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn scan_finds_smallest_root() {
        // roots at 1, 2, 3
        let f = |x: f64| -(x - 1.0) * (x - 2.0) * (x - 3.0);
        let r = first_sign_change(f, 0.0, 10.0, 1000, 1e-13).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(first_sign_change(|_| 1.0, 0.0, 1.0, 10, 1e-12).is_none());
    }
}
