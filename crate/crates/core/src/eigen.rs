//! Eigenvalues of complex upper-Hessenberg matrices.
//!
//! Single-shift implicit QR with Wilkinson shifts and Givens rotations,
//! restricted to the active unreduced block since no Schur vectors are needed.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major square matrix assumed upper Hessenberg; entries below the
/// subdiagonal are ignored.
pub struct Hessenberg {
    n: usize,
    a: Vec<Complex64>,
}

#[inline]
fn abs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

impl Hessenberg {
    pub fn new(n: usize, a: Vec<Complex64>) -> Self {
        assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
        Hessenberg { n, a }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    /// Consumes the matrix and returns its eigenvalues (in deflation order).
    pub fn eigenvalues(mut self) -> Result<Vec<Complex64>> {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        if n == 0 {
            return Ok(out);
        }
        let eps = f64::EPSILON;
        let mut hi = n - 1;
        let mut total_its = 0usize;
        loop {
            if hi == 0 {
                out[0] = self.at(0, 0);
                return Ok(out);
            }
            let mut its = 0usize;
            loop {
                // Look for a negligible subdiagonal entry in the active block.
                let mut lo = hi;
                while lo > 0 {
                    let sub = abs1(self.at(lo, lo - 1));
                    let mut diag = abs1(self.at(lo - 1, lo - 1)) + abs1(self.at(lo, lo));
                    if diag == 0.0 {
                        diag = (lo.saturating_sub(1)..=hi.min(lo + 1))
                            .map(|k| abs1(self.at(k, k)))
                            .sum::<f64>()
                            .max(f64::MIN_POSITIVE);
                    }
                    if sub <= eps * diag {
                        self.a[lo * n + lo - 1] = Complex64::new(0.0, 0.0);
                        break;
                    }
                    lo -= 1;
                }
                if lo == hi {
                    out[hi] = self.at(hi, hi);
                    hi -= 1;
                    break;
                }
                its += 1;
                total_its += 1;
                if its > 60 {
                    return Err(Error::DegenerateInstance(format!(
                        "Hessenberg QR stalled at row {hi} after {total_its} sweeps"
                    )));
                }
                let shift = if its.is_multiple_of(10) {
                    // exceptional shift to break cycles
                    self.at(hi, hi) + Complex64::new(0.75 * self.at(hi, hi - 1).re.abs(), 0.0)
                } else {
                    self.wilkinson(hi)
                };
                self.sweep(lo, hi, shift);
            }
        }
    }

    fn wilkinson(&self, hi: usize) -> Complex64 {
        let a = self.at(hi - 1, hi - 1);
        let b = self.at(hi - 1, hi);
        let c = self.at(hi, hi - 1);
        let d = self.at(hi, hi);
        let half = (a - d) * 0.5;
        let root = (half * half + b * c).sqrt();
        let mid = (a + d) * 0.5;
        let (e1, e2) = (mid + root, mid - root);
        if (e1 - d).norm() <= (e2 - d).norm() {
            e1
        } else {
            e2
        }
    }

    fn sweep(&mut self, lo: usize, hi: usize, shift: Complex64) {
        let n = self.n;
        let mut x = self.at(lo, lo) - shift;
        let mut y = self.at(lo + 1, lo);
        for k in lo..hi {
            if k > lo {
                x = self.at(k, k - 1);
                y = self.at(k + 1, k - 1);
            }
            let (c, s) = givens(x, y);
            if k > lo {
                self.a[k * n + k - 1] = Complex64::new(c, 0.0) * x + s * y;
                self.a[(k + 1) * n + k - 1] = Complex64::new(0.0, 0.0);
            }
            // rows k and k+1
            let start = if k > lo { k } else { lo };
            let (top, bottom) = self.a.split_at_mut((k + 1) * n);
            let rk = &mut top[k * n + start..k * n + hi + 1];
            let rk1 = &mut bottom[start..hi + 1];
            let sc = s.conj();
            for (p, q) in rk.iter_mut().zip(rk1.iter_mut()) {
                let (u, v) = (*p, *q);
                *p = u * c + s * v;
                *q = v * c - sc * u;
            }
            // columns k and k+1
            let last = (k + 2).min(hi);
            for i in lo..=last {
                let u = self.a[i * n + k];
                let v = self.a[i * n + k + 1];
                self.a[i * n + k] = u * c + sc * v;
                self.a[i * n + k + 1] = v * c - s * u;
            }
        }
    }
}

/// Rotation `(c, s)` with `c` real such that `[c, s; -conj(s), c] [x; y] = [r; 0]`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = ax.hypot(ay);
    (ax / r, (x / ax) * y.conj() / r)
}
