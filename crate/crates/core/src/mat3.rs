//! Small fixed-size complex matrix arithmetic for three-level density-matrix work.
//!
//! Everything is `Copy` and stack-allocated so the integrator inner loop never
//! touches the heap.

use num_complex::Complex64 as C64;
use std::ops::{Add, AddAssign, Mul, Sub};

/// Dense 3x3 complex matrix, row-major.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat3(pub [[C64; 3]; 3]);

impl Mat3 {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::from_diag([1.0, 1.0, 1.0])
    }

    pub fn from_diag(d: [f64; 3]) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            m.0[i][i] = C64::new(d[i], 0.0);
        }
        m
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    /// Largest elementwise deviation from Hermitian symmetry.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.0 {
            for v in row {
                worst = worst.max(v.norm());
            }
        }
        worst
    }

    pub fn det(&self) -> C64 {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    /// Smallest eigenvalue of a Hermitian matrix, via the trigonometric
    /// closed form of the 3x3 characteristic cubic. The eigenvalues are
    /// `q + 2p cos(phi + 2k*pi/3)`; with `phi` in `[0, pi/3]` the `k = 1`
    /// branch is always the smallest.
    pub fn min_eigenvalue_hermitian(&self) -> f64 {
        let a = &self.0;
        let q = self.trace().re / 3.0;
        let p1 = a[0][1].norm_sqr() + a[0][2].norm_sqr() + a[1][2].norm_sqr();
        let d = [a[0][0].re - q, a[1][1].re - q, a[2][2].re - q];
        let p2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        if p == 0.0 {
            return q;
        }
        let b = (*self - Mat3::from_diag([q, q, q])) * C64::new(1.0 / p, 0.0);
        // det of a Hermitian matrix is real; clamp guards roundoff at the branch ends.
        let r = (b.det().re / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, rhs: Mat3) -> Mat3 {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] += rhs.0[i][j];
            }
        }
        m
    }
}

impl AddAssign for Mat3 {
    fn add_assign(&mut self, rhs: Mat3) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, rhs: Mat3) -> Mat3 {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] -= rhs.0[i][j];
            }
        }
        m
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, rhs: Mat3) -> Mat3 {
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for k in 0..3 {
                let aik = self.0[i][k];
                for j in 0..3 {
                    m.0[i][j] += aik * rhs.0[k][j];
                }
            }
        }
        m
    }
}

impl Mul<C64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: C64) -> Mat3 {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] *= s;
            }
        }
        m
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        self * C64::new(s, 0.0)
    }
}
