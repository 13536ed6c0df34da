//! Small fixed-size tensors in two dimensions.
//!
//! Indices run over {0, 1}. Gradients follow `(∇u)_kl = ∂_l u_k` and stresses
//! are `σ_ij = C_ijkl (∇u)_kl`.

use std::ops::{Add, Mul, Sub};

pub type Mat2 = [[f64; 2]; 2];

#[inline]
fn i4(i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * 2 + j) * 2 + k) * 2 + l
}

#[inline]
fn i3(i: usize, j: usize, k: usize) -> usize {
    (i * 2 + j) * 2 + k
}

/// Rank-4 tensor with all 16 components stored.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tensor4 {
    pub c: [f64; 16],
}

impl Tensor4 {
    pub const fn zero() -> Self {
        Tensor4 { c: [0.0; 16] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.c[i4(i, j, k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.c[i4(i, j, k, l)] = v;
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        t.set(i, j, k, l, f(i, j, k, l));
                    }
                }
            }
        }
        t
    }

    /// `λ δ_ij δ_kl + μ (δ_ik δ_jl + δ_il δ_jk)`
    pub fn isotropic(lambda: f64, mu: f64) -> Self {
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        Self::from_fn(|i, j, k, l| {
            lambda * d(i, j) * d(k, l) + mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k))
        })
    }

    /// 4×4 matrix acting on `vec(∇u)` with `vec` index `2i + j`.
    pub fn gradient_matrix(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for (a, row) in m.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = self.get(a / 2, a % 2, b / 2, b % 2);
            }
        }
        m
    }

    pub fn contract(&self, a: &Mat2) -> Mat2 {
        let mut s = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        acc += self.get(i, j, k, l) * a[k][l];
                    }
                }
                s[i][j] = acc;
            }
        }
        s
    }

    /// `T_ijkl = C_jilk`: exchanges the two slots of each pair.
    pub fn swap_pairs(&self) -> Self {
        Tensor4::from_fn(|i, j, k, l| self.get(j, i, l, k))
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|C_ijkl - C_klij|`.
    pub fn major_asymmetry(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m = m.max((self.get(i, j, k, l) - self.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        m
    }

    /// Largest violation of `C_ijkl = C_jikl = C_ijlk`.
    pub fn minor_asymmetry(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let v = self.get(i, j, k, l);
                        m = m.max((v - self.get(j, i, k, l)).abs());
                        m = m.max((v - self.get(i, j, l, k)).abs());
                    }
                }
            }
        }
        m
    }

    pub fn has_major_symmetry(&self, rel_tol: f64) -> bool {
        self.major_asymmetry() <= rel_tol * self.max_abs()
    }

    pub fn has_minor_symmetry(&self, rel_tol: f64) -> bool {
        self.minor_asymmetry() <= rel_tol * self.max_abs()
    }

    /// Components in the frame with basis vectors given by the columns of `r`.
    /// `rotate(r)` maps frame components to ambient ones: `T_ijkl = R_ia R_jb R_kc R_ld T'_abcd`.
    pub fn rotate(&self, r: &Mat2) -> Self {
        Self::from_fn(|i, j, k, l| {
            let mut acc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        for d in 0..2 {
                            acc += r[i][a] * r[j][b] * r[k][c] * r[l][d] * self.get(a, b, c, d);
                        }
                    }
                }
            }
            acc
        })
    }
}

impl Add for Tensor4 {
    type Output = Tensor4;
    fn add(mut self, o: Tensor4) -> Tensor4 {
        for (a, b) in self.c.iter_mut().zip(o.c) {
            *a += b;
        }
        self
    }
}

impl Sub for Tensor4 {
    type Output = Tensor4;
    fn sub(mut self, o: Tensor4) -> Tensor4 {
        for (a, b) in self.c.iter_mut().zip(o.c) {
            *a -= b;
        }
        self
    }
}

impl Mul<Tensor4> for f64 {
    type Output = Tensor4;
    fn mul(self, mut t: Tensor4) -> Tensor4 {
        for a in t.c.iter_mut() {
            *a *= self;
        }
        t
    }
}

/// Rank-3 tensor, 8 components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tensor3 {
    pub c: [f64; 8],
}

impl Tensor3 {
    pub const fn zero() -> Self {
        Tensor3 { c: [0.0; 8] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[i3(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.c[i3(i, j, k)] = v;
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    t.set(i, j, k, f(i, j, k));
                }
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn rotate(&self, r: &Mat2) -> Self {
        Self::from_fn(|i, j, k| {
            let mut acc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        acc += r[i][a] * r[j][b] * r[k][c] * self.get(a, b, c);
                    }
                }
            }
            acc
        })
    }
}

impl Mul<Tensor3> for f64 {
    type Output = Tensor3;
    fn mul(self, mut t: Tensor3) -> Tensor3 {
        for a in t.c.iter_mut() {
            *a *= self;
        }
        t
    }
}

pub fn rotate2(t: &Mat2, r: &Mat2) -> Mat2 {
    let mut o = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    o[i][j] += r[i][a] * r[j][b] * t[a][b];
                }
            }
        }
    }
    o
}

/// Rotation whose columns are `e_r = (cos θ, sin θ)` and `e_θ = (-sin θ, cos θ)`.
pub fn polar_frame(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

pub fn frobenius(a: &Mat2) -> f64 {
    (a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1]).sqrt()
}
