//! Scalar functions, their first and second directional derivatives, and the
//! divided-difference tables behind Löwner operator derivatives.
//!
//! Divided differences follow the zero-derivative convention: the interpolant
//! `g` matches `f` at every cluster value and has `g′ = 0` there. Coincident
//! arguments are detected by exact equality, which is sound because every
//! argument is a cluster value of one spectral object.

use crate::spectral::Spectral;

/// A scalar function with first and second directional derivatives.
///
/// `dir1(μ, η) = f′(μ; η)` and
/// `dir2(z, d, w) = lim 2/t² (f(z + td + t²w/2) − f(z) − t f′(z; d))`.
pub trait ScalarFun: Send + Sync {
    fn name(&self) -> &'static str;
    fn eval(&self, t: f64) -> f64;
    fn dir1(&self, mu: f64, eta: f64) -> f64;
    fn dir2(&self, z: f64, d: f64, w: f64) -> f64;
}

/// `t ↦ max(0, t)`, the scalar function of the PSD projection.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaxZero;

/// `t ↦ min(0, t)`, the scalar function of the NSD projection.
#[derive(Clone, Copy, Debug, Default)]
pub struct MinZero;

#[derive(Clone, Copy, Debug, Default)]
pub struct AbsVal;

#[derive(Clone, Copy, Debug, Default)]
pub struct Square;

#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

pub fn max_dir1(mu: f64, eta: f64) -> f64 {
    if mu > 0.0 {
        eta
    } else if mu == 0.0 {
        eta.max(0.0)
    } else {
        0.0
    }
}

pub fn max_dir2(z: f64, d: f64, w: f64) -> f64 {
    if z > 0.0 || (z == 0.0 && d > 0.0) {
        w
    } else if z < 0.0 || d < 0.0 {
        0.0
    } else {
        w.max(0.0)
    }
}

impl ScalarFun for MaxZero {
    fn name(&self) -> &'static str {
        "max"
    }
    fn eval(&self, t: f64) -> f64 {
        t.max(0.0)
    }
    fn dir1(&self, mu: f64, eta: f64) -> f64 {
        max_dir1(mu, eta)
    }
    fn dir2(&self, z: f64, d: f64, w: f64) -> f64 {
        max_dir2(z, d, w)
    }
}

impl ScalarFun for MinZero {
    fn name(&self) -> &'static str {
        "min"
    }
    fn eval(&self, t: f64) -> f64 {
        t.min(0.0)
    }
    fn dir1(&self, mu: f64, eta: f64) -> f64 {
        eta - max_dir1(mu, eta)
    }
    fn dir2(&self, z: f64, d: f64, w: f64) -> f64 {
        w - max_dir2(z, d, w)
    }
}

impl ScalarFun for AbsVal {
    fn name(&self) -> &'static str {
        "abs"
    }
    fn eval(&self, t: f64) -> f64 {
        t.abs()
    }
    fn dir1(&self, mu: f64, eta: f64) -> f64 {
        2.0 * max_dir1(mu, eta) - eta
    }
    fn dir2(&self, z: f64, d: f64, w: f64) -> f64 {
        2.0 * max_dir2(z, d, w) - w
    }
}

impl ScalarFun for Square {
    fn name(&self) -> &'static str {
        "square"
    }
    fn eval(&self, t: f64) -> f64 {
        t * t
    }
    fn dir1(&self, mu: f64, eta: f64) -> f64 {
        2.0 * mu * eta
    }
    fn dir2(&self, z: f64, d: f64, w: f64) -> f64 {
        2.0 * z * w + 2.0 * d * d
    }
}

impl ScalarFun for Identity {
    fn name(&self) -> &'static str {
        "identity"
    }
    fn eval(&self, t: f64) -> f64 {
        t
    }
    fn dir1(&self, _mu: f64, eta: f64) -> f64 {
        eta
    }
    fn dir2(&self, _z: f64, _d: f64, w: f64) -> f64 {
        w
    }
}

/// First divided difference of the zero-derivative interpolant of `f`.
pub fn g1<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (f(a) - f(b)) / (a - b)
    }
}

/// Second divided difference of the zero-derivative interpolant of `f`.
pub fn g2<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, c: f64) -> f64 {
    match (a == b, b == c, a == c) {
        (true, true, _) => 0.0,
        (_, _, true) => (f(b) - f(a)) / ((b - a) * (b - a)),
        (true, false, _) => g1(f, a, c) / (c - a),
        (false, true, _) => g1(f, a, c) / (a - c),
        _ => (g1(f, a, b) - g1(f, a, c)) / (b - c),
    }
}

/// Closed-form `g^[2](μ_k, μ_j, μ_l)` for `f = max(0, ·)`, organised by the
/// position of the outer arguments relative to zero.
pub fn g2_max(mu_k: f64, mu_j: f64, mu_l: f64) -> f64 {
    let (a, c) = if mu_k >= mu_l { (mu_k, mu_l) } else { (mu_l, mu_k) };
    let j = mu_j;
    if a == c {
        return if j == a {
            0.0
        } else {
            (j.max(0.0) - a.max(0.0)) / ((j - a) * (j - a))
        };
    }
    if c >= 0.0 {
        if j == a {
            1.0 / (c - a)
        } else if j == c {
            1.0 / (a - c)
        } else if j >= 0.0 {
            0.0
        } else {
            j / ((a - j) * (j - c))
        }
    } else if a == 0.0 {
        if j > 0.0 {
            1.0 / (j - c)
        } else {
            0.0
        }
    } else if a < 0.0 {
        if j >= 0.0 {
            j / ((j - a) * (j - c))
        } else {
            0.0
        }
    } else if j == a {
        -a / ((a - c) * (a - c))
    } else if j == c {
        a / ((a - c) * (a - c))
    } else if j >= 0.0 {
        -c / ((a - c) * (j - c))
    } else {
        a / ((a - j) * (a - c))
    }
}

/// First and second divided-difference tables over the cluster values of a
/// spectral object.
#[derive(Clone, Debug)]
pub struct GDividedTables {
    r: usize,
    g1: Vec<f64>,
    g2: Vec<f64>,
}

impl GDividedTables {
    pub fn new(spec: &Spectral, f: &dyn ScalarFun) -> Self {
        let mu: Vec<f64> = spec.clusters().iter().map(|c| c.value).collect();
        Self::from_values(&mu, f)
    }

    pub fn from_values(mu: &[f64], f: &dyn ScalarFun) -> Self {
        let r = mu.len();
        let fe = |t: f64| f.eval(t);
        let mut t1 = vec![0.0; r * r];
        let mut t2 = vec![0.0; r * r * r];
        for k in 0..r {
            for l in 0..r {
                t1[k * r + l] = g1(fe, mu[k], mu[l]);
                for j in 0..r {
                    t2[(k * r + j) * r + l] = g2(fe, mu[k], mu[j], mu[l]);
                }
            }
        }
        GDividedTables { r, g1: t1, g2: t2 }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn g1(&self, k: usize, l: usize) -> f64 {
        self.g1[k * self.r + l]
    }

    pub fn g2(&self, k: usize, j: usize, l: usize) -> f64 {
        self.g2[(k * self.r + j) * self.r + l]
    }
}

/// `g^[1]` table for the spectral object, `r × r`.
pub fn g1_table(spec: &Spectral, f: &dyn ScalarFun) -> Vec<Vec<f64>> {
    let t = GDividedTables::new(spec, f);
    (0..t.r())
        .map(|k| (0..t.r()).map(|l| t.g1(k, l)).collect())
        .collect()
}

/// Divided differences of `η ↦ f′(μ; η)` over the sub-cluster values `eta`,
/// with zero on coincident values.
pub fn phi1_table(f: &dyn ScalarFun, mu: f64, eta: &[f64]) -> Vec<Vec<f64>> {
    eta.iter()
        .map(|&a| {
            eta.iter()
                .map(|&b| g1(|t| f.dir1(mu, t), a, b))
                .collect()
        })
        .collect()
}
