//! Quadrature on the reference triangle `{(x,y): x,y >= 0, x+y <= 1}` and the
//! unit interval.

/// A quadrature rule on the reference triangle. Weights sum to 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// A quadrature rule on `[0, 1]`. Weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric coordinates of point `q`.
    pub fn barycentric(&self, q: usize) -> [f64; 3] {
        let [x, y] = self.points[q];
        [1.0 - x - y, x, y]
    }

    fn from_orbits(degree: usize, centroid: Option<f64>, s2: &[(f64, f64)], s3: &[(f64, f64, f64)]) -> Self {
        let mut lam: Vec<[f64; 3]> = Vec::new();
        let mut w = Vec::new();
        if let Some(c) = centroid {
            lam.push([1.0 / 3.0; 3]);
            w.push(c);
        }
        for &(a, wa) in s2 {
            let b = 1.0 - 2.0 * a;
            for l in [[a, a, b], [a, b, a], [b, a, a]] {
                lam.push(l);
                w.push(wa);
            }
        }
        for &(a, b, wa) in s3 {
            let c = 1.0 - a - b;
            for l in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                lam.push(l);
                w.push(wa);
            }
        }
        Self {
            points: lam.iter().map(|l| [l[1], l[2]]).collect(),
            weights: w.iter().map(|x| 0.5 * x).collect(),
            degree,
        }
    }
}

/// Symmetric rule exact for polynomials of total degree `degree` (1 to 6).
pub fn triangle_rule(degree: usize) -> TriangleRule {
    match degree {
        0 | 1 => TriangleRule::from_orbits(1, Some(1.0), &[], &[]),
        2 => TriangleRule::from_orbits(2, None, &[(1.0 / 6.0, 1.0 / 3.0)], &[]),
        3 | 4 => TriangleRule::from_orbits(
            4,
            None,
            &[
                (0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_70),
                (0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64),
            ],
            &[],
        ),
        5 => TriangleRule::from_orbits(
            5,
            Some(0.225),
            &[
                (0.470_142_064_105_115_089_77, 0.132_394_152_788_506_180_74),
                (0.101_286_507_323_456_338_80, 0.125_939_180_544_827_152_60),
            ],
            &[],
        ),
        6 => TriangleRule::from_orbits(
            6,
            None,
            &[
                (0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03),
                (0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_92),
            ],
            &[(
                0.053_145_049_844_816_947_35,
                0.310_352_451_033_784_405_42,
                0.082_851_075_618_373_575_19,
            )],
        ),
        d => panic!("no triangle rule of degree {d}"),
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Gauss rule with `n` points on `[0, 1]` (exact to degree `2n-1`).
pub fn line_rule(n: usize) -> LineRule {
    let (x, w) = gauss_legendre(n);
    LineRule {
        points: x.iter().map(|z| 0.5 * (z + 1.0)).collect(),
        weights: w.iter().map(|v| 0.5 * v).collect(),
        degree: 2 * n - 1,
    }
}

/// The committed edge rule: 3-point Gauss, exact to degree 5.
pub fn edge_rule() -> LineRule {
    line_rule(3)
}

/// Collapsed tensor Gauss rule with `n*n` points, exact to degree `2n-2`.
/// Slow but simple; used as an oracle.
pub fn collapsed_rule(n: usize) -> TriangleRule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..n {
            let v = 0.5 * (x[j] + 1.0);
            points.push([u, v * (1.0 - u)]);
            weights.push(0.25 * w[i] * w[j] * (1.0 - u));
        }
    }
    TriangleRule {
        points,
        weights,
        degree: 2 * n - 2,
    }
}
