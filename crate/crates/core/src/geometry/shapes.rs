//! Analytic surfaces sampled uniformly by area.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{GeometryError, PointCloud, Similarity};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    Sphere {
        radius: f64,
    },
    /// Axis-aligned box with the given half extents.
    Box {
        half_extents: [f64; 3],
    },
    /// Ring torus around the z axis; `minor < major`.
    Torus {
        major: f64,
        minor: f64,
    },
    /// Capped cylinder along the z axis.
    Cylinder {
        radius: f64,
        half_height: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    Single {
        primitive: Primitive,
    },
    /// Surfaces of two primitives, the second shifted by `offset`; points are
    /// split between them in proportion to area.
    Union {
        first: Primitive,
        second: Primitive,
        offset: [f64; 3],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    /// Unit quaternion `(w, x, y, z)`.
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    pub n_points: usize,
    pub seed: u64,
}

impl Primitive {
    fn validate(&self) -> Result<(), GeometryError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match *self {
            Primitive::Sphere { radius } => ok(radius),
            Primitive::Box { half_extents } => half_extents.iter().all(|&v| ok(v)),
            Primitive::Torus { major, minor } => ok(major) && ok(minor) && minor < major,
            Primitive::Cylinder {
                radius,
                half_height,
            } => ok(radius) && ok(half_height),
        };
        if valid {
            Ok(())
        } else {
            Err(GeometryError::Degenerate(format!("{self:?}")))
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Primitive::Sphere { radius } => 4.0 * PI * radius * radius,
            Primitive::Box {
                half_extents: [a, b, c],
            } => 8.0 * (a * b + b * c + a * c),
            Primitive::Torus { major, minor } => 4.0 * PI * PI * major * minor,
            Primitive::Cylinder {
                radius,
                half_height,
            } => 4.0 * PI * radius * half_height + 2.0 * PI * radius * radius,
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 3] {
        match *self {
            Primitive::Sphere { radius } => loop {
                let v: [f64; 3] = [0; 3].map(|_| StandardNormal.sample(rng));
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n > 1e-12 {
                    break v.map(|c| radius * c / n);
                }
            },
            Primitive::Box { half_extents: h } => {
                // Face pair normal to axis k has area 8·h_i·h_j.
                let areas = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
                let total: f64 = areas.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut axis = 2;
                for (k, a) in areas.iter().enumerate() {
                    if u < *a {
                        axis = k;
                        break;
                    }
                    u -= a;
                }
                let mut p = [0.0; 3];
                for k in 0..3 {
                    p[k] = if k == axis {
                        if rng.random::<bool>() {
                            h[k]
                        } else {
                            -h[k]
                        }
                    } else {
                        rng.random_range(-h[k]..=h[k])
                    };
                }
                p
            }
            Primitive::Torus { major, minor } => {
                // Area element ∝ (R + r cos θ): rejection-sample θ.
                let theta = loop {
                    let t = rng.random_range(0.0..2.0 * PI);
                    if rng.random::<f64>() * (major + minor) <= major + minor * t.cos() {
                        break t;
                    }
                };
                let phi = rng.random_range(0.0..2.0 * PI);
                let ring = major + minor * theta.cos();
                [ring * phi.cos(), ring * phi.sin(), minor * theta.sin()]
            }
            Primitive::Cylinder {
                radius,
                half_height,
            } => {
                let side = 4.0 * PI * radius * half_height;
                let cap = PI * radius * radius;
                let u = rng.random::<f64>() * (side + 2.0 * cap);
                if u < side {
                    let phi = rng.random_range(0.0..2.0 * PI);
                    [
                        radius * phi.cos(),
                        radius * phi.sin(),
                        rng.random_range(-half_height..=half_height),
                    ]
                } else {
                    let r = radius * rng.random::<f64>().sqrt();
                    let phi = rng.random_range(0.0..2.0 * PI);
                    let z = if u < side + cap {
                        half_height
                    } else {
                        -half_height
                    };
                    [r * phi.cos(), r * phi.sin(), z]
                }
            }
        }
    }
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        match &self.kind {
            ShapeKind::Single { primitive } => primitive.validate()?,
            ShapeKind::Union {
                first,
                second,
                offset,
            } => {
                first.validate()?;
                second.validate()?;
                if offset.iter().any(|v| !v.is_finite()) {
                    return Err(GeometryError::Degenerate("non-finite union offset".into()));
                }
            }
        }
        let qn = self.rotation.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !qn.is_finite() || (qn - 1.0).abs() > 1e-9 {
            return Err(GeometryError::Invalid(format!(
                "rotation quaternion has norm {qn}"
            )));
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::Invalid("non-finite translation".into()));
        }
        if self.n_points == 0 {
            return Err(GeometryError::Invalid("n_points must be positive".into()));
        }
        Ok(())
    }

    fn rotate(&self, p: [f64; 3]) -> [f64; 3] {
        let [w, x, y, z] = self.rotation;
        let m = [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ];
        [0, 1, 2].map(|r| m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2])
    }
}

/// Samples the un-posed analytic surface (no rotation, translation or
/// normalization).
pub fn sample_surface(spec: &ShapeSpec) -> Result<PointCloud, GeometryError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let points = match spec.kind {
        ShapeKind::Single { primitive } => (0..spec.n_points)
            .map(|_| primitive.sample(&mut rng))
            .collect(),
        ShapeKind::Union {
            first,
            second,
            offset,
        } => {
            let p_first = first.area() / (first.area() + second.area());
            (0..spec.n_points)
                .map(|_| {
                    if rng.random::<f64>() < p_first {
                        first.sample(&mut rng)
                    } else {
                        let q = second.sample(&mut rng);
                        [q[0] + offset[0], q[1] + offset[1], q[2] + offset[2]]
                    }
                })
                .collect()
        }
    };
    PointCloud::new(points)
}

/// Samples, poses and normalizes one shape. Reproducible from `spec.seed`.
pub fn gen_shape(spec: &ShapeSpec) -> Result<PointCloud, GeometryError> {
    Ok(gen_shape_with_transform(spec)?.0)
}

/// Like [`gen_shape`], also returning the normalizing similarity applied to
/// the posed surface.
pub fn gen_shape_with_transform(
    spec: &ShapeSpec,
) -> Result<(PointCloud, Similarity), GeometryError> {
    let raw = sample_surface(spec)?;
    let posed = raw.map(|p| {
        let r = spec.rotate(p);
        [
            r[0] + spec.translation[0],
            r[1] + spec.translation[1],
            r[2] + spec.translation[2],
        ]
    })?;
    Ok(posed.normalize_with_transform())
}

fn random_primitive(rng: &mut impl Rng) -> Primitive {
    match rng.random_range(0..4) {
        0 => Primitive::Sphere {
            radius: rng.random_range(0.5..1.5),
        },
        1 => Primitive::Box {
            half_extents: [0; 3].map(|_| rng.random_range(0.2..1.0)),
        },
        2 => {
            let major = rng.random_range(0.6..1.2);
            Primitive::Torus {
                major,
                minor: major * rng.random_range(0.15..0.5),
            }
        }
        _ => Primitive::Cylinder {
            radius: rng.random_range(0.2..0.8),
            half_height: rng.random_range(0.3..1.0),
        },
    }
}

/// Draws a shape from the default procedural distribution: four primitive
/// kinds plus two-primitive unions, random rotation, small translation.
pub fn random_shape_spec(rng: &mut impl Rng, n_points: usize) -> ShapeSpec {
    let kind = if rng.random::<f64>() < 0.2 {
        let first = random_primitive(rng);
        let second = random_primitive(rng);
        let offset = [0; 3].map(|_| rng.random_range(-1.0..1.0));
        ShapeKind::Union {
            first,
            second,
            offset,
        }
    } else {
        ShapeKind::Single {
            primitive: random_primitive(rng),
        }
    };
    let q: [f64; 4] = [0; 4].map(|_| StandardNormal.sample(rng));
    let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    ShapeSpec {
        kind,
        rotation: q.map(|v| v / qn),
        translation: [0; 3].map(|_| rng.random_range(-0.5..0.5)),
        n_points,
        seed: rng.random(),
    }
}

/// Train/validation/test indices in 80/10/10 proportion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl DatasetSplit {
    /// Contiguous 80/10/10 split of `0..n`; any rounding remainder goes to
    /// the training part.
    pub fn new(n: usize) -> Self {
        let n_val = n / 10;
        let n_test = n / 10;
        let n_train = n - n_val - n_test;
        Self {
            train: (0..n_train).collect(),
            val: (n_train..n_train + n_val).collect(),
            test: (n_train + n_val..n).collect(),
        }
    }
}

/// `n` specs drawn from the procedural distribution with seed `seed`.
pub fn shape_dataset(n: usize, n_points: usize, seed: u64) -> Vec<ShapeSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| random_shape_spec(&mut rng, n_points))
        .collect()
}
