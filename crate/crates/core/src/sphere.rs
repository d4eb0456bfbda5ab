//! Geometry of the unit sphere: points, geodesic distance, rotations,
//! uniform sampling, Fibonacci grids, cap windows and the Lambert
//! equal-area projection used for plot output.

use std::f64::consts::PI;
use std::ops::Index;

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance below which two points are considered coincident.
pub const COINCIDENCE_TOL: f64 = 1e-12;

/// The north pole `e = (0, 0, 1)`.
pub const NORTH_POLE: UnitVector = UnitVector {
    x: 0.0,
    y: 0.0,
    z: 1.0,
};

/// A point on the unit sphere, stored as a unit 3-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector {
    /// Normalizes `(x, y, z)` onto the sphere. Fails for zero or non-finite input.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::input(format!(
                "cannot normalize ({x}, {y}, {z}) onto the unit sphere"
            )));
        }
        Ok(Self::renormalized(x / norm, y / norm, z / norm))
    }

    // A second normalization pass brings the norm to within an ulp or two of 1.
    fn renormalized(x: f64, y: f64, z: f64) -> Self {
        let norm = (x * x + y * y + z * z).sqrt();
        UnitVector {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        }
    }

    /// Point with polar latitude (colatitude) `theta` in `[0, pi]` and longitude `phi`.
    pub fn from_polar(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self::renormalized(st * cp, st * sp, ct)
    }

    /// Point from geographic longitude and latitude in degrees.
    pub fn from_lonlat_degrees(lon: f64, lat: f64) -> Result<Self> {
        if !lon.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::input(format!(
                "invalid lon/lat pair ({lon}, {lat})"
            )));
        }
        Ok(Self::from_polar((90.0 - lat).to_radians(), lon.to_radians()))
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// `(theta, phi)` with `theta` in `[0, pi]` and `phi` in `[0, 2 pi)`.
    pub fn polar(&self) -> (f64, f64) {
        let theta = self.z.clamp(-1.0, 1.0).acos();
        let mut phi = self.y.atan2(self.x);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        (theta, phi)
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &UnitVector) -> [f64; 3] {
        [
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        ]
    }

    pub fn antipode(&self) -> UnitVector {
        UnitVector {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    fn max_abs_diff(&self, other: &UnitVector) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

/// Great-circle distance `arccos(a . b)` in radians, in `[0, pi]`.
///
/// Evaluated as `atan2(|a x b|, a . b)`, which equals the clamped arccos but
/// stays accurate for nearly equal and nearly antipodal points.
pub fn geodesic_distance(a: &UnitVector, b: &UnitVector) -> f64 {
    let c = a.cross(b);
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt().atan2(a.dot(b))
}

/// A finite simple point configuration on the sphere.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointPattern {
    points: Vec<UnitVector>,
}

impl PointPattern {
    /// Builds a pattern, rejecting coincident points.
    pub fn new(points: Vec<UnitVector>) -> Result<Self> {
        if let Some((i, j)) = find_coincident(&points) {
            return Err(Error::input(format!(
                "points {i} and {j} coincide; a point pattern must be simple"
            )));
        }
        Ok(PointPattern { points })
    }

    pub fn empty() -> Self {
        PointPattern { points: Vec::new() }
    }

    /// For samplers whose output is distinct with probability one.
    pub(crate) fn from_points_unchecked(points: Vec<UnitVector>) -> Self {
        PointPattern { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, UnitVector> {
        self.points.iter()
    }

    pub fn into_points(self) -> Vec<UnitVector> {
        self.points
    }

    /// Points of the pattern lying in `window`, in the original order.
    pub fn restrict(&self, window: &Window) -> PointPattern {
        PointPattern {
            points: self
                .points
                .iter()
                .filter(|p| window.contains(p))
                .copied()
                .collect(),
        }
    }

    pub fn rotate(&self, rotation: &Rotation) -> PointPattern {
        PointPattern {
            points: self.points.iter().map(|p| rotation.apply(p)).collect(),
        }
    }

    /// Checks the simplicity invariant again, e.g. after external edits.
    pub fn is_simple(&self) -> bool {
        find_coincident(&self.points).is_none()
    }
}

impl Index<usize> for PointPattern {
    type Output = UnitVector;

    fn index(&self, index: usize) -> &UnitVector {
        &self.points[index]
    }
}

impl<'a> IntoIterator for &'a PointPattern {
    type Item = &'a UnitVector;
    type IntoIter = std::slice::Iter<'a, UnitVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

// Sweep over points sorted by x; only neighbours within the tolerance in x
// can coincide.
fn find_coincident(points: &[UnitVector]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x));
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if points[j].x - points[i].x > COINCIDENCE_TOL {
                break;
            }
            if points[i].max_abs_diff(&points[j]) <= COINCIDENCE_TOL {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

/// A proper rotation of R^3 (orthogonal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    m: [[f64; 3]; 3],
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Rodrigues' formula for a rotation by `angle` about the unit `axis`
    /// (right-hand rule).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::input("rotation axis must be a non-zero vector"));
        }
        let u = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = t * u[i] * u[j] + if i == j { c } else { 0.0 };
            }
        }
        // sin(angle) [u]_x
        m[0][1] -= s * u[2];
        m[0][2] += s * u[1];
        m[1][0] += s * u[2];
        m[1][2] -= s * u[0];
        m[2][0] -= s * u[1];
        m[2][1] += s * u[0];
        Ok(Rotation { m })
    }

    /// Builds a rotation from a raw matrix after checking orthogonality and
    /// orientation to within 1e-10.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self> {
        let r = Rotation { m };
        if !r.is_proper(1e-10) {
            return Err(Error::input("matrix is not a proper rotation"));
        }
        Ok(r)
    }

    /// Uniformly distributed (Haar) random rotation from a random unit quaternion.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        let (w, x, y, z) = (
            a * (2.0 * PI * u2).sin(),
            a * (2.0 * PI * u2).cos(),
            b * (2.0 * PI * u3).sin(),
            b * (2.0 * PI * u3).cos(),
        );
        Rotation {
            m: [
                [
                    1.0 - 2.0 * (y * y + z * z),
                    2.0 * (x * y - z * w),
                    2.0 * (x * z + y * w),
                ],
                [
                    2.0 * (x * y + z * w),
                    1.0 - 2.0 * (x * x + z * z),
                    2.0 * (y * z - x * w),
                ],
                [
                    2.0 * (x * z - y * w),
                    2.0 * (y * z + x * w),
                    1.0 - 2.0 * (x * x + y * y),
                ],
            ],
        }
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn apply(&self, p: &UnitVector) -> UnitVector {
        let v = self.apply_vec([p.x, p.y, p.z]);
        UnitVector::renormalized(v[0], v[1], v[2])
    }

    pub fn apply_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.m;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn transpose(&self) -> Rotation {
        let m = &self.m;
        Rotation {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Rotation { m }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// `R R^T = I` and `det R = 1`, both within `tol`.
    pub fn is_proper(&self, tol: f64) -> bool {
        let p = self.compose(&self.transpose());
        let orthogonal = (0..3).all(|i| {
            (0..3).all(|j| (p.m[i][j] - if i == j { 1.0 } else { 0.0 }).abs() <= tol)
        });
        orthogonal && (self.determinant() - 1.0).abs() <= tol
    }
}

/// The rotation `R_x` with `R_x e = x` whose axis is `e x x / |e x x|`,
/// `e` the north pole.
///
/// `R_e` is the identity. At the south pole the cross product vanishes and
/// the axis is fixed to `(0, 1, 0)` with angle pi.
pub fn rotation_to_pole(x: &UnitVector) -> Rotation {
    let axis = NORTH_POLE.cross(x);
    let sin_norm = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt();
    if sin_norm == 0.0 {
        return if x.z > 0.0 {
            Rotation::identity()
        } else {
            Rotation::from_axis_angle([0.0, 1.0, 0.0], PI).expect("fixed axis")
        };
    }
    let angle = geodesic_distance(&NORTH_POLE, x);
    Rotation::from_axis_angle(axis, angle).expect("non-zero axis")
}

/// `n` independent points uniform with respect to surface measure.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PointPattern {
    PointPattern::from_points_unchecked((0..n).map(|_| uniform_point(rng)).collect())
}

pub(crate) fn uniform_point<R: Rng + ?Sized>(rng: &mut R) -> UnitVector {
    let z = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let r = (1.0 - z * z).max(0.0).sqrt();
    UnitVector::renormalized(r * phi.cos(), r * phi.sin(), z)
}

/// Golden-spiral (Fibonacci) lattice of `m` near-uniform points.
pub fn deterministic_grid(m: usize) -> Vec<UnitVector> {
    let golden_angle = PI * (3.0 - 5.0f64.sqrt());
    (0..m)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            UnitVector::renormalized(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Observation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    FullSphere,
    /// Closed spherical cap of geodesic `radius` (radians) around `center`.
    Cap { center: UnitVector, radius: f64 },
    /// Result of eroding a cap by at least its radius.
    Empty,
}

impl Window {
    pub fn cap(center: UnitVector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= PI) {
            return Err(Error::input(format!(
                "cap radius must lie in (0, pi], got {radius}"
            )));
        }
        Ok(Window::Cap { center, radius })
    }

    pub fn contains(&self, p: &UnitVector) -> bool {
        match self {
            Window::FullSphere => true,
            Window::Cap { center, radius } => geodesic_distance(center, p) <= *radius,
            Window::Empty => false,
        }
    }

    /// Surface measure of the window.
    pub fn area(&self) -> f64 {
        match self {
            Window::FullSphere => 4.0 * PI,
            Window::Cap { radius, .. } => 2.0 * PI * (1.0 - radius.cos()),
            Window::Empty => 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Window::Empty)
    }

    /// The eroded window `A_{-t}` of points at distance more than `t` from
    /// the complement. `t` is expected in `[0, pi]`.
    pub fn erode(&self, t: f64) -> Window {
        debug_assert!((0.0..=PI).contains(&t), "erosion radius {t} outside [0, pi]");
        match *self {
            Window::FullSphere => Window::FullSphere,
            Window::Cap { center, radius } if radius > t => Window::Cap {
                center,
                radius: radius - t,
            },
            Window::Cap { .. } | Window::Empty => Window::Empty,
        }
    }

    /// Signed depth of `p` inside the window: `p` lies in `erode(t)` iff
    /// `t <= depth` (infinite for the full sphere).
    pub fn depth(&self, p: &UnitVector) -> f64 {
        match self {
            Window::FullSphere => f64::INFINITY,
            Window::Cap { center, radius } => radius - geodesic_distance(center, p),
            Window::Empty => f64::NEG_INFINITY,
        }
    }

    pub fn rotate(&self, rotation: &Rotation) -> Window {
        match *self {
            Window::Cap { center, radius } => Window::Cap {
                center: rotation.apply(&center),
                radius,
            },
            w => w,
        }
    }
}

pub fn erode(window: &Window, t: f64) -> Window {
    window.erode(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    North,
    South,
}

impl Hemisphere {
    pub fn tag(&self) -> &'static str {
        match self {
            Hemisphere::North => "N",
            Hemisphere::South => "S",
        }
    }
}

/// Lambert azimuthal equal-area projection of the point's hemisphere onto
/// the closed unit disc, centered at the nearer pole; the equator maps to
/// the rim. Points with `z >= 0` belong to the northern hemisphere.
pub fn equal_area_projection(p: &UnitVector) -> (Hemisphere, [f64; 2]) {
    // Planar radius is sqrt(1 - |z|); (x, y) / sqrt(1 + |z|) has that norm.
    if p.z >= 0.0 {
        let s = (1.0 + p.z).sqrt();
        (Hemisphere::North, [p.x / s, p.y / s])
    } else {
        let s = (1.0 - p.z).sqrt();
        (Hemisphere::South, [p.x / s, p.y / s])
    }
}
