//! Deterministic integration rules: tensor rules on the velocity cube
//! `[-R/2, R/2]^d`, direction sets on the unit sphere, equispaced rules on the
//! torus `[-pi, pi)^d` and Gauss-Legendre rules in time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Anything that carries one weight per node.
pub trait Rule {
    fn weights(&self) -> &[f64];

    fn len(&self) -> usize {
        self.weights().len()
    }

    fn is_empty(&self) -> bool {
        self.weights().is_empty()
    }
}

/// Weighted sum of `values` against the rule, accumulated in ascending
/// node order.
pub fn integrate<R: Rule + ?Sized>(values: &[f64], rule: &R) -> Result<f64> {
    let w = rule.weights();
    check_len(w.len(), values.len())?;
    let mut acc = 0.0;
    for (v, w) in values.iter().zip(w) {
        acc += v * w;
    }
    Ok(acc)
}

/// Legendre polynomial `P_n(z)` and its derivative.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// A one-dimensional rule.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AxisRule {
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Self {
        let (x, w) = gauss_legendre(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Self {
            nodes: x.iter().map(|x| mid + half * x).collect(),
            weights: w.iter().map(|w| half * w).collect(),
        }
    }

    /// Cell midpoints of `n` equal cells on `[a, b]`.
    pub fn midpoint(n: usize, a: f64, b: f64) -> Self {
        let h = (b - a) / n as f64;
        Self {
            nodes: (0..n).map(|k| a + (k as f64 + 0.5) * h).collect(),
            weights: vec![h; n],
        }
    }

    /// Periodic trapezoid rule: nodes `a + k h`, `k = 0..n`, on `[a, b)`.
    pub fn periodic(n: usize, a: f64, b: f64) -> Self {
        let h = (b - a) / n as f64;
        Self {
            nodes: (0..n).map(|k| a + k as f64 * h).collect(),
            weights: vec![h; n],
        }
    }
}

impl Rule for AxisRule {
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Node placement of a tensor cube rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubeScheme {
    GaussLegendre,
    Midpoint,
}

/// Up to `2^3` interpolation taps into a tensor grid.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Stencil {
    idx: [u32; 8],
    w: [f64; 8],
    len: u8,
}

impl Stencil {
    fn push(&mut self, i: usize, w: f64) {
        let k = self.len as usize;
        self.idx[k] = i as u32;
        self.w[k] = w;
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len as usize).map(move |k| (self.idx[k] as usize, self.w[k]))
    }

    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len as usize {
            acc += self.w[k] * values[self.idx[k] as usize];
        }
        acc
    }
}

/// Nodes and weights on the velocity cube `Q_R = [-R/2, R/2]^d` (or on the
/// shell between two concentric cubes, for tail estimates).
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityQuadrature {
    dim: usize,
    side: f64,
    hole: f64,
    axis: Option<AxisRule>,
    scheme: Option<CubeScheme>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::Dimension(dim))
    }
}

fn tensor(dim: usize, axes: &[&AxisRule]) -> (Vec<f64>, Vec<f64>) {
    let sizes: Vec<usize> = axes.iter().map(|a| a.nodes.len()).collect();
    let total: usize = sizes.iter().product();
    let mut nodes = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        let mut point = [0.0; 3];
        // Last axis varies fastest.
        for k in (0..dim).rev() {
            let i = rem % sizes[k];
            rem /= sizes[k];
            point[k] = axes[k].nodes[i];
            w *= axes[k].weights[i];
        }
        nodes.extend_from_slice(&point[..dim]);
        weights.push(w);
    }
    (nodes, weights)
}

impl VelocityQuadrature {
    /// Tensor Gauss-Legendre rule with `points_per_dim` nodes per axis.
    pub fn cube(dim: usize, side: f64, points_per_dim: usize) -> Result<Self> {
        Self::cube_with(dim, side, points_per_dim, CubeScheme::GaussLegendre)
    }

    pub fn cube_with(
        dim: usize,
        side: f64,
        points_per_dim: usize,
        scheme: CubeScheme,
    ) -> Result<Self> {
        check_dim(dim)?;
        if points_per_dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "points_per_dim must be at least 2, got {points_per_dim}"
            )));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::InvalidArgument(format!("cube side must be positive, got {side}")));
        }
        let half = 0.5 * side;
        let axis = match scheme {
            CubeScheme::GaussLegendre => AxisRule::gauss_legendre(points_per_dim, -half, half),
            CubeScheme::Midpoint => AxisRule::midpoint(points_per_dim, -half, half),
        };
        let axes = vec![&axis; dim];
        let (nodes, weights) = tensor(dim, &axes);
        Ok(Self {
            dim,
            side,
            hole: 0.0,
            axis: Some(axis),
            scheme: Some(scheme),
            nodes,
            weights,
        })
    }

    /// Rule on `Q_outer \ Q_inner`, built from Gauss-Legendre boxes. Used to
    /// approximate integrals over the complement of the truncation cube.
    pub fn shell(dim: usize, inner: f64, outer: f64, points_per_dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if !(inner > 0.0 && outer > inner) || points_per_dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "shell needs 0 < inner < outer and points_per_dim >= 2, got {inner}, {outer}, {points_per_dim}"
            )));
        }
        let (a, b) = (0.5 * inner, 0.5 * outer);
        let pieces = [
            AxisRule::gauss_legendre(points_per_dim, -b, -a),
            AxisRule::gauss_legendre(points_per_dim, -a, a),
            AxisRule::gauss_legendre(points_per_dim, a, b),
        ];
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let boxes = 3usize.pow(dim as u32);
        for code in 0..boxes {
            let mut rem = code;
            let mut axes = Vec::with_capacity(dim);
            let mut all_centre = true;
            for _ in 0..dim {
                let p = rem % 3;
                rem /= 3;
                all_centre &= p == 1;
                axes.push(&pieces[p]);
            }
            if all_centre {
                continue;
            }
            let (n, w) = tensor(dim, &axes);
            nodes.extend(n);
            weights.extend(w);
        }
        Ok(Self {
            dim,
            side: outer,
            hole: inner,
            axis: None,
            scheme: None,
            nodes,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Side length `R` of the (outer) cube.
    pub fn side(&self) -> f64 {
        self.side
    }

    /// Side length of the excluded inner cube (zero for plain cube rules).
    pub fn hole(&self) -> f64 {
        self.hole
    }

    pub fn scheme(&self) -> Option<CubeScheme> {
        self.scheme
    }

    pub fn points_per_dim(&self) -> Option<usize> {
        self.axis.as_ref().map(|a| a.nodes.len())
    }

    pub fn axis(&self) -> Option<&AxisRule> {
        self.axis.as_ref()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Short identifier used in manifests and CSV rows.
    pub fn label(&self) -> String {
        match (self.scheme, &self.axis) {
            (Some(CubeScheme::GaussLegendre), Some(a)) => {
                format!("gl{}^{}@R{}", a.nodes.len(), self.dim, self.side)
            }
            (Some(CubeScheme::Midpoint), Some(a)) => {
                format!("mid{}^{}@R{}", a.nodes.len(), self.dim, self.side)
            }
            _ => format!("shell{}d@R{}-{}", self.dim, self.hole, self.side),
        }
    }

    /// Whether `xi` lies in the closed cube `[-R/2, R/2]^d`.
    pub fn contains(&self, xi: &[f64]) -> bool {
        let half = 0.5 * self.side;
        xi.iter().all(|x| x.abs() <= half)
    }

    /// Multilinear interpolation taps for a tensor rule. Grid functions are
    /// extended by zero: the value at each cube face is 0 and points outside
    /// the cube get an empty stencil.
    pub fn stencil(&self, xi: &[f64]) -> Stencil {
        let axis = match &self.axis {
            Some(a) => a,
            None => return Stencil::default(),
        };
        let n = axis.nodes.len();
        let half = 0.5 * self.side;
        let mut taps: [[(usize, f64); 2]; 3] = [[(0, 0.0); 2]; 3];
        let mut counts = [0usize; 3];
        for k in 0..self.dim {
            let x = xi[k];
            if !(x >= -half && x <= half) {
                return Stencil::default();
            }
            let p = axis.nodes.partition_point(|&node| node <= x);
            let xl = if p == 0 { -half } else { axis.nodes[p - 1] };
            let xr = if p == n { half } else { axis.nodes[p] };
            let t = if xr > xl { (x - xl) / (xr - xl) } else { 0.0 };
            let mut c = 0;
            if p > 0 && t < 1.0 {
                taps[k][c] = (p - 1, 1.0 - t);
                c += 1;
            }
            if p < n && t > 0.0 {
                taps[k][c] = (p, t);
                c += 1;
            }
            if c == 0 {
                return Stencil::default();
            }
            counts[k] = c;
        }
        let mut s = Stencil::default();
        match self.dim {
            1 => {
                for &(i, w) in &taps[0][..counts[0]] {
                    s.push(i, w);
                }
            }
            2 => {
                for &(i, wi) in &taps[0][..counts[0]] {
                    for &(j, wj) in &taps[1][..counts[1]] {
                        s.push(i * n + j, wi * wj);
                    }
                }
            }
            _ => {
                for &(i, wi) in &taps[0][..counts[0]] {
                    for &(j, wj) in &taps[1][..counts[1]] {
                        for &(l, wl) in &taps[2][..counts[2]] {
                            s.push((i * n + j) * n + l, wi * wj * wl);
                        }
                    }
                }
            }
        }
        s
    }
}

impl Rule for VelocityQuadrature {
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Directions and weights on the unit sphere `S^{d-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereRule {
    dim: usize,
    directions: Vec<f64>,
    weights: Vec<f64>,
    degree: usize,
}

const LEBEDEV_6: [(f64, usize); 1] = [(1.0 / 6.0, 0)];
const LEBEDEV_14: [(f64, usize); 2] = [(1.0 / 15.0, 0), (3.0 / 40.0, 2)];
const LEBEDEV_26: [(f64, usize); 3] = [(1.0 / 21.0, 0), (4.0 / 105.0, 1), (9.0 / 280.0, 2)];

/// Octahedral orbits: 0 = the six vertices, 1 = the twelve edge midpoints,
/// 2 = the eight cube corners.
fn orbit(kind: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    match kind {
        0 => {
            for k in 0..3 {
                for s in [1.0, -1.0] {
                    let mut p = [0.0; 3];
                    p[k] = s;
                    out.push(p);
                }
            }
        }
        1 => {
            let a = std::f64::consts::FRAC_1_SQRT_2;
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                for si in [a, -a] {
                    for sj in [a, -a] {
                        let mut p = [0.0; 3];
                        p[i] = si;
                        p[j] = sj;
                        out.push(p);
                    }
                }
            }
        }
        _ => {
            let a = 1.0 / 3f64.sqrt();
            for sx in [a, -a] {
                for sy in [a, -a] {
                    for sz in [a, -a] {
                        out.push([sx, sy, sz]);
                    }
                }
            }
        }
    }
    out
}

impl SphereRule {
    /// `d = 1`: the pair `{+1, -1}`; `d = 2`: `n_dirs` equispaced angles;
    /// `d = 3`: Lebedev rules for 6, 14 or 26 directions, otherwise a
    /// product rule (Gauss-Legendre in the polar cosine, equispaced azimuth)
    /// with about `n_dirs` directions.
    pub fn new(dim: usize, n_dirs: usize) -> Result<Self> {
        check_dim(dim)?;
        if dim >= 2 && n_dirs < 2 {
            return Err(Error::InvalidArgument(format!(
                "sphere rule needs at least 2 directions, got {n_dirs}"
            )));
        }
        let rule = match dim {
            1 => Self {
                dim,
                directions: vec![1.0, -1.0],
                weights: vec![1.0, 1.0],
                degree: usize::MAX,
            },
            2 => {
                let h = 2.0 * PI / n_dirs as f64;
                let mut directions = Vec::with_capacity(2 * n_dirs);
                for k in 0..n_dirs {
                    let phi = (k as f64 + 0.5) * h;
                    directions.push(phi.cos());
                    directions.push(phi.sin());
                }
                Self {
                    dim,
                    directions,
                    weights: vec![h; n_dirs],
                    degree: n_dirs - 1,
                }
            }
            _ => {
                let lebedev: Option<(&[(f64, usize)], usize)> = match n_dirs {
                    6 => Some((&LEBEDEV_6, 3)),
                    14 => Some((&LEBEDEV_14, 5)),
                    26 => Some((&LEBEDEV_26, 7)),
                    _ => None,
                };
                match lebedev {
                    Some((table, degree)) => {
                        let mut directions = Vec::new();
                        let mut weights = Vec::new();
                        for &(w, kind) in table {
                            for p in orbit(kind) {
                                directions.extend_from_slice(&p);
                                weights.push(4.0 * PI * w);
                            }
                        }
                        Self {
                            dim,
                            directions,
                            weights,
                            degree,
                        }
                    }
                    None => Self::product(n_dirs),
                }
            }
        };
        Ok(rule)
    }

    fn product(n_dirs: usize) -> Self {
        let n_theta = ((n_dirs as f64 / 2.0).sqrt().round() as usize).max(2);
        let n_phi = 2 * n_theta;
        let polar = AxisRule::gauss_legendre(n_theta, -1.0, 1.0);
        let h = 2.0 * PI / n_phi as f64;
        let mut directions = Vec::new();
        let mut weights = Vec::new();
        for (c, wc) in polar.nodes.iter().zip(&polar.weights) {
            let s = (1.0 - c * c).sqrt();
            for k in 0..n_phi {
                let phi = (k as f64 + 0.5) * h;
                directions.extend_from_slice(&[s * phi.cos(), s * phi.sin(), *c]);
                weights.push(wc * h);
            }
        }
        Self {
            dim: 3,
            directions,
            weights,
            degree: (2 * n_theta - 1).min(n_phi - 1),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn direction(&self, k: usize) -> &[f64] {
        &self.directions[k * self.dim..(k + 1) * self.dim]
    }

    /// Polynomial degree integrated exactly (`usize::MAX` for `d = 1`).
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn label(&self) -> String {
        format!("sphere{}d-{}", self.dim, self.weights.len())
    }

    /// Collapses each antipodal pair `{w, -w}` with equal weights into one
    /// direction of doubled weight. Collision integrands with an angular
    /// profile even in `cos(theta)` take the same value at `w` and `-w`, so
    /// the collapsed rule gives the same integral with half the work. Rules
    /// without full antipodal symmetry are returned unchanged.
    pub fn merged_antipodes(&self) -> SphereRule {
        let n = self.weights.len();
        let mut partner = vec![usize::MAX; n];
        for i in 0..n {
            if partner[i] != usize::MAX {
                continue;
            }
            let di = self.direction(i);
            let found = (i + 1..n).find(|&j| {
                partner[j] == usize::MAX
                    && self
                        .direction(j)
                        .iter()
                        .zip(di)
                        .all(|(a, b)| (a + b).abs() < 1e-12)
                    && (self.weights[j] - self.weights[i]).abs() <= 1e-14 * self.weights[i]
            });
            match found {
                Some(j) => {
                    partner[i] = j;
                    partner[j] = i;
                }
                None => return self.clone(),
            }
        }
        let mut directions = Vec::with_capacity(n / 2 * self.dim);
        let mut weights = Vec::with_capacity(n / 2);
        for i in 0..n {
            if partner[i] > i {
                directions.extend_from_slice(self.direction(i));
                weights.push(2.0 * self.weights[i]);
            }
        }
        SphereRule {
            dim: self.dim,
            directions,
            weights,
            degree: 1,
        }
    }
}

impl Rule for SphereRule {
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Product rule on `[0, T] x [-pi, pi)^{d_x}`: Gauss-Legendre in time,
/// periodic trapezoid in space.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeGrid {
    dx: usize,
    t_end: f64,
    time: AxisRule,
    space: AxisRule,
    x_nodes: Vec<f64>,
    x_weights: Vec<f64>,
}

impl SpaceTimeGrid {
    pub fn new(dx: usize, x_points: usize, t_points: usize, t_end: f64) -> Result<Self> {
        check_dim(dx)?;
        if x_points < 1 || t_points < 1 || !(t_end > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "space-time grid needs positive sizes and T > 0, got {x_points}, {t_points}, {t_end}"
            )));
        }
        let space = AxisRule::periodic(x_points, -PI, PI);
        let time = AxisRule::gauss_legendre(t_points, 0.0, t_end);
        let axes = vec![&space; dx];
        let (x_nodes, x_weights) = tensor(dx, &axes);
        Ok(Self {
            dx,
            t_end,
            time,
            space,
            x_nodes,
            x_weights,
        })
    }

    pub fn dx(&self) -> usize {
        self.dx
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn time(&self) -> &AxisRule {
        &self.time
    }

    pub fn space_axis(&self) -> &AxisRule {
        &self.space
    }

    pub fn x_len(&self) -> usize {
        self.x_weights.len()
    }

    pub fn x_node(&self, i: usize) -> &[f64] {
        &self.x_nodes[i * self.dx..(i + 1) * self.dx]
    }

    pub fn x_weights(&self) -> &[f64] {
        &self.x_weights
    }

    pub fn label(&self) -> String {
        format!(
            "t-gl{}@T{}_x-per{}^{}",
            self.time.nodes.len(),
            self.t_end,
            self.space.nodes.len(),
            self.dx
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_small_orders() {
        let (x, w) = gauss_legendre(2);
        assert_relative_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        let (x, w) = gauss_legendre(3);
        assert_relative_eq!(x[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_eq!(x[1], 0.0);
        assert_relative_eq!(w[1], 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in [2usize, 5, 8, 17, 40] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} q={q}");
            }
        }
    }

    #[test]
    fn cube_weight_sum_and_containment() {
        for dim in 1..=3 {
            let r = VelocityQuadrature::cube(dim, 5.0, 7).unwrap();
            let s: f64 = r.weights().iter().sum();
            assert_relative_eq!(s, 5f64.powi(dim as i32), max_relative = 1e-12);
            assert!((0..r.len()).all(|i| r.contains(r.node(i))));
            assert!(r.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(matches!(VelocityQuadrature::cube(4, 1.0, 3), Err(Error::Dimension(4))));
        assert!(matches!(VelocityQuadrature::cube(0, 1.0, 3), Err(Error::Dimension(0))));
        assert!(SphereRule::new(2, 1).is_err());
    }

    #[test]
    fn shell_measure() {
        let s = VelocityQuadrature::shell(2, 4.0, 10.0, 4).unwrap();
        let total: f64 = s.weights().iter().sum();
        assert_relative_eq!(total, 100.0 - 16.0, max_relative = 1e-12);
        assert!((0..s.len()).all(|i| !VelocityQuadrature::cube(2, 3.99, 2).unwrap().contains(s.node(i))));
    }

    #[test]
    fn interpolation_reproduces_nodes_and_is_zero_outside() {
        let r = VelocityQuadrature::cube(2, 4.0, 5).unwrap();
        let vals: Vec<f64> = (0..r.len()).map(|i| (i as f64).sin()).collect();
        for i in 0..r.len() {
            let s = r.stencil(r.node(i));
            assert_relative_eq!(s.apply(&vals), vals[i], epsilon = 1e-14);
        }
        assert!(r.stencil(&[2.5, 0.0]).is_empty());
        assert_eq!(r.stencil(&[2.0, 0.0]).apply(&vals), 0.0);
    }

    #[test]
    fn interpolation_exact_for_bilinear_inside_hull() {
        let r = VelocityQuadrature::cube(2, 4.0, 6).unwrap();
        let f = |p: &[f64]| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
        let vals: Vec<f64> = (0..r.len()).map(|i| f(r.node(i))).collect();
        let a = r.axis().unwrap();
        let lo = a.nodes[0];
        let hi = a.nodes[a.nodes.len() - 1];
        for &(x, y) in &[(0.3, -0.7), (lo, hi), (0.0, 0.0), (1.1, 1.2)] {
            let s = r.stencil(&[x, y]);
            assert_relative_eq!(s.apply(&vals), f(&[x, y]), epsilon = 1e-12);
        }
    }

    #[test]
    fn sphere_basic_moments() {
        let s = SphereRule::new(2, 16).unwrap();
        let total: f64 = s.weights().iter().sum();
        assert_relative_eq!(total, 2.0 * PI, epsilon = 1e-13);
        let m1: f64 = (0..s.len()).map(|k| s.weights()[k] * s.direction(k)[0]).sum();
        assert!(m1.abs() < 1e-14);
        let s = SphereRule::new(3, 26).unwrap();
        let m2: f64 = (0..s.len()).map(|k| s.weights()[k] * s.direction(k)[0].powi(2)).sum();
        assert_relative_eq!(m2, 4.0 * PI / 3.0, epsilon = 1e-8);
        let s = SphereRule::new(1, 0).unwrap();
        assert_eq!(s.weights(), &[1.0, 1.0]);
        assert_eq!(s.direction(1), &[-1.0]);
    }

    #[test]
    fn merged_antipodes_halves_rule() {
        for (d, n) in [(2, 16), (3, 26), (3, 14), (3, 50)] {
            let s = SphereRule::new(d, n).unwrap();
            let m = s.merged_antipodes();
            assert_eq!(m.len() * 2, s.len());
            let a: f64 = s.weights().iter().sum();
            let b: f64 = m.weights().iter().sum();
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn space_time_weights() {
        let g = SpaceTimeGrid::new(2, 8, 5, 0.5).unwrap();
        let sx: f64 = g.x_weights().iter().sum();
        let st: f64 = g.time().weights.iter().sum();
        assert_relative_eq!(sx, (2.0 * PI).powi(2), max_relative = 1e-13);
        assert_relative_eq!(st, 0.5, max_relative = 1e-14);
    }
}
