//! Pointwise quadrature of the collision operator `Q`, the collision
//! frequency `nu`, the linear part `K` and the bilinear part `Gamma`.
//!
//! All integrals run over `xi_*` in the cube rule and `omega` in the sphere
//! rule, sequentially in node order.

use super::{collide_into, maxwellian, sqrt_maxwellian, CollisionKernel, GridFunction, Truncated, VelocityFn};
use crate::error::{Error, Result};
use crate::par;
use crate::quadrature::{Rule, SphereRule, VelocityQuadrature};

fn check_rules(cube: &VelocityQuadrature, sphere: &SphereRule, xi: &[f64]) -> Result<()> {
    let d = xi.len();
    if d == 1 || cube.dim() == 1 || sphere.dim() == 1 {
        return Err(Error::DegenerateSphere);
    }
    if cube.dim() != d {
        return Err(Error::LengthMismatch {
            expected: cube.dim(),
            got: d,
        });
    }
    if sphere.dim() != d {
        return Err(Error::LengthMismatch {
            expected: sphere.dim(),
            got: d,
        });
    }
    Ok(())
}

/// Visits every `(xi_*, omega)` pair with the combined weight
/// `w_* w_omega q(v, theta)` and the post-collision velocities.
#[inline]
fn for_each_collision(
    kernel: &CollisionKernel,
    cube: &VelocityQuadrature,
    sphere: &SphereRule,
    xi: &[f64],
    mut visit: impl FnMut(usize, &[f64], f64, &[f64], &[f64]),
) {
    let d = xi.len();
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    let cw = cube.weights();
    let sw = sphere.weights();
    for j in 0..cube.len() {
        let xs = cube.node(j);
        for k in 0..sphere.len() {
            let (v, cos) = collide_into(xi, xs, sphere.direction(k), &mut a[..d], &mut b[..d]);
            let weight = cw[j] * sw[k] * kernel.q(v, cos);
            visit(j, xs, weight, &a[..d], &b[..d]);
        }
    }
}

/// `Q(f, g)(xi) = 1/2 sum q (f' g'_* + f'_* g' - f g_* - f_* g)`.
pub fn collision_q<F, G>(
    f: &F,
    g: &G,
    kernel: &CollisionKernel,
    cube: &VelocityQuadrature,
    sphere: &SphereRule,
    xi: &[f64],
) -> Result<f64>
where
    F: VelocityFn + ?Sized,
    G: VelocityFn + ?Sized,
{
    check_rules(cube, sphere, xi)?;
    let f0 = f.eval(xi);
    let g0 = g.eval(xi);
    let mut acc = 0.0;
    let mut last = usize::MAX;
    let (mut fs, mut gs) = (0.0, 0.0);
    for_each_collision(kernel, cube, sphere, xi, |j, xs, w, a, b| {
        if j != last {
            fs = f.eval(xs);
            gs = g.eval(xs);
            last = j;
        }
        if w == 0.0 {
            return;
        }
        let gain = f.eval(a) * g.eval(b) + f.eval(b) * g.eval(a);
        let loss = f0 * gs + fs * g0;
        acc += w * (gain - loss);
    });
    Ok(0.5 * acc)
}

/// `nu(xi) = sum q(|xi - xi_*|, theta) M(xi_*)`.
pub fn nu(
    xi: &[f64],
    kernel: &CollisionKernel,
    cube: &VelocityQuadrature,
    sphere: &SphereRule,
) -> Result<f64> {
    loss_frequency(&maxwellian, xi, kernel, cube, sphere)
}

/// `sum q(|xi - xi_*|, theta) f(xi_*)`; `f(xi)` times this is the loss term
/// of `Q(f, f)`.
pub fn loss_frequency<F: VelocityFn + ?Sized>(
    f: &F,
    xi: &[f64],
    kernel: &CollisionKernel,
    cube: &VelocityQuadrature,
    sphere: &SphereRule,
) -> Result<f64> {
    check_rules(cube, sphere, xi)?;
    let mut acc = 0.0;
    for_each_collision(kernel, cube, sphere, xi, |_, xs, w, _, _| {
        acc += w * f.eval(xs);
    });
    Ok(acc)
}

/// `K(u) = 2 M^{-1/2} Q(M, M^{1/2} u chi) + nu u chi`, with `u chi` the
/// argument truncated to the cube of side `truncate_side`.
///
/// Evaluated in the equivalent form
/// `sum q sqrt(M_*) [sqrt(M') (u chi)'_* + sqrt(M'_*) (u chi)' - sqrt(M) (u chi)_*]`
/// in which the `nu` terms cancel algebraically (the cancellation is exact
/// for the discrete rules as well, since `nu` uses the same rules). This form
/// never divides by `sqrt(M)`, which underflows far out in velocity.
pub fn k_op<U: VelocityFn + ?Sized>(
    u: &U,
    truncate_side: f64,
    kernel: &CollisionKernel,
    cube: &VelocityQuadrature,
    sphere: &SphereRule,
    xi: &[f64],
) -> Result<f64> {
    check_rules(cube, sphere, xi)?;
    let ub = Truncated::new(u, truncate_side);
    let sm = sqrt_maxwellian(xi);
    let mut acc = 0.0;
    for_each_collision(kernel, cube, sphere, xi, |_, xs, w, a, b| {
        if w == 0.0 {
            return;
        }
        let sms = sqrt_maxwellian(xs);
        let inner = sqrt_maxwellian(a) * ub.eval(b) + sqrt_maxwellian(b) * ub.eval(a) - sm * ub.eval(xs);
        acc += w * sms * inner;
    });
    Ok(acc)
}

/// `Gamma(u, v) = M^{-1/2} Q(M^{1/2} u chi, M^{1/2} v chi)`, evaluated as
/// `1/2 sum q sqrt(M_*) (u' v'_* + u'_* v' - u v_* - u_* v)` with truncated
/// arguments (using `M' M'_* = M M_*`).
#[allow(clippy::too_many_arguments)]
pub fn gamma_op<U, V>(
    u: &U,
    v: &V,
    truncate_side: f64,
    kernel: &CollisionKernel,
    cube: &VelocityQuadrature,
    sphere: &SphereRule,
    xi: &[f64],
) -> Result<f64>
where
    U: VelocityFn + ?Sized,
    V: VelocityFn + ?Sized,
{
    check_rules(cube, sphere, xi)?;
    let ub = Truncated::new(u, truncate_side);
    let vb = Truncated::new(v, truncate_side);
    let u0 = ub.eval(xi);
    let v0 = vb.eval(xi);
    let mut acc = 0.0;
    for_each_collision(kernel, cube, sphere, xi, |_, xs, w, a, b| {
        if w == 0.0 {
            return;
        }
        let sms = sqrt_maxwellian(xs);
        let gain = ub.eval(a) * vb.eval(b) + ub.eval(b) * vb.eval(a);
        let loss = u0 * vb.eval(xs) + ub.eval(xs) * v0;
        acc += w * sms * (gain - loss);
    });
    Ok(0.5 * acc)
}

/// `sum_i w_i log f(xi_i) Q(f, f)(xi_i)` over the nodes of `cube`, with the
/// collision integrals also taken over `cube`. Nonpositive node values are
/// rejected.
pub fn entropy_production_fn<F: VelocityFn + ?Sized>(
    f: &F,
    kernel: &CollisionKernel,
    cube: &VelocityQuadrature,
    sphere: &SphereRule,
) -> Result<f64> {
    let values: Vec<f64> = (0..cube.len()).map(|i| f.eval(cube.node(i))).collect();
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositive { index, value });
    }
    check_rules(cube, sphere, cube.node(0))?;
    let w = cube.weights();
    Ok(par::chunked_sum(cube.len(), |i| {
        let q = collision_q(f, f, kernel, cube, sphere, cube.node(i)).expect("rules checked above");
        w[i] * values[i].ln() * q
    }))
}

/// Entropy production of a grid function on its own rule.
pub fn entropy_production(
    f: &GridFunction,
    kernel: &CollisionKernel,
    sphere: &SphereRule,
) -> Result<f64> {
    entropy_production_fn(f, kernel, f.rule(), sphere)
}
