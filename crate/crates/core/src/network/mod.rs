//! Dense tanh networks `u(t, x, xi)` with exact input jets (value, first and
//! second derivatives) and exact parameter gradients.

mod checkpoint;
mod jet;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use jet::{JetBatch, JetOrder, JetTrace};

/// Input layout and hidden widths. Raw inputs are ordered
/// `(t, x_1..x_dx, xi_1..xi_dxi)`; with `periodic` each `x_i` enters the
/// first layer as the pair `(sin x_i, cos x_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub dx: usize,
    pub dxi: usize,
    pub hidden: Vec<usize>,
    pub periodic: bool,
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        1 + self.dx + self.dxi
    }

    pub fn feature_dim(&self) -> usize {
        1 + if self.periodic { 2 * self.dx } else { self.dx } + self.dxi
    }

    /// Index of `x_i` among the raw inputs.
    pub fn x_index(&self, i: usize) -> usize {
        1 + i
    }

    /// Index of `xi_i` among the raw inputs.
    pub fn xi_index(&self, i: usize) -> usize {
        1 + self.dx + i
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "hidden widths must be nonempty and positive, got {:?}",
                self.hidden
            )));
        }
        if self.dx > 3 || self.dxi > 3 {
            return Err(Error::InvalidArgument(format!(
                "at most 3 space and 3 velocity inputs, got {} and {}",
                self.dx, self.dxi
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let mut fan_in = self.feature_dim();
        let mut total = 0;
        for &w in self.hidden.iter().chain(std::iter::once(&1)) {
            total += w * fan_in + w;
            fan_in = w;
        }
        total
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Dense {
    pub(crate) w: Array2<f64>,
    pub(crate) b: Array1<f64>,
}

/// Scalar-output network: `tanh` hidden layers and an affine output.
#[derive(Clone, Debug, PartialEq)]
pub struct TanhNetwork {
    arch: Architecture,
    layers: Vec<Dense>,
}

impl TanhNetwork {
    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(arch.hidden.len() + 1);
        let mut fan_in = arch.feature_dim();
        for &out in arch.hidden.iter().chain(std::iter::once(&1)) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((out, fan_in), |_| rng.random_range(-bound..bound));
            let b = Array1::from_shape_fn(out, |_| rng.random_range(-bound..bound));
            layers.push(Dense { w, b });
            fan_in = out;
        }
        Ok(Self { arch, layers })
    }

    /// All weights and biases zero.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        let mut net = Self::new(arch, 0)?;
        net.set_params(&vec![0.0; net.param_count()])?;
        Ok(net)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    /// Parameters flattened layer by layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        crate::error::check_len(self.param_count(), p.len())?;
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.w.iter_mut() {
                *v = p[k];
                k += 1;
            }
            for v in l.b.iter_mut() {
                *v = p[k];
                k += 1;
            }
        }
        Ok(())
    }

    /// Value at one raw input point.
    pub fn forward(&self, point: &[f64]) -> Result<f64> {
        crate::error::check_len(self.arch.input_dim(), point.len())?;
        let mut a = self.features(point);
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let mut z = l.w.dot(&a) + &l.b;
            if li < last {
                z.mapv_inplace(f64::tanh);
            }
            a = z;
        }
        Ok(a[0])
    }

    fn features(&self, point: &[f64]) -> Array1<f64> {
        let mut f = Vec::with_capacity(self.arch.feature_dim());
        f.push(point[0]);
        for i in 0..self.arch.dx {
            let x = point[self.arch.x_index(i)];
            if self.arch.periodic {
                let x = jet::wrap_angle(x);
                f.push(x.sin());
                f.push(x.cos());
            } else {
                f.push(x);
            }
        }
        for i in 0..self.arch.dxi {
            f.push(point[self.arch.xi_index(i)]);
        }
        Array1::from(f)
    }

    /// Value, gradient and Hessian with respect to all raw inputs at one
    /// point. `order` limits what is computed; absent parts are empty.
    pub fn input_jet(&self, point: &[f64], order: JetOrder) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        crate::error::check_len(self.arch.input_dim(), point.len())?;
        let dirs: Vec<usize> = (0..self.arch.input_dim()).collect();
        let (batch, _) = self.jets(point, &dirs, order)?;
        let m = dirs.len();
        let grad = if order >= JetOrder::First {
            (0..m).map(|k| batch.first(0, k)).collect()
        } else {
            Vec::new()
        };
        let hess = if order == JetOrder::Second {
            (0..m)
                .map(|k| (0..m).map(|l| batch.second(0, k, l)).collect())
                .collect()
        } else {
            Vec::new()
        };
        Ok((batch.value(0), grad, hess))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(periodic: bool) -> Architecture {
        Architecture {
            dx: 1,
            dxi: 2,
            hidden: vec![6, 5],
            periodic,
        }
    }

    #[test]
    fn param_roundtrip_and_count() {
        let net = TanhNetwork::new(arch(true), 3).unwrap();
        let p = net.params();
        assert_eq!(p.len(), (6 * 5 + 6) + (5 * 6 + 5) + (5 + 1));
        let mut other = TanhNetwork::new(arch(true), 4).unwrap();
        other.set_params(&p).unwrap();
        assert_eq!(other, net);
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let mut net = TanhNetwork::zeros(arch(false)).unwrap();
        let mut p = net.params();
        *p.last_mut().unwrap() = 0.75;
        net.set_params(&p).unwrap();
        assert_eq!(net.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap(), 0.75);
    }

    #[test]
    fn single_layer_closed_form() {
        let a = Architecture {
            dx: 0,
            dxi: 1,
            hidden: vec![1],
            periodic: false,
        };
        let mut net = TanhNetwork::zeros(a).unwrap();
        // u = 2 tanh(0.5 t - 1.5 xi + 0.25) - 0.5
        net.set_params(&[0.5, -1.5, 0.25, 2.0, -0.5]).unwrap();
        let (t, xi) = (0.3, -0.7);
        let expect = 2.0 * (0.5 * t - 1.5 * xi + 0.25f64).tanh() - 0.5;
        assert_eq!(net.forward(&[t, xi]).unwrap(), expect);
    }

    #[test]
    fn periodic_embedding_is_periodic() {
        let net = TanhNetwork::new(arch(true), 9).unwrap();
        let x = 0.4;
        let a = net.forward(&[0.2, x, 0.1, -0.3]).unwrap();
        let b = net.forward(&[0.2, x + 2.0 * std::f64::consts::PI, 0.1, -0.3]).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = TanhNetwork::new(arch(true), 9).unwrap();
        assert!(net.forward(&[0.0; 3]).is_err());
    }
}
