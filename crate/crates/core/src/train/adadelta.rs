use crate::error::{Error, Result};
use crate::model::{GcnGrads, GcnParams};
use crate::tensor::Tensor;

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPS: f64 = 1e-6;

/// Running averages of squared gradients (`eg2`) and squared updates (`edx2`),
/// one pair per trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState {
    pub rho: f64,
    pub eps: f64,
    pub eg2: Vec<Tensor>,
    pub edx2: Vec<Tensor>,
}

impl AdadeltaState {
    pub fn new(shapes: &[Vec<usize>], rho: f64, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::invalid(format!("rho must lie in [0, 1), got {rho}")));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        let zeros: Vec<Tensor> = shapes.iter().map(|s| Tensor::zeros(s)).collect();
        Ok(Self {
            rho,
            eps,
            eg2: zeros.clone(),
            edx2: zeros,
        })
    }

    pub fn for_params(params: &GcnParams, rho: f64, eps: f64) -> Result<Self> {
        Self::new(&params.trainable_shapes(), rho, eps)
    }

    /// Applies one update to every trainable tensor of `params`.
    pub fn apply(&mut self, params: &mut GcnParams, grads: &GcnGrads) -> Result<()> {
        let grads = grads.tensors();
        let mut targets = params.trainable_mut();
        if grads.len() != targets.len() || targets.len() != self.eg2.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} tensors, model has {}, gradient has {}",
                self.eg2.len(),
                targets.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in targets.iter_mut().zip(grads).enumerate() {
            adadelta_step(p, g, &mut self.eg2[i], &mut self.edx2[i], self.rho, self.eps)?;
        }
        Ok(())
    }
}

/// One elementwise Adadelta update:
///
/// ```text
/// Eg2  ← ρ·Eg2 + (1−ρ)·g²
/// Δ    = −sqrt((Edx2 + ε) / (Eg2 + ε))·g
/// Edx2 ← ρ·Edx2 + (1−ρ)·Δ²
/// θ    ← θ + Δ
/// ```
pub fn adadelta_step(
    param: &mut Tensor,
    grad: &Tensor,
    eg2: &mut Tensor,
    edx2: &mut Tensor,
    rho: f64,
    eps: f64,
) -> Result<()> {
    param.expect_same_shape(grad)?;
    param.expect_same_shape(eg2)?;
    param.expect_same_shape(edx2)?;
    let it = param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(eg2.data_mut().iter_mut().zip(edx2.data_mut().iter_mut()));
    for ((p, &g), (sg, sx)) in it {
        *sg = rho * *sg + (1.0 - rho) * g * g;
        let delta = -((*sx + eps) / (*sg + eps)).sqrt() * g;
        *sx = rho * *sx + (1.0 - rho) * delta * delta;
        *p += delta;
    }
    Ok(())
}
