use crate::error::{Error, Result};
use crate::rng::Rng;

use super::Tensor;

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> Result<f64> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid(format!(
            "glorot fans must be positive, got fan_in={fan_in}, fan_out={fan_out}"
        )));
    }
    Ok((6.0 / (fan_in + fan_out) as f64).sqrt())
}

/// I.i.d. samples from `U[-L, L]` with `L = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rng: &mut Rng, fan_in: usize, fan_out: usize, shape: &[usize]) -> Result<Tensor> {
    let limit = glorot_limit(fan_in, fan_out)?;
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::shape(format!("invalid tensor shape {shape:?}")));
    }
    Ok(Tensor::from_fn(shape, |_| rng.uniform_range(-limit, limit)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_values() {
        assert!((glorot_limit(900, 100).unwrap() - 0.077_459_666_924_148_34).abs() < 1e-15);
        assert_eq!(glorot_limit(3, 3).unwrap(), 1.0);
    }

    #[test]
    fn zero_fan_rejected() {
        let mut rng = Rng::new(0);
        assert!(matches!(
            glorot_uniform(&mut rng, 0, 3, &[2, 2]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(glorot_uniform(&mut rng, 3, 0, &[2, 2]).is_err());
    }

    #[test]
    fn samples_within_limit_and_centered() {
        let mut rng = Rng::new(1234);
        let t = glorot_uniform(&mut rng, 3, 3, &[100_000]).unwrap();
        assert!(t.data().iter().all(|x| (-1.0..=1.0).contains(x)));
        let mean = t.sum() / t.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn deterministic_per_seed() {
        let a = glorot_uniform(&mut Rng::new(5), 10, 4, &[4, 10]).unwrap();
        let b = glorot_uniform(&mut Rng::new(5), 10, 4, &[4, 10]).unwrap();
        assert_eq!(a.data(), b.data());
    }
}
