use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::param::ParamTensor;
use crate::error::{Error, Result};

/// Frozen `M × N` weights drawn from `U(-1/√(N/2), 1/√(N/2))`.
pub fn rcpc_init(in_channels: usize, out_channels: usize, seed: u64) -> Result<ParamTensor> {
    if in_channels < 2 {
        return Err(Error::Config(format!(
            "random-constant PC needs >= 2 input channels, got {in_channels}"
        )));
    }
    if out_channels == 0 {
        return Err(Error::Config("random-constant PC needs >= 1 output channel".into()));
    }
    let bound = rcpc_bound(in_channels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ParamTensor::uniform(
        "rcpc.weight",
        vec![out_channels, in_channels],
        bound,
        &mut rng,
        false,
    ))
}

pub fn rcpc_bound(in_channels: usize) -> f64 {
    1.0 / (in_channels as f64 / 2.0).sqrt()
}

/// Bound used for learnable convolution and FC weights: `1/√fan_in`.
pub fn fan_in_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert_eq!(rcpc_bound(8), 0.5);
        assert_eq!(rcpc_bound(2), 1.0);
        let w = rcpc_init(8, 16, 3).unwrap();
        assert!(!w.learnable);
        assert_eq!(w.shape, vec![16, 8]);
        assert!(w.values.iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn deterministic() {
        assert_eq!(rcpc_init(8, 8, 42).unwrap(), rcpc_init(8, 8, 42).unwrap());
        assert_ne!(rcpc_init(8, 8, 42).unwrap().values, rcpc_init(8, 8, 43).unwrap().values);
    }

    #[test]
    fn too_few_channels() {
        assert!(rcpc_init(1, 4, 0).is_err());
    }
}
