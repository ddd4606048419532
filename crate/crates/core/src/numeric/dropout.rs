use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

/// Inverted dropout mask: in training each entry is `1/keep_prob` with
/// probability `keep_prob`, else 0. Inference returns all ones.
pub fn dropout_mask(
    shape: &[usize],
    keep_prob: f64,
    rng: &mut RngStream,
    mode: Mode,
) -> Result<Tensor> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep probability must lie in (0, 1], got {keep_prob}"
        )));
    }
    let mut mask = Tensor::ones(shape);
    if mode == Mode::Train && keep_prob < 1.0 {
        let scale = 1.0 / keep_prob;
        for m in mask.data_mut() {
            *m = if rng.bernoulli(keep_prob) { scale } else { 0.0 };
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inference_is_identity() {
        let mut rng = RngStream::new(1);
        let m = dropout_mask(&[3, 4], 0.7, &mut rng, Mode::Infer).unwrap();
        assert!(m.data().iter().all(|&x| x == 1.0));
        assert_eq!(rng.draws(), 0);
    }

    #[test]
    fn kept_fraction_matches_keep_prob() {
        let mut rng = RngStream::new(2024);
        let m = dropout_mask(&[100_000], 0.7, &mut rng, Mode::Train).unwrap();
        let kept = m.data().iter().filter(|&&x| x > 0.0).count() as f64 / 1e5;
        assert!((kept - 0.7).abs() <= 0.01, "kept fraction {kept}");
    }

    #[test]
    fn mask_mean_is_one() {
        let mut rng = RngStream::new(77);
        let m = dropout_mask(&[1_000_000], 0.7, &mut rng, Mode::Train).unwrap();
        let mean = m.data().iter().sum::<f64>() / 1e6;
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
    }

    #[test]
    fn deterministic_given_seed() {
        let a = dropout_mask(&[64], 0.7, &mut RngStream::new(3), Mode::Train).unwrap();
        let b = dropout_mask(&[64], 0.7, &mut RngStream::new(3), Mode::Train).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_invalid_keep_prob() {
        let mut rng = RngStream::new(0);
        assert!(dropout_mask(&[2], 0.0, &mut rng, Mode::Train).is_err());
        assert!(dropout_mask(&[2], -0.5, &mut rng, Mode::Train).is_err());
        assert!(dropout_mask(&[2], 1.5, &mut rng, Mode::Train).is_err());
    }
}
