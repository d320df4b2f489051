use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("score {0} is outside [0, 1)")]
pub struct ScoreOutOfRange(pub f64);

/// Hooper's rule for independent evidence: `1 - prod(1 - s)`. Empty input scores 0.
///
/// Evaluated incrementally as `acc + (1 - acc) * s`, which keeps a single
/// input exact. Inputs are combined in sorted order so the result does not
/// depend on argument order, bit for bit.
pub fn hooper(scores: &[f64]) -> Result<f64, ScoreOutOfRange> {
    if let Some(&bad) = scores.iter().find(|s| !(0.0..1.0).contains(*s)) {
        return Err(ScoreOutOfRange(bad));
    }
    Ok(combine(scores))
}

pub(crate) fn combine(scores: &[f64]) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().fold(0.0, |acc, s| acc + (1.0 - acc) * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        assert_eq!(hooper(&[]).unwrap(), 0.0);
        assert_eq!(hooper(&[0.8]).unwrap(), 0.8);
        assert!((hooper(&[0.8, 0.3]).unwrap() - 0.86).abs() < 1e-12);
        assert!((hooper(&[0.3, 0.3, 0.3]).unwrap() - 0.657).abs() < 1e-12);
        assert!((hooper(&[0.3, 0.18]).unwrap() - 0.426).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range() {
        assert_eq!(hooper(&[0.5, 1.0]), Err(ScoreOutOfRange(1.0)));
        assert!(hooper(&[-0.1]).is_err());
        assert!(hooper(&[f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn bounded_by_max_and_one(xs in prop::collection::vec(0.0f64..0.99, 1..10)) {
            let h = hooper(&xs).unwrap();
            let max = xs.iter().cloned().fold(0.0, f64::max);
            prop_assert!(h >= max - 1e-15 && h < 1.0);
        }

        #[test]
        fn order_free(mut xs in prop::collection::vec(0.0f64..0.99, 0..10)) {
            let h = hooper(&xs).unwrap();
            xs.reverse();
            prop_assert_eq!(h, hooper(&xs).unwrap());
        }
    }
}
