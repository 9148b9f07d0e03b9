use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::mdp::StateDistribution;

/// `Σ p log(p/q)` in nats with `0 log 0 = 0`. Infinite if `p` puts mass where `q` has none.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| {
            if qi > 0.0 {
                pi * (pi / qi).ln()
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

/// Jensen-Shannon divergence of two probability vectors, natural log.
pub fn js_divergence_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidDistribution(format!(
            "length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = 0.5 * kl_divergence(p, &m) + 0.5 * kl_divergence(q, &m);
    Ok(js.clamp(0.0, LN_2))
}

pub fn js_divergence(p: &StateDistribution, q: &StateDistribution) -> Result<f64> {
    js_divergence_slices(p.mass(), q.mass())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use proptest::prelude::*;

    fn dist(v: Vec<f64>) -> StateDistribution {
        StateDistribution::new(v, &Tolerances::DEFAULT).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let p = dist(vec![0.2, 0.3, 0.5]);
        assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_is_ln2() {
        let js = js_divergence(&dist(vec![1.0, 0.0]), &dist(vec![0.0, 1.0])).unwrap();
        assert!((js - LN_2).abs() < 1e-15);
    }

    #[test]
    fn half_versus_point() {
        // KL(p||m) with m = (3/4, 1/4), KL(q||m) likewise, averaged.
        let kl_p = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
        let kl_q = (1.0f64 / 0.75).ln();
        let expected = 0.5 * (kl_p + kl_q);
        let js = js_divergence(&dist(vec![0.5, 0.5]), &dist(vec![1.0, 0.0])).unwrap();
        assert!((js - expected).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_errors() {
        assert!(js_divergence_slices(&[1.0], &[0.5, 0.5]).is_err());
    }

    fn normalized(raw: Vec<f64>) -> Vec<f64> {
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect()
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            a in prop::collection::vec(0.0f64..1.0, 1..12),
            b in prop::collection::vec(0.0f64..1.0, 1..12),
        ) {
            let n = a.len().min(b.len());
            prop_assume!(a[..n].iter().sum::<f64>() > 0.0 && b[..n].iter().sum::<f64>() > 0.0);
            let p = normalized(a[..n].to_vec());
            let q = normalized(b[..n].to_vec());
            let pq = js_divergence_slices(&p, &q).unwrap();
            let qp = js_divergence_slices(&q, &p).unwrap();
            prop_assert!((pq - qp).abs() < 1e-12);
            prop_assert!((0.0..=LN_2).contains(&pq));
        }
    }
}
