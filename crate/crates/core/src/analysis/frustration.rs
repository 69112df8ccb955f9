//! Shannon entropy of Boltzmann occupations of the minima.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrustrationProfile {
    pub temperatures: Vec<f64>,
    pub entropy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrustrationError {
    #[error("no minima")]
    Empty,
    #[error("temperature {0} is not positive")]
    BadTemperature(f64),
}

/// `S(T) = -sum p_i ln p_i`, `p_i` proportional to `exp(-J_i / T)`.
pub fn entropy(costs: &[f64], t: f64) -> Result<f64, FrustrationError> {
    if costs.is_empty() {
        return Err(FrustrationError::Empty);
    }
    if !(t > 0.0) {
        return Err(FrustrationError::BadTemperature(t));
    }
    let j0 = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = costs.iter().map(|&j| (-(j - j0) / t).exp()).collect();
    let z: f64 = w.iter().sum();
    // S = ln Z + <J - J0> / T, which stays accurate when most p_i underflow
    let mean: f64 = costs
        .iter()
        .zip(&w)
        .map(|(&j, &wi)| wi * (j - j0))
        .sum::<f64>()
        / z;
    Ok((z.ln() + mean / t).clamp(0.0, (costs.len() as f64).ln()))
}

pub fn frustration_profile(
    costs: &[f64],
    temperatures: &[f64],
) -> Result<FrustrationProfile, FrustrationError> {
    let entropy = temperatures
        .iter()
        .map(|&t| entropy(costs, t))
        .collect::<Result<_, _>>()?;
    Ok(FrustrationProfile {
        temperatures: temperatures.to_vec(),
        entropy,
    })
}

/// `n` temperatures spaced evenly in log between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(entropy(&[3.0], 0.5).unwrap(), 0.0);
        assert!((entropy(&[1.0, 1.0], 0.3).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((entropy(&[0.0, 1.0, 5.0], 1e9).unwrap() - 3f64.ln()).abs() < 1e-8);
        assert!(entropy(&[], 1.0).is_err());
        assert!(entropy(&[1.0], 0.0).is_err());
    }

    #[test]
    fn low_temperature_counts_degenerate_ground_states() {
        let costs = [2.0, 2.0, 2.0, 2.5, 7.0];
        assert!((entropy(&costs, 1e-3).unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bounded_and_grid_independent(
            costs in proptest::collection::vec(0.0..50.0f64, 1..30),
            t in 1e-3..1e3f64,
        ) {
            let s = entropy(&costs, t).unwrap();
            prop_assert!(s.is_finite() && s >= 0.0 && s <= (costs.len() as f64).ln() + 1e-12);
            let coarse = frustration_profile(&costs, &[t, 2.0 * t]).unwrap();
            let fine = frustration_profile(&costs, &[t, 1.5 * t, 2.0 * t]).unwrap();
            prop_assert_eq!(coarse.entropy[0], fine.entropy[0]);
            prop_assert_eq!(coarse.entropy[1], fine.entropy[2]);
        }
    }
}
