use crate::error::ModelError;

/// Rejected-traffic rate of a single-server loss queue (M/M/1/1) given its
/// accepted rate `accepted` and mean service time `service_mean`:
/// `T λ² / (1 − T λ)`.
pub fn mm11_rejection_rate(accepted: f64, service_mean: f64) -> Result<f64, ModelError> {
    if !(accepted >= 0.0) || !(service_mean >= 0.0) {
        return Err(ModelError::domain(format!(
            "loss-server rates must be nonnegative (λ_a = {accepted}, T = {service_mean})"
        )));
    }
    let load = accepted * service_mean;
    if load >= 1.0 {
        return Err(ModelError::Saturation(format!(
            "accepted rate {accepted}/s reaches the service capacity 1/{service_mean}/s of a loss server"
        )));
    }
    Ok(service_mean * accepted * accepted / (1.0 - load))
}

/// Fraction of offered traffic that is rejected, `λ_r / (λ_r + λ_a)`.
pub fn blocking_probability(rejected: f64, accepted: f64) -> Result<f64, ModelError> {
    if !(rejected >= 0.0 && accepted >= 0.0) {
        return Err(ModelError::domain("rates must be nonnegative"));
    }
    let offered = rejected + accepted;
    if offered == 0.0 {
        return Err(ModelError::domain("blocking probability undefined with no traffic"));
    }
    Ok(rejected / offered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn closed_form_value() {
        assert_relative_eq!(mm11_rejection_rate(0.1, 2.0).unwrap(), 0.025, max_relative = 1e-15);
    }

    #[test]
    fn no_traffic_no_loss() {
        assert_eq!(mm11_rejection_rate(0.0, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn saturation_boundary() {
        assert!(matches!(mm11_rejection_rate(0.25, 4.0), Err(ModelError::Saturation(_))));
        assert!(matches!(mm11_rejection_rate(1.0, 4.0), Err(ModelError::Saturation(_))));
    }

    #[test]
    fn blocking_cases() {
        assert_eq!(blocking_probability(3.0, 3.0).unwrap(), 0.5);
        assert_eq!(blocking_probability(0.0, 3.0).unwrap(), 0.0);
        assert!(blocking_probability(0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn blocking_monotone_in_rejections(a in 1e-6f64..1e4, r1 in 0.0f64..1e4, dr in 0.0f64..1e4) {
            let lo = blocking_probability(r1, a).unwrap();
            let hi = blocking_probability(r1 + dr, a).unwrap();
            prop_assert!(hi >= lo);
            prop_assert!((0.0..=1.0).contains(&hi));
        }

        #[test]
        fn offered_identity(lambda_o in 0.0f64..10.0, t in 0.01f64..10.0) {
            // Erlang-B with one server: accepted = λ_o / (1 + λ_o T).
            let accepted = lambda_o / (1.0 + lambda_o * t);
            let rejected = mm11_rejection_rate(accepted, t).unwrap();
            prop_assert!((accepted + rejected - lambda_o).abs() <= 1e-9 * lambda_o.max(1.0));
        }
    }
}
