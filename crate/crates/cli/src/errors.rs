//! Maps library errors onto the exit-code contract.

use neqsteady_core::currents::CurrentError;
use neqsteady_core::dynamics::DynamicsError;
use neqsteady_core::kms::KmsError;
use neqsteady_core::linear::ThermoError;
use neqsteady_core::rates::RateError;
use neqsteady_core::report::StateFileError;
use neqsteady_core::scenario::ScenarioError;

pub const EXIT_IO: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Bad flags or flag values.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Input-side failure detected after parsing, such as an invalid initial state.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InvalidInput(pub String);

fn rate_code(e: &RateError) -> u8 {
    match e {
        RateError::Model(_) | RateError::InvalidCutoff { .. } | RateError::ReservoirCount { .. } => {
            EXIT_INVALID
        }
        _ => EXIT_NUMERICAL,
    }
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() || err.downcast_ref::<InvalidInput>().is_some() {
        return EXIT_INVALID;
    }
    if let Some(e) = err.downcast_ref::<ScenarioError>() {
        return match e {
            ScenarioError::Io { .. } => EXIT_IO,
            _ => EXIT_INVALID,
        };
    }
    if let Some(e) = err.downcast_ref::<StateFileError>() {
        return match e {
            StateFileError::Io(_) => EXIT_IO,
            _ => EXIT_INVALID,
        };
    }
    if let Some(e) = err.downcast_ref::<RateError>() {
        return rate_code(e);
    }
    if let Some(e) = err.downcast_ref::<ThermoError>() {
        return match e {
            ThermoError::Rates(r) => rate_code(r),
            ThermoError::Dynamics(_) => EXIT_NUMERICAL,
            _ => EXIT_INVALID,
        };
    }
    if let Some(e) = err.downcast_ref::<KmsError>() {
        return match e {
            KmsError::ZeroEnergyLevel(_) => EXIT_INVALID,
            _ => EXIT_NUMERICAL,
        };
    }
    if let Some(e) = err.downcast_ref::<CurrentError>() {
        return match e {
            CurrentError::NotTwoEquilibriumBaths => EXIT_INVALID,
            _ => EXIT_NUMERICAL,
        };
    }
    if err.downcast_ref::<DynamicsError>().is_some() {
        return EXIT_NUMERICAL;
    }
    EXIT_IO
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        let reducible = anyhow::Error::new(DynamicsError::ReducibleDynamics { kernel_dim: 2 });
        assert_eq!(exit_code(&reducible), EXIT_NUMERICAL);
        let syntax = anyhow::Error::new(ScenarioError::Syntax("x".into()));
        assert_eq!(exit_code(&syntax.context("loading")), EXIT_INVALID);
        let thermo = anyhow::Error::new(ThermoError::NotTwoEquilibriumBaths);
        assert_eq!(exit_code(&thermo), EXIT_INVALID);
        let io = anyhow::Error::new(std::io::Error::other("disk"));
        assert_eq!(exit_code(&io), EXIT_IO);
    }
}
