use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Leak time constant (in timesteps) and firing threshold of a LIF layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    pub tau: f64,
    pub u_th: f64,
}

impl NeuronParams {
    pub fn new(tau: f64, u_th: f64) -> Result<Self> {
        let params = Self { tau, u_th };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidParam(format!(
                "tau must be > 0, got {}",
                self.tau
            )));
        }
        if !(self.u_th.is_finite() && self.u_th > 0.0) {
            return Err(Error::InvalidParam(format!(
                "threshold must be > 0, got {}",
                self.u_th
            )));
        }
        Ok(())
    }

    /// Per-step leak factor `exp(-1/tau)`.
    pub fn decay(&self) -> f64 {
        (-1.0 / self.tau).exp()
    }
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            tau: 10.0,
            u_th: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeuronState {
    pub u: f64,
    /// Whether the neuron fired on the previous step.
    pub spiked: bool,
}

/// One discrete LIF update: `u' = u * exp(-1/tau) * (1 - theta) + I`,
/// `theta' = [u' >= u_th]`.
pub fn lif_step(state: NeuronState, input_current: f64, params: &NeuronParams) -> NeuronState {
    step(state, input_current, params.decay(), params.u_th)
}

/// [`lif_step`] with a precomputed leak factor. A neuron that fired on the
/// previous step restarts from exactly `input_current`.
#[inline]
pub(crate) fn step(state: NeuronState, input_current: f64, decay: f64, u_th: f64) -> NeuronState {
    let u = if state.spiked {
        input_current
    } else {
        state.u * decay + input_current
    };
    NeuronState {
        u,
        spiked: u >= u_th,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(tau: f64, u_th: f64) -> NeuronParams {
        NeuronParams::new(tau, u_th).unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let next = lif_step(NeuronState::default(), 0.0, &params(10.0, 1.0));
        assert_eq!(
            next,
            NeuronState {
                u: 0.0,
                spiked: false
            }
        );
    }

    #[test]
    fn leak_and_integrate() {
        let state = NeuronState {
            u: 0.5,
            spiked: false,
        };
        let next = lif_step(state, 0.3, &params(1.0, 1.0));
        // 0.5 * e^-1 + 0.3
        assert!((next.u - 0.483_940).abs() < 1e-6);
        assert_eq!(next.u, 0.5 * (-1.0f64).exp() + 0.3);
        assert!(!next.spiked);
    }

    #[test]
    fn spike_gates_out_the_leak_term() {
        let state = NeuronState {
            u: 5.0,
            spiked: true,
        };
        let next = lif_step(state, 0.2, &params(2.0, 1.0));
        assert_eq!(next.u, 0.2);
        assert!(!next.spiked);
    }

    #[test]
    fn threshold_is_inclusive() {
        let next = lif_step(NeuronState::default(), 1.0, &params(3.0, 1.0));
        assert!(next.spiked);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(NeuronParams::new(0.0, 1.0).is_err());
        assert!(NeuronParams::new(2.0, -1.0).is_err());
        assert!(NeuronParams::new(f64::NAN, 1.0).is_err());
    }
}
