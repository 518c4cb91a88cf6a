use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::SimTrace;

/// Aggregate view of one executor over a trace set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutorSummary {
    /// Fraction of labelled samples predicted correctly; `None` without labels.
    pub accuracy: Option<f64>,
    /// Mean spike count per inference, one entry per spiking layer.
    pub avg_spikes_per_layer: Vec<f64>,
    /// `confusion[label][prediction]`; empty without labels.
    pub confusion: Vec<Vec<usize>>,
}

/// Agreement between a reference and a test executor on the same inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub samples: usize,
    pub reference: ExecutorSummary,
    pub test: ExecutorSummary,
    /// Percentage of samples with the same prediction, in `[0, 100]`.
    pub consistency: f64,
    /// Samples whose traces match bit for bit.
    pub bit_identical: usize,
    /// Membrane RMSE over all samples and timesteps, per layer.
    pub vmem_rmse_per_layer: Vec<f64>,
    /// Membrane RMSE per layer and neuron.
    pub vmem_rmse_per_neuron: Vec<Vec<f64>>,
}

fn summarize(traces: &[SimTrace], classes: usize) -> ExecutorSummary {
    let layers = traces.first().map_or(0, |t| t.layers.len());
    let n = traces.len().max(1) as f64;
    let avg_spikes_per_layer = (0..layers)
        .map(|l| {
            traces
                .iter()
                .map(|t| t.layers[l].spike_count() as f64)
                .sum::<f64>()
                / n
        })
        .collect();
    let labelled =
        !traces.is_empty() && traces.iter().all(|t| t.label.is_some_and(|y| y < classes));
    let (accuracy, confusion) = if labelled {
        let mut confusion = vec![vec![0; classes]; classes];
        let mut hits = 0;
        for t in traces {
            let y = t.label.expect("checked");
            confusion[y][t.prediction.min(classes - 1)] += 1;
            hits += usize::from(t.prediction == y);
        }
        (Some(hits as f64 / traces.len() as f64), confusion)
    } else {
        (None, Vec::new())
    };
    ExecutorSummary {
        accuracy,
        avg_spikes_per_layer,
        confusion,
    }
}

/// Compares two trace sets recorded on the same inputs in the same order.
pub fn compare_traces(reference: &[SimTrace], test: &[SimTrace]) -> Result<FidelityReport> {
    if reference.len() != test.len() {
        return Err(Error::LengthMismatch {
            reference: reference.len(),
            test: test.len(),
        });
    }
    let shape = |t: &SimTrace| -> Vec<(usize, usize)> {
        t.layers.iter().map(|l| (l.width, l.spikes.len())).collect()
    };
    if let Some(first) = reference.first() {
        let expected = shape(first);
        for t in reference.iter().chain(test) {
            if shape(t) != expected {
                return Err(Error::Dimension {
                    what: "trace layer shapes",
                    expected: expected.len(),
                    found: t.layers.len(),
                });
            }
        }
    }
    let widths: Vec<usize> = reference
        .first()
        .map(|t| t.layers.iter().map(|l| l.width).collect())
        .unwrap_or_default();
    let classes = widths.last().copied().unwrap_or(0);

    let mut sq_neuron: Vec<Vec<f64>> = widths.iter().map(|&w| vec![0.0; w]).collect();
    let mut count_neuron = vec![0usize; widths.len()];
    let (mut same_pred, mut bit_identical) = (0, 0);
    for (r, t) in reference.iter().zip(test) {
        same_pred += usize::from(r.prediction == t.prediction);
        bit_identical += usize::from(r.bitwise_eq(t));
        for (l, (lr, lt)) in r.layers.iter().zip(&t.layers).enumerate() {
            for (idx, (a, b)) in lr.vmem.iter().zip(&lt.vmem).enumerate() {
                sq_neuron[l][idx % lr.width] += (a - b) * (a - b);
            }
            count_neuron[l] += lr.timesteps();
        }
    }
    let vmem_rmse_per_neuron: Vec<Vec<f64>> = sq_neuron
        .iter()
        .zip(&count_neuron)
        .map(|(sq, &n)| {
            sq.iter()
                .map(|s| if n == 0 { 0.0 } else { (s / n as f64).sqrt() })
                .collect()
        })
        .collect();
    let vmem_rmse_per_layer = sq_neuron
        .iter()
        .zip(&count_neuron)
        .map(|(sq, &n)| {
            let total = n * sq.len();
            if total == 0 {
                0.0
            } else {
                (sq.iter().sum::<f64>() / total as f64).sqrt()
            }
        })
        .collect();
    let consistency = if reference.is_empty() {
        100.0
    } else {
        100.0 * same_pred as f64 / reference.len() as f64
    };
    Ok(FidelityReport {
        samples: reference.len(),
        reference: summarize(reference, classes),
        test: summarize(test, classes),
        consistency,
        bit_identical,
        vmem_rmse_per_layer,
        vmem_rmse_per_neuron,
    })
}
