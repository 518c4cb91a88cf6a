use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{DelaySet, DelayWeights, NetworkModel};

/// Granularity of delay pruning.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneMode {
    /// Individual `(d, i, j)` synapses (or whole levels of them).
    #[default]
    Synapse,
    /// Whole delayed axons `(i, d)`: every synapse leaving `i` at delay `d`.
    Axonal,
}

impl fmt::Display for PruneMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PruneMode::Synapse => "synapse",
            PruneMode::Axonal => "axonal",
        })
    }
}

impl FromStr for PruneMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synapse" => Ok(PruneMode::Synapse),
            "axonal" => Ok(PruneMode::Axonal),
            _ => Err(Error::InvalidParam(format!(
                "unknown prune mode `{s}` (expected synapse or axonal)"
            ))),
        }
    }
}

/// What survives pruning, per delayed connection.
///
/// | target          | synapse mode                          | axonal mode                         |
/// |-----------------|---------------------------------------|-------------------------------------|
/// | `Levels(k)`     | `k` delay levels per connection       | `k` axons per presynaptic neuron    |
/// | `PerNeuron(k)`  | `k` levels per postsynaptic neuron    | `k` axons per presynaptic neuron    |
/// | `Count(n)`      | `n` synapses                          | `n` axons                           |
/// | `Fraction(f)`   | `round(f * live)` synapses            | `round(f * live)` axons             |
///
/// Levels and axons are ranked by the l2 norm of their weights, synapses by
/// `|w|`; ties keep the lower index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneTarget {
    Levels(usize),
    PerNeuron(usize),
    Count(usize),
    Fraction(f64),
}

impl fmt::Display for PruneTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PruneTarget::Levels(k) => write!(f, "{k}"),
            PruneTarget::PerNeuron(k) => write!(f, "per-neuron:{k}"),
            PruneTarget::Count(n) => write!(f, "count:{n}"),
            PruneTarget::Fraction(x) => write!(f, "fraction:{x}"),
        }
    }
}

impl FromStr for PruneTarget {
    type Err = Error;

    /// Accepts `K`, `levels:K`, `per-neuron:K`, `count:N` and `fraction:F`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("malformed prune target `{s}`"));
        let (kind, value) = s.split_once(':').unwrap_or(("levels", s));
        let int = || value.parse::<usize>().map_err(|_| bad());
        match kind {
            "levels" => Ok(PruneTarget::Levels(int()?)),
            "per-neuron" => Ok(PruneTarget::PerNeuron(int()?)),
            "count" => Ok(PruneTarget::Count(int()?)),
            "fraction" => Ok(PruneTarget::Fraction(value.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneSpec {
    pub mode: PruneMode,
    pub target: PruneTarget,
}

impl Default for PruneSpec {
    fn default() -> Self {
        Self {
            mode: PruneMode::Synapse,
            target: PruneTarget::Levels(15),
        }
    }
}

/// Indices of the `keep` highest scores, ties to the lower index.
fn top_k(scores: &[(usize, f64)], keep: usize) -> Vec<usize> {
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    ranked.truncate(keep);
    ranked.into_iter().map(|(i, _)| i).collect()
}

fn check_target(requested: usize, available: usize, unit: &'static str) -> Result<()> {
    if requested > available {
        return Err(Error::PruneTarget {
            requested,
            available,
            unit,
        });
    }
    Ok(())
}

fn fraction_count(f: f64, live: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::InvalidParam(format!(
            "keep fraction {f} outside [0, 1]"
        )));
    }
    Ok((f * live as f64).round() as usize)
}

fn sq(x: f64) -> f64 {
    x * x
}

/// Live synapse indices of `w` grouped by `group(k, i, j)`; returns
/// `(group, l2 norm)` for every group with at least one live synapse.
fn group_norms(
    w: &DelayWeights,
    groups: usize,
    group: impl Fn(usize, usize, usize) -> usize,
) -> Vec<(usize, f64)> {
    let mut norm = vec![0.0; groups];
    let mut live = vec![false; groups];
    for k in 0..w.num_levels() {
        for i in 0..w.pre() {
            for j in 0..w.post() {
                if w.is_live(k, i, j) {
                    let g = group(k, i, j);
                    norm[g] += sq(w.get(k, i, j));
                    live[g] = true;
                }
            }
        }
    }
    (0..groups)
        .filter(|&g| live[g])
        .map(|g| (g, norm[g].sqrt()))
        .collect()
}

/// Masks every live synapse whose group is not in `keep`.
fn mask_groups(
    w: &mut DelayWeights,
    groups: usize,
    keep: &[usize],
    group: impl Fn(usize, usize, usize) -> usize,
) {
    let mut kept = vec![false; groups];
    for &g in keep {
        kept[g] = true;
    }
    for k in 0..w.num_levels() {
        for i in 0..w.pre() {
            for j in 0..w.post() {
                if w.is_live(k, i, j) && !kept[group(k, i, j)] {
                    w.prune(k, i, j);
                }
            }
        }
    }
}

fn prune_connection(w: &mut DelayWeights, spec: &PruneSpec) -> Result<()> {
    let (levels, pre, post) = (w.num_levels(), w.pre(), w.post());
    match (spec.mode, spec.target) {
        (PruneMode::Synapse, PruneTarget::Levels(k)) => {
            let by_level = |k: usize, _: usize, _: usize| k;
            let norms = group_norms(w, levels, by_level);
            check_target(k, norms.len(), "delay levels")?;
            let keep = top_k(&norms, k);
            mask_groups(w, levels, &keep, by_level);
        }
        (PruneMode::Synapse, PruneTarget::PerNeuron(k)) => {
            check_target(k, levels, "delay levels")?;
            let by_level_post = |k: usize, _: usize, j: usize| j * levels + k;
            let norms = group_norms(w, levels * post, by_level_post);
            let mut keep = Vec::new();
            for j in 0..post {
                let own: Vec<(usize, f64)> = norms
                    .iter()
                    .copied()
                    .filter(|&(g, _)| g / levels == j)
                    .collect();
                keep.extend(top_k(&own, k));
            }
            mask_groups(w, levels * post, &keep, by_level_post);
        }
        (PruneMode::Synapse, PruneTarget::Count(_) | PruneTarget::Fraction(_)) => {
            let live: Vec<(usize, f64)> = (0..w.len())
                .filter(|&x| w.mask()[x])
                .map(|x| (x, w.weights()[x].abs()))
                .collect();
            let n = match spec.target {
                PruneTarget::Count(n) => n,
                PruneTarget::Fraction(f) => fraction_count(f, live.len())?,
                _ => unreachable!(),
            };
            check_target(n, live.len(), "synapses")?;
            let by_index = |k: usize, i: usize, j: usize| (k * pre + i) * post + j;
            mask_groups(w, w.len(), &top_k(&live, n), by_index);
        }
        (PruneMode::Axonal, PruneTarget::Levels(k) | PruneTarget::PerNeuron(k)) => {
            check_target(k, levels, "delay axons per neuron")?;
            let by_axon = |k: usize, i: usize, _: usize| i * levels + k;
            let norms = group_norms(w, levels * pre, by_axon);
            let mut keep = Vec::new();
            for i in 0..pre {
                let own: Vec<(usize, f64)> = norms
                    .iter()
                    .copied()
                    .filter(|&(g, _)| g / levels == i)
                    .collect();
                keep.extend(top_k(&own, k));
            }
            mask_groups(w, levels * pre, &keep, by_axon);
        }
        (PruneMode::Axonal, PruneTarget::Count(_) | PruneTarget::Fraction(_)) => {
            let by_axon = |k: usize, i: usize, _: usize| i * levels + k;
            let norms = group_norms(w, levels * pre, by_axon);
            let n = match spec.target {
                PruneTarget::Count(n) => n,
                PruneTarget::Fraction(f) => fraction_count(f, norms.len())?,
                _ => unreachable!(),
            };
            check_target(n, norms.len(), "delay axons")?;
            mask_groups(w, levels * pre, &top_k(&norms, n), by_axon);
        }
    }
    w.compact();
    Ok(())
}

/// Prunes every delayed connection. The input connection (single level 0)
/// is left untouched. Pruned synapses are zeroed and masked for good, and
/// levels left without live synapses are dropped from the delay set.
pub fn prune_delays(model: &NetworkModel, spec: &PruneSpec) -> Result<NetworkModel> {
    let mut out = model.clone();
    for w in out.connections_mut().iter_mut().skip(1) {
        prune_connection(w, spec)?;
    }
    out.validate()?;
    Ok(out)
}

/// Re-inserts the unit-stride neighbours `d - radius ..= d + radius` of every
/// surviving delay level as live zero-weight levels, so that a further round
/// of training and pruning can localise delays more finely. Levels above the
/// model's delay limit are skipped.
pub fn refine_delays(model: &NetworkModel, radius: usize) -> Result<NetworkModel> {
    let mut out = model.clone();
    let limit = model.max_delay();
    for w in out.connections_mut().iter_mut().skip(1) {
        let mut levels: Vec<usize> = w
            .delays()
            .levels()
            .iter()
            .flat_map(|&d| d.saturating_sub(radius)..=d + radius)
            .filter(|&d| limit.is_none_or(|l| d <= l))
            .collect();
        levels.sort_unstable();
        levels.dedup();
        w.extend_levels(DelaySet::new(levels)?)?;
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NeuronParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_with(levels: usize, pre: usize, post: usize, seed: u64) -> NetworkModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sets = [DelaySet::zero(), DelaySet::strided(levels, 1).unwrap()];
        let mut m =
            NetworkModel::zeros(&[2, pre, post], &sets, NeuronParams::default(), 8).unwrap();
        for w in m.connections_mut() {
            w.update_live(|_, _| rng.gen_range(-1.0..1.0));
        }
        m
    }

    fn spec(mode: PruneMode, target: PruneTarget) -> PruneSpec {
        PruneSpec { mode, target }
    }

    #[test]
    fn parses_targets() {
        assert_eq!(
            "15".parse::<PruneTarget>().unwrap(),
            PruneTarget::Levels(15)
        );
        assert_eq!(
            "per-neuron:3".parse::<PruneTarget>().unwrap(),
            PruneTarget::PerNeuron(3)
        );
        assert_eq!(
            "count:7".parse::<PruneTarget>().unwrap(),
            PruneTarget::Count(7)
        );
        assert_eq!(
            "fraction:0.5".parse::<PruneTarget>().unwrap(),
            PruneTarget::Fraction(0.5)
        );
        assert!("levels:x".parse::<PruneTarget>().is_err());
    }

    #[test]
    fn keeping_everything_changes_nothing() {
        let m = model_with(4, 3, 2, 1);
        let same = prune_delays(&m, &spec(PruneMode::Synapse, PruneTarget::Levels(4))).unwrap();
        assert_eq!(same, m);
        let same = prune_delays(&m, &spec(PruneMode::Axonal, PruneTarget::Levels(4))).unwrap();
        assert_eq!(same, m);
    }

    #[test]
    fn level_pruning_keeps_the_strongest_levels() {
        let mut m = model_with(30, 4, 3, 2);
        m.connection_mut(1)
            .update_live(|idx, w| if idx / 12 % 3 == 0 { w * 10.0 } else { w * 0.1 });
        let p = prune_delays(&m, &spec(PruneMode::Synapse, PruneTarget::Levels(10))).unwrap();
        let kept = p.connection(1).delays().levels().to_vec();
        assert_eq!(kept, (0..30).step_by(3).collect::<Vec<_>>());
        assert_eq!(p.connection(0), m.connection(0));
    }

    #[test]
    fn targets_beyond_what_exists_are_rejected() {
        let m = model_with(3, 2, 2, 3);
        for target in [PruneTarget::Levels(4), PruneTarget::Count(13)] {
            assert!(matches!(
                prune_delays(&m, &spec(PruneMode::Synapse, target)),
                Err(Error::PruneTarget { .. })
            ));
        }
        assert!(prune_delays(&m, &spec(PruneMode::Synapse, PruneTarget::Fraction(1.5))).is_err());
    }

    #[test]
    fn axonal_pruning_leaves_k_axons_per_neuron() {
        let m = model_with(6, 5, 3, 4);
        let p = prune_delays(&m, &spec(PruneMode::Axonal, PruneTarget::Levels(1))).unwrap();
        let w = p.connection(1);
        for i in 0..5 {
            let useful = (0..w.num_levels())
                .filter(|&k| w.axon_is_useful(k, i))
                .count();
            assert_eq!(useful, 1);
        }
    }

    #[test]
    fn per_neuron_pruning_bounds_fan_in_levels() {
        let m = model_with(6, 3, 4, 5);
        let p = prune_delays(&m, &spec(PruneMode::Synapse, PruneTarget::PerNeuron(2))).unwrap();
        let w = p.connection(1);
        for j in 0..4 {
            let levels = (0..w.num_levels())
                .filter(|&k| (0..3).any(|i| w.is_live(k, i, j)))
                .count();
            assert_eq!(levels, 2);
        }
    }

    #[test]
    fn pruning_never_resurrects_synapses() {
        let m = model_with(8, 4, 4, 6);
        let once = prune_delays(&m, &spec(PruneMode::Synapse, PruneTarget::Fraction(0.5))).unwrap();
        let twice =
            prune_delays(&once, &spec(PruneMode::Synapse, PruneTarget::Fraction(0.5))).unwrap();
        assert_eq!(once.connection(1).num_live(), 64);
        assert_eq!(twice.connection(1).num_live(), 32);
        for (w1, w2) in once.connections().iter().zip(twice.connections()) {
            for (k2, &d) in w2.delays().levels().iter().enumerate() {
                let k1 = w1.delays().index_of(d).unwrap();
                for i in 0..w2.pre() {
                    for j in 0..w2.post() {
                        assert!(!w2.is_live(k2, i, j) || w1.is_live(k1, i, j));
                    }
                }
            }
        }
    }

    #[test]
    fn refinement_adds_unit_neighbours() {
        let m = model_with(10, 2, 2, 7);
        let p = prune_delays(&m, &spec(PruneMode::Synapse, PruneTarget::Levels(2))).unwrap();
        let kept = p.connection(1).delays().levels().to_vec();
        let r = refine_delays(&p, 1).unwrap();
        for d in kept {
            for n in d.saturating_sub(1)..=d + 1 {
                assert!(r.connection(1).delays().contains(n));
            }
            let k = r.connection(1).delays().index_of(d).unwrap();
            let k_old = p.connection(1).delays().index_of(d).unwrap();
            assert_eq!(r.connection(1).row(k, 0), p.connection(1).row(k_old, 0));
        }
    }
}
