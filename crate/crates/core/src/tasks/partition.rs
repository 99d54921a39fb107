//! Label-skewed assignment of samples to client shards.

use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;

/// Non-IID partition parameters: a sample with label l lands in client
/// group l with probability `q` and in each other group with probability
/// (1-q)/(C-1); within a group, clients are drawn uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub q: f64,
    pub groups: usize,
    pub seed: u64,
}

/// Client group layout: contiguous blocks whose sizes differ by at most
/// one (the first `n mod C` groups take the extra client).
fn group_ranges(n: usize, groups: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / groups;
    let extra = n % groups;
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for g in 0..groups {
        let size = base + usize::from(g < extra);
        out.push(start..start + size);
        start += size;
    }
    out
}

/// Assign each sample (given by label) to one of `n` client shards.
/// Returns per-client index lists into the input slice; every sample lands
/// in exactly one shard.
pub fn partition_noniid(labels: &[usize], n: usize, spec: &PartitionSpec) -> Result<Vec<Vec<usize>>> {
    if !(0.0..=1.0).contains(&spec.q) {
        return Err(Error::config("partition.q", "non-IID degree must lie in [0, 1]"));
    }
    if spec.groups == 0 {
        return Err(Error::config("partition.groups", "need at least one group"));
    }
    if n < spec.groups {
        return Err(Error::config(
            "partition.groups",
            format!("need n >= groups (n={n}, groups={})", spec.groups),
        ));
    }
    let ranges = group_ranges(n, spec.groups);
    let mut shards: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut stream = rng::stream(spec.seed, "partition", 0, 0);
    for (idx, &label) in labels.iter().enumerate() {
        if label >= spec.groups {
            return Err(Error::config(
                "partition.groups",
                format!("label {label} outside the {} groups", spec.groups),
            ));
        }
        let group = if spec.groups == 1 || stream.gen::<f64>() < spec.q {
            label
        } else {
            // Uniform over the other C-1 groups.
            let other = stream.gen_range(0..spec.groups - 1);
            if other >= label {
                other + 1
            } else {
                other
            }
        };
        let range = ranges[group].clone();
        let client = stream.gen_range(range.start..range.end);
        shards[client].push(idx);
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(count: usize, classes: usize) -> Vec<usize> {
        (0..count).map(|i| i % classes).collect()
    }

    #[test]
    fn conserves_samples_and_is_deterministic() {
        let labels = labels(1000, 10);
        let spec = PartitionSpec { q: 0.5, groups: 10, seed: 3 };
        let shards = partition_noniid(&labels, 30, &spec).unwrap();
        let mut seen: Vec<usize> = shards.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..1000).collect::<Vec<_>>());
        assert_eq!(shards, partition_noniid(&labels, 30, &spec).unwrap());
    }

    #[test]
    fn q_one_with_singleton_groups_isolates_labels() {
        let n = 10;
        let labels = labels(500, n);
        let spec = PartitionSpec { q: 1.0, groups: n, seed: 7 };
        let shards = partition_noniid(&labels, n, &spec).unwrap();
        for (client, shard) in shards.iter().enumerate() {
            assert!(!shard.is_empty());
            assert!(shard.iter().all(|&i| labels[i] == client));
        }
    }

    #[test]
    fn q_half_concentration_is_calibrated() {
        // With q = 0.5 and C = 10, about half of each label's samples land
        // in the matching group.
        let count = 100_000;
        let labels = labels(count, 10);
        let spec = PartitionSpec { q: 0.5, groups: 10, seed: 11 };
        let n = 30;
        let shards = partition_noniid(&labels, n, &spec).unwrap();
        // Client i belongs to group i / 3 here (30 clients, 10 groups).
        let mut matched = 0usize;
        for (client, shard) in shards.iter().enumerate() {
            let group = client / 3;
            matched += shard.iter().filter(|&&i| labels[i] == group).count();
        }
        let frac = matched as f64 / count as f64;
        assert!((frac - 0.5).abs() < 0.02, "matched fraction {frac}");
    }

    #[test]
    fn uniform_q_matches_chance_level() {
        // q = 1/C reproduces the uniform assignment in expectation.
        let count = 100_000;
        let classes = 10;
        let labels = labels(count, classes);
        let spec = PartitionSpec { q: 0.1, groups: classes, seed: 13 };
        let shards = partition_noniid(&labels, classes, &spec).unwrap();
        for (client, shard) in shards.iter().enumerate() {
            let own = shard.iter().filter(|&&i| labels[i] == client).count() as f64;
            let frac = own / shard.len() as f64;
            assert!((frac - 0.1).abs() < 0.02, "client {client}: {frac}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let labels = labels(10, 2);
        assert!(partition_noniid(
            &labels,
            4,
            &PartitionSpec { q: 1.5, groups: 2, seed: 0 }
        )
        .is_err());
        assert!(partition_noniid(
            &labels,
            1,
            &PartitionSpec { q: 0.5, groups: 2, seed: 0 }
        )
        .is_err());
    }
}
