use proptest::prelude::*;

use fragsim::engine::{run, SimConfig};
use fragsim::laws::DislocationLaw;
use fragsim::par::{map_replicas, map_replicas_sequential};
use fragsim::partition::{apply_atom, paintbox, PartitionOfN, PoissonAtom};
use fragsim::types::{MassPartition, RngStream};

fn normalized(raw: &[f64], total: f64) -> MassPartition {
    let s: f64 = raw.iter().sum();
    let scaled: Vec<f64> = raw.iter().map(|x| x / s * total).collect();
    MassPartition::rank(&scaled).unwrap()
}

fn mass_partition() -> impl Strategy<Value = MassPartition> {
    (prop::collection::vec(0.01f64..1.0, 1..8), 0.2f64..=1.0).prop_map(|(raw, total)| normalized(&raw, total))
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((1..=n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #[test]
    fn paintbox_is_a_partition_of_n(s in mass_partition(), n in 1usize..60, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let p = paintbox(&s, n, &mut rng);
        let mut all: Vec<usize> = p.blocks().iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (1..=n).collect::<Vec<_>>());
        prop_assert!(p.blocks().iter().all(|b| !b.is_empty()));
        prop_assert!(p.block_count() <= s.len() + p.singleton_count());
    }

    #[test]
    fn apply_atom_preserves_mass_for_conservative_ratios(
        s in mass_partition(),
        raw in prop::collection::vec(0.01f64..1.0, 2..5),
        index in 1usize..8,
    ) {
        let atom = PoissonAtom { ratios: normalized(&raw, 1.0), index, time: 0.0 };
        let next = apply_atom(&s, &atom);
        prop_assert!((next.total_mass() - s.total_mass()).abs() < 1e-12);
        if index <= s.len() {
            prop_assert_eq!(next.len(), s.len() + raw.len() - 1);
        } else {
            prop_assert_eq!(next, s);
        }
    }

    #[test]
    fn relabelling_round_trips(n in 1usize..12, perm in (1usize..12).prop_flat_map(permutation), seed in any::<u64>()) {
        let n = n.min(perm.len());
        let perm: Vec<usize> = perm.into_iter().filter(|&i| i <= n).collect();
        let mut inverse = vec![0; n];
        for (i, &j) in perm.iter().enumerate() {
            inverse[j - 1] = i + 1;
        }
        let mut rng = RngStream::new(seed, 1);
        let p = paintbox(&MassPartition::rank(&[0.5, 0.3]).unwrap(), n, &mut rng);
        prop_assert_eq!(p.relabel(&perm).relabel(&inverse), p.clone());
        prop_assert!(p.refines(&p));
        prop_assert!(PartitionOfN::singletons(n).refines(&p));
        prop_assert!(p.refines(&PartitionOfN::single_block(n)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conservative_snapshots_keep_unit_mass(seed in any::<u64>(), replica in 0u64..1000, t in 0.1f64..3.0) {
        let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 0.0, t).with_snapshots(vec![t / 2.0, t]).with_seed(seed);
        let log = run(&cfg, replica).unwrap();
        for snap in &log.snapshots {
            prop_assert!((snap.partition.total_mass() - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(run(&cfg, replica).unwrap().to_json(), log.to_json());
    }

    #[test]
    fn lossy_mass_never_grows(seed in any::<u64>(), t in 0.1f64..4.0) {
        let cfg = SimConfig::new(DislocationLaw::lossy_binary(), 0.0, t)
            .with_snapshots(vec![t / 3.0, 2.0 * t / 3.0, t])
            .with_seed(seed);
        let log = run(&cfg, 0).unwrap();
        let masses: Vec<f64> = log.snapshots.iter().map(|s| s.partition.total_mass()).collect();
        prop_assert!(masses.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(masses[0] <= 1.0 + 1e-12);
    }
}

#[test]
fn parallel_and_sequential_replicas_agree() {
    let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 1.0, 5.0)
        .with_snapshots(vec![5.0])
        .with_threshold(1e-4)
        .with_seed(77);
    let f = |r: usize| run(&cfg, r as u64).unwrap().to_json();
    assert_eq!(map_replicas(64, f), map_replicas_sequential(64, f));
}
