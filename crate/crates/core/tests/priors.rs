//! Prior-family invariants: normalization, exchangeability, sampling
//! consistency with marginal summaries, and calibration identities.

use approx::assert_abs_diff_eq;
use rand::Rng;
use riskcal_core::model::{enumerate_space, Model, Partition, SpaceKind};
use riskcal_core::prior::{
    calibrate, hierarchical_uniform, weibull_crp_coclustering, CalibrationFamily, KDistribution,
    PriorSpec, TablePrior,
};
use riskcal_core::rng::rng_from_seed;

fn partition_families() -> Vec<PriorSpec> {
    vec![
        PriorSpec::UniformPartition,
        PriorSpec::Crp { theta: 1.0 },
        PriorSpec::Crp { theta: 0.4 },
        PriorSpec::Crp2 { sigma: 0.5, theta: 1.0 },
        PriorSpec::Crp2 { sigma: 0.3, theta: 0.7 },
        PriorSpec::DirMult { alpha: 1.0, k: KDistribution::ShiftedPoisson { lambda: 2.5569 } },
        PriorSpec::DirMult { alpha: 2.0, k: KDistribution::Geometric { s: 0.4 } },
        PriorSpec::BalanceNeutral { k: KDistribution::Geometric { s: 0.2847 } },
        PriorSpec::BalanceNeutral { k: KDistribution::ShiftedPoisson { lambda: 1.5 } },
    ]
}

fn hypercube_families() -> Vec<PriorSpec> {
    vec![
        PriorSpec::UniformGamma,
        PriorSpec::BetaBinomial { a_omega: 1.0, b_omega: 1.0 },
        PriorSpec::BetaBinomial { a_omega: 1.3, b_omega: 0.7 },
        PriorSpec::TruncExpDecay { kappa: 2.0, s_max: 3 },
        PriorSpec::TruncExpDecay { kappa: 2.5, s_max: 2 },
    ]
}

#[test]
fn pmf_sums_to_one_for_every_family() {
    for p in 1..=6usize {
        for prior in hypercube_families() {
            if let PriorSpec::TruncExpDecay { s_max, .. } = &prior {
                if *s_max > p {
                    continue;
                }
            }
            let total: f64 = enumerate_space(SpaceKind::Hypercube, p)
                .unwrap()
                .iter()
                .map(|m| prior.pmf(m).unwrap())
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
        for prior in partition_families() {
            let total: f64 = enumerate_space(SpaceKind::Partitions, p)
                .unwrap()
                .iter()
                .map(|m| prior.pmf(m).unwrap())
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }
}

#[test]
fn pmf_named_values() {
    let crp = PriorSpec::Crp { theta: 1.0 };
    let one_block = Model::Partition(Partition::one_block(3));
    assert_abs_diff_eq!(crp.pmf(&one_block).unwrap(), 1.0 / 3.0, epsilon = 1e-12);

    let bb = PriorSpec::BetaBinomial { a_omega: 1.0, b_omega: 1.0 };
    let g = Model::parse(SpaceKind::Hypercube, "10").unwrap();
    assert_abs_diff_eq!(bb.pmf(&g).unwrap(), 1.0 / 6.0, epsilon = 1e-12);

    let yang = PriorSpec::TruncExpDecay { kappa: 2.0, s_max: 1 };
    let full = Model::parse(SpaceKind::Hypercube, "11").unwrap();
    assert_eq!(yang.pmf(&full).unwrap(), 0.0);
}

#[test]
fn marginal_inclusion_named_values() {
    let bb = PriorSpec::BetaBinomial { a_omega: 1.0, b_omega: 1.0 };
    assert_abs_diff_eq!(bb.marginal_inclusion(5).unwrap(), 0.5, epsilon = 1e-15);

    let bb = PriorSpec::BetaBinomial { a_omega: 1.3, b_omega: 0.7 };
    assert_abs_diff_eq!(bb.marginal_inclusion(5).unwrap(), 0.65, epsilon = 1e-12);

    let yang = PriorSpec::TruncExpDecay { kappa: 2.0, s_max: 3 };
    let q = yang.marginal_inclusion(5).unwrap();
    assert!(q > 0.0 && q <= 0.5, "yang prior inclusion {q} must lie in (0, 0.5]");

    // Independent route: enumeration of the pmf.
    let by_enum = riskcal_core::risk::inclusion_by_enumeration(&yang, 5).unwrap();
    for qi in by_enum {
        assert_abs_diff_eq!(qi, q, epsilon = 1e-12);
    }

    assert!(PriorSpec::Crp { theta: 1.0 }.marginal_inclusion(4).is_err());
}

#[test]
fn coclustering_named_values() {
    assert_abs_diff_eq!(
        PriorSpec::Crp { theta: 1.0 }.coclustering().unwrap(),
        0.5,
        epsilon = 1e-15
    );
    assert_abs_diff_eq!(
        PriorSpec::Crp2 { sigma: 0.5, theta: 1.0 }.coclustering().unwrap(),
        0.25,
        epsilon = 1e-15
    );
    let bn = PriorSpec::BalanceNeutral { k: KDistribution::Geometric { s: 0.2847 } };
    assert_abs_diff_eq!(bn.coclustering().unwrap(), 0.5, epsilon = 1e-3);
    let dm = PriorSpec::DirMult {
        alpha: 1.0,
        k: KDistribution::ShiftedPoisson { lambda: 2.5569 },
    };
    assert_abs_diff_eq!(dm.coclustering().unwrap(), 0.5, epsilon = 1e-4);

    assert!(PriorSpec::UniformGamma.coclustering().is_err());
}

#[test]
fn closed_form_coclustering_matches_enumeration() {
    for prior in partition_families() {
        if matches!(prior, PriorSpec::UniformPartition) {
            continue;
        }
        for p in 2..=5usize {
            let closed = prior.coclustering().unwrap();
            let matrix = riskcal_core::risk::coclustering_by_enumeration(&prior, p).unwrap();
            for i in 0..p {
                for j in 0..p {
                    if i != j {
                        assert_abs_diff_eq!(matrix[i * p + j], closed, epsilon = 1e-10);
                    }
                }
            }
        }
    }
}

#[test]
fn partition_pmf_is_exchangeable() {
    // Permuting data indices then canonicalizing leaves the pmf unchanged.
    let p = 5;
    let perms: Vec<Vec<usize>> = vec![
        vec![4, 3, 2, 1, 0],
        vec![1, 2, 3, 4, 0],
        vec![2, 0, 4, 1, 3],
    ];
    for prior in partition_families() {
        for m in enumerate_space(SpaceKind::Partitions, p).unwrap() {
            let z = m.as_partition().unwrap();
            let base = prior.pmf(&m).unwrap();
            for perm in &perms {
                let relabeled: Vec<u64> =
                    perm.iter().map(|&i| z.labels()[i] as u64).collect();
                let permuted = Model::Partition(Partition::from_labels(&relabeled).unwrap());
                assert_abs_diff_eq!(prior.pmf(&permuted).unwrap(), base, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn crp2_degenerates_to_crp_as_discount_vanishes() {
    let theta = 0.8;
    let crp = PriorSpec::Crp { theta };
    let crp2 = PriorSpec::Crp2 { sigma: 1e-8, theta };
    for p in 1..=5usize {
        for m in enumerate_space(SpaceKind::Partitions, p).unwrap() {
            assert_abs_diff_eq!(crp2.pmf(&m).unwrap(), crp.pmf(&m).unwrap(), epsilon = 1e-6);
        }
    }
}

#[test]
fn empirical_summaries_match_closed_forms() {
    let n = 100_000usize;
    let p = 6usize;

    // Hypercube families: inclusion frequency of coordinate 0.
    for prior in hypercube_families() {
        if let PriorSpec::TruncExpDecay { s_max, .. } = &prior {
            if *s_max > p {
                continue;
            }
        }
        let mut rng = rng_from_seed(2024);
        let mut count = 0usize;
        for _ in 0..n {
            let m = prior.sample(p, &mut rng).unwrap();
            if m.as_gamma().unwrap().bit(0) {
                count += 1;
            }
        }
        let q = prior.marginal_inclusion(p).unwrap();
        let se = (q * (1.0 - q) / n as f64).sqrt();
        let freq = count as f64 / n as f64;
        assert!(
            (freq - q).abs() <= 3.0 * se.max(1e-6),
            "{prior}: freq {freq} vs q {q} (se {se})"
        );
    }

    // Partition families: co-clustering frequency of the pair (0, 1).
    for prior in partition_families() {
        let c = match prior.coclustering() {
            Ok(c) => c,
            // Uniform partition: exact value from enumeration.
            Err(_) => riskcal_core::risk::coclustering_value(&prior, p).unwrap(),
        };
        let mut rng = rng_from_seed(77);
        let mut count = 0usize;
        for _ in 0..n {
            let m = prior.sample(p, &mut rng).unwrap();
            if m.as_partition().unwrap().co_clustered(0, 1) {
                count += 1;
            }
        }
        let se = (c * (1.0 - c) / n as f64).sqrt();
        let freq = count as f64 / n as f64;
        assert!(
            (freq - c).abs() <= 3.0 * se,
            "{prior}: freq {freq} vs c {c} (se {se})"
        );
    }
}

#[test]
fn sampling_edge_cases() {
    // Vanishing concentration: everything lands in one block.
    let prior = PriorSpec::Crp { theta: 1e-9 };
    let mut rng = rng_from_seed(5);
    let mut one_block = 0;
    for _ in 0..10_000 {
        let m = prior.sample(4, &mut rng).unwrap();
        if m.as_partition().unwrap().n_clusters() == 1 {
            one_block += 1;
        }
    }
    assert!(one_block as f64 / 10_000.0 > 0.999);

    // Two symbols only: the singleton partition of three items never occurs.
    let prior = PriorSpec::BalanceNeutral {
        k: KDistribution::Explicit { probs: vec![0.0, 1.0] },
    };
    let mut rng = rng_from_seed(6);
    let mut counts = std::collections::BTreeMap::new();
    for _ in 0..20_000 {
        let m = prior.sample(3, &mut rng).unwrap();
        *counts.entry(m.to_string()).or_insert(0usize) += 1;
    }
    assert!(!counts.contains_key("1,2,3"));
    for z in ["1,1,1", "1,1,2", "1,2,1", "1,2,2"] {
        assert!(counts.get(z).copied().unwrap_or(0) > 0, "missing {z}");
    }
}

#[test]
fn crp_empirical_coclustering_at_p8() {
    let prior = PriorSpec::Crp { theta: 1.0 };
    let mut rng = rng_from_seed(11);
    let n = 100_000;
    let mut count = 0usize;
    for _ in 0..n {
        let m = prior.sample(8, &mut rng).unwrap();
        if m.as_partition().unwrap().co_clustered(0, 1) {
            count += 1;
        }
    }
    assert_abs_diff_eq!(count as f64 / n as f64, 0.5, epsilon = 0.01);
}

#[test]
fn calibration_named_values() {
    assert_abs_diff_eq!(calibrate(&CalibrationFamily::Crp, 0.5).unwrap(), 1.0, epsilon = 1e-12);

    let lambda = calibrate(&CalibrationFamily::DirMultShiftedPoisson { alpha: 1.0 }, 0.5).unwrap();
    assert_abs_diff_eq!(lambda, 2.5569, epsilon = 1e-3);

    let s = calibrate(&CalibrationFamily::BalanceNeutralGeometric, 0.5).unwrap();
    assert_abs_diff_eq!(s, 0.2847, epsilon = 1e-3);

    assert!(calibrate(&CalibrationFamily::Crp, 1.5).is_err());
}

#[test]
fn calibration_identity_on_target_grid() {
    let families = vec![
        CalibrationFamily::Crp,
        CalibrationFamily::Crp2 { sigma: 0.3 },
        CalibrationFamily::BetaBinomial,
        CalibrationFamily::DirMultShiftedPoisson { alpha: 1.0 },
        CalibrationFamily::BalanceNeutralGeometric,
        CalibrationFamily::HierarchicalUniformGeometric { p: 6 },
    ];
    for family in families {
        for i in 1..=9 {
            let target = i as f64 / 10.0;
            let x = match calibrate(&family, target) {
                Ok(x) => x,
                Err(riskcal_core::Error::Infeasible { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            let achieved = family.summary(x).unwrap();
            assert_abs_diff_eq!(achieved, target, epsilon = 1e-9);
        }
    }
}

#[test]
fn weibull_hyperprior_calibration_identity() {
    // Shape 2, scale ~1.3115 mixes CRP concentrations to co-clustering 1/2.
    let c = weibull_crp_coclustering(2.0, 1.3115);
    assert_abs_diff_eq!(c, 0.5, epsilon = 1e-4);
}

#[test]
fn hierarchical_uniform_table() {
    let p = 4;
    let q = vec![0.1, 0.4, 0.3, 0.2];
    let prior = hierarchical_uniform(p, &q).unwrap();
    let total: f64 = enumerate_space(SpaceKind::Partitions, p)
        .unwrap()
        .iter()
        .map(|m| prior.pmf(m).unwrap())
        .sum();
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);

    // Uniform over a fixed cluster count: both 2-cluster shapes
    // {3,1} and {2,2} get the same per-partition probability.
    let a = Model::parse(SpaceKind::Partitions, "1,1,1,2").unwrap();
    let b = Model::parse(SpaceKind::Partitions, "1,1,2,2").unwrap();
    assert_abs_diff_eq!(prior.pmf(&a).unwrap(), prior.pmf(&b).unwrap(), epsilon = 1e-15);

    assert!(hierarchical_uniform(9, &[1.0 / 9.0; 9]).is_err());
}

#[test]
fn prior_spec_json_roundtrip() {
    let specs = vec![
        PriorSpec::UniformGamma,
        PriorSpec::Crp { theta: 1.0 },
        PriorSpec::Crp2 { sigma: 0.3, theta: 0.25 },
        PriorSpec::DirMult { alpha: 1.0, k: KDistribution::ShiftedPoisson { lambda: 2.5569 } },
        PriorSpec::TruncExpDecay { kappa: 2.0, s_max: 4 },
    ];
    for spec in specs {
        let json = serde_json::to_string(&spec).unwrap();
        let back: PriorSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }

    // The documented wire format parses.
    let spec: PriorSpec =
        serde_json::from_str(r#"{"family":"crp","params":{"theta":1}}"#).unwrap();
    assert_eq!(spec, PriorSpec::Crp { theta: 1.0 });
}

#[test]
fn table_prior_csv_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let models: Vec<Model> = enumerate_space(SpaceKind::Partitions, 3).unwrap();
    let probs = vec![0.2, 0.1, 0.3, 0.15, 0.25];
    let table = TablePrior::new(models, probs).unwrap();
    table.to_csv(&path).unwrap();
    let back = TablePrior::from_csv(&path, SpaceKind::Partitions).unwrap();
    assert_eq!(table, back);

    // Table sampling follows the table, and off-support pmf is zero.
    let prior = PriorSpec::Table(back);
    let mut rng = rng_from_seed(3);
    let mut hits = 0usize;
    let n = 50_000;
    for _ in 0..n {
        let m = prior.sample(3, &mut rng).unwrap();
        if m.to_string() == "1,2,1" {
            hits += 1;
        }
    }
    let freq = hits as f64 / n as f64;
    assert!((freq - 0.3).abs() < 3.0 * (0.3f64 * 0.7 / n as f64).sqrt());
}

#[test]
fn uniform_partition_sampler_is_uniform() {
    let prior = PriorSpec::UniformPartition;
    let mut rng = rng_from_seed(19);
    let n = 75_000usize;
    let mut counts: std::collections::BTreeMap<String, usize> = Default::default();
    for _ in 0..n {
        let m = prior.sample(4, &mut rng).unwrap();
        *counts.entry(m.to_string()).or_insert(0) += 1;
    }
    assert_eq!(counts.len(), 15);
    let expect = n as f64 / 15.0;
    let se = (n as f64 * (1.0 / 15.0) * (14.0 / 15.0)).sqrt();
    for (z, count) in counts {
        assert!(
            (count as f64 - expect).abs() < 4.0 * se,
            "partition {z}: count {count} vs expected {expect}"
        );
    }
}

#[test]
fn infeasible_targets_report_range() {
    // Hierarchical uniform at p=6 cannot reach arbitrarily low co-clustering.
    let family = CalibrationFamily::HierarchicalUniformGeometric { p: 6 };
    let floor = family.summary(1e-12).unwrap();
    match calibrate(&family, floor / 2.0) {
        Err(riskcal_core::Error::Infeasible { lo, hi, .. }) => {
            assert!(lo <= hi);
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn seeded_sampling_is_reproducible() {
    let prior = PriorSpec::Crp2 { sigma: 0.25, theta: 2.0 };
    let mut a = rng_from_seed(123);
    let mut b = rng_from_seed(123);
    for _ in 0..50 {
        let x = prior.sample(7, &mut a).unwrap();
        let y = prior.sample(7, &mut b).unwrap();
        assert_eq!(x, y);
    }
    let _ = a.gen::<f64>();
}
