//! Estimator oracles: threshold-rule optimality, the dual generalized-Binder
//! formulas, the Jensen ordering, and greedy search quality.

use rand::Rng;
use riskcal_core::estimator::{
    exhaustive_minimizer, gb_risk_posterior, gb_risk_posterior_direct, greedy_minimizer,
    quantile_probability_model, vi_entropy_from_draws, vi_lb_risk_posterior, vi_risk_posterior,
    CoClustering, GammaPosterior, PartitionObjective, SearchConfig,
};
use riskcal_core::loss::LossSpec;
use riskcal_core::model::{enumerate_gamma, enumerate_partitions, Partition, SpaceKind};
use riskcal_core::prior::PriorSpec;
use riskcal_core::rng::{rng_from_seed, Rng64};

fn random_posterior(p: usize, rng: &mut Rng64) -> GammaPosterior {
    let models: Vec<_> = enumerate_gamma(p).unwrap().collect();
    let raw: Vec<f64> = (0..models.len()).map(|_| -rng.gen::<f64>().ln()).collect();
    let total: f64 = raw.iter().sum();
    GammaPosterior::new(models, raw.into_iter().map(|v| v / total).collect()).unwrap()
}

fn random_coclustering(p: usize, rng: &mut Rng64) -> CoClustering {
    let mut vals = vec![0.0; p * p];
    for i in 0..p {
        vals[i * p + i] = 1.0;
        for j in i + 1..p {
            let v = rng.gen::<f64>();
            vals[i * p + j] = v;
            vals[j * p + i] = v;
        }
    }
    CoClustering::new(p, vals).unwrap()
}

fn random_draws(p: usize, n: usize, rng: &mut Rng64) -> Vec<Partition> {
    let prior = PriorSpec::Crp { theta: rng.gen_range(0.3..3.0) };
    (0..n)
        .map(|_| prior.sample(p, rng).unwrap().as_partition().unwrap().clone())
        .collect()
}

#[test]
fn quantile_model_attains_exhaustive_minimum() {
    // The thresholded model reaches the exhaustive posterior-risk minimum
    // for every random posterior; the argmin is unique away from ties.
    let mut rng = rng_from_seed(301);
    for trial in 0..100 {
        let p = rng.gen_range(2..=8usize);
        let table = random_posterior(p, &mut rng);
        let q = table.inclusion_probabilities();
        for a in [0.7, 1.0, 1.3] {
            let loss = LossSpec::Gh { a };
            let thresholded = quantile_probability_model(&q, a).unwrap();
            let oracle = exhaustive_minimizer(
                |m| table.risk(&loss, m.as_gamma().unwrap()).unwrap(),
                p,
                SpaceKind::Hypercube,
            )
            .unwrap();
            let r_thresh = table.risk(&loss, &thresholded).unwrap();
            let r_oracle = table.risk(&loss, oracle.as_gamma().unwrap()).unwrap();
            assert!(
                (r_thresh - r_oracle).abs() <= 1e-12,
                "trial {trial} a={a}: {r_thresh} vs {r_oracle}"
            );
            if q.iter().all(|&qi| (qi - 0.5 * a).abs() > 1e-9) {
                assert_eq!(&thresholded, oracle.as_gamma().unwrap(), "trial {trial} a={a}");
            }
        }
    }
}

#[test]
fn check_function_form_equals_direct_form() {
    let mut rng = rng_from_seed(302);
    let all: Vec<Vec<Partition>> = (2..=7)
        .map(|p| enumerate_partitions(p).unwrap().collect())
        .collect();
    for _ in 0..1000 {
        let p = rng.gen_range(2..=7usize);
        let c = random_coclustering(p, &mut rng);
        let zs = &all[p - 2];
        let zhat = &zs[rng.gen_range(0..zs.len())];
        let a = rng.gen_range(0.05..1.95);
        let lhs = gb_risk_posterior(&c, zhat, a).unwrap();
        let rhs = gb_risk_posterior_direct(&c, zhat, a).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10, "p={p} a={a}: {lhs} vs {rhs}");
    }
}

#[test]
fn jensen_lower_bound_ordering() {
    let mut rng = rng_from_seed(303);
    for trial in 0..100 {
        let p = rng.gen_range(3..=8usize);
        let n = rng.gen_range(5..60usize);
        let draws = random_draws(p, n, &mut rng);
        let c = CoClustering::from_draws(&draws).unwrap();
        let h = vi_entropy_from_draws(&draws).unwrap();
        let zs: Vec<Partition> = enumerate_partitions(p.min(6)).unwrap().collect();
        let zhat = if p <= 6 {
            zs[rng.gen_range(0..zs.len())].clone()
        } else {
            draws[rng.gen_range(0..n)].clone()
        };
        let lb = vi_lb_risk_posterior(&c, &zhat, Some(h)).unwrap();
        let full = vi_risk_posterior(&draws, &zhat).unwrap();
        assert!(lb <= full + 1e-12, "trial {trial}: lb {lb} > vi {full}");
    }
}

#[test]
fn greedy_matches_exhaustive_on_most_instances() {
    // Reduced-size version of the search-quality gate (20 instances here;
    // the acceptance suite runs the full hundred).
    let mut rng = rng_from_seed(304);
    let p = 8;
    let cfg = SearchConfig { restarts: 16, seed: 55, ..Default::default() };
    let mut gb_hits = 0;
    let mut vilb_hits = 0;
    let trials = 20;
    for _ in 0..trials {
        let c = random_coclustering(p, &mut rng);
        for (which, objective) in [
            PartitionObjective::GbCoClustering { c: c.clone(), a: 1.0 },
            PartitionObjective::ViLbCoClustering { c: c.clone() },
        ]
        .into_iter()
        .enumerate()
        {
            let greedy = greedy_minimizer(&objective, &cfg).unwrap();
            let oracle = exhaustive_minimizer(
                |m| objective.risk(m.as_partition().unwrap()).unwrap(),
                p,
                SpaceKind::Partitions,
            )
            .unwrap();
            let r_greedy = objective.risk(&greedy).unwrap();
            let r_oracle = objective.risk(oracle.as_partition().unwrap()).unwrap();
            if r_greedy <= r_oracle + 1e-9 {
                if which == 0 {
                    gb_hits += 1;
                } else {
                    vilb_hits += 1;
                }
            }
        }
    }
    assert!(gb_hits * 100 >= trials * 95, "GB greedy hit {gb_hits}/{trials}");
    assert!(vilb_hits * 100 >= trials * 95, "VI-LB greedy hit {vilb_hits}/{trials}");
}

#[test]
fn greedy_handles_tiny_spaces_for_every_objective() {
    let mut rng = rng_from_seed(305);
    for _ in 0..10 {
        let c = random_coclustering(3, &mut rng);
        let draws = random_draws(3, 12, &mut rng);
        let objectives = vec![
            PartitionObjective::GbCoClustering { c: c.clone(), a: rng.gen_range(0.2..1.8) },
            PartitionObjective::ViLbCoClustering { c: c.clone() },
            PartitionObjective::ViDraws { draws },
        ];
        for objective in objectives {
            let greedy = greedy_minimizer(&objective, &SearchConfig::default()).unwrap();
            let oracle = exhaustive_minimizer(
                |m| objective.risk(m.as_partition().unwrap()).unwrap(),
                3,
                SpaceKind::Partitions,
            )
            .unwrap();
            let rg = objective.risk(&greedy).unwrap();
            let ro = objective.risk(oracle.as_partition().unwrap()).unwrap();
            assert!((rg - ro).abs() <= 1e-12);
        }
    }
}

#[test]
fn posterior_summary_csv_roundtrips() {
    let dir = tempfile::tempdir().unwrap();

    let mut rng = rng_from_seed(306);
    let table = random_posterior(3, &mut rng);
    let path = dir.path().join("posterior.csv");
    table.to_csv(&path).unwrap();
    let back = GammaPosterior::from_csv(&path).unwrap();
    let q1 = table.inclusion_probabilities();
    let q2 = back.inclusion_probabilities();
    for (a, b) in q1.iter().zip(&q2) {
        assert!((a - b).abs() < 1e-14);
    }

    let draws = random_draws(5, 40, &mut rng);
    let posterior = riskcal_core::estimator::PartitionPosterior::new(draws).unwrap();
    let path = dir.path().join("draws.csv");
    posterior.to_csv(&path).unwrap();
    let back = riskcal_core::estimator::PartitionPosterior::from_csv(&path).unwrap();
    assert_eq!(posterior.draws(), back.draws());

    let c = posterior.coclustering();
    let path = dir.path().join("coclustering.csv");
    c.to_csv(&path).unwrap();
    let back = CoClustering::from_csv(&path).unwrap();
    for i in 0..c.n() {
        for j in 0..c.n() {
            assert!((c.entry(i, j) - back.entry(i, j)).abs() < 1e-14);
        }
    }
}

#[test]
fn inclusion_probabilities_match_table_sums() {
    let mut rng = rng_from_seed(307);
    let table = random_posterior(4, &mut rng);
    let q = table.inclusion_probabilities();
    for (i, &qi) in q.iter().enumerate() {
        let direct: f64 = table
            .entries()
            .filter(|(m, _)| m.bit(i))
            .map(|(_, prob)| prob)
            .sum();
        assert!((qi - direct).abs() <= 1e-12);
    }
}
