//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use inexact_core::adversary::{marginal_flip_probability, PermutationGroup};
use inexact_core::allocators::{
    number_staircase_allocation, optimize_allocation, staircase_allocation, ue_variance, uniform_allocation,
    Method, Objective, OptimizerSettings,
};
use inexact_core::decoders::{per_input_error, ExactEvaluator};
use inexact_core::metrics::{input_errors, pair_wrong_probability, sorting_mobs_bound};
use inexact_core::problems::pack_numbers;
use inexact_core::rng::seeded;
use inexact_core::{build_problem, Decoder, DecoderStrategy, EnergyVector, Mode, Permutation, ProblemSpec, QualityMetric};
use inexact_validation::{csv_rows, erfc_by_quadrature, Cli};
use rand::seq::SliceRandom;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within(limit: Duration, elapsed: Duration) -> (bool, String) {
    (elapsed <= limit, format!("{:.2}s of {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()))
}

fn truth_tables(cli: &Cli) -> Verdict {
    let start = Instant::now();
    // rows 000..111 in index order
    let expected: [(&str, [i64; 8]); 3] = [
        ("or", [0, 1, 1, 1, 1, 1, 1, 1]),
        ("ue", [0, 1, 1, 2, 1, 2, 2, 3]),
        ("be", [0, 1, 2, 3, 4, 5, 6, 7]),
    ];
    let mut cells = 0;
    let mut mismatches = Vec::new();
    for (name, want) in expected {
        let text = match cli.run_text(&["eval", "--problem", name, "--n", "3", "--format", "csv"]) {
            Ok(t) => t,
            Err(e) => return verdict(false, e),
        };
        for (row, record) in csv_rows(&text).iter().enumerate() {
            let bits: Vec<u32> = record[0].chars().map(|c| c.to_digit(2).unwrap()).collect();
            // independent oracle from the bit string itself
            let oracle = match name {
                "or" => bits.contains(&1) as i64,
                "ue" => bits.iter().sum::<u32>() as i64,
                _ => bits.iter().fold(0, |acc, &b| 2 * acc + b as i64),
            };
            let got: i64 = record[1].parse().unwrap();
            cells += 1;
            if got != want[row] || got != oracle {
                mismatches.push(format!("{name}({})={got}", record[0]));
            }
        }
    }
    let (fast, timing) = within(Duration::from_secs(1), start.elapsed());
    verdict(cells == 24 && mismatches.is_empty() && fast, format!("{cells}/24 cells checked, mismatches {mismatches:?}, {timing}"))
}

fn blindfolded_marginal_bound() -> Verdict {
    let start = Instant::now();
    let mut rng = seeded(2);
    let mut worst_slack = f64::INFINITY;
    let mut failures = 0;
    let mut checked = 0;
    for n in 2..=10 {
        let group = PermutationGroup::full_symmetric(n);
        for trial in 0..1000 {
            // every tenth vector is uniform so both directions of the equality are exercised
            let uniform = trial % 10 == 0;
            let entries: Vec<f64> = if uniform {
                vec![rng.gen_range(0.0..6.0); n]
            } else {
                (0..n).map(|_| rng.gen_range(0.0..6.0)).collect()
            };
            let evec = EnergyVector::from_entries(entries.clone()).unwrap();
            let bound = (-evec.total() / n as f64).exp2();
            let j = rng.gen_range(0..n);
            let marginal = marginal_flip_probability(&evec, &group, j).unwrap();
            let slack = marginal - bound;
            checked += 1;
            let equal = slack.abs() <= 1e-12;
            if slack < -1e-12 || equal != uniform {
                failures += 1;
            }
            if !uniform {
                worst_slack = worst_slack.min(slack);
            }
        }
    }
    let (fast, timing) = within(Duration::from_secs(10), start.elapsed());
    verdict(
        failures == 0 && fast,
        format!("{checked} vectors, {failures} failures, smallest non-uniform gap {worst_slack:.3e}, {timing}"),
    )
}

fn ue_uniform_optimality() -> Verdict {
    let start = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for n in 2..=4 {
        let budget = (n * (n + 1)) as f64 / 2.0;
        let uniform = uniform_allocation(budget, n).unwrap();
        let settings = OptimizerSettings { resolution: 0.05, ..Default::default() };
        let objective = Objective::UeVariance { n };
        let grid = optimize_allocation(&objective, budget, Method::Grid, &settings).unwrap();
        let descent = optimize_allocation(&objective, budget, Method::CoordinateDescent, &settings).unwrap();
        let off = |evec: &EnergyVector| evec.entries().iter().map(|e| (e - budget / n as f64).abs()).fold(0.0, f64::max);
        let at_uniform = ue_variance(&uniform) <= grid.objective_value + 1e-12 && off(&grid.evec) <= 0.05;
        let descends_to_uniform = descent.converged && off(&descent.evec) <= 0.05;
        pass &= at_uniform && descends_to_uniform;
        notes.push(format!(
            "n={n}: uniform {:.4}, grid min {:.4} at {:?}",
            ue_variance(&uniform),
            grid.objective_value,
            grid.evec.entries().iter().map(|e| (e * 100.0).round() / 100.0).collect::<Vec<_>>()
        ));
    }
    let (fast, timing) = within(Duration::from_secs(60), start.elapsed());
    verdict(pass && fast, format!("{}; {timing}", notes.join("; ")))
}

fn be_analytic_values() -> Verdict {
    let start = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for n in 2..=12 {
        let be = build_problem(&ProblemSpec::Be { n }).unwrap();
        let decoder = Decoder::identity(&be);
        let group = PermutationGroup::identity(n);
        // sum_j 2^j * 2^-(j+1)
        let analytic: f64 = (0..n).map(|j| (j as f64).exp2() * (-(j as f64) - 1.0).exp2()).sum();
        let stair = staircase_allocation(n).unwrap();
        let magnitudes = ExactEvaluator::new(&decoder, &stair, &group).unwrap().magnitudes();
        let worst = magnitudes.iter().copied().fold(0.0, f64::max);
        pass &= (worst - analytic).abs() <= 1e-9 && (magnitudes[0] - analytic).abs() <= 1e-9;
        let uniform = uniform_allocation(stair.total(), n).unwrap();
        let magnitudes = ExactEvaluator::new(&decoder, &uniform, &group).unwrap().magnitudes();
        let top = 1usize << (n - 1);
        let low = magnitudes[..top].iter().copied().fold(f64::INFINITY, f64::min);
        let floor = ((n as f64 - 3.0) / 2.0).exp2();
        pass &= low >= floor;
        notes.push(format!("n={n} {:.3}/{:.3}", low, floor));
    }
    let (fast, timing) = within(Duration::from_secs(30), start.elapsed());
    verdict(
        pass && fast,
        format!("staircase error n/2 for n=2..12; uniform min/floor {}; {timing}", notes.join(", ")),
    )
}

fn mobs_separation(cli: &Cli) -> Verdict {
    let start = Instant::now();
    let text = match cli.run_text(&["table2", "--sizes", "4,6,8", "--mode", "exact", "--format", "csv"]) {
        Ok(t) => t,
        Err(e) => return verdict(false, e),
    };
    let rows = csv_rows(&text);
    let value = |problem: &str, n: usize| -> f64 {
        rows.iter()
            .find(|r| r[0] == problem && r[1] == n.to_string())
            .map(|r| r[3].parse().unwrap())
            .unwrap_or(f64::NAN)
    };
    let mut pass = true;
    for problem in ["or", "ue"] {
        for n in [4, 6, 8] {
            let m = value(problem, n);
            pass &= (1.0..=1.001).contains(&m);
        }
    }
    let be: Vec<f64> = [4, 6, 8].iter().map(|&n| value("be", n)).collect();
    let steps: Vec<f64> = be.windows(2).map(|w| w[1] / w[0]).collect();
    pass &= be.windows(2).all(|w| w[1] > w[0]);
    pass &= steps.iter().all(|&s| s >= 1.8);
    let (fast, timing) = within(Duration::from_secs(300), start.elapsed());
    verdict(
        pass && fast,
        format!(
            "or {:?}, ue {:?}, be {be:.4?} steps {steps:.4?} (need >= 1.8); {timing}",
            [4, 6, 8].map(|n| value("or", n)),
            [4, 6, 8].map(|n| value("ue", n)),
        ),
    )
}

fn comparison_and_sorting() -> Verdict {
    let start = Instant::now();
    let mut pass = true;
    let mut constants = Vec::new();
    let mut growth = Vec::new();
    for k in 2..=6 {
        let cmp = build_problem(&ProblemSpec::Comparison { k }).unwrap();
        let group = PermutationGroup::identity(2 * k);
        let stair = number_staircase_allocation(2, k).unwrap();
        let uniform = uniform_allocation(stair.total(), 2 * k).unwrap();
        let (x, y) = (1u64 << (k - 1), 0);
        let p_uniform = pair_wrong_probability(&cmp, &uniform, &group, x, y, Mode::Exact).unwrap();
        let p_stair = pair_wrong_probability(&cmp, &stair, &group, x, y, Mode::Exact).unwrap();
        let c = p_stair * (k as f64).exp2();
        pass &= p_uniform >= (-(k as f64 + 1.0) / 2.0).exp2() && c <= 2.0;
        constants.push(c);

        let sorting = build_problem(&ProblemSpec::Sorting { count: 2, k }).unwrap();
        let bound = sorting_mobs_bound(2, k).unwrap();
        let metric = QualityMetric::SortingWeighted { instance: Some(bound.instance.clone()) };
        let row = pack_numbers(&bound.instance, k);
        let decoder = Decoder::identity(&sorting);
        let err = |evec: &EnergyVector| input_errors(&decoder, evec, &group, &metric, &[row], Mode::Exact).unwrap()[0].value;
        let ratio = err(&uniform) / err(&stair);
        let predicted = ((k as f64 - 1.0) / 2.0).exp2();
        pass &= (0.5..=2.0).contains(&(ratio / predicted));
        growth.push(ratio / predicted);
    }
    let (fast, timing) = within(Duration::from_secs(120), start.elapsed());
    verdict(
        pass && fast,
        format!("staircase constants c {constants:.3?}, sorting ratio / 2^((k-1)/2) {growth:.3?}; {timing}"),
    )
}

fn curve_shape(cli: &Cli) -> Verdict {
    let start = Instant::now();
    let grid = match cli.run_text(&["curve", "--sigma", "1"]) {
        Ok(t) => csv_rows(&t),
        Err(e) => return verdict(false, e),
    };
    let points: Vec<(f64, f64)> = grid.iter().map(|r| (r[0].parse().unwrap(), r[2].parse().unwrap())).collect();
    let at_zero = points.first().map(|p| p.1);
    let covers = points.first().map(|p| p.0) == Some(0.0) && points.last().map(|p| p.0) == Some(10.0);
    let monotone = points.windows(2).all(|w| w[1].1 > w[0].1);
    let vdd = 2.0 * std::f64::consts::SQRT_2;
    let probe = match cli.run_text(&["curve", "--sigma", "1", "--vdd", &vdd.to_string()]) {
        Ok(t) => csv_rows(&t)[0][2].parse::<f64>().unwrap(),
        Err(e) => return verdict(false, e),
    };
    let oracle = 1.0 - 0.5 * erfc_by_quadrature(1.0, 20_000);
    let gap = (probe - oracle).abs();
    let (fast, timing) = within(Duration::from_secs(1), start.elapsed());
    verdict(
        at_zero == Some(0.5) && covers && monotone && gap <= 1e-10 && fast,
        format!("p(0) = {at_zero:?}, {} points strictly increasing: {monotone}, |p(2 sqrt2) - oracle| = {gap:.2e}, {timing}", points.len()),
    )
}

fn exact_vs_monte_carlo() -> Verdict {
    let start = Instant::now();
    let mut rng = seeded(8);
    let samples = 1_000_000u64;
    let mut agree = 0;
    let mut worst_z: f64 = 0.0;
    for case in 0..50u64 {
        let n = rng.gen_range(2..=8);
        let spec = match rng.gen_range(0..5) {
            0 => ProblemSpec::Or { n },
            1 => ProblemSpec::Ue { n },
            2 => ProblemSpec::Be { n },
            3 => {
                let divisors: Vec<usize> = (1..=n).filter(|t| n % t == 0).collect();
                ProblemSpec::Tribes { n, tribes: *divisors.choose(&mut rng).unwrap() }
            }
            _ => ProblemSpec::Custom { n, outputs: (0..1u64 << n).map(|_| rng.gen_range(-2..=2)).collect() },
        };
        let problem = build_problem(&spec).unwrap();
        let evec = EnergyVector::from_entries((0..n).map(|_| rng.gen_range(0.0..4.0)).collect()).unwrap();
        let group = match rng.gen_range(0..3) {
            0 => PermutationGroup::identity(n),
            1 => PermutationGroup::full_symmetric(n),
            _ => {
                let mut images: Vec<usize> = (0..n).collect();
                images.shuffle(&mut rng);
                PermutationGroup::generated(n, vec![Permutation::new(images).unwrap()]).unwrap()
            }
        };
        let strategy = if rng.gen_bool(0.5) { DecoderStrategy::Identity } else { DecoderStrategy::map_uniform() };
        let decoder = Decoder::build(&problem, &strategy, &evec, &group).unwrap();
        let row = rng.gen_range(0..problem.rows());
        let exact = per_input_error(&decoder, &evec, &group, row, Mode::Exact).unwrap().value;
        let mc = per_input_error(&decoder, &evec, &group, row, Mode::MonteCarlo { samples, seed: case }).unwrap().value;
        // standard error of a Bernoulli mean at the true probability
        let se = (exact * (1.0 - exact) / samples as f64).sqrt();
        let ok = if se == 0.0 { (mc - exact).abs() <= 1e-12 } else { (mc - exact).abs() <= 4.0 * se };
        if se > 0.0 {
            worst_z = worst_z.max((mc - exact).abs() / se);
        }
        agree += ok as usize;
    }
    let (fast, timing) = within(Duration::from_secs(300), start.elapsed());
    verdict(agree >= 48 && fast, format!("{agree}/50 within 4 SE, largest |z| {worst_z:.2}, {timing}"))
}

fn determinism(cli: &Cli) -> Verdict {
    let runs: [&[&str]; 5] = [
        &["simulate", "--problem", "be", "--n", "5", "--budget", "8", "--mode", "monte-carlo", "--samples", "20000", "--seed", "3", "--group", "full-symmetric", "--decoder", "map"],
        &["simulate", "--problem", "tribes", "--n", "6", "--tribes", "2", "--energies", "1,2,3,1,2,3", "--group", "generated", "--generators", "1,2,0,4,5,3", "--mode", "monte-carlo", "--samples", "20000", "--seed", "9", "--format", "csv"],
        &["mobs", "--problem", "ue", "--n", "11", "--samples", "5000", "--seed", "4"],
        &["mobs", "--problem", "comparison", "--k", "2", "--metric", "comparison", "--format", "csv"],
        &["curve", "--sigma", "0.5"],
    ];
    let mut identical = 0;
    for args in runs {
        let (first, second) = match (cli.run(args), cli.run(args)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return verdict(false, e),
        };
        identical += (first == second) as usize;
    }
    verdict(identical == runs.len(), format!("{identical}/{} configs byte-identical across reruns", runs.len()))
}

fn main() {
    let dir = std::env::temp_dir().join(format!("inexact-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cli = Cli::new(&dir);
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("truth tables", Box::new(|| truth_tables(&cli))),
        ("blindfolded marginal bound", Box::new(blindfolded_marginal_bound)),
        ("ue uniform optimality", Box::new(ue_uniform_optimality)),
        ("be analytic values", Box::new(be_analytic_values)),
        ("mobs separation", Box::new(|| mobs_separation(&cli))),
        ("comparison and sorting bounds", Box::new(comparison_and_sorting)),
        ("energy-probability curve", Box::new(|| curve_shape(&cli))),
        ("exact vs monte carlo", Box::new(exact_vs_monte_carlo)),
        ("determinism", Box::new(|| determinism(&cli))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += !v.pass as usize;
        println!("{} {}. {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    let _ = std::fs::remove_dir_all(&dir);
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
