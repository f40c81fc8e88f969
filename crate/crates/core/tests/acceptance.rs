//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints its own PASS/FAIL line; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use alp_core::estimation::{
    estimate_cancel_three, estimate_count, expected_tally, solve_abc_system, solve_two_unknowns,
    variance_of_count, Counts, EstimatorKind, MultiCounts, PopulationSpec,
};
use alp_core::mechanisms::{CancellationParams, MechanismParams, Response};
use alp_core::privacy::{crowd_size, epsilon_dp};
use alp_core::rng::Substream;

use alp_core::simulation::{
    enumerate_exact, monte_carlo_calibration, run_simulation, station_name, sweep, synth_dataset,
    with_threads, write_results, EpochRecord, SimulationConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn uniform(rng: &mut Substream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

fn below(rng: &mut Substream, n: u64) -> u64 {
    ((rng.next_f64() * (n + 1) as f64) as u64).min(n)
}

/// Per-population output probabilities written out from the mechanism
/// definition, independent of the library's distribution code.
fn direct_expectation(p: [f64; 6], yes: f64, no: f64) -> Counts {
    let [s1, s2, sn, p1, p2, p3] = p;
    let yes_pop = [
        s1 * p1 + s2 * p2,
        s1 * (1.0 - p1) + s2 * (1.0 - p2),
        1.0 - s1 - s2,
    ];
    let no_pop = [sn * p3, sn * (1.0 - p3), 1.0 - sn];
    Counts::new(
        yes_pop[0] * yes + no_pop[0] * no,
        yes_pop[1] * yes + no_pop[1] * no,
        yes_pop[2] * yes + no_pop[2] * no,
    )
}

fn random_params(rng: &mut Substream, unit_coins: bool) -> MechanismParams {
    loop {
        let s1 = uniform(rng, 0.0, 1.0);
        let s2 = uniform(rng, 0.0, 1.0 - s1);
        let sn = uniform(rng, 0.0, 1.0);
        let coins = if unit_coins {
            [1.0; 3]
        } else {
            [
                uniform(rng, 0.0, 1.0),
                uniform(rng, 0.0, 1.0),
                uniform(rng, 0.0, 1.0),
            ]
        };
        let Ok(p) = MechanismParams::new(s1, s2, sn, coins[0], coins[1], coins[2]) else {
            continue;
        };
        let model = p.output_model();
        // unit coins leave the No count uninformative
        let used: &[Response] = if unit_coins {
            &[Response::Yes, Response::Bottom]
        } else {
            &[Response::Yes, Response::No, Response::Bottom]
        };
        let conditioned = used.iter().all(|&r| {
            let (a, b) = model.coefficients(r);
            (a - b).abs() >= 1e-3
        });
        if conditioned {
            return p;
        }
    }
}

fn epsilons() -> Outcome {
    let p = MechanismParams::reference();
    let r = match epsilon_dp(&p) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let one = ((0.45 * 0.95 + 0.50 * 0.98) / (0.068 * 0.98_f64)).ln();
    let two = ((0.45 * 0.05 + 0.50 * 0.02) / (0.068 * 0.02_f64)).ln();
    let checks = [
        (r.epsilon_one, 2.6223, one),
        (r.epsilon_two, -3.1740, -two),
        (r.epsilon_dp, 2.6223, one),
    ];
    let ok = checks.iter().all(|&(got, target, direct)| {
        (got - target).abs() <= 1e-3 && (got - direct).abs() <= 1e-12
    });
    outcome(
        ok,
        format!(
            "eps1={:.6} eps2={:.6} eps_dp={:.6}",
            r.epsilon_one, r.epsilon_two, r.epsilon_dp
        ),
    )
}

fn round_trip() -> Outcome {
    let mut rng = Substream::from_raw(0x5eed_0002);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let p = random_params(&mut rng, false);
        let total = 1 + below(&mut rng, 999_999);
        let yes = below(&mut rng, total);
        let counts = direct_expectation(p.as_array(), yes as f64, (total - yes) as f64);
        for kind in [
            EstimatorKind::FromYes,
            EstimatorKind::FromNo,
            EstimatorKind::FromBottom,
        ] {
            match estimate_count(kind, counts, &p, 0.99) {
                Ok(e) => worst = worst.max((e.point - yes as f64).abs() / (yes as f64).max(1.0)),
                Err(e) => return outcome(false, format!("{kind:?} on {:?}: {e}", p.as_array())),
            }
        }
    }
    outcome(
        worst <= 1e-6,
        format!("worst relative error {worst:.3e} over 3000 inversions"),
    )
}

fn enumeration() -> Outcome {
    let mut rng = Substream::from_raw(0x5eed_0003);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let p = random_params(&mut rng, false);
        let total = 1 + below(&mut rng, 7);
        let pop = PopulationSpec::new(below(&mut rng, total), 0);
        let pop = PopulationSpec::new(pop.yes_count, total - pop.yes_count);
        let exact = match enumerate_exact(pop, &p) {
            Ok(e) => e,
            Err(e) => return outcome(false, e.to_string()),
        };
        let mean = expected_tally(&p, pop);
        for r in [Response::Yes, Response::No, Response::Bottom] {
            worst = worst
                .max((exact.mean.get(r) - mean.get(r)).abs())
                .max((exact.variance.get(r) - variance_of_count(r, &p, pop)).abs());
        }
    }
    outcome(
        worst <= 1e-12,
        format!("worst moment difference {worst:.3e}"),
    )
}

fn calibration() -> Outcome {
    let pop = PopulationSpec::new(1000, 47_719);
    let report =
        match monte_carlo_calibration(&MechanismParams::reference(), pop, 1000, 0.99, 20_240_611) {
            Ok(r) => r,
            Err(e) => return outcome(false, e.to_string()),
        };
    let Some(y) = report.get(EstimatorKind::FromYes) else {
        return outcome(false, "no FromYes estimates");
    };
    let ok = y.bias.abs() <= 3.0 * y.standard_error
        && (0.95..=1.05).contains(&y.variance_ratio)
        && y.coverage >= 0.97;
    outcome(
        ok,
        format!(
            "mean={:.3} se={:.3} variance_ratio={:.4} coverage={:.3}",
            y.mean, y.standard_error, y.variance_ratio, y.coverage
        ),
    )
}

fn cancellation() -> Outcome {
    let mut rng = Substream::from_raw(0x5eed_0005);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let shift = uniform(&mut rng, 0.05, 0.95);
        let w = [
            rng.next_f64() + 1e-3,
            rng.next_f64() + 1e-3,
            rng.next_f64() + 1e-3,
        ];
        let sum: f64 = w.iter().sum();
        let bot = w.map(|x| x / sum * (1.0 - shift));
        let p = CancellationParams::three_output(bot, shift);
        let yes = below(&mut rng, 10_000) as f64;
        let no = below(&mut rng, 10_000) as f64;
        let t = yes + no;
        if t == 0.0 {
            continue;
        }
        let counts = MultiCounts {
            slots: [
                [
                    bot[0] * t + shift * yes,
                    bot[1] * t + shift * no,
                    bot[2] * t,
                ],
                [bot[0] * t, bot[1] * t, bot[2] * t + shift * (yes + no)],
                [0.0; 3],
            ],
            total: t,
        };
        match estimate_cancel_three(counts, &p, 0.99) {
            Ok(e) => worst = worst.max((e.estimate.point - yes).abs()),
            Err(e) => return outcome(false, e.to_string()),
        }
    }

    let abc = CancellationParams {
        pi_f1: 0.3,
        pi_f2: 0.5,
        pi_f21: 0.05,
        ..CancellationParams::three_output([0.3, 0.3, 0.3], 0.1)
    };
    let (yes, no) = (200.0, 800.0);
    let t = yes + no;
    let (t1, t2, t3) = (0.3 * t, 0.3 * t, 0.3 * t);
    let (yes_y, no_n) = (0.1 * yes, 0.1 * no);
    let (yes_f1, yes_f2) = (0.3 * yes_y, 0.5 * yes_y);
    let (no_f1, no_f2, no_f21) = (0.3 * no_n, 0.5 * no_n, 0.05 * no);
    let moved = t1 + yes_y - yes_f1 - yes_f2 + no_n - no_f1 - no_f2;
    let counts = MultiCounts {
        slots: [
            [t1 + yes_y + no_n, t2, t3],
            [moved, t2 + yes_f1 + no_f1, t3 + yes_f2 + no_f2],
            [
                moved,
                t2 + yes_f1 + no_f1 + no_f21,
                t3 + yes_f2 + no_f2 - no_f21,
            ],
        ],
        total: t,
    };
    let abc_err = match solve_abc_system(counts, &abc, 0.99) {
        Ok(e) => (e.estimate.point - yes).abs(),
        Err(e) => return outcome(false, e.to_string()),
    };
    outcome(
        worst <= 1e-9 && abc_err <= 1e-9,
        format!("three-output worst {worst:.3e}, abc {abc_err:.3e}"),
    )
}

fn linear_system() -> Outcome {
    let mut rng = Substream::from_raw(0x5eed_0006);
    for _ in 0..100 {
        let p = random_params(&mut rng, true);
        let total = 100 + below(&mut rng, 100_000);
        let yes = below(&mut rng, total);
        let pop = PopulationSpec::new(yes, total - yes);
        let exact = direct_expectation(p.as_array(), yes as f64, (total - yes) as f64);
        let tol = 1e-9 * total as f64;

        let noiseless = match solve_two_unknowns(exact, &p) {
            Ok(c) => c,
            Err(e) => return outcome(false, e.to_string()),
        };
        if !noiseless
            .iter()
            .any(|c| (c.yes_estimate - yes as f64).abs() <= tol && c.sigma.abs() <= tol)
        {
            return outcome(
                false,
                format!("no zero-sigma candidate for {:?} {pop:?}", p.as_array()),
            );
        }

        // δ owners pulled out of Yes and Bottom into No, plus a κ-owner shift of YES
        let c = p.pi_s_yes1() + p.pi_s_yes2() - p.pi_s_no();
        let delta = uniform(&mut rng, 1.0, 0.1 * exact.yes.min(exact.bottom).max(1.0));
        let kappa = uniform(&mut rng, 0.0, 50.0).min((total - yes) as f64);
        let perturbed = Counts::new(
            exact.yes - delta + c * kappa,
            exact.no + 2.0 * delta,
            exact.bottom - delta - c * kappa,
        );
        if perturbed.yes < 0.0 || perturbed.bottom < 0.0 {
            continue;
        }
        let shifted = match solve_two_unknowns(perturbed, &p) {
            Ok(c) => c,
            Err(e) => return outcome(false, e.to_string()),
        };
        if !shifted.iter().any(|cand| {
            (cand.sigma - delta).abs() <= tol
                && (cand.yes_estimate - (yes as f64 + kappa)).abs() <= tol
        }) {
            return outcome(
                false,
                format!("no sigma=delta candidate for {:?} {pop:?}", p.as_array()),
            );
        }
    }
    outcome(true, "100 random unit-coin parameter sets")
}

fn sweep_behaviour() -> Outcome {
    let stations = 20;
    let epochs = 1000;
    let mut dataset = Vec::new();
    for epoch in 0..epochs {
        for s in 0..stations {
            let count = if s == 0 { 20 + epoch % 30 } else { 40 };
            dataset.push(EpochRecord::new(epoch, station_name(s), count));
        }
    }
    let config = SimulationConfig::new(MechanismParams::reference(), 77, 48_719);
    let rates = [0.068, 0.0068, 6.8e-4, 6.8e-5, 6.8e-6, 6.8e-7];
    let rows = match sweep(&config, &dataset, &rates, None) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let eps_up = rows.windows(2).all(|w| w[1].epsilon_dp > w[0].epsilon_dp);
    let crowd_down = rows
        .windows(2)
        .all(|w| w[1].crowd_expected < w[0].crowd_expected);
    let crowd_check = rows.iter().all(|r| {
        crowd_size(
            48_719,
            &config.params.with_pi_s_no(r.pi_s_no).unwrap(),
            0.99,
        )
        .map(|c| c.expected_noisy_yes == r.crowd_expected)
        .unwrap_or(false)
    });
    // error grows with the No sampling rate, so it shrinks along the sweep
    let error_steps = rows
        .windows(2)
        .filter(|w| w[0].mean_abs_err > w[1].mean_abs_err)
        .count();
    let errors: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.3}", r.mean_abs_err))
        .collect();
    outcome(
        eps_up && crowd_down && crowd_check && error_steps >= 4,
        format!(
            "eps increasing={eps_up} crowd decreasing={crowd_down} error steps {error_steps}/5 [{}]",
            errors.join(", ")
        ),
    )
}

fn desk_scale() -> Outcome {
    let dataset = synth_dataset(3220, 48, 47_719, 2024);
    let config = SimulationConfig::new(MechanismParams::reference(), 11, 47_719);
    let render = || -> Result<(Vec<u8>, f64), String> {
        let rows = run_simulation(&config, &dataset).map_err(|e| e.to_string())?;
        let covered = rows
            .iter()
            .filter(|r| r.primary().map(|o| o.covered).unwrap_or(false))
            .count();
        let mut buf = Vec::new();
        write_results(&rows, &mut buf).map_err(|e| e.to_string())?;
        Ok((buf, covered as f64 / rows.len() as f64))
    };
    let runs = [
        render(),
        render(),
        with_threads(1, render),
        with_threads(4, render),
    ];
    let mut outputs = Vec::new();
    for r in runs {
        match r {
            Ok(o) => outputs.push(o),
            Err(e) => return outcome(false, e),
        }
    }
    let identical = outputs.windows(2).all(|w| w[0].0 == w[1].0);
    let coverage = outputs[0].1;
    outcome(
        identical && coverage >= 0.95,
        format!("coverage={coverage:.4} byte-identical={identical} over 4 runs"),
    )
}

type Criterion = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        ("epsilon values", epsilons),
        ("round-trip inversion", round_trip),
        ("enumeration oracle", enumeration),
        ("monte carlo calibration", calibration),
        ("cancellation exactness", cancellation),
        ("two-unknown solver", linear_system),
        ("sampling-rate sweep", sweep_behaviour),
        ("desk-scale simulation", desk_scale),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
