//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails or exceeds its runtime budget.

use std::f64::consts::{PI, SQRT_2};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use acceptorloss_core::acceptor::{
    level_structure, AcceptorParams, FieldVector, StrainTensor, C64,
};
use acceptorloss_core::lindblad::*;
use acceptorloss_core::resonator::*;
use acceptorloss_core::spectrum::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn four_level(nbar: f64, branching: f64, omega: f64) -> FourLevelParams {
    FourLevelParams {
        gamma_prime: 1.0,
        gamma_tilde: branching,
        nbar,
        omega: C64::new(omega, 0.0),
        ..Default::default()
    }
}

/// Kernel of the 16×16 Liouvillian; a degenerate kernel is resolved by
/// projecting the maximally mixed state.
fn kernel_state(p: &FourLevelParams, field_on: bool) -> DensityMatrix4 {
    let l = build_liouvillian(p, field_on);
    match steady_state_numeric(&l) {
        Ok(rho) => rho,
        Err(LindbladError::DegenerateSteadyState { .. }) => {
            stationary_projection(&l, &DensityMatrix4::maximally_mixed()).expect("projection")
        }
        Err(e) => panic!("steady state: {e}"),
    }
}

fn c1_first_principles_q() -> Outcome {
    let dopant = DopantSpec {
        concentration_cm3: 2.5e15,
        dipole_debye: 0.26 / 3f64.sqrt(),
        epsilon_r: 11.7,
    };
    let q = quality_factor(loss_tangent_narrowband(0.03e-9, &dopant));
    outcome(
        (0.8e6..=1.5e6).contains(&q),
        format!("Q = {q:.4e}, window [0.8e6, 1.5e6]"),
    )
}

fn c2_channel_ratio() -> Outcome {
    let r = compare_loss_channels(1e14, 4.5e-4, 1e13, 0.92).expect("ratio");
    outcome(
        (r - 204.0).abs() <= 1.0,
        format!("ratio = {r:.3}, target 204 ± 1"),
    )
}

fn c3_steady_state_equivalence() -> Outcome {
    let grid = |lo: f64, hi: f64| (0..5).map(move |k| lo + (hi - lo) * k as f64 / 4.0);
    let mut zero = 0.0_f64;
    for n in grid(0.0, 2.0) {
        for b in grid(0.0, 3.0) {
            for w in grid(0.0, 10.0) {
                let p = four_level(n, b, w);
                zero = zero.max(
                    kernel_state(&p, false)
                        .max_population_diff(&steady_state_analytic_zero_field(&p)),
                );
            }
        }
    }
    let mut field = 0.0_f64;
    for n in [0.05, 0.1, 0.5, 1.0, 2.0] {
        for b in [0.25, 0.5, 1.0, 2.0, 3.0] {
            for w in [0.01, 0.1, 1.0, 3.0, 10.0] {
                let mut p = four_level(n, b, w);
                p.delta_big = 1e4 * w;
                let (analytic, _) = steady_state_analytic_field(&p);
                field = field.max(kernel_state(&p, true).max_population_diff(&analytic));
            }
        }
    }
    outcome(
        zero < 1e-8 && field < 1e-5,
        format!(
            "zero-field max error {zero:.2e} (< 1e-8), in-field max error {field:.2e} (< 1e-5)"
        ),
    )
}

/// Drive at which the numerically solved population difference drops to
/// `1/√2` of its thermal value.
fn critical_rabi_by_bisection(p: &FourLevelParams, field_on: bool) -> f64 {
    let target = thermal_population_difference(p.nbar) / SQRT_2;
    let excess = |w: f64| kernel_state(&p.with_omega(w), field_on).population_difference() - target;
    let (mut lo, mut hi) = (0.0, 1.0);
    while excess(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn c4_critical_rabi() -> Outcome {
    let (mut zero, mut field, mut ratio) = (0.0_f64, 0.0_f64, 0.0_f64);
    for n in [0.01, 0.1, 0.5, 1.0, 2.0] {
        for b in [0.1, 0.5, 1.0, 2.0, 3.0] {
            let mut p = four_level(n, b, 0.0);
            p.delta_big = 1e5;
            let closed_zero = critical_rabi_zero_field(&p);
            let closed_field = critical_rabi_field(&p).expect("field critical Rabi");
            zero = zero.max(rel(
                critical_rabi_by_bisection(&p, false).powi(2),
                closed_zero.powi(2),
            ));
            field = field.max(rel(
                critical_rabi_by_bisection(&p, true).powi(2),
                closed_field.powi(2),
            ));
            let sat = saturation_ratio(n, b).expect("ratio");
            ratio = ratio.max(rel((closed_zero / closed_field).powi(2), sat));
        }
    }
    outcome(
        zero < 1e-6 && field < 1e-6 && ratio < 1e-9,
        format!("zero-field {zero:.2e}, in-field {field:.2e} (< 1e-6); ratio {ratio:.2e} (< 1e-9)"),
    )
}

fn c5_saturation_asymptotics() -> Outcome {
    let b = 1.0;
    let large = saturation_ratio(1e3, b).expect("ratio");
    let limit_ok = (large - (1.0 + b / 2.0)).abs() < 1e-3;
    // every n̄ up to and including 0.055
    let worst = (1..=55)
        .map(|k| k as f64 * 1e-3)
        .map(|n| (n, saturation_ratio(n, b).expect("ratio")))
        .fold(
            (0.0, f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        );
    outcome(
        limit_ok && worst.1 > 10.0,
        format!(
            "ratio(1e3, 1) = {large:.6} (limit 1.5 ± 1e-3); min ratio over n̄ ≤ 0.055 is {:.3} at n̄ = {} (needs > 10)",
            worst.1, worst.0
        ),
    )
}

fn c6_s21_round_trip() -> Outcome {
    let mut errors = Vec::with_capacity(100);
    let mut failures = 0;
    for seed in 0..100u64 {
        let mut rng = StdRng::seed_from_u64(0xac ^ seed);
        let f0 = rng.random_range(4e9..8e9);
        let (q, qc) = loop {
            let q = 10f64.powf(rng.random_range(3.0..6.0));
            let qc = 10f64.powf(rng.random_range(4.0..3e5f64.log10()));
            if q < qc {
                break (q, qc);
            }
        };
        let df = rng.random_range(-1e-5..1e-5) * f0;
        let (a, phi, tau) = (
            rng.random_range(0.5..1.5),
            rng.random_range(-PI..PI),
            rng.random_range(-50e-9..50e-9),
        );
        let n = 1000;
        let half = 5.0 * f0 / q;
        let f: Vec<f64> = (0..n)
            .map(|k| f0 - half + 2.0 * half * k as f64 / (n - 1) as f64)
            .collect();
        let truth = ResonatorFit::new(a, phi, tau, f0, q, qc, df, f[0]);
        // SNR is the circle diameter a·Q/Qc over the complex noise amplitude
        let noise = Normal::new(0.0, a * (q / qc) / (100.0 * SQRT_2)).unwrap();
        let z = f
            .iter()
            .map(|&x| {
                s21_model(&truth, x) + C64::new(noise.sample(&mut rng), noise.sample(&mut rng))
            })
            .collect();
        let trace = S21Trace::new(f, z, -120.0).unwrap();
        match fit_s21(&trace, None) {
            Ok(fit) => errors.push(rel(fit.qi, truth.qi)),
            Err(_) => {
                failures += 1;
                errors.push(f64::INFINITY);
            }
        }
    }
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = 0.5 * (errors[49] + errors[50]);
    let p95 = errors[94];
    outcome(
        median < 0.01 && p95 < 0.05,
        format!("median |Qi/Qi_true − 1| = {median:.2e} (< 1e-2), 95th percentile {p95:.2e} (< 5e-2), {failures} failed fits"),
    )
}

fn c7_photon_number() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let f0 = rng.random_range(1e9..1e10);
        let q = 10f64.powf(rng.random_range(3.0..7.0));
        let qe = q * 10f64.powf(rng.random_range(0.0..2.0));
        let pin = 10f64.powf(rng.random_range(-20.0..-10.0));
        let w = 2.0 * PI * f0;
        let (kappa, kappa_e) = (w / q, w / qe);
        let a = photon_number(pin, f0, q, qe).unwrap();
        let b = photon_number_from_rates(pin, f0, kappa - kappa_e, kappa_e).unwrap();
        worst = worst.max(rel(a, b));
    }
    let n = photon_number(1e-15, 6e9, 2e4, 4e4).unwrap();
    outcome(
        worst < 1e-12 && rel(n, 133.0) < 0.01,
        format!("form mismatch {worst:.2e} (< 1e-12); <n> = {n:.2} (133 ± 1%)"),
    )
}

fn c8_temperature() -> Outcome {
    let t = temperature_from_excited_population(6.3e9, 0.028).unwrap() * 1e3;
    outcome(
        (82.0..=87.0).contains(&t),
        format!("T = {t:.2} mK, window [82, 87]"),
    )
}

fn c9_spectrum_conservation() -> Outcome {
    let field = StrainField::synthetic_edge_profile(60, 30, 2e-5, 0.92);
    let mapped = splitting_map(&field, &AcceptorParams::default()).expect("map");
    let binnings = [
        BinSpec::default(),
        BinSpec::uniform(0.0, 30e9, 0.05e9).unwrap(),
        BinSpec::from_edges(vec![0.0, 1e9, 3e9, 7e9, 15e9, 40e9]).unwrap(),
    ];
    let worst = binnings
        .iter()
        .map(|b| (weighted_participation(&mapped, b).total_weight() - 0.92).abs())
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-6,
        format!("max |Σ P·Δf + overflow − 0.92| = {worst:.2e} over 3 binnings (< 1e-6)"),
    )
}

fn c10_saturation_fit() -> Outcome {
    let truth = |n_c| SaturationFitParams {
        tan_delta0: 1e-6,
        n_c,
        beta: 0.6,
        a_t: 0.8,
    };
    let (zero, field) = (truth(30.0), truth(3.0));
    let mut ratios: Vec<f64> = (0..100u64)
        .map(|seed| {
            let mut rng = StdRng::seed_from_u64(seed);
            let noise = Normal::new(0.0, 0.02).unwrap();
            let mut sample = |p: &SaturationFitParams| -> Vec<(f64, f64)> {
                (0..20)
                    .map(|k| {
                        let n = 30.0 * 10f64.powf(3.0 + 3.0 * k as f64 / 19.0);
                        (n, saturation_model(n, p) * (1.0 + noise.sample(&mut rng)))
                    })
                    .collect()
            };
            let (z, f) = (sample(&zero), sample(&field));
            fit_saturation_loglog(&z, &f).map_or(f64::NAN, |fit| fit.nc_ratio)
        })
        .collect();
    ratios.sort_by(|a, b| a.total_cmp(b));
    let median = 0.5 * (ratios[49] + ratios[50]);
    outcome(
        rel(median, 10.0) <= 0.02,
        format!("median nc_ratio = {median:.4} (10 ± 2%)"),
    )
}

fn c11_uniaxial_strain() -> Outcome {
    let ls = level_structure(
        &AcceptorParams::default(),
        &StrainTensor::uniaxial_z(1e-5),
        &FieldVector::ZERO,
        &FieldVector::ZERO,
    );
    let ghz = ls.orbital_splitting_hz * 1e-9;
    outcome(
        (ghz - 6.87).abs() <= 0.01,
        format!("splitting = {ghz:.4} GHz (6.87 ± 0.01)"),
    )
}

type Criterion = (u32, &'static str, u64, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "first-principles Q estimate", 1, c1_first_principles_q),
        (2, "loss channel comparison", 1, c2_channel_ratio),
        (
            3,
            "analytic vs kernel steady states",
            30,
            c3_steady_state_equivalence,
        ),
        (4, "critical Rabi closed forms", 60, c4_critical_rabi),
        (
            5,
            "saturation-ratio asymptotics",
            1,
            c5_saturation_asymptotics,
        ),
        (6, "S21 round trip", 60, c6_s21_round_trip),
        (7, "photon-number identity", 1, c7_photon_number),
        (8, "temperature anchor", 1, c8_temperature),
        (9, "spectrum conservation", 10, c9_spectrum_conservation),
        (10, "saturation-fit round trip", 30, c10_saturation_fit),
        (11, "uniaxial strain anchor", 1, c11_uniaxial_strain),
    ];
    let mut failed = Vec::new();
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = result.pass && in_time;
        println!(
            "[{}] criterion {id:>2} {name}: {} [{:.3} s, budget {budget} s]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
