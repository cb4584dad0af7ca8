//! Acceptance criteria 1 to 13. Each criterion prints one PASS/FAIL line.

use num_complex::Complex64;
use pingpong::analysis::{
    binary_info, eigenvalues, invert_info, survival_per_message, survival_total,
};
use pingpong::channel::loopback_pair;
use pingpong::cli::run_cli;
use pingpong::montecarlo::{estimate_detection, estimate_survival};
use pingpong::qstate::make_bell;
use pingpong::{
    run_session, run_session_over, AttackSpec, BellOutcome, DensityMatrix, EveGuess, Mode, Priors,
    ProtocolConfig, Session, Unitary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;

fn check(id: u32, name: &str, ok: bool, detail: String) {
    println!(
        "AC{id:02} {} {name}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "AC{id} {name} failed: {detail}");
}

fn sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn ac01_coding_flip_exactness() {
    let flipped = make_bell(BellOutcome::PsiPlus)
        .apply_unitary(&Unitary::pauli_z(0))
        .unwrap();
    let dev = flipped.max_abs_diff(&make_bell(BellOutcome::PsiMinus));
    check(
        1,
        "coding flip",
        dev < 1e-12,
        format!("max deviation {dev:.3e}"),
    );
}

#[test]
fn ac02_indistinguishability() {
    let half = DensityMatrix::maximally_mixed(2);
    let worst = [BellOutcome::PsiPlus, BellOutcome::PsiMinus]
        .iter()
        .map(|&b| make_bell(b).reduced_density(0).unwrap().max_abs_diff(&half))
        .fold(0.0, f64::max);
    check(
        2,
        "travel qubit is maximally mixed",
        worst < 1e-12,
        format!("max deviation {worst:.3e}"),
    );
}

#[test]
fn ac03_faithful_transmission() {
    let mut failures = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let message: Vec<u8> = (0..256).map(|_| rng.random_range(0..=1)).collect();
        let t = run_session(
            ProtocolConfig::direct(0.5, message.clone(), seed),
            Some(AttackSpec::none()),
        )
        .unwrap();
        let exact = t
            .decoded_bits
            .iter()
            .zip(&message)
            .all(|(d, m)| *d == Some(*m));
        if t.aborted || t.invalid_decodes != 0 || t.decoded_bits.len() != 256 || !exact {
            failures += 1;
        }
    }
    check(
        3,
        "faithful transmission",
        failures == 0,
        format!("{failures}/100 sessions differ"),
    );
}

#[test]
fn ac04_full_info_detection() {
    let n = 10_000;
    let est = estimate_detection(AttackSpec::full_info(), n, 4).unwrap();
    let s = sigma(0.5, n);
    let ok = (est.rate - 0.5).abs() < 4.0 * s;
    check(
        4,
        "50% detection",
        ok,
        format!("rate {:.4} (sigma {s:.4})", est.rate),
    );
}

#[test]
fn ac05_parameterized_detection() {
    let n = 10_000;
    let mut all_ok = true;
    let mut parts = Vec::new();
    for (k, theta) in [PI / 12.0, PI / 8.0, PI / 6.0, PI / 4.0]
        .into_iter()
        .enumerate()
    {
        let d = theta.sin().powi(2);
        let est = estimate_detection(AttackSpec::angle(theta).unwrap(), n, 50 + k as u64).unwrap();
        let ok = (est.rate - d).abs() < 4.0 * sigma(d, n);
        all_ok &= ok;
        parts.push(format!("{:.4}~{d:.4}", est.rate));
    }
    check(5, "detection = sin^2 theta", all_ok, parts.join(" "));
}

#[test]
fn ac06_eigenvalue_oracle() {
    let mut worst = 0.0f64;
    for i in 0..10 {
        let d = 0.05 + 0.1 * i as f64;
        for j in 0..10 {
            let p0 = 0.05 + 0.1 * j as f64;
            let (a, b) = ((1.0 - d).sqrt(), d.sqrt());
            let off = Complex64::new(a * b * (2.0 * p0 - 1.0), 0.0);
            let rho = DensityMatrix::new(
                2,
                vec![
                    Complex64::new(1.0 - d, 0.0),
                    off,
                    off,
                    Complex64::new(d, 0.0),
                ],
            )
            .unwrap();
            let numeric = rho.eigenvalues();
            let (l1, l2) = eigenvalues(d, Priors::from_p0(p0).unwrap()).unwrap();
            worst = worst
                .max((l1 - numeric[0]).abs())
                .max((l2 - numeric[1]).abs());
        }
    }
    check(
        6,
        "closed-form eigenvalues",
        worst < 1e-10,
        format!("max deviation {worst:.3e}"),
    );
}

#[test]
fn ac07_entropy_endpoints() {
    let ends = [
        (binary_info(0.5).unwrap() - 1.0).abs(),
        binary_info(0.0).unwrap().abs(),
        binary_info(1.0).unwrap().abs(),
    ];
    let end_dev = ends.iter().cloned().fold(0.0, f64::max);
    let inv_dev = (0..=100)
        .map(|k| {
            let d = 0.005 * k as f64;
            (invert_info(binary_info(d).unwrap()).unwrap() - d).abs()
        })
        .fold(0.0, f64::max);
    check(
        7,
        "entropy endpoints and inversion",
        end_dev < 1e-12 && inv_dev < 1e-9,
        format!("endpoint deviation {end_dev:.3e}, inversion deviation {inv_dev:.3e}"),
    );
}

#[test]
fn ac08_character_survival() {
    let analytic = survival_total(8.0, 0.5, 0.5).unwrap();
    let n = 20_000;
    let mc = estimate_survival(AttackSpec::full_info(), 0.5, 8, n, 8).unwrap();
    let s = sigma(analytic, n);
    let ok = (analytic - 0.0390).abs() < 5e-4 && (mc - analytic).abs() < 4.0 * s;
    check(
        8,
        "one character",
        ok,
        format!("analytic {analytic:.5}, monte carlo {mc:.5} (sigma {s:.5})"),
    );
}

#[test]
fn ac09_geometric_series() {
    let mut worst = 0.0f64;
    for c in [0.1f64, 0.25, 0.5, 0.75, 0.9] {
        for d in [0.1f64, 0.25, 0.4, 0.5, 0.75, 1.0] {
            let q = c * (1.0 - d);
            let partial: f64 = (0..200).map(|n| (1.0 - c) * q.powi(n)).sum();
            worst = worst.max((survival_per_message(c, d).unwrap() - partial).abs());
        }
    }
    check(
        9,
        "geometric series",
        worst < 1e-12,
        format!("max deviation {worst:.3e}"),
    );
}

#[test]
fn ac10_transmission_rate() {
    let t = run_session(
        ProtocolConfig::new(0.5, 50_000, Mode::Key, 10),
        Some(AttackSpec::none()),
    )
    .unwrap();
    let runs = t.control_runs + t.message_runs;
    let frac = t.message_runs as f64 / runs as f64;
    let s = sigma(0.5, runs);
    let ok = runs >= 90_000 && (frac - 0.5).abs() < 4.0 * s;
    check(
        10,
        "rate r = 1 - c",
        ok,
        format!("{runs} runs, message fraction {frac:.4} (sigma {s:.4})"),
    );
}

#[test]
fn ac11_figure_curves() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli(
        [
            "pingpong",
            "curve",
            "--c",
            "0.5",
            "--d",
            "0.1,0.25,0.5",
            "--I-max",
            "20",
            "--steps",
            "40",
            "--out",
            path.to_str().unwrap(),
        ],
        &mut out,
        &mut err,
    );
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["I", "c", "d", "I0", "s"]);
    // d bits -> (I bits -> s)
    let mut curves: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let i: f64 = rec[0].parse().unwrap();
        let d: f64 = rec[2].parse().unwrap();
        let s: f64 = rec[4].parse().unwrap();
        curves.entry(d.to_bits()).or_default().push((i, s));
    }
    let mut ds: Vec<f64> = curves.keys().map(|&k| f64::from_bits(k)).collect();
    ds.sort_by(f64::total_cmp);
    let monotone = curves
        .values()
        .all(|c| c.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 <= w[0].1));
    let ordered = (0..=40).all(|k| {
        let col: Vec<f64> = ds.iter().map(|d| curves[&d.to_bits()][k].1).collect();
        col.windows(2).all(|w| w[1] <= w[0])
    });
    let at8 = curves[&0.5f64.to_bits()]
        .iter()
        .find(|(i, _)| (i - 8.0).abs() < 1e-9)
        .map(|p| p.1)
        .unwrap_or(f64::NAN);
    let ok = ds == [0.1, 0.25, 0.5] && monotone && ordered && (at8 - 0.039).abs() < 5e-4;
    check(
        11,
        "survival curves",
        ok,
        format!("monotone {monotone}, ordered {ordered}, s(8) at d=0.5 {at8:.4}"),
    );
}

#[test]
fn ac12_transport_equivalence() {
    let cases = [
        (
            ProtocolConfig::new(0.3, 64, Mode::Key, 12),
            AttackSpec::none(),
        ),
        (
            ProtocolConfig::new(0.3, 64, Mode::Key, 12),
            AttackSpec::angle(PI / 8.0).unwrap(),
        ),
        (
            ProtocolConfig::new(0.5, 32, Mode::Direct, 5),
            AttackSpec::full_info(),
        ),
    ];
    let mut identical = true;
    let mut sizes = Vec::new();
    for (config, attack) in cases {
        let memory = run_session(config.clone(), Some(attack)).unwrap();
        let (alice, bob) = loopback_pair(0).unwrap();
        let tcp = run_session_over(config, Some(attack), Box::new(alice), Box::new(bob)).unwrap();
        let (a, b) = (memory.to_json(), tcp.to_json());
        identical &= a.as_bytes() == b.as_bytes();
        sizes.push(format!("{} runs/{} bytes", memory.events.len(), a.len()));
    }
    check(12, "transport equivalence", identical, sizes.join(", "));
}

#[test]
fn ac13_full_info_extraction() {
    let mut compared = 0u64;
    let mut mismatches = 0u64;
    for seed in 0..1000u64 {
        let t = run_session(
            ProtocolConfig::new(0.5, 16, Mode::Key, seed),
            Some(AttackSpec::full_info()),
        )
        .unwrap();
        for ex in &t.eve_log {
            let EveGuess::Bit(g) = ex.guess else {
                mismatches += 1;
                continue;
            };
            let bit = t
                .events
                .iter()
                .find(|e| e.run_index == ex.run_index)
                .and_then(|e| e.bit_index)
                .map(|i| t.message_bits[i]);
            compared += 1;
            if bit != Some(g) {
                mismatches += 1;
            }
        }
    }
    check(
        13,
        "full-information extraction",
        compared > 0 && mismatches == 0,
        format!("{compared} message runs, {mismatches} wrong guesses"),
    );
}

#[test]
fn session_api_smoke() {
    let mut s = Session::new(
        ProtocolConfig::new(0.0, 2, Mode::Key, 3),
        AttackSpec::none(),
    )
    .unwrap();
    s.run_to_completion().unwrap();
    assert!(s.transcript().bits_ok());
}
