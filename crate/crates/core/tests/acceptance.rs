//! Exit criteria for the simulator. Each test prints one `criterion N: PASS|FAIL`
//! line to stderr (uncaptured) before asserting.

use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use miw::integrator::{ExternalPotential, Stepper};
use miw::potential::{equivariance_coefficients, EdgePolicy, PotentialSpec};
use miw::scenarios::{run_scenario, Outcome, ScenarioName, ScenarioOverrides, ScenarioSetup};
use miw::stencil::{build_stencil, stencil_residual, OffsetSet};
use miw::{DensityModel, PhysicalParams};

fn verdict(n: u32, what: &str, pass: bool, detail: &str) {
    let line = format!("criterion {n:>2}: {} {what} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn random_ensemble(rng: &mut ChaCha8Rng, n: usize, jitter: f64) -> Vec<f64> {
    let h = rng.random_range(0.05..2.0);
    let mut x = rng.random_range(-3.0..3.0);
    (0..n)
        .map(|_| {
            let cur = x;
            x += h * rng.random_range(1.0 - jitter..1.0 + jitter);
            cur
        })
        .collect()
}

/// Fourth-order central difference `-dU/dx_m`.
fn fd_forces(u: impl Fn(&[f64]) -> f64, xs: &[f64]) -> Vec<f64> {
    let h = 1e-4 * (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    (0..xs.len())
        .map(|m| {
            let at = |k: f64| {
                let mut p = xs.to_vec();
                p[m] += k * h;
                u(&p)
            };
            -(-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
        })
        .collect()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn all_potentials() -> Vec<(PotentialSpec, f64)> {
    let skip = EdgePolicy::SkipBoundaryTerms;
    vec![
        (PotentialSpec::toy(), 1e-6),
        (PotentialSpec::rational(2, skip).unwrap(), 1e-6),
        (PotentialSpec::rational(4, skip).unwrap(), 1e-6),
        (PotentialSpec::rational(6, skip).unwrap(), 1e-6),
        (PotentialSpec::equivariance(skip), 1e-5),
    ]
}

#[test]
fn criterion_01_stencil_exactness() {
    let l2 = build_stencil(&OffsetSet::symmetric_for_order(2).unwrap(), 2).unwrap();
    let want2 = [[rational(-1, 2), rational(1, 1)], [rational(1, 2), rational(1, 1)]];
    let l4 = build_stencil(&OffsetSet::symmetric_for_order(4).unwrap(), 4).unwrap();
    let want4 = [
        [rational(1, 12), rational(-1, 12), rational(-1, 2), rational(1, 1)],
        [rational(-2, 3), rational(4, 3), rational(1, 1), rational(-4, 1)],
        [rational(2, 3), rational(4, 3), rational(-1, 1), rational(-4, 1)],
        [rational(-1, 12), rational(-1, 12), rational(1, 2), rational(1, 1)],
    ];
    let mut exact = true;
    for (row, want) in want2.iter().enumerate() {
        for (l, q) in want.iter().enumerate() {
            exact &= l2.exact(row, l + 1) == Some(q);
        }
    }
    for (row, want) in want4.iter().enumerate() {
        for (l, q) in want.iter().enumerate() {
            exact &= l4.exact(row, l + 1) == Some(q);
        }
    }
    let residuals: Vec<f64> = [2, 4, 6, 8]
        .iter()
        .map(|&l| stencil_residual(&build_stencil(&OffsetSet::symmetric_for_order(l).unwrap(), l).unwrap()))
        .collect();
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    let pass = exact && worst <= 1e-12;
    verdict(1, "stencil exactness", pass, &format!("tables exact: {exact}, max residual {worst:e}"));
    assert!(pass);
}

#[test]
fn criterion_02_gradient_correctness() {
    let p = PhysicalParams::dimensionless();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 5];
    let mut ok = true;
    let mut checked = 0;
    for trial in 0..120 {
        let n = rng.random_range(5..=50usize);
        let xs = random_ensemble(&mut rng, n, 0.3);
        for (k, (spec, tol)) in all_potentials().into_iter().enumerate() {
            let f = match spec.forces(&xs, &p) {
                Ok(f) => f,
                // Wide stencils need more worlds than the smallest ensembles hold.
                Err(miw::Error::TooFewWorlds { .. }) => continue,
                Err(e) => panic!("trial {trial} {}: {e}", spec.name()),
            };
            checked += 1;
            let fd = fd_forces(|x| spec.energy(x, &p).unwrap(), &xs);
            let err = max_rel(&f, &fd);
            worst[k] = worst[k].max(err);
            if err > tol {
                ok = false;
                eprintln!("trial {trial} {} N={n}: {err:e}", spec.name());
            }
        }
    }
    let detail = format!(
        "{checked} potential/ensemble pairs; max rel err toy {:.1e}, L2 {:.1e}, L4 {:.1e}, L6 {:.1e}, equivariance {:.1e}",
        worst[0], worst[1], worst[2], worst[3], worst[4]
    );
    ok &= checked >= 500;
    verdict(2, "gradient correctness", ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_03_symmetry_suite() {
    let p = PhysicalParams::dimensionless();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut translation, mut scaling, mut net) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..40 {
        let n = rng.random_range(8..=40usize);
        let xs = random_ensemble(&mut rng, n, 0.3);
        let shift = rng.random_range(-5.0..5.0);
        let lambda = rng.random_range(0.3..3.0);
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| x * lambda).collect();
        for (k, (spec, _)) in all_potentials().into_iter().enumerate() {
            let u = spec.energy(&xs, &p).unwrap();
            let f = spec.forces(&xs, &p).unwrap();
            translation = translation.max((spec.energy(&shifted, &p).unwrap() - u).abs() / u.abs());
            translation = translation.max(max_rel(&spec.forces(&shifted, &p).unwrap(), &f));
            if k < 4 {
                scaling = scaling.max((spec.energy(&scaled, &p).unwrap() * lambda * lambda - u).abs() / u.abs());
            }
            let total: f64 = f.iter().sum();
            let size: f64 = f.iter().map(|v| v.abs()).sum();
            net = net.max(total.abs() / size);
        }
    }
    let pass = translation <= 1e-10 && scaling <= 1e-9 && net <= 1e-8;
    let detail = format!("translation {translation:.1e}, 1/lambda^2 scaling {scaling:.1e}, net force {net:.1e}");
    verdict(3, "symmetry suite", pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_04_energy_conservation() {
    let o = ScenarioOverrides { dt: Some(1e-5), steps: Some(100_000), record_every: Some(10), ..Default::default() };
    let report = run_scenario(ScenarioName::Fig1GroundToy, &o).unwrap();
    let drift = report.trajectory.energy_drift();

    let setup = ScenarioSetup::new(ScenarioName::Fig1GroundToy, &ScenarioOverrides::default()).unwrap();
    let mut stepper = Stepper::new(setup.config.apply_pins(&setup.initial), &setup.config, &setup.params).unwrap();
    for _ in 0..1000 {
        stepper.step().unwrap();
    }
    let mut back = stepper.into_state();
    back.momenta.iter_mut().for_each(|p| *p = -*p);
    let mut stepper = Stepper::new(back, &setup.config, &setup.params).unwrap();
    for _ in 0..1000 {
        stepper.step().unwrap();
    }
    let scale = setup.initial.positions.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let recovered = stepper
        .state()
        .positions
        .iter()
        .zip(&setup.initial.positions)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale;

    let pass = report.outcome != Outcome::Aborted && drift <= 1e-6 && recovered <= 1e-10;
    verdict(4, "energy conservation", pass, &format!("drift {drift:.2e}, reversibility error {recovered:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_05_ground_state_stationarity() {
    let o = ScenarioOverrides { dt: Some(1e-5), horizon: Some(1.0), ..Default::default() };
    let report = run_scenario(ScenarioName::Fig1GroundToy, &o).unwrap();
    let x0 = &report.setup.initial.positions;
    let worst = (5..45)
        .map(|i| report.amplitudes[i] / miw::scenarios::local_spacing(x0, i))
        .fold(0.0, f64::max);
    let pass = report.metric("time_final") == Some(1.0) && worst <= 0.2;
    verdict(5, "ground-state stationarity", pass, &format!("inner 40 worlds: max displacement / spacing {worst:.3}"));
    assert!(pass);
}

#[test]
fn criterion_06_ground_energy_convergence() {
    let p = PhysicalParams::dimensionless();
    let ext = ExternalPotential::Harmonic { omega: p.omega };
    let toy = PotentialSpec::toy();
    let deviation = |n: usize| {
        let x = DensityModel::ground().sample_worlds(n).unwrap().positions;
        let external: f64 = x.iter().map(|&x| ext.energy(x, &p)).sum();
        let per_world = (toy.energy(&x, &p).unwrap() + external) / n as f64;
        (per_world - p.ground_energy()).abs() / p.ground_energy()
    };
    let (d100, d1000) = (deviation(100), deviation(1000));
    let pass = d1000 < d100 && d1000 <= 0.1;
    verdict(6, "ground-state energy convergence", pass, &format!("rel deviation N=100 {d100:.2e}, N=1000 {d1000:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_07_toy_node_failure() {
    let mut lines = Vec::new();
    let mut pass = true;
    for dt in [1e-8, 1e-9] {
        let o = ScenarioOverrides { dt: Some(dt), horizon: Some(0.1), ..Default::default() };
        let r = run_scenario(ScenarioName::Fig3TruncatedToy, &o).unwrap();
        let collapsed = r.outcome == Outcome::NodeCollapse && r.metric("collapse_time").is_some_and(|t| t < 0.1);
        pass &= collapsed;
        let min_ratio = r.metric("gap_width_min").unwrap() / r.metric("gap_width_initial").unwrap();
        lines.push(format!("dt {dt:e}: {}, min gap / initial {min_ratio:.3}", r.outcome));
    }
    verdict(7, "toy-model node failure", pass, &lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_08_l4_node_stability() {
    let o = ScenarioOverrides { dt: Some(1e-9), horizon: Some(0.01), ..Default::default() };
    let r = run_scenario(ScenarioName::Fig4TwoFreeL4, &o).unwrap();
    let gap0 = r.metric("gap_width_initial").unwrap();
    let amps = r.free_amplitudes();
    let worst = amps.iter().cloned().fold(0.0, f64::max) / gap0;
    let pass = amps.len() == 2 && r.outcome != Outcome::NodeCollapse && r.outcome != Outcome::Aborted && worst <= 0.1;
    verdict(8, "L=4 node stability", pass, &format!("max displacement / initial gap {worst:.4}"));
    assert!(pass);
}

#[test]
fn criterion_09_order_improves_stability() {
    let o = ScenarioOverrides { dt: Some(1e-9), horizon: Some(0.01), ..Default::default() };
    let l4 = run_scenario(ScenarioName::Fig5TenFreeL4, &o).unwrap();
    let l6 = run_scenario(ScenarioName::Fig6TenFreeL6, &o).unwrap();
    let (a4, a6) = (l4.free_amplitudes(), l6.free_amplitudes());
    let ordered = a4.len() == 10 && a4.iter().zip(&a6).all(|(x4, x6)| x6 < x4);
    let open = |r: &miw::ScenarioReport| {
        r.outcome != Outcome::NodeCollapse
            && r.outcome != Outcome::Aborted
            && r.metric("gap_width_min").unwrap() >= 0.5 * r.metric("gap_width_initial").unwrap()
    };
    let pass = ordered && open(&l4) && open(&l6);
    let detail = format!(
        "max amplitude L4 {:.3e}, L6 {:.3e}; every world smaller under L6: {ordered}",
        l4.metric("amplitude_max").unwrap(),
        l6.metric("amplitude_max").unwrap()
    );
    verdict(9, "order improves stability", pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_10_equivariance() {
    let n_worlds = 5000;
    let e = DensityModel::excited().sample_worlds(n_worlds).unwrap();
    let mut worst = 0.0f64;
    for n in (3..=n_worlds - 2).step_by(7).chain(2495..=2506) {
        let c = equivariance_coefficients(&e, n, n_worlds).unwrap();
        for w in e.positions[n - 3..n + 2].windows(2) {
            worst = worst.max((c.mass(w[0], w[1]) * n_worlds as f64 - 1.0).abs());
        }
    }
    let o = ScenarioOverrides { dt: Some(1e-9), horizon: Some(0.01), ..Default::default() };
    let equiv = run_scenario(ScenarioName::FigA1TwoFreeEquiv, &o).unwrap();
    let fig4 = run_scenario(ScenarioName::Fig4TwoFreeL4, &o).unwrap();
    let (ae, a4) = (equiv.metric("amplitude_max").unwrap(), fig4.metric("amplitude_max").unwrap());
    let open = equiv.outcome != Outcome::NodeCollapse
        && equiv.outcome != Outcome::Aborted
        && equiv.metric("gap_width_min").unwrap() >= 0.5 * equiv.metric("gap_width_initial").unwrap();
    let pass = worst <= 1e-10 && open && ae > a4;
    let detail = format!("equal-area residual {worst:.1e}; amplitude equivariance {ae:.3e} vs rational L4 {a4:.3e}");
    verdict(10, "equivariance appendix", pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_11_force_oracle_trend() {
    let p = PhysicalParams::dimensionless();
    let model = DensityModel::ground();
    let n = 5000;
    let x = model.sample_worlds(n).unwrap().positions;
    let rms: Vec<f64> = [2, 4, 6]
        .iter()
        .map(|&l| {
            let f = PotentialSpec::rational(l, EdgePolicy::SkipBoundaryTerms).unwrap().forces(&x, &p).unwrap();
            let (mut num, mut den) = (0.0, 0.0);
            for i in n / 10..n - n / 10 {
                let oracle = model.bohmian_force(x[i]).unwrap();
                num += (f[i] - oracle).powi(2);
                den += oracle * oracle;
            }
            (num / den).sqrt()
        })
        .collect();
    let pass = rms[0] > rms[1] && rms[1] > rms[2];
    let detail = format!("relative RMS L2 {:.3e}, L4 {:.3e}, L6 {:.3e}", rms[0], rms[1], rms[2]);
    verdict(11, "force-oracle trend", pass, &detail);
    assert!(pass);
}
