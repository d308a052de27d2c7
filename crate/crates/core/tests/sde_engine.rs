mod common;

use common::*;
use patchdrift::ideal_free::chi_upper_bound;
use patchdrift::linalg::Matrix;
use patchdrift::model::{levins, two_rate_dispersal, Landscape};
use patchdrift::sde::*;
use patchdrift::twopatch::{chi_quadrature, stationary_density, TwoPatchParams};
use patchdrift::{Error, Scheme};

fn cfg(horizon: f64, replicates: usize, seed: u64) -> SimConfig<f64> {
    SimConfig {
        horizon,
        burn_in: horizon / 20.0,
        replicates,
        seed,
        ..SimConfig::default()
    }
}

fn two_patch(p: &TwoPatchParams<f64>) -> (Landscape<f64>, Dispersal<f64>) {
    let l = Landscape::uncorrelated(vec![p.mu1, p.mu2], &[p.s1sq, p.s2sq]).unwrap();
    let d = Matrix::from_rows(&[vec![-p.d12, p.d12], vec![p.d21, -p.d21]]).unwrap();
    (l, Dispersal::from_generator(d).unwrap())
}

fn within(est: f64, se: f64, target: f64, k: f64) -> bool {
    (est - target).abs() <= k * se
}

#[test]
fn single_patch_slope() {
    let l = Landscape::uncorrelated(vec![0.3], &[1.0]).unwrap();
    let c = SimConfig { dt: 1e-2, horizon: 1e4, burn_in: 10.0, ..cfg(1e4, 8, 11) };
    let e = estimate_chi_mc(&l, &Dispersal::none(1), &c).unwrap();
    assert!(e.segments >= 10);
    assert!(within(e.chi, e.std_error, -0.2, 3.0), "{e:?}");
}

#[test]
fn no_dispersal_gives_best_isolated_rate() {
    let l = Landscape::uncorrelated(vec![0.5, 0.2], &[1.0, 0.1]).unwrap();
    let e = estimate_chi_mc(&l, &Dispersal::none(2), &cfg(2000.0, 8, 3)).unwrap();
    assert!(within(e.chi, e.std_error, 0.15, 3.0), "{e:?}");

    let mut mu = vec![10.0, 10.0];
    mu.extend([1.0; 6]);
    let ex2 = Landscape::uncorrelated(mu, &[16.0; 8]).unwrap();
    let e = estimate_chi_mc(&ex2, &Dispersal::none(8), &cfg(2000.0, 16, 4)).unwrap();
    assert!(within(e.chi, e.std_error, 2.0, 3.0), "{e:?}");
}

#[test]
fn vanishing_noise_gives_deterministic_eigenvalue() {
    let mut r = rng(17);
    for n in [2, 3, 5] {
        let q = random_generator(&mut r, n).q().clone();
        let mu = random_vec(&mut r, n, -0.5, 0.5);
        let l = Landscape::uncorrelated(mu.clone(), &vec![1e-8; n]).unwrap();
        let d = Dispersal::from_generator(q.clone()).unwrap();
        let e = estimate_chi_mc(&l, &d, &SimConfig { burn_in: 20.0, ..cfg(200.0, 2, 1) }).unwrap();
        let a = to_na(&Matrix::diag(&mu).add(&q.transpose()));
        let lambda = a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(close(e.chi, lambda, 1e-4), "n {n}: {} vs {lambda}", e.chi);
    }
}

#[test]
fn symmetric_fractions_average_one_half() {
    let (l, d) = two_patch(&TwoPatchParams::symmetric(0.3, 1.0, 1.0));
    for scheme in [Scheme::Fraction, Scheme::LogAbundance] {
        let m = occupation_moments(&l, &d, &SimConfig { scheme, ..cfg(1000.0, 8, 5) }).unwrap();
        let se = m.mean_std_error();
        assert!(within(m.mean[0], se[0], 0.5, 3.0), "{scheme:?}: {} ± {}", m.mean[0], se[0]);
        assert!((m.mean.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let s = m.second.as_ref().unwrap();
        assert!(s.first_asymmetry().is_none());
        for i in 0..2 {
            let (v, e) = m.second_entry(i, i).unwrap();
            assert!(v <= m.mean[i] + 3.0 * e);
        }
    }
}

#[test]
fn fast_dispersal_concentrates_at_stationary_law() {
    let q = two_rate_dispersal::<f64>(4, &[0, 1], 1.0, 3.0).unwrap();
    let l = Landscape::uncorrelated(vec![0.4, 0.1, 0.2, 0.3], &[1.0, 0.5, 2.0, 1.0]).unwrap();
    let delta = 200.0;
    let d = Dispersal::scaled(&q, delta).unwrap();
    let m = occupation_moments(&l, &d, &cfg(200.0, 4, 9)).unwrap();
    let pi = q.pi().as_slice();
    let se = m.mean_std_error();
    for i in 0..4 {
        assert!((m.mean[i] - pi[i]).abs() <= (3.0 * se[i]).max(5e-3), "{i}");
        for j in 0..4 {
            assert!((m.second.as_ref().unwrap()[(i, j)] - pi[i] * pi[j]).abs() < 5e-3);
        }
    }
}

#[test]
fn moments_need_dispersal() {
    let l = Landscape::uncorrelated(vec![0.3, 0.3], &[1.0, 1.0]).unwrap();
    assert_eq!(
        occupation_moments(&l, &Dispersal::none(2), &cfg(10.0, 1, 0)),
        Err(Error::DegenerateNoDispersal)
    );
    let q = levins::<f64>(2).unwrap();
    assert!(occupation_moments(&l, &Dispersal::scaled(&q, 0.0).unwrap(), &cfg(10.0, 1, 0)).is_err());
}

#[test]
fn mixing_term_grows_with_dispersal() {
    let mut last = 0.0;
    for delta in [0.3, 1.0, 5.0] {
        let p = TwoPatchParams::symmetric(0.3, 1.0, delta);
        let (l, d) = two_patch(&p);
        let m = occupation_moments(&l, &d, &cfg(1000.0, 8, 21)).unwrap();
        let v = m.mean[0] - m.second.as_ref().unwrap()[(0, 0)];
        assert!(v > last, "delta {delta}: {v} <= {last}");
        last = v;
        let exact = stationary_density(&p).unwrap().mean_y_1my();
        assert!((v - exact).abs() < 5e-3, "delta {delta}: {v} vs {exact}");
    }
}

#[test]
fn asymmetric_mean_matches_quadrature() {
    let p = TwoPatchParams { mu1: 0.4, mu2: 0.2, s1sq: 1.0, s2sq: 0.5, d12: 0.5, d21: 1.0 };
    let (l, d) = two_patch(&p);
    let m = occupation_moments(&l, &d, &cfg(2000.0, 16, 8)).unwrap();
    let exact = stationary_density(&p).unwrap();
    let se = m.mean_std_error()[0];
    assert!(within(m.mean[0], se, exact.mean_y, 3.0), "{} ± {se} vs {}", m.mean[0], exact.mean_y);
    let mc = chi_from_moments(&l, &m).unwrap();
    let q = chi_quadrature(&p).unwrap().chi;
    assert!(within(mc.chi, mc.std_error, q, 3.0), "{mc:?} vs {q}");
}

#[test]
fn empirical_density_matches_quadrature() {
    let p = TwoPatchParams::symmetric(0.3, 1.0, 1.0);
    let (l, d) = two_patch(&p);
    let rho = stationary_density(&p).unwrap();
    let bins = 20;
    let c = cfg(2000.0, 1, 13);
    let (burn, _) = c.step_counts();
    let stride = 10;
    let mut counts = vec![0usize; bins];
    for rep in 0..8 {
        let path = simulate_path(&l, &d, &SimConfig { scheme: Scheme::Fraction, ..c.clone() }, rep, stride).unwrap();
        for y in path.y.iter().skip(burn / stride + 1) {
            counts[((y[0] * bins as f64) as usize).min(bins - 1)] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    let sub = 400;
    let mut l1 = 0.0;
    for (b, &c) in counts.iter().enumerate() {
        let h = 1.0 / (bins * sub) as f64;
        let mass: f64 = (0..sub).map(|k| rho.rho((b * sub + k) as f64 * h + h / 2.0) * h).sum();
        l1 += (c as f64 / total as f64 - mass).abs();
    }
    assert!(l1 <= 0.05, "L1 = {l1}");
}

#[test]
fn moment_plug_in() {
    let l = Landscape::uncorrelated(vec![0.2, 0.6, 0.1], &[1.0, 2.0, 0.5]).unwrap();
    let pi = vec![0.5, 0.3, 0.2];
    let second = Matrix::outer(&pi, &pi);
    let m = OccupationMoments {
        mean: pi.clone(),
        second: Some(second.clone()),
        sample_time: 1.0,
        batches: vec![Batch { duration: 1.0, log_s_increment: 0.0, mean: pi.clone(), second: Some(second) }],
    };
    let e = chi_from_moments(&l, &m).unwrap();
    let expect = 0.5 * 0.2 + 0.3 * 0.6 + 0.2 * 0.1 - 0.5 * (0.25 * 1.0 + 0.09 * 2.0 + 0.04 * 0.5);
    assert!(close(e.chi, expect, 1e-15));
    assert_eq!(e.method, patchdrift::Method::McMoments);
}

#[test]
fn thread_count_does_not_change_results() {
    let q = levins::<f64>(3).unwrap();
    let l = Landscape::uncorrelated(vec![0.3, 0.1, 0.5], &[1.0, 0.4, 2.0]).unwrap();
    let d = Dispersal::scaled(&q, 2.0).unwrap();
    let base = cfg(50.0, 6, 77);
    let runs: Vec<_> = [Some(1), Some(2), Some(5), None]
        .into_iter()
        .map(|threads| paired_estimates(&l, &d, &SimConfig { threads, ..base.clone() }).unwrap())
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.0.chi.to_bits(), runs[0].0.chi.to_bits());
        assert_eq!(r.1.chi.to_bits(), runs[0].1.chi.to_bits());
        assert_eq!(r.2, runs[0].2);
    }
    let other = estimate_chi_mc(&l, &d, &SimConfig { seed: 78, ..base }).unwrap();
    assert_ne!(other.chi, runs[0].0.chi);
}

#[test]
fn coarse_fraction_steps_are_reported() {
    let l = Landscape::uncorrelated(vec![0.0, 0.0, 0.0], &[25.0, 25.0, 25.0]).unwrap();
    let q = levins::<f64>(3).unwrap();
    let d = Dispersal::scaled(&q, 1.0).unwrap();
    let c = SimConfig { dt: 0.5, scheme: Scheme::Fraction, ..cfg(500.0, 1, 2) };
    assert!(matches!(estimate_chi_mc(&l, &d, &c), Err(Error::StepTooLarge { .. })));
    assert!(estimate_chi_mc(&l, &d, &SimConfig { scheme: Scheme::LogAbundance, ..c }).is_ok());
}

#[test]
fn path_csv_layout() {
    let q = levins::<f64>(3).unwrap();
    let l = Landscape::uncorrelated(vec![0.3, 0.1, 0.5], &[1.0, 0.4, 2.0]).unwrap();
    let d = Dispersal::scaled(&q, 2.0).unwrap();
    let path = simulate_log_abundances(&l, &d, &cfg(1.0, 1, 0), 100).unwrap();
    let mut buf = Vec::new();
    path.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,logS,y1,y2,y3");
    assert_eq!(lines.len(), 1 + 11);
    for line in &lines[1..] {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(v.len(), 5);
        assert!((v[2] + v[3] + v[4] - 1.0).abs() < 1e-12);
        assert!(v[2..].iter().all(|&y| y >= 0.0));
    }
}

#[test]
fn step_halving_is_stable() {
    let (l, d) = two_patch(&TwoPatchParams::symmetric(0.3, 1.0, 1.0));
    let coarse = estimate_chi_mc(&l, &d, &cfg(1000.0, 8, 31)).unwrap();
    let fine = estimate_chi_mc(&l, &d, &SimConfig { dt: 5e-4, ..cfg(1000.0, 8, 31) }).unwrap();
    let se = coarse.std_error.hypot(fine.std_error);
    assert!((coarse.chi - fine.chi).abs() <= (3.0 * se).max(5e-3), "{coarse:?} {fine:?}");
}

#[test]
fn estimates_respect_the_ideal_free_bound() {
    let q = two_rate_dispersal::<f64>(3, &[2], 1.0, 4.0).unwrap();
    let l = Landscape::uncorrelated(vec![0.6, 0.2, 0.4], &[1.0, 0.3, 2.0]).unwrap();
    let bound = chi_upper_bound(l.mu(), l.sigma()).unwrap();
    for delta in [0.5, 5.0] {
        let d = Dispersal::scaled(&q, delta).unwrap();
        let (a, b, _) = paired_estimates(&l, &d, &cfg(500.0, 8, 40)).unwrap();
        assert!(a.chi <= bound + 3.0 * a.std_error);
        assert!(b.chi <= bound + 3.0 * b.std_error);
    }
}

#[test]
fn single_precision_runs() {
    let q = levins::<f32>(2).unwrap();
    let l = Landscape::uncorrelated(vec![0.3f32, 0.3], &[1.0, 1.0]).unwrap();
    let d = Dispersal::scaled(&q, 5.0).unwrap();
    let c = SimConfig::<f32> { horizon: 500.0, burn_in: 20.0, replicates: 4, ..SimConfig::default() };
    let e = estimate_chi_mc(&l, &d, &c).unwrap();
    assert!((e.chi - 0.0394).abs() < 4.0 * e.std_error + 1e-2, "{e:?}");
}
