//! Statistical checks of the samplers and exact checks of the harmonic extension and
//! the FFT oracle.

use sparsedom::riesz::background::{finish_step, vertical_draw};
use sparsedom::riesz::{fft_riesz_oracle, gv_li_estimator, EstimatorConfig, Geometry, Layering, PoissonField, TestFunction};
use sparsedom::rng::substream;
use std::f64::consts::TAU;

/// Fraction of vertical paths from `y0` absorbed at 0 before time `t`.
fn hit_fraction(layering: &Layering, y0: f64, t: f64, paths: u64, seed: u64) -> f64 {
    let mut hits = 0u64;
    for p in 0..paths {
        let mut rng = substream(seed, p);
        let (mut b, mut elapsed) = (y0, 0.0);
        while elapsed < t {
            let mv = finish_step(layering, vertical_draw(layering, b, 0.0, &mut rng), 0.0, &mut rng);
            elapsed += mv.dt();
            if mv.hit() {
                hits += (elapsed <= t + 1e-12) as u64;
                break;
            }
            b = mv.end();
        }
    }
    hits as f64 / paths as f64
}

#[test]
fn absorption_probability_with_bridge_correction() {
    let (y0, t, paths) = (1.0, 50.0f64, 20_000u64);
    let exact = libm::erfc(y0 / (2.0 * t.sqrt()));
    let se = (exact * (1.0 - exact) / paths as f64).sqrt();
    let bridged = hit_fraction(&Layering::uniform(0.05, 1e9), y0, t, paths, 11);
    assert!((bridged - exact).abs() < 4.0 * se, "bridged {bridged} vs {exact} (se {se})");
    let raw = Layering { bridge: false, ..Layering::uniform(0.05, 1e9) };
    let monitored = hit_fraction(&raw, y0, t, paths, 11);
    assert!(monitored < exact - 4.0 * se, "discrete monitoring should miss crossings: {monitored} vs {exact}");
}

#[test]
fn first_passage_skip_law() {
    let layering = Layering { skip_above: 1.0, ..Layering::uniform(0.01, 1e9) };
    let (b, t, draws) = (20.0, 50.0f64, 100_000u64);
    let mut rng = substream(12, 0);
    let mut within = 0u64;
    for _ in 0..draws {
        let mv = vertical_draw(&layering, b, 0.0, &mut rng);
        assert_eq!(mv.end(), 1.0);
        assert!(!mv.hit());
        within += (mv.dt() <= t) as u64;
    }
    let exact = libm::erfc((b - 1.0) / (2.0 * t.sqrt()));
    let got = within as f64 / draws as f64;
    let se = (exact * (1.0 - exact) / draws as f64).sqrt();
    assert!((got - exact).abs() < 4.0 * se, "{got} vs {exact}");
}

#[test]
fn gauss_transition_moments() {
    let g = Geometry::gauss(1).unwrap();
    let (x0, steps, dt, n) = (1.5, 70, 0.01, 20_000u64);
    let t = steps as f64 * dt;
    let mut xs = Vec::with_capacity(n as usize);
    for p in 0..n {
        let mut rng = substream(13, p);
        let mut x = [x0];
        for _ in 0..steps {
            g.step(&mut x, dt, &mut rng);
        }
        xs.push(x[0]);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let (m, v) = (x0 * (-t).exp(), 1.0 - (-2.0 * t).exp());
    let t_stat = (mean - m) / (v / n as f64).sqrt();
    assert!(t_stat.abs() < 4.0, "mean {mean} vs {m}, t = {t_stat}");
    // variance of the sample variance of a normal is 2 v^2 / (n - 1)
    let v_stat = (var - v) / (2.0 * v * v / (n - 1) as f64).sqrt();
    assert!(v_stat.abs() < 4.0, "var {var} vs {v}, z = {v_stat}");
}

#[test]
fn torus_stays_on_the_circle() {
    let g = Geometry::torus(3).unwrap();
    let mut rng = substream(14, 0);
    let mut x = [0.1, 6.2, 3.0];
    for _ in 0..10_000 {
        g.step(&mut x, 0.05, &mut rng);
        assert!(x.iter().all(|v| (0.0..TAU).contains(v)));
    }
}

#[test]
fn exit_points_follow_the_invariant_measure() {
    for (geom, f) in [(Geometry::gauss(1).unwrap(), TestFunction::hermite(1, 2)), (Geometry::torus(1).unwrap(), TestFunction::cos(1, 1))] {
        let cfg = EstimatorConfig { y0: 4.0, dt: 1e-2, paths: 20_000, bins: 16, seed: 15, ..EstimatorConfig::default() };
        let est = gv_li_estimator(geom, &f, &cfg).unwrap();
        let (chi2, z) = est.invariant_measure_chi2();
        assert!(z.abs() < 3.0, "{}: chi2 {chi2}, z {z}", geom.name());
    }
}

fn second_difference(g: &dyn Fn(f64) -> f64, at: f64, h: f64) -> f64 {
    (g(at + h) - 2.0 * g(at) + g(at - h)) / (h * h)
}

#[test]
fn poisson_extension_boundary_and_harmonicity() {
    let h = 1e-3;
    let cases = [
        (Geometry::torus(1).unwrap(), TestFunction::parse("cos + 0.5*sin2", 1).unwrap()),
        (Geometry::gauss(1).unwrap(), TestFunction::parse("he2 + 0.3*he1", 1).unwrap()),
    ];
    for (geom, f) in cases {
        let field = PoissonField::new(geom, f.clone(), 0.0).unwrap();
        for &x in &[-1.3, 0.2, 0.9, 2.5] {
            assert!((field.eval(&[x], 0.0).value - f.value(&[x])).abs() < 1e-14);
            for &y in &[0.3, 1.0, 2.2] {
                let fy = |s: f64| field.eval(&[x], s).value;
                let fx = |s: f64| field.eval(&[s], y).value;
                let grad = field.eval(&[x], y).grad_x[0];
                let first = (fx(x + h) - fx(x - h)) / (2.0 * h);
                assert!((grad - first).abs() < 1e-6 * (1.0 + grad.abs()), "gradient at ({x}, {y})");
                let dy = field.eval(&[x], y).d_y;
                let fd = (fy(y + h) - fy(y - h)) / (2.0 * h);
                assert!((dy - fd).abs() < 1e-6 * (1.0 + dy.abs()), "{} d_y at ({x}, {y}): {dy} vs {fd}", geom.name());
                let drift = match geom {
                    Geometry::Gauss { .. } => -x * grad,
                    _ => 0.0,
                };
                let laplace = second_difference(&fy, y, h) + second_difference(&fx, x, h) + drift;
                assert!(laplace.abs() < 1e-5 * (1.0 + dy.abs()), "{} at ({x}, {y}): {laplace}", geom.name());
            }
        }
    }
}

#[test]
fn oracle_maps_cosine_to_negative_sine() {
    let m = 1024;
    let xs: Vec<f64> = (0..m).map(|i| TAU * i as f64 / m as f64).collect();
    for k in [1.0, 3.0, 17.0] {
        let f: Vec<f64> = xs.iter().map(|x| (k * x).cos() + 0.25).collect();
        let out = fft_riesz_oracle(&f, &[m]).unwrap();
        assert!((out.removed_mean - 0.25).abs() < 1e-12);
        for (r, x) in out.components[0].iter().zip(&xs) {
            assert!((r + (k * x).sin()).abs() < 1e-10);
        }
    }
}

#[test]
fn oracle_contracts_energy_on_random_data() {
    let shape = [16, 12];
    let mut rng = substream(16, 0);
    let f: Vec<f64> = (0..shape.iter().product::<usize>()).map(|_| rand::Rng::random::<f64>(&mut rng) - 0.3).collect();
    let out = fft_riesz_oracle(&f, &shape).unwrap();
    let energy = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let centered: Vec<f64> = f.iter().map(|v| v - out.removed_mean).collect();
    let total: f64 = out.components.iter().map(|c| energy(c)).sum();
    assert!(total <= energy(&centered) * (1.0 + 1e-12));
    assert!(total > 0.5 * energy(&centered));
}
