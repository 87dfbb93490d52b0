use std::sync::Arc;

use capa_core::baselines::*;
use capa_core::em::geometry::{angle_between, wave_vector};
use capa_core::em::*;
use capa_core::music::DoaOptions;
use capa_core::presets::{reference_aperture, reference_scene, reference_targets};
use capa_core::Error;

fn gl_grid(k: usize) -> Arc<NodeGrid> {
    Arc::new(build_node_grid(&reference_aperture(), &gauss_legendre_rule(k).unwrap()))
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    angle_between(wave_vector(a.0, a.1).as_vec(), wave_vector(b.0, b.1).as_vec())
}

fn nearest(found: &[(f64, f64)], truth: (f64, f64)) -> f64 {
    found.iter().map(|f| dist(*f, truth)).fold(f64::INFINITY, f64::min)
}

fn tight() -> DoaOptions {
    DoaOptions { refine_tol: 1e-10, max_evals: 800, ..DoaOptions::default() }
}

#[test]
fn reference_array_has_forty_by_forty_elements() {
    let ap = reference_aperture();
    let cfg = SpdaConfig::for_aperture(&ap);
    assert_eq!((cfg.nx, cfg.ny, cfg.elements()), (40, 40, 1600));
    assert_eq!(cfg.spacing, 0.05);
    let (xs, ys) = cfg.positions(&ap);
    assert_eq!(xs[0], -1.0);
    assert!((xs[39] - 0.95).abs() < 1e-12);
    assert!(xs.iter().chain(&ys).all(|v| v.abs() <= 1.0));
    assert!((cfg.effective_area - 0.01 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
}

#[test]
fn spda_field_uses_x_channel_only() {
    let scene = reference_scene(1e-3, 3, 4).unwrap();
    let f = spda_field(&scene, &scene_snapshots(&scene)).unwrap();
    assert_eq!(f.nodes(), 1600);
    assert!(f.axis(0).norm() > 0.0);
    assert_eq!(f.axis(1).norm(), 0.0);
    assert_eq!(f.axis(2).norm(), 0.0);
}

#[test]
fn spda_noiseless_finds_both_targets() {
    let scene = reference_scene(0.0, 64, 1).unwrap();
    let est = spda_music(&scene, &scene_snapshots(&scene), &DoaOptions::default()).unwrap();
    let found = est.angles();
    for t in scene.doas() {
        assert!(nearest(&found, t) < 1e-2, "{t:?} vs {found:?}");
    }
}

#[test]
fn singlepol_noiseless_finds_both_targets() {
    let scene = reference_scene(0.0, 64, 1).unwrap();
    let field = synthesize_field(&scene, &gl_grid(16), &scene_snapshots(&scene)).unwrap();
    let found = singlepol_music(&field, 2, &tight()).unwrap().angles();
    for t in scene.doas() {
        assert!(nearest(&found, t) < 1e-3, "{t:?} vs {found:?}");
    }
}

#[test]
fn singlepol_misses_target_without_x_polarization() {
    let mut targets = reference_targets();
    let z = targets[1].direction();
    // q in the plane spanned by z and x̂ × z has v_x = 0
    let q = UnitVec3::new(0.0, z.z, -z.y).unwrap();
    targets[1] = targets[1].with_attitude(q);
    assert!(targets[1].polarization().x.abs() < 1e-12);
    let scene = Scene::new(reference_aperture(), targets, 1e-3, 500, 8).unwrap();
    let field = synthesize_field(&scene, &gl_grid(16), &scene_snapshots(&scene)).unwrap();
    let doas = scene.doas();
    let found = singlepol_music(&field, 2, &DoaOptions::default()).unwrap().angles();
    assert!(nearest(&found, doas[0]) < 1e-2, "{found:?}");
    assert!(nearest(&found, doas[1]) > 3f64.to_radians(), "{found:?}");
    // the tri-polarized spectrum shows both well above its median
    let opts = DoaOptions { min_peak_ratio: Some(10.0), ..DoaOptions::default() };
    let tri = capa_core::music::estimate_doa(&field, 2, &opts).unwrap().angles();
    for t in doas {
        assert!(nearest(&tri, t) < 1e-2, "{tri:?}");
    }
}

fn crlb_setup(sigma2: f64, t: usize) -> (Scene, Arc<NodeGrid>, SnapshotSeries) {
    let scene = reference_scene(sigma2, t, 17).unwrap();
    let ss = scene_snapshots(&scene);
    (scene, gl_grid(16), ss)
}

#[test]
fn crlb_reports_named_nonnegative_bounds() {
    let (scene, grid, ss) = crlb_setup(1e-4, 50);
    let r = crlb(&scene, &grid, &ss).unwrap();
    assert_eq!(r.names[..4], ["theta_1", "phi_1", "att_a_1", "att_b_1"]);
    assert_eq!(r.names.len(), 8);
    assert!(r.bounds.iter().all(|b| *b > 0.0));
    assert_eq!(r.bound("phi_2"), Some(r.phi(1)));
    let json = r.to_json_value();
    assert!(json["bounds"]["theta_1"].as_f64().unwrap() > 0.0);
    assert!(json["bounds"]["qz_2"].as_f64().is_some());
}

#[test]
fn crlb_halves_when_snapshots_repeat() {
    let (scene, grid, ss) = crlb_setup(1e-4, 20);
    let one = crlb(&scene, &grid, &ss).unwrap();
    let mut scene2 = scene.clone();
    scene2.snapshots = 40;
    let two = crlb(&scene2, &grid, &ss.repeated(2)).unwrap();
    for (a, b) in one.bounds.iter().zip(&two.bounds) {
        assert!((b / a - 0.5).abs() < 0.02 * 0.5, "{a} {b}");
    }
}

#[test]
fn crlb_scales_with_noise_power() {
    let (scene, grid, ss) = crlb_setup(1e-4, 20);
    let one = crlb(&scene, &grid, &ss).unwrap();
    let mut loud = scene.clone();
    loud.noise_power = 1e-3;
    let ten = crlb(&loud, &grid, &ss).unwrap();
    for (a, b) in one.bounds.iter().zip(&ten.bounds) {
        assert!((b / a - 10.0).abs() < 0.02 * 10.0);
    }
}

#[test]
fn fim_is_symmetric() {
    let (scene, grid, ss) = crlb_setup(1e-4, 20);
    let j = capa_core::baselines::crlb::fisher_information(&scene, &grid, &ss).unwrap();
    for a in 0..8 {
        for b in 0..8 {
            assert!((j[(a, b)] - j[(b, a)]).abs() <= 1e-6 * (j[(a, a)] * j[(b, b)]).sqrt());
        }
    }
}

/// Closed-form derivatives of a(r) v with respect to θ and φ.
#[test]
fn fim_angle_block_matches_analytic_derivatives() {
    let target = reference_targets()[0].clone();
    let scene = Scene::new(reference_aperture(), vec![target.clone()], 1e-4, 10, 3).unwrap();
    let ss = scene_snapshots(&scene);
    let grid = gl_grid(16);
    let j = capa_core::baselines::crlb::fisher_information(&scene, &grid, &ss).unwrap();

    let (th, ph) = target.doa();
    let d = wave_vector(th, ph);
    let dd = [
        nalgebra::Vector3::new(-th.sin() * ph.cos(), th.cos() * ph.cos(), 0.0),
        nalgebra::Vector3::new(-th.cos() * ph.sin(), -th.sin() * ph.sin(), ph.cos()),
    ];
    let q = target.attitude().as_vec();
    let v = q - d.as_vec() * d.as_vec().dot(q);
    let k = scene.wavenumber();
    let grads: Vec<Vec<C64>> = dd
        .iter()
        .map(|de| {
            let dv = -(de * d.as_vec().dot(q) + d.as_vec() * de.dot(q));
            let mut g = Vec::new();
            for p in 0..3 {
                for n in 0..grid.len() {
                    let r = grid.position(n);
                    let a = C64::from_polar(1.0, -k * r.dot(d.as_vec()));
                    g.push(a * (C64::new(0.0, -k * r.dot(de)) * v[p] + dv[p]));
                }
            }
            g
        })
        .collect();
    let energy: f64 = ss.signals.iter().map(|s| s.norm_sqr()).sum();
    let w: Vec<f64> = (0..3).flat_map(|_| grid.area_weights()).collect();
    for a in 0..2 {
        for b in 0..2 {
            let g: C64 = grads[a].iter().zip(&grads[b]).zip(&w).map(|((x, y), w)| x.conj() * y * (w / scene.noise_power)).sum();
            let want = 2.0 * energy * g.re;
            assert!((j[(a, b)] - want).abs() < 1e-5 * (j[(a, a)] * j[(b, b)]).sqrt(), "{a}{b}: {} vs {want}", j[(a, b)]);
        }
    }
}

#[test]
fn attitude_along_propagation_gives_singular_fim() {
    let base = reference_targets()[0].clone();
    let t = base.with_attitude(base.direction());
    let scene = Scene::new(reference_aperture(), vec![t], 1e-4, 10, 3).unwrap();
    let ss = scene_snapshots(&scene);
    match crlb(&scene, &gl_grid(12), &ss) {
        Err(Error::SingularFim { directions }) => assert_eq!(directions.len(), 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn crlb_needs_noise() {
    let (mut scene, grid, ss) = crlb_setup(1e-4, 5);
    scene.noise_power = 0.0;
    assert!(crlb(&scene, &grid, &ss).is_err());
}
