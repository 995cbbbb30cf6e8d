//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each, and
//! exits non-zero if any failed.

use std::collections::HashMap;
use std::hint::black_box;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volumecast_core::eval::{evaluate, sweep_bin_sizes};
use volumecast_core::geometry::{
    fit_enclosing_ellipsoid, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE,
};
use volumecast_core::model::{
    bin_id, extract_training_pairs, load_model, save_model, train, BinEntry,
};
use volumecast_core::prefetch::{simulate_prefetch, tiles_intersecting, TileGrid};
use volumecast_core::traces::{generate_synthetic_trace, ProfileKind, SynthProfile};
use volumecast_core::{
    BinId, BinSizes, Ellipsoid, ModelConfig, ModelError, Trace, TrainedModel, Vec3,
};

/// Seeds of the frozen seated corpus: eight training and two test traces.
const CORPUS_TRAIN_SEEDS: [u64; 8] = [101, 102, 103, 104, 105, 106, 107, 108];
const CORPUS_TEST_SEEDS: [u64; 2] = [109, 110];
const CORPUS_SECONDS: f64 = 1500.0;
const SWEEP_SIZES: [f64; 5] = [0.001, 0.002, 0.004, 0.008, 0.016];

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(cond: bool, detail: String) -> Verdict {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn synth(kind: ProfileKind, secs: f64, seed: u64) -> Trace {
    generate_synthetic_trace(&SynthProfile::new(kind, secs, 90.0, seed))
}

fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let q = Vector4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    UnitQuaternion::from_quaternion(Quaternion::from(q))
        .to_rotation_matrix()
        .into_inner()
}

fn random_point_set(rng: &mut impl Rng, case: usize) -> Vec<Vec3> {
    let n = rng.gen_range(1..=200);
    let mut coord = || rng.gen_range(-0.5..0.5);
    match case % 4 {
        // Collinear.
        0 => {
            let (o, d) = (
                Vec3::new(coord(), coord(), coord()),
                Vec3::new(coord(), coord(), coord() + 0.7),
            );
            (0..n).map(|_| o + d * coord()).collect()
        }
        // Coplanar, tilted.
        1 => (0..n)
            .map(|_| {
                let (s, t) = (coord(), coord());
                Vec3::new(s, 0.3 * s - 0.2 * t + 1.0, t)
            })
            .collect(),
        _ => (0..n)
            .map(|_| Vec3::new(coord(), coord(), coord()))
            .collect(),
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tol = DEFAULT_TOLERANCE;
    let mut outside = 0usize;
    let mut total = 0usize;
    for case in 0..1200 {
        let pts = random_point_set(&mut rng, case);
        let (e, _) = fit_enclosing_ellipsoid(&pts, tol, DEFAULT_MAX_ITERATIONS)
            .map_err(|e| e.to_string())?;
        total += pts.len();
        outside += pts
            .iter()
            .filter(|p| !e.contains(p, 10.0 * tol).unwrap())
            .count();
    }
    let mut corners = Vec::new();
    for i in 0..8 {
        corners.push(Vec3::new(
            (i & 1) as f64,
            ((i >> 1) & 1) as f64,
            ((i >> 2) & 1) as f64,
        ));
    }
    let (cube, _) = fit_enclosing_ellipsoid(&corners, tol, DEFAULT_MAX_ITERATIONS)
        .map_err(|e| e.to_string())?;
    let radius_err = cube
        .semi_axes()
        .iter()
        .map(|a| (a - 3f64.sqrt() / 2.0).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    check(
        outside == 0 && radius_err <= 1e-4 && elapsed < Duration::from_secs(30),
        format!("1200 sets, {outside}/{total} points outside, cube radius error {radius_err:.2e}, {elapsed:.1?}"),
    )
}

/// Volumes of random ellipsoids scaled to just enclose `pts`.
fn oracle_min_volume(pts: &[Vec3], samples: usize, rng: &mut impl Rng) -> f64 {
    let n = pts.len() as f64;
    let mean = pts.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cov = pts.iter().fold(Matrix3::zeros(), |a, p| {
        a + (p - mean) * (p - mean).transpose()
    }) / n;
    let eig = cov.symmetric_eigen();
    let scale = eig.eigenvalues.max().sqrt();
    let mut best = f64::INFINITY;
    for i in 0..samples {
        let (center, rot, axes) = if i % 2 == 0 {
            let stretch = Vec3::from_fn(|_, _| rng.gen_range(0.5..2.0));
            let wobble = nalgebra::Rotation3::from_euler_angles(
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
            );
            let jitter = Vec3::from_fn(|_, _| rng.gen_range(-0.3..0.3) * scale);
            (
                mean + jitter,
                eig.eigenvectors * wobble.into_inner(),
                eig.eigenvalues
                    .map(|l| l.max(1e-12).sqrt())
                    .component_mul(&stretch),
            )
        } else {
            let jitter = Vec3::from_fn(|_, _| rng.gen_range(-0.5..0.5) * scale);
            let axes = Vec3::from_fn(|_, _| scale * 10f64.powf(rng.gen_range(-1.0..1.0)));
            (mean + jitter, random_rotation(rng), axes)
        };
        let shape = rot * Matrix3::from_diagonal(&axes.map(|a| 1.0 / (a * a))) * rot.transpose();
        let f_max = pts
            .iter()
            .map(|p| (p - center).dot(&(shape * (p - center))))
            .fold(0.0, f64::max);
        best =
            best.min(4.0 / 3.0 * std::f64::consts::PI / (shape / f_max).determinant().sqrt() * 1e6);
    }
    best
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_ratio = 0.0f64;
    for seed in 0..50u64 {
        let mut prng = ChaCha8Rng::seed_from_u64(seed);
        let rot = random_rotation(&mut prng);
        let axes = Vec3::new(0.05, 0.02, 0.008);
        let pts: Vec<Vec3> = (0..60)
            .map(|_| rot * Vec3::from_fn(|_, _| prng.gen_range(-1.0..1.0)).component_mul(&axes))
            .collect();
        let (e, _) = fit_enclosing_ellipsoid(&pts, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS)
            .map_err(|e| e.to_string())?;
        let oracle = oracle_min_volume(&pts, 10_000, &mut rng);
        worst_ratio = worst_ratio.max(e.volume_cm3() / oracle);
    }
    check(
        worst_ratio <= 1.0,
        format!("50 sets, worst fitted/oracle volume ratio {worst_ratio:.4}"),
    )
}

fn micro_traces() -> Vec<Vec<Vec3>> {
    let v = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
    vec![
        vec![v(0.0, 0.0, 0.0), v(0.001, 0.0, 0.0)],
        vec![v(0.0, 0.0, 0.0), v(0.001, 0.0, 0.0), v(0.003, 0.0, 0.0)],
        vec![v(5.0, 1.0, 2.0); 5],
        vec![v(5.0, 1.0, 2.0); 20],
        (0..15).map(|k| v(-0.0009 * k as f64, 0.0, 0.0)).collect(),
        (0..12)
            .map(|k| v(0.002 * k as f64, 0.0021 * k as f64, -0.0031 * k as f64))
            .collect(),
        (0..13)
            .map(|k| {
                v(
                    (k as f64 * 0.9).sin() * 0.004,
                    1.2,
                    (k as f64 * 0.4).cos() * 0.003,
                )
            })
            .collect(),
        (0..11)
            .map(|k| v(if k % 2 == 0 { 0.0 } else { 0.0025 }, 0.0, 0.0))
            .collect(),
        (0..4).map(|k| v(0.0, -0.0015 * k as f64, 0.0)).collect(),
        (0..30)
            .map(|k| v(0.0001 * (k * k) as f64, 0.0, 0.001 * k as f64))
            .collect(),
    ]
}

fn criterion_3() -> Verdict {
    let cfg = ModelConfig::default();
    for (i, pts) in micro_traces().into_iter().enumerate() {
        let trace = Trace::from_positions(90.0, &pts, "micro").map_err(|e| e.to_string())?;
        let got = extract_training_pairs(&trace, &cfg).map_err(|e| e.to_string())?;
        let mut expected = Vec::new();
        for k in 1..pts.len() {
            for j in 1..=cfg.horizon {
                if k + j < pts.len() {
                    let id = bin_id(&(pts[k] - pts[k - 1]), &cfg.bin_sizes)
                        .map_err(|e| e.to_string())?;
                    expected.push((id, pts[k + j] - pts[k]));
                }
            }
        }
        let n = pts.len();
        let formula: usize = (1..n.saturating_sub(1))
            .map(|k| cfg.horizon.min(n - 1 - k))
            .sum();
        if got != expected || got.len() != formula {
            return Err(format!(
                "micro-trace {i}: {} pairs, oracle {}, formula {formula}",
                got.len(),
                expected.len()
            ));
        }
    }
    Ok("10 micro-traces match the double-loop oracle and the pair-count formula".into())
}

fn criterion_4() -> Verdict {
    let corpus = [
        synth(ProfileKind::Seated, 120.0, 401),
        synth(ProfileKind::Seated, 120.0, 402),
        synth(ProfileKind::Roomscale, 120.0, 403),
    ];
    let model = train(&corpus, &ModelConfig::default()).map_err(|e| e.to_string())?;
    let r = evaluate(&model, &corpus).map_err(|e| e.to_string())?;
    check(
        r.fallback_rate == 0.0 && r.accuracy >= 0.999,
        format!(
            "accuracy {:.5}, fallback_rate {}",
            r.accuracy, r.fallback_rate
        ),
    )
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let seated = |s: &u64| synth(ProfileKind::Seated, CORPUS_SECONDS, *s);
    let train_set: Vec<Trace> = CORPUS_TRAIN_SEEDS.iter().map(seated).collect();
    let test_set: Vec<Trace> = CORPUS_TEST_SEEDS.iter().map(seated).collect();
    let sizes: Vec<BinSizes> = SWEEP_SIZES
        .iter()
        .map(|b| BinSizes::isotropic(*b).unwrap())
        .collect();
    let template = ModelConfig::default();
    let rows =
        sweep_bin_sizes(&train_set, &test_set, &sizes, &template).map_err(|e| e.to_string())?;

    let acc_ok = rows[3].report.accuracy >= 0.95 && rows[4].report.accuracy >= 0.95;
    let chosen = rows.iter().find(|r| r.report.accuracy >= 0.95);
    let (ratio, chosen_size) = match chosen {
        Some(row) => {
            let model = train(&train_set, &template.with_bin_sizes(row.bin_size))
                .map_err(|e| e.to_string())?;
            (
                row.report.mean_volume_cm3 / model.global.ellipsoid.volume_cm3(),
                row.bin_size.bx,
            )
        }
        None => (f64::INFINITY, f64::NAN),
    };
    let volume_ok = ratio <= 1e-3;
    let monotone_ok = rows
        .windows(2)
        .all(|w| w[0].report.mean_volume_cm3 <= 1.1 * w[1].report.mean_volume_cm3);
    let elapsed = start.elapsed();

    let table: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{}:{:.4}/{:.2}cm3",
                r.bin_size, r.report.accuracy, r.report.mean_volume_cm3
            )
        })
        .collect();
    check(
        acc_ok && volume_ok && monotone_ok && elapsed < Duration::from_secs(300),
        format!(
            "(a) {} (b) {} ratio {:.3}% at {chosen_size} (c) {} [{}] {elapsed:.0?}",
            pass_word(acc_ok),
            pass_word(volume_ok),
            100.0 * ratio,
            pass_word(monotone_ok),
            table.join(" ")
        ),
    )
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn dense_model(count: usize) -> TrainedModel {
    let side = (count as f64).cbrt().ceil() as i32;
    let entry = BinEntry {
        ellipsoid: Ellipsoid::ball(Vec3::zeros(), 0.01).unwrap(),
        support: 1,
    };
    let mut bins = HashMap::with_capacity(count);
    'fill: for ix in 0..side {
        for iy in 0..side {
            for iz in 0..side {
                if bins.len() == count {
                    break 'fill;
                }
                bins.insert(BinId { ix, iy, iz }, entry);
            }
        }
    }
    TrainedModel {
        config: ModelConfig::default(),
        bins,
        global: entry,
        meta: None,
    }
}

fn mean_latency(model: &TrainedModel, queries: &[(Vec3, Vec3)]) -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..5 {
        let start = Instant::now();
        for (prev, cur) in queries {
            black_box(model.predict(black_box(prev), black_box(cur)).unwrap());
        }
        best = best.min(start.elapsed());
    }
    best / queries.len() as u32
}

fn criterion_6() -> Verdict {
    let b = ModelConfig::default().bin_sizes.bx;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let queries = |side: i32, rng: &mut ChaCha8Rng| -> Vec<(Vec3, Vec3)> {
        (0..100_000)
            .map(|_| {
                let cell = Vec3::from_fn(|_, _| rng.gen_range(0..side) as f64 + 0.5);
                let prev = Vec3::new(rng.gen_range(-1.0..1.0), 1.5, rng.gen_range(-1.0..1.0));
                (prev, prev + cell * b)
            })
            .collect()
    };
    let small = dense_model(1_000);
    let large = dense_model(100_000);
    // Same queries against both models; every queried bin exists in both.
    let shared = queries(10, &mut rng);
    let t_small = mean_latency(&small, &shared);
    let t_large = mean_latency(&large, &shared);
    let ratio = t_large.as_secs_f64() / t_small.as_secs_f64();
    // Queries spread over all bins of each model, dominated by cache misses.
    let spread = mean_latency(&large, &queries(46, &mut rng)).as_secs_f64()
        / mean_latency(&small, &queries(10, &mut rng)).as_secs_f64();
    check(
        ratio <= 3.0,
        format!("{t_small:.0?} vs {t_large:.0?} per query, ratio {ratio:.2} (spread over all bins: {spread:.2})"),
    )
}

fn saved(m: &TrainedModel) -> Vec<u8> {
    let mut buf = Vec::new();
    save_model(m, &mut buf).unwrap();
    buf
}

fn criterion_7() -> Verdict {
    for seed in 0..20u64 {
        let kind = if seed % 2 == 0 {
            ProfileKind::Seated
        } else {
            ProfileKind::Roomscale
        };
        let b = [0.001, 0.002, 0.004, 0.008][seed as usize % 4];
        let cfg = ModelConfig::default().with_bin_sizes(BinSizes::new(b, b / 2.0, b).unwrap());
        let m = train(&[synth(kind, 20.0, 700 + seed)], &cfg).map_err(|e| e.to_string())?;
        let first = saved(&m);
        let back = load_model(&first[..]).map_err(|e| e.to_string())?;
        if saved(&back) != first || back.bins != m.bins || back.global != m.global {
            return Err(format!("seed {seed}: round trip differs"));
        }
    }
    let text = String::from_utf8(saved(
        &train(
            &[synth(ProfileKind::Seated, 5.0, 1)],
            &ModelConfig::default(),
        )
        .unwrap(),
    ))
    .unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let truncated: String = lines[..lines.len() - 1]
        .iter()
        .map(|l| format!("{l}\n"))
        .collect();
    let cases = [
        (
            load_model(truncated.as_bytes()),
            ModelError::CorruptModel(lines.len()),
        ),
        (
            load_model(text.replacen("BEMODEL 1", "BEMODEL 99", 1).as_bytes()),
            ModelError::UnsupportedVersion(99),
        ),
        (
            load_model(text.replacen("rate 90", "rate x", 1).as_bytes()),
            ModelError::CorruptModel(4),
        ),
        (
            load_model(&text.as_bytes()[..text.len() / 3]),
            ModelError::CorruptModel(0),
        ),
    ];
    for (i, (got, want)) in cases.iter().enumerate() {
        let ok = match (got, want) {
            (Err(ModelError::CorruptModel(_)), ModelError::CorruptModel(0)) => true,
            (Err(g), w) => g == w,
            _ => false,
        };
        if !ok {
            return Err(format!("corrupt case {i}: got {got:?}, want {want:?}"));
        }
    }
    Ok("20 seeded models round-trip byte-identically; 4 corrupt inputs rejected".into())
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..10_000 {
        let center = Vec3::from_fn(|_, _| rng.gen_range(-3.0..3.0));
        let axes = Vec3::from_fn(|_, _| 10f64.powf(rng.gen_range(-3.0..-0.5)));
        let e = Ellipsoid::from_axes(center, &Matrix3::identity(), axes).unwrap();
        let dir = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let p = center + dir.normalize().component_mul(&axes) * rng.gen_range(0.0f64..=1.0).cbrt();
        if !e.contains(&p, 0.0).unwrap() {
            continue;
        }
        let origin = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let grid = TileGrid::new(rng.gen_range(0.01..1.0), origin).unwrap();
        let tiles = tiles_intersecting(&e, &grid).map_err(|e| e.to_string())?;
        if tiles.binary_search(&grid.tile_of(&p)).is_err() {
            return Err(format!("triple {i}: tile of inside point missing"));
        }
    }
    let mut pairs = Vec::new();
    for (i, tile) in [0.01, 0.03, 0.1, 0.3, 1.0].into_iter().enumerate() {
        let seed = 800 + i as u64;
        let kind = if i % 2 == 0 {
            ProfileKind::Seated
        } else {
            ProfileKind::Roomscale
        };
        let m = train(&[synth(kind, 60.0, seed)], &ModelConfig::default())
            .map_err(|e| e.to_string())?;
        let test = synth(kind, 30.0, seed + 50);
        let acc = evaluate(&m, std::slice::from_ref(&test))
            .map_err(|e| e.to_string())?
            .accuracy;
        let hit = simulate_prefetch(&m, &test, &TileGrid::new(tile, Vec3::zeros()).unwrap())
            .map_err(|e| e.to_string())?
            .hit_rate;
        if hit < acc {
            return Err(format!("pair {i}: hit_rate {hit} < accuracy {acc}"));
        }
        pairs.push(format!("{hit:.4}>={acc:.4}"));
    }
    Ok(format!(
        "10^4 triples covered; hit_rate vs accuracy {}",
        pairs.join(" ")
    ))
}

fn pipeline(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    let p = |n: &str| dir.join(n).to_str().unwrap().to_string();
    let steps: Vec<Vec<String>> = vec![
        vec![
            "gen",
            "--profile",
            "seated",
            "--duration",
            "60",
            "--seed",
            "11",
            "--out",
            &p("a.csv"),
        ],
        vec![
            "gen",
            "--profile",
            "roomscale",
            "--duration",
            "60",
            "--seed",
            "12",
            "--out",
            &p("b.csv"),
        ],
        vec![
            "gen",
            "--profile",
            "seated",
            "--duration",
            "30",
            "--seed",
            "13",
            "--out",
            &p("c.csv"),
        ],
        vec![
            "train",
            "--trace",
            &p("a.csv"),
            "--trace",
            &p("b.csv"),
            "--out",
            &p("m.bem"),
        ],
        vec![
            "eval",
            "--model",
            &p("m.bem"),
            "--test",
            &p("c.csv"),
            "--out",
            &p("e.csv"),
        ],
        vec![
            "sweep",
            "--train",
            &p("a.csv"),
            "--test",
            &p("c.csv"),
            "--bin-sizes",
            "0.002,0.008",
            "--out",
            &p("s.csv"),
        ],
    ]
    .into_iter()
    .map(|s| s.into_iter().map(String::from).collect())
    .collect();
    for step in steps {
        let mut err = Vec::new();
        let argv = std::iter::once("volumecast".to_string()).chain(step.iter().cloned());
        if volumecast_cli::run(argv, &mut std::io::empty(), &mut Vec::new(), &mut err) != 0 {
            return Err(format!("{step:?}: {}", String::from_utf8_lossy(&err)));
        }
    }
    ["a.csv", "b.csv", "c.csv", "m.bem", "e.csv", "s.csv"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map_err(|e| e.to_string()))
        .collect()
}

fn criterion_9() -> Verdict {
    let (one, two) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(one.path())?;
    let second = pipeline(two.path())?;
    check(
        first == second,
        format!("{} artifacts compared byte for byte", first.len()),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("MVEE correctness", criterion_1),
        ("MVEE minimality", criterion_2),
        ("training pair extraction", criterion_3),
        ("self-evaluation", criterion_4),
        ("bin-size sweep on seated corpus", criterion_5),
        ("constant-time query", criterion_6),
        ("persistence", criterion_7),
        ("prefetch superset", criterion_8),
        ("pipeline determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (word, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} [{word}] {name}: {detail}", i + 1);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
