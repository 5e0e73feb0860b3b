//! One test per acceptance criterion. Each writes a single PASS/FAIL line with
//! its runtime; a lock keeps them sequential so timings are not shared.

use std::io::Write;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use afif4::convnet::{accuracy, gradient_check, gradient_check_params, kink_margin, train, NetworkSpec, NetworkState, TrainConfig};
use afif4::datagen::{augment_10x, AugmentConfig};
use afif4::foggy::{solve_membrane, FogRegion, MembraneSolveConfig, SolveMethod};
use afif4::fusion::{enumerate_combinations, predict_adaboost, round_weight, train_adaboost, FeatureLabel, ScoreSet};
use afif4::harness::synth::{write_synthetic_dataset, SynthConfig};
use afif4::harness::{
    detection_metrics, f_measure, make_folds, make_folds_for_labels, make_splits, render_csv, render_markdown, run_evaluation,
    run_training, DetectionCounts, FoldResult, PipelineConfig, RunReport,
};
use afif4::illum::{build_surround, convolve_field, min_radius, ssr_enhance, ssr_response};
use afif4::imagecore::{horizontal_flip, mean_intensity, resize, Field, Gender, ImageBuffer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

// straight to the stderr handle so the line shows even when output is captured
fn report_line(line: String) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn criterion(name: &str, budget_secs: u64, body: impl FnOnce() -> String) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_secs);
    match outcome {
        Ok(detail) if elapsed <= budget => {
            report_line(format!("PASS  {name}  [{:.2}s / {budget_secs}s]  {detail}", elapsed.as_secs_f64()));
        }
        Ok(detail) => {
            report_line(format!("FAIL  {name}  [{:.2}s / {budget_secs}s]  over time budget; {detail}", elapsed.as_secs_f64()));
            panic!("{name}: {:.2}s exceeds {budget_secs}s", elapsed.as_secs_f64());
        }
        Err(e) => {
            report_line(format!("FAIL  {name}  [{:.2}s / {budget_secs}s]", elapsed.as_secs_f64()));
            resume_unwind(e);
        }
    }
}

#[test]
fn detection_f_measure() {
    criterion("detection F-measure", 1, || {
        // integer counts reproducing the recall/precision pairs exactly
        let sof = detection_metrics(&DetectionCounts { true_positives: 7161, false_positives: 539, false_negatives: 589 }).unwrap();
        let fddb = detection_metrics(&DetectionCounts {
            true_positives: 7799 * 9707,
            false_positives: 7799 * 10_000 - 7799 * 9707,
            false_negatives: 9707 * 10_000 - 7799 * 9707,
        })
        .unwrap();
        assert!((sof.recall - 92.40).abs() < 1e-9 && (sof.precision - 93.00).abs() < 1e-9);
        assert!((fddb.recall - 77.99).abs() < 1e-9 && (fddb.precision - 97.07).abs() < 1e-9);
        assert!((sof.f_measure - 92.70).abs() <= 0.05, "{}", sof.f_measure);
        assert!((fddb.f_measure - 86.49).abs() <= 0.05, "{}", fddb.f_measure);
        assert!((f_measure(92.40, 93.00) - 92.70).abs() <= 0.05);
        assert!((f_measure(77.99, 97.07) - 86.49).abs() <= 0.05);
        format!("F = {:.4} and {:.4}", sof.f_measure, fddb.f_measure)
    });
}

#[test]
fn combination_count() {
    criterion("combination count", 1, || {
        let combos = enumerate_combinations(&FeatureLabel::LOCAL).unwrap();
        assert_eq!(combos.len(), 15);
        let set = ScoreSet::from_signed([-0.77, 0.6, 0.7, 0.8, 0.9]).unwrap();
        assert!(combos.iter().all(|c| c.vector(&set)[0] == -0.77));
        for n in 1..=10usize {
            let items: Vec<usize> = (0..n).collect();
            let mut got: Vec<Vec<usize>> = enumerate_combinations(&items).unwrap().into_iter().map(|c| c.subset).collect();
            let mut brute: Vec<Vec<usize>> = (1u32..1 << n)
                .map(|mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
                .collect();
            got.sort();
            brute.sort();
            assert_eq!(got, brute, "n = {n}");
        }
        "15 vectors, brute force n <= 10 agrees".into()
    });
}

const SIZE: usize = 16;

fn random_region(rng: &mut impl Rng) -> FogRegion {
    let (w, h) = (rng.random_range(1..=12usize), rng.random_range(1..=12usize));
    let (x0, y0) = (rng.random_range(1..=SIZE - 1 - w), rng.random_range(1..=SIZE - 1 - h));
    let mut mask = vec![false; SIZE * SIZE];
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            mask[y * SIZE + x] = rng.random_bool(0.85);
        }
    }
    mask[(y0 + h / 2) * SIZE + x0 + w / 2] = true;
    FogRegion::from_mask(SIZE, SIZE, &mask)
}

fn max_diff(a: &ImageBuffer<f64>, b: &ImageBuffer<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn poisson_membrane() {
    criterion("poisson membrane", 10, || {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let solve = |img: &ImageBuffer<f64>, region: &FogRegion, method, tolerance| {
            solve_membrane(img, region, &MembraneSolveConfig { method, tolerance, max_iterations: 200_000 }).unwrap()
        };
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let region = random_region(&mut rng);
            let img = ImageBuffer::new(SIZE, SIZE, 3, (0..SIZE * SIZE * 3).map(|_| rng.random()).collect()).unwrap();
            let dense = solve(&img, &region, SolveMethod::DirectDense, 1e-12);
            for method in [SolveMethod::ConjugateGradient, SolveMethod::GaussSeidel] {
                let it = solve(&img, &region, method, 1e-9);
                worst = worst.max(max_diff(&it, &dense));
                for c in 0..3 {
                    let ring: Vec<f64> = region.boundary().iter().map(|&(x, y)| img.get(x, y, c)).collect();
                    let lo = ring.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = ring.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    assert!(region.interior().iter().all(|&(x, y)| (lo - 1e-9..=hi + 1e-9).contains(&it.get(x, y, c))));
                }
            }
            let (a, b) = (rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03));
            let ramp = ImageBuffer::from_fn(SIZE, SIZE, 1, |x, y, _| 0.5 + a * (x as f64 - 7.5) + b * (y as f64 - 7.5)).unwrap();
            let flat = ImageBuffer::filled(SIZE, SIZE, 1, rng.random()).unwrap();
            for method in [SolveMethod::ConjugateGradient, SolveMethod::GaussSeidel, SolveMethod::DirectDense] {
                assert!(max_diff(&solve(&ramp, &region, method, 1e-10), &ramp) <= 1e-6);
                assert!(max_diff(&solve(&flat, &region, method, 1e-10), &flat) <= 1e-6);
            }
        }
        assert!(worst <= 1e-6, "{worst}");
        format!("max iterative vs dense {worst:.2e}")
    });
}

#[test]
fn retinex_properties() {
    criterion("SSR properties", 5, || {
        let s = build_surround(3.0, min_radius(3.0)).unwrap();
        for c in [0.0, 0.2, 0.73, 1.0] {
            let flat = ImageBuffer::filled(20, 14, 3, c).unwrap();
            assert!(ssr_enhance(&flat, &s, 1.0 / 255.0).unwrap().data().iter().all(|&v| v == 0.5));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut worst_scale: f64 = 0.0;
        for _ in 0..20 {
            let f = Field::<f64>::new(16, 16, 3, (0..16 * 16 * 3).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap();
            let k = rng.random_range(0.1..10.0);
            let a = ssr_response(&f, &s, 1e-12).unwrap();
            let b = ssr_response(&f.map(|v| v * k), &s, 1e-12).unwrap();
            worst_scale = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(worst_scale, f64::max);
        }
        assert!(worst_scale <= 1e-6, "{worst_scale}");
        let field = Field::new(16, 16, 3, (0..16 * 16 * 3).map(|_| rng.random()).collect()).unwrap();
        let mut worst_conv: f64 = 0.0;
        for g in [0.8, 2.0, 5.0] {
            let s = build_surround(g, min_radius(g) + 1).unwrap();
            let fast = convolve_field(&field, &s);
            let r = s.radius() as isize;
            for c in 0..3 {
                for y in 0..16isize {
                    for x in 0..16isize {
                        let mut acc = 0.0;
                        for dy in -r..=r {
                            for dx in -r..=r {
                                let sx = (x + dx).clamp(0, 15) as usize;
                                let sy = (y + dy).clamp(0, 15) as usize;
                                acc += s.weight(dx, dy) * field.get(sx, sy, c);
                            }
                        }
                        worst_conv = worst_conv.max((acc - fast.get(x as usize, y as usize, c)).abs());
                    }
                }
            }
        }
        assert!(worst_conv <= 1e-9, "{worst_conv}");
        format!("scale invariance {worst_scale:.1e}, convolution {worst_conv:.1e}")
    });
}

fn random_image(size: usize, ch: usize, seed: u64) -> ImageBuffer<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageBuffer::new(size, size, ch, (0..size * size * ch).map(|_| rng.random::<f64>()).collect()).unwrap()
}

#[test]
fn gradient_checks() {
    criterion("gradient checks", 30, || {
        // the tiny preset at its real input size, every parameter probed in
        // chunks; the input is the first seed whose forward pass keeps every
        // ReLU input at least 10 eps from zero, so no probe straddles a kink
        let eps = 1e-5;
        let mut net = NetworkState::<f64>::random(NetworkSpec::afif4_tiny(), 1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in net.params_mut() {
            *p += rng.random_range(-0.01..0.01);
        }
        let (input_seed, input) = (0u64..)
            .map(|s| (s, random_image(32, 3, s)))
            .find(|(_, img)| kink_margin(&net, img).unwrap() >= 10.0 * eps)
            .unwrap();
        let all: Vec<usize> = (0..net.parameter_count()).collect();
        let mut tiny_worst: f64 = 0.0;
        for chunk in all.chunks(10_000) {
            let r = gradient_check_params(&net, &input, Gender::Female, eps, chunk).unwrap();
            tiny_worst = tiny_worst.max(r.max_relative_error);
        }
        let fc: NetworkSpec = "in=6x6x1 fc=12 relu fc=8 relu fc=2 softmax".parse().unwrap();
        let fc_err = gradient_check(&fc, &random_image(6, 1, 6), Gender::Male, 1e-4).unwrap();
        assert!(tiny_worst < 1e-3, "tiny preset {tiny_worst}");
        assert!(fc_err < 1e-5, "fully connected {fc_err}");
        format!("tiny preset ({} params, input seed {input_seed}) {tiny_worst:.2e}, fully connected {fc_err:.2e}", all.len())
    });
}

fn bar_task(n: usize, seed: u64) -> Vec<(ImageBuffer<f64>, Gender)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { Gender::Male } else { Gender::Female };
            let pos = rng.random_range(3..13usize);
            let small = ImageBuffer::from_fn(16, 16, 3, |x, y, _| {
                let t = if label == Gender::Male { y } else { x };
                if t.abs_diff(pos) <= 1 { 0.9 } else { 0.1 }
            })
            .unwrap();
            (resize(&small, 32, 32).unwrap(), label)
        })
        .collect()
}

#[test]
fn learnability() {
    criterion("learnability", 120, || {
        let data = bar_task(64, 1);
        let net = NetworkState::<f64>::random(NetworkSpec::afif4_tiny(), 1.0, 1).unwrap();
        let cfg = TrainConfig { iterations: 1000, seed: 1, ..TrainConfig::default() };
        let trained = train(&net, &data, &cfg).unwrap();
        let acc = 100.0 * accuracy(&trained, &data).unwrap();
        assert!(acc > 95.0, "{acc}");
        format!("training accuracy {acc:.2}% after 1000 iterations")
    });
}

#[test]
fn adaboost() {
    criterion("adaboost", 10, || {
        assert!((round_weight(0.25f64) - 0.5 * 3f64.ln()).abs() < 1e-12);
        let mut tightest = f64::INFINITY;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(30..150);
            let d = rng.random_range(1..6);
            let vectors: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let mut labels: Vec<Gender> = vectors
                .iter()
                .map(|v| if v[0] + rng.random_range(-0.8..0.8) > 0.0 { Gender::Male } else { Gender::Female })
                .collect();
            labels[0] = Gender::Male;
            labels[1] = Gender::Female;
            let ens = train_adaboost(&vectors, &labels, rng.random_range(1..40)).unwrap();
            let wrong = vectors.iter().zip(&labels).filter(|(v, l)| predict_adaboost(&ens, v).unwrap() != **l).count();
            let err = wrong as f64 / n as f64;
            let bound = ens.error_bound();
            assert!(err <= bound, "seed {seed}: {err} > {bound}");
            tightest = tightest.min(bound - err);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let xs: Vec<f64> = (0..80).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vectors: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let labels: Vec<Gender> = xs.iter().map(|&x| if x > 0.1 { Gender::Male } else { Gender::Female }).collect();
        let ens = train_adaboost(&vectors, &labels, 1).unwrap();
        assert!(vectors.iter().zip(&labels).all(|(v, l)| predict_adaboost(&ens, v).unwrap() == *l));
        format!("bound holds on 20 datasets (min slack {tightest:.3}), separable case exact")
    });
}

#[test]
fn augmentation() {
    criterion("augmentation", 1, || {
        let img = random_image(24, 3, 12);
        let s = 5;
        let out = augment_10x(&img, &AugmentConfig { shift: s }).unwrap();
        assert_eq!(out.len(), 10);
        let mean = mean_intensity(&img);
        let (w, h) = (24, 24);
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    assert_eq!(out[0].get(x, y, c), img.get(x, y, c));
                    // up, down, left, right: content moved, vacated band holds the mean
                    let up = if y + s < h { img.get(x, y + s, c) } else { mean[c] };
                    let down = if y >= s { img.get(x, y - s, c) } else { mean[c] };
                    let left = if x + s < w { img.get(x + s, y, c) } else { mean[c] };
                    let right = if x >= s { img.get(x - s, y, c) } else { mean[c] };
                    assert_eq!(out[1].get(x, y, c).to_bits(), up.to_bits());
                    assert_eq!(out[2].get(x, y, c).to_bits(), down.to_bits());
                    assert_eq!(out[3].get(x, y, c).to_bits(), left.to_bits());
                    assert_eq!(out[4].get(x, y, c).to_bits(), right.to_bits());
                }
            }
        }
        for i in 0..5 {
            assert_eq!(out[i + 5], horizontal_flip(&out[i]));
        }
        "10 outputs, order, mean bands and flips exact".into()
    });
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// Five folds through run_training/run_evaluation; returns the rendered
/// reports and the bytes of every saved bundle.
fn five_fold_run(root: &Path) -> (RunReport, Vec<String>, Vec<Vec<(String, Vec<u8>)>>) {
    let data = root.join("data");
    let manifest = write_synthetic_dataset(&data, "synth", &SynthConfig { count: 400, seed: 2, ..SynthConfig::default() }).unwrap();
    let mut cfg = PipelineConfig::tiny();
    cfg.seed = 7;
    let plan = make_folds(&manifest, 5, cfg.seed).unwrap();
    let mut folds = Vec::new();
    let mut bundles = Vec::new();
    for fold in 0..5 {
        let bundle = run_training(&manifest, &plan, fold, &cfg).unwrap();
        let dir = root.join(format!("bundle{fold}"));
        bundle.save(&dir).unwrap();
        bundles.push(dir_bytes(&dir));
        let acc = run_evaluation(&bundle, &manifest, &plan, fold).unwrap();
        folds.push(FoldResult { fold, train_samples: plan.train_indices(fold).len(), test_samples: plan.test_indices(fold).len(), accuracy: acc });
    }
    let report = RunReport::new(&manifest.name, &cfg, folds);
    let rendered = vec![render_csv(&report).unwrap(), render_markdown(&report), report.to_json().unwrap()];
    (report, rendered, bundles)
}

#[test]
fn end_to_end_synthetic_pipeline() {
    criterion("end-to-end synthetic pipeline", 600, || {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (report, rendered_a, bundles_a) = five_fold_run(a.path());
        let (_, rendered_b, bundles_b) = five_fold_run(b.path());
        let mean = report.mean_accuracy.unwrap();
        let per_fold: Vec<String> = report.folds.iter().map(|f| format!("{:.2}", f.accuracy)).collect();
        assert!(mean >= 90.0, "mean {mean}");
        assert_eq!(rendered_a, rendered_b, "reports differ between runs");
        assert!(bundles_a == bundles_b, "bundles differ between runs");
        format!("mean {mean:.2}% (folds {}), reports and bundles byte-identical", per_fold.join(" "))
    });
}

#[test]
fn fold_and_split_protocol() {
    criterion("fold/split protocol", 5, || {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut sizes: Vec<usize> = vec![8, 9, 10, 29, 10_000];
        sizes.extend((0..60).map(|_| rng.random_range(8..=10_000)));
        for &n in &sizes {
            let labels: Vec<Gender> = (0..n)
                .map(|i| if i < 2 || (i >= 4 && rng.random_bool(0.6)) { Gender::Male } else { Gender::Female })
                .collect();
            let minority = labels.iter().filter(|&&l| l == Gender::Male).count().min(labels.iter().filter(|&&l| l == Gender::Female).count());
            let k = minority.min(5);
            if k >= 2 {
                let plan = make_folds_for_labels(&labels, k, rng.random()).unwrap();
                let mut seen = vec![false; n];
                for f in 0..k {
                    let test = plan.test_indices(f);
                    let males = test.iter().filter(|&&i| labels[i] == Gender::Male).count();
                    assert_eq!(2 * males, test.len(), "n = {n} fold {f}");
                    for &i in &test {
                        assert!(!seen[i]);
                        seen[i] = true;
                    }
                }
                assert_eq!(seen.iter().filter(|&&s| s).count(), 2 * minority);
                assert!(plan.discarded.iter().all(|&i| !seen[i]));
            }
            let samples: Vec<usize> = (0..n).collect();
            let split = make_splits(&samples, rng.random()).unwrap();
            let mut all: Vec<usize> = split.cnn.iter().chain(&split.adaboost).chain(&split.fusion).copied().collect();
            all.sort_unstable();
            assert_eq!(all, samples);
            for (part, frac) in [(&split.cnn, 0.75), (&split.adaboost, 0.15), (&split.fusion, 0.10)] {
                assert!((part.len() as f64 - frac * n as f64).abs() <= 1.0, "n = {n}: {} vs {}", part.len(), frac * n as f64);
            }
        }
        format!("{} randomized sizes in 8..=10000", sizes.len())
    });
}
