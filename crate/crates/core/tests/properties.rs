use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use strokepaint::geometry::{sample_parameter, StrokeField, PARAMS_PER_STROKE};
use strokepaint::gradcheck::{random_field, random_image};
use strokepaint::io::{hex_color, load_png, save_png, svg_document, to_rgb8};
use strokepaint::optimize::{adam_step, AdamConfig, AdamState, LatentParams, LearningRates};
use strokepaint::perception::{
    content_loss, extract_features, generate_bank, gram, style_loss, GramMatrix, LossWeights,
};
use strokepaint::render::{render_soft, RenderConfig};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(g: &GramMatrix) -> Vec<f64> {
    let n = g.size;
    let mut a: Vec<f64> = (0..n * n)
        .map(|k| 0.5 * (g.data[k] + g.data[(k % n) * n + k / n]))
        .collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

fn seeded_field(seed: u64, n: usize, h: usize, w: usize) -> StrokeField {
    random_field(&mut ChaCha8Rng::seed_from_u64(seed), n, h, w, 10.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sample_spacing_is_uniform(count in 2usize..200) {
        let step = 1.0 / (count - 1) as f64;
        for s in 0..count - 1 {
            let gap = sample_parameter(s + 1, count) - sample_parameter(s, count);
            prop_assert!((gap - step).abs() <= 4.0 * f64::EPSILON, "gap {gap} vs {step}");
        }
        prop_assert_eq!(sample_parameter(0, count), 0.0);
        prop_assert_eq!(sample_parameter(count - 1, count), 1.0);
    }

    #[test]
    fn render_is_permutation_invariant(seed in any::<u64>(), n in 1usize..14, rotate in 0usize..14) {
        let field = seeded_field(seed, n, 24, 30);
        let mut strokes = field.strokes().to_vec();
        strokes.rotate_left(rotate % n);
        strokes.swap(0, n - 1);
        let permuted = StrokeField::new(strokes, 24, 30).unwrap();
        // K >= N keeps candidate sets identical; only summation order changes
        let config = RenderConfig { knn: 16, ..RenderConfig::default() };
        let a = render_soft(&field, &config).unwrap().0;
        let b = render_soft(&permuted, &config).unwrap().0;
        prop_assert!(a.max_abs_diff(&b) < 1e-9);
    }

    #[test]
    fn render_output_in_unit_range(seed in any::<u64>(), n in 0usize..30, knn in 1usize..8, sharp in 0.1f64..1e4) {
        let field = seeded_field(seed, n, 20, 20);
        let config = RenderConfig { knn, tile_size: 5, ..RenderConfig::default() }.sharpened(sharp / 5.0);
        let (img, _) = render_soft(&field, &config).unwrap();
        prop_assert!(img.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn gram_matrices_symmetric_psd(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bank = generate_bank(seed, &[4, 8, 12]).unwrap();
        let pyramid = extract_features(&random_image(&mut rng, 16, 16), &bank).unwrap();
        for level in &pyramid.levels {
            let g = gram(level);
            for i in 0..g.size {
                for j in 0..g.size {
                    prop_assert_eq!(g.get(i, j), g.get(j, i));
                }
            }
            let scale = g.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let min = jacobi_eigenvalues(&g).into_iter().fold(f64::INFINITY, f64::min);
            prop_assert!(min >= -1e-9 * scale, "eigenvalue {min}");
        }
    }

    #[test]
    fn losses_nonnegative_and_features_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bank = generate_bank(seed % 4, &[4, 8, 8]).unwrap();
        let (a, b) = (random_image(&mut rng, 16, 16), random_image(&mut rng, 16, 16));
        let weights = LossWeights::default();
        prop_assert!(content_loss(&a, &b, &bank, 1).unwrap() >= 0.0);
        prop_assert!(style_loss(&a, &b, &bank, &weights).unwrap() >= 0.0);
        let (f1, f2) = (extract_features(&a, &bank).unwrap(), extract_features(&a, &bank).unwrap());
        prop_assert_eq!(f1.levels.len(), f2.levels.len());
        for (x, y) in f1.levels.iter().zip(&f2.levels) {
            prop_assert_eq!(&x.data, &y.data);
        }
    }

    #[test]
    fn adam_zero_gradients_is_identity(rows in proptest::collection::vec(proptest::array::uniform12(-50.0..50.0f64), 1..6), steps in 1usize..40) {
        let mut latent = LatentParams { rows: rows.clone() };
        let mut state = AdamState::new(rows.len() * PARAMS_PER_STROKE, AdamConfig::default());
        let zeros = vec![[0.0; PARAMS_PER_STROKE]; rows.len()];
        for _ in 0..steps {
            adam_step(&mut state, &mut latent, &zeros, &LearningRates::default()).unwrap();
        }
        prop_assert_eq!(latent.rows, rows);
    }

    #[test]
    fn svg_is_deterministic_and_ordered(seed in any::<u64>(), n in 0usize..20) {
        let field = seeded_field(seed, n, 30, 40);
        let config = RenderConfig::default();
        let doc = svg_document(&field, &config);
        prop_assert_eq!(&doc, &svg_document(&field, &config));
        let paths: Vec<&str> = doc.lines().filter(|l| l.contains("<path ")).collect();
        prop_assert_eq!(paths.len(), n);
        for (line, stroke) in paths.iter().zip(field.strokes()) {
            let color = format!("stroke=\"{}\"", hex_color(stroke.color));
            prop_assert!(line.contains(&color));
            let width = format!("stroke-width=\"{}\"", 2.0 * stroke.width);
            prop_assert!(line.contains(&width));
        }
    }

    #[test]
    fn png_round_trip_is_lossless_at_8_bits(seed in any::<u64>(), h in 1usize..20, w in 1usize..20) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.png");
        let img = random_image(&mut ChaCha8Rng::seed_from_u64(seed), h, w);
        save_png(&img, &path).unwrap();
        let back = load_png(&path).unwrap();
        prop_assert_eq!(to_rgb8(&back), to_rgb8(&img));
        save_png(&back, &path).unwrap();
        prop_assert_eq!(load_png(&path).unwrap(), back);
    }
}

#[test]
fn jacobi_oracle_on_known_matrices() {
    let mut ev = jacobi_eigenvalues(&GramMatrix {
        size: 2,
        data: vec![2.0, 1.0, 1.0, 2.0],
    });
    ev.sort_by(f64::total_cmp);
    assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    let mut ev = jacobi_eigenvalues(&GramMatrix {
        size: 3,
        data: vec![1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 5.0],
    });
    ev.sort_by(f64::total_cmp);
    for (got, want) in ev.iter().zip([-1.0, 3.0, 5.0]) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}
