//! Synthetic dataset generators.
//!
//! These keep the integration tests and examples self-contained: a bipolar
//! XOR task with noise, separable Gaussian blobs, a 28x28 ten-class digit
//! mimic in genuine IDX geometry, and CSV writers shaped like the public
//! credit-card fraud/default tables (same column layout and class
//! imbalance, synthetic content).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::Mat;

use super::{DataSet, FeatureKind};

/// Standard normal via Box-Muller.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Bipolar XOR with Gaussian jitter: corners (+-1, +-1), class 1 when the
/// coordinates disagree in sign.
pub fn xor_noise(n: usize, noise_std: f64, seed: u64) -> DataSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Mat::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let a = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let b = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        *x.at_mut(r, 0) = a + noise_std * gauss(&mut rng);
        *x.at_mut(r, 1) = b + noise_std * gauss(&mut rng);
        labels.push(if a * b < 0.0 { 1 } else { 0 });
    }
    DataSet::from_features(
        x,
        labels,
        2,
        vec![FeatureKind::Continuous; 2],
        vec![format!("synth::xor_noise(n={n}, std={noise_std}, seed={seed})")],
    )
    .expect("consistent construction")
}

/// Well-separated Gaussian blobs, one per class, centers on a circle of
/// radius 2 in the first two dimensions.
pub fn blobs(n_per_class: usize, n_classes: usize, dim: usize, std: f64, seed: u64) -> DataSet {
    assert!(dim >= 2, "blobs need at least 2 dimensions");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_per_class * n_classes;
    let mut x = Mat::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let class = r % n_classes;
        let angle = std::f64::consts::TAU * class as f64 / n_classes as f64;
        for c in 0..dim {
            let center = match c {
                0 => 2.0 * angle.cos(),
                1 => 2.0 * angle.sin(),
                _ => 0.0,
            };
            *x.at_mut(r, c) = center + std * gauss(&mut rng);
        }
        labels.push(class);
    }
    DataSet::from_features(
        x,
        labels,
        n_classes,
        vec![FeatureKind::Continuous; dim],
        vec![format!(
            "synth::blobs(n_per_class={n_per_class}, classes={n_classes}, dim={dim}, std={std}, seed={seed})"
        )],
    )
    .expect("consistent construction")
}

// 7x5 stroke masks, upscaled onto the 28x28 canvas.
const GLYPHS: [&str; 10] = [
    ".###.#...##...##...##...##...#.###.", // 0
    "..#...##....#....#....#....#...###.", // 1
    ".###.#...#....#...#...#...#...#####", // 2
    ".###.#...#....#..##.....##...#.###.", // 3
    "...#...##..#.#.#..#.#####...#....#.", // 4
    "######....####.....#....##...#.###.", // 5
    ".###.#....####.#...##...##...#.###.", // 6
    "#####....#...#...#...#....#....#...", // 7
    ".###.#...##...#.###.#...##...#.###.", // 8
    ".###.#...##...#.#####....#....#.##.", // 9
];

/// Renders one digit image: glyph strokes at jittered intensity, random
/// +-2 pixel translation, light background noise. Returns 28x28 = 784 bytes.
fn render_digit(digit: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let glyph = GLYPHS[digit].as_bytes();
    let mut img = vec![0u8; 28 * 28];
    let dx: i32 = rng.gen_range(-2..=2);
    let dy: i32 = rng.gen_range(-2..=2);
    // glyph cell (gr, gc) covers a 3x3 pixel block; base offset centers the
    // 21x15 rendering on the canvas
    for gr in 0..7 {
        for gc in 0..5 {
            if glyph[gr * 5 + gc] != b'#' {
                continue;
            }
            if rng.gen_bool(0.04) {
                continue; // stroke dropout
            }
            let intensity = 140.0 + 115.0 * rng.gen::<f64>();
            for py in 0..3 {
                for px in 0..3 {
                    let y = 4 + gr as i32 * 3 + py + dy;
                    let x = 7 + gc as i32 * 3 + px + dx;
                    if (0..28).contains(&y) && (0..28).contains(&x) {
                        let jitter = 0.85 + 0.15 * rng.gen::<f64>();
                        img[(y * 28 + x) as usize] = (intensity * jitter) as u8;
                    }
                }
            }
        }
    }
    for p in img.iter_mut() {
        if *p == 0 && rng.gen_bool(0.02) {
            *p = rng.gen_range(1..30);
        }
    }
    img
}

/// Raw u8 digit images plus labels, MNIST geometry (28x28, classes 0-9).
pub fn digits_images(n: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let digit = i % 10; // balanced classes
        images.push(render_digit(digit, &mut rng));
        labels.push(digit as u8);
    }
    // interleave deterministically so class order carries no signal
    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let images = order.iter().map(|&i| images[i].clone()).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    (images, labels)
}

/// Digit mimic as a ready DataSet: pixels/255 in [0, 1], ten classes.
pub fn digits(n: usize, seed: u64) -> DataSet {
    let (images, labels) = digits_images(n, seed);
    let mut x = Mat::zeros(n, 784);
    for (r, img) in images.iter().enumerate() {
        for (c, &p) in img.iter().enumerate() {
            *x.at_mut(r, c) = p as f64 / 255.0;
        }
    }
    DataSet::from_features(
        x,
        labels.iter().map(|&l| l as usize).collect(),
        10,
        vec![FeatureKind::Continuous; 784],
        vec![format!("synth::digits(n={n}, seed={seed})")],
    )
    .expect("consistent construction")
}

/// Writes a fraud-shaped CSV: Time, V1..V28, Amount, Class with the stated
/// positive fraction. Positives shift a subset of the V-columns.
pub fn write_fraud_like_csv(
    path: &Path,
    n: usize,
    positive_fraction: f64,
    seed: u64,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    out.push_str("Time");
    for i in 1..=28 {
        out.push_str(&format!(",V{i}"));
    }
    out.push_str(",Amount,Class\n");
    let n_pos = ((n as f64) * positive_fraction).round().max(2.0) as usize;
    for r in 0..n {
        let is_pos = r < n_pos; // deterministic count; rows shuffled by split later
        out.push_str(&format!("{}", r * 3 + rng.gen_range(0..3)));
        for i in 1..=28 {
            let scale = 1.0 + (i as f64) * 0.05;
            let mean = (i as f64) * 0.1 - 1.45;
            let shift = if is_pos && i <= 10 {
                2.5 * if i % 2 == 0 { 1.0 } else { -1.0 }
            } else {
                0.0
            };
            out.push_str(&format!(",{:.6}", mean + shift + scale * gauss(&mut rng)));
        }
        let amount = if is_pos {
            120.0 + 80.0 * gauss(&mut rng).abs()
        } else {
            50.0 + 40.0 * gauss(&mut rng).abs()
        };
        out.push_str(&format!(",{:.2},{}\n", amount, if is_pos { 1 } else { 0 }));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a credit-default-shaped CSV: 23 raw feature columns (LIMIT_BAL,
/// SEX, EDUCATION, MARRIAGE, AGE, PAY_1..6, BILL_AMT1..6, PAY_AMT1..6) plus
/// a `default` label at roughly 22% positives. With the shipped schema the
/// categoricals expand to a 32-column input.
pub fn write_default_like_csv(path: &Path, n: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    out.push_str("LIMIT_BAL,SEX,EDUCATION,MARRIAGE,AGE");
    for i in 1..=6 {
        out.push_str(&format!(",PAY_{i}"));
    }
    for i in 1..=6 {
        out.push_str(&format!(",BILL_AMT{i}"));
    }
    for i in 1..=6 {
        out.push_str(&format!(",PAY_AMT{i}"));
    }
    out.push_str(",default\n");
    for _ in 0..n {
        let limit = 10_000.0 + 490_000.0 * rng.gen::<f64>();
        let sex = rng.gen_range(1..=2);
        let education = rng.gen_range(0..=6);
        let marriage = rng.gen_range(0..=3);
        let age = rng.gen_range(21..=75);
        let late_bias: f64 = rng.gen::<f64>();
        let pays: Vec<i64> = (0..6)
            .map(|_| {
                if late_bias > 0.75 {
                    rng.gen_range(1..=4)
                } else {
                    rng.gen_range(-2..=0)
                }
            })
            .collect();
        let bills: Vec<f64> = (0..6)
            .map(|_| limit * rng.gen::<f64>() * 0.9)
            .collect();
        let pay_amts: Vec<f64> = bills
            .iter()
            .map(|b| b * rng.gen::<f64>() * if late_bias > 0.75 { 0.1 } else { 0.5 })
            .collect();
        // defaults concentrate among late payers; overall rate ~22%
        let p_default = if late_bias > 0.75 { 0.7 } else { 0.06 };
        let label = if rng.gen_bool(p_default) { 1 } else { 0 };

        out.push_str(&format!("{limit:.0},{sex},{education},{marriage},{age}"));
        for p in &pays {
            out.push_str(&format!(",{p}"));
        }
        for b in &bills {
            out.push_str(&format!(",{b:.2}"));
        }
        for p in &pay_amts {
            out.push_str(&format!(",{p:.2}"));
        }
        out.push_str(&format!(",{label}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Schema matching [`write_fraud_like_csv`] output (and the public fraud
/// table): Time dropped, V1..V28 + Amount continuous, Class label.
pub fn fraud_schema() -> super::tabular::Schema {
    let mut continuous: Vec<String> = (1..=28).map(|i| format!("V{i}")).collect();
    continuous.push("Amount".into());
    super::tabular::Schema {
        label: "Class".into(),
        continuous,
        binary: Vec::new(),
        categorical: Vec::new(),
        drop: vec!["Time".into()],
        categories: Default::default(),
    }
}

/// Schema matching [`write_default_like_csv`] output (and the public
/// default table): SEX binary, EDUCATION/MARRIAGE categorical with pinned
/// category lists so the expanded width is always 32.
pub fn credit_default_schema() -> super::tabular::Schema {
    let mut continuous = vec!["LIMIT_BAL".to_string(), "AGE".to_string()];
    for i in 1..=6 {
        continuous.push(format!("PAY_{i}"));
    }
    for i in 1..=6 {
        continuous.push(format!("BILL_AMT{i}"));
    }
    for i in 1..=6 {
        continuous.push(format!("PAY_AMT{i}"));
    }
    let mut categories = std::collections::BTreeMap::new();
    categories.insert(
        "EDUCATION".to_string(),
        (0..=6).map(|v| v.to_string()).collect(),
    );
    categories.insert(
        "MARRIAGE".to_string(),
        (0..=3).map(|v| v.to_string()).collect(),
    );
    super::tabular::Schema {
        label: "default".into(),
        continuous,
        binary: vec!["SEX".into()],
        categorical: vec!["EDUCATION".into(), "MARRIAGE".into()],
        drop: Vec::new(),
        categories,
    }
}
