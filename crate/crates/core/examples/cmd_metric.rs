//! The CMD similarity on hand-made covariance matrices.

use num_complex::Complex64;
use spatcon::covar::{covariance_from_snapshots, CovarianceMatrix};
use spatcon::metric::cmd_similarity;

fn diag(values: &[f64]) -> CovarianceMatrix {
    let n = values.len();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, &v) in values.iter().enumerate() {
        data[i * n + i] = Complex64::new(v, 0.0);
    }
    CovarianceMatrix::from_row_major(n, data, 1).expect("square")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = diag(&[2.0, 1.0]);
    let b = diag(&[1.0, 1.0]);
    println!("diag(2,1) vs I        : {:.6}  (3/sqrt(10) = {:.6})", cmd_similarity(&a, &b)?.value(), 3.0 / 10f64.sqrt());
    println!("diag(2,1) vs 5 diag(2,1): {:.6}", cmd_similarity(&a, &a.scaled(5.0))?.value());
    println!("e1 e1^H vs e2 e2^H    : {:.6}", cmd_similarity(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0]))?.value());

    // two rank-one covariances from steering-like vectors
    let v = |phase: f32| -> Vec<num_complex::Complex32> {
        (0..8).map(|k| num_complex::Complex32::from_polar(1.0, phase * k as f32)).collect()
    };
    let r0 = covariance_from_snapshots(8, &v(0.0));
    for step in [0.0f32, 0.1, 0.3, 0.785, 1.5] {
        let r = covariance_from_snapshots(8, &v(step));
        println!("phase step {step:>5.3} rad : {:.6}", cmd_similarity(&r0, &r)?.value());
    }

    let indefinite = diag(&[-1.0, 0.0]);
    match cmd_similarity(&indefinite, &diag(&[1.0, 0.0])) {
        Err(e) => println!("indefinite input rejected: {e}"),
        Ok(s) => println!("unexpected: {}", s.value()),
    }
    Ok(())
}
