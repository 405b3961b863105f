//! Synthetic samples under different noise families, and the CSV format.

use kernel_regions::data::{read_csv, write_csv};
use kernel_regions::prelude::*;

fn main() {
    for noise in NoiseSpec::unit_variance_families() {
        let s = generate_synthetic(&TrueFunction::XSinX, 2000, (0.0, 10.0), &noise, 3).unwrap();
        let eps: Vec<f64> = s
            .outputs()
            .iter()
            .zip(s.true_outputs().unwrap())
            .map(|(y, t)| y - t)
            .collect();
        let mean = eps.iter().sum::<f64>() / eps.len() as f64;
        let var = eps.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (eps.len() - 1) as f64;
        println!(
            "{:<32} symmetric={:<5} sample mean {:+.3}  sample variance {:.3}",
            noise.to_string(),
            noise.is_symmetric(),
            mean,
            var
        );
    }

    let s = generate_synthetic(
        &TrueFunction::XSinX,
        5,
        (0.0, 10.0),
        &NoiseSpec::laplace(0.0, 0.5).unwrap(),
        1,
    )
    .unwrap();
    let mut w = csv::Writer::from_writer(Vec::new());
    write_csv(&s, &mut w).unwrap();
    let bytes = w.into_inner().unwrap();
    print!("\n{}", String::from_utf8_lossy(&bytes));
    assert_eq!(read_csv(bytes.as_slice()).unwrap(), s);
}
