//! Kernel families, Gram matrices and the strict positive definiteness check.

use kernel_regions::data::equidistant;
use kernel_regions::kernels::{check_strict_pd, DEFAULT_PD_TOL};
use kernel_regions::prelude::*;

fn main() {
    let xs: Vec<Vec<f64>> = equidistant(20, 0.0, 10.0)
        .into_iter()
        .map(|x| vec![x])
        .collect();
    let kernels = [
        "gaussian:sigma=0.5",
        "laplacian:sigma=0.5",
        "truncated_parabolic:c=1",
        "rectangular:c=0.0263",
        "polynomial:c=1,p=2",
    ];
    println!(
        "{:<26} {:>12} {:>12} {:>10}",
        "kernel", "min eig", "max eig", "strict PD"
    );
    for text in kernels {
        let k = KernelSpec::parse(text).unwrap();
        let g = gram_matrix(&k, &xs).unwrap();
        let d = check_strict_pd(&g, DEFAULT_PD_TOL);
        println!(
            "{:<26} {:>12.3e} {:>12.3e} {:>10}",
            k.to_string(),
            d.min_eigenvalue,
            d.max_eigenvalue,
            d.strictly_pd
        );
    }

    // Close inputs relative to the bandwidth make the Gram matrix singular
    // in double precision.
    let dense: Vec<Vec<f64>> = equidistant(100, 0.0, 10.0)
        .into_iter()
        .map(|x| vec![x])
        .collect();
    let g = gram_matrix(&KernelSpec::gaussian(0.5).unwrap(), &dense).unwrap();
    let d = check_strict_pd(&g, DEFAULT_PD_TOL);
    println!(
        "\ngaussian sigma=0.5 on 100 points: min eig {:.3e}, strict PD {}",
        d.min_eigenvalue, d.strictly_pd
    );
}
