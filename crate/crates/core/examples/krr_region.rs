//! A KRR region explored by ray scans from the estimate.
//!
//! Along random directions the region ends at a finite distance, while
//! along `K⁻¹e_j` it never does: the outer ellipsoid is unbounded.

use kernel_regions::explorer::ray_scan;
use kernel_regions::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let sample = generate_synthetic(
        &TrueFunction::XSinX,
        20,
        (0.0, 10.0),
        &NoiseSpec::laplace(0.0, 0.5).unwrap(),
        1,
    )
    .unwrap();
    let kernel = KernelSpec::gaussian(0.5).unwrap();
    let problem = build_problem(
        &EstimatorConfig::krr(0.1),
        &kernel,
        &sample,
        &TransformGroup::SignChange,
    )
    .unwrap();
    let region = Region::new(&problem, RegionConfig::new(20, 2, 4).unwrap()).unwrap();
    let center = problem.as_sps().unwrap().estimate().clone();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    println!("boundary radius along random directions (q = 1, 2, 10):");
    for _ in 0..5 {
        let u = DVector::<f64>::from_fn(20, |_, _| StandardNormal.sample(&mut rng)).normalize();
        let scan = ray_scan(&region, &center, &u, 1e3, 32, &[1, 2, 10]).unwrap();
        let radii: Vec<String> = scan
            .boundaries
            .iter()
            .map(|b| format!("{:8.3}", b.radius))
            .collect();
        println!("  {}", radii.join(" "));
    }

    let gram = gram_matrix(&kernel, sample.inputs()).unwrap();
    let inv = gram.entries().clone().cholesky().unwrap().inverse();
    let far = &center + inv.column(0).normalize() * 1e6;
    println!(
        "\nalpha_hat + 1e6 * K^-1 e_1 / |.|: rank {}",
        region.rank(&far).unwrap().k
    );

    let e = outer_ellipsoid(problem.as_sps().unwrap(), region.pset(), 2).unwrap();
    println!(
        "outer ellipsoid radius {} (degenerate: {})",
        e.radius, e.degenerate
    );
}
