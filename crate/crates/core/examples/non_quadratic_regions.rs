//! Regions for ε-SVR and kernelized LASSO, where no ellipsoid is available,
//! under sign changes and under permutations.

use kernel_regions::prelude::*;

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
    let truth = ideal_coefficients(
        &gram_matrix(&kernel, sample.inputs()).unwrap(),
        sample.true_outputs().unwrap(),
    )
    .unwrap();
    for est in ["svr:c=250,eps=0.2", "klasso:lambda=1"] {
        let est = EstimatorConfig::parse(est).unwrap();
        for group in [TransformGroup::SignChange, TransformGroup::Permutation] {
            let problem = build_problem(&est, &kernel, &sample, &group).unwrap();
            let alpha = point_estimate(&est, &problem, SolverSettings::default()).unwrap();
            let region = Region::new(&problem, RegionConfig::new(20, 2, 5).unwrap()).unwrap();
            let nonzero = alpha.iter().filter(|a| a.abs() > 1e-8).count();
            println!(
                "{:<20} {group:<12?} nonzero coefficients {nonzero:>2}, estimate rank {:>2}/20, ideal rank {:>2}/20",
                est.to_string(),
                region.rank(&alpha).unwrap().k,
                region.rank(&truth).unwrap().k,
            );
        }
    }
}
