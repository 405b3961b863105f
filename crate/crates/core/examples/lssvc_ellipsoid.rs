//! Ellipsoidal outer approximations for a least-squares SVM classifier at
//! confidence 10%, 50% and 90%.

use kernel_regions::data::generate_two_class;
use kernel_regions::prelude::*;

fn main() {
    let data = generate_two_class(
        &[1.0, 1.0],
        &[-1.0, -1.0],
        50,
        &NoiseSpec::gaussian(1.0).unwrap(),
        2,
    )
    .unwrap();
    let problem = build_problem(
        &EstimatorConfig::Lssvc { lambda: 0.1 },
        &KernelSpec::linear(),
        &data,
        &TransformGroup::SignChange,
    )
    .unwrap();
    let sps = problem.as_sps().unwrap();
    let m = 100;
    let region = Region::new(&problem, RegionConfig::new(m, 10, 3).unwrap()).unwrap();
    let base = outer_ellipsoid(sps, region.pset(), 10).unwrap();
    println!(
        "estimate (bias, w1, w2) = {:.4?}",
        sps.estimate().as_slice()
    );
    for q in [90, 50, 10] {
        let e = base.with_q(q).unwrap();
        let half = kernel_regions::sps::bounding_box_half_widths(&e).unwrap();
        println!(
            "p = {:.2}: radius {:.5}, box half-widths {:.4?}",
            1.0 - q as f64 / m as f64,
            e.radius,
            half.as_slice()
        );
    }

    // Every member found by sampling the ellipsoid lies inside it.
    let e = base.with_q(10).unwrap();
    let r = Region::new(&problem, RegionConfig::new(m, 10, 3).unwrap()).unwrap();
    let samples = mc_region(&r, &Sampler::Ellipsoid(e.clone()), 20_000, 1).unwrap();
    let members = samples.iter().filter(|s| s.rank.within(10)).count();
    println!(
        "{members} of {} ellipsoid samples are members at p = 0.9",
        samples.len()
    );
}
