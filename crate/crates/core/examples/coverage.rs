//! Monte Carlo check that the region covers the ideal coefficients with the
//! nominal probability, for several noise families.

use kernel_regions::prelude::*;

fn main() {
    let config = RegionConfig::new(20, 2, 0).unwrap();
    for noise in ["laplace:0:0.5", "gaussian:1", "uniform:1.7320508075688772"] {
        let mut scenario = CoverageScenario::krr_default();
        scenario.noise = NoiseSpec::parse(noise).unwrap();
        let r = coverage_experiment(&scenario, 500, config, 42).unwrap();
        println!(
            "{noise:<28} nominal {:.2}  empirical {:.3}  95% CI [{:.3}, {:.3}]",
            r.p_nominal, r.empirical_coverage, r.ci.0, r.ci.1
        );
    }

    // The rank of the ideal vector is uniform over 1/m, ..., m/m.
    let hist = kernel_regions::rank::rank_histogram(&CoverageScenario::krr_default(), 1000, 10, 7)
        .unwrap();
    println!("rank histogram (m = 10): {hist:?}");
}
