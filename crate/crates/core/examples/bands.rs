//! Confidence bands in model space for KRR and ε-SVR on the same data,
//! written as CSV for plotting.

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
    let grid = default_grid(&sample);
    let settings = RayBandSettings {
        levels: vec![0.1, 0.5, 0.9],
        m: 20,
        seed: 3,
        n_rays: 300,
        half_width: 10.0,
    };
    let dir = std::env::temp_dir();
    for est in ["krr:lambda=0.1", "svr:c=250,eps=0.2"] {
        let est = EstimatorConfig::parse(est).unwrap();
        let problem = build_problem(&est, &kernel, &sample, &TransformGroup::SignChange).unwrap();
        let center = point_estimate(&est, &problem, SolverSettings::default()).unwrap();
        let bands = bands_by_rays(
            &problem,
            &center,
            &kernel,
            sample.inputs(),
            &grid,
            &settings,
        )
        .unwrap();
        let widths: Vec<String> = bands
            .bands
            .iter()
            .map(|b| format!("p={}: {:.2}", b.level, b.average_width()))
            .collect();
        let path = dir.join(format!(
            "band_{}.csv",
            est.to_string().split(':').next().unwrap()
        ));
        bands
            .write_csv(std::fs::File::create(&path).unwrap())
            .unwrap();
        println!(
            "{est:<20} average widths {}  -> {}",
            widths.join(", "),
            path.display()
        );
    }
}
