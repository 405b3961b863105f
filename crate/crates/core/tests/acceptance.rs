//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the lines are always printed; exits non-zero if any criterion fails.

use std::time::Instant;

use kernel_regions::data::generate_two_class;
use kernel_regions::estimators::{
    klasso_objective, klasso_subgradient, krr_canonical, krr_objective, lssvc_canonical,
    lssvc_objective, svr_dual_objective, svr_subgradient,
};
use kernel_regions::explorer::ray_scan;
use kernel_regions::prelude::*;
use kernel_regions::rank::rank_histogram;
use kernel_regions::seeding::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn unit(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(rng)).normalize()
}

fn krr_sample(seed: u64) -> DataSample {
    CoverageScenario::krr_default().sample(seed).unwrap()
}

fn gaussian() -> KernelSpec {
    KernelSpec::gaussian(0.5).unwrap()
}

fn coverage_in(
    scenario: &CoverageScenario,
    m: usize,
    q: usize,
    seed: u64,
    lo: f64,
    hi: f64,
) -> (bool, String) {
    let r = coverage_experiment(scenario, 2000, RegionConfig::new(m, q, 0).unwrap(), seed).unwrap();
    let ok = (lo..=hi).contains(&r.empirical_coverage);
    (
        ok,
        format!("{:.4} in [{lo:.3}, {hi:.3}]", r.empirical_coverage),
    )
}

fn c1() -> Outcome {
    let (ok, d) = coverage_in(&CoverageScenario::krr_default(), 20, 2, 101, 0.88, 0.92);
    outcome(
        ok,
        format!("KRR, sign changes, m=20, q=2, 2000 trials: coverage {d}"),
    )
}

fn c2() -> Outcome {
    let mut parts = Vec::new();
    let mut all = true;
    let mut klasso = CoverageScenario::krr_default();
    klasso.estimator = EstimatorConfig::Klasso { lambda: 1.0 };
    let mut svr = CoverageScenario::krr_default();
    svr.estimator = EstimatorConfig::Svr { c: 250.0, eps: 0.2 };
    let mut perm = CoverageScenario::krr_default();
    perm.group = GroupKind::Permutation;
    perm.noise = NoiseSpec::gaussian(1.0).unwrap();
    let runs = [
        ("KLASSO", klasso, 20, 2, 0.88, 0.92),
        ("SVR", svr, 20, 2, 0.88, 0.92),
        ("permutation/Gaussian", perm, 20, 2, 0.88, 0.92),
        (
            "m=10,q=5",
            CoverageScenario::krr_default(),
            10,
            5,
            0.466,
            0.534,
        ),
    ];
    for (i, (name, s, m, q, lo, hi)) in runs.into_iter().enumerate() {
        let (ok, d) = coverage_in(&s, m, q, 200 + i as u64, lo, hi);
        all &= ok;
        parts.push(format!("{name} {d}"));
    }
    outcome(all, parts.join("; "))
}

fn c3() -> Outcome {
    let mut parts = Vec::new();
    let mut all = true;
    let families = [
        ("gaussian", NoiseSpec::gaussian(1.0).unwrap()),
        ("uniform", NoiseSpec::uniform(3f64.sqrt()).unwrap()),
        (
            "binomial(20)",
            NoiseSpec::binomial_unit_variance(20).unwrap(),
        ),
    ];
    for (i, (name, noise)) in families.into_iter().enumerate() {
        let mut s = CoverageScenario::krr_default();
        s.noise = noise;
        let (ok, d) = coverage_in(&s, 20, 2, 300 + i as u64, 0.88, 0.92);
        all &= ok;
        parts.push(format!("{name} {d}"));
    }
    outcome(all, parts.join("; "))
}

fn c4() -> Outcome {
    let hist = rank_histogram(&CoverageScenario::krr_default(), 5000, 10, 401).unwrap();
    let expected = 500.0;
    let stat: f64 = hist
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(stat);
    outcome(
        p > 0.01,
        format!("rank histogram {hist:?}, chi2 = {stat:.2}, p = {p:.3} > 0.01"),
    )
}

fn c5() -> Outcome {
    let m = 20;
    let mut rank_ok = 0;
    let mut non_prefix = 0;
    let mut checks = 0;
    for d in 0..50u64 {
        let sample = krr_sample(derive_seed(500, d));
        let problem = build_problem(
            &EstimatorConfig::krr(0.1),
            &gaussian(),
            &sample,
            &TransformGroup::SignChange,
        )
        .unwrap();
        let region = Region::new(&problem, RegionConfig::new(m, 1, 510 + d).unwrap()).unwrap();
        let center = problem.as_sps().unwrap().estimate().clone();
        let r = region.rank(&center).unwrap();
        if r.k == 1 && (1..m).all(|q| r.within(q)) {
            rank_ok += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(520, d));
        for _ in 0..100 {
            let u = unit(center.len(), &mut rng);
            let ranks: Vec<usize> = (0..=120)
                .map(|j| region.rank(&(&center + &u * (0.5 * j as f64))).unwrap().k)
                .collect();
            for q in 1..m {
                let inside: Vec<bool> = ranks.iter().map(|&k| k + q <= m).collect();
                let first_out = inside.iter().position(|&b| !b).unwrap_or(inside.len());
                checks += 1;
                if inside[first_out..].iter().any(|&b| b) {
                    non_prefix += 1;
                }
            }
        }
    }
    outcome(
        rank_ok == 50 && non_prefix == 0,
        format!("estimate has rank 1/20 on {rank_ok}/50 datasets; {non_prefix} of {checks} (ray, q) scans not prefix-shaped"),
    )
}

/// Member points on rays from `center`: a fraction of the way to each
/// ray's boundary, re-verified against the region.
fn ray_members<P: GradientPerturbationProblem>(
    region: &Region<'_, P>,
    center: &DVector<f64>,
    q: usize,
    n_rays: usize,
    per_ray: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..n_rays {
        let u = unit(center.len(), &mut rng);
        let b = ray_scan(region, center, &u, 1e3, 24, &[q])
            .unwrap()
            .boundaries[0]
            .radius;
        for j in 1..=per_ray {
            let a = center + &u * (b * j as f64 / per_ray as f64);
            if region.rank(&a).unwrap().within(q) {
                out.push(a);
            }
        }
    }
    out
}

fn c6() -> Outcome {
    let m = 20;
    let qs = [18, 10, 2];
    let mut degenerate = 0;
    let mut violations = 0;
    let mut points = 0;
    let mut monotone = true;
    for d in 0..10u64 {
        let sample = krr_sample(derive_seed(600, d));
        let problem = build_problem(
            &EstimatorConfig::krr(0.1),
            &gaussian(),
            &sample,
            &TransformGroup::SignChange,
        )
        .unwrap();
        let sps = problem.as_sps().unwrap();
        let region = Region::new(&problem, RegionConfig::new(m, 2, 610 + d).unwrap()).unwrap();
        let e = outer_ellipsoid(sps, region.pset(), 2).unwrap();
        let radii: Vec<f64> = qs.iter().map(|&q| e.radius_for(q).unwrap()).collect();
        monotone &= radii.windows(2).all(|w| w[0] <= w[1]);
        if e.degenerate {
            degenerate += 1;
        }
        for a in ray_members(&region, sps.estimate(), 2, 100, 100, 620 + d) {
            points += 1;
            if e.quad_form(&a) > e.radius + 1e-8 * e.radius.max(1.0) {
                violations += 1;
            }
        }
    }
    let krr = format!(
        "KRR: {points} member points, {violations} outside, radii monotone {monotone}, \
         {degenerate}/10 ellipsoids unbounded (radius inf, containment holds trivially)"
    );

    // Same check where the outer approximation is finite.
    let mut fin_points = 0;
    let mut fin_viol = 0;
    let mut fin_monotone = true;
    let mut fin_all_finite = true;
    for d in 0..10u64 {
        let data = generate_two_class(
            &[1.0, 1.0],
            &[-1.0, -1.0],
            50,
            &NoiseSpec::gaussian(1.0).unwrap(),
            630 + d,
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
        let region = Region::new(&problem, RegionConfig::new(m, 2, 640 + d).unwrap()).unwrap();
        let e = outer_ellipsoid(sps, region.pset(), 2).unwrap();
        let radii: Vec<f64> = qs.iter().map(|&q| e.radius_for(q).unwrap()).collect();
        fin_monotone &= radii.windows(2).all(|w| w[0] < w[1]);
        fin_all_finite &= !e.degenerate;
        for a in ray_members(&region, sps.estimate(), 2, 100, 100, 650 + d) {
            fin_points += 1;
            if e.quad_form(&a) > e.radius + 1e-8 * e.radius.max(1.0) {
                fin_viol += 1;
            }
        }
    }
    let lssvc = format!(
        "LS-SVC: {fin_points} member points, {fin_viol} outside, radii strictly monotone {fin_monotone}, all finite {fin_all_finite}"
    );
    let pass = violations == 0
        && monotone
        && points >= 100_000
        && fin_viol == 0
        && fin_monotone
        && fin_all_finite
        && fin_points >= 100_000;
    outcome(pass, format!("{krr}; {lssvc}"))
}

fn c7() -> Outcome {
    let sample = krr_sample(700);
    let k = gram_matrix(&gaussian(), sample.inputs())
        .unwrap()
        .into_entries();
    let y = DVector::from_column_slice(sample.outputs());
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(701);
    let h = 1e-5;
    let mut worst_lasso: f64 = 0.0;
    let mut worst_svr: f64 = 0.0;
    for _ in 0..100 {
        let alpha = DVector::from_fn(n, |_, _| {
            let mag = rng.random_range(0.01..2.0);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        });
        let g_lasso = klasso_subgradient(&k, &y, &alpha, 1.0);
        let g_svr = svr_subgradient(&k, &y, &alpha, 0.2);
        for i in 0..n {
            let mut up = alpha.clone();
            let mut down = alpha.clone();
            up[i] += h;
            down[i] -= h;
            let fd_lasso = (klasso_objective(&k, &y, &up, 1.0)
                - klasso_objective(&k, &y, &down, 1.0))
                / (2.0 * h);
            let fd_svr = (svr_dual_objective(&k, &y, &up, 0.2)
                - svr_dual_objective(&k, &y, &down, 0.2))
                / (2.0 * h);
            worst_lasso =
                worst_lasso.max((fd_lasso - g_lasso[i]).abs() / g_lasso[i].abs().max(1.0));
            worst_svr = worst_svr.max((fd_svr - g_svr[i]).abs() / g_svr[i].abs().max(1.0));
        }
    }
    outcome(
        worst_lasso <= 1e-6 && worst_svr <= 1e-6,
        format!("max relative error KLASSO {worst_lasso:.2e}, SVR {worst_svr:.2e} (limit 1e-6, 100 points each)"),
    )
}

fn relative_variance(diffs: &[f64], scale: f64) -> f64 {
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64 / (scale * scale)
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    let sample = krr_sample(801);
    let g = gram_matrix(&gaussian(), sample.inputs()).unwrap();
    let c = krr_canonical(&g, sample.outputs(), None, 0.1).unwrap();
    let (mut d_krr, mut s_krr) = (Vec::new(), 0.0_f64);
    for _ in 0..100 {
        let a = DVector::from_fn(20, |_, _| rng.random_range(-3.0..3.0));
        let direct = krr_objective(g.entries(), sample.outputs(), None, 0.1, &a);
        d_krr.push(c.objective(&a) - direct);
        s_krr = s_krr.max(direct.abs());
    }
    let data = generate_two_class(
        &[1.0, 1.0],
        &[-1.0, -1.0],
        50,
        &NoiseSpec::gaussian(1.0).unwrap(),
        802,
    )
    .unwrap();
    let c = lssvc_canonical(data.inputs(), data.outputs(), 0.1).unwrap();
    let (mut d_svc, mut s_svc) = (Vec::new(), 0.0_f64);
    for _ in 0..100 {
        let a = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
        let direct = lssvc_objective(data.inputs(), data.outputs(), 0.1, &a);
        d_svc.push(c.objective(&a) - direct);
        s_svc = s_svc.max(direct.abs());
    }
    let v_krr = relative_variance(&d_krr, s_krr);
    let v_svc = relative_variance(&d_svc, s_svc);
    outcome(
        v_krr <= 1e-12 && v_svc <= 1e-12,
        format!("relative variance of the difference: KRR {v_krr:.2e}, LS-SVC {v_svc:.2e} (limit 1e-12)"),
    )
}

fn c9() -> Outcome {
    let m = 20;
    let sample = krr_sample(900);
    let kernel = gaussian();
    let mut parts = Vec::new();
    let mut violations = 0;
    for (i, est) in ["krr:lambda=0.1", "svr:c=250,eps=0.2", "klasso:lambda=1"]
        .into_iter()
        .enumerate()
    {
        let est = EstimatorConfig::parse(est).unwrap();
        let problem = build_problem(&est, &kernel, &sample, &TransformGroup::SignChange).unwrap();
        let center = point_estimate(&est, &problem, SolverSettings::default()).unwrap();
        let regions: Vec<Region<'_, KernelProblem>> = (1..m)
            .map(|q| {
                Region::new(&problem, RegionConfig::new(m, q, 910 + i as u64).unwrap()).unwrap()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(920 + i as u64);
        let mut members_mid = 0;
        for _ in 0..10_000 {
            let a = DVector::from_fn(20, |j, _| center[j] + rng.random_range(-1.5..1.5));
            let inside: Vec<bool> = regions.iter().map(|r| r.contains(&a).unwrap()).collect();
            // inside[q - 1]: larger q is a smaller region.
            if inside.windows(2).any(|w| w[1] && !w[0]) {
                violations += 1;
            }
            members_mid += inside[9] as usize;
        }
        parts.push(format!("{est}: {members_mid}/10000 in the 50% region"));
    }
    outcome(
        violations == 0,
        format!(
            "{violations} nesting violations over 3 x 10000 points; {}",
            parts.join(", ")
        ),
    )
}

fn band_width(
    est: &EstimatorConfig,
    kernel: &KernelSpec,
    n: usize,
    seed: u64,
    on_inputs: bool,
) -> f64 {
    let sample = generate_synthetic(
        &TrueFunction::XSinX,
        n,
        (0.0, 10.0),
        &NoiseSpec::laplace(0.0, 0.5).unwrap(),
        seed,
    )
    .unwrap();
    let options = BuildOptions {
        allow_singular_gram: true,
        ..Default::default()
    };
    let problem =
        build_problem_with(est, kernel, &sample, &TransformGroup::SignChange, options).unwrap();
    let center = point_estimate(est, &problem, SolverSettings::default()).unwrap();
    let grid = if on_inputs {
        sample.inputs().to_vec()
    } else {
        default_grid(&sample)
    };
    let settings = RayBandSettings {
        levels: vec![0.9],
        m: 20,
        seed: derive_seed(seed, 1),
        n_rays: 300,
        half_width: 10.0,
    };
    bands_by_rays(&problem, &center, kernel, sample.inputs(), &grid, &settings)
        .unwrap()
        .bands[0]
        .average_width()
}

fn c10() -> Outcome {
    let krr = EstimatorConfig::krr(0.1);
    let svr = EstimatorConfig::Svr { c: 250.0, eps: 0.2 };
    let lasso = EstimatorConfig::Klasso { lambda: 1.0 };
    let rect = KernelSpec::rectangular(1.0 / 38.0).unwrap();
    let mut a_ok = true;
    let mut b_ok = true;
    let mut c_ok = true;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut c = Vec::new();
    for seed in [1u64, 2, 3] {
        let (wk, ws) = (
            band_width(&krr, &gaussian(), 20, seed, false),
            band_width(&svr, &gaussian(), 20, seed, false),
        );
        a_ok &= ws >= wk;
        a.push(format!("{ws:.2} vs {wk:.2}"));
        let (wr, wg) = (
            band_width(&lasso, &rect, 20, seed, true),
            band_width(&lasso, &gaussian(), 20, seed, true),
        );
        let (wr_dense, wg_dense) = (
            band_width(&lasso, &rect, 20, seed, false),
            band_width(&lasso, &gaussian(), 20, seed, false),
        );
        b_ok &= wr > wg;
        b.push(format!(
            "{wr:.2} vs {wg:.2} (dense grid {wr_dense:.2} vs {wg_dense:.2})"
        ));
        let (w10, w100) = (
            band_width(&lasso, &gaussian(), 10, seed, false),
            band_width(&lasso, &gaussian(), 100, seed, false),
        );
        c_ok &= w100 < w10;
        c.push(format!("{w100:.2} vs {w10:.2}"));
    }
    outcome(
        a_ok && b_ok && c_ok,
        format!(
            "90% bands, 3 datasets: (a) SVR >= KRR width [{}]; (b) rectangular > Gaussian KLASSO at the inputs [{}]; \
             (c) KLASSO n=100 < n=10 [{}]",
            a.join(", "),
            b.join(", "),
            c.join(", ")
        ),
    )
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored.
    let criteria: [Criterion; 10] = [
        ("exact coverage", c1),
        ("coverage across constructions", c2),
        ("noise-robust exactness", c3),
        ("uniform rank at the ideal vector", c4),
        ("star center", c5),
        ("ellipsoid containment", c6),
        ("subgradient correctness", c7),
        ("canonical-form fidelity", c8),
        ("region nesting", c9),
        ("qualitative band comparisons", c10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({:.1}s) {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
