//! The ten acceptance criteria, run one after another so that each runtime
//! budget is measured without contention. Prints one line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use strichartz::ascent::{ascent_time_grid, extremiser_ascent, gaussian_fit, StepPolicy};
use strichartz::datum::{GaussianDatum, GaussianMixture, RandomData};
use strichartz::grid::GridField;
use strichartz::mb::{
    critical_difference, critical_point_test, mb_residual, pq_maps, sample_collisions, CriticalSampling,
    PERTURBATION_RMS_THRESHOLD,
};
use strichartz::oracle::{oracle_check, oracle_interaction, oracle_lhs_conjugate, oracle_lhs_dispersive};
use strichartz::special::{check_duplication_consistency, ot_classical_constant, ot_general_constant, pv_constant};
use strichartz::spectral::SpaceTimeGrid;
use strichartz::verify::{complete_monotonicity_check, grid_for, heat_flow_curve, lhs};
use strichartz::weights::{
    closed_mass_conjugate, closed_mass_plain, compute_interaction, monte_carlo_mass_plain, quadrature_mass_conjugate,
    EstimateSpec, SphereRule,
};
use strichartz::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn normals(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn duplication() -> Result<Outcome> {
    let mut worst_dup = 0f64;
    let mut worst_rel = 0f64;
    for d in 2..=10usize {
        worst_dup = worst_dup.max(check_duplication_consistency(d)?);
        let df = d as f64;
        let classical = ot_general_constant(d, (2.0 - df) / 4.0)? * (2.0 * PI).powi(2 * d as i32);
        worst_rel = worst_rel.max(rel(classical, ot_classical_constant(d)?));
        worst_rel = worst_rel.max(rel(ot_general_constant(d, (3.0 - df) / 4.0)?, pv_constant(d)?));
    }
    outcome(
        worst_dup <= 1e-13 && worst_rel <= 1e-12,
        format!("max |OT(d,0)-C(d)|/C(d) = {worst_dup:.2e}, max endpoint mismatch = {worst_rel:.2e}"),
    )
}

fn identity_1d() -> Result<Outcome> {
    let spec = EstimateSpec::conjugate(1, 0.25)?;
    let mut worst = 0f64;
    for k in 0..32u64 {
        let u = GaussianMixture::random(1, RandomData::default(), 1000 + 2 * k)?;
        let v = GaussianMixture::random(1, RandomData::default(), 1001 + 2 * k)?;
        let g = grid_for(&[&u, &v], 2, 1.05)?;
        let (fu, fv) = (u.render(g)?, v.render(g)?);
        let st = SpaceTimeGrid::fit(&[&fu, &fv], 2)?;
        let ratio = lhs(&spec, &fu, &fv, &st)? / (fu.l2_mass() * fv.l2_mass());
        worst = worst.max((ratio - 0.5).abs());
    }
    outcome(worst <= 1e-6, format!("max |ratio - 1/2| over 32 pairs = {worst:.2e}"))
}

fn benchmarks() -> Result<Outcome> {
    let r = strichartz::verify::verify_foschi_benchmarks(16, 300, RandomData::default(), 1e-4)?;
    let gauss: Vec<String> = r
        .entries
        .iter()
        .filter(|e| e.datum == "gaussian")
        .map(|e| format!("d={} L{}: {:.10} (target {:.10})", e.d, e.exponent, e.ratio, e.target))
        .collect();
    let random_max = |d: usize| {
        r.entries
            .iter()
            .filter(|e| e.d == d && e.datum != "gaussian")
            .map(|e| e.ratio / e.target)
            .fold(0.0, f64::max)
    };
    outcome(
        r.pass,
        format!(
            "{}; random/target max d=1 {:.4}, d=2 {:.4}",
            gauss.join(", "),
            random_max(1),
            random_max(2)
        ),
    )
}

fn lemma_masses() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_q = 0f64;
    for k in 0..20 {
        let d = 2 + k % 2;
        let sigma = [0.0, 0.25, 0.5][k % 3];
        let (z1, z2) = (normals(&mut rng, d), normals(&mut rng, d));
        let q = quadrature_mass_conjugate(&z1, &z2, sigma, d, SphereRule::default())?;
        worst_q = worst_q.max(rel(q, closed_mass_conjugate(&z1, &z2, sigma, d)?));
    }
    let mut worst_mc = 0f64;
    for (k, (d, beta)) in [(2, 0.0), (2, 0.25), (2, 0.5), (3, 0.0), (3, 0.25), (3, 0.5)].into_iter().enumerate() {
        let (z1, z2) = (normals(&mut rng, d), normals(&mut rng, d));
        let mc = monte_carlo_mass_plain(&z1, &z2, beta, d, 1_000_000, 40 + k as u64)?;
        worst_mc = worst_mc.max(rel(mc, closed_mass_plain(&z1, &z2, beta, d)?));
    }
    outcome(
        worst_q <= 1e-6 && worst_mc <= 5e-3,
        format!("sphere rule max rel {worst_q:.2e} (20 inputs), Monte Carlo max rel {worst_mc:.2e} (6 inputs, 1e6 samples)"),
    )
}

fn oracle_lattice() -> Result<Outcome> {
    let mut worst = 0f64;
    let mut count = 0;
    for d in [2usize, 3] {
        let df = d as f64;
        for e in [(2.0 - df) / 4.0, 0.0, (3.0 - df) / 4.0, (4.0 - df) / 4.0] {
            for spec in [EstimateSpec::conjugate(d, e)?, EstimateSpec::plain(d, e)?] {
                for a_re in [-0.5, -1.0, -2.0] {
                    for shifted in [false, true] {
                        let a = C64::new(a_re, 0.3);
                        let b: Vec<C64> = (0..d)
                            .map(|k| C64::new(if shifted && k == 0 { 1.0 } else { 0.0 }, 0.2 - 0.1 * k as f64))
                            .collect();
                        let r = oracle_check(&spec, a, &b)?;
                        worst = worst.max(r.relative_deficit.abs());
                        count += 1;
                    }
                }
            }
        }
    }
    outcome(worst <= 1e-8, format!("max relative deficit {worst:.2e} over {count} cases"))
}

fn grid_vs_oracle() -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut pass = true;
    let cases = [
        EstimateSpec::conjugate(1, 0.25)?,
        EstimateSpec::conjugate(1, 0.5)?,
        EstimateSpec::conjugate(2, 0.0)?,
        EstimateSpec::conjugate(2, 0.25)?,
        EstimateSpec::plain(2, 0.25)?,
        EstimateSpec::plain(2, 0.5)?,
    ];
    for spec in cases {
        let d = spec.d;
        let a = C64::new(-0.8, 0.4);
        let b: Vec<C64> = (0..d).map(|k| C64::new(0.3 - 0.5 * k as f64, 0.2)).collect();
        let datum = GaussianDatum::new(a, b.clone(), C64::new(0.0, 0.0))?;
        let p = spec.kernel_power();
        let want_i = oracle_interaction(-2.0 * a.re, &datum.b_re(), p, d)?;
        let want_l = match spec.family {
            strichartz::weights::Family::Conjugate { sigma } => oracle_lhs_conjugate(a, &b, sigma, d)?,
            strichartz::weights::Family::Plain { beta } => oracle_lhs_dispersive(a, &b, beta, d)?,
        };
        let coarse = grid_for(&[&datum.to_mixture()], 2, 1.05)?;
        let mut errs = Vec::new();
        for g in [coarse, coarse.refined()?] {
            let f = datum.render(g)?;
            let st = SpaceTimeGrid::fit(&[&f], 2)?;
            let e_l = rel(lhs(&spec, &f, &f, &st)?, want_l);
            let e_i = rel(compute_interaction(&f, &f, p)?, want_i);
            errs.push(e_l.max(e_i));
        }
        pass &= errs[1] <= 1e-3;
        lines.push(format!("d={d} {:?}: {:.1e}->{:.1e}", spec.family, errs[0], errs[1]));
    }
    outcome(pass, lines.join("; "))
}

/// Classification of one heat-flow trial.
enum Trial {
    /// Nonincreasing with every difference order strictly of the right sign.
    Strict,
    /// Nonincreasing and the sign pattern holds within the noise slack only.
    WithinSlack,
    Failed,
}

fn heat_trial(spec: &EstimateSpec, seed: u64) -> Result<(Trial, f64)> {
    let d = spec.d;
    let u = GaussianMixture::random(d, RandomData::default(), seed)?;
    let v = GaussianMixture::random(d, RandomData::default(), seed + 50_000)?;
    let rho_max = 0.5;
    let (uh, vh) = (u.heat(rho_max)?, v.heat(rho_max)?);
    let g = grid_for(&[&u, &v, &uh, &vh], 2, 1.05)?;
    let rho: Vec<f64> = (1..=16).map(|j| rho_max * j as f64 / 16.0).collect();
    let curve = heat_flow_curve(spec, &u.render(g)?, &v.render(g)?, &rho, 1e-9)?;
    let orders = complete_monotonicity_check(&curve, 3)?;
    let depth = curve.deficit[0] / curve.slack;
    let trial = if !curve.nonincreasing || orders.iter().any(|o| !o.pass) {
        Trial::Failed
    } else if orders.iter().all(|o| o.worst < 0.0) {
        Trial::Strict
    } else {
        Trial::WithinSlack
    };
    Ok((trial, depth))
}

fn heat_flow() -> Result<Outcome> {
    let mut strict = [0usize; 2];
    let mut slack = [0usize; 2];
    let mut failed = [0usize; 2];
    let specs = [EstimateSpec::conjugate(1, 0.5)?, EstimateSpec::plain(2, 0.5)?];
    for (i, spec) in specs.iter().enumerate() {
        for k in 0..32u64 {
            match heat_trial(spec, 7000 + k)?.0 {
                Trial::Strict => strict[i] += 1,
                Trial::WithinSlack => slack[i] += 1,
                Trial::Failed => failed[i] += 1,
            }
        }
    }
    let total_strict = strict[0] + strict[1];
    let pass = failed == [0, 0] && total_strict as f64 >= 0.95 * 64.0;
    outcome(
        pass,
        format!(
            "strict sign pattern in {total_strict}/64 (d=1 sigma=1/2: {}/{} strict, {} within slack; d=2 beta=1/2: {}/{} strict, {} within slack), failures {}",
            strict[0],
            32,
            slack[0],
            strict[1],
            32,
            slack[1],
            failed[0] + failed[1]
        ),
    )
}

fn maxwell_boltzmann() -> Result<Outcome> {
    let g2 = GaussianDatum::new(C64::new(-0.7, 0.4), vec![C64::new(0.3, 0.5), C64::new(-0.1, 0.2)], C64::new(0.1, -0.2))?;
    let qs = sample_collisions(2, 10_000, 1.0, 2024)?;
    let gauss = mb_residual(&|x: &[f64]| g2.eval(x), &qs)?;
    let perturbed = mb_residual(
        &|x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            C64::new((-r2).exp() * (1.0 + 0.1 * x[0].cos()), 0.0)
        },
        &qs,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut cons, mut prod) = (0f64, 0f64);
    for k in 0..10_000 {
        let d = 2 + k % 3;
        let (x, y) = (normals(&mut rng, d), normals(&mut rng, d));
        let (p, q) = pq_maps(&x, &y)?;
        let sq = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();
        let scale = sq(&x) + sq(&y);
        for i in 0..d {
            cons = cons.max((p[i] + q[i] - x[i] - y[i]).abs() / scale.sqrt());
        }
        cons = cons.max((sq(&p) + sq(&q) - scale).abs() / scale);
        let b = (0..d).map(|i| C64::new(0.2 * i as f64 - 0.3, 0.4)).collect();
        let g = GaussianDatum::new(C64::new(-0.6, 0.3), b, C64::new(0.0, 0.0))?;
        let before = g.eval(&x) * g.eval(&y);
        prod = prod.max((before - g.eval(&p) * g.eval(&q)).norm() / before.norm());
    }
    outcome(
        gauss.max <= 1e-10 && perturbed.rms > PERTURBATION_RMS_THRESHOLD && cons <= 1e-14 && prod <= 1e-12,
        format!(
            "Gaussian max {:.1e}; perturbed rms {:.3e} > {:.0e}; pq conservation {cons:.1e}, product invariance {prod:.1e}",
            gauss.max, perturbed.rms, PERTURBATION_RMS_THRESHOLD
        ),
    )
}

fn critical_dichotomy() -> Result<Outcome> {
    let planar = critical_point_test(2, -1.0, &[0.0, 0.0], &[0.0, 1.0, 2.0, 4.0], CriticalSampling::default())?;
    let j0 = planar[0];
    let flat = planar.iter().all(|j| {
        let se = (j.stderr * j.stderr + j0.stderr * j0.stderr).sqrt();
        // a few ulps of rounding on top of the quadrature error estimate
        (j.value - j0.value).abs() <= 3.0 * se + 4.0 * f64::EPSILON * j0.value
    });
    let diff = critical_difference(3, -1.0, &[0.0; 3], 0.0, 1.0, CriticalSampling::default())?;
    let j1 = critical_point_test(3, -1.0, &[0.0; 3], &[1.0], CriticalSampling::default())?[0];
    let rel_se = j1.stderr / j1.value;
    outcome(
        flat && diff.value > 3.0 * diff.stderr && rel_se <= 1e-3,
        format!(
            "d=2 J = {:.15} at R = 0,1,2,4 (se {:.1e}); d=3 J(1)-J(0) = {:.4} +- {:.1e}, relative se of J(1) {rel_se:.1e}",
            j0.value, j0.stderr, diff.value, diff.stderr
        ),
    )
}

fn adaptive_ratio(spec: &EstimateSpec, field: &GridField) -> Result<f64> {
    let st = SpaceTimeGrid::fit(&[field], 2)?;
    let l = lhs(spec, field, field, &st)?;
    Ok(l / (spec.constant()? * compute_interaction(field, field, spec.kernel_power())?))
}

fn ascent() -> Result<Outcome> {
    let spec = EstimateSpec::conjugate(2, 0.0)?;
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 0..4u64 {
        let u = GaussianMixture::random(2, RandomData::default(), 900 + seed)?;
        let g = grid_for(&[&u], 2, 1.1)?;
        let f = u.render(g)?;
        let st = ascent_time_grid(&spec, &f)?;
        let out = extremiser_ascent(&spec, &f, 200, StepPolicy::PowerIteration, &st)?;
        let ratio = adaptive_ratio(&spec, &out.field)?;
        let fit = gaussian_fit(&out.field)?.residual;
        pass &= ratio >= 0.99 && fit <= 1e-2;
        lines.push(format!(
            "start {seed}: {:.4}->{ratio:.8} in {} steps, fit {fit:.1e}",
            out.history[0],
            out.history.len() - 1
        ));
    }
    let gauss = GaussianDatum::centred(2, -1.0)?.to_mixture();
    let g = grid_for(&[&gauss], 2, 1.1)?;
    let f = gauss.render(g)?;
    let st = SpaceTimeGrid::fit(&[&f], 2)?.fixed();
    let out = extremiser_ascent(&spec, &f, 20, StepPolicy::PowerIteration, &st)?;
    let drift = out.history.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    pass &= drift <= 1e-6;
    lines.push(format!("Gaussian start max |ratio - 1| {drift:.1e}"));
    outcome(pass, lines.join("; "))
}

type Criterion = (&'static str, fn() -> Result<Outcome>, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("duplication consistency", duplication, Duration::from_secs(1)),
        ("1d identity", identity_1d, Duration::from_secs(30)),
        ("Gaussian benchmarks", benchmarks, Duration::from_secs(60)),
        ("lemma masses", lemma_masses, Duration::from_secs(60)),
        ("Gaussian equality lattice", oracle_lattice, Duration::from_secs(30)),
        ("grid vs oracle", grid_vs_oracle, Duration::from_secs(300)),
        ("heat-flow monotonicity", heat_flow, Duration::from_secs(600)),
        ("MB equation", maxwell_boltzmann, Duration::from_secs(30)),
        ("critical-point dichotomy", critical_dichotomy, Duration::from_secs(300)),
        ("extremiser ascent", ascent, Duration::from_secs(900)),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:2} {} [{name}] {:.1}s/{}s: {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
