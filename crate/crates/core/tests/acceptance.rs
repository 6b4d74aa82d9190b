//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use penrose_core::capacity::{
    capacity_energy, flat_capacity_sphere, grid_capacity, radial_weighted_capacity, symmetrized_lower_bound,
    GridParams, OuterCondition, Potential, Weight,
};
use penrose_core::fields::{DomainSpec, Grid3, GridField};
use penrose_core::geom::{check_u_ge_one, horizon_radius, minimality_residual, ConformalFactor, Pole};
use penrose_core::harness::{parse_scenario, run_scenario, validate_scenario_file, ExitStatus, Mode, Verdict};
use penrose_core::mass::{adm_conformal, adm_extrapolate, adm_flux_general, mass_of_multipole, ConformalMetric, MassSource};
use penrose_core::symmetrize::polya_szego_check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> Outcome;

fn main() {
    let criteria: [(&str, f64, Check); 8] = [
        ("Schwarzschild equality chain", 1.0 * 16.0, schwarzschild_chain),
        ("grid capacity convergence", 60.0, grid_convergence),
        ("weighted grid capacity", 60.0, weighted_grid),
        ("Polya-Szego suite", 30.0, polya_szego_suite),
        ("capacity chain on solved potentials", 300.0, capacity_chain),
        ("ADM consistency", 30.0, adm_consistency),
        ("hypothesis validators", 30.0, validators),
        ("end-to-end verification", 120.0, end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs <= *budget;
        if !pass {
            failed += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] {}. {name}: {} ({secs:.1} s, budget {budget} s)", i + 1, out.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn scenario_text(n: usize, mass: f64) -> String {
    format!("name = \"s\"\ndim = {n}\n[domain]\nkind = \"horizon\"\n[factor]\nfamily = \"schwarzschild\"\nmass = {mass:?}\n")
}

/// C_g = m (rel 1e-6), C_flat = r_h^{n-2} (rel 1e-8), rhs_vol = m/2 (rel 1e-12).
fn schwarzschild_chain() -> Outcome {
    let mut worst = [0.0f64; 3];
    let mut slowest = 0.0f64;
    let mut all = true;
    for n in [3usize, 4, 5, 7] {
        for m in [0.5, 1.0, 2.0, 7.0] {
            let start = Instant::now();
            let s = parse_scenario(&scenario_text(n, m), "s", None).expect("valid scenario");
            let (r, _) = run_scenario(&s).expect("run succeeds");
            slowest = slowest.max(start.elapsed().as_secs_f64());
            let q = r.quantities.as_ref().expect("strict run with hypotheses ok");
            let r_h = horizon_radius(n, m);
            let errs = [
                (q.C_g / m - 1.0).abs(),
                (q.C_flat / r_h.powi(n as i32 - 2) - 1.0).abs(),
                (q.rhs_vol / (m / 2.0) - 1.0).abs(),
            ];
            for (w, e) in worst.iter_mut().zip(errs) {
                *w = w.max(e);
            }
            all &= r.verdict == Verdict::Pass;
        }
    }
    let pass = all && worst[0] < 1e-6 && worst[1] < 1e-8 && worst[2] < 1e-12 && slowest < 1.0;
    outcome(
        pass,
        format!(
            "16 cases, worst rel. errors C_g {:.1e} (1e-6), C_flat {:.1e} (1e-8), rhs_vol {:.1e} (1e-12); slowest case {slowest:.2} s",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn ball() -> DomainSpec {
    DomainSpec::ball(vec![0.0; 3], 1.0).unwrap()
}

fn params(h: f64, r_out: f64) -> GridParams {
    let mut p = GridParams::new(h, r_out);
    p.estimate_error = false;
    p
}

/// Flat ball(1): 1 within 3% at h = 1/24, error shrinking by >= 1.7 at 1/48.
fn grid_convergence() -> Outcome {
    let c24 = grid_capacity(&ball(), &Weight::Unit, &params(1.0 / 24.0, 16.0)).unwrap().value;
    let start = Instant::now();
    let c48 = grid_capacity(&ball(), &Weight::Unit, &params(1.0 / 48.0, 16.0)).unwrap().value;
    let fine = start.elapsed().as_secs_f64();
    let (e24, e48) = ((c24 - 1.0).abs(), (c48 - 1.0).abs());
    let ratio = e24 / e48;
    outcome(
        e24 < 0.03 && ratio >= 1.7 && fine < 60.0,
        format!("C(1/24) = {c24:.5}, C(1/48) = {c48:.5}, error ratio {ratio:.2} (>= 1.7), fine level {fine:.1} s"),
    )
}

/// Schwarzschild m = 2 weight u², ball(r_h = 1): 2 within 3% at h = 1/24.
fn weighted_grid() -> Outcome {
    let u = ConformalFactor::schwarzschild(3, 2.0).unwrap();
    let grid = grid_capacity(&ball(), &Weight::FactorSquared(u.clone()), &params(1.0 / 24.0, 16.0)).unwrap().value;
    let radial = radial_weighted_capacity(&u, 1.0).unwrap().value;
    let rel = (grid / 2.0 - 1.0).abs();
    outcome(
        rel < 0.03 && (radial / 2.0 - 1.0).abs() < 1e-6 && (grid / radial - 1.0).abs() < 0.03,
        format!("grid {grid:.5}, radial {radial:.9}, rel. error {rel:.2e} (3e-2)"),
    )
}

fn wendland(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 - r2).powi(4)
    } else {
        0.0
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Three Wendland bumps with seeded centres, widths and heights.
fn random_field(grid: Arc<Grid3>, seed: u64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<([f64; 3], f64, f64)> = (0..3)
        .map(|_| {
            let c = [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)];
            (c, rng.gen_range(0.3..0.7), rng.gen_range(0.5..1.0))
        })
        .collect();
    GridField::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, s, a)| a * wendland(norm2(&[x[0] - c[0], x[1] - c[1], x[2] - c[2]]) / (s * s)))
            .sum()
    })
}

/// Norms and level volumes bit-identical; E(f*) <= E(f) + C h with C set by
/// three times the worst discretisation defect of a radial field.
fn polya_szego_suite() -> Outcome {
    let steps = [1.0 / 12.0, 1.0 / 24.0, 1.0 / 48.0];
    let grids: Vec<Arc<Grid3>> = steps.iter().map(|&h| Arc::new(Grid3::uniform([0.0; 3], 1.25, h))).collect();
    let mut c = 0.0f64;
    for (g, &h) in grids.iter().zip(&steps) {
        let radial = GridField::from_fn(g.clone(), |x| wendland(norm2(x) / 0.64));
        c = c.max(polya_szego_check(&radial).unwrap().defect / h);
    }
    let c = 3.0 * c;
    let mut exact = true;
    let mut ok = true;
    let mut worst = [f64::NEG_INFINITY; 2];
    for (k, (g, &h)) in grids.iter().zip(&steps).enumerate().skip(1) {
        for seed in 0..20 {
            let p = polya_szego_check(&random_field(g.clone(), seed)).unwrap();
            exact &= p.norms.iter().all(|n| n.original == n.rearranged);
            exact &= p.level_map.iter().all(|l| l.cells == l.cells_star && l.volume == l.volume_star);
            ok &= p.defect <= c * h;
            worst[k - 1] = worst[k - 1].max(p.defect);
        }
    }
    outcome(
        exact && ok,
        format!(
            "20 fields at h = 1/24 and 1/48: norms and level volumes exact: {exact}; worst E(f*) - E(f) = {:+.4} (tol {:.4}), {:+.4} (tol {:.4})",
            worst[0],
            c * steps[1],
            worst[1],
            c * steps[2]
        ),
    )
}

/// `c (3a² - r²)/(2a³)` inside radius `a`, `c/r` outside: the potential of a
/// uniformly charged ball, superharmonic everywhere.
fn smeared(x: &[f64], p: &[f64; 3], c: f64, a: f64) -> f64 {
    let r = norm2(&[x[0] - p[0], x[1] - p[1], x[2] - p[2]]).sqrt();
    if r < a {
        c * (3.0 * a * a - r * r) / (2.0 * a * a * a)
    } else {
        c / r
    }
}

fn sampled(charges: Vec<([f64; 3], f64, f64)>) -> ConformalFactor {
    let grid = Grid3::uniform([0.0; 3], 2.5, 1.0 / 16.0);
    ConformalFactor::sampled_from_fn(grid, move |x| 1.0 + charges.iter().map(|(p, c, a)| smeared(x, p, *c, *a)).sum::<f64>())
}

fn pole(p: [f64; 3], c: f64) -> Pole {
    Pole::new(p.to_vec(), c)
}

/// Ten domains with factors `u >= 1`.
fn chain_cases() -> Vec<(&'static str, DomainSpec, ConformalFactor)> {
    let o = vec![0.0; 3];
    let schw = |m: f64| ConformalFactor::schwarzschild(3, m).unwrap();
    let multi = |poles: Vec<Pole>| ConformalFactor::multipole(3, poles).unwrap();
    vec![
        ("schwarzschild horizon", ball(), schw(2.0)),
        ("schwarzschild ellipsoid", DomainSpec::ellipsoid(o.clone(), vec![1.2, 1.0, 0.8]).unwrap(), schw(1.0)),
        ("schwarzschild outer ball", ball(), schw(0.5)),
        ("two poles", ball(), multi(vec![pole([0.4, 0.0, 0.0], 0.5), pole([-0.4, 0.0, 0.0], 0.5)])),
        (
            "three poles in an ellipsoid",
            DomainSpec::ellipsoid(o.clone(), vec![1.3, 1.0, 0.9]).unwrap(),
            multi(vec![pole([0.5, 0.0, 0.0], 0.3), pole([-0.3, 0.3, 0.0], 0.4), pole([0.0, -0.2, 0.3], 0.2)]),
        ),
        (
            "two balls",
            DomainSpec::union_of_balls(vec![(vec![0.7, 0.0, 0.0], 0.6), (vec![-0.7, 0.0, 0.0], 0.6)]).unwrap(),
            multi(vec![pole([0.7, 0.0, 0.0], 0.3), pole([-0.7, 0.0, 0.0], 0.3)]),
        ),
        (
            "offset ellipsoid",
            DomainSpec::ellipsoid(vec![0.2, 0.1, 0.0], vec![0.9, 1.1, 1.0]).unwrap(),
            multi(vec![pole([0.2, 0.1, 0.0], 0.6), pole([0.4, 0.5, 0.1], 0.2)]),
        ),
        ("sampled monopole", ball(), sampled(vec![([0.0; 3], 1.0, 0.5)])),
        (
            "sampled dipole",
            DomainSpec::ellipsoid(o.clone(), vec![1.2, 0.9, 0.9]).unwrap(),
            sampled(vec![([0.3, 0.0, 0.0], 0.4, 0.3), ([-0.3, 0.0, 0.0], 0.4, 0.3)]),
        ),
        (
            "sampled triple",
            ball(),
            sampled(vec![([0.3, 0.1, 0.0], 0.3, 0.35), ([-0.2, 0.25, 0.1], 0.3, 0.35), ([0.0, -0.3, -0.2], 0.2, 0.35)]),
        ),
    ]
}

/// `E_{u²}(φ) >= E_1(φ) >= sym(φ) - tol >= R - tol` on the `u²` potential,
/// with tol three times the Schwarzschild grid error at the same h.
fn capacity_chain() -> Outcome {
    let h = 1.0 / 24.0;
    let schw = ConformalFactor::schwarzschild(3, 2.0).unwrap();
    let reference = grid_capacity(&ball(), &Weight::FactorSquared(schw), &params(h, 16.0)).unwrap().value;
    let tol = 3.0 * (reference - 2.0).abs();
    let mut failures = Vec::new();
    let mut slack = f64::INFINITY;
    for (name, domain, u) in chain_cases() {
        let weight = Weight::FactorSquared(u.clone());
        assert!(check_u_ge_one(&u, &domain, h).unwrap().ok, "{name}: u < 1");
        let solved = grid_capacity(&domain, &weight, &params(h, 16.0 * domain.circumradius())).unwrap();
        let Potential::Grid(phi) = &solved.potential else { unreachable!() };
        let e_g = capacity_energy(phi, &weight, &domain, OuterCondition::Robin).unwrap();
        let e_1 = capacity_energy(phi, &Weight::Unit, &domain, OuterCondition::Robin).unwrap();
        let sym = symmetrized_lower_bound(phi, &domain).unwrap().value;
        let radius = (domain.analytic_volume().unwrap() / (4.0 * std::f64::consts::PI / 3.0)).cbrt();
        let flat = flat_capacity_sphere(3, radius).unwrap();
        let links = [e_g - e_1, e_1 - (sym - tol), (sym - tol) - (flat - tol)];
        slack = slack.min(links[1]).min(links[2]);
        if links[0] < -1e-12 * e_g || links[1] < 0.0 || links[2] < -tol {
            failures.push(format!("{name}: E_g {e_g:.4} E_1 {e_1:.4} sym {sym:.4} R {flat:.4}"));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("10 scenarios at h = 1/24, tol {tol:.4}; smallest slack {slack:.4}")
        } else {
            failures.join("; ")
        },
    )
}

/// Reduced and general flux agree at r = 100; extrapolation recovers 2Σc.
fn adm_consistency() -> Outcome {
    let mut worst_flux = 0.0f64;
    let mut worst_mass = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let count = rng.gen_range(1..=4);
        let poles: Vec<Pole> = (0..count)
            .map(|_| {
                let p = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
                pole(p, rng.gen_range(0.1..1.0))
            })
            .collect();
        let charges: Vec<f64> = poles.iter().map(|p| p.charge).collect();
        let exact = mass_of_multipole(&charges).unwrap();
        let u = ConformalFactor::multipole(3, poles).unwrap();
        let reduced = adm_conformal(&u, 100.0).unwrap();
        let general = adm_flux_general(&ConformalMetric(u.clone()), 100.0).unwrap();
        worst_flux = worst_flux.max((reduced / general - 1.0).abs());
        let est = adm_extrapolate(MassSource::Conformal(&u), &[32.0, 64.0, 128.0, 256.0], 1.0).unwrap();
        worst_mass = worst_mass.max((est.value / exact - 1.0).abs());
    }
    outcome(
        worst_flux < 5e-3 && worst_mass < 5e-3,
        format!("10 configurations: reduced vs general at r = 100 {worst_flux:.1e}, extrapolated vs 2 sum c {worst_mass:.1e} (5e-3)"),
    )
}

fn scenario_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// u >= 1 on strict scenarios, the violation 1 - 0.1/r is caught, horizon
/// residual within 5h and vanishing under refinement.
fn validators() -> Outcome {
    let mut strict = 0;
    let mut u_ok = true;
    let mut files: Vec<_> = std::fs::read_dir(scenario_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for path in files.iter().filter(|p| p.extension().is_some_and(|e| e == "toml")) {
        let s = validate_scenario_file(path).unwrap();
        if s.mode == Mode::Strict {
            strict += 1;
            u_ok &= check_u_ge_one(&s.factor, &s.domain, s.domain.circumradius() / 24.0).unwrap().ok;
        }
    }
    for (_, domain, u) in chain_cases() {
        strict += 1;
        u_ok &= check_u_ge_one(&u, &domain, 1.0 / 12.0).unwrap().ok;
    }

    let box_grid = Grid3::uniform([0.0; 3], 2.5, 1.0 / 16.0);
    let violation = ConformalFactor::sampled_from_fn(box_grid, |x| 1.0 - 0.1 / norm2(x).sqrt().max(0.05));
    let caught = !check_u_ge_one(&violation, &ball(), 1.0 / 12.0).unwrap().ok;

    let mut residual_ok = true;
    let mut sups = Vec::new();
    let mut exact_sups = Vec::new();
    let analytic = ConformalFactor::schwarzschild(3, 2.0).unwrap();
    for h in [1.0 / 6.0, 1.0 / 12.0, 1.0 / 24.0] {
        let a = minimality_residual(&analytic, &ball(), h).unwrap().sup_norm();
        let grid = Grid3::uniform([0.0; 3], 1.5, h);
        let sampled = ConformalFactor::sampled_from_fn(grid, |x| 1.0 + 1.0 / norm2(x).sqrt().max(0.25));
        let s = minimality_residual(&sampled, &ball(), h).unwrap().sup_norm();
        residual_ok &= a <= 5.0 * h && s <= 5.0 * h;
        sups.push(s);
        exact_sups.push(a);
    }
    let refines = [&sups, &exact_sups].iter().all(|v| v.windows(2).all(|w| w[1] < 0.6 * w[0]));
    outcome(
        u_ok && caught && residual_ok && refines,
        format!(
            "u >= 1 on {strict} strict scenarios: {u_ok}; 1 - 0.1/r caught: {caught}; horizon residual {:.1e}, {:.1e}, {:.1e} (sampled factor {:.1e}, {:.1e}, {:.1e}) at h = 1/6, 1/12, 1/24",
            exact_sups[0], exact_sups[1], exact_sups[2], sups[0], sups[1], sups[2]
        ),
    )
}

/// Strict Schwarzschild passes; exploratory flat space fails minimality
/// with exit code 2.
fn end_to_end() -> Outcome {
    let s = validate_scenario_file(&scenario_dir().join("schwarzschild.toml")).unwrap();
    let (r, _) = run_scenario(&s).unwrap();
    let margins = r.margins.as_ref().unwrap().as_array();
    let errors = r.errors.as_ref().unwrap().margins;
    let within = margins.iter().zip(errors).all(|(m, e)| *m >= -e);
    let pass = r.verdict == Verdict::Pass && r.exit_status() == ExitStatus::Pass && within;

    let flat = validate_scenario_file(&scenario_dir().join("flat_ball.toml")).unwrap();
    let (f, _) = run_scenario(&flat).unwrap();
    let flagged = !f.hypotheses.minimal_boundary.ok && f.exit_status().code() == 2;
    outcome(
        pass && flagged,
        format!(
            "Schwarzschild {:?}, margins {:+.1e} {:+.1e} {:+.1e}; flat ball minimal_boundary failed: {flagged}, exit {}",
            r.verdict,
            margins[0],
            margins[1],
            margins[2],
            f.exit_status().code()
        ),
    )
}
