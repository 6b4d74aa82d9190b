//! End-to-end verification of the chain `m ≥ C_g ≥ C_flat ≥ (V/β_n)^{(n-2)/n}`
//! for a scenario, plus sweeps over one scenario parameter.

mod report;
mod scenario;
mod sweep;

pub use report::{
    CapacityPath, ErrorEstimates, ExitStatus, HypothesisFlag, Hypotheses, Margins, Quantities, Report, Timings,
    Verdict,
};
pub use scenario::{parse_scenario, validate_scenario_file, Diagnostic, Mode, Numerics, Scenario, ScenarioError};
pub use sweep::{run_sweep, SweepRow, SweepTable};

use crate::capacity::{
    grid_capacity, radial_capacity_fn, radial_weighted_capacity, symmetrized_lower_bound, CapacityResult, GridParams,
    OuterCondition, Potential, Weight,
};
use crate::error::Error;
use crate::fields::{boundary_area_in_g, euclidean_volume, Estimate};
use crate::geom::{
    check_mean_convex, check_superharmonic, check_u_ge_one, minimality_residual, rhs_rpi, rhs_volumetric,
    ConformalFactor,
};
use crate::mass::{adm_extrapolate, MassSource};
use std::time::Instant;

/// Strict mode accepts a minimality residual up to `MINIMALITY_SAFETY · h`.
pub const MINIMALITY_SAFETY: f64 = 5.0;

/// Default mass radii start where the factor deviates from 1 by about this
/// much, so that the three-point fit is accurate to its square.
const MASS_DEVIATION: f64 = 1e-6;

/// Relative rounding allowance added to every margin's error estimate.
const ROUNDOFF: f64 = 1e-12;

/// A component failure, with the pipeline stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct RunError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

fn stage<T>(name: &'static str, r: crate::Result<T>) -> Result<T, RunError> {
    r.map_err(|source| RunError { stage: name, source })
}

/// Grid spacing used for the scenario.
pub fn resolution(s: &Scenario) -> f64 {
    s.numerics.h.unwrap_or(s.domain.circumradius() / 24.0)
}

/// Distance from the origin to the farthest point of Ω.
pub fn reach(s: &Scenario) -> f64 {
    s.domain.center().iter().map(|x| x * x).sum::<f64>().sqrt() + s.domain.circumradius()
}

/// The flux radii: `numerics.mass_radii`, or four doublings from the larger
/// of `16·reach` and the radius where `c r^{2-n} = 1e-6`.
pub fn mass_radii(s: &Scenario) -> Vec<f64> {
    if let Some(r) = &s.numerics.mass_radii {
        return r.clone();
    }
    let c = s.factor.total_charge().abs();
    let far = (c / MASS_DEVIATION).powf(1.0 / s.dim.nm2());
    let r0 = (16.0 * reach(s)).max(far).max(16.0 * s.factor.singular_radius());
    (0..4).map(|k| r0 * f64::from(1 << k)).collect()
}

/// Whether the capacities come from the radial closed form.
pub fn radial_path(s: &Scenario) -> bool {
    !s.numerics.force_grid && s.domain.is_origin_ball() && s.factor.monopole_coefficient().is_some()
}

/// Grid solver settings of the scenario.
pub fn grid_params(s: &Scenario) -> GridParams {
    GridParams {
        h: resolution(s),
        r_out: s.numerics.r_out.unwrap_or(16.0 * s.domain.circumradius()),
        growth: s.numerics.growth,
        outer: OuterCondition::Robin,
        preconditioner: s.numerics.preconditioner,
        tol: s.numerics.tol,
        estimate_error: s.numerics.estimate_error,
    }
}

/// Runs the whole pipeline. Component failures are returned as errors;
/// failed hypotheses and chain violations are part of the report.
pub fn run_scenario(s: &Scenario) -> Result<(Report, Timings), RunError> {
    let mut timings = Timings { scenario: s.name.clone(), ..Timings::default() };
    let mut clock = Instant::now();
    let mut lap = |t: &mut Timings, name: &str| {
        t.record(name, clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };
    let n = s.dim.n();
    let h = resolution(s);
    let u = &s.factor;
    let domain = &s.domain;

    let residual = stage("minimality", minimality_residual(u, domain, h))?;
    let sup = residual.sup_norm();
    let hypotheses = Hypotheses {
        superharmonic: (&stage("superharmonic", check_superharmonic(u, domain, h, 1.0 + u.total_charge()))?).into(),
        mean_convex: (&stage("mean_convex", check_mean_convex(domain, h))?).into(),
        minimal_boundary: HypothesisFlag { ok: sup <= MINIMALITY_SAFETY * h, worst: sup, tolerance: MINIMALITY_SAFETY * h },
        u_ge_one: (&stage("u_ge_one", check_u_ge_one(u, domain, h))?).into(),
    };
    lap(&mut timings, "hypotheses");
    let mut notes = Vec::new();
    let failed = hypotheses.failed();
    if !failed.is_empty() {
        notes.push(format!("failed hypotheses: {}", failed.join(", ")));
        if !hypotheses.minimal_boundary.ok {
            if let (ConformalFactor::Schwarzschild { mass, .. }, crate::fields::DomainSpec::Ball { radius, .. }) =
                (u, domain)
            {
                if domain.is_origin_ball() && *radius > crate::geom::horizon_radius(n, *mass) {
                    notes.push(
                        "the boundary encloses the horizon without being minimal; the volume bound it gives is weaker"
                            .into(),
                    );
                }
            }
            if u.total_charge() == 0.0 {
                notes.push("flat space: the boundary is not minimal and the mass vanishes".into());
            }
        }
    }
    if s.mode == Mode::Strict && !failed.is_empty() {
        let report = Report {
            scenario: s.name.clone(),
            n,
            mode: s.mode,
            h,
            hypotheses,
            quantities: None,
            margins: None,
            errors: None,
            capacity_path: None,
            mass: None,
            solver: Vec::new(),
            chain_holds: None,
            verdict: Verdict::HypothesisFailure,
            notes,
        };
        return Ok((report, timings));
    }

    let volume = match domain.analytic_volume() {
        Some(value) => Estimate { value, error: 0.0 },
        None => stage("volume", euclidean_volume(domain, h))?,
    };
    let rhs_vol = stage("volume", rhs_volumetric(&s.dim, volume.value))?;
    // d(rhs)/dV = (n-2)/n · rhs/V
    let rhs_err = s.dim.nm2() / n as f64 * rhs_vol / volume.value * volume.error;
    lap(&mut timings, "volume");

    let mass = stage("mass", adm_extrapolate(MassSource::Conformal(u), &mass_radii(s), reach(s)))?;
    if mass.non_monotone {
        notes.push("mass flux samples are not monotone; the largest-radius flux is reported".into());
    }
    lap(&mut timings, "mass");

    let radial = radial_path(s);
    let mut solver = Vec::new();
    let (c_g, c_flat, c_sym) = if radial {
        let r = domain.circumradius();
        let c_g = stage("capacity_g", radial_weighted_capacity(u, r))?;
        let c_flat = stage("capacity_flat", radial_capacity_fn(n, r, |_| 1.0))?;
        (c_g, c_flat, None)
    } else {
        let params = grid_params(s);
        let c_g = stage("capacity_g", grid_capacity(domain, &Weight::FactorSquared(u.clone()), &params))?;
        lap(&mut timings, "capacity_g");
        let c_flat = stage("capacity_flat", grid_capacity(domain, &Weight::Unit, &params))?;
        let Potential::Grid(phi) = &c_flat.potential else { unreachable!("grid solves return grid potentials") };
        let sym = stage("symmetrize", symmetrized_lower_bound(phi, domain))?;
        solver.push(c_g.stats);
        solver.push(c_flat.stats);
        (c_g, c_flat, Some(sym.value))
    };
    lap(&mut timings, "capacity_flat");

    let area = if radial || n == 3 { Some(stage("area", boundary_area_in_g(domain, u, h))?) } else { None };
    let rhs_rpi = area.map(|a| rhs_rpi(&s.dim, a)).transpose().map_err(|source| RunError { stage: "area", source })?;
    lap(&mut timings, "area");

    let quantities = Quantities {
        m: mass.value,
        V: volume.value,
        R: s.dim.ball_radius(volume.value),
        C_g: c_g.value,
        C_flat: c_flat.value,
        C_sym: c_sym,
        rhs_vol,
        rhs_rpi,
    };
    let margins = Margins {
        m_minus_C_g: mass.value - c_g.value,
        C_g_minus_C_flat: c_g.value - c_flat.value,
        C_flat_minus_rhs_vol: c_flat.value - rhs_vol,
    };
    let e_m = mass.error_estimate();
    let errors = ErrorEstimates {
        m: e_m,
        V: volume.error,
        C_g: c_g.error_estimate,
        C_flat: c_flat.error_estimate,
        rhs_vol: rhs_err,
        margins: [
            e_m + c_g.error_estimate + ROUNDOFF * (mass.value.abs() + c_g.value),
            c_g.error_estimate + c_flat.error_estimate + ROUNDOFF * (c_g.value + c_flat.value),
            c_flat.error_estimate + rhs_err + ROUNDOFF * (c_flat.value + rhs_vol),
        ],
    };
    let chain_holds = margins.as_array().iter().zip(&errors.margins).all(|(m, e)| *m >= -e);
    if let Some(sym) = c_sym {
        if sym > c_flat.value + errors.C_flat {
            notes.push(format!("symmetrized bound {sym} exceeds the flat capacity beyond its error estimate"));
        }
    }
    let verdict = if !hypotheses.all_ok() {
        Verdict::HypothesisFailure
    } else if !chain_holds {
        Verdict::ChainViolation
    } else {
        Verdict::Pass
    };
    check_finite(&c_g)?;
    check_finite(&c_flat)?;
    let report = Report {
        scenario: s.name.clone(),
        n,
        mode: s.mode,
        h,
        hypotheses,
        quantities: Some(quantities),
        margins: Some(margins),
        errors: Some(errors),
        capacity_path: Some(if radial { CapacityPath::Radial } else { CapacityPath::Grid }),
        mass: Some(mass),
        solver,
        chain_holds: Some(chain_holds),
        verdict,
        notes,
    };
    Ok((report, timings))
}

fn check_finite(c: &CapacityResult) -> Result<(), RunError> {
    if c.value.is_finite() && c.error_estimate.is_finite() {
        Ok(())
    } else {
        Err(RunError { stage: "capacity", source: Error::Precondition(format!("capacity {} is not finite", c.value)) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(factor: &str, radius: f64, mode: &str, n: usize) -> Scenario {
        scenario_h(factor, radius, mode, n, "")
    }

    fn scenario_h(factor: &str, radius: f64, mode: &str, n: usize, numerics: &str) -> Scenario {
        let text = format!(
            "name = \"t\"\nmode = \"{mode}\"\ndim = {n}\n[domain]\nkind = \"ball\"\nradius = {radius:?}\n[factor]\n{factor}\n{numerics}"
        );
        parse_scenario(&text, "t", None).unwrap()
    }

    #[test]
    fn schwarzschild_family_is_an_equality_case() {
        for n in [3usize, 4, 5] {
            for m in [0.5, 1.0, 2.0, 7.0] {
                let r_h = crate::geom::horizon_radius(n, m);
                let s = scenario(&format!("family = \"schwarzschild\"\nmass = {m:?}"), r_h, "strict", n);
                let (r, _) = run_scenario(&s).unwrap();
                assert_eq!(r.verdict, Verdict::Pass, "n={n} m={m}: {r:#?}");
                let q = r.quantities.as_ref().unwrap();
                assert!((q.m - q.C_g).abs() <= 1e-6 * m, "n={n} m={m}: {} vs {}", q.m, q.C_g);
                assert!(r.margins.as_ref().unwrap().as_array().iter().all(|v| *v >= -1e-6));
                assert!((q.rhs_vol - m / 2.0).abs() < 1e-12 * m);
                assert_eq!(q.rhs_vol, rhs_volumetric(&s.dim, q.V).unwrap());
                assert!((q.rhs_rpi.unwrap() / m - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn flat_ball_fails_minimality() {
        let s = scenario("family = \"flat\"", 1.0, "exploratory", 3);
        let (r, _) = run_scenario(&s).unwrap();
        assert!(!r.hypotheses.minimal_boundary.ok);
        assert_eq!(r.verdict, Verdict::HypothesisFailure);
        assert_eq!(r.exit_status(), ExitStatus::HypothesisFailure);
        let q = r.quantities.unwrap();
        assert_eq!(q.m, 0.0);
        assert!((q.C_g - 1.0).abs() < 1e-8 && (q.C_flat - 1.0).abs() < 1e-8);
        assert!(!r.chain_holds.unwrap());

        let strict = scenario("family = \"flat\"", 1.0, "strict", 3);
        let (r, _) = run_scenario(&strict).unwrap();
        assert_eq!(r.verdict, Verdict::HypothesisFailure);
        assert!(r.quantities.is_none());
    }

    #[test]
    fn outer_sphere_is_flagged_with_a_note() {
        // the residual there is 1/8, so 5h must be below it
        let s = scenario_h("family = \"schwarzschild\"\nmass = 2.0", 2.0, "exploratory", 3, "[numerics]\nh = 0.02\n");
        let (r, _) = run_scenario(&s).unwrap();
        assert!(!r.hypotheses.minimal_boundary.ok);
        assert!((r.hypotheses.minimal_boundary.worst - 0.125).abs() < 1e-9);
        assert!(r.notes.iter().any(|n| n.contains("weaker")));
        let q = r.quantities.unwrap();
        assert!((q.V - 32.0 * std::f64::consts::PI / 3.0).abs() < 1e-9);
        assert!((q.rhs_vol - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_are_reproducible() {
        let s = scenario("family = \"schwarzschild\"\nmass = 2.0", 1.0, "strict", 3);
        let a = run_scenario(&s).unwrap().0.to_json();
        let b = run_scenario(&s).unwrap().0.to_json();
        assert_eq!(a, b);
        assert!(a.contains("\"C_flat_minus_rhs_vol\""));
        assert!(a.contains("\"verdict\": \"PASS\""));
    }
}
