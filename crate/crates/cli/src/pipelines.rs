//! The seven pipelines. Each returns its checks and the artifacts to write.

use std::sync::Arc;

use lagrangeflow_core::eulerian::{riemann_exact, solve, EulerianTrajectory};
use lagrangeflow_core::export;
use lagrangeflow_core::flow_map::{
    averaged_correspondence_error, averaged_density, correspondence_error, label_mesh, reconstruct, recovered_density,
};
use lagrangeflow_core::flux::{
    breakdown_time, flux_from_potential, normalize_with, potential_from_flux, velocity_law, FluxSpec, Interval,
    NormalizeOptions, VelocityLaw,
};
use lagrangeflow_core::reference::{characteristics_density, dalembert};
use lagrangeflow_core::systems::{
    euler_lagrange_residual, hyperbolicity_check, reconstruct_system, solve_system, system_action, SystemKind,
    SystemState, SystemTrajectory,
};
use lagrangeflow_core::temple::{init_temple, solve_temple, TempleState, TempleTrajectory};
use lagrangeflow_core::variational::{
    action_value, conserved_quantity_residual, extremality_study, first_variation, node_values, PerturbationField,
    SpacetimeMap,
};
use lagrangeflow_core::{Boundary, GridFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{GridConfig, Horizon, Pipeline, Profile, Scenario, Tolerances};
use crate::report::{Check, CorrespondenceReport, ExtremalityDocument};
use crate::RunError;

/// A named file and its contents.
pub type Artifact = (String, Vec<u8>);

pub struct Outcome {
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
}

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const HYPERBOLICITY_SAMPLES: usize = 1000;
pub const HYPERBOLICITY_SEED: u64 = 0x5EED;

struct Bounds<'a>(&'a Tolerances);

impl Bounds<'_> {
    fn mass_drift(&self) -> f64 {
        self.0.mass_drift.unwrap_or(1e-12)
    }
    fn tv_increase(&self) -> f64 {
        self.0.tv_increase.unwrap_or(1e-12)
    }
    fn max_principle(&self) -> f64 {
        self.0.max_principle.unwrap_or(1e-12)
    }
    fn oracle_l1_per_dx(&self) -> f64 {
        self.0.oracle_l1_per_dx.unwrap_or(5.0)
    }
    fn l1_error(&self) -> f64 {
        self.0.l1_error.unwrap_or(0.02)
    }
    fn refinement_ratio(&self) -> f64 {
        self.0.refinement_ratio.unwrap_or(1.5)
    }
    fn shock_cells(&self) -> f64 {
        self.0.shock_cells.unwrap_or(2.0)
    }
    fn extremality_ratio(&self) -> f64 {
        self.0.extremality_ratio.unwrap_or(10.0)
    }
    fn conserved_order(&self) -> f64 {
        self.0.conserved_order.unwrap_or(0.8)
    }
    fn el_ratio(&self) -> f64 {
        self.0.el_ratio.unwrap_or(1.7)
    }
    fn hyperbolicity(&self) -> f64 {
        self.0.hyperbolicity.unwrap_or(1e-12)
    }
    fn dalembert_l2(&self) -> f64 {
        self.0.dalembert_l2.unwrap_or(1e-2)
    }
    fn roundtrip(&self) -> f64 {
        self.0.roundtrip.unwrap_or(1e-8)
    }
}

pub fn execute(s: &Scenario) -> Result<Outcome, RunError> {
    match s.pipeline {
        Pipeline::Eulerian => eulerian_pipeline(s),
        Pipeline::Temple => temple_pipeline(s),
        Pipeline::Correspondence => correspondence_pipeline(s),
        Pipeline::Variational => variational_pipeline(s),
        Pipeline::Gas => system_pipeline(s, SystemKind::Gas),
        Pipeline::Nlwe => system_pipeline(s, SystemKind::Nlwe),
        Pipeline::MetricRoundtrip => roundtrip_pipeline(s),
    }
}

fn csv(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory cannot fail");
    buf
}

fn json(value: &impl serde::Serialize) -> Vec<u8> {
    let mut buf = serde_json::to_vec_pretty(value).expect("report types serialise");
    buf.push(b'\n');
    buf
}

fn relative_drift(now: f64, then: f64, scale: f64) -> f64 {
    (now - then).abs() / scale.max(f64::MIN_POSITIVE)
}

/// Bit-level comparison; the count of differing cells.
fn changed_cells(a: &GridFunction, b: &GridFunction) -> f64 {
    a.values.iter().zip(&b.values).filter(|(x, y)| x.to_bits() != y.to_bits()).count() as f64
}

fn uniform_outputs(t_final: f64, levels: usize) -> Vec<f64> {
    (1..levels).map(|k| t_final * k as f64 / levels as f64).collect()
}

fn grid(s: &Scenario) -> &GridConfig {
    s.grid.as_ref().expect("validated")
}

fn initial(s: &Scenario) -> &Profile {
    s.initial.as_ref().expect("validated")
}

/// Normalised flux and the initial data in normalised coordinates.
struct ScalarSetup {
    spec: FluxSpec,
    vel: Arc<VelocityLaw>,
    t_final: f64,
    smooth_horizon: f64,
}

fn flux_spec(s: &Scenario) -> Result<FluxSpec, RunError> {
    let raw = s.flux.as_ref().expect("validated").raw();
    let range = match (s.data_range, &s.initial) {
        (Some(r), _) => r,
        (None, Some(p)) => p.range(),
        (None, None) => unreachable!("validated"),
    };
    let range = if range[0] < range[1] {
        range
    } else {
        let pad = 0.1 * range[0].abs().max(1.0);
        [range[0] - pad, range[1] + pad]
    };
    let opts = NormalizeOptions {
        margin: None,
        shift_l: s.shift_l,
        shift_k: s.shift_k,
    };
    Ok(normalize_with(raw, Interval::new(range[0], range[1])?, opts)?)
}

fn scalar_setup(s: &Scenario) -> Result<ScalarSetup, RunError> {
    let spec = flux_spec(s)?;
    let vel = Arc::new(velocity_law(&spec)?);
    let rho0 = density(s, &spec, grid(s).n)?;
    let smooth_horizon = if initial(s).is_smooth() {
        breakdown_time(&spec, &rho0)
    } else {
        0.0
    };
    let t_final = match s.t_final.as_ref().expect("validated") {
        Horizon::Absolute(t) => *t,
        Horizon::Breakdown(b) => {
            if !smooth_horizon.is_finite() {
                return Err(RunError::Config("data never break down; give an absolute t_final".into()));
            }
            b.breakdown_fraction * smooth_horizon
        }
    };
    if let Some(t) = s.times.iter().find(|t| **t > t_final) {
        return Err(RunError::Config(format!("output time {t} is after t_final = {t_final}")));
    }
    Ok(ScalarSetup {
        spec,
        vel,
        t_final,
        smooth_horizon,
    })
}

/// Initial density on `n` cells, shifted into the normalised range.
fn density(s: &Scenario, spec: &FluxSpec, n: usize) -> Result<GridFunction, RunError> {
    let raw = grid(s).sample(initial(s), n)?;
    Ok(raw.with_values(raw.values.iter().map(|r| r + spec.shift_l).collect()))
}

/// Normalised initial density as a function, for the characteristics oracle.
fn density_fn<'a>(s: &'a Scenario, spec: &'a FluxSpec) -> impl Fn(f64) -> f64 + 'a {
    let (profile, domain, shift) = (initial(s), grid(s).domain, spec.shift_l);
    move |x: f64| {
        let d = domain[1] - domain[0];
        let x = match grid(s).boundary() {
            Boundary::Periodic => domain[0] + (x - domain[0]).rem_euclid(d),
            Boundary::ConstantExtension => x.clamp(domain[0], domain[1]),
        };
        profile.eval(x, domain) + shift
    }
}

fn eulerian_checks(
    s: &Scenario,
    setup: &ScalarSetup,
    rho0: &GridFunction,
    traj: &EulerianTrajectory,
    checks: &mut Vec<Check>,
) {
    let b = Bounds(&s.tolerances);
    let h = &traj.hygiene;
    checks.push(Check::at_most("eulerian.tv_increase", h.max_tv_increase.max(0.0), b.tv_increase()));
    let overshoot = (h.max_value - rho0.max()).max(rho0.min() - h.min_value).max(0.0);
    checks.push(Check::at_most("eulerian.max_principle", overshoot, b.max_principle()));
    if rho0.boundary == Boundary::Periodic {
        let drift = relative_drift(traj.last().integral(), rho0.integral(), rho0.integral().abs());
        checks.push(Check::at_most("eulerian.mass_drift", drift, b.mass_drift()));
    }
    let t = setup.t_final;
    match *initial(s) {
        Profile::Riemann { left, right, at } if rho0.boundary == Boundary::ConstantExtension => {
            let (l, r) = (left + setup.spec.shift_l, right + setup.spec.shift_l);
            let exact = rho0.with_values(
                (0..rho0.len())
                    .map(|i| riemann_exact(&setup.spec, l, r, (rho0.center(i) - at) / t))
                    .collect(),
            );
            let err = traj.last().l1_distance(&exact);
            checks.push(Check::at_most("eulerian.riemann_l1", err, b.oracle_l1_per_dx() * rho0.dx));
        }
        _ if t < setup.smooth_horizon => {
            let f = density_fn(s, &setup.spec);
            let exact = rho0.with_values(
                (0..rho0.len())
                    .map(|i| characteristics_density(&setup.spec, &f, rho0.center(i), t))
                    .collect(),
            );
            let err = traj.last().l1_distance(&exact);
            checks.push(Check::at_most("eulerian.characteristics_l1", err, b.oracle_l1_per_dx() * rho0.dx));
        }
        _ => {}
    }
}

fn eulerian_pipeline(s: &Scenario) -> Result<Outcome, RunError> {
    let setup = scalar_setup(s)?;
    let rho0 = density(s, &setup.spec, grid(s).n)?;
    let traj = solve(&setup.spec, &rho0, setup.t_final, s.cfl, &s.times)?;
    let mut checks = Vec::new();
    eulerian_checks(s, &setup, &rho0, &traj, &mut checks);
    Ok(Outcome {
        checks,
        artifacts: vec![("solution_rho.csv".into(), csv(|w| export::write_density_csv(w, &traj)))],
    })
}

fn temple_checks(s: &Scenario, traj: &TempleTrajectory, checks: &mut Vec<Check>) {
    let b = Bounds(&s.tolerances);
    let (first, last) = (&traj.states[0], traj.last());
    if first.eta.boundary == Boundary::Periodic {
        let drift = relative_drift(last.eta.integral(), first.eta.integral(), first.eta.integral());
        checks.push(Check::at_most("temple.mass_drift", drift, b.mass_drift()));
        let label_mass = relative_drift(mass(last), mass(first), mass(first));
        checks.push(Check::at_most("temple.label_mass_drift", label_mass, b.mass_drift()));
    }
    let changed = traj.states.iter().map(|st| changed_cells(&st.v, &first.v)).fold(0.0, f64::max);
    checks.push(Check::at_most("temple.v_changed_cells", changed, 0.0));
}

/// `∑ v·Δx` over the cells, which equals `∫ ρ dy` on the image.
fn mass(state: &TempleState) -> f64 {
    state.v.integral()
}

fn temple_pipeline(s: &Scenario) -> Result<Outcome, RunError> {
    let setup = scalar_setup(s)?;
    let rho0 = density(s, &setup.spec, grid(s).n)?;
    let traj = solve_temple(&init_temple(setup.vel.clone(), &rho0)?, setup.t_final, s.cfl, &s.times)?;
    let mut checks = Vec::new();
    temple_checks(s, &traj, &mut checks);
    Ok(Outcome {
        checks,
        artifacts: vec![("solution_temple.csv".into(), csv(|w| export::write_temple_csv(w, &traj)))],
    })
}

struct CorrespondenceRun {
    rho0: GridFunction,
    eulerian: EulerianTrajectory,
    lagrangian: TempleTrajectory,
    maps: Vec<lagrangeflow_core::flow_map::FlowMap>,
}

fn correspondence_run(s: &Scenario, setup: &ScalarSetup, n: usize) -> Result<CorrespondenceRun, RunError> {
    let rho0 = density(s, &setup.spec, n)?;
    let eulerian = solve(&setup.spec, &rho0, setup.t_final, s.cfl, &s.times)?;
    let labels = label_mesh(&rho0, &setup.vel, setup.t_final);
    let lagrangian = solve_temple(&init_temple(setup.vel.clone(), &labels)?, setup.t_final, s.cfl, &s.times)?;
    let maps = reconstruct(&lagrangian)?.maps;
    Ok(CorrespondenceRun {
        rho0,
        eulerian,
        lagrangian,
        maps,
    })
}

fn correspondence_pipeline(s: &Scenario) -> Result<Outcome, RunError> {
    let b = Bounds(&s.tolerances);
    let setup = scalar_setup(s)?;
    let n = grid(s).n;
    let run = correspondence_run(s, &setup, n)?;
    let fine = correspondence_run(s, &setup, 2 * n)?;
    let mut checks = Vec::new();
    eulerian_checks(s, &setup, &run.rho0, &run.eulerian, &mut checks);
    temple_checks(s, &run.lagrangian, &mut checks);

    let (eul, state, map) = (run.eulerian.last(), run.lagrangian.last(), run.maps.last().expect("t = 0 map"));
    let l1 = correspondence_error(eul, state, map)?;
    checks.push(Check::at_most("correspondence.l1", l1, b.l1_error()));
    let coarse = averaged_correspondence_error(eul, state, map)?;
    let refined = averaged_correspondence_error(
        fine.eulerian.last(),
        fine.lagrangian.last(),
        fine.maps.last().expect("t = 0 map"),
    )?;
    checks.push(Check::at_least("correspondence.refinement_ratio", coarse / refined, b.refinement_ratio()));

    let lag = averaged_density(eul, state, map)?;
    let t = setup.t_final;
    if let Profile::Riemann { left, right, at } = *initial(s) {
        let (l, r) = (left + setup.spec.shift_l, right + setup.spec.shift_l);
        let speed = (setup.spec.flux(l) - setup.spec.flux(r)) / (l - r);
        let h = 1e-6 * speed.abs().max(1.0);
        let single_shock = riemann_exact(&setup.spec, l, r, speed - h) == l && riemann_exact(&setup.spec, l, r, speed + h) == r;
        if single_shock && run.rho0.boundary == Boundary::ConstantExtension {
            let offset = match jump_position(&lag, l, r) {
                Some(x) => (x - (at + speed * t)).abs() / lag.dx,
                None => f64::INFINITY,
            };
            checks.push(Check::at_most("correspondence.shock_offset_cells", offset, b.shock_cells()));
        }
    } else if t < setup.smooth_horizon {
        let f = density_fn(s, &setup.spec);
        let exact = run.rho0.with_values(
            (0..run.rho0.len())
                .map(|i| characteristics_density(&setup.spec, &f, run.rho0.center(i), t))
                .collect(),
        );
        let err = recovered_density(&run.rho0, state, map)?.l1_distance(&exact);
        checks.push(Check::at_most("correspondence.characteristics_l1", err, b.oracle_l1_per_dx() * run.rho0.dx));
    }

    let summary = CorrespondenceReport {
        t,
        n,
        l1_error: l1,
        tv_eulerian: eul.total_variation(),
        mass_defect: (eul.integral() - lag.integral()).abs() / eul.integral().abs(),
    };
    Ok(Outcome {
        checks,
        artifacts: vec![
            ("solution_rho.csv".into(), csv(|w| export::write_density_csv(w, &run.eulerian))),
            ("solution_temple.csv".into(), csv(|w| export::write_temple_csv(w, &run.lagrangian))),
            ("solution_gamma.csv".into(), csv(|w| export::write_flow_map_csv(w, &run.maps))),
            ("correspondence.json".into(), json(&summary)),
        ],
    })
}

/// Where a profile running from `l` to `r` first crosses their midpoint.
fn jump_position(rho: &GridFunction, l: f64, r: f64) -> Option<f64> {
    let mid = 0.5 * (l + r);
    let side = |v: f64| (v - mid) * (r - l) >= 0.0;
    let i = rho.values.iter().position(|&v| side(v))?;
    if i == 0 {
        return Some(rho.edge(0));
    }
    let (a, b) = (rho.values[i - 1], rho.values[i]);
    Some(rho.center(i - 1) + (mid - a) / (b - a) * rho.dx)
}

fn levels(s: &Scenario, n: usize) -> usize {
    let base = s.time_levels.unwrap_or((grid(s).n / 4).max(2));
    base * n / grid(s).n
}

fn variational_pipeline(s: &Scenario) -> Result<Outcome, RunError> {
    let b = Bounds(&s.tolerances);
    let setup = scalar_setup(s)?;
    let potential = potential_from_flux(&setup.vel, setup.vel.u_range.lo)?;
    let eps = s.epsilon.unwrap_or(DEFAULT_EPSILON);
    let n = grid(s).n;
    let run = |n: usize| -> Result<(GridFunction, TempleTrajectory, SpacetimeMap), RunError> {
        let rho0 = density(s, &setup.spec, n)?;
        let outputs = uniform_outputs(setup.t_final, levels(s, n));
        let traj = solve_temple(&init_temple(setup.vel.clone(), &rho0)?, setup.t_final, s.cfl, &outputs)?;
        let map = SpacetimeMap::from_flow_maps(&reconstruct(&traj)?.maps)?;
        Ok((rho0, traj, map))
    };
    let residual = |rho0: &GridFunction, map: &SpacetimeMap| -> Result<f64, RunError> {
        let u0 = rho0.with_values(rho0.values.iter().map(|&r| setup.vel.velocity(r)).collect());
        Ok(conserved_quantity_residual(map, &potential, &u0)?)
    };

    let (rho0, traj, map) = run(n)?;
    let mut checks = Vec::new();
    temple_checks(s, &traj, &mut checks);
    let zero = first_variation(&map, &potential, &PerturbationField::zero(&map), eps)?;
    checks.push(Check::at_most("variational.zero_perturbation", zero.abs(), 0.0));
    let study = extremality_study(&map, eps, |m| action_value(m, &potential))?;
    checks.push(Check::at_least("variational.extremality_ratio", study.min_ratio(), b.extremality_ratio()));

    let r0 = residual(&rho0, &map)?;
    let (rho1, _, map1) = run(2 * n)?;
    let r1 = residual(&rho1, &map1)?;
    let (rho2, _, map2) = run(4 * n)?;
    let r2 = residual(&rho2, &map2)?;
    let order = (r0 / r2).log2() / 2.0;
    checks.push(Check::at_least("variational.conserved_order", order, b.conserved_order()));
    checks.push(Check::at_least("variational.conserved_monotone", (r0 - r1).min(r1 - r2), 0.0));

    let maps = reconstruct(&traj)?.maps;
    let doc = ExtremalityDocument {
        case: s.name.clone(),
        epsilon: study.epsilon,
        ratio: study.min_ratio(),
        extremal_derivative: study.extremal,
        control_derivative: study.control,
        residual_conserved: r0,
    };
    Ok(Outcome {
        checks,
        artifacts: vec![
            ("solution_gamma.csv".into(), csv(|w| export::write_flow_map_csv(w, &maps))),
            ("extremality.json".into(), json(&doc)),
        ],
    })
}

fn system_pipeline(s: &Scenario, kind: SystemKind) -> Result<Outcome, RunError> {
    let b = Bounds(&s.tolerances);
    let pressure_cfg = s.pressure.as_ref().expect("validated");
    let p = pressure_cfg.law();
    let t_final = match s.t_final {
        Some(Horizon::Absolute(t)) => t,
        _ => unreachable!("validated"),
    };
    let eps = s.epsilon.unwrap_or(DEFAULT_EPSILON);
    let still = Profile::Constant { value: 0.0 };
    let velocity = s.velocity.as_ref().unwrap_or(&still);
    let n = grid(s).n;
    let run = |n: usize| -> Result<(GridFunction, SystemTrajectory), RunError> {
        let rho0 = grid(s).sample(initial(s), n)?;
        let u0 = grid(s).sample(velocity, n)?;
        let mut outputs = uniform_outputs(t_final, levels(s, n));
        outputs.extend_from_slice(&s.times);
        let traj = solve_system(&SystemState::new(kind, &rho0, &u0)?, t_final, s.cfl, &p, &outputs)?;
        Ok((rho0, traj))
    };

    let (rho0, traj) = run(n)?;
    let mut checks = Vec::new();
    let (first, last) = (&traj.states[0], traj.states.last().expect("t = 0 state"));
    let eta_drift = relative_drift(last.eta.integral(), first.eta.integral(), first.eta.integral());
    checks.push(Check::at_most("systems.eta_drift", eta_drift, b.mass_drift()));
    let w_scale = first.w.values.iter().map(|w| w.abs()).sum::<f64>() * first.w.dx;
    let w_drift = relative_drift(last.w.integral(), first.w.integral(), if w_scale > 0.0 { w_scale } else { 1.0 });
    checks.push(Check::at_most("systems.w_drift", w_drift, b.mass_drift()));
    let changed = traj.states.iter().map(|st| changed_cells(&st.v, &rho0)).fold(0.0, f64::max);
    checks.push(Check::at_most("systems.v_changed_cells", changed, 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(HYPERBOLICITY_SEED);
    let (lo, hi) = (rho0.min(), rho0.max());
    let mut worst: f64 = 0.0;
    for _ in 0..HYPERBOLICITY_SAMPLES {
        let q = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let eta = rng.gen_range(0.5..2.0);
        let gt = rng.gen_range(-3.0..3.0);
        let value = hyperbolicity_check(&p, q, eta, gt)?;
        let expect = -p.p_prime(q / eta);
        worst = worst.max(((value - expect) / expect).abs());
    }
    checks.push(Check::at_most("systems.hyperbolicity_identity", worst, b.hyperbolicity()));

    // the residual needs uniform levels only
    let uniform = |traj: &SystemTrajectory, n: usize| -> SystemTrajectory {
        let keep: Vec<usize> = (0..traj.times.len())
            .filter(|&k| {
                let m = levels(s, n) as f64;
                let x = traj.times[k] / t_final * m;
                (x - x.round()).abs() < 1e-9
            })
            .collect();
        SystemTrajectory {
            states: keep.iter().map(|&k| traj.states[k].clone()).collect(),
            times: keep.iter().map(|&k| traj.times[k]).collect(),
            cfl: traj.cfl,
            anchor: keep.iter().map(|&k| traj.anchor[k]).collect(),
        }
    };
    let coarse_traj = uniform(&traj, n);
    let el = euler_lagrange_residual(&coarse_traj, &p)?.max;
    let (_, fine) = run(2 * n)?;
    let el_fine = euler_lagrange_residual(&uniform(&fine, 2 * n), &p)?.max;
    checks.push(Check::at_least("systems.el_refinement_ratio", el / el_fine, b.el_ratio()));

    let map = SpacetimeMap::from_flow_maps(&reconstruct_system(&coarse_traj)?)?;
    let q = node_values(&rho0);
    let study = extremality_study(&map, eps, |m| system_action(kind, m, &q, &p))?;
    checks.push(Check::at_least("systems.extremality_ratio", study.ratio(), b.extremality_ratio()));

    if kind == SystemKind::Nlwe && pressure_cfg.is_linear() && lo == hi {
        // η_t = W_x, W_t = κ η_x with W = w/ρ₀
        let c = pressure_cfg.kappa().sqrt();
        let d = grid(s).domain;
        let u0 = |x: f64| velocity.eval(x, d);
        let err = (0..n)
            .map(|i| {
                let x = rho0.center(i);
                let (eta, w) = dalembert(&|y| u0(y + d[0]), c, d[1] - d[0], x - d[0], t_final);
                ((last.eta.values[i] - eta).powi(2) + (last.w.values[i] / lo - w).powi(2)) * rho0.dx
            })
            .sum::<f64>()
            .sqrt();
        checks.push(Check::at_most("systems.dalembert_l2", err, b.dalembert_l2()));
    }

    let doc = ExtremalityDocument {
        case: s.name.clone(),
        epsilon: study.epsilon,
        ratio: study.ratio(),
        extremal_derivative: study.extremal,
        control_derivative: study.control,
        residual_conserved: el,
    };
    Ok(Outcome {
        checks,
        artifacts: vec![
            ("solution_system.csv".into(), csv(|w| export::write_system_csv(w, &traj))),
            ("extremality.json".into(), json(&doc)),
        ],
    })
}

fn roundtrip_pipeline(s: &Scenario) -> Result<Outcome, RunError> {
    let b = Bounds(&s.tolerances);
    let spec = flux_spec(s)?;
    let vel = velocity_law(&spec)?;
    let potential = potential_from_flux(&vel, vel.u_range.lo)?;
    let rel = |a: f64, e: f64| (a - e).abs() / e.abs().max(f64::MIN_POSITIVE);
    let mut rows = String::from("u,g,b,b_prime\n");
    for u in vel.u_range.samples(100) {
        let fields = [u, vel.density(u)?, potential.b(u)?, potential.b_prime(u)];
        let line: Vec<String> = fields.iter().map(|&v| export::number(v)).collect();
        rows.push_str(&line.join(","));
        rows.push('\n');
    }
    // b'(F(ρ)) = ρ²
    let metric = spec
        .data_range
        .samples(100)
        .map(|r| rel(potential.b_prime(vel.velocity(r)), r * r))
        .fold(0.0, f64::max);
    let mut checks = vec![Check::at_most("roundtrip.metric_identity", metric, b.roundtrip())];
    let h = 2e-3 * vel.u_range.width();
    let mut slope: f64 = 0.0;
    for u in vel.u_range.samples(20) {
        let u = u.clamp(vel.u_range.lo + 2.0 * h, vel.u_range.hi - 2.0 * h);
        let at = |k: f64| potential.b(u + k * h);
        let d = (8.0 * (at(1.0)? - at(-1.0)?) - (at(2.0)? - at(-2.0)?)) / (12.0 * h);
        slope = slope.max(rel(d, potential.b_prime(u)));
    }
    checks.push(Check::at_most("roundtrip.potential_slope", slope, 1e-6));
    let (back_vel, back) = flux_from_potential(&potential)?;
    let flux_err = spec
        .data_range
        .samples(100)
        .map(|r| rel(back.flux(r), spec.flux(r)))
        .fold(0.0, f64::max);
    checks.push(Check::at_most("roundtrip.flux", flux_err, b.roundtrip()));
    let inner = Interval::new(
        vel.u_range.lo + 0.05 * vel.u_range.width(),
        vel.u_range.hi - 0.05 * vel.u_range.width(),
    )?;
    let mut transport: f64 = 0.0;
    for u in inner.samples(16) {
        let (from_b, from_g) = lagrangeflow_core::variational::transport_coefficient_check(&potential, &back_vel, u)?;
        transport = transport.max(rel(from_b, from_g));
    }
    checks.push(Check::at_most("roundtrip.transport_coefficients", transport, b.roundtrip()));
    Ok(Outcome {
        checks,
        artifacts: vec![("solution_potential.csv".into(), rows.into_bytes())],
    })
}
