//! The action `𝔅(γ) = ∬ b(γ_t)γ_x dx dt` on discrete space-time maps, its
//! first variation, and the conserved quantity `b'(γ_t)γ_x²` of its extremals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow_map::FlowMap;
use crate::flux::{ActionPotential, VelocityLaw};
use crate::grid::GridFunction;

/// Seed of the perturbation catalogue.
pub const PERTURBATION_SEED: u64 = 0xC0FFEE;
pub const PERTURBATION_COUNT: usize = 20;
/// Nodes next to the boundary of the space-time box on which ζ must vanish.
pub const SUPPORT_MARGIN: usize = 2;
pub const MAX_EPSILON_HALVINGS: u32 = 8;

/// γ on a uniform `(t, x)` node grid; `gamma[n][j]` is γ(x_j, t_n).
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeMap {
    pub gamma: Vec<Vec<f64>>,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub dx: f64,
    pub dt: f64,
}

impl SpacetimeMap {
    pub fn new(gamma: Vec<Vec<f64>>, x: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        if x.len() < 2 * SUPPORT_MARGIN + 2 || t.len() < 2 * SUPPORT_MARGIN + 2 {
            return Err(Error::InvalidInput(format!(
                "space-time grid {}x{} too small",
                t.len(),
                x.len()
            )));
        }
        if gamma.len() != t.len() || gamma.iter().any(|row| row.len() != x.len()) {
            return Err(Error::InvalidInput("space-time map shape mismatch".into()));
        }
        let dx = uniform_spacing(&x, "x")?;
        let dt = uniform_spacing(&t, "t")?;
        let map = Self { gamma, x, t, dx, dt };
        map.check_monotone()?;
        Ok(map)
    }

    /// Stacks flow maps stored at uniformly spaced times.
    pub fn from_flow_maps(maps: &[FlowMap]) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::InvalidInput("no flow maps".into()))?;
        Self::new(
            maps.iter().map(|m| m.gamma.clone()).collect(),
            first.x.clone(),
            maps.iter().map(|m| m.t).collect(),
        )
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn horizon(&self) -> f64 {
        self.t[self.t.len() - 1] - self.t[0]
    }

    pub fn check_monotone(&self) -> Result<()> {
        for row in &self.gamma {
            for (j, w) in row.windows(2).enumerate() {
                if !(w[1] > w[0]) {
                    return Err(Error::MonotonicityLoss {
                        node: j,
                        increment: w[1] - w[0],
                    });
                }
            }
        }
        Ok(())
    }

    /// D_xγ: centred in the interior, one-sided at the ends.
    pub fn d_x(&self, n: usize, j: usize) -> f64 {
        let row = &self.gamma[n];
        diff(j, self.nx(), self.dx, |k| row[k])
    }

    /// D_tγ: centred in the interior, one-sided at the ends.
    pub fn d_t(&self, n: usize, j: usize) -> f64 {
        diff(n, self.nt(), self.dt, |k| self.gamma[k][j])
    }

    /// `γ + s·ζ`.
    pub fn perturbed(&self, zeta: &PerturbationField, s: f64) -> SpacetimeMap {
        let gamma = self
            .gamma
            .iter()
            .zip(&zeta.values)
            .map(|(g, z)| g.iter().zip(z).map(|(g, z)| g + s * z).collect())
            .collect();
        SpacetimeMap {
            gamma,
            x: self.x.clone(),
            t: self.t.clone(),
            dx: self.dx,
            dt: self.dt,
        }
    }

    /// Path with the same end states, linear in time:
    /// `(1 - t/T)·γ(x, 0) + (t/T)·γ(x, T)`.
    pub fn linear_control(&self) -> SpacetimeMap {
        let (start, end) = (&self.gamma[0], &self.gamma[self.nt() - 1]);
        let t0 = self.t[0];
        let horizon = self.horizon();
        let gamma = self
            .t
            .iter()
            .map(|&t| {
                let s = (t - t0) / horizon;
                start.iter().zip(end).map(|(a, b)| (1.0 - s) * a + s * b).collect()
            })
            .collect();
        SpacetimeMap {
            gamma,
            x: self.x.clone(),
            t: self.t.clone(),
            dx: self.dx,
            dt: self.dt,
        }
    }
}

fn uniform_spacing(v: &[f64], what: &str) -> Result<f64> {
    let h = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
    let ok = h > 0.0 && v.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
    if ok {
        Ok(h)
    } else {
        Err(Error::InvalidInput(format!("{what} nodes are not uniformly spaced")))
    }
}

fn diff(k: usize, len: usize, h: f64, at: impl Fn(usize) -> f64) -> f64 {
    if k == 0 {
        (at(1) - at(0)) / h
    } else if k == len - 1 {
        (at(len - 1) - at(len - 2)) / h
    } else {
        (at(k + 1) - at(k - 1)) / (2.0 * h)
    }
}

fn trapezoid_weight(k: usize, len: usize, h: f64) -> f64 {
    if k == 0 || k == len - 1 {
        0.5 * h
    } else {
        h
    }
}

/// Tensor-product trapezoid sum of `density(n, j, D_tγ, D_xγ)` over the nodes.
pub fn discrete_action(
    map: &SpacetimeMap,
    density: impl Fn(usize, usize, f64, f64) -> Result<f64>,
) -> Result<f64> {
    let mut total = 0.0;
    for n in 0..map.nt() {
        let wt = trapezoid_weight(n, map.nt(), map.dt);
        let mut row = 0.0;
        for j in 0..map.nx() {
            let wx = trapezoid_weight(j, map.nx(), map.dx);
            row += wx * density(n, j, map.d_t(n, j), map.d_x(n, j))?;
        }
        total += wt * row;
    }
    Ok(total)
}

/// `𝔅(γ) = ∬ b(D_tγ)·D_xγ`.
pub fn action_value(map: &SpacetimeMap, b: &ActionPotential) -> Result<f64> {
    discrete_action(map, |_, _, gt, gx| Ok(b.b(gt)? * gx))
}

/// The same action evaluated on the image: `∫ ∫ b(γ_t∘γ⁻¹(y)) dy dt`, with
/// γ⁻¹ taken from the piecewise-linear map at each time and a midpoint rule
/// on a uniform grid over the image.
pub fn action_value_on_image(map: &SpacetimeMap, b: &ActionPotential) -> Result<f64> {
    let m = map.nx() - 1;
    let mut total = 0.0;
    for n in 0..map.nt() {
        let row = &map.gamma[n];
        let velocity: Vec<f64> = (0..map.nx()).map(|j| map.d_t(n, j)).collect();
        let (lo, hi) = (row[0], row[m]);
        let h = (hi - lo) / m as f64;
        let mut inner = 0.0;
        for k in 0..m {
            let y = lo + (k as f64 + 0.5) * h;
            let i = row.partition_point(|&g| g <= y).clamp(1, m) - 1;
            let s = (y - row[i]) / (row[i + 1] - row[i]);
            let u = velocity[i] + s * (velocity[i + 1] - velocity[i]);
            inner += b.b(u)? * h;
        }
        total += trapezoid_weight(n, map.nt(), map.dt) * inner;
    }
    Ok(total)
}

/// Test function ζ on the nodes of a space-time map.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationField {
    pub values: Vec<Vec<f64>>,
    /// Node index ranges `[j0, j1] × [n0, n1]` outside of which ζ vanishes.
    pub support: ((usize, usize), (usize, usize)),
}

impl PerturbationField {
    pub fn zero(map: &SpacetimeMap) -> Self {
        Self {
            values: vec![vec![0.0; map.nx()]; map.nt()],
            support: ((SUPPORT_MARGIN, SUPPORT_MARGIN), (SUPPORT_MARGIN, SUPPORT_MARGIN)),
        }
    }

    /// Tensor-product `cos²` bump of amplitude `amp` centred at `(cx, ct)` with
    /// half-widths `(wx, wt)`.
    pub fn bump(map: &SpacetimeMap, cx: f64, ct: f64, wx: f64, wt: f64, amp: f64) -> Result<Self> {
        let profile = |s: f64| {
            if s.abs() < 1.0 {
                (0.5 * std::f64::consts::PI * s).cos().powi(2)
            } else {
                0.0
            }
        };
        let px: Vec<f64> = map.x.iter().map(|&x| profile((x - cx) / wx)).collect();
        let pt: Vec<f64> = map.t.iter().map(|&t| profile((t - ct) / wt)).collect();
        let values: Vec<Vec<f64>> = pt.iter().map(|a| px.iter().map(|b| amp * a * b).collect()).collect();
        let span = |p: &[f64]| {
            let first = p.iter().position(|&v| v != 0.0);
            let last = p.iter().rposition(|&v| v != 0.0);
            first.zip(last)
        };
        let (sx, st) = match (span(&px), span(&pt)) {
            (Some(sx), Some(st)) => (sx, st),
            _ => return Err(Error::InvalidInput("bump has no support on the grid".into())),
        };
        let field = Self {
            values,
            support: (sx, st),
        };
        field.check_support(map)?;
        Ok(field)
    }

    /// ζ must vanish within `SUPPORT_MARGIN` nodes of the boundary of the box.
    pub fn check_support(&self, map: &SpacetimeMap) -> Result<()> {
        let ((j0, j1), (n0, n1)) = self.support;
        let inside = j0 >= SUPPORT_MARGIN
            && n0 >= SUPPORT_MARGIN
            && j1 + SUPPORT_MARGIN < map.nx()
            && n1 + SUPPORT_MARGIN < map.nt();
        if inside {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "perturbation support {:?} reaches the boundary margin",
                self.support
            )))
        }
    }
}

/// `PERTURBATION_COUNT` seeded `cos²` bumps strictly inside the box, amplitude
/// `amp` (a length).
pub fn perturbation_catalog(map: &SpacetimeMap, amp: f64) -> Result<Vec<PerturbationField>> {
    let mut rng = ChaCha8Rng::seed_from_u64(PERTURBATION_SEED);
    let margin_x = (SUPPORT_MARGIN + 1) as f64 * map.dx;
    let margin_t = (SUPPORT_MARGIN + 1) as f64 * map.dt;
    let (x0, x1) = (map.x[0] + margin_x, map.x[map.nx() - 1] - margin_x);
    let (t0, t1) = (map.t[0] + margin_t, map.t[map.nt() - 1] - margin_t);
    (0..PERTURBATION_COUNT)
        .map(|_| {
            let wx = rng.gen_range(0.1..0.3) * (x1 - x0);
            let wt = rng.gen_range(0.2..0.45) * (t1 - t0);
            let cx = rng.gen_range(x0 + wx..x1 - wx);
            let ct = rng.gen_range(t0 + wt..t1 - wt);
            PerturbationField::bump(map, cx, ct, wx, wt, amp)
        })
        .collect()
}

fn check_compatible(map: &SpacetimeMap, zeta: &PerturbationField) -> Result<()> {
    if zeta.values.len() != map.nt() || zeta.values.iter().any(|r| r.len() != map.nx()) {
        return Err(Error::InvalidInput("perturbation shape does not match the map".into()));
    }
    zeta.check_support(map)
}

/// Central difference in ε of an arbitrary action: `(𝔅(γ+εζ) − 𝔅(γ−εζ)) / 2ε`.
pub fn first_variation_of(
    map: &SpacetimeMap,
    zeta: &PerturbationField,
    eps: f64,
    action: impl Fn(&SpacetimeMap) -> Result<f64>,
) -> Result<f64> {
    check_compatible(map, zeta)?;
    if zeta.values.iter().all(|r| r.iter().all(|&z| z == 0.0)) {
        return Ok(0.0);
    }
    let plus = map.perturbed(zeta, eps);
    let minus = map.perturbed(zeta, -eps);
    plus.check_monotone()?;
    minus.check_monotone()?;
    Ok((action(&plus)? - action(&minus)?) / (2.0 * eps))
}

/// `d𝔅(γ + εζ)/dε` at ε = 0 by central differences.
pub fn first_variation(map: &SpacetimeMap, b: &ActionPotential, zeta: &PerturbationField, eps: f64) -> Result<f64> {
    first_variation_of(map, zeta, eps, |m| action_value(m, b))
}

/// Retries with ε halved (up to `MAX_EPSILON_HALVINGS` times) while the
/// perturbed map folds. Returns the derivative and the ε used.
pub fn first_variation_adaptive(
    map: &SpacetimeMap,
    zeta: &PerturbationField,
    eps: f64,
    action: impl Fn(&SpacetimeMap) -> Result<f64>,
) -> Result<(f64, f64)> {
    let mut e = eps;
    let mut halvings = 0;
    loop {
        match first_variation_of(map, zeta, e, &action) {
            Err(Error::MonotonicityLoss { .. }) if halvings < MAX_EPSILON_HALVINGS => {
                e *= 0.5;
                halvings += 1;
            }
            other => return other.map(|d| (d, e)),
        }
    }
}

/// First variations of the map and of its linear-in-time control over the
/// seeded catalogue.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalityReport {
    pub epsilon: f64,
    pub extremal: Vec<f64>,
    pub control: Vec<f64>,
}

impl ExtremalityReport {
    pub fn max_extremal(&self) -> f64 {
        self.extremal.iter().fold(0.0, |a, d| a.max(d.abs()))
    }

    pub fn max_control(&self) -> f64 {
        self.control.iter().fold(0.0, |a, d| a.max(d.abs()))
    }

    /// Catalogue-wide ratio `max|control| / max|extremal|`.
    pub fn ratio(&self) -> f64 {
        self.max_control() / self.max_extremal()
    }

    /// Smallest per-perturbation ratio |control| / |extremal|.
    pub fn min_ratio(&self) -> f64 {
        self.extremal
            .iter()
            .zip(&self.control)
            .map(|(e, c)| c.abs() / e.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Runs the perturbation catalogue on `map` and on its linear control.
/// Perturbations are evaluated in parallel and collected in index order.
pub fn extremality_study(
    map: &SpacetimeMap,
    eps: f64,
    action: impl Fn(&SpacetimeMap) -> Result<f64> + Sync,
) -> Result<ExtremalityReport> {
    let amp = 1.0;
    let catalog = perturbation_catalog(map, amp)?;
    let control = map.linear_control();
    let pairs = catalog
        .par_iter()
        .map(|zeta| {
            let (e, _) = first_variation_adaptive(map, zeta, eps, &action)?;
            let (c, _) = first_variation_adaptive(&control, zeta, eps, &action)?;
            Ok((e, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let (extremal, control) = pairs.into_iter().unzip();
    Ok(ExtremalityReport {
        epsilon: eps,
        extremal,
        control,
    })
}

/// Node value of a cell field: mean of the two adjacent cells.
pub fn node_values(cells: &GridFunction) -> Vec<f64> {
    (0..=cells.len() as isize)
        .map(|j| 0.5 * (cells.at(j - 1) + cells.at(j)))
        .collect()
}

/// `max |b'(D_tγ)(D_xγ)² − b'(u₀)|` over interior nodes.
pub fn conserved_quantity_residual(map: &SpacetimeMap, b: &ActionPotential, u0: &GridFunction) -> Result<f64> {
    let u0_nodes = node_values(u0);
    if u0_nodes.len() != map.nx() {
        return Err(Error::InvalidInput("initial velocity mesh does not match the map".into()));
    }
    let mut worst: f64 = 0.0;
    for n in 1..map.nt() - 1 {
        for (j, &u0) in u0_nodes.iter().enumerate().take(map.nx() - 1).skip(1) {
            let gx = map.d_x(n, j);
            let lhs = b.b_prime(map.d_t(n, j)) * gx * gx;
            worst = worst.max((lhs - b.b_prime(u0)).abs());
        }
    }
    Ok(worst)
}

/// Transport coefficients `(u + 2b'/b'', u + g/g')` of the two derivations.
pub fn transport_coefficient_check(b: &ActionPotential, vel: &VelocityLaw, u: f64) -> Result<(f64, f64)> {
    let b2 = b.b_second(u);
    let gp = vel.density_prime(u)?;
    if !(b2.abs() > 0.0) || !b2.is_finite() || !(gp.abs() > 0.0) || !gp.is_finite() {
        return Err(Error::DegenerateCoefficient { u });
    }
    let g = vel.density(u)?;
    Ok((u + 2.0 * b.b_prime(u) / b2, u + g / gp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{normalize, potential_from_flux, velocity_law, FluxSpec, Interval, RawFlux};
    use crate::grid::Boundary;
    use crate::numerics::real_fn;
    use approx::assert_relative_eq;

    fn grid(nx: usize, nt: usize, t_end: f64, gamma: impl Fn(f64, f64) -> f64) -> SpacetimeMap {
        let x: Vec<f64> = (0..nx).map(|j| j as f64 / (nx - 1) as f64).collect();
        let t: Vec<f64> = (0..nt).map(|n| t_end * n as f64 / (nt - 1) as f64).collect();
        let g = t.iter().map(|&t| x.iter().map(|&x| gamma(x, t)).collect()).collect();
        SpacetimeMap::new(g, x, t).unwrap()
    }

    fn burgers_potential() -> ActionPotential {
        ActionPotential::cubic(4.0 / 3.0, Interval::new(0.5, 1.5).unwrap())
    }

    #[test]
    fn constant_state_action() {
        // ρ0 ≡ 2 under Burgers: γ = x + t, so 𝔅 = b(1)·|M|·T = 4/3
        let map = grid(41, 21, 1.0, |x, t| x + t);
        assert_relative_eq!(action_value(&map, &burgers_potential()).unwrap(), 4.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn static_map_action_is_b_of_zero() {
        let b = ActionPotential::closed_form(
            real_fn(|u| u * u + 0.7),
            real_fn(|u| 2.0 * u),
            real_fn(|_| 2.0),
            Interval::new(0.0, 1.0).unwrap(),
        );
        let map = grid(11, 11, 2.0, |x, _| x);
        assert_relative_eq!(action_value(&map, &b).unwrap(), 0.7 * 1.0 * 2.0, max_relative = 1e-13);
        assert_relative_eq!(action_value_on_image(&map, &b).unwrap(), 1.4, max_relative = 1e-13);
    }

    #[test]
    fn zero_perturbation_has_zero_variation() {
        let map = grid(21, 21, 1.0, |x, t| x + t);
        let zeta = PerturbationField::zero(&map);
        assert_eq!(first_variation(&map, &burgers_potential(), &zeta, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn rigid_translation_is_stationary() {
        // straight constant-speed paths are extremals of any b
        let map = grid(41, 41, 1.0, |x, t| x + t);
        let b = burgers_potential();
        for zeta in perturbation_catalog(&map, 1.0).unwrap() {
            let d = first_variation(&map, &b, &zeta, 1e-3).unwrap();
            assert!(d.abs() < 1e-7, "{d}");
        }
    }

    #[test]
    fn bump_support_respects_margin() {
        let map = grid(21, 21, 1.0, |x, t| x + t);
        assert!(PerturbationField::bump(&map, 0.5, 0.5, 0.2, 0.2, 1.0).is_ok());
        assert!(PerturbationField::bump(&map, 0.05, 0.5, 0.1, 0.2, 1.0).is_err());
        assert!(PerturbationField::bump(&map, 0.5, 0.95, 0.2, 0.1, 1.0).is_err());
    }

    #[test]
    fn folding_perturbation_is_rejected_then_recovered_by_halving() {
        let map = grid(41, 21, 1.0, |x, t| x + t);
        let zeta = PerturbationField::bump(&map, 0.5, 0.5, 0.1, 0.3, 1.0).unwrap();
        let b = burgers_potential();
        assert!(matches!(
            first_variation(&map, &b, &zeta, 0.2),
            Err(Error::MonotonicityLoss { .. })
        ));
        let (d, eps) = first_variation_adaptive(&map, &zeta, 0.2, |m| action_value(m, &b)).unwrap();
        assert!(eps < 0.2 && d.abs() < 1e-9);
    }

    #[test]
    fn non_uniform_times_are_rejected() {
        let x = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let t = vec![0.0, 0.1, 0.3, 0.4, 0.5, 0.6];
        let g = vec![x.clone(); 6];
        assert!(SpacetimeMap::new(g, x, t).is_err());
    }

    #[test]
    fn conserved_quantity_constant_and_corrupted() {
        let b = burgers_potential();
        let u0 = GridFunction::from_fn(40, 0.0, 1.0, Boundary::Periodic, |_| 1.0).unwrap();
        let map = grid(41, 21, 1.0, |x, t| x + t);
        assert!(conserved_quantity_residual(&map, &b, &u0).unwrap() <= 1e-12);
        let stretched = grid(41, 21, 1.0, |x, t| 1.1 * x + t);
        let r = conserved_quantity_residual(&stretched, &b, &u0).unwrap();
        assert!(r >= b.b_prime(1.0) * (1.1f64.powi(2) - 1.0) * (1.0 - 1e-9));
    }

    fn cubic_law() -> (VelocityLaw, FluxSpec) {
        let spec = FluxSpec {
            raw: RawFlux::cubic(),
            data_range: Interval::new(0.5, 2.0).unwrap(),
            shift_l: 0.0,
            shift_k: 0.0,
        };
        (velocity_law(&spec).unwrap(), spec)
    }

    #[test]
    fn transport_coefficient_for_quadratic_action() {
        let (vel, _) = cubic_law();
        let b = ActionPotential::quadratic(vel.u_range);
        let (a, c) = transport_coefficient_check(&b, &vel, 1.0).unwrap();
        assert_relative_eq!(a, 3.0, max_relative = 1e-12);
        assert_relative_eq!(c, 3.0, max_relative = 1e-10);
    }

    #[test]
    fn transport_coefficient_for_burgers() {
        let spec = normalize(RawFlux::burgers(), Interval::new(1.0, 3.0).unwrap()).unwrap();
        let vel = velocity_law(&spec).unwrap();
        let b = potential_from_flux(&vel, vel.u_range.lo).unwrap();
        let (a, c) = transport_coefficient_check(&b, &vel, 1.0).unwrap();
        assert_relative_eq!(a, 2.0, max_relative = 1e-10);
        assert_relative_eq!(c, 2.0, max_relative = 1e-10);
        let closed = burgers_potential();
        let (a, _) = transport_coefficient_check(&closed, &vel, 1.0).unwrap();
        assert_relative_eq!(a, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn mismatched_potential_disagrees() {
        let (vel, _) = cubic_law();
        let b = ActionPotential::cubic(4.0 / 3.0, vel.u_range);
        for u in [0.5, 1.0, 2.0, 3.0] {
            let (a, c) = transport_coefficient_check(&b, &vel, u).unwrap();
            assert!((a - c).abs() > 1e-3);
        }
    }

    #[test]
    fn degenerate_coefficient() {
        let (vel, _) = cubic_law();
        let b = ActionPotential::closed_form(real_fn(|u| u), real_fn(|_| 1.0), real_fn(|_| 0.0), vel.u_range);
        assert!(matches!(
            transport_coefficient_check(&b, &vel, 1.0),
            Err(Error::DegenerateCoefficient { .. })
        ));
    }
}
