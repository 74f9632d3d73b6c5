use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use snse_core::deviation::{epsilon_thresholds, ConstantsLedger, SkeletonMap};
use snse_core::noise::{verify_assumptions, Control};
use snse_core::rng::stream;
use snse_core::solvers::{solve_deterministic, solve_snse, SimConfig};
use snse_core::spectral::{bilinear, reference, trilinear, SpectralField, SpectralGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckItem {
    fn at_most(name: &str, measured: f64, threshold: f64, detail: String) -> Self {
        Self { name: name.into(), passed: measured <= threshold, measured, threshold, detail }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub items: Vec<CheckItem>,
    pub passed: bool,
}

const DIVERGENCE_TOL: f64 = 1e-12;

/// `max_k |k·û_k| / max_k |û_k| ≤ 1e-12`, naming the worst mode.
pub fn divergence_check(name: &str, u: &SpectralField) -> CheckItem {
    let (_, k) = u.max_divergence();
    let rel = u.relative_divergence();
    CheckItem::at_most(name, rel, DIVERGENCE_TOL, format!("worst mode ({}, {})", k.kx, k.ky))
}

/// A random field with a longitudinal component injected at its lowest
/// diagonal mode and the mirror mode.
pub fn corrupted_field(grid: &SpectralGrid, seed: u64) -> SpectralField {
    let mut u = SpectralField::random(grid, &mut stream(seed, 0), 1.0);
    let (i, k) = grid.modes().find(|(_, k)| k.kx == 1 && k.ky == 1).expect("grid has mode (1, 1)");
    let j = grid.mirror(i);
    let c = u.coeffs_mut_unchecked();
    let a = Complex64::new(0.3, 0.2);
    c[i] = [c[i][0] + a * f64::from(k.kx), c[i][1] + a * f64::from(k.ky)];
    c[j] = [c[j][0] + a.conj() * f64::from(-k.kx), c[j][1] + a.conj() * f64::from(-k.ky)];
    u
}

fn product_grid(sim: &SimConfig) -> SpectralGrid {
    if sim.grid.supports_products() {
        sim.grid.clone()
    } else {
        SpectralGrid::dealiased(sim.grid.k_max()).expect("dealiased grid")
    }
}

fn spectral_items(grid: &SpectralGrid, fixtures: usize, seed: u64) -> Vec<CheckItem> {
    let m = reference::exact_resolution(grid);
    let (mut tri, mut bil, mut anti, mut stokes, mut div): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..fixtures as u64 {
        let mut rng = stream(seed, i);
        let u = SpectralField::random(grid, &mut rng, 1.0);
        let v = SpectralField::random(grid, &mut rng, 1.0);
        let w = SpectralField::random(grid, &mut rng, 1.0);
        let scale = u.h_norm_sq().sqrt() * v.v_norm_sq().sqrt() * w.v_norm_sq().sqrt();
        let q = reference::trilinear(&u, &v, &w, m);
        tri = tri.max((trilinear(&u, &v, &w) - q).abs() / q.abs().max(1e-12 * scale));
        let slow = reference::bilinear(&u, &v);
        let fast = bilinear(&u, &v).expect("dealiased grid");
        bil = bil.max(fast.sub(&slow).max_amplitude() / slow.max_amplitude());
        anti = anti.max(trilinear(&u, &v, &v).abs() / (u.v_norm_sq().sqrt() * v.v_norm_sq()));
        stokes = stokes.max((u.stokes().inner_h(&u) - u.v_norm_sq()).abs() / u.v_norm_sq());
        for f in [&u, &v, &w] {
            div = div.max(f.relative_divergence());
        }
    }
    let n = format!("{fixtures} random triples");
    vec![
        CheckItem::at_most("trilinear_matches_quadrature", tri, 1e-8, n.clone()),
        CheckItem::at_most("bilinear_matches_quadrature", bil, 1e-8, n.clone()),
        CheckItem::at_most("trilinear_antisymmetry", anti, 1e-10, format!("|b(u,v,v)| / (‖u‖ ‖v‖²), {n}")),
        CheckItem::at_most("stokes_consistency", stokes, 1e-12, format!("|(Au,u) − ‖u‖²| / ‖u‖², {n}")),
        CheckItem::at_most("fields_divergence_free", div, DIVERGENCE_TOL, n),
    ]
}

fn negative_control(grid: &SpectralGrid, seed: u64) -> CheckItem {
    let inner = divergence_check("divergence", &corrupted_field(grid, seed));
    let found = inner.detail.contains("(1, 1)") || inner.detail.contains("(-1, -1)");
    CheckItem {
        name: "divergence_negative_control".into(),
        passed: !inner.passed && found,
        measured: inner.measured,
        threshold: inner.threshold,
        detail: format!("corrupted fixture must fail: {}", inner.detail),
    }
}

/// Every check on the given simulation setup.
pub fn verify_suite(sim: &SimConfig, ledger: &ConstantsLedger, seed: u64, gradient_trials: usize, fixtures: usize) -> VerifyReport {
    let pg = product_grid(sim);
    let mut items = spectral_items(&pg, fixtures, seed);
    items.push(negative_control(&pg, seed));

    // short runs keep the suite cheap at any configured horizon
    let steps = sim.steps().clamp(1, 200);
    let mut short = sim.clone().with_stride(1);
    short.t_end = steps as f64 * sim.dt;
    let item = |name: &str, r: Result<CheckItem, String>| {
        r.unwrap_or_else(|e| CheckItem { name: name.into(), passed: false, measured: f64::NAN, threshold: 0.0, detail: e })
    };
    items.push(item(
        "solver_divergence_free",
        solve_snse(&short.clone().with_epsilon(0.1), seed).map_err(|e| e.to_string()).map(|t| {
            CheckItem::at_most("solver_divergence_free", t.max_relative_divergence, DIVERGENCE_TOL, format!("{steps} steps at epsilon 0.1"))
        }),
    ));
    items.push(item(
        "epsilon_zero_reduction",
        (|| {
            let a = solve_snse(&short.clone().with_epsilon(0.0), seed).map_err(|e| e.to_string())?;
            let b = solve_deterministic(&short).map_err(|e| e.to_string())?;
            let same = a.times == b.times && a.fields.iter().zip(&b.fields).all(|(x, y)| x.coeffs() == y.coeffs());
            Ok(CheckItem {
                name: "epsilon_zero_reduction".into(),
                passed: same,
                measured: if same { 0.0 } else { 1.0 },
                threshold: 0.0,
                detail: "bitwise comparison with the deterministic solver".into(),
            })
        })(),
    ));
    items.push(item(
        "gradient_check",
        (|| {
            let mut g = short.clone().with_epsilon(0.0);
            let m = steps.min(20);
            g.t_end = m as f64 * sim.dt;
            let u0 = solve_deterministic(&g).map_err(|e| e.to_string())?;
            let map = SkeletonMap::new(&g, &u0).map_err(|e| e.to_string())?;
            let dim = g.noise.num_directions();
            let h = Control::from_fn(&g.noise, g.t_end, m, |t| (0..dim).map(|j| 0.3 * ((j + 1) as f64 * t).sin()).collect())
                .map_err(|e| e.to_string())?;
            let target = map.forward(&h).map_err(|e| e.to_string())?;
            let err = map.gradient_check(&target, 10.0, 5.0, gradient_trials, 1e-5, seed).map_err(|e| e.to_string())?;
            Ok(CheckItem::at_most(
                "gradient_check",
                err,
                1e-4,
                format!("adjoint vs central differences, {gradient_trials} directions, {m} steps"),
            ))
        })(),
    ));
    let report = verify_assumptions(&sim.noise, 200, seed);
    items.push(CheckItem {
        name: "noise_assumptions".into(),
        passed: report.passed(),
        measured: report.max_ratios.iter().copied().fold(0.0, f64::max),
        threshold: 1.0,
        detail: if report.violations.is_empty() { "largest estimated/declared ratio".into() } else { report.violations.join("; ") },
    });
    items.push(item(
        "epsilon_thresholds",
        epsilon_thresholds(ledger, 1.0).map_err(|e| e.to_string()).map(|t| {
            let k = |i: usize| ledger.get(i).unwrap_or(f64::NAN);
            let (k1, k2, k9) = (k(1), k(2), k(9));
            let expect = [1.0 / (2.0 * k1 * k1), 1.0 / (4.0 * k1), 1.0 / (2.0 * k2), 1.0 / (78.0 * k9)]
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            CheckItem {
                name: "epsilon_thresholds".into(),
                passed: t.eps0 == expect,
                measured: t.eps0,
                threshold: expect,
                detail: "eps0 against direct arithmetic".into(),
            }
        }),
    ));
    let passed = items.iter().all(|i| i.passed);
    VerifyReport { items, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use snse_core::noise::{NoiseModel, NoiseSpec};

    #[test]
    fn corrupted_fixture_fails_with_its_mode() {
        let g = SpectralGrid::dealiased(3).unwrap();
        let item = divergence_check("divergence", &corrupted_field(&g, 1));
        assert!(!item.passed);
        assert!(item.detail.contains("(1, 1)") || item.detail.contains("(-1, -1)"), "{}", item.detail);
        let clean = SpectralField::random(&g, &mut stream(1, 0), 1.0);
        assert!(divergence_check("divergence", &clean).passed);
    }

    #[test]
    fn suite_passes_on_a_small_setup() {
        let g = SpectralGrid::dealiased(3).unwrap();
        let noise = NoiseModel::new(&g, &NoiseSpec { num_directions: Some(6), ..NoiseSpec::default() }).unwrap();
        let sim = SimConfig::new(SpectralField::taylor_green(&g, 1.0), noise, 0.1, 0.01).unwrap();
        let ledger = ConstantsLedger::from_model(&sim.noise, &sim.forcing, sim.t_end);
        let rep = verify_suite(&sim, &ledger, 4, 20, 10);
        for i in &rep.items {
            assert!(i.passed, "{i:?}");
        }
        assert!(rep.passed);
    }
}
