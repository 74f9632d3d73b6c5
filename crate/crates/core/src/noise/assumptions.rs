use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NoiseModel, SigmaFamily};
use crate::rng::stream;
use crate::spectral::SpectralField;

/// Constants of the growth, Lipschitz and curl bounds on `σ`:
/// `‖σ‖_{L_Q} ≤ C̃`, `‖σ‖² ≤ K₂(1 + ‖u‖²)`, `‖σ(u) − σ(v)‖ ≤ K₃‖u − v‖`,
/// `‖curl σ‖² ≤ K̃₀ + K̃₁‖u‖²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaConstants {
    pub c_tilde: f64,
    pub k2: f64,
    pub k3: f64,
    pub k0_curl: f64,
    pub k1_curl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub v_norm: f64,
    pub lq_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub n_samples: usize,
    pub declared: SigmaConstants,
    pub estimated: SigmaConstants,
    /// Largest `estimated / declared` ratio per constant, in declaration order.
    pub max_ratios: [f64; 5],
    pub violations: Vec<String>,
    /// `‖σ(t, u)‖_{L_Q}` along a geometric grid of `‖u‖`.
    pub sweep: Vec<SweepPoint>,
    pub sweep_monotone: bool,
    /// Value the sweep approaches as `‖u‖ → ∞`; `None` if unbounded.
    pub plateau: Option<f64>,
    /// True when boundedness of `σ` comes from the saturation rather than from `σ` being constant.
    pub bounded_by_saturation: bool,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl NoiseModel {
    /// `Σ_j λ_j g_j²`.
    fn additive_weight(&self) -> f64 {
        self.directions().iter().map(|d| d.lambda * d.gain * d.gain).sum()
    }

    pub fn declared_constants(&self) -> SigmaConstants {
        let c2 = self.additive_weight();
        let curl2 = self.curl_weight();
        match *self.family() {
            SigmaFamily::Additive => {
                SigmaConstants { c_tilde: c2.sqrt(), k2: c2, k3: 0.0, k0_curl: curl2, k1_curl: 0.0 }
            }
            // m ≤ 1 + min(r, s₀) and |m'| ≤ 1
            SigmaFamily::Saturated { saturation } => SigmaConstants {
                c_tilde: c2.sqrt() * (1.0 + saturation),
                k2: 2.0 * c2,
                k3: c2.sqrt(),
                k0_curl: 2.0 * curl2,
                k1_curl: 2.0 * curl2,
            },
        }
    }

    /// `‖σ(t, u)‖²_{L_Q} = Σ_j λ_j |σ(t, u) e_j|²` with every `|·|` evaluated by
    /// physical-space quadrature of the assembled field.
    pub fn lq_norm_sq_by_quadrature(&self, t: f64, u: &SpectralField) -> f64 {
        let j = self.num_directions();
        let n = self.grid().n_phys();
        let cell = (2.0 * std::f64::consts::PI / n as f64).powi(2);
        let mut unit = vec![0.0; j];
        let mut total = 0.0;
        for (i, d) in self.directions().iter().enumerate() {
            unit[i] = 1.0;
            let field = self.sigma_apply(t, u, &unit).expect("dimension matches");
            unit[i] = 0.0;
            let (a, b) = field.to_physical();
            let sq: f64 = a.iter().zip(&b).map(|(x, y)| x * x + y * y).sum::<f64>() * cell;
            total += d.lambda * sq;
        }
        total
    }

    /// `‖curl σ(t, u)‖²_{L_Q}`, summing the L² norm of each vorticity.
    pub fn curl_lq_norm_sq(&self, t: f64, u: &SpectralField) -> f64 {
        let j = self.num_directions();
        let mut unit = vec![0.0; j];
        let mut total = 0.0;
        for (i, d) in self.directions().iter().enumerate() {
            if d.gain == 0.0 {
                continue;
            }
            unit[i] = 1.0;
            let field = self.sigma_apply(t, u, &unit).expect("dimension matches");
            unit[i] = 0.0;
            total += d.lambda * field.curl().l2_norm().powi(2);
        }
        total
    }

    /// `‖σ(t, u) − σ(t, v)‖_{L_Q}`.
    pub fn lq_distance(&self, _t: f64, u: &SpectralField, v: &SpectralField) -> f64 {
        (self.modulation(u) - self.modulation(v)).abs() * self.additive_weight().sqrt()
    }
}

/// Random fields with `‖u‖ = r`.
fn field_with_v_norm<R: Rng>(model: &NoiseModel, rng: &mut R, r: f64) -> SpectralField {
    let u = SpectralField::random(model.grid(), rng, 1.0);
    let n = u.v_norm_sq().sqrt();
    if n == 0.0 {
        u
    } else {
        u.scaled(r / n)
    }
}

/// Samples `(t, u, v)` and compares the observed ratios with the constants the
/// family declares.
pub fn verify_assumptions(model: &NoiseModel, n_samples: usize, seed: u64) -> AssumptionReport {
    let n_samples = n_samples.max(100);
    let declared = model.declared_constants();
    let mut rng = stream(seed, 0);
    let zero = SpectralField::zeros(model.grid());
    let curl0 = model.curl_lq_norm_sq(0.0, &zero);
    let mut est = SigmaConstants { c_tilde: 0.0, k2: 0.0, k3: 0.0, k0_curl: curl0, k1_curl: 0.0 };
    for _ in 0..n_samples {
        let t: f64 = rng.random();
        let r = 10f64.powf(rng.random_range(-3.0..3.0));
        let u = field_with_v_norm(model, &mut rng, r);
        let lq2 = model.lq_norm_sq(t, &u);
        est.c_tilde = est.c_tilde.max(lq2.sqrt());
        est.k2 = est.k2.max(lq2 / (1.0 + r * r));
        let dr = r * 10f64.powf(rng.random_range(-4.0..0.5));
        let w = field_with_v_norm(model, &mut rng, dr);
        let v = u.add(&w);
        est.k3 = est.k3.max(model.lq_distance(t, &u, &v) / dr);
    }
    // the curl norm needs one field per direction: use a smaller subsample
    for _ in 0..n_samples.div_ceil(20) {
        let r = 10f64.powf(rng.random_range(-2.0..3.0));
        let u = field_with_v_norm(model, &mut rng, r);
        let c = model.curl_lq_norm_sq(0.0, &u);
        est.k1_curl = est.k1_curl.max(((c - declared.k0_curl).max(0.0)) / (r * r));
        est.k0_curl = est.k0_curl.max((c - declared.k1_curl * r * r).max(0.0));
    }

    let pairs = [
        ("C̃", est.c_tilde, declared.c_tilde),
        ("K₂", est.k2, declared.k2),
        ("K₃", est.k3, declared.k3),
        ("K̃₀", est.k0_curl, declared.k0_curl),
        ("K̃₁", est.k1_curl, declared.k1_curl),
    ];
    let mut max_ratios = [0.0; 5];
    let mut violations = Vec::new();
    for (i, (name, e, d)) in pairs.iter().enumerate() {
        max_ratios[i] = if *d > 0.0 { e / d } else if *e > 0.0 { f64::INFINITY } else { 0.0 };
        if *e > d * (1.0 + 1e-9) + 1e-300 {
            violations.push(format!("{name}: observed {e:.6e} exceeds declared {d:.6e}"));
        }
    }

    let top = match *model.family() {
        SigmaFamily::Additive => 1e3,
        SigmaFamily::Saturated { saturation } => 1e4 * saturation.max(1.0),
    };
    let sweep: Vec<SweepPoint> = (0..=48)
        .map(|i| {
            let r = 1e-2 * (top / 1e-2f64).powf(i as f64 / 48.0);
            let u = field_with_v_norm(model, &mut rng, r);
            SweepPoint { v_norm: r, lq_norm: model.lq_norm_sq(0.0, &u).sqrt() }
        })
        .collect();
    let sweep_monotone = sweep.windows(2).all(|w| w[1].lq_norm >= w[0].lq_norm * (1.0 - 1e-12));
    let plateau = Some(declared.c_tilde);
    let bounded_by_saturation = matches!(model.family(), SigmaFamily::Saturated { .. })
        && sweep.last().map(|p| p.lq_norm > sweep[0].lq_norm * (1.0 + 1e-9)).unwrap_or(false);
    if sweep.iter().any(|p| p.lq_norm > declared.c_tilde * (1.0 + 1e-9)) {
        violations.push("sweep exceeds the declared bound C̃".into());
    }

    AssumptionReport {
        n_samples,
        declared,
        estimated: est,
        max_ratios,
        violations,
        sweep,
        sweep_monotone,
        plateau,
        bounded_by_saturation,
    }
}
