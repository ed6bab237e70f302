//! Field observables and the closed-form thermalization predictions: rates,
//! decay constant, mean-photon-number trajectory and thermalization times,
//! plus exponential-fit extraction of the decay rate from simulated data.

use serde::Serialize;

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::models::{two_level_populations, CouplingSpec, ReservoirKind, ReservoirSpec};

/// Mean photon number below which g²(0) is reported as undefined.
pub const G2_FLOOR: f64 = 1e-9;

/// tr(ρ n̂).
pub fn mean_photon_number(rho_f: &ComplexMatrix) -> f64 {
    rho_f.diagonal().iter().enumerate().map(|(n, p)| n as f64 * p.re).sum()
}

/// 1/(e^{ω/T} − 1).
pub fn bose_einstein_occupation(omega: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || t.is_nan() {
        return Err(Error::Domain(format!("temperature must be > 0, got {t}")));
    }
    Ok(1.0 / (omega / t).exp_m1())
}

/// Ω / ln(1 + 1/n̄); zero (absolute zero) for n̄ ≤ 0.
pub fn field_temperature(n_bar: f64, omega: f64) -> f64 {
    if n_bar <= 0.0 {
        return 0.0;
    }
    omega / (1.0 / n_bar).ln_1p()
}

/// Temperature from the ratio of the two lowest Fock populations,
/// Ω / ln(ρ₀₀/ρ₁₁). `None` when the ratio carries no temperature.
pub fn diagonal_ratio_temperature(rho_f: &ComplexMatrix, omega: f64) -> Option<f64> {
    let (p0, p1) = (rho_f[(0, 0)].re, rho_f[(1, 1)].re);
    if p1 <= 0.0 || p0 <= p1 {
        return None;
    }
    Some(omega / (p0 / p1).ln())
}

pub fn g2_zero(rho_f: &ComplexMatrix) -> Result<f64> {
    g2_zero_with_floor(rho_f, G2_FLOOR)
}

/// ⟨a†a†aa⟩ / ⟨a†a⟩².
///
/// a†²a² = n̂(n̂ − 1) holds exactly on the truncated space, so the numerator
/// is Σ n(n−1)ρₙₙ.
pub fn g2_zero_with_floor(rho_f: &ComplexMatrix, floor: f64) -> Result<f64> {
    let n_mean = mean_photon_number(rho_f);
    if n_mean < floor {
        return Err(Error::UndefinedCorrelation { n_mean, floor });
    }
    let second: f64 = rho_f
        .diagonal()
        .iter()
        .enumerate()
        .map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p.re)
        .sum();
    Ok(second / (n_mean * n_mean))
}

/// Upward (heating) and downward (cooling) photon rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePair {
    pub upward: f64,
    pub downward: f64,
}

/// Second-order coarse-grained rates for the reservoir.
///
/// Multi-atom clusters use the reduced coefficient r·φ²·N·p; the multilevel
/// atom couples only through its symmetric ground superposition and gets
/// r·φ²·p_g' downward.
pub fn rates(reservoir: &ReservoirSpec, coupling: &CouplingSpec) -> Result<RatePair> {
    let base = coupling.injection_rate() * coupling.phi().powi(2);
    let (pe, pg) = reservoir.populations()?;
    let pair = match reservoir.kind {
        ReservoirKind::MultiAtom => {
            let n = reservoir.n as f64;
            RatePair { upward: base * n * pe, downward: base * n * pg }
        }
        ReservoirKind::MultiLevel => RatePair { upward: base * pe, downward: base * pg },
    };
    if pair.upward >= pair.downward {
        return Err(Error::GainRegime(format!(
            "upward rate {:e} >= downward rate {:e}",
            pair.upward, pair.downward
        )));
    }
    Ok(pair)
}

/// Multi-atom rates with the unreduced (p_e + p_g)^{N−1} factor kept.
pub fn rates_unreduced_multi_atom(n: usize, omega: f64, t: f64, coupling: &CouplingSpec) -> Result<RatePair> {
    let (pe, pg) = two_level_populations(omega, t)?;
    let c = coupling.injection_rate() * coupling.phi().powi(2) * n as f64 * (pe + pg).powi(n as i32 - 1);
    Ok(RatePair { upward: c * pe, downward: c * pg })
}

/// Γ = R_b − R_a.
pub fn decay_rate(rates: &RatePair) -> Result<f64> {
    let gamma = rates.downward - rates.upward;
    if !(gamma > 0.0) {
        return Err(Error::GainRegime(format!("decay rate {gamma:e} is not positive")));
    }
    Ok(gamma)
}

/// n̄(t) = n₀e^{−Γt} + n_th(1 − e^{−Γt}).
pub fn analytic_trajectory(n0: f64, n_th: f64, gamma: f64, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|&t| {
            let decay = (-gamma * t).exp();
            n0 * decay + n_th * (1.0 - decay)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalizationPrediction {
    pub rates: RatePair,
    pub gamma: f64,
    pub t_th: f64,
    /// Steady photon number R_a / (R_b − R_a).
    pub n_bar_th: f64,
    /// Low-temperature limit: 1/(rφ²N) for clusters, N/(rφ²) for multilevel atoms.
    pub low_temperature_approx: f64,
}

impl ThermalizationPrediction {
    /// Temperature of the predicted steady field.
    pub fn steady_field_temperature(&self, omega: f64) -> f64 {
        field_temperature(self.n_bar_th, omega)
    }
}

pub fn thermalization_time(reservoir: &ReservoirSpec, coupling: &CouplingSpec) -> Result<ThermalizationPrediction> {
    let rates = rates(reservoir, coupling)?;
    let gamma = decay_rate(&rates)?;
    let base = coupling.injection_rate() * coupling.phi().powi(2);
    let n = reservoir.n as f64;
    let low_temperature_approx = match reservoir.kind {
        ReservoirKind::MultiAtom => 1.0 / (base * n),
        ReservoirKind::MultiLevel => n / base,
    };
    Ok(ThermalizationPrediction {
        rates,
        gamma,
        t_th: 1.0 / gamma,
        n_bar_th: rates.upward / gamma,
        low_temperature_approx,
    })
}

/// The two temperatures a multilevel reservoir can be assigned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultilevelTemperatures {
    /// ω / ln(N·p_g'/p_e): the configured reservoir temperature.
    pub reservoir: f64,
    /// ω / ln(p_g'/p_e): temperature of the steady field the rates drive to.
    pub effective: f64,
}

pub fn multilevel_temperatures(reservoir: &ReservoirSpec) -> Result<MultilevelTemperatures> {
    let (pe, pg) = reservoir.populations()?;
    let n = match reservoir.kind {
        ReservoirKind::MultiLevel => reservoir.n as f64,
        ReservoirKind::MultiAtom => 1.0,
    };
    Ok(MultilevelTemperatures {
        reservoir: reservoir.omega / (n * pg / pe).ln(),
        effective: reservoir.omega / (pg / pe).ln(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub gamma: f64,
    pub n_inf: f64,
    /// R² of the log-linear regression.
    pub r_squared: f64,
}

/// Extracts Γ from an exponential relaxation of n̄(t).
pub fn fit_decay_rate(series: &TimeSeries) -> Result<DecayFit> {
    fit_exponential_relaxation(&series.times, &series.n_mean)
}

pub fn fit_exponential_relaxation(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    let len = values.len();
    if len != times.len() {
        return Err(Error::Shape("times and values differ in length".into()));
    }
    if len < 100 {
        return Err(Error::Fit(format!("{len} samples, need at least 100")));
    }
    let tail = &values[len - (len / 10).max(1)..];
    let n_inf = tail.iter().sum::<f64>() / tail.len() as f64;
    let noise = (tail.iter().map(|v| (v - n_inf).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
    let gap = (values[0] - n_inf).abs();
    let span = (values[len - 1] - values[0]).abs();
    if !(span > 10.0 * noise) || gap == 0.0 {
        return Err(Error::Fit(format!("no visible relaxation (span {span:e}, noise {noise:e})")));
    }

    let threshold = 0.02 * gap;
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(_, v)| (*v - n_inf).abs() > threshold)
        .map(|(&t, v)| (t, (v - n_inf).abs().ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::Fit(format!("only {} samples inside the fit window", xs.len())));
    }
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate time axis".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(DecayFit { gamma: -slope, n_inf, r_squared })
}
