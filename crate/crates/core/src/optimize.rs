//! Optimality scans over the bipartite family and over pulse duration.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::analytic::{bipartite_sensitivity, signal_sensitivity};
use crate::error::{Error, Result};
use crate::io::Table;
use crate::numeric::{argmax, golden_section_max, linspace, refine_max_on_grid};
use crate::sequence::{make_bipartite, transition_probability};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeshareOptimum {
    pub k: f64,
    pub theta: f64,
    /// objective at (k, θ)
    pub value: f64,
}

const AXIS_TOL: f64 = 1e-11;

/// Grid argmax of `objective(k, θ)` followed by alternating golden-section
/// refinement along each axis within the neighbouring grid cells.
pub fn scan_objective<F>(objective: F, k_grid: &[f64], theta_grid: &[f64]) -> Result<TimeshareOptimum>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if k_grid.is_empty() || theta_grid.is_empty() {
        return Err(Error::Precondition("empty timeshare or phase grid".into()));
    }
    let values: Vec<f64> = k_grid
        .par_iter()
        .flat_map_iter(|&k| theta_grid.iter().map(move |&th| (k, th)))
        .map(|(k, th)| objective(k, th))
        .collect();
    let best = argmax(&values).ok_or_else(|| Error::Precondition("objective is NaN everywhere".into()))?;
    let (ik, it) = (best / theta_grid.len(), best % theta_grid.len());
    let bracket = |grid: &[f64], i: usize| (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)]);
    let (k_lo, k_hi) = bracket(k_grid, ik);
    let (t_lo, t_hi) = bracket(theta_grid, it);
    let mut k = k_grid[ik];
    let mut theta = theta_grid[it];
    let mut value = values[best];
    for _ in 0..8 {
        let before = (k, theta);
        if k_hi > k_lo {
            let (x, fx) = golden_section_max(|x| objective(x, theta), k_lo, k_hi, AXIS_TOL);
            if fx > value {
                k = x;
                value = fx;
            }
        }
        if t_hi > t_lo {
            let (x, fx) = golden_section_max(|x| objective(k, x), t_lo, t_hi, AXIS_TOL);
            if fx > value {
                theta = x;
                value = fx;
            }
        }
        if (k - before.0).abs() < AXIS_TOL && (theta - before.1).abs() < AXIS_TOL {
            break;
        }
    }
    Ok(TimeshareOptimum { k, theta, value })
}

/// Maximizes |η(k, θ)| of the bipartite family.
pub fn scan_timeshare_phase(
    rabi: f64,
    tau: f64,
    k_grid: &[f64],
    theta_grid: &[f64],
) -> Result<TimeshareOptimum> {
    scan_objective(|k, th| bipartite_sensitivity(rabi, tau, k, th).abs(), k_grid, theta_grid)
}

/// |∂p/∂δω| by central differences of exact propagators, step `h` (rad/s).
pub fn finite_difference_sensitivity(rabi: f64, tau: f64, k: f64, theta: f64, h: f64) -> f64 {
    let p = |dw: f64| {
        make_bipartite(rabi, tau, k.clamp(0.0, 1.0), theta, dw)
            .map(|s| transition_probability(&s))
            .unwrap_or(f64::NAN)
    };
    ((p(h) - p(-h)) / (2.0 * h)).abs()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivitySurface {
    /// rad/s
    pub omega_grid: Vec<f64>,
    /// s
    pub tau_grid: Vec<f64>,
    /// values[i][j] at (ω_i, τ_j)
    pub values: Vec<Vec<f64>>,
    /// (ω_i, τ*) maximizing row i; ties go to the smaller τ
    pub ridge: Vec<(f64, f64)>,
}

impl SensitivitySurface {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["omega_rad_s", "tau_s", "eta"]);
        for (i, &w) in self.omega_grid.iter().enumerate() {
            for (j, &tau) in self.tau_grid.iter().enumerate() {
                t.rows.push(vec![w, tau, self.values[i][j]]);
            }
        }
        t
    }

    pub fn ridge_table(&self) -> Table {
        let mut t = Table::new(["omega_rad_s", "tau_opt_s"]);
        for &(w, tau) in &self.ridge {
            t.rows.push(vec![w, tau]);
        }
        t
    }
}

/// Largest allowed τ: π/Ω (α ≤ 90°), or 2π/Ω (α ≤ π) when `extended`.
pub fn tau_limit(rabi: f64, extended: bool) -> f64 {
    if extended {
        2.0 * PI / rabi
    } else {
        PI / rabi
    }
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|p| p[1] > p[0])
}

/// Calibrated sensitivity |c(α)|·√(2π)·K(ω) over an (ω, τ) grid.
pub fn sensitivity_surface(
    rabi: f64,
    omega_grid: &[f64],
    tau_grid: &[f64],
    extended: bool,
) -> Result<SensitivitySurface> {
    if !(rabi > 0.0) {
        return Err(crate::error::domain("rabi", rabi, "Ω > 0"));
    }
    if omega_grid.is_empty() || tau_grid.is_empty() || !strictly_increasing(omega_grid) || !strictly_increasing(tau_grid) {
        return Err(Error::Precondition("surface grids must be non-empty and strictly increasing".into()));
    }
    let limit = tau_limit(rabi, extended);
    if tau_grid[0] <= 0.0 || *tau_grid.last().unwrap() > limit * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "τ grid must lie in (0, {limit:e}] s{}",
            if extended { "" } else { "; pass the extended flag for α up to π" }
        )));
    }
    let values: Vec<Vec<f64>> = omega_grid
        .par_iter()
        .map(|&w| tau_grid.iter().map(|&tau| signal_sensitivity(w, rabi, tau)).collect())
        .collect();
    let ridge = omega_grid
        .iter()
        .zip(&values)
        .map(|(&w, row)| (w, tau_grid[argmax(row).unwrap_or(0)]))
        .collect();
    Ok(SensitivitySurface {
        omega_grid: omega_grid.to_vec(),
        tau_grid: tau_grid.to_vec(),
        values,
        ridge,
    })
}

/// Default surface axes: ω ∈ [0, 4Ω], τ ∈ (0, π/Ω].
pub fn default_surface_grids(rabi: f64, n_omega: usize, n_tau: usize) -> (Vec<f64>, Vec<f64>) {
    let omega = linspace(0.0, 4.0 * rabi, n_omega);
    let tmax = tau_limit(rabi, false);
    let tau = (1..=n_tau).map(|j| tmax * j as f64 / n_tau as f64).collect();
    (omega, tau)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalDuration {
    pub tau: f64,
    pub value: f64,
    /// Set when the grid cannot resolve the objective's oscillation in τ or
    /// the objective is flat.
    pub low_confidence: bool,
}

const DURATION_GRID: usize = 512;

/// Maximizes the calibrated sensitivity over τ ∈ (0, π/Ω].
pub fn optimal_duration(omega: f64, rabi: f64) -> Result<OptimalDuration> {
    optimal_duration_in(omega, rabi, tau_limit(rabi, false), DURATION_GRID)
}

/// As [`optimal_duration`] on τ ∈ (0, tau_max] with an `n`-point coarse grid.
pub fn optimal_duration_in(omega: f64, rabi: f64, tau_max: f64, n: usize) -> Result<OptimalDuration> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(crate::error::domain("omega", omega, "ω ≥ 0"));
    }
    if !(rabi > 0.0 && tau_max > 0.0 && n >= 2) {
        return Err(Error::Precondition("need Ω > 0, τ_max > 0 and at least 2 grid points".into()));
    }
    let grid: Vec<f64> = (1..=n).map(|j| tau_max * j as f64 / n as f64).collect();
    let f = |tau: f64| signal_sensitivity(omega, rabi, tau);
    let (tau, value) = refine_max_on_grid(f, &grid, 1e-9 * tau_max)
        .ok_or_else(|| Error::Precondition("objective undefined on grid".into()))?;
    let step = tau_max / n as f64;
    let min = grid.iter().map(|&t| f(t)).fold(f64::INFINITY, f64::min);
    let unresolved = omega > 0.0 && 4.0 * PI / omega < 8.0 * step;
    let flat = !(value - min > 1e-12 * value.abs().max(f64::MIN_POSITIVE));
    Ok(OptimalDuration {
        tau,
        value,
        low_confidence: unresolved || flat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn grids() -> (Vec<f64>, Vec<f64>) {
        (linspace(0.0, 1.0, 41), linspace(0.0, PI, 41))
    }

    #[test]
    fn bipartite_optimum_is_equal_split_and_quarter_turn() {
        let (kg, tg) = grids();
        for x in [0.3, 1.0, 2.0, 2.8, PI] {
            let opt = scan_timeshare_phase(1.0, x, &kg, &tg).unwrap();
            assert!((opt.k - 0.5).abs() < 1e-6, "{x}: {opt:?}");
            assert!((opt.theta - FRAC_PI_2).abs() < 1e-6, "{x}: {opt:?}");
        }
    }

    #[test]
    fn zero_phase_grid_is_degenerate() {
        let opt = scan_timeshare_phase(1.0, 2.0, &linspace(0.0, 1.0, 11), &[0.0]).unwrap();
        assert_eq!(opt.value, 0.0);
    }

    #[test]
    fn finite_difference_argmax_agrees() {
        let (kg, tg) = grids();
        let w = 1.0;
        let tau = 2.5;
        let fd = scan_objective(|k, th| finite_difference_sensitivity(w, tau, k, th, 1e-4), &kg, &tg).unwrap();
        assert!((fd.k - 0.5).abs() < 1e-5, "{fd:?}");
        assert!((fd.theta - FRAC_PI_2).abs() < 1e-5, "{fd:?}");
        let analytic = bipartite_sensitivity(w, tau, 0.5, FRAC_PI_2).abs();
        assert!((fd.value - analytic).abs() < 1e-7);
    }

    #[test]
    fn dc_row_is_monotone_and_peaks_at_ninety_degrees() {
        let w = 1.0;
        let (omegas, taus) = default_surface_grids(w, 5, 400);
        let s = sensitivity_surface(w, &omegas, &taus, false).unwrap();
        assert!(s.values[0].windows(2).all(|p| p[1] >= p[0]));
        assert_eq!(s.ridge[0].1, PI / w);
        let opt = optimal_duration(0.0, w).unwrap();
        assert!((opt.tau - PI / w).abs() < 1e-9);
    }

    #[test]
    fn extended_range_needs_flag() {
        let w = 1.0;
        let taus = linspace(0.1, 1.5 * PI, 30);
        assert!(sensitivity_surface(w, &[0.0], &taus, false).is_err());
        let s = sensitivity_surface(w, &[0.0], &taus, true).unwrap();
        // unconstrained DC optimum lies beyond 90°
        assert!(s.ridge[0].1 > PI / w);
    }

    #[test]
    fn rows_above_first_root_oscillate() {
        let w = 1.0;
        let taus: Vec<f64> = (1..=400).map(|j| PI * j as f64 / 400.0).collect();
        let s = sensitivity_surface(w, &[6.0], &taus, false).unwrap();
        let row = &s.values[0];
        // |K| has zeros: local minima that touch ~0
        let min_interior = row[50..].iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min_interior < 1e-2 * row.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn ridge_matches_optimal_duration() {
        let w = 1.0;
        let (omegas, taus) = default_surface_grids(w, 33, 2000);
        let s = sensitivity_surface(w, &omegas, &taus, false).unwrap();
        let step = taus[1] - taus[0];
        for &(om, tau_grid) in &s.ridge {
            let opt = optimal_duration(om, w).unwrap();
            assert!((opt.tau - tau_grid).abs() <= step, "ω = {om}: {} vs {tau_grid}", opt.tau);
        }
    }

    #[test]
    fn ridge_is_continuous_and_decreasing() {
        let w = 1.0;
        let (omegas, taus) = default_surface_grids(w, 161, 4000);
        let s = sensitivity_surface(w, &omegas, &taus, false).unwrap();
        let step = taus[1] - taus[0];
        for p in s.ridge.windows(2) {
            assert!(p[1].1 <= p[0].1, "{p:?}");
            assert!(p[0].1 - p[1].1 < 0.05 * PI, "jump {p:?}");
        }
        assert!(s.ridge.last().unwrap().1 < s.ridge[0].1 - 100.0 * step);
    }

    #[test]
    fn resonant_signal_matches_dense_scan() {
        let w = 1.0;
        let opt = optimal_duration(w, w).unwrap();
        let n = 100_000;
        let (mut best_t, mut best) = (0.0, f64::MIN);
        for j in 1..=n {
            let t = PI * j as f64 / n as f64;
            let v = signal_sensitivity(w, w, t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        assert!((opt.tau - best_t).abs() < 2.0 * PI / n as f64, "{} vs {best_t}", opt.tau);
        assert!(opt.value >= best - 1e-15);
        assert!(!opt.low_confidence);
    }

    #[test]
    fn huge_frequency_is_low_confidence() {
        let opt = optimal_duration(1e6, 1.0).unwrap();
        assert!(opt.low_confidence);
        assert!(optimal_duration(-1.0, 1.0).is_err());
    }

    #[test]
    fn surface_table_shapes() {
        let (omegas, taus) = default_surface_grids(1.0, 3, 4);
        let s = sensitivity_surface(1.0, &omegas, &taus, false).unwrap();
        assert_eq!(s.to_table().rows.len(), 12);
        assert_eq!(s.ridge_table().headers, ["omega_rad_s", "tau_opt_s"]);
    }

    proptest! {
        #[test]
        fn timeshare_symmetry(x in 0.05..PI, k in 0.0..1.0f64, th in 0.0..PI) {
            let a = bipartite_sensitivity(1.0, x, k, th);
            let b = bipartite_sensitivity(1.0, x, 1.0 - k, th);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn argmax_invariant_under_amplitude_scaling(x in 0.2..PI, scale in 1e-3..1e3f64) {
            let (kg, tg) = (linspace(0.0, 1.0, 21), linspace(0.0, PI, 21));
            let a = scan_objective(|k, th| bipartite_sensitivity(1.0, x, k, th).abs(), &kg, &tg).unwrap();
            let b = scan_objective(|k, th| scale * bipartite_sensitivity(1.0, x, k, th).abs(), &kg, &tg).unwrap();
            prop_assert!((a.k - b.k).abs() < 1e-6 && (a.theta - b.theta).abs() < 1e-6);
            let wa = optimal_duration(x, 1.0).unwrap().tau;
            let wb = optimal_duration_in(x, 1.0, PI, 512).unwrap().tau;
            prop_assert_eq!(wa, wb);
        }

        #[test]
        fn refinement_never_loses_to_grid(om in 0.0..4.0f64) {
            let opt = optimal_duration(om, 1.0).unwrap();
            let grid_best = (1..=DURATION_GRID)
                .map(|j| signal_sensitivity(om, 1.0, PI * j as f64 / DURATION_GRID as f64))
                .fold(f64::MIN, f64::max);
            prop_assert!(opt.value >= grid_best);
        }
    }
}
