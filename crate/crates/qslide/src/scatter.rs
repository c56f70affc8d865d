//! Stationary plane-wave scattering through a widget.
//!
//! The widget sits between semi-infinite uniform leads with coupling 1
//! (widget couplings in the description files are already relative to the
//! wire, so no rescaling is needed). A unit-amplitude wave of momentum
//! k in (-pi, 0) comes in on the first input lead at energy E = 2 cos k.
//! Eliminating the leads leaves a finite linear system over the widget
//! sites: each lead adds a self-energy e^{ik} at its attachment site, and
//! the incident wave sources -2i sin k at the excited port. Reflection
//! and transmission amplitudes are read off the port-site amplitudes.
//!
//! A two-site bare wire solves to T = e^{ik}: each extra pass-through
//! site multiplies by the free propagation phase e^{ik}.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::analytic::wrap_phase;
use crate::assembly::Widget;
use crate::error::{QslideError, Result};

/// Scattering amplitudes at one momentum. `reflection[j]` is the outgoing
/// amplitude on input lead j (unity subtracted on the excited lead);
/// `transmission[j]` the outgoing amplitude on output lead j. Leads are
/// ordered as in the widget's port list.
#[derive(Debug, Clone)]
pub struct ScatterSolution {
    pub k: f64,
    pub energy: f64,
    pub reflection: Vec<Complex64>,
    pub transmission: Vec<Complex64>,
    pub internal_amplitudes: Vec<Complex64>,
}

impl ScatterSolution {
    /// Total outgoing probability; 1 for any real k off resonance.
    pub fn flux(&self) -> f64 {
        self.reflection.iter().map(|z| z.norm_sqr()).sum::<f64>()
            + self.transmission.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// Partial-pivot Gaussian elimination on a dense complex system.
/// Singularity (a bound state crossing the scattering energy) is reported
/// through `on_singular`.
fn solve_complex(
    mut m: Vec<Vec<Complex64>>,
    mut rhs: Vec<Complex64>,
    on_singular: impl Fn() -> QslideError,
) -> Result<Vec<Complex64>> {
    let n = rhs.len();
    let scale = m
        .iter()
        .flatten()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max)
        .max(1.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| {
                m[a][col]
                    .norm()
                    .partial_cmp(&m[b][col].norm())
                    .expect("pivot NaN")
            })
            .expect("non-empty column");
        if m[pivot][col].norm() < 1e-12 * scale {
            return Err(on_singular());
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = m[row][col] / m[col][col];
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in col..n {
                let sub = factor * m[col][c];
                m[row][c] -= sub;
            }
            let sub = factor * rhs[col];
            rhs[row] -= sub;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in (row + 1)..n {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

/// Solve the lead-matching system at momentum k, exciting the first input
/// port. Errors on a singular system (resonance at that energy) and on
/// flux leaking by more than 1e-10.
pub fn solve_plane_wave(widget: &Widget, k: f64) -> Result<ScatterSolution> {
    if !(k > -PI && k < 0.0) {
        return Err(QslideError::Domain(format!(
            "momentum {k} outside the band (-pi, 0)"
        )));
    }
    let n = widget.n_sites;
    let energy = 2.0 * k.cos();
    let phase = Complex64::from_polar(1.0, k);
    let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(energy, 0.0);
    }
    for &(i, j, c) in &widget.edges {
        m[i][j] -= c;
        m[j][i] -= c;
    }
    for p in &widget.ports {
        m[p.site][p.site] -= phase;
    }
    let inputs = widget.input_ports();
    let outputs = widget.output_ports();
    let excited = inputs[0].site;
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    rhs[excited] = Complex64::new(0.0, -2.0 * k.sin());
    let psi = solve_complex(m, rhs, || QslideError::Resonance { energy })?;

    let reflection: Vec<Complex64> = inputs
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let one = if j == 0 { 1.0 } else { 0.0 };
            psi[p.site] - one
        })
        .collect();
    let transmission: Vec<Complex64> = outputs.iter().map(|p| psi[p.site]).collect();
    let sol = ScatterSolution {
        k,
        energy,
        reflection,
        transmission,
        internal_amplitudes: psi,
    };
    let flux = sol.flux();
    if (flux - 1.0).abs() > 1e-10 {
        return Err(QslideError::Numerical(format!(
            "flux conservation violated at k = {k}: total outgoing probability {flux}"
        )));
    }
    Ok(sol)
}

/// Elementwise [`solve_plane_wave`] over a momentum grid; per-point
/// failures are tagged with the grid index.
pub fn sweep_k(widget: &Widget, k_grid: &[f64]) -> Result<Vec<ScatterSolution>> {
    k_grid
        .iter()
        .enumerate()
        .map(|(idx, &k)| {
            solve_plane_wave(widget, k).map_err(|e| {
                QslideError::Numerical(format!("scatter sweep failed at grid index {idx} (k = {k}): {e}"))
            })
        })
        .collect()
}

/// Transmitted phase of the widget relative to the bare wire it replaces,
/// wrapped to (-pi, pi]. The phase-gate widget returns +pi/4 at k = -pi/4.
pub fn transmitted_phase_offset(widget: &Widget, k: f64) -> Result<f64> {
    let sol = solve_plane_wave(widget, k)?;
    let reference = Widget::bare_wire(widget.replaces.max(1));
    let ref_sol = solve_plane_wave(&reference, k)?;
    Ok(wrap_phase(
        sol.transmission[0].arg() - ref_sol.transmission[0].arg(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::transmission_b;
    use crate::assembly::{builtin_widget, Port, PortDirection, Widget};

    fn grid(n: usize) -> Vec<f64> {
        (1..=n).map(|j| -PI + j as f64 * PI / (n + 1) as f64).collect()
    }

    #[test]
    fn bare_wire_is_free_propagation() {
        for n in 1..=4 {
            let w = Widget::bare_wire(n);
            for &k in &grid(17) {
                let sol = solve_plane_wave(&w, k).unwrap();
                assert!(sol.reflection[0].norm() < 1e-12);
                let want = Complex64::from_polar(1.0, k * (n as f64 - 1.0));
                assert!(
                    (sol.transmission[0] - want).norm() < 1e-12,
                    "n={n} k={k}"
                );
            }
        }
    }

    #[test]
    fn phase_gate_matches_closed_form() {
        let w = builtin_widget("ub").unwrap();
        let mut worst = 0.0f64;
        for &k in &grid(200) {
            let sol = solve_plane_wave(&w, k).unwrap();
            worst = worst.max((sol.transmission[0].norm_sqr() - transmission_b(k).unwrap()).abs());
        }
        assert!(worst < 1e-12, "max deviation {worst}");
        let sol = solve_plane_wave(&w, -PI / 4.0).unwrap();
        assert!((sol.transmission[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn phase_gate_offset_over_replaced_wire() {
        let w = builtin_widget("ub").unwrap();
        let off = transmitted_phase_offset(&w, -PI / 4.0).unwrap();
        assert!((off - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn beam_splitter_amplitudes_at_quarter_band() {
        let w = builtin_widget("uc").unwrap();
        let sol = solve_plane_wave(&w, -PI / 4.0).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert!(sol.reflection[0].norm() < 1e-12);
        assert!(sol.reflection[1].norm() < 1e-12);
        assert!((sol.transmission[0] - Complex64::new(0.0, -s)).norm() < 1e-12);
        assert!((sol.transmission[1] - Complex64::new(-s, 0.0)).norm() < 1e-12);
        assert!((sol.transmission[0].norm_sqr() - 0.5).abs() < 1e-12);
        assert!((sol.transmission[1].norm_sqr() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flux_conserved_across_band() {
        // The kite carries a genuine dark state at E = 0, so the exact
        // k = -pi/2 grid point reports a resonance rather than a solution.
        let mut resonances = 0;
        for name in ["ub", "uc"] {
            let w = builtin_widget(name).unwrap();
            for &k in &grid(101) {
                match solve_plane_wave(&w, k) {
                    Ok(sol) => {
                        assert!((sol.flux() - 1.0).abs() < 1e-12, "{name} k={k}")
                    }
                    Err(QslideError::Resonance { energy }) => {
                        assert!(energy.abs() < 1e-12, "{name} k={k}");
                        resonances += 1;
                    }
                    Err(e) => panic!("{name} k={k}: {e}"),
                }
            }
        }
        assert!(resonances <= 2);
    }

    #[test]
    fn reciprocity_under_port_swap() {
        let w = builtin_widget("uc").unwrap();
        let mut swapped = w.clone();
        for p in &mut swapped.ports {
            p.direction = match p.direction {
                PortDirection::In => PortDirection::Out,
                PortDirection::Out => PortDirection::In,
            };
        }
        // Restore ordering: inputs first.
        swapped.ports.sort_by_key(|p| (p.direction == PortDirection::Out, p.rail));
        for &k in &grid(23) {
            let a = solve_plane_wave(&w, k).unwrap();
            let b = solve_plane_wave(&swapped, k).unwrap();
            for j in 0..2 {
                assert!(
                    (a.transmission[j].norm() - b.transmission[j].norm()).abs() < 1e-10,
                    "k={k} rail={j}"
                );
            }
        }
    }

    #[test]
    fn dark_state_reports_resonance() {
        // Two pendant sites make a zero-energy state decoupled from the
        // leads; at k = -pi/2 the scattering energy hits it.
        let w = Widget {
            n_sites: 3,
            edges: vec![(0, 1, 1.0), (0, 2, 1.0)],
            ports: vec![
                Port {
                    site: 0,
                    direction: PortDirection::In,
                    rail: 0,
                },
                Port {
                    site: 0,
                    direction: PortDirection::Out,
                    rail: 0,
                },
            ],
            replaces: 1,
            phase_label: crate::assembly::WidgetBehavior::Passthrough,
        };
        match solve_plane_wave(&w, -PI / 2.0) {
            Err(QslideError::Resonance { energy }) => assert!(energy.abs() < 1e-12),
            other => panic!("expected resonance, got {other:?}"),
        }
    }

    #[test]
    fn out_of_band_momentum_rejected() {
        let w = Widget::bare_wire(2);
        assert!(solve_plane_wave(&w, 0.0).is_err());
        assert!(solve_plane_wave(&w, -PI).is_err());
        assert!(solve_plane_wave(&w, 0.3).is_err());
    }
}
