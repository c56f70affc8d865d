//! Physics extraction from trajectories: momentum spectra, packet
//! statistics, transmission and gate reports, and the switch-time tuning
//! loop.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::analytic::{self, wrap_phase, GaussianPacket};
use crate::assembly::{RoleKind, WalkGraph};
use crate::error::{QslideError, Result};
use crate::propagate::{evolve_with, make_switch_schedule, PacketState, Propagator};

/// Windowed momentum density over an ascending k-grid in (-pi, pi],
/// normalized so that sum(density) * grid spacing = in-window probability.
#[derive(Debug, Clone)]
pub struct MomentumSpectrum {
    pub k_grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl MomentumSpectrum {
    pub fn grid_spacing(&self) -> f64 {
        2.0 * PI / self.k_grid.len() as f64
    }

    /// Total spectral weight; equals the window probability (Parseval).
    pub fn total_weight(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid_spacing()
    }

    /// Peak momentum, refined by a quadratic fit through the maximum bin
    /// and its two (cyclic) neighbors.
    pub fn peak(&self) -> f64 {
        let m = self.density.len();
        let j = self
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("density NaN"))
            .map(|(j, _)| j)
            .expect("non-empty spectrum");
        let y0 = self.density[(j + m - 1) % m];
        let y1 = self.density[j];
        let y2 = self.density[(j + 1) % m];
        let denom = y0 - 2.0 * y1 + y2;
        let delta = if denom.abs() < 1e-300 {
            0.0
        } else {
            0.5 * (y0 - y2) / denom
        };
        wrap_phase(self.k_grid[j] + delta.clamp(-0.5, 0.5) * self.grid_spacing())
    }

    /// CSV rows (k, density).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,density\n");
        for (k, d) in self.k_grid.iter().zip(&self.density) {
            out.push_str(&format!("{k:.16e},{d:.16e}\n"));
        }
        out
    }
}

fn check_window(window: &[usize], n_sites: usize, contiguous: bool) -> Result<()> {
    if window.is_empty() {
        return Err(QslideError::Range("empty site window".into()));
    }
    for &s in window {
        if s >= n_sites {
            return Err(QslideError::Range(format!(
                "window site {s} outside graph of {n_sites} sites"
            )));
        }
    }
    if contiguous {
        for pair in window.windows(2) {
            if pair[1] != pair[0] + 1 {
                return Err(QslideError::Range(format!(
                    "window must be contiguous; gap between {} and {}",
                    pair[0], pair[1]
                )));
            }
        }
    }
    Ok(())
}

/// Momentum density of the packet restricted to a contiguous window,
/// over a 4x zero-padded DFT grid. A site phase e^{i theta x} peaks at
/// k = theta.
pub fn momentum_spectrum(state: &PacketState, window: &[usize]) -> Result<MomentumSpectrum> {
    check_window(window, state.amplitudes.len(), true)?;
    let m = 4 * window.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (i, &s) in window.iter().enumerate() {
        buf[i] = state.amplitudes[s];
    }
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    // Ascending grid k_o = -pi + (o+1) dk, o = 0..m; the DFT bin holding
    // frequency k/(2pi) is (o + 1 + m/2) mod m. m is divisible by 4.
    let dk = 2.0 * PI / m as f64;
    let mut k_grid = Vec::with_capacity(m);
    let mut density = Vec::with_capacity(m);
    for o in 0..m {
        k_grid.push(-PI + (o + 1) as f64 * dk);
        let bin = (o + 1 + m / 2) % m;
        density.push(buf[bin].norm_sqr() / (2.0 * PI));
    }
    Ok(MomentumSpectrum { k_grid, density })
}

/// Refined peak momentum, requiring the window to hold at least 95% of
/// the packet probability so the peak is trustworthy.
pub fn peak_momentum(state: &PacketState, window: &[usize]) -> Result<f64> {
    let spectrum = momentum_spectrum(state, window)?;
    let total = state.norm().powi(2);
    let held = state.probability(window);
    if held < 0.95 * total {
        return Err(QslideError::Domain(format!(
            "window holds {:.1}% of the packet; peak extraction needs 95%",
            100.0 * held / total
        )));
    }
    Ok(spectrum.peak())
}

/// Probability-weighted centroid, standard deviation, and total
/// probability of |psi|^2 over a window.
pub fn packet_stats(state: &PacketState, window: &[usize]) -> Result<(f64, f64, f64)> {
    check_window(window, state.amplitudes.len(), false)?;
    let prob: f64 = state.probability(window);
    if prob == 0.0 {
        return Err(QslideError::UndefinedStats(
            "window carries zero probability".into(),
        ));
    }
    let center = window
        .iter()
        .map(|&s| s as f64 * state.amplitudes[s].norm_sqr())
        .sum::<f64>()
        / prob;
    let var = window
        .iter()
        .map(|&s| (s as f64 - center).powi(2) * state.amplitudes[s].norm_sqr())
        .sum::<f64>()
        / prob;
    Ok((center, var.max(0.0).sqrt(), prob))
}

/// Gate-run scorecard. `transmission` is the final-time probability on all
/// output wires; `relative_phase` compares rail 1 to rail 0 (zero for
/// single-rail circuits); `reference_overlap_fidelity` scores the output
/// packet against the reference run combined with the ideal gate;
/// `peak_momentum_at_switch` is read on the input wire at the last
/// snapshot where it holds the packet (absent when none does).
#[derive(Debug, Clone, serde::Serialize)]
pub struct GateRunReport {
    pub transmission: f64,
    pub per_rail_probability: Vec<f64>,
    pub relative_phase: f64,
    pub reference_overlap_fidelity: f64,
    pub peak_momentum_at_switch: Option<f64>,
}

/// Ideal single-rail phase gate diag(e^{i pi/4}, 1).
pub fn ideal_gate_b() -> [[Complex64; 2]; 2] {
    [
        [Complex64::from_polar(1.0, PI / 4.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    ]
}

/// Ideal beam splitter -(1/sqrt 2) [[i, 1], [1, i]].
pub fn ideal_gate_c() -> [[Complex64; 2]; 2] {
    let s = -1.0 / 2.0f64.sqrt();
    [
        [Complex64::new(0.0, s), Complex64::new(s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(0.0, s)],
    ]
}

/// Identity gate, for scoring a reference run against itself.
pub fn ideal_gate_identity() -> [[Complex64; 2]; 2] {
    [
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    ]
}

/// Score a gate run against its widget-free reference run.
///
/// Both trajectories must be sampled at identical times, and every output
/// wire must match the reference output wire in length. The fidelity is
/// |sum_j alpha_j^* <phi_ref|psi_j>|^2 / ||phi_ref||^4 with
/// (alpha_0, alpha_1) = ideal_gate (1, 0)^T, psi_j the rail-j output
/// packet, and phi_ref the reference output packet; gate and reference
/// packets are aligned by the widget's bare-wire-equivalent length before
/// the overlap.
pub fn gate_report(
    trajectory: &[PacketState],
    graph: &WalkGraph,
    reference_trajectory: &[PacketState],
    reference_graph: &WalkGraph,
    ideal_gate: [[Complex64; 2]; 2],
) -> Result<GateRunReport> {
    if trajectory.is_empty() || reference_trajectory.is_empty() {
        return Err(QslideError::Comparison("empty trajectory".into()));
    }
    if trajectory.len() != reference_trajectory.len() {
        return Err(QslideError::Comparison(format!(
            "trajectory lengths differ: {} vs {}",
            trajectory.len(),
            reference_trajectory.len()
        )));
    }
    for (s, r) in trajectory.iter().zip(reference_trajectory) {
        if (s.time - r.time).abs() > 1e-9 * s.time.abs().max(1.0) {
            return Err(QslideError::Comparison(format!(
                "sample times differ: {} vs {}",
                s.time, r.time
            )));
        }
    }

    let rails: Vec<u8> = [0u8, 1]
        .into_iter()
        .filter(|&r| !graph.role_range(RoleKind::OutputWire, Some(r)).is_empty())
        .collect();
    let out_ranges: Vec<Vec<usize>> = rails
        .iter()
        .map(|&r| graph.role_range(RoleKind::OutputWire, Some(r)))
        .collect();
    let ref_range = reference_graph.role_range(RoleKind::OutputWire, Some(0));
    for range in &out_ranges {
        if range.len() != ref_range.len() {
            return Err(QslideError::Comparison(format!(
                "output wire lengths differ: {} vs reference {}",
                range.len(),
                ref_range.len()
            )));
        }
    }
    if reference_graph.widget_replaces < graph.widget_replaces {
        return Err(QslideError::Comparison(
            "reference effective path is shorter than the gate path".into(),
        ));
    }
    let shift = reference_graph.widget_replaces - graph.widget_replaces;
    if shift >= ref_range.len() {
        return Err(QslideError::Comparison(format!(
            "alignment shift {shift} exceeds the output wire"
        )));
    }

    let last = trajectory.last().expect("non-empty");
    let ref_last = reference_trajectory.last().expect("non-empty");

    let per_rail_probability: Vec<f64> =
        out_ranges.iter().map(|r| last.probability(r)).collect();
    let transmission: f64 = per_rail_probability.iter().sum();

    let relative_phase = if out_ranges.len() == 2 {
        let inner: Complex64 = out_ranges[0]
            .iter()
            .zip(&out_ranges[1])
            .map(|(&s0, &s1)| last.amplitudes[s0].conj() * last.amplitudes[s1])
            .sum();
        if inner.norm() == 0.0 {
            0.0
        } else {
            inner.arg()
        }
    } else {
        0.0
    };

    let phi_norm2: f64 = ref_last.probability(&ref_range);
    if phi_norm2 < 1e-6 {
        return Err(QslideError::Comparison(format!(
            "reference packet is not on the output wire (probability {phi_norm2:.3e})"
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, range) in out_ranges.iter().enumerate() {
        let alpha = ideal_gate[j][0];
        let mut inner = Complex64::new(0.0, 0.0);
        for i in 0..(range.len() - shift) {
            inner += ref_last.amplitudes[ref_range[i]].conj()
                * last.amplitudes[range[i + shift]];
        }
        acc += alpha.conj() * inner;
    }
    let reference_overlap_fidelity = acc.norm_sqr() / (phi_norm2 * phi_norm2);

    let input = graph.role_range(RoleKind::InputWire, Some(0));
    let mut peak_momentum_at_switch = None;
    for state in trajectory {
        let total = state.norm().powi(2);
        if !input.is_empty() && state.probability(&input) >= 0.95 * total {
            peak_momentum_at_switch = Some(momentum_spectrum(state, &input)?.peak());
        }
    }

    Ok(GateRunReport {
        transmission,
        per_rail_probability,
        relative_phase,
        reference_overlap_fidelity,
        peak_momentum_at_switch,
    })
}

/// Field slope a recovered from the slide's linear field B_n = a n.
fn slide_slope(graph: &WalkGraph) -> Result<f64> {
    if graph.slide_sites.len() < 2 {
        return Err(QslideError::Domain(
            "graph has no slide to launch from".into(),
        ));
    }
    Ok(graph.fields[graph.slide_sites[1]])
}

/// Predicted packet and wire group velocity for a launch switched off at
/// t_off. The slide of length L continues a virtual degree-(2L-1) chain,
/// so the analytic packet parameters apply directly; the wire speed is
/// 2 J |sin theta| with J the wire coupling.
pub fn launch_parameters(graph: &WalkGraph, t_off: f64) -> Result<(GaussianPacket, f64)> {
    let a = slide_slope(graph)?;
    let l = graph.slide_sites.len();
    let packet = analytic::gaussian_packet(2 * l - 1, a, t_off)?;
    let v = 2.0 * graph.wire_coupling() * packet.momentum.sin().abs();
    if v < 1e-9 * graph.wire_coupling() {
        return Err(QslideError::Tuning(format!(
            "packet momentum {} gives no group velocity",
            packet.momentum
        )));
    }
    Ok((packet, v))
}

/// Sites along the travel path from the packet centroid at switch-off to
/// `sites_past_junction` sites beyond the slide-wire junction.
fn path_time(graph: &WalkGraph, t_off: f64, sites_past_junction: f64) -> Result<f64> {
    let (packet, v) = launch_parameters(graph, t_off)?;
    let l = graph.slide_sites.len() as f64;
    let dist = (l - packet.center) + sites_past_junction;
    Ok(t_off + dist.max(0.0) / v)
}

/// Default final sample time: the packet centroid reaches the midpoint of
/// the output wire (group-velocity prediction).
pub fn default_final_time(graph: &WalkGraph, t_off: f64) -> Result<f64> {
    let input_len = graph.role_range(RoleKind::InputWire, Some(0)).len() as f64;
    let out_len = graph.role_range(RoleKind::OutputWire, Some(0)).len() as f64;
    path_time(
        graph,
        t_off,
        input_len + graph.widget_replaces as f64 + 0.5 * out_len,
    )
}

/// Sample time for reading the packet momentum: the centroid reaches the
/// midpoint of the input wire.
pub fn momentum_read_time(graph: &WalkGraph, t_off: f64) -> Result<f64> {
    let input_len = graph.role_range(RoleKind::InputWire, Some(0)).len() as f64;
    path_time(graph, t_off, 0.5 * input_len)
}

/// What tune_switch_time optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneObjective {
    /// Minimize |peak momentum - (-pi/4)| on the input wire after the
    /// packet has fully left the slide.
    PeakMomentum,
    /// Maximize the output-wire probability at the default final time.
    Transmission,
}

/// Analytic switch time putting the packet momentum at -pi/4, from
/// inverting theta(t, a): with tau = t/b, the momentum obeys
/// tan(theta + pi/2) = (2p - 1) tan(tau/2) on a monotone branch.
/// None when -pi/4 is never reached: a = 0 pins the momentum to -pi/2,
/// and a > 0 sweeps it the other way, from -pi/2 toward -pi.
pub fn analytic_switch_seed(a: f64) -> Option<f64> {
    if a >= 0.0 {
        return None;
    }
    let b = analytic::period_scale(a);
    Some(2.0 * b * (1.0 / (a.abs() * b)).atan())
}

struct TuneEvaluator<'g> {
    graph: &'g WalkGraph,
    prop: Propagator,
    objective: TuneObjective,
    input: Vec<usize>,
    outputs: Vec<Vec<usize>>,
}

impl<'g> TuneEvaluator<'g> {
    fn new(graph: &'g WalkGraph, objective: TuneObjective) -> Result<Self> {
        let outputs = [0u8, 1]
            .into_iter()
            .map(|r| graph.role_range(RoleKind::OutputWire, Some(r)))
            .filter(|r| !r.is_empty())
            .collect();
        Ok(TuneEvaluator {
            graph,
            prop: Propagator::new(graph)?,
            objective,
            input: graph.role_range(RoleKind::InputWire, Some(0)),
            outputs,
        })
    }

    /// Score to maximize; errors mark the candidate as non-evaluable.
    fn score(&self, t_off: f64) -> Result<f64> {
        let t_meas = match self.objective {
            TuneObjective::PeakMomentum => momentum_read_time(self.graph, t_off)?,
            TuneObjective::Transmission => default_final_time(self.graph, t_off)?,
        };
        let schedule = make_switch_schedule(self.graph, t_off, t_meas, &[t_meas])?;
        let initial = PacketState::delta(self.graph.n_sites, 0);
        let states = evolve_with(&self.prop, &schedule, &initial)?;
        let state = &states[0];
        match self.objective {
            TuneObjective::PeakMomentum => {
                let peak = peak_momentum(state, &self.input)?;
                Ok(-(peak - (-PI / 4.0)).abs())
            }
            TuneObjective::Transmission => Ok(self
                .outputs
                .iter()
                .map(|r| state.probability(r))
                .sum::<f64>()),
        }
    }
}

/// Find the switch-off time in `t_range` optimizing the objective: grid
/// search (seeded with the analytic momentum inversion when it falls in
/// range) followed by golden-section refinement between the best grid
/// point's neighbors. A degenerate range returns its left edge.
pub fn tune_switch_time(
    graph: &WalkGraph,
    objective: TuneObjective,
    t_range: (f64, f64),
    grid: usize,
) -> Result<f64> {
    let a = slide_slope(graph)?;
    let b = analytic::period_scale(a);
    let (t_lo, t_hi) = t_range;
    if !(t_lo > 0.0 && t_lo <= t_hi && t_hi < 2.0 * b * PI) {
        return Err(QslideError::Domain(format!(
            "tuning range ({t_lo}, {t_hi}) outside the slide period (0, {})",
            2.0 * b * PI
        )));
    }
    if t_lo == t_hi {
        return Ok(t_lo);
    }
    if grid < 8 {
        return Err(QslideError::Domain(format!(
            "tuning grid must have at least 8 points, got {grid}"
        )));
    }

    let eval = TuneEvaluator::new(graph, objective)?;
    let mut candidates: Vec<f64> = (0..grid)
        .map(|i| t_lo + (t_hi - t_lo) * i as f64 / (grid - 1) as f64)
        .collect();
    if let Some(seed) = analytic_switch_seed(a) {
        if seed > t_lo && seed < t_hi {
            candidates.push(seed);
            candidates.sort_by(|x, y| x.partial_cmp(y).expect("candidate NaN"));
        }
    }

    let mut last_err = None;
    let mut scored: Vec<(f64, Option<f64>)> = Vec::with_capacity(candidates.len());
    for &t in &candidates {
        match eval.score(t) {
            Ok(s) => scored.push((t, Some(s))),
            Err(e) => {
                last_err = Some(e);
                scored.push((t, None));
            }
        }
    }
    let best_idx = match scored
        .iter()
        .enumerate()
        .filter_map(|(i, (_, s))| s.map(|s| (i, s)))
        .max_by(|x, y| x.1.partial_cmp(&y.1).expect("score NaN"))
    {
        Some((i, _)) => i,
        None => {
            return Err(last_err.unwrap_or_else(|| {
                QslideError::Tuning("no evaluable candidate in range".into())
            }))
        }
    };
    let mut best_t = scored[best_idx].0;
    let mut best_s = scored[best_idx].1.expect("filtered");

    // Golden-section refinement between the best point's grid neighbors.
    let mut lo = if best_idx == 0 { t_lo } else { scored[best_idx - 1].0 };
    let mut hi = if best_idx + 1 == scored.len() {
        t_hi
    } else {
        scored[best_idx + 1].0
    };
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval.score(x1).unwrap_or(f64::NEG_INFINITY);
    let mut f2 = eval.score(x2).unwrap_or(f64::NEG_INFINITY);
    for _ in 0..20 {
        let (x_best, f_best) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if f_best > best_s {
            best_s = f_best;
            best_t = x_best;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = eval.score(x1).unwrap_or(f64::NEG_INFINITY);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval.score(x2).unwrap_or(f64::NEG_INFINITY);
        }
    }
    Ok(best_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::tests::Lcg;
    use crate::assembly::{build_gate_circuit, builtin_widget, chain_graph, GateKind};
    use crate::jacobi::{build_chain, ChainKind};
    use crate::propagate::evolve;

    #[test]
    fn synthetic_gaussian_peaks_at_its_phase() {
        let state = PacketState::gaussian(256, 128.0, 12.0, -PI / 2.0);
        let window: Vec<usize> = (0..256).collect();
        let spec = momentum_spectrum(&state, &window).unwrap();
        let peak = spec.peak();
        assert!(
            (peak - (-PI / 2.0)).abs() < spec.grid_spacing(),
            "peak {peak}"
        );
    }

    #[test]
    fn parseval_on_random_states() {
        let mut rng = Lcg::new(7);
        for _ in 0..20 {
            let n = 64;
            let mut amplitudes: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.next_f64() - 0.5, rng.next_f64() - 0.5))
                .collect();
            let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in &mut amplitudes {
                *z /= norm;
            }
            let state = PacketState {
                amplitudes,
                time: 0.0,
            };
            let window: Vec<usize> = (8..56).collect();
            let spec = momentum_spectrum(&state, &window).unwrap();
            let held = state.probability(&window);
            assert!((spec.total_weight() - held).abs() < 1e-8);
        }
    }

    #[test]
    fn window_validation() {
        let state = PacketState::delta(16, 3);
        assert!(matches!(
            momentum_spectrum(&state, &[14, 15, 16]),
            Err(QslideError::Range(_))
        ));
        assert!(matches!(
            momentum_spectrum(&state, &[3, 5]),
            Err(QslideError::Range(_))
        ));
        assert!(matches!(
            momentum_spectrum(&state, &[]),
            Err(QslideError::Range(_))
        ));
        assert!(matches!(
            packet_stats(&state, &[10, 11]),
            Err(QslideError::UndefinedStats(_))
        ));
    }

    #[test]
    fn stats_of_delta_and_full_window() {
        let state = PacketState::delta(32, 9);
        let window: Vec<usize> = (0..32).collect();
        let (center, width, prob) = packet_stats(&state, &window).unwrap();
        assert_eq!(center, 9.0);
        assert_eq!(width, 0.0);
        assert!((prob - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evolved_packet_matches_gaussian_moments() {
        let n = 400;
        let a = -2.0;
        let t = 0.226 * PI;
        let chain = build_chain(ChainKind::Field, n + 1, a, 0.0).unwrap();
        let graph = chain_graph(&chain);
        let schedule = make_switch_schedule(&graph, t, t, &[t]).unwrap();
        let out = evolve(&schedule, &PacketState::delta(n + 1, 0)).unwrap();
        let window: Vec<usize> = (0..=n).collect();
        let (center, width, prob) = packet_stats(&out[0], &window).unwrap();
        let packet = analytic::gaussian_packet(n, a, t).unwrap();
        assert!((prob - 1.0).abs() < 1e-10);
        assert!(
            (center - packet.center).abs() < 0.02 * packet.center,
            "center {center} vs {}",
            packet.center
        );
        assert!(
            (width - packet.sigma).abs() < 0.02 * packet.sigma,
            "width {width} vs {}",
            packet.sigma
        );
    }

    #[test]
    fn uniform_chain_peak_is_time_invariant() {
        let chain = build_chain(ChainKind::Uniform, 240, 0.0, 1.0).unwrap();
        let graph = chain_graph(&chain);
        let init = PacketState::gaussian(240, 120.0, 9.0, -1.3);
        let schedule = make_switch_schedule(&graph, 4.0, 8.0, &[4.0, 8.0]).unwrap();
        let out = evolve(&schedule, &init).unwrap();
        let window: Vec<usize> = (20..220).collect();
        let p0 = momentum_spectrum(&init, &window).unwrap();
        let p1 = momentum_spectrum(&out[0], &window).unwrap();
        let p2 = momentum_spectrum(&out[1], &window).unwrap();
        let dk = p0.grid_spacing();
        assert!((p1.peak() - p0.peak()).abs() <= dk);
        assert!((p2.peak() - p0.peak()).abs() <= dk);
    }

    #[test]
    fn reference_scored_against_itself_is_perfect() {
        let widget = builtin_widget("ub").unwrap();
        let g = build_gate_circuit(GateKind::Reference, 20, 60, 60, -2.0, Some(&widget)).unwrap();
        let out = g.role_range(RoleKind::OutputWire, Some(0));
        let mut state = PacketState::gaussian(g.n_sites, 0.0, 1.0, 0.0);
        for z in &mut state.amplitudes {
            *z = Complex64::new(0.0, 0.0);
        }
        for (i, &s) in out.iter().enumerate() {
            let d = i as f64 - 30.0;
            state.amplitudes[s] = Complex64::from_polar(
                (-d * d / 50.0).exp(),
                -0.7 * i as f64,
            );
        }
        let norm = state.norm();
        for z in &mut state.amplitudes {
            *z /= norm;
        }
        let report = gate_report(
            std::slice::from_ref(&state),
            &g,
            std::slice::from_ref(&state),
            &g,
            ideal_gate_identity(),
        )
        .unwrap();
        assert!((report.reference_overlap_fidelity - 1.0).abs() < 1e-10);
        assert!((report.transmission - state.probability(&out)).abs() < 1e-12);
        assert_eq!(report.relative_phase, 0.0);
    }

    #[test]
    fn mismatched_layouts_rejected() {
        let widget = builtin_widget("ub").unwrap();
        let g = build_gate_circuit(GateKind::Ub, 20, 60, 60, -2.0, Some(&widget)).unwrap();
        let r = build_gate_circuit(GateKind::Reference, 20, 60, 61, -2.0, Some(&widget)).unwrap();
        let t = vec![PacketState::delta(g.n_sites, 0)];
        let tr = vec![PacketState::delta(r.n_sites, 0)];
        assert!(matches!(
            gate_report(&t, &g, &tr, &r, ideal_gate_b()),
            Err(QslideError::Comparison(_))
        ));
    }

    #[test]
    fn analytic_seed_hits_quarter_pi_momentum() {
        for &a in &[-2.0, -0.7, -3.8] {
            let t = analytic_switch_seed(a).unwrap();
            let theta = analytic::momentum_theta(t, a).unwrap();
            assert!(
                wrap_phase(theta - (-PI / 4.0)).abs() < 1e-12,
                "a = {a}: theta(t*) = {theta}"
            );
        }
        // a = 0 pins the momentum; a > 0 sweeps it away from -pi/4.
        assert!(analytic_switch_seed(0.0).is_none());
        assert!(analytic_switch_seed(1.3).is_none());
        let b = analytic::period_scale(1.3);
        for j in 1..60 {
            let theta = analytic::momentum_theta(2.0 * b * PI * j as f64 / 60.0, 1.3).unwrap();
            assert!(wrap_phase(theta - (-PI / 4.0)).abs() > 0.05, "j = {j}");
        }
    }

    #[test]
    fn degenerate_tuning_range_returns_left_edge() {
        let widget = builtin_widget("ub").unwrap();
        let g = build_gate_circuit(GateKind::Ub, 20, 60, 60, -2.0, Some(&widget)).unwrap();
        let t = tune_switch_time(&g, TuneObjective::Transmission, (0.2, 0.2), 8).unwrap();
        assert_eq!(t, 0.2);
        assert!(matches!(
            tune_switch_time(&g, TuneObjective::Transmission, (0.2, 0.1), 8),
            Err(QslideError::Domain(_))
        ));
        assert!(matches!(
            tune_switch_time(&g, TuneObjective::Transmission, (0.1, 0.2), 4),
            Err(QslideError::Domain(_))
        ));
    }

    #[test]
    fn momentum_tuning_recovers_analytic_seed() {
        // Slide of 60 keeps the finite-size momentum shift well under the
        // tolerance; at 20 sites the shift alone is ~0.02 pi.
        let widget = builtin_widget("ub").unwrap();
        let g = build_gate_circuit(GateKind::Ub, 60, 60, 61, -2.0, Some(&widget)).unwrap();
        let seed = analytic_switch_seed(-2.0).unwrap();
        let got = tune_switch_time(
            &g,
            TuneObjective::PeakMomentum,
            (0.15 * PI, 0.28 * PI),
            8,
        )
        .unwrap();
        assert!(
            (got - seed).abs() < 0.015 * PI,
            "tuned {got} vs analytic {seed} (diff {:.5} pi)",
            (got - seed).abs() / PI
        );
    }
}
