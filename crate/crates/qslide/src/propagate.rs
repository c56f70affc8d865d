//! Exact time evolution under piecewise-constant Hamiltonians.
//!
//! The switch protocol runs the full circuit Hamiltonian until t_off,
//! then the same graph with the slide field zeroed. Each segment is
//! propagated exactly: dense spectral decomposition up to
//! [`DENSE_SITE_LIMIT`] sites, Chebyshev expansion (tolerance 1e-11 per
//! application) above it. Both paths are deterministic and independent of
//! worker count.

use num_complex::Complex64;

use crate::assembly::WalkGraph;
use crate::chebyshev::{self, SparseHamiltonian};
use crate::error::{QslideError, Result};
use crate::linalg::{self, EighResult};

/// Sites above which evolution switches from dense spectral decomposition
/// to the Chebyshev propagator.
pub const DENSE_SITE_LIMIT: usize = 1100;

const CHEBYSHEV_TOL: f64 = 1e-11;

/// Walker wavefunction over graph sites at an absolute time.
#[derive(Debug, Clone)]
pub struct PacketState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl PacketState {
    /// Walker localized on one site at t = 0.
    pub fn delta(n_sites: usize, site: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_sites];
        amplitudes[site] = Complex64::new(1.0, 0.0);
        PacketState {
            amplitudes,
            time: 0.0,
        }
    }

    /// Normalized Gaussian packet exp(-(x-center)^2/(4 sigma^2) + i momentum x).
    pub fn gaussian(n_sites: usize, center: f64, sigma: f64, momentum: f64) -> Self {
        let mut amplitudes: Vec<Complex64> = (0..n_sites)
            .map(|x| {
                let d = x as f64 - center;
                Complex64::from_polar(
                    (-d * d / (4.0 * sigma * sigma)).exp(),
                    momentum * x as f64,
                )
            })
            .collect();
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amplitudes {
            *a /= norm;
        }
        PacketState {
            amplitudes,
            time: 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Probability carried by a site subset.
    pub fn probability(&self, sites: &[usize]) -> f64 {
        sites.iter().map(|&s| self.amplitudes[s].norm_sqr()).sum()
    }
}

/// Piecewise-constant evolution plan: (slide fields on?, duration)
/// segments over one graph, plus absolute times to snapshot.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub graph: WalkGraph,
    pub segments: Vec<(bool, f64)>,
    pub sample_times: Vec<f64>,
}

impl Schedule {
    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|&(_, d)| d).sum()
    }
}

/// Two-segment switch schedule: fields on until `t_off`, off afterwards.
///
/// `t_off = t_total` collapses to a single fields-on segment; `t_off`
/// outside (0, t_total] is a schedule error, as is any sample time outside
/// [0, t_total]. Samples are sorted ascending; an empty list defaults to
/// the final time.
pub fn make_switch_schedule(
    graph: &WalkGraph,
    t_off: f64,
    t_total: f64,
    samples: &[f64],
) -> Result<Schedule> {
    if !(t_off > 0.0) {
        return Err(QslideError::Schedule(format!(
            "switch time must be positive, got {t_off}"
        )));
    }
    if t_off > t_total {
        return Err(QslideError::Schedule(format!(
            "switch time {t_off} exceeds total duration {t_total}"
        )));
    }
    let mut sample_times = if samples.is_empty() {
        vec![t_total]
    } else {
        samples.to_vec()
    };
    for &s in &sample_times {
        if !(0.0..=t_total * (1.0 + 1e-12)).contains(&s) {
            return Err(QslideError::Schedule(format!(
                "sample time {s} outside [0, {t_total}]"
            )));
        }
    }
    sample_times.sort_by(|a, b| a.partial_cmp(b).expect("sample time NaN"));
    let segments = if t_off == t_total {
        vec![(true, t_total)]
    } else {
        vec![(true, t_off), (false, t_total - t_off)]
    };
    Ok(Schedule {
        graph: graph.clone(),
        segments,
        sample_times,
    })
}

enum Kernel {
    Dense { on: EighResult, off: EighResult },
    Sparse { on: SparseHamiltonian, off: SparseHamiltonian },
}

/// Reusable per-graph propagation kernels: the two segment Hamiltonians
/// (slide fields on / off) prepared once, then applied for any duration.
/// Switch-time tuning reuses one Propagator across all candidates.
pub struct Propagator {
    n_sites: usize,
    kernel: Kernel,
}

impl Propagator {
    pub fn new(graph: &WalkGraph) -> Result<Self> {
        Self::with_dense_limit(graph, DENSE_SITE_LIMIT)
    }

    /// Explicit dense/sparse crossover, mainly for equivalence tests and
    /// memory-constrained sweeps.
    pub fn with_dense_limit(graph: &WalkGraph, dense_limit: usize) -> Result<Self> {
        let kernel = if graph.n_sites <= dense_limit {
            let on = linalg::eigh_dense(graph.hamiltonian(true).view())?;
            let off = linalg::eigh_dense(graph.hamiltonian(false).view())?;
            Kernel::Dense { on, off }
        } else {
            Kernel::Sparse {
                on: SparseHamiltonian::from_graph(graph, true),
                off: SparseHamiltonian::from_graph(graph, false),
            }
        };
        Ok(Propagator {
            n_sites: graph.n_sites,
            kernel,
        })
    }

    /// Apply exp(-iH dt) for the selected segment Hamiltonian.
    pub fn step(&self, psi: &[Complex64], fields_on: bool, dt: f64) -> Result<Vec<Complex64>> {
        if psi.len() != self.n_sites {
            return Err(QslideError::Shape(format!(
                "state length {} does not match graph size {}",
                psi.len(),
                self.n_sites
            )));
        }
        if dt == 0.0 {
            return Ok(psi.to_vec());
        }
        match &self.kernel {
            Kernel::Dense { on, off } => {
                let eig = if fields_on { on } else { off };
                eig.evolve(psi, dt)
            }
            Kernel::Sparse { on, off } => {
                let h = if fields_on { on } else { off };
                chebyshev::evolve(h, psi, dt, CHEBYSHEV_TOL)
            }
        }
    }
}

/// Evolve `initial` through the schedule, returning one snapshot per
/// sample time (ascending). Builds the propagation kernels internally;
/// use [`evolve_with`] to amortize them across runs.
pub fn evolve(schedule: &Schedule, initial: &PacketState) -> Result<Vec<PacketState>> {
    let prop = Propagator::new(&schedule.graph)?;
    evolve_with(&prop, schedule, initial)
}

/// [`evolve`] with caller-supplied kernels.
pub fn evolve_with(
    prop: &Propagator,
    schedule: &Schedule,
    initial: &PacketState,
) -> Result<Vec<PacketState>> {
    let n = schedule.graph.n_sites;
    if initial.amplitudes.len() != n {
        return Err(QslideError::Shape(format!(
            "initial state length {} does not match graph size {n}",
            initial.amplitudes.len()
        )));
    }
    if (initial.norm() - 1.0).abs() > 1e-8 {
        return Err(QslideError::Domain(format!(
            "initial state norm {} is not 1",
            initial.norm()
        )));
    }
    let total = schedule.total_duration();
    let time_eps = 1e-12 * total.max(1.0);
    for &(_, d) in &schedule.segments {
        if d < 0.0 {
            return Err(QslideError::Schedule(format!("negative segment duration {d}")));
        }
    }

    let mut snapshots = Vec::with_capacity(schedule.sample_times.len());
    let mut psi = initial.amplitudes.clone();
    let mut cursor = 0.0f64; // absolute time of psi
    let mut seg_idx = 0usize;
    let mut seg_end = schedule
        .segments
        .first()
        .map(|&(_, d)| d)
        .unwrap_or(0.0);
    let mut last_sample = f64::NEG_INFINITY;
    for &ts in &schedule.sample_times {
        if ts < last_sample {
            return Err(QslideError::Schedule("sample times not sorted".into()));
        }
        last_sample = ts;
        if ts > total + time_eps {
            return Err(QslideError::Schedule(format!(
                "sample time {ts} beyond total duration {total}"
            )));
        }
        // Cross whole segments until ts lands in the current one.
        while seg_idx < schedule.segments.len() && ts > seg_end + time_eps {
            let (on, _) = schedule.segments[seg_idx];
            psi = prop.step(&psi, on, seg_end - cursor)?;
            cursor = seg_end;
            seg_idx += 1;
            if seg_idx < schedule.segments.len() {
                seg_end += schedule.segments[seg_idx].1;
            }
        }
        if ts > cursor {
            let on = schedule
                .segments
                .get(seg_idx)
                .map(|&(on, _)| on)
                .unwrap_or(true);
            psi = prop.step(&psi, on, ts - cursor)?;
            cursor = ts;
        }
        let state = PacketState {
            amplitudes: psi.clone(),
            time: ts,
        };
        let drift = (state.norm() - 1.0).abs();
        if drift > 1e-8 {
            return Err(QslideError::Numerical(format!(
                "norm drifted by {drift:.3e} at t = {ts}"
            )));
        }
        snapshots.push(state);
    }
    Ok(snapshots)
}

/// CSV trajectory export: one row per (sample, site).
pub fn trajectory_csv(states: &[PacketState]) -> String {
    let mut out = String::from("time,site,re,im,prob\n");
    for s in states {
        for (site, z) in s.amplitudes.iter().enumerate() {
            out.push_str(&format!(
                "{:.16e},{site},{:.16e},{:.16e},{:.16e}\n",
                s.time,
                z.re,
                z.im,
                z.norm_sqr()
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{build_gate_circuit, builtin_widget, chain_graph, GateKind};
    use crate::jacobi::{build_chain, ChainKind};
    use std::f64::consts::PI;

    #[test]
    fn perfect_state_transfer_on_51_sites() {
        let chain = build_chain(ChainKind::Pst, 51, 0.0, 0.0).unwrap();
        let graph = chain_graph(&chain);
        let schedule = make_switch_schedule(&graph, PI / 2.0, PI / 2.0, &[PI / 2.0]).unwrap();
        assert_eq!(schedule.segments.len(), 1);
        let out = evolve(&schedule, &PacketState::delta(51, 0)).unwrap();
        let p = out[0].amplitudes[50].norm_sqr();
        assert!(p >= 1.0 - 1e-8, "transfer probability {p}");
    }

    #[test]
    fn empty_schedule_returns_initial() {
        let chain = build_chain(ChainKind::Uniform, 8, 0.0, 1.0).unwrap();
        let schedule = Schedule {
            graph: chain_graph(&chain),
            segments: vec![],
            sample_times: vec![0.0],
        };
        let init = PacketState::delta(8, 3);
        let out = evolve(&schedule, &init).unwrap();
        assert_eq!(out[0].amplitudes, init.amplitudes);
    }

    #[test]
    fn matches_analytic_amplitude_on_field_chain() {
        let n = 40;
        let t = 0.226 * PI;
        let chain = build_chain(ChainKind::Field, n + 1, -2.0, 0.0).unwrap();
        let graph = chain_graph(&chain);
        let schedule = make_switch_schedule(&graph, t, t, &[t]).unwrap();
        let out = evolve(&schedule, &PacketState::delta(n + 1, 0)).unwrap();
        let mut worst = 0.0f64;
        for r in 0..=n {
            let pred = crate::analytic::amplitude(r, -2.0, t, n).unwrap().complex();
            worst = worst.max((out[0].amplitudes[r] - pred).norm());
        }
        assert!(worst < 1e-8, "max deviation {worst}");
    }

    #[test]
    fn switch_schedule_boundary_semantics() {
        let chain = build_chain(ChainKind::Uniform, 8, 0.0, 1.0).unwrap();
        let graph = chain_graph(&chain);
        let s = make_switch_schedule(&graph, 1.0, 2.5, &[2.5]).unwrap();
        assert_eq!(s.segments, vec![(true, 1.0), (false, 1.5)]);
        let single = make_switch_schedule(&graph, 2.5, 2.5, &[]).unwrap();
        assert_eq!(single.segments, vec![(true, 2.5)]);
        assert_eq!(single.sample_times, vec![2.5]);
        assert!(make_switch_schedule(&graph, 2.6, 2.5, &[]).is_err());
        assert!(make_switch_schedule(&graph, 0.0, 2.5, &[]).is_err());
        assert!(make_switch_schedule(&graph, -1.0, 2.5, &[]).is_err());
        assert!(make_switch_schedule(&graph, 1.0, 2.5, &[3.0]).is_err());
    }

    #[test]
    fn switch_zeroes_only_slide_fields() {
        let widget = builtin_widget("ub").unwrap();
        let g = build_gate_circuit(GateKind::Ub, 20, 60, 60, -2.0, Some(&widget)).unwrap();
        let h_on = g.hamiltonian(true);
        let h_off = g.hamiltonian(false);
        for s in 0..g.n_sites {
            if g.slide_sites.contains(&s) {
                assert_eq!(h_off[(s, s)], 0.0);
            } else {
                assert_eq!(h_off[(s, s)], h_on[(s, s)]);
            }
        }
    }

    #[test]
    fn segments_compose() {
        let chain = build_chain(ChainKind::HalfSlide, 30, -2.0, 0.0).unwrap();
        let graph = chain_graph(&chain);
        let init = PacketState::delta(30, 0);
        let both = make_switch_schedule(&graph, 0.4, 1.0, &[1.0]).unwrap();
        let out = evolve(&both, &init).unwrap();

        let first = make_switch_schedule(&graph, 0.4, 0.4, &[0.4]).unwrap();
        let mid = evolve(&first, &init).unwrap();
        let prop = Propagator::new(&graph).unwrap();
        let fin = prop.step(&mid[0].amplitudes, false, 0.6).unwrap();
        let err = out[0]
            .amplitudes
            .iter()
            .zip(&fin)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "composition error {err}");
    }

    #[test]
    fn reversible_to_initial() {
        let chain = build_chain(ChainKind::Field, 25, -2.0, 0.0).unwrap();
        let graph = chain_graph(&chain);
        let prop = Propagator::new(&graph).unwrap();
        let init = PacketState::delta(25, 0);
        let fwd = prop.step(&init.amplitudes, true, 0.8).unwrap();
        let back = prop.step(&fwd, true, -0.8).unwrap();
        let err = back
            .iter()
            .zip(&init.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn norm_preserved_through_switch() {
        let widget = builtin_widget("ub").unwrap();
        let g = build_gate_circuit(GateKind::Ub, 20, 60, 60, -2.0, Some(&widget)).unwrap();
        let t_off = 0.226 * PI;
        let schedule =
            make_switch_schedule(&g, t_off, 2.0 * t_off, &[0.5 * t_off, t_off, 2.0 * t_off])
                .unwrap();
        let out = evolve(&schedule, &PacketState::delta(g.n_sites, 0)).unwrap();
        for s in &out {
            assert!((s.norm() - 1.0).abs() < 1e-10, "drift at t={}", s.time);
        }
    }

    #[test]
    fn group_velocity_on_uniform_chain() {
        let chain = build_chain(ChainKind::Uniform, 300, 0.0, 1.0).unwrap();
        let graph = chain_graph(&chain);
        let theta: f64 = -2.0;
        let init = PacketState::gaussian(300, 70.0, 10.0, theta);
        let speed = 2.0 * theta.sin().abs();
        let t = 50.0 / speed;
        let schedule = make_switch_schedule(&graph, t, t, &[t]).unwrap();
        let out = evolve(&schedule, &init).unwrap();
        let centroid = |s: &PacketState| -> f64 {
            s.amplitudes
                .iter()
                .enumerate()
                .map(|(x, z)| x as f64 * z.norm_sqr())
                .sum()
        };
        let moved = centroid(&out[0]) - centroid(&init);
        let got = moved / t;
        assert!(
            (got - speed).abs() <= 0.02 * speed,
            "centroid speed {got} vs group velocity {speed}"
        );
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let widget = builtin_widget("ub").unwrap();
        let g = build_gate_circuit(GateKind::Ub, 20, 60, 60, -2.0, Some(&widget)).unwrap();
        let schedule = make_switch_schedule(&g, 0.3, 0.9, &[0.9]).unwrap();
        let init = PacketState::delta(g.n_sites, 0);
        let dense = evolve(&schedule, &init).unwrap();
        let sparse_prop = Propagator::with_dense_limit(&g, 1).unwrap();
        let sparse = evolve_with(&sparse_prop, &schedule, &init).unwrap();
        let err = dense[0]
            .amplitudes
            .iter()
            .zip(&sparse[0].amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-9, "path disagreement {err}");
    }
}
