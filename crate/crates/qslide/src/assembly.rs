//! Scattering-circuit construction.
//!
//! A gate circuit is a launch slide feeding uniform wires through a small
//! scattering widget: single-rail for the phase gate, dual-rail for the
//! beam splitter, and a widget-free reference wire for phase comparisons.
//! Widgets are loaded from plain-text description files and validated
//! behaviorally (plane-wave scattering) before they may be built into a
//! circuit, so a mis-transcribed widget cannot silently produce a wrong
//! gate.
//!
//! Widget description format, one statement per line (`#` comments):
//!
//! ```text
//! sites N                 number of widget sites, labeled 0..N-1
//! edge I J C              internal coupling C (relative to the wire)
//! port SITE LEAD          lead attachment; LEAD in {in, out, in0, in1, out0, out1}
//! replaces M              bare-wire sites the widget stands in for
//! label NAME              expected behavior: phase-gate | beam-splitter | passthrough
//! ```
//!
//! `replaces` fixes the bare-wire reference length for transmitted-phase
//! comparisons: the phase-gate widget plays the role of a two-site wire
//! segment, which is what makes its transmitted phase at k = -pi/4 read
//! as +pi/4.

use std::fmt;
use std::path::Path;

use ndarray::Array2;

use crate::analytic;
use crate::error::{QslideError, Result};
use crate::jacobi::{self, build_chain, ChainKind};
use crate::scatter;

/// Structural role of a circuit site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleKind {
    Slide,
    InputWire,
    Widget,
    OutputWire,
}

impl fmt::Display for RoleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RoleKind::Slide => "slide",
            RoleKind::InputWire => "input_wire",
            RoleKind::Widget => "widget",
            RoleKind::OutputWire => "output_wire",
        };
        f.write_str(s)
    }
}

/// Role tag plus rail id (None for the slide and shared widget sites).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Role {
    pub kind: RoleKind,
    pub rail: Option<u8>,
}

/// Which circuit to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Ub,
    Uc,
    Reference,
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GateKind::Ub => "ub",
            GateKind::Uc => "uc",
            GateKind::Reference => "reference",
        };
        f.write_str(s)
    }
}

/// Lead direction at a widget port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortDirection {
    In,
    Out,
}

/// One lead attachment: widget `site` feeds the `direction` lead of `rail`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Port {
    pub site: usize,
    pub direction: PortDirection,
    pub rail: u8,
}

/// Declared scattering behavior, used to pick the validation gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidgetBehavior {
    /// Single rail; |T(k)|^2 follows the closed-form phase-gate curve and
    /// the transmitted phase at k = -pi/4 leads the reference wire by pi/4.
    PhaseGate,
    /// Dual rail; reflectionless equal split at k = -pi/4.
    BeamSplitter,
    /// Single rail; |T| = 1 everywhere with zero phase offset.
    Passthrough,
}

impl fmt::Display for WidgetBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WidgetBehavior::PhaseGate => "phase-gate",
            WidgetBehavior::BeamSplitter => "beam-splitter",
            WidgetBehavior::Passthrough => "passthrough",
        };
        f.write_str(s)
    }
}

/// A validated scattering widget: internal graph, ordered lead ports, and
/// the declared behavior it was checked against.
#[derive(Debug, Clone)]
pub struct Widget {
    pub n_sites: usize,
    /// (site, site, coupling relative to the wire coupling).
    pub edges: Vec<(usize, usize, f64)>,
    /// Ordered: input ports first by rail, then output ports by rail.
    pub ports: Vec<Port>,
    /// Bare-wire sites the widget replaces in phase bookkeeping.
    pub replaces: usize,
    pub phase_label: WidgetBehavior,
}

impl Widget {
    /// Straight chain of `n` sites with unit couplings; the scattering
    /// identity (up to the free propagation phase e^{ik(n-1)}).
    pub fn bare_wire(n: usize) -> Widget {
        let edges = (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1.0)).collect();
        Widget {
            n_sites: n,
            edges,
            ports: vec![
                Port {
                    site: 0,
                    direction: PortDirection::In,
                    rail: 0,
                },
                Port {
                    site: n - 1,
                    direction: PortDirection::Out,
                    rail: 0,
                },
            ],
            replaces: n,
            phase_label: WidgetBehavior::Passthrough,
        }
    }

    pub fn input_ports(&self) -> Vec<&Port> {
        self.ports
            .iter()
            .filter(|p| p.direction == PortDirection::In)
            .collect()
    }

    pub fn output_ports(&self) -> Vec<&Port> {
        self.ports
            .iter()
            .filter(|p| p.direction == PortDirection::Out)
            .collect()
    }

    /// Structural checks shared by parsing and construction.
    fn check_structure(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(QslideError::WidgetMismatch("widget has no sites".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &(i, j, c) in &self.edges {
            if i >= self.n_sites || j >= self.n_sites {
                return Err(QslideError::WidgetMismatch(format!(
                    "edge ({i},{j}) outside widget of {} sites",
                    self.n_sites
                )));
            }
            if i == j {
                return Err(QslideError::WidgetMismatch(format!("self-loop at site {i}")));
            }
            if !(c > 0.0) {
                return Err(QslideError::WidgetMismatch(format!(
                    "edge ({i},{j}) has non-positive coupling {c}"
                )));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(QslideError::WidgetMismatch(format!("duplicate edge ({i},{j})")));
            }
        }
        let mut port_ids = std::collections::HashSet::new();
        for p in &self.ports {
            if p.site >= self.n_sites {
                return Err(QslideError::WidgetMismatch(format!(
                    "port site {} outside widget",
                    p.site
                )));
            }
            if !port_ids.insert((p.site, p.direction == PortDirection::In, p.rail)) {
                return Err(QslideError::WidgetMismatch(format!(
                    "duplicate port at site {} rail {}",
                    p.site, p.rail
                )));
            }
        }
        if self.input_ports().is_empty() || self.output_ports().is_empty() {
            return Err(QslideError::WidgetMismatch(
                "widget needs at least one input and one output port".into(),
            ));
        }
        // Every site must be reachable from the first input port.
        let mut adj = vec![Vec::new(); self.n_sites];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n_sites];
        let mut stack = vec![self.input_ports()[0].site];
        seen[stack[0]] = true;
        while let Some(s) = stack.pop() {
            for &t in &adj[s] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|&v| !v) {
            return Err(QslideError::WidgetMismatch(format!(
                "site {orphan} unreachable from the input port"
            )));
        }
        Ok(())
    }
}

fn parse_port(site: usize, lead: &str) -> Result<Port> {
    let (direction, rail) = match lead {
        "in" | "in0" => (PortDirection::In, 0),
        "in1" => (PortDirection::In, 1),
        "out" | "out0" => (PortDirection::Out, 0),
        "out1" => (PortDirection::Out, 1),
        other => {
            return Err(QslideError::Parse(format!(
                "unknown lead '{other}' (expected in/out/in0/in1/out0/out1)"
            )))
        }
    };
    Ok(Port {
        site,
        direction,
        rail,
    })
}

/// Parse a widget description without behavioral validation.
pub fn parse_widget(source: &str) -> Result<Widget> {
    let mut n_sites = None;
    let mut edges = Vec::new();
    let mut ports = Vec::new();
    let mut replaces = None;
    let mut label = None;
    for (lineno, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let key = tok.next().expect("non-empty line has a token");
        let rest: Vec<&str> = tok.collect();
        let bad = |msg: &str| {
            QslideError::Parse(format!("widget line {}: {msg}: '{raw}'", lineno + 1))
        };
        match key {
            "sites" => {
                let [n] = rest[..] else {
                    return Err(bad("expected 'sites N'"));
                };
                n_sites = Some(n.parse::<usize>().map_err(|_| bad("bad site count"))?);
            }
            "edge" => {
                let [i, j, c] = rest[..] else {
                    return Err(bad("expected 'edge I J C'"));
                };
                edges.push((
                    i.parse::<usize>().map_err(|_| bad("bad site index"))?,
                    j.parse::<usize>().map_err(|_| bad("bad site index"))?,
                    c.parse::<f64>().map_err(|_| bad("bad coupling"))?,
                ));
            }
            "port" => {
                let [site, lead] = rest[..] else {
                    return Err(bad("expected 'port SITE LEAD'"));
                };
                let site = site.parse::<usize>().map_err(|_| bad("bad site index"))?;
                ports.push(parse_port(site, lead)?);
            }
            "replaces" => {
                let [m] = rest[..] else {
                    return Err(bad("expected 'replaces M'"));
                };
                replaces = Some(m.parse::<usize>().map_err(|_| bad("bad count"))?);
            }
            "label" => {
                let [name] = rest[..] else {
                    return Err(bad("expected 'label NAME'"));
                };
                label = Some(match name {
                    "phase-gate" => WidgetBehavior::PhaseGate,
                    "beam-splitter" => WidgetBehavior::BeamSplitter,
                    "passthrough" => WidgetBehavior::Passthrough,
                    other => return Err(bad(&format!("unknown behavior label '{other}'"))),
                });
            }
            _ => return Err(bad("unknown key")),
        }
    }
    let widget = Widget {
        n_sites: n_sites.ok_or_else(|| QslideError::Parse("widget lacks 'sites'".into()))?,
        edges,
        ports,
        replaces: replaces.ok_or_else(|| QslideError::Parse("widget lacks 'replaces'".into()))?,
        phase_label: label.ok_or_else(|| QslideError::Parse("widget lacks 'label'".into()))?,
    };
    widget.check_structure()?;
    Ok(widget)
}

const PHASE_GATE_GRID: usize = 200;

/// Parse and behaviorally validate a widget description.
///
/// The declared label picks the gate: a phase-gate widget must match the
/// closed-form |T(k)|^2 curve on a 200-point grid to 1e-9 and lead the
/// two-site reference wire by pi/4 at k = -pi/4; a beam-splitter must be
/// reflectionless at k = -pi/4 with per-rail transmitted probability 1/2;
/// a passthrough must be fully transparent with zero phase offset.
pub fn load_widget(source: &str) -> Result<Widget> {
    let widget = parse_widget(source)?;
    validate_widget(&widget)?;
    Ok(widget)
}

/// Load a widget description file.
pub fn load_widget_file(path: &Path) -> Result<Widget> {
    let text = std::fs::read_to_string(path)?;
    load_widget(&text)
}

/// The two widget descriptions shipped with the crate, by circuit name.
pub fn builtin_widget(name: &str) -> Result<Widget> {
    match name {
        "ub" => load_widget(include_str!("../data/ub_widget.txt")),
        "uc" => load_widget(include_str!("../data/uc_widget.txt")),
        other => Err(QslideError::Config(format!(
            "no builtin widget named '{other}' (expected ub or uc)"
        ))),
    }
}

fn validate_widget(widget: &Widget) -> Result<()> {
    use std::f64::consts::PI;
    match widget.phase_label {
        WidgetBehavior::PhaseGate | WidgetBehavior::Passthrough => {
            if widget.input_ports().len() != 1 || widget.output_ports().len() != 1 {
                return Err(QslideError::WidgetMismatch(format!(
                    "{} widget must have exactly one input and one output port",
                    widget.phase_label
                )));
            }
            let mut worst = 0.0f64;
            for j in 1..=PHASE_GATE_GRID {
                let k = -PI + j as f64 * PI / (PHASE_GATE_GRID + 1) as f64;
                let sol = scatter::solve_plane_wave(widget, k)?;
                let got = sol.transmission[0].norm_sqr();
                let want = match widget.phase_label {
                    WidgetBehavior::PhaseGate => analytic::transmission_b(k)?,
                    _ => 1.0,
                };
                worst = worst.max((got - want).abs());
            }
            if worst > 1e-9 {
                return Err(QslideError::WidgetMismatch(format!(
                    "{} |T|^2 deviates from the expected curve by {worst:.3e}",
                    widget.phase_label
                )));
            }
            let expected_offset = match widget.phase_label {
                WidgetBehavior::PhaseGate => PI / 4.0,
                _ => 0.0,
            };
            let offset = scatter::transmitted_phase_offset(widget, -PI / 4.0)?;
            let dev = analytic::wrap_phase(offset - expected_offset).abs();
            if dev > 1e-6 {
                return Err(QslideError::WidgetMismatch(format!(
                    "{} transmitted phase offset at k=-pi/4 is {offset:.9} \
                     (expected {expected_offset:.9}, deviation {dev:.3e})",
                    widget.phase_label
                )));
            }
        }
        WidgetBehavior::BeamSplitter => {
            if widget.input_ports().len() != 2 || widget.output_ports().len() != 2 {
                return Err(QslideError::WidgetMismatch(
                    "beam-splitter widget must have two input and two output ports".into(),
                ));
            }
            let sol = scatter::solve_plane_wave(widget, -PI / 4.0)?;
            let refl: f64 = sol.reflection.iter().map(|r| r.norm_sqr()).sum();
            if refl > 1e-10 {
                return Err(QslideError::WidgetMismatch(format!(
                    "beam splitter reflects {refl:.3e} at k=-pi/4"
                )));
            }
            let mut worst = 0.0f64;
            for t in &sol.transmission {
                worst = worst.max((t.norm_sqr() - 0.5).abs());
            }
            if worst > 1e-6 {
                return Err(QslideError::WidgetMismatch(format!(
                    "beam splitter per-rail probability deviates from 1/2 by {worst:.3e}"
                )));
            }
        }
    }
    Ok(())
}

/// Assembled scattering circuit: weighted symmetric graph, per-site field,
/// role tags, and the site subset whose field the switch protocol zeroes.
#[derive(Debug, Clone)]
pub struct WalkGraph {
    pub n_sites: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub fields: Vec<f64>,
    pub roles: Vec<Role>,
    pub slide_sites: Vec<usize>,
    /// Bare-wire sites the widget span stands in for in transmitted-phase
    /// bookkeeping (equals the span length when the span is plain wire, 0
    /// when there is no widget span). A transmitted packet travels
    /// span - widget_replaces sites ahead of a reference packet.
    pub widget_replaces: usize,
}

impl WalkGraph {
    /// Dense Hamiltonian; `slide_field_on = false` zeroes the field on the
    /// slide sites (the post-switch segment).
    pub fn hamiltonian(&self, slide_field_on: bool) -> Array2<f64> {
        let mut h = Array2::zeros((self.n_sites, self.n_sites));
        for (i, &b) in self.fields.iter().enumerate() {
            h[(i, i)] = b;
        }
        if !slide_field_on {
            for &s in &self.slide_sites {
                h[(s, s)] = 0.0;
            }
        }
        for &(i, j, c) in &self.edges {
            h[(i, j)] = c;
            h[(j, i)] = c;
        }
        h
    }

    /// Contiguous site range carrying a role (and rail, when given).
    pub fn role_range(&self, kind: RoleKind, rail: Option<u8>) -> Vec<usize> {
        (0..self.n_sites)
            .filter(|&s| {
                self.roles[s].kind == kind && (rail.is_none() || self.roles[s].rail == rail)
            })
            .collect()
    }

    /// Wire coupling shared by every non-slide edge (equals the slide
    /// junction coupling by construction).
    pub fn wire_coupling(&self) -> f64 {
        self.slide_sites.len() as f64
    }

    /// Plain-text export: one site row per line, then one edge row per line.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        out.push_str("format walkgraph 1\n");
        out.push_str(&format!("sites {}\n", self.n_sites));
        for s in 0..self.n_sites {
            let rail = match self.roles[s].rail {
                Some(r) => r.to_string(),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "site {s} {:.16e} {} {rail}\n",
                self.fields[s], self.roles[s].kind
            ));
        }
        for &(i, j, c) in &self.edges {
            out.push_str(&format!("edge {i} {j} {c:.16e}\n"));
        }
        out
    }

    fn assert_invariants(&self) -> Result<()> {
        // Coupling continuity: every non-slide-internal edge carries the
        // junction coupling.
        let w = self.wire_coupling();
        for &(i, j, c) in &self.edges {
            let internal_slide = self.roles[i].kind == RoleKind::Slide
                && self.roles[j].kind == RoleKind::Slide;
            if !internal_slide && (c - w).abs() > 1e-12 * w {
                return Err(QslideError::Config(format!(
                    "edge ({i},{j}) coupling {c} does not match the wire coupling {w}"
                )));
            }
        }
        // Connectivity from site 0.
        let mut adj = vec![Vec::new(); self.n_sites];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n_sites];
        seen[0] = true;
        let mut stack = vec![0usize];
        while let Some(s) = stack.pop() {
            for &t in &adj[s] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|&v| !v) {
            return Err(QslideError::Config(format!(
                "site {orphan} unreachable from the slide"
            )));
        }
        Ok(())
    }
}

/// Minimum wire length: six packet widths, using the widest packet the
/// slide can launch (the slide continues a virtual chain of degree
/// `2*slide_len - 1`).
fn min_wire_len(slide_len: usize, a: f64) -> usize {
    let n_virtual = (2 * slide_len - 1) as f64;
    let b = analytic::period_scale(a);
    let q_max = 4.0 * b * b;
    let spread = if q_max >= 0.5 { 0.25 } else { q_max * (1.0 - q_max) };
    (6.0 * (n_virtual * spread).sqrt()).ceil() as usize
}

struct Builder {
    edges: Vec<(usize, usize, f64)>,
    fields: Vec<f64>,
    roles: Vec<Role>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            edges: Vec::new(),
            fields: Vec::new(),
            roles: Vec::new(),
        }
    }

    fn add_sites(&mut self, count: usize, kind: RoleKind, rail: Option<u8>) -> (usize, usize) {
        let start = self.fields.len();
        self.fields.extend(std::iter::repeat(0.0).take(count));
        self.roles
            .extend(std::iter::repeat(Role { kind, rail }).take(count));
        (start, start + count - 1)
    }

    fn chain(&mut self, lo: usize, hi: usize, coupling: f64) {
        for s in lo..hi {
            self.edges.push((s, s + 1, coupling));
        }
    }
}

/// Wrap a bare chain as a circuit graph (all sites tagged slide, so the
/// switch protocol zeroes every field). Used for oracle validation runs
/// on the engineered chains themselves.
pub fn chain_graph(chain: &jacobi::JacobiChain) -> WalkGraph {
    let edges = chain
        .couplings
        .iter()
        .enumerate()
        .map(|(i, &j)| (i, i + 1, j))
        .collect();
    WalkGraph {
        n_sites: chain.n_sites,
        edges,
        fields: chain.fields.clone(),
        roles: vec![
            Role {
                kind: RoleKind::Slide,
                rail: None
            };
            chain.n_sites
        ],
        slide_sites: (0..chain.n_sites).collect(),
        widget_replaces: 0,
    }
}

/// Assemble a gate circuit.
///
/// Layout per rail: slide (with linear field `a*n`), input wire, widget,
/// output wire. The slide couplings are `sqrt(n(2L - n))`, so the wire
/// coupling equals the junction coupling `L = slide_len`; widget couplings
/// are scaled to the same value. For `uc`, rail 1 gets a full-length input
/// wire with a free end and no slide (the walker enters on rail 0). For
/// `reference`, the widget span is replaced by plain chain links of
/// identical length, keeping site counts and role ranges comparable.
pub fn build_gate_circuit(
    gate: GateKind,
    slide_len: usize,
    input_len: usize,
    output_len: usize,
    a: f64,
    widget: Option<&Widget>,
) -> Result<WalkGraph> {
    if slide_len < 10 {
        return Err(QslideError::Config(format!(
            "slide length {slide_len} below the minimum of 10"
        )));
    }
    if !a.is_finite() {
        return Err(QslideError::Config(format!("field slope must be finite, got {a}")));
    }
    let need = min_wire_len(slide_len, a);
    if input_len < need || output_len < need {
        return Err(QslideError::Config(format!(
            "wires must hold six packet widths: need at least {need} sites, \
             got input {input_len} / output {output_len}"
        )));
    }
    match (gate, widget) {
        (GateKind::Ub, Some(w)) => {
            if w.input_ports().len() != 1 || w.output_ports().len() != 1 {
                return Err(QslideError::WidgetMismatch(format!(
                    "gate ub needs a 2-port widget, got {} ports",
                    w.ports.len()
                )));
            }
        }
        (GateKind::Uc, Some(w)) => {
            if w.input_ports().len() != 2 || w.output_ports().len() != 2 {
                return Err(QslideError::WidgetMismatch(format!(
                    "gate uc needs a 4-port widget, got {} ports",
                    w.ports.len()
                )));
            }
        }
        (GateKind::Ub | GateKind::Uc, None) => {
            return Err(QslideError::Config(format!("gate {gate} requires a widget")));
        }
        (GateKind::Reference, _) => {}
    }

    let coupling = jacobi::half_slide_junction_coupling(slide_len);
    let slide = build_chain(ChainKind::HalfSlide, slide_len, a, 0.0)?;
    let mut b = Builder::new();

    // Slide sites 0..slide_len with engineered couplings and linear field.
    let (s_lo, s_hi) = b.add_sites(slide_len, RoleKind::Slide, None);
    for (n, &j) in slide.couplings.iter().enumerate() {
        b.edges.push((s_lo + n, s_lo + n + 1, j));
    }
    for (n, &f) in slide.fields.iter().enumerate() {
        b.fields[s_lo + n] = f;
    }

    match gate {
        GateKind::Ub | GateKind::Reference => {
            let (i_lo, i_hi) = b.add_sites(input_len, RoleKind::InputWire, Some(0));
            b.edges.push((s_hi, i_lo, coupling));
            b.chain(i_lo, i_hi, coupling);
            let span = widget.map_or(5, |w| w.n_sites);
            let (w_lo, w_hi) = b.add_sites(span, RoleKind::Widget, None);
            match (gate, widget) {
                (GateKind::Ub, Some(w)) => {
                    for &(x, y, c) in &w.edges {
                        b.edges.push((w_lo + x, w_lo + y, c * coupling));
                    }
                    let win = w.input_ports()[0].site;
                    let wout = w.output_ports()[0].site;
                    b.edges.push((i_hi, w_lo + win, coupling));
                    let (o_lo, o_hi) = b.add_sites(output_len, RoleKind::OutputWire, Some(0));
                    b.edges.push((w_lo + wout, o_lo, coupling));
                    b.chain(o_lo, o_hi, coupling);
                }
                _ => {
                    // Reference: plain links straight through the span.
                    b.edges.push((i_hi, w_lo, coupling));
                    b.chain(w_lo, w_hi, coupling);
                    let (o_lo, o_hi) = b.add_sites(output_len, RoleKind::OutputWire, Some(0));
                    b.edges.push((w_hi, o_lo, coupling));
                    b.chain(o_lo, o_hi, coupling);
                }
            }
        }
        GateKind::Uc => {
            let w = widget.expect("checked above");
            let (i0_lo, i0_hi) = b.add_sites(input_len, RoleKind::InputWire, Some(0));
            b.edges.push((s_hi, i0_lo, coupling));
            b.chain(i0_lo, i0_hi, coupling);
            // Rail 1 input: same length, free end, no slide.
            let (i1_lo, i1_hi) = b.add_sites(input_len, RoleKind::InputWire, Some(1));
            b.chain(i1_lo, i1_hi, coupling);
            let (w_lo, _) = b.add_sites(w.n_sites, RoleKind::Widget, None);
            for &(x, y, c) in &w.edges {
                b.edges.push((w_lo + x, w_lo + y, c * coupling));
            }
            let port_site = |dir: PortDirection, rail: u8| -> Result<usize> {
                w.ports
                    .iter()
                    .find(|p| p.direction == dir && p.rail == rail)
                    .map(|p| w_lo + p.site)
                    .ok_or_else(|| {
                        QslideError::WidgetMismatch(format!("widget lacks a rail-{rail} port"))
                    })
            };
            b.edges.push((i0_hi, port_site(PortDirection::In, 0)?, coupling));
            b.edges.push((i1_hi, port_site(PortDirection::In, 1)?, coupling));
            let (o0_lo, o0_hi) = b.add_sites(output_len, RoleKind::OutputWire, Some(0));
            b.edges.push((port_site(PortDirection::Out, 0)?, o0_lo, coupling));
            b.chain(o0_lo, o0_hi, coupling);
            let (o1_lo, o1_hi) = b.add_sites(output_len, RoleKind::OutputWire, Some(1));
            b.edges.push((port_site(PortDirection::Out, 1)?, o1_lo, coupling));
            b.chain(o1_lo, o1_hi, coupling);
        }
    }

    let widget_replaces = match gate {
        GateKind::Reference => widget.map_or(5, |w| w.n_sites),
        _ => widget.expect("checked above").replaces,
    };
    let graph = WalkGraph {
        n_sites: b.fields.len(),
        edges: b.edges,
        fields: b.fields,
        roles: b.roles,
        slide_sites: (s_lo..=s_hi).collect(),
        widget_replaces,
    };
    graph.assert_invariants()?;
    Ok(graph)
}
