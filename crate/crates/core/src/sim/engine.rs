use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, RngExt};
use rand_distr::{Exp, StandardNormal};
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;

use super::events::{EventKind, EventLog, LogPolicy};
use super::octree::Octree;
use super::placement::{dot, fibonacci_directions, Direction, SphereGrid};
use super::rng::{stream, Domain};
use crate::config::ScenarioConfig;
use crate::error::SimError;

/// Reflections traced per molecule per step before giving up and projecting
/// the molecule out of whatever sphere it ended in.
const MAX_BOUNCES: usize = 16;
/// Below this population the move phase stays on the calling thread.
const PARALLEL_THRESHOLD: usize = 1024;

#[derive(Clone, Debug)]
pub struct Molecule {
    pub id: u64,
    pub position: [f64; 3],
    rng: Pcg64Mcg,
    pending: Option<([f64; 3], [f64; 3])>,
    alive: bool,
}

#[derive(Clone, Debug)]
pub struct Receptor {
    pub direction: Direction,
    pub busy_until: f64,
    pub assimilations: u64,
    rng: Pcg64Mcg,
}

impl Receptor {
    pub fn is_busy(&self, now: f64) -> bool {
        self.busy_until > now
    }
}

/// Gaussian displacement kernel of free diffusion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrownianKernel {
    /// Per-axis standard deviation, m.
    pub sigma: f64,
}

impl BrownianKernel {
    pub fn new(diffusivity: f64, dt: f64) -> Self {
        BrownianKernel {
            sigma: (2.0 * diffusivity * dt).sqrt(),
        }
    }

    pub fn displacement<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 3] {
        [
            self.sigma * rng.sample::<f64, _>(StandardNormal),
            self.sigma * rng.sample::<f64, _>(StandardNormal),
            self.sigma * rng.sample::<f64, _>(StandardNormal),
        ]
    }
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    tx_contact: f64,
    rx_center: [f64; 3],
    rx_contact: f64,
    rx_present: bool,
    cull: f64,
    restitution: f64,
}

enum Trace {
    Free([f64; 3]),
    /// Stopped on the receiver contact sphere with displacement left over.
    Contact([f64; 3], [f64; 3]),
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Fraction of segment `p + s v`, `s ∈ [0, 1]`, at which it enters the
/// sphere, if it does.
fn first_hit(p: [f64; 3], v: [f64; 3], center: [f64; 3], radius: f64) -> Option<f64> {
    let m = sub(p, center);
    let b = dot(&m, &v);
    if b >= 0.0 {
        return None;
    }
    let c = dot(&m, &m) - radius * radius;
    let a = dot(&v, &v);
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let s = (-b - disc.sqrt()) / a;
    (s <= 1.0).then_some(s.max(0.0))
}

fn reflect(w: [f64; 3], n: [f64; 3], restitution: f64) -> [f64; 3] {
    let k = (1.0 + restitution) * dot(&w, &n);
    sub(w, scale(n, k))
}

fn push_out(p: [f64; 3], center: [f64; 3], radius: f64) -> [f64; 3] {
    let m = sub(p, center);
    let r = dot(&m, &m).sqrt();
    if r >= radius {
        return p;
    }
    let dir = if r > 0.0 { scale(m, 1.0 / r) } else { [-1.0, 0.0, 0.0] };
    add(center, scale(dir, radius * (1.0 + 1e-12)))
}

impl Geometry {
    fn settle(&self, p: [f64; 3]) -> [f64; 3] {
        let p = push_out(p, [0.0; 3], self.tx_contact);
        if self.rx_present {
            push_out(p, self.rx_center, self.rx_contact)
        } else {
            p
        }
    }

    /// Moves from `p` by `v`, reflecting off the transmitter and stopping at
    /// the first receiver contact.
    fn trace(&self, mut p: [f64; 3], mut v: [f64; 3]) -> Trace {
        for _ in 0..MAX_BOUNCES {
            let tx = first_hit(p, v, [0.0; 3], self.tx_contact);
            let rx = if self.rx_present {
                first_hit(p, v, self.rx_center, self.rx_contact)
            } else {
                None
            };
            match (tx, rx) {
                (None, None) => return Trace::Free(self.settle(add(p, v))),
                (_, Some(s)) if tx.is_none_or(|t| s <= t) => {
                    return Trace::Contact(add(p, scale(v, s)), scale(v, 1.0 - s));
                }
                (Some(s), _) => {
                    let q = add(p, scale(v, s));
                    let n = scale(q, 1.0 / dot(&q, &q).sqrt());
                    v = reflect(scale(v, 1.0 - s), n, self.restitution);
                    p = q;
                }
                (None, Some(_)) => unreachable!(),
            }
        }
        Trace::Free(self.settle(add(p, v)))
    }

    fn outside_cube(&self, p: &[f64; 3]) -> bool {
        p.iter().any(|c| c.abs() > self.cull)
    }
}

/// Per-window accumulators, filled as events happen so rates stay
/// available even when individual events are not logged.
#[derive(Clone, Debug)]
pub(crate) struct Windows {
    pub length: f64,
    pub assimilations: Vec<u64>,
    pub rejections: Vec<u64>,
    /// Busy receptor-seconds falling into each window.
    pub busy: Vec<f64>,
}

impl Windows {
    fn new(length: f64) -> Self {
        Windows {
            length,
            assimilations: Vec::new(),
            rejections: Vec::new(),
            busy: Vec::new(),
        }
    }

    fn index(&mut self, t: f64) -> usize {
        let i = (t / self.length).floor() as usize;
        if i >= self.busy.len() {
            self.assimilations.resize(i + 1, 0);
            self.rejections.resize(i + 1, 0);
            self.busy.resize(i + 1, 0.0);
        }
        i
    }

    fn add_busy(&mut self, from: f64, to: f64) {
        let first = self.index(from);
        let last = self.index(to);
        for i in first..=last {
            let lo = from.max(i as f64 * self.length);
            let hi = to.min((i + 1) as f64 * self.length);
            if hi > lo {
                self.busy[i] += hi - lo;
            }
        }
    }
}

/// Construction switches that are not part of the physical scenario.
#[derive(Clone, Debug)]
pub struct SimOptions {
    /// Without a receiver the transmitter emits into open space.
    pub receiver: bool,
    pub log: LogPolicy,
    /// Threads for the move phase; 1 keeps everything on the calling thread.
    pub workers: usize,
    /// Observation window length, s. Defaults to half the mean trafficking
    /// time clamped to [0.05, 5] s.
    pub window: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            receiver: true,
            log: LogPolicy::default(),
            workers: 1,
            window: None,
        }
    }
}

/// Complete simulator state: clock, molecules, receptors and the event log.
pub struct SimState {
    pub(crate) config: ScenarioConfig,
    clock: f64,
    steps: u64,
    molecules: Vec<Molecule>,
    receptors: Vec<Receptor>,
    grid: Option<SphereGrid>,
    geometry: Geometry,
    kernel: BrownianKernel,
    next_molecule: u64,
    next_burst: u64,
    log: EventLog,
    pub(crate) windows: Windows,
    pool: Option<Arc<rayon::ThreadPool>>,
}

/// Builds the Table-style scene with default options.
pub fn build_scenario(config: &ScenarioConfig) -> Result<SimState, SimError> {
    SimState::new(config, &SimOptions::default())
}

pub fn default_window(trafficking_mean: f64) -> f64 {
    (trafficking_mean / 2.0).clamp(0.05, 5.0)
}

impl SimState {
    pub fn new(config: &ScenarioConfig, options: &SimOptions) -> Result<SimState, SimError> {
        let config = config.si_normalize();
        config.validate()?;
        let a = config.rx_radius;
        let covered = config.receptor_count as f64 * PI * config.receptor_radius.powi(2);
        if covered >= 4.0 * PI * a * a {
            return Err(SimError::Placement(format!(
                "{} receptors of radius {} m cover more than the receiver surface",
                config.receptor_count, config.receptor_radius
            )));
        }
        let directions = fibonacci_directions(config.receptor_count as usize);
        let receptors = directions
            .iter()
            .enumerate()
            .map(|(i, &direction)| Receptor {
                direction,
                busy_until: 0.0,
                assimilations: 0,
                rng: stream(config.seed, Domain::Receptor, i as u64),
            })
            .collect();
        let patch = (config.receptor_radius + config.molecule_radius) / a;
        let window = options
            .window
            .unwrap_or_else(|| default_window(config.trafficking_mean));
        if !(window > 0.0 && window.is_finite()) {
            return Err(SimError::InvalidRun(format!("window length {window} must be positive")));
        }
        let pool = if options.workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(options.workers)
                .build()
                .map_err(|e| SimError::InvalidRun(format!("cannot start worker pool: {e}")))?;
            Some(Arc::new(pool))
        } else {
            None
        };
        Ok(SimState {
            geometry: Geometry {
                tx_contact: config.tx_radius + config.molecule_radius,
                rx_center: [config.distance, 0.0, 0.0],
                rx_contact: a + config.molecule_radius,
                rx_present: options.receiver,
                cull: config.cull_half_side,
                restitution: config.restitution,
            },
            kernel: BrownianKernel::new(config.diffusion_coefficient(), config.sim_step),
            grid: options.receiver.then(|| SphereGrid::new(directions, patch)),
            clock: 0.0,
            steps: 0,
            molecules: Vec::new(),
            receptors,
            next_molecule: 0,
            next_burst: 1,
            log: EventLog::new(options.log),
            windows: Windows::new(window),
            pool,
            config,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn molecules(&self) -> &[Molecule] {
        &self.molecules
    }

    pub fn receptors(&self) -> &[Receptor] {
        &self.receptors
    }

    pub fn receptor_directions(&self) -> Vec<Direction> {
        self.receptors.iter().map(|r| r.direction).collect()
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn kernel(&self) -> BrownianKernel {
        self.kernel
    }

    pub fn window_length(&self) -> f64 {
        self.windows.length
    }

    /// Receptors busy at the current clock.
    pub fn busy_count(&self) -> usize {
        self.receptors.iter().filter(|r| r.is_busy(self.clock)).count()
    }

    /// Emitted molecules are either alive, assimilated or culled.
    pub fn conservation_holds(&self) -> bool {
        let t = &self.log.totals;
        t.emitted == self.molecules.len() as u64 + t.assimilated + t.culled
    }

    /// Places a molecule by hand, bypassing emission. Used to set up
    /// contact scenarios.
    pub fn inject(&mut self, position: [f64; 3]) -> u64 {
        let id = self.next_molecule;
        self.next_molecule += 1;
        self.molecules.push(Molecule {
            id,
            position,
            rng: stream(self.config.seed, Domain::Molecule, id),
            pending: None,
            alive: true,
        });
        self.log.record(self.clock, EventKind::Emit, id, None);
        id
    }

    /// Marks receptor `index` busy until `until`.
    pub fn occupy(&mut self, index: usize, until: f64) {
        self.receptors[index].busy_until = until;
    }

    /// Molecules whose centre lies in the shell `r1 ≤ |x| < r2` around the
    /// transmitter.
    pub fn count_in_shell(&self, r1: f64, r2: f64) -> usize {
        self.molecules
            .iter()
            .filter(|m| {
                let r = dot(&m.position, &m.position).sqrt();
                r >= r1 && r < r2
            })
            .count()
    }

    fn emit_due(&mut self, until: f64) {
        let q = self.config.burst_size;
        if q == 0 {
            return;
        }
        let period = self.config.emission_period;
        loop {
            let t = self.next_burst as f64 * period;
            if t > until {
                break;
            }
            let mut rng = stream(self.config.seed, Domain::Burst, self.next_burst);
            let radius = self.geometry.tx_contact * (1.0 + 1e-9);
            for _ in 0..q {
                let z: f64 = rng.random_range(-1.0..=1.0);
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let id = self.next_molecule;
                self.next_molecule += 1;
                self.molecules.push(Molecule {
                    id,
                    position: [radius * rho * phi.cos(), radius * rho * phi.sin(), radius * z],
                    rng: stream(self.config.seed, Domain::Molecule, id),
                    pending: None,
                    alive: true,
                });
                self.log.record(t, EventKind::Emit, id, None);
            }
            self.next_burst += 1;
        }
    }

    /// Advances the clock by one simulation step.
    pub fn step(&mut self) {
        let t1 = (self.steps + 1) as f64 * self.config.sim_step;
        self.emit_due(t1);

        let geometry = self.geometry;
        let kernel = self.kernel;
        let advance = |m: &mut Molecule| {
            let v = kernel.displacement(&mut m.rng);
            match geometry.trace(m.position, v) {
                Trace::Free(p) => m.position = p,
                Trace::Contact(q, w) => m.pending = Some((q, w)),
            }
        };
        match &self.pool {
            Some(pool) if self.molecules.len() >= PARALLEL_THRESHOLD => {
                let molecules = &mut self.molecules;
                pool.install(|| molecules.par_iter_mut().for_each(advance));
            }
            _ => self.molecules.iter_mut().for_each(advance),
        }

        // Receiver contacts change receptor state, so they are settled in id
        // order on one thread.
        for i in 0..self.molecules.len() {
            if let Some((q, w)) = self.molecules[i].pending.take() {
                self.resolve_contact(i, q, w, t1);
            }
        }

        for m in &mut self.molecules {
            if m.alive && geometry.outside_cube(&m.position) {
                m.alive = false;
                self.log.record(t1, EventKind::Cull, m.id, None);
            }
        }
        self.molecules.retain(|m| m.alive);

        if self.config.molecule_collisions && self.molecules.len() > 1 {
            self.separate_overlaps();
        }

        self.steps += 1;
        self.clock = t1;
    }

    fn resolve_contact(&mut self, i: usize, mut q: [f64; 3], mut w: [f64; 3], now: f64) {
        let center = self.geometry.rx_center;
        let id = self.molecules[i].id;
        for _ in 0..MAX_BOUNCES {
            let m = sub(q, center);
            let n = scale(m, 1.0 / dot(&m, &m).sqrt());
            let hit = self.grid.as_ref().and_then(|g| g.locate(&n));
            match hit {
                Some(r) if !self.receptors[r as usize].is_busy(now) => {
                    let receptor = &mut self.receptors[r as usize];
                    let hold: f64 = receptor
                        .rng
                        .sample(Exp::new(1.0 / self.config.trafficking_mean).unwrap());
                    receptor.busy_until = now + hold;
                    receptor.assimilations += 1;
                    self.log.record(now, EventKind::Assimilation, id, Some(r));
                    let wi = self.windows.index(now);
                    self.windows.assimilations[wi] += 1;
                    self.windows.add_busy(now, now + hold);
                    self.molecules[i].alive = false;
                    return;
                }
                Some(r) => {
                    self.log.record(now, EventKind::Rejection, id, Some(r));
                    let wi = self.windows.index(now);
                    self.windows.rejections[wi] += 1;
                }
                None => {
                    if self.log.policy.bare_hits {
                        self.log.record(now, EventKind::BareHit, id, None);
                    } else {
                        self.log.count_bare_hits(1);
                    }
                }
            }
            w = reflect(w, n, self.geometry.restitution);
            match self.geometry.trace(q, w) {
                Trace::Free(p) => {
                    self.molecules[i].position = p;
                    return;
                }
                Trace::Contact(q2, w2) => {
                    q = q2;
                    w = w2;
                }
            }
        }
        self.molecules[i].position = self.geometry.settle(q);
    }

    /// Pushes overlapping molecule pairs apart along their centre line.
    fn separate_overlaps(&mut self) {
        let contact = 2.0 * self.config.molecule_radius;
        let points: Vec<[f64; 3]> = self.molecules.iter().map(|m| m.position).collect();
        let tree = Octree::build(&points, [0.0; 3], self.geometry.cull);
        for (i, j) in tree.pairs_within(&points, contact) {
            let (i, j) = (i as usize, j as usize);
            let pi = self.molecules[i].position;
            let pj = self.molecules[j].position;
            let d = sub(pj, pi);
            let dist = dot(&d, &d).sqrt();
            if dist >= contact {
                continue;
            }
            let n = if dist > 0.0 {
                scale(d, 1.0 / dist)
            } else {
                [1.0, 0.0, 0.0]
            };
            let shift = 0.5 * (contact - dist);
            self.molecules[i].position = self.geometry.settle(sub(pi, scale(n, shift)));
            self.molecules[j].position = self.geometry.settle(add(pj, scale(n, shift)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> ScenarioConfig {
        crate::config::Profile::Desk.apply(&ScenarioConfig::table_one())
    }

    fn trace_equal(a: &SimState, b: &SimState) -> bool {
        a.log.events == b.log.events
            && a.molecules
                .iter()
                .zip(&b.molecules)
                .all(|(x, y)| x.position == y.position)
    }

    #[test]
    fn empty_system_only_advances_clock() {
        let mut cfg = desk();
        cfg.burst_size = 0;
        let mut s = build_scenario(&cfg).unwrap();
        for _ in 0..10 {
            s.step();
        }
        assert!((s.clock() - 10.0 * cfg.sim_step).abs() < 1e-15);
        assert!(s.molecules().is_empty());
        assert!(s.log().events.is_empty());
    }

    #[test]
    fn placement_sanity() {
        let mut cfg = desk();
        cfg.receptor_radius = 0.2e-6;
        assert!(matches!(build_scenario(&cfg), Err(SimError::Placement(_))));
        let s = build_scenario(&ScenarioConfig::table_one()).unwrap();
        assert_eq!(s.receptors().len(), 10_000);
    }

    #[test]
    fn bounce_on_busy_logs_rejection_and_keeps_molecule() {
        let mut cfg = desk();
        cfg.burst_size = 0;
        cfg.receptor_count = 1;
        cfg.receptor_radius = 0.5e-6;
        let mut s = build_scenario(&cfg).unwrap();
        s.occupy(0, 1e9);
        let contact = cfg.rx_radius + cfg.molecule_radius;
        // just outside the receptor facing the transmitter
        for _ in 0..20 {
            s.inject([cfg.distance - contact - 1e-12, 0.0, 0.0]);
        }
        s.step();
        let rejected = s.log().totals.rejected;
        assert!(rejected >= 3, "{:?}", s.log().totals);
        assert_eq!(s.log().totals.assimilated, 0);
        assert_eq!(s.molecules().len(), 20);
        for rej in s.log().iter_kind(EventKind::Rejection) {
            assert_eq!(rej.receptor, Some(0));
            assert!(rej.molecule < 20);
        }
        for m in s.molecules() {
            let d = sub(m.position, [cfg.distance, 0.0, 0.0]);
            assert!(dot(&d, &d).sqrt() >= contact);
        }
    }

    #[test]
    fn free_receptor_assimilates() {
        let mut cfg = desk();
        cfg.burst_size = 0;
        cfg.receptor_count = 1;
        cfg.receptor_radius = 0.5e-6;
        let mut s = build_scenario(&cfg).unwrap();
        let contact = cfg.rx_radius + cfg.molecule_radius;
        for _ in 0..20 {
            s.inject([cfg.distance - contact - 1e-12, 0.0, 0.0]);
        }
        s.step();
        // one binding, the rest bounce off the now busy receptor
        assert_eq!(s.log().totals.assimilated, 1);
        assert!(s.log().totals.rejected >= 2);
        assert!(s.receptors()[0].is_busy(s.clock()));
        assert_eq!(s.receptors()[0].assimilations, 1);
        assert_eq!(s.molecules().len(), 19);
        assert!(s.conservation_holds());
    }

    #[test]
    fn conservation_and_invariants_each_step() {
        let mut cfg = desk();
        cfg.burst_size = 40;
        cfg.emission_period = 0.01;
        cfg.cull_half_side = 8e-6;
        let mut s = build_scenario(&cfg).unwrap();
        let tx = s.geometry.tx_contact;
        let rx = s.geometry.rx_contact;
        let mut last = 0.0;
        for _ in 0..1500 {
            s.step();
            assert!(s.conservation_holds());
            for m in s.molecules() {
                assert!(m.position.iter().all(|c| c.abs() <= cfg.cull_half_side));
                assert!(dot(&m.position, &m.position).sqrt() >= tx * (1.0 - 1e-9));
                let d = sub(m.position, [cfg.distance, 0.0, 0.0]);
                assert!(dot(&d, &d).sqrt() >= rx * (1.0 - 1e-9));
            }
        }
        for e in &s.log().events {
            assert!(e.time >= last);
            last = e.time;
        }
        assert!(s.log().totals.culled > 0);
        assert!(s.log().totals.receptor_hits() > 0);
    }

    #[test]
    fn busy_intervals_disjoint_per_receptor() {
        let mut cfg = desk();
        cfg.burst_size = 200;
        cfg.emission_period = 0.01;
        cfg.trafficking_mean = 0.05;
        cfg.cull_half_side = 8e-6;
        let mut s = build_scenario(&cfg).unwrap();
        let mut starts: Vec<Vec<(f64, f64)>> = vec![Vec::new(); s.receptors().len()];
        let mut seen = vec![0u64; s.receptors().len()];
        for _ in 0..2000 {
            s.step();
            for (i, r) in s.receptors().iter().enumerate() {
                if r.assimilations > seen[i] {
                    assert_eq!(r.assimilations, seen[i] + 1);
                    seen[i] = r.assimilations;
                    starts[i].push((s.clock(), r.busy_until));
                }
            }
        }
        let mut checked = 0;
        for iv in &starts {
            for pair in iv.windows(2) {
                assert!(pair[1].0 >= pair[0].1, "overlap {:?}", pair);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn deterministic_across_workers() {
        let mut cfg = desk();
        cfg.burst_size = 600;
        cfg.emission_period = 0.01;
        cfg.cull_half_side = 8e-6;
        cfg.molecule_collisions = true;
        let run = |workers| {
            let opts = SimOptions {
                workers,
                ..SimOptions::default()
            };
            let mut s = SimState::new(&cfg, &opts).unwrap();
            for _ in 0..400 {
                s.step();
            }
            s
        };
        let a = run(1);
        let b = run(4);
        let c = run(1);
        assert!(a.molecules.len() > PARALLEL_THRESHOLD);
        assert!(trace_equal(&a, &b));
        assert!(trace_equal(&a, &c));
    }

    #[test]
    fn windows_split_busy_time() {
        let mut w = Windows::new(1.0);
        w.add_busy(0.5, 2.25);
        assert_eq!(w.busy, vec![0.5, 1.0, 0.25]);
    }

    #[test]
    fn segment_hits() {
        assert_eq!(first_hit([-2.0, 0.0, 0.0], [4.0, 0.0, 0.0], [0.0; 3], 1.0), Some(0.25));
        assert_eq!(first_hit([-2.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0; 3], 1.0), None);
        assert_eq!(first_hit([-2.0, 2.0, 0.0], [4.0, 0.0, 0.0], [0.0; 3], 1.0), None);
        assert_eq!(first_hit([2.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0; 3], 1.0), None);
        let r = reflect([1.0, 1.0, 0.0], [-1.0, 0.0, 0.0], 1.0);
        assert_eq!(r, [-1.0, 1.0, 0.0]);
    }
}
