use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::torus::TorusConfig;
use crate::lambda::{LambdaMeasure, RateTable};
use crate::partition::Partition;
use crate::{invalid, Result};

/// Initial configuration of particles, labelled `0..n` in the listed order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Initial {
    /// One particle on every site, labelled by site index.
    Full,
    /// One particle per entry; repeated sites carry several particles.
    Sites(Vec<usize>),
    /// `n` particles at the origin.
    AtOrigin(usize),
}

/// How co-located particles coalesce.
#[derive(Debug, Clone)]
enum Rule {
    /// Immediately when a walker lands on an occupied site.
    Instant,
    /// By an independent Λ-coalescent on each site.
    Lambda(RateTable),
}

#[derive(Debug, Clone, Copy)]
struct Particle {
    id: usize,
    site: usize,
}

const NOT_CROWDED: usize = usize::MAX;

/// What happened at an event of [`SpatialSystem::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialEvent {
    /// Particle `id` walked; `merged_into` is set when it landed on an
    /// occupied site under instant coalescence.
    Jump {
        id: usize,
        from: usize,
        to: usize,
        merged_into: Option<usize>,
    },
    /// `k` particles at `site` merged into particle `id`.
    Merge { site: usize, k: usize, id: usize },
}

/// Event-driven particle system on a torus. Particle ids are the least
/// initial label each particle carries.
#[derive(Debug, Clone)]
pub struct SpatialSystem {
    cfg: TorusConfig,
    rule: Rule,
    time: f64,
    /// Union-find over initial labels; roots are block minima.
    parent: Vec<usize>,
    particles: Vec<Particle>,
    /// Indices into `particles`, per site.
    occupants: Vec<Vec<usize>>,
    /// Sites holding at least two particles, with the position of each site
    /// in that list.
    crowded: Vec<usize>,
    crowded_pos: Vec<usize>,
    merge_rate: f64,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl SpatialSystem {
    /// Coalescing random walks: a walker landing on an occupied site merges
    /// with its occupant at once.
    pub fn coalescing_walks(cfg: TorusConfig, initial: &Initial) -> Result<Self> {
        Self::build(cfg, Rule::Instant, initial)
    }

    /// Spatial Λ-coalescent: co-located particles run the Λ jump chain.
    pub fn lambda(cfg: TorusConfig, m: &LambdaMeasure, initial: &Initial) -> Result<Self> {
        let n = initial_sites(&cfg, initial)?.len();
        Self::build(cfg, Rule::Lambda(RateTable::new(m, n.max(2))?), initial)
    }

    fn build(cfg: TorusConfig, rule: Rule, initial: &Initial) -> Result<Self> {
        let sites = initial_sites(&cfg, initial)?;
        let mut sys = Self {
            cfg,
            rule,
            time: 0.0,
            parent: (0..sites.len()).collect(),
            particles: Vec::with_capacity(sites.len()),
            occupants: vec![Vec::new(); cfg.sites()],
            crowded: Vec::new(),
            crowded_pos: vec![NOT_CROWDED; cfg.sites()],
            merge_rate: 0.0,
        };
        for (label, site) in sites.into_iter().enumerate() {
            if matches!(sys.rule, Rule::Instant) {
                if let Some(&resident) = sys.occupants[site].first() {
                    let id = sys.particles[resident].id;
                    sys.union(id, label);
                    continue;
                }
            }
            sys.particles.push(Particle { id: label, site });
            let before = sys.occupants[site].len();
            sys.occupants[site].push(sys.particles.len() - 1);
            sys.recrowd(site, before);
        }
        Ok(sys)
    }

    pub fn config(&self) -> &TorusConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn count(&self) -> usize {
        self.particles.len()
    }

    pub fn density(&self) -> f64 {
        self.count() as f64 / self.cfg.sites() as f64
    }

    pub fn site_count(&self, site: usize) -> usize {
        self.occupants[site].len()
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let ra = find(&mut self.parent, a);
        let rb = find(&mut self.parent, b);
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        lo
    }

    fn site_rate(&self, b: usize) -> f64 {
        match &self.rule {
            Rule::Lambda(table) if b >= 2 => table.lambda_b(b),
            _ => 0.0,
        }
    }

    /// Updates the crowded list and merge rate after `site` changed from
    /// `before` occupants.
    fn recrowd(&mut self, site: usize, before: usize) {
        if matches!(self.rule, Rule::Instant) {
            return;
        }
        let after = self.occupants[site].len();
        self.merge_rate += self.site_rate(after) - self.site_rate(before);
        match (before >= 2, after >= 2) {
            (false, true) => {
                self.crowded_pos[site] = self.crowded.len();
                self.crowded.push(site);
            }
            (true, false) => {
                let pos = self.crowded_pos[site];
                self.crowded.swap_remove(pos);
                if let Some(&moved) = self.crowded.get(pos) {
                    self.crowded_pos[moved] = pos;
                }
                self.crowded_pos[site] = NOT_CROWDED;
            }
            _ => {}
        }
        if self.crowded.is_empty() {
            self.merge_rate = 0.0;
        }
    }

    /// Removes particle `idx`, which must already be gone from its site list.
    fn drop_particle(&mut self, idx: usize) {
        self.particles.swap_remove(idx);
        if idx < self.particles.len() {
            let old = self.particles.len();
            let site = self.particles[idx].site;
            let slot = self.occupants[site]
                .iter_mut()
                .find(|i| **i == old)
                .expect("moved particle is listed at its site");
            *slot = idx;
        }
    }

    fn detach(&mut self, idx: usize) {
        let site = self.particles[idx].site;
        let list = &mut self.occupants[site];
        let pos = list
            .iter()
            .position(|i| *i == idx)
            .expect("particle is listed at its site");
        list.swap_remove(pos);
    }

    /// Advances to the next event, or to `horizon` if the next event would
    /// come later (returning `None`). By memorylessness, stopping at the
    /// horizon and resuming later leaves the law unchanged.
    pub fn step<R: Rng + ?Sized>(&mut self, horizon: f64, rng: &mut R) -> Option<SpatialEvent> {
        let walk_rate = self.cfg.rho() * self.particles.len() as f64;
        let total = walk_rate + self.merge_rate;
        if total <= 0.0 {
            self.time = self.time.max(horizon);
            return None;
        }
        let dt = <Exp1 as Distribution<f64>>::sample(&Exp1, rng) / total;
        if self.time + dt > horizon {
            self.time = horizon;
            return None;
        }
        self.time += dt;
        if rng.random::<f64>() * total < walk_rate {
            Some(self.walk(rng))
        } else {
            Some(self.merge(rng))
        }
    }

    fn walk<R: Rng + ?Sized>(&mut self, rng: &mut R) -> SpatialEvent {
        let idx = rng.random_range(0..self.particles.len());
        let dir = rng.random_range(0..2 * self.cfg.d());
        let Particle { id, site: from } = self.particles[idx];
        let to = self.cfg.neighbour(from, dir);
        self.detach(idx);
        self.recrowd(from, self.occupants[from].len() + 1);
        if matches!(self.rule, Rule::Instant) {
            if let Some(&resident) = self.occupants[to].first() {
                let survivor = self.union(self.particles[resident].id, id);
                self.particles[resident].id = survivor;
                self.drop_particle(idx);
                return SpatialEvent::Jump {
                    id,
                    from,
                    to,
                    merged_into: Some(survivor),
                };
            }
        }
        self.particles[idx].site = to;
        let before = self.occupants[to].len();
        self.occupants[to].push(idx);
        self.recrowd(to, before);
        SpatialEvent::Jump {
            id,
            from,
            to,
            merged_into: None,
        }
    }

    fn merge<R: Rng + ?Sized>(&mut self, rng: &mut R) -> SpatialEvent {
        let Rule::Lambda(table) = &self.rule else {
            unreachable!("merge events only occur under a Λ rule")
        };
        let mut u = rng.random::<f64>() * self.merge_rate;
        let mut site = *self.crowded.last().expect("merge rate is positive");
        for &s in &self.crowded {
            let r = table.lambda_b(self.occupants[s].len());
            if u < r {
                site = s;
                break;
            }
            u -= r;
        }
        let b = self.occupants[site].len();
        let k = table
            .sample_merger_size(b, rng)
            .expect("site count is within the rate table");
        let list = &mut self.occupants[site];
        for i in 0..k {
            let j = rng.random_range(i..b);
            list.swap(i, j);
        }
        let mut chosen: Vec<usize> = list.drain(..k).collect();
        chosen.sort_unstable_by_key(|i| self.particles[*i].id);
        let keep = chosen[0];
        let mut id = self.particles[keep].id;
        for &i in &chosen[1..] {
            id = self.union(id, self.particles[i].id);
        }
        self.particles[keep].id = id;
        self.occupants[site].push(keep);
        let mut gone = chosen[1..].to_vec();
        gone.sort_unstable_by(|a, b| b.cmp(a));
        for i in gone {
            self.drop_particle(i);
        }
        self.recrowd(site, b);
        SpatialEvent::Merge { site, k, id }
    }

    /// Runs until time `t`.
    pub fn advance_until<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) {
        while self.step(t, rng).is_some() {}
    }

    pub fn state(&mut self) -> ParticleState {
        let carrier: Vec<usize> = (0..self.parent.len())
            .map(|i| find(&mut self.parent, i))
            .collect();
        let positions = self
            .particles
            .iter()
            .map(|p| (p.id, self.cfg.coords(p.site)))
            .collect();
        ParticleState {
            time: self.time,
            d: self.cfg.d(),
            l: self.cfg.l(),
            positions,
            carrier,
        }
    }
}

fn initial_sites(cfg: &TorusConfig, initial: &Initial) -> Result<Vec<usize>> {
    let sites = match initial {
        Initial::Full => (0..cfg.sites()).collect(),
        Initial::Sites(s) => s.clone(),
        Initial::AtOrigin(n) => vec![0; *n],
    };
    if sites.is_empty() {
        return Err(invalid("at least one particle is needed"));
    }
    if let Some(bad) = sites.iter().find(|s| **s >= cfg.sites()) {
        return Err(invalid(format!("site {bad} is outside the torus")));
    }
    Ok(sites)
}

/// Snapshot of a particle system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub time: f64,
    pub d: usize,
    pub l: usize,
    /// Coordinates of each particle, keyed by particle id.
    pub positions: BTreeMap<usize, Vec<usize>>,
    /// Particle id carrying each initial label.
    pub carrier: Vec<usize>,
}

impl ParticleState {
    pub fn count(&self) -> usize {
        self.positions.len()
    }

    /// Partition of the initial labels into the particles carrying them.
    pub fn blocks(&self) -> Partition {
        Partition::from_labels(&self.carrier)
    }
}

/// One row of a density time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub t: f64,
    pub particle_count: usize,
    pub density: f64,
}

/// `0` followed by ten points per decade from `min(0.01, horizon)` to `horizon`.
pub fn log_time_grid(horizon: f64) -> Vec<f64> {
    let mut grid = vec![0.0];
    if horizon <= 0.0 {
        return grid;
    }
    let start = horizon.min(0.01);
    let steps = (10.0 * (horizon / start).log10()).ceil() as usize;
    for i in 0..steps {
        grid.push(start * 10f64.powf(i as f64 / 10.0));
    }
    grid.push(horizon);
    grid.dedup();
    grid
}

/// Output of a simulation: density on a log-time grid and the final state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialRun {
    pub series: Vec<DensityPoint>,
    pub state: ParticleState,
}

impl SpatialRun {
    /// CSV with columns `t,particle_count,density`.
    pub fn write_density_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "particle_count", "density"])?;
        for p in &self.series {
            out.write_record([
                p.t.to_string(),
                p.particle_count.to_string(),
                p.density.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn run<R: Rng + ?Sized>(mut sys: SpatialSystem, horizon: f64, rng: &mut R) -> Result<SpatialRun> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon must be finite and >= 0"));
    }
    let series = log_time_grid(horizon)
        .into_iter()
        .map(|t| {
            sys.advance_until(t, rng);
            DensityPoint {
                t,
                particle_count: sys.count(),
                density: sys.density(),
            }
        })
        .collect();
    Ok(SpatialRun {
        series,
        state: sys.state(),
    })
}

/// Instantaneously coalescing random walks up to `horizon`.
pub fn simulate_crw<R: Rng + ?Sized>(
    cfg: TorusConfig,
    initial: &Initial,
    horizon: f64,
    rng: &mut R,
) -> Result<SpatialRun> {
    run(SpatialSystem::coalescing_walks(cfg, initial)?, horizon, rng)
}

/// Spatial Λ-coalescent up to `horizon`.
pub fn simulate_spatial_lambda<R: Rng + ?Sized>(
    cfg: TorusConfig,
    m: &LambdaMeasure,
    initial: &Initial,
    horizon: f64,
    rng: &mut R,
) -> Result<SpatialRun> {
    run(SpatialSystem::lambda(cfg, m, initial)?, horizon, rng)
}
