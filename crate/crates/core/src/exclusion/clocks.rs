use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::scalar::Scalar;
use crate::seeds::{self, stream};
use crate::union_find::UnionFind;

/// Component-size cap used when certifying slabs.
pub const DEFAULT_COMPONENT_CAP: usize = 1000;

/// Ring of a Poisson clock on an edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClockEvent {
    pub time: f64,
    pub edge: usize,
}

#[derive(Debug, Clone)]
enum Source {
    /// Events are regenerated on demand, block by block, from
    /// `(seed, clocks.block, block index)`.
    Lazy {
        seed: u64,
        block_width: f64,
        total_rate: f64,
        alias: Option<WeightedAliasIndex<f64>>,
    },
    Explicit { events: Vec<ClockEvent> },
}

/// Realized Poisson clocks on `[0, horizon]`, one per edge with intensity
/// `rate_scale·c_e`, sliced into slabs of width `slab_width`.
///
/// Sampled schedules are lazy: events of a block are drawn when the block is
/// visited, and every visit reproduces them exactly. Blocks have the width
/// of the initial slab, so halving the slab width keeps the same events.
#[derive(Debug, Clone)]
pub struct ClockSchedule {
    horizon: f64,
    slab_width: f64,
    rate_scale: f64,
    num_edges: usize,
    source: Source,
}

impl ClockSchedule {
    /// Samples clocks with intensities `rate_scale·c_e`.
    pub fn sample<T: Scalar>(
        env: &Environment<T>,
        rate_scale: f64,
        horizon: f64,
        slab_width: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(SepError::invalid("horizon must be finite and nonnegative"));
        }
        if !(rate_scale > 0.0) || !rate_scale.is_finite() {
            return Err(SepError::invalid("rate scale must be positive"));
        }
        if horizon > 0.0 && !(slab_width > 0.0 && slab_width <= horizon) {
            return Err(SepError::invalid("slab width must lie in (0, horizon]"));
        }
        let weights: Vec<f64> = env.edges().iter().map(|e| e.rate.as_f64() * rate_scale).collect();
        let total_rate: f64 = weights.iter().sum();
        let alias = if total_rate > 0.0 {
            Some(WeightedAliasIndex::new(weights).map_err(|e| SepError::Numerical(format!("alias table: {e}")))?)
        } else {
            None
        };
        Ok(ClockSchedule {
            horizon,
            slab_width: if horizon > 0.0 { slab_width } else { 1.0 },
            rate_scale,
            num_edges: env.num_edges(),
            source: Source::Lazy {
                seed,
                block_width: if horizon > 0.0 { slab_width } else { 1.0 },
                total_rate,
                alias,
            },
        })
    }

    /// Schedule with prescribed events, which must have distinct times in
    /// `(0, horizon]` and lie on edges with positive rate.
    pub fn from_events<T: Scalar>(
        env: &Environment<T>,
        horizon: f64,
        slab_width: f64,
        mut events: Vec<ClockEvent>,
    ) -> Result<Self> {
        if !(slab_width > 0.0) {
            return Err(SepError::invalid("slab width must be positive"));
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        for w in events.windows(2) {
            if w[0].time == w[1].time {
                return Err(SepError::invalid("two clock events share a time"));
            }
        }
        for e in &events {
            if e.edge >= env.num_edges() {
                return Err(SepError::invalid(format!("event on unknown edge {}", e.edge)));
            }
            if !(e.time > 0.0 && e.time <= horizon) {
                return Err(SepError::invalid(format!("event time {} outside (0, {horizon}]", e.time)));
            }
            if env.edges()[e.edge].rate <= T::zero() {
                return Err(SepError::invalid(format!("event on edge {} with zero rate", e.edge)));
            }
        }
        Ok(ClockSchedule {
            horizon,
            slab_width,
            rate_scale: 1.0,
            num_edges: env.num_edges(),
            source: Source::Explicit { events },
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn slab_width(&self) -> f64 {
        self.slab_width
    }

    pub fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    pub fn num_slabs(&self) -> usize {
        if self.horizon == 0.0 {
            0
        } else {
            (self.horizon / self.slab_width).ceil() as usize
        }
    }

    /// Same events, slabs of half the width.
    pub fn halved(&self) -> Self {
        let mut out = self.clone();
        out.slab_width *= 0.5;
        out
    }

    /// Index `r` of the slab `(r t₀, (r+1) t₀]` holding `time`.
    #[inline]
    pub fn slab_of(&self, time: f64) -> usize {
        ((time / self.slab_width).ceil() as usize).saturating_sub(1)
    }

    fn num_blocks(&self) -> usize {
        match &self.source {
            Source::Lazy { block_width, .. } if self.horizon > 0.0 => (self.horizon / block_width).ceil() as usize,
            Source::Lazy { .. } => 0,
            Source::Explicit { .. } => 1,
        }
    }

    /// Events of block `b` in increasing time order, appended to `out`.
    fn block_events(&self, b: usize, out: &mut Vec<ClockEvent>) {
        match &self.source {
            Source::Explicit { events } => out.extend_from_slice(events),
            Source::Lazy {
                seed,
                block_width,
                total_rate,
                alias,
            } => {
                let Some(alias) = alias else { return };
                let start = b as f64 * block_width;
                let end = ((b + 1) as f64 * block_width).min(self.horizon);
                let mut rng = stream(*seed, seeds::CLOCKS_BLOCK, b as u64);
                let mut redraw: Option<ChaCha8Rng> = None;
                let mut t = start;
                loop {
                    let gap: f64 = Exp1.sample(&mut rng);
                    let mut next = t + gap / total_rate;
                    // A spacing lost to rounding would create a tie; draw the
                    // later event again from a dedicated stream.
                    while !(next > t) {
                        let r = redraw.get_or_insert_with(|| stream(*seed, seeds::CLOCKS_REDRAW, b as u64));
                        let g: f64 = Exp1.sample(r);
                        next = t + g / total_rate;
                    }
                    if next > end {
                        break;
                    }
                    t = next;
                    out.push(ClockEvent {
                        time: t,
                        edge: alias.sample(&mut rng),
                    });
                }
            }
        }
    }

    /// Calls `f` on every event with time `≤ until`, in time order.
    pub fn for_each_event(&self, until: f64, mut f: impl FnMut(ClockEvent)) {
        let mut buf = Vec::new();
        for b in 0..self.num_blocks() {
            buf.clear();
            self.block_events(b, &mut buf);
            for ev in &buf {
                if ev.time > until {
                    return;
                }
                f(*ev);
            }
        }
    }

    /// All events up to `until`.
    pub fn events(&self, until: f64) -> Vec<ClockEvent> {
        let mut out = Vec::new();
        self.for_each_event(until, |e| out.push(e));
        out
    }

    /// Sorted event times per edge over the whole horizon.
    pub fn edge_event_times(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.num_edges];
        self.for_each_event(self.horizon, |e| out[e.edge].push(e.time));
        out
    }

    /// Calls `f(slab, events)` for every slab that has events, in order.
    pub(crate) fn for_each_slab(&self, mut f: impl FnMut(usize, &[ClockEvent]) -> Result<bool>) -> Result<()> {
        let mut buf = Vec::new();
        for b in 0..self.num_blocks() {
            buf.clear();
            self.block_events(b, &mut buf);
            let mut start = 0;
            while start < buf.len() {
                let slab = self.slab_of(buf[start].time);
                let end_time = (slab + 1) as f64 * self.slab_width;
                let mut end = start + 1;
                while end < buf.len() && buf[end].time <= end_time {
                    end += 1;
                }
                if !f(slab, &buf[start..end])? {
                    return Ok(());
                }
                start = end;
            }
        }
        Ok(())
    }
}

/// `sample_clocks` at the unscaled rates.
pub fn sample_clocks<T: Scalar>(env: &Environment<T>, horizon: f64, slab_width: f64, seed: u64) -> Result<ClockSchedule> {
    ClockSchedule::sample(env, 1.0, horizon, slab_width, seed)
}

/// Default slab width for clocks at `rate_scale·c`: `1 − e^{−c_max t₀}` is
/// half the bond percolation threshold of the ambient lattice. Without an
/// ambient lattice the threshold 1 is used and the width is adapted later
/// against the component cap; the flag reports that case.
pub fn default_slab_width<T: Scalar>(env: &Environment<T>, rate_scale: f64) -> (f64, bool) {
    let c_max = env.max_edge_rate().as_f64() * rate_scale;
    let (p_c, adaptive) = match env.meta().ambient {
        Some(lattice) => (lattice.bond_threshold(), false),
        None => (1.0, true),
    };
    if c_max <= 0.0 {
        return (f64::INFINITY, adaptive);
    }
    (-(1.0 - 0.5 * p_c).ln() / c_max, adaptive)
}

/// Components of the graph of edges fired in one slab. Singletons are not
/// listed.
#[derive(Debug, Clone, Serialize)]
pub struct SlabCertificate {
    pub slab: usize,
    pub components: Vec<Vec<usize>>,
    pub max_size: usize,
    pub valid: bool,
}

/// One certificate per slab.
pub fn slab_certificates<T: Scalar>(env: &Environment<T>, k: &ClockSchedule, cap: usize) -> Result<Vec<SlabCertificate>> {
    let n = env.len();
    let mut certs: Vec<SlabCertificate> = (0..k.num_slabs())
        .map(|slab| SlabCertificate {
            slab,
            components: Vec::new(),
            max_size: usize::from(n > 0),
            valid: true,
        })
        .collect();
    let mut uf = UnionFind::new(n);
    let mut touched = Vec::new();
    k.for_each_slab(|slab, events| {
        for ev in events {
            let e = &env.edges()[ev.edge];
            touched.push(e.i);
            touched.push(e.j);
            uf.union(e.i, e.j);
        }
        touched.sort_unstable();
        touched.dedup();
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut root_slot = std::collections::HashMap::new();
        for &p in &touched {
            let r = uf.find(p);
            let slot = *root_slot.entry(r).or_insert_with(|| {
                comps.push(Vec::new());
                comps.len() - 1
            });
            comps[slot].push(p);
        }
        let max_size = comps.iter().map(Vec::len).max().unwrap_or(1);
        certs[slab] = SlabCertificate {
            slab,
            components: comps,
            max_size,
            valid: max_size <= cap,
        };
        uf.reset(&touched);
        touched.clear();
        Ok(true)
    })?;
    Ok(certs)
}

/// Exact count of `Poisson(mean)` conditioned on being at least `min`.
pub(crate) fn poisson_at_least<R: Rng + ?Sized>(mean: f64, min: u64, rng: &mut R) -> u64 {
    // Inversion on the conditional law; `mean` is small where this is used.
    let mut pmf = (-mean).exp();
    let mut below = 0.0;
    for k in 0..min {
        below += pmf;
        pmf *= mean / (k + 1) as f64;
    }
    let mass = 1.0 - below;
    let u: f64 = rng.random::<f64>() * mass;
    let mut acc = 0.0;
    let mut k = min;
    loop {
        acc += pmf;
        if acc >= u || pmf < 1e-300 {
            return k;
        }
        k += 1;
        pmf *= mean / k as f64;
    }
}
