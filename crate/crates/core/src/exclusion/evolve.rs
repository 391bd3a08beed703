use std::io::Write;

use serde::Serialize;

use super::clocks::{ClockEvent, ClockSchedule, DEFAULT_COMPONENT_CAP};
use super::config::ParticleConfig;
use crate::environment::Environment;
use crate::error::{Result, SepError};
use crate::scalar::Scalar;
use crate::union_find::UnionFind;

pub const DEFAULT_MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub cap: usize,
    pub max_halvings: usize,
    /// Times at which to record the configuration; sorted internally.
    pub snapshots: Vec<f64>,
    pub record_events: bool,
    /// Replays every slab with its components in reverse order and compares.
    pub check_order: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            cap: DEFAULT_COMPONENT_CAP,
            max_halvings: DEFAULT_MAX_HALVINGS,
            snapshots: Vec::new(),
            record_events: false,
            check_order: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    pub i: usize,
    pub j: usize,
    /// Whether the exchange moved a particle.
    pub swapped: bool,
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub config: ParticleConfig,
    pub snapshots: Vec<(f64, ParticleConfig)>,
    pub events: Vec<EventRecord>,
    pub slab_width: f64,
    pub halvings: usize,
    pub max_component: usize,
    /// Slabs whose reversed-order replay was compared.
    pub order_checks: usize,
    /// Clock rings in `[0, t]`.
    pub event_count: usize,
}

impl EvolveOutcome {
    /// `time,i,j,swapped` rows.
    pub fn write_trajectory_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "i", "j", "swapped"])?;
        for e in &self.events {
            out.write_record([
                format!("{:e}", e.time),
                e.i.to_string(),
                e.j.to_string(),
                u8::from(e.swapped).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `time,point,occupied` rows, one per snapshot and point.
    pub fn write_snapshots_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "point", "occupied"])?;
        for (t, c) in &self.snapshots {
            for i in 0..c.len() {
                out.write_record([format!("{t:e}"), i.to_string(), u8::from(c.get(i)).to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `η^ξ_t` driven by the clocks `k`.
pub fn evolve<T: Scalar>(env: &Environment<T>, k: &ClockSchedule, xi: &ParticleConfig, t: f64) -> Result<ParticleConfig> {
    Ok(evolve_with(env, k, xi, t, &EvolveOptions::default())?.config)
}

/// Full graphical construction. Slabs whose fired-edge graph has a
/// component above `opts.cap` make the whole run restart with half the slab
/// width.
pub fn evolve_with<T: Scalar>(
    env: &Environment<T>,
    k: &ClockSchedule,
    xi: &ParticleConfig,
    t: f64,
    opts: &EvolveOptions,
) -> Result<EvolveOutcome> {
    if xi.len() != env.len() {
        return Err(SepError::invalid("configuration length differs from the point count"));
    }
    if !(t >= 0.0) || t > k.horizon() {
        return Err(SepError::invalid(format!("time {t} outside [0, {}]", k.horizon())));
    }
    let mut snaps = opts.snapshots.clone();
    if snaps.iter().any(|s| !(*s >= 0.0 && *s <= t)) {
        return Err(SepError::invalid("snapshot times must lie in [0, t]"));
    }
    snaps.sort_by(f64::total_cmp);

    let mut sched = k.clone();
    let mut worst = 0;
    for halvings in 0..=opts.max_halvings {
        match run(env, &sched, xi, t, &snaps, opts)? {
            Ok(mut outcome) => {
                outcome.halvings = halvings;
                outcome.slab_width = sched.slab_width();
                if halvings > 0 {
                    log::info!("slab width halved {halvings} times to {:e}", sched.slab_width());
                }
                return Ok(outcome);
            }
            Err(size) => {
                worst = size;
                sched = sched.halved();
            }
        }
    }
    Err(SepError::CertificateFailure {
        halvings: opts.max_halvings,
        max_component: worst,
        cap: opts.cap,
    })
}

/// One pass at a fixed slab width; `Err(size)` reports an oversized component.
fn run<T: Scalar>(
    env: &Environment<T>,
    k: &ClockSchedule,
    xi: &ParticleConfig,
    t: f64,
    snaps: &[f64],
    opts: &EvolveOptions,
) -> Result<std::result::Result<EvolveOutcome, usize>> {
    let edges = env.edges();
    let mut eta = xi.clone();
    let mut uf = UnionFind::new(env.len());
    let mut touched = Vec::new();
    let mut snapshots = Vec::with_capacity(snaps.len());
    let mut next_snap = 0;
    let mut events = Vec::new();
    let mut max_component = usize::from(!env.is_empty());
    let mut order_checks = 0;
    let mut event_count = 0;
    let mut oversized = None;

    k.for_each_slab(|_, slab| {
        let mut largest = 1;
        for ev in slab {
            let e = &edges[ev.edge];
            touched.push(e.i);
            touched.push(e.j);
            largest = largest.max(uf.union_size(e.i, e.j));
        }
        if largest > opts.cap {
            oversized = Some(largest);
            return Ok(false);
        }
        max_component = max_component.max(largest);
        let before = opts.check_order.then(|| eta.clone());
        for ev in slab {
            if ev.time > t {
                break;
            }
            while next_snap < snaps.len() && snaps[next_snap] < ev.time {
                snapshots.push((snaps[next_snap], eta.clone()));
                next_snap += 1;
            }
            let e = &edges[ev.edge];
            if opts.record_events {
                events.push(EventRecord {
                    time: ev.time,
                    i: e.i,
                    j: e.j,
                    swapped: eta.get(e.i) != eta.get(e.j),
                });
            }
            eta.exchange_in_place(e.i, e.j);
            event_count += 1;
        }
        if let Some(mut alt) = before {
            replay_by_components(env, slab, t, &mut uf, &mut alt);
            if alt != eta {
                return Err(SepError::Numerical(
                    "slab result depends on the component processing order".into(),
                ));
            }
            order_checks += 1;
        }
        // Resetting is idempotent, so duplicates need not be removed.
        uf.reset(&touched);
        touched.clear();
        Ok(slab.last().is_some_and(|ev| ev.time <= t))
    })?;
    if let Some(size) = oversized {
        return Ok(Err(size));
    }
    while next_snap < snaps.len() {
        snapshots.push((snaps[next_snap], eta.clone()));
        next_snap += 1;
    }
    Ok(Ok(EvolveOutcome {
        config: eta,
        snapshots,
        events,
        slab_width: k.slab_width(),
        halvings: 0,
        max_component,
        order_checks,
        event_count,
    }))
}

/// Applies the slab's events component by component, components taken in
/// decreasing order of their root.
fn replay_by_components<T: Scalar>(
    env: &Environment<T>,
    slab: &[ClockEvent],
    t: f64,
    uf: &mut UnionFind,
    eta: &mut ParticleConfig,
) {
    let edges = env.edges();
    let mut keyed: Vec<(usize, usize)> = slab
        .iter()
        .enumerate()
        .filter(|(_, ev)| ev.time <= t)
        .map(|(n, ev)| (uf.find(edges[ev.edge].i), n))
        .collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, n) in keyed {
        let e = &edges[slab[n].edge];
        eta.exchange_in_place(e.i, e.j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{gen_zd_conductance, ConductanceLaw};

    #[test]
    fn full_and_empty_are_fixed() {
        let env: Environment<f64> = gen_zd_conductance(1, 10, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        let k = ClockSchedule::sample(&env, 1.0, 2.0, 0.2, 3).unwrap();
        assert_eq!(evolve(&env, &k, &ParticleConfig::full(10), 2.0).unwrap(), ParticleConfig::full(10));
        assert_eq!(evolve(&env, &k, &ParticleConfig::empty(10), 2.0).unwrap(), ParticleConfig::empty(10));
    }

    #[test]
    fn giant_slab_triggers_halving() {
        let env: Environment<f64> = gen_zd_conductance(1, 40, &ConductanceLaw::Constant { value: 1.0 }, 0).unwrap();
        let k = ClockSchedule::sample(&env, 1.0, 8.0, 8.0, 5).unwrap();
        let opts = EvolveOptions {
            cap: 6,
            ..EvolveOptions::default()
        };
        let out = evolve_with(&env, &k, &ParticleConfig::from_occupied(40, &[0, 1, 2]), 8.0, &opts).unwrap();
        assert!(out.halvings > 0);
        assert!(out.max_component <= 6);
        let strict = EvolveOptions {
            cap: 1,
            max_halvings: 2,
            ..EvolveOptions::default()
        };
        assert!(matches!(
            evolve_with(&env, &k, &ParticleConfig::empty(40), 8.0, &strict),
            Err(SepError::CertificateFailure { .. })
        ));
    }
}
