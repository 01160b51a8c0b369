//! Exact event-driven simulation of the GI/GI/1 processor-sharing queue.
//!
//! The state is kept in cumulative-service coordinates: `S(t)` is the
//! cumulative service per job (slope `1/Z` while `Z > 0`, flat otherwise),
//! and each job carries a fixed exit threshold `l = v + S(arrival)`. A
//! departure is the first threshold crossing, so one event costs one heap
//! operation and no per-job updates; residuals are recovered as `l - S(t)`.
//!
//! Conventions: departures are processed before arrivals at the same
//! instant, ties in thresholds depart simultaneously, and snapshots at a
//! grid time record the post-event state (right-continuous paths).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use thiserror::Error;

use crate::dist::{InterarrivalDistribution, ServiceDistribution};
use crate::measure::FiniteMeasure;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("initial service requirement must be positive, got {0}")]
    NonPositiveRequirement(f64),
    #[error("no pending event: queue is empty and no arrival is scheduled")]
    NoPendingEvent,
    #[error("event cap of {cap} exceeded at simulated time {time}")]
    EventCapExceeded { cap: u64, time: f64 },
    #[error("grid time {0} outside the simulated range")]
    GridOutOfRange(f64),
    #[error("no snapshot at raw time {0}; re-simulate with a matching grid")]
    GridMismatch(f64),
    #[error("event log disabled for this run")]
    LogDisabled,
    #[error("time window [{t}, {t} + {h}] outside the simulated horizon")]
    WindowOutOfRange { t: f64, h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct JobKey {
    threshold: f64,
    id: u64,
}

impl Eq for JobKey {}

impl PartialOrd for JobKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for JobKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.threshold
            .total_cmp(&other.threshold)
            .then(self.id.cmp(&other.id))
    }
}

/// One processed event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    /// A batch of jobs whose thresholds were crossed simultaneously.
    Departure { time: f64, count: usize },
    Arrival { time: f64, size: f64 },
}

#[derive(Debug, Clone)]
pub struct ArrivalRecord {
    pub time: f64,
    pub size: f64,
    /// Exit threshold `size + S(time)`, fixed at arrival.
    pub threshold: f64,
}

/// Piece of the piecewise-linear cumulative-service process starting at an
/// event epoch.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub start: f64,
    pub s: f64,
    pub z: u32,
}

/// Full event history of a run: enough to reconstruct `S`, the arrival
/// process, and the state measure at any time.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    pub initial_sizes: Vec<f64>,
    pub arrivals: Vec<ArrivalRecord>,
    pub segments: Vec<Segment>,
}

impl EventLog {
    /// `S(t)` by linear interpolation on the logged segments.
    pub fn s_at(&self, t: f64) -> f64 {
        let idx = self.segments.partition_point(|seg| seg.start <= t);
        let seg = &self.segments[idx.saturating_sub(1)];
        if seg.z > 0 {
            seg.s + (t - seg.start) / f64::from(seg.z)
        } else {
            seg.s
        }
    }

    /// Number of arrivals in `(0, t]`.
    pub fn arrivals_by(&self, t: f64) -> usize {
        self.arrivals.partition_point(|a| a.time <= t)
    }

    /// State measure at `t` reconstructed from first principles: a unit
    /// atom at `l - S(t)` for every job with `l > S(t)` arrived by `t`.
    pub fn measure_at(&self, t: f64) -> FiniteMeasure {
        let s = self.s_at(t);
        let mut atoms = Vec::new();
        for v in &self.initial_sizes {
            if v - s > 0.0 {
                atoms.push((v - s, 1.0));
            }
        }
        for a in &self.arrivals[..self.arrivals_by(t)] {
            if a.threshold - s > 0.0 {
                atoms.push((a.threshold - s, 1.0));
            }
        }
        FiniteMeasure::from_atoms(atoms).expect("unit weights")
    }
}

/// Exact PS queue state.
#[derive(Debug, Clone)]
pub struct QueueState {
    time: f64,
    cum_service: f64,
    jobs: BinaryHeap<Reverse<JobKey>>,
    next_id: u64,
    next_arrival: Option<(f64, f64)>,
    events: u64,
    log: Option<EventLog>,
}

impl QueueState {
    /// Start at time zero with the given initial service requirements.
    pub fn init(initial: &[f64]) -> Result<Self, SimError> {
        Self::init_with_log(initial, false)
    }

    pub fn init_with_log(initial: &[f64], keep_log: bool) -> Result<Self, SimError> {
        let mut jobs = BinaryHeap::with_capacity(initial.len());
        for (i, v) in initial.iter().enumerate() {
            if !(*v > 0.0) {
                return Err(SimError::NonPositiveRequirement(*v));
            }
            jobs.push(Reverse(JobKey {
                threshold: *v,
                id: i as u64,
            }));
        }
        let log = keep_log.then(|| EventLog {
            initial_sizes: initial.to_vec(),
            arrivals: Vec::new(),
            segments: vec![Segment {
                start: 0.0,
                s: 0.0,
                z: initial.len() as u32,
            }],
        });
        Ok(Self {
            time: 0.0,
            cum_service: 0.0,
            jobs,
            next_id: initial.len() as u64,
            next_arrival: None,
            events: 0,
            log,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Cumulative service per job `S(t)`.
    pub fn cum_service(&self) -> f64 {
        self.cum_service
    }

    pub fn queue_length(&self) -> usize {
        self.jobs.len()
    }

    /// Workload: the sum of residuals `l - S(t)` over live jobs.
    pub fn workload(&self) -> f64 {
        self.jobs
            .iter()
            .map(|Reverse(j)| j.threshold - self.cum_service)
            .sum()
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    /// Schedule the next exogenous arrival `(time, size)`; `advance`
    /// consumes it when it is the next event.
    pub fn set_next_arrival(&mut self, arrival: Option<(f64, f64)>) {
        if let Some((t, v)) = arrival {
            debug_assert!(t >= self.time && v > 0.0);
        }
        self.next_arrival = arrival;
    }

    pub fn pending_arrival(&self) -> Option<(f64, f64)> {
        self.next_arrival
    }

    /// Epoch of the next event, if any.
    pub fn next_event_time(&self) -> Option<f64> {
        let dep = self.next_departure_time();
        match (dep, self.next_arrival) {
            (None, None) => None,
            (Some(d), None) => Some(d),
            (None, Some((a, _))) => Some(a),
            (Some(d), Some((a, _))) => Some(d.min(a)),
        }
    }

    fn next_departure_time(&self) -> Option<f64> {
        self.jobs.peek().map(|Reverse(min)| {
            self.time + self.jobs.len() as f64 * (min.threshold - self.cum_service)
        })
    }

    /// Process exactly one event (a simultaneous-departure batch counts as
    /// one). Departures win ties with arrivals at the same instant.
    pub fn advance(&mut self) -> Result<Event, SimError> {
        let dep = self.next_departure_time();
        let arr = self.next_arrival;
        let take_arrival = match (dep, arr) {
            (None, None) => return Err(SimError::NoPendingEvent),
            (None, Some(_)) => true,
            (Some(_), None) => false,
            (Some(d), Some((a, _))) => a < d,
        };
        self.events += 1;
        let event = if take_arrival {
            let (t_arr, size) = arr.expect("checked above");
            let z = self.jobs.len();
            if z > 0 {
                self.cum_service += (t_arr - self.time) / z as f64;
            }
            self.time = t_arr;
            let threshold = size + self.cum_service;
            self.jobs.push(Reverse(JobKey {
                threshold,
                id: self.next_id,
            }));
            self.next_id += 1;
            self.next_arrival = None;
            if let Some(log) = &mut self.log {
                log.arrivals.push(ArrivalRecord {
                    time: t_arr,
                    size,
                    threshold,
                });
            }
            Event::Arrival { time: t_arr, size }
        } else {
            let t_dep = dep.expect("checked above");
            let threshold = self.jobs.peek().expect("nonempty").0.threshold;
            self.time = t_dep;
            self.cum_service = threshold;
            let mut count = 0;
            while let Some(Reverse(top)) = self.jobs.peek() {
                if top.threshold == threshold {
                    self.jobs.pop();
                    count += 1;
                } else {
                    break;
                }
            }
            Event::Departure {
                time: t_dep,
                count,
            }
        };
        if let Some(log) = &mut self.log {
            log.segments.push(Segment {
                start: self.time,
                s: self.cum_service,
                z: self.jobs.len() as u32,
            });
        }
        Ok(event)
    }

    /// The measure with a unit atom at each live job's residual.
    pub fn state_measure(&self) -> FiniteMeasure {
        self.measure_interpolated(self.time)
    }

    /// State measure at `tau` in the current inter-event interval.
    fn measure_interpolated(&self, tau: f64) -> FiniteMeasure {
        let s = self.s_interpolated(tau);
        let atoms: Vec<(f64, f64)> = self
            .jobs
            .iter()
            .filter(|Reverse(j)| j.threshold - s > 0.0)
            .map(|Reverse(j)| (j.threshold - s, 1.0))
            .collect();
        FiniteMeasure::from_atoms(atoms).expect("unit weights")
    }

    fn s_interpolated(&self, tau: f64) -> f64 {
        debug_assert!(tau >= self.time);
        if self.jobs.is_empty() {
            self.cum_service
        } else {
            self.cum_service + (tau - self.time) / self.jobs.len() as f64
        }
    }

    fn take_log(self) -> Option<EventLog> {
        self.log
    }
}

/// Initial-condition specification for a run of the r-th system.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Empty,
    Atoms(Vec<f64>),
    /// `ceil(w r / <chi, nu_e>)` i.i.d. draws from the excess distribution:
    /// an implementable stand-in for an initial state on the invariant
    /// manifold with fluid-scaled workload `w`.
    Manifold { workload: f64 },
}

impl InitialCondition {
    pub fn resolve<R: Rng + ?Sized>(
        &self,
        r: f64,
        nu: &ServiceDistribution,
        rng: &mut R,
    ) -> Vec<f64> {
        match self {
            InitialCondition::Empty => Vec::new(),
            InitialCondition::Atoms(v) => v.clone(),
            InitialCondition::Manifold { workload } => {
                let count = (workload * r / nu.excess_mean()).ceil().max(0.0) as usize;
                (0..count).map(|_| nu.sample_excess(rng)).collect()
            }
        }
    }
}

/// Options for [`run`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Abort with a diagnostic when a run exceeds this many events.
    pub event_cap: u64,
    /// Retain the full event log (needed for replay checks and FIFO
    /// comparisons; long runs should leave it off).
    pub keep_log: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            event_cap: 200_000_000,
            keep_log: false,
        }
    }
}

/// A simulated trajectory sampled on a grid, plus run observables.
#[derive(Debug, Clone)]
pub struct SimPath {
    pub times: Vec<f64>,
    pub snapshots: Vec<FiniteMeasure>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub s: Vec<f64>,
    pub log: Option<EventLog>,
}

/// Drive a full trajectory to `horizon`, sampling at the (sorted, raw-time)
/// `grid`. Snapshots at an event epoch record the post-event state.
pub fn run<R: Rng + ?Sized>(
    inter: &InterarrivalDistribution,
    service: &ServiceDistribution,
    initial: &[f64],
    horizon: f64,
    grid: &[f64],
    arrivals_rng: &mut R,
    services_rng: &mut R,
    opts: &RunOptions,
) -> Result<SimPath, SimError> {
    for g in grid {
        if !(0.0..=horizon).contains(g) {
            return Err(SimError::GridOutOfRange(*g));
        }
    }
    let mut state = QueueState::init_with_log(initial, opts.keep_log)?;
    let mut next_arrival_time = inter.sample(arrivals_rng);
    if next_arrival_time <= horizon {
        state.set_next_arrival(Some((next_arrival_time, service.sample(services_rng))));
    }

    let mut times = Vec::with_capacity(grid.len());
    let mut snapshots = Vec::with_capacity(grid.len());
    let mut z = Vec::with_capacity(grid.len());
    let mut w = Vec::with_capacity(grid.len());
    let mut s = Vec::with_capacity(grid.len());

    let mut process_until = |state: &mut QueueState, tau: f64| -> Result<(), SimError> {
        while let Some(t_next) = state.next_event_time() {
            if t_next > tau {
                break;
            }
            if state.events_processed() >= opts.event_cap {
                return Err(SimError::EventCapExceeded {
                    cap: opts.event_cap,
                    time: state.time(),
                });
            }
            let was_arrival = matches!(state.advance()?, Event::Arrival { .. });
            if was_arrival {
                next_arrival_time += inter.sample(arrivals_rng);
                if next_arrival_time <= horizon {
                    state
                        .set_next_arrival(Some((next_arrival_time, service.sample(services_rng))));
                }
            }
        }
        Ok(())
    };

    for &tau in grid {
        process_until(&mut state, tau)?;
        times.push(tau);
        snapshots.push(state.measure_interpolated(tau));
        let zz = state.queue_length() as f64;
        let ss = state.s_interpolated(tau);
        let ww: f64 = state
            .jobs
            .iter()
            .map(|Reverse(j)| j.threshold - ss)
            .sum();
        z.push(zz);
        w.push(ww);
        s.push(ss);
    }
    // Finish the horizon so the log covers replay windows past the grid.
    process_until(&mut state, horizon)?;

    Ok(SimPath {
        times,
        snapshots,
        z,
        w,
        s,
        log: state.take_log(),
    })
}

/// Time scalings of a raw trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScaleMode {
    /// `(1/r) mu(r t)`.
    Fluid,
    /// `(1/r) mu(r^2 t)`.
    Diffusion,
    /// `(1/r) mu(r (m + t))`: the fluid view shifted by `m`.
    Shifted(f64),
}

impl ScaleMode {
    pub fn raw_time(&self, r: f64, t: f64) -> f64 {
        match self {
            ScaleMode::Fluid => r * t,
            ScaleMode::Diffusion => r * r * t,
            ScaleMode::Shifted(m) => r * (m + t),
        }
    }
}

/// Re-index a raw path under fluid/diffusion/shifted scaling at the given
/// scaled times. Each requested time must map onto an existing raw grid
/// point; mass observables are scaled by `1/r` while `S` is reported raw.
pub fn scaled_view(
    path: &SimPath,
    r: f64,
    mode: ScaleMode,
    times: &[f64],
) -> Result<SimPath, SimError> {
    let mut out_times = Vec::with_capacity(times.len());
    let mut snapshots = Vec::with_capacity(times.len());
    let mut z = Vec::with_capacity(times.len());
    let mut w = Vec::with_capacity(times.len());
    let mut s = Vec::with_capacity(times.len());
    for &t in times {
        let raw = mode.raw_time(r, t);
        let idx = nearest_index(&path.times, raw)
            .filter(|&i| (path.times[i] - raw).abs() <= 1e-9 * raw.abs().max(1.0))
            .ok_or(SimError::GridMismatch(raw))?;
        out_times.push(t);
        snapshots.push(path.snapshots[idx].scaled(1.0 / r).expect("positive r"));
        z.push(path.z[idx] / r);
        w.push(path.w[idx] / r);
        s.push(path.s[idx]);
    }
    Ok(SimPath {
        times: out_times,
        snapshots,
        z,
        w,
        s,
        log: None,
    })
}

fn nearest_index(sorted: &[f64], x: f64) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let right = sorted.partition_point(|v| *v < x);
    let mut best = None;
    for cand in [right.wrapping_sub(1), right] {
        if cand < sorted.len() {
            let d = (sorted[cand] - x).abs();
            match best {
                None => best = Some((cand, d)),
                Some((_, bd)) if d < bd => best = Some((cand, d)),
                _ => {}
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Residual of the dynamic equation over `[t, t + h]` for a bounded `g`:
/// the state at `t + h` minus the transported state at `t` and the
/// contribution of intervening arrivals, all evaluated from the event log.
pub fn replay_check(
    path: &SimPath,
    t: f64,
    h: f64,
    g: &dyn Fn(f64) -> f64,
) -> Result<f64, SimError> {
    let log = path.log.as_ref().ok_or(SimError::LogDisabled)?;
    if !(t >= 0.0 && h >= 0.0) {
        return Err(SimError::WindowOutOfRange { t, h });
    }
    let s_t = log.s_at(t);
    let s_th = log.s_at(t + h);
    let shift = s_th - s_t;
    let guarded = |x: f64| if x > 0.0 { g(x) } else { 0.0 };

    let mut lhs = 0.0;
    let mut transported = 0.0;
    for v in &log.initial_sizes {
        lhs += guarded(v - s_th);
        let residual_t = v - s_t;
        if residual_t > 0.0 {
            transported += guarded(residual_t - shift);
        }
    }
    let n_t = log.arrivals_by(t);
    let n_th = log.arrivals_by(t + h);
    for a in &log.arrivals[..n_t] {
        lhs += guarded(a.threshold - s_th);
        let residual_t = a.threshold - s_t;
        if residual_t > 0.0 {
            transported += guarded(residual_t - shift);
        }
    }
    let mut injected = 0.0;
    for a in &log.arrivals[n_t..n_th] {
        lhs += guarded(a.threshold - s_th);
        injected += guarded(a.size - (s_th - log.s_at(a.time)));
    }
    Ok((lhs - transported - injected).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{HeavyTrafficFamily, LawSpec};
    use crate::streams::{substream, StreamRole};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn mm1(rho: f64) -> (InterarrivalDistribution, ServiceDistribution) {
        let inter =
            InterarrivalDistribution::new(LawSpec::Exponential { rate: rho }, 1.0).unwrap();
        let service = ServiceDistribution::new(LawSpec::Exponential { rate: 1.0 }).unwrap();
        (inter, service)
    }

    #[test]
    fn init_examples() {
        let empty = QueueState::init(&[]).unwrap();
        assert_eq!(empty.queue_length(), 0);
        assert_eq!(empty.workload(), 0.0);
        assert!(empty.state_measure().is_zero());

        let two = QueueState::init(&[1.0, 2.0]).unwrap();
        assert_eq!(two.queue_length(), 2);
        assert_relative_eq!(two.workload(), 3.0);
        let m = two.state_measure();
        let mut locs: Vec<f64> = m.atoms().iter().map(|(x, _)| *x).collect();
        locs.sort_by(f64::total_cmp);
        assert_eq!(locs, vec![1.0, 2.0]);

        let twin = QueueState::init(&[0.5, 0.5]).unwrap();
        assert_eq!(twin.queue_length(), 2);

        assert!(QueueState::init(&[0.0]).is_err());
        assert!(QueueState::init(&[-1.0]).is_err());
    }

    #[test]
    fn single_job_departs_after_its_requirement() {
        let mut st = QueueState::init(&[1.0]).unwrap();
        let ev = st.advance().unwrap();
        assert_eq!(ev, Event::Departure { time: 1.0, count: 1 });
        assert_eq!(st.queue_length(), 0);
        assert!(st.advance().is_err());
    }

    #[test]
    fn two_jobs_share_the_server() {
        // Sizes {2, 1}: rate 1/2 each until t = 2, then rate 1.
        let mut st = QueueState::init(&[2.0, 1.0]).unwrap();
        let ev = st.advance().unwrap();
        assert_eq!(ev, Event::Departure { time: 2.0, count: 1 });
        assert_relative_eq!(st.cum_service(), 1.0);
        let ev = st.advance().unwrap();
        assert_eq!(ev, Event::Departure { time: 3.0, count: 1 });
    }

    #[test]
    fn midpoint_state_of_the_shared_pair() {
        // Sizes {2, 1} at t = 1: each job has received 0.5 units.
        let st = QueueState::init(&[2.0, 1.0]).unwrap();
        let m = st.measure_interpolated(1.0);
        let mut locs: Vec<f64> = m.atoms().iter().map(|(x, _)| *x).collect();
        locs.sort_by(f64::total_cmp);
        assert_eq!(locs, vec![0.5, 1.5]);
    }

    #[test]
    fn idle_server_jumps_to_the_next_arrival() {
        let mut st = QueueState::init(&[]).unwrap();
        st.set_next_arrival(Some((5.0, 2.0)));
        let ev = st.advance().unwrap();
        assert_eq!(ev, Event::Arrival { time: 5.0, size: 2.0 });
        assert_eq!(st.time(), 5.0);
        assert_eq!(st.cum_service(), 0.0);
        assert_eq!(st.queue_length(), 1);
    }

    #[test]
    fn simultaneous_thresholds_depart_together() {
        let mut st = QueueState::init(&[1.0, 1.0, 2.0]).unwrap();
        let ev = st.advance().unwrap();
        assert_eq!(ev, Event::Departure { time: 3.0, count: 2 });
        assert_eq!(st.queue_length(), 1);
    }

    #[test]
    fn empty_run_is_the_zero_path() {
        let (inter, service) = mm1(1e-9);
        let mut a = substream(2, 0, 0, StreamRole::Arrivals);
        let mut s = substream(2, 0, 0, StreamRole::Services);
        let grid = vec![0.0, 0.5, 1.0];
        let path = run(
            &inter,
            &service,
            &[],
            1.0,
            &grid,
            &mut a,
            &mut s,
            &RunOptions::default(),
        )
        .unwrap();
        assert!(path.z.iter().all(|z| *z == 0.0));
        assert!(path.w.iter().all(|w| *w == 0.0));
        assert!(path.snapshots.iter().all(FiniteMeasure::is_zero));
    }

    #[test]
    fn deterministic_single_job_occupancy() {
        let service = ServiceDistribution::new(LawSpec::Deterministic { value: 1.0 }).unwrap();
        let inter =
            InterarrivalDistribution::new(LawSpec::Deterministic { value: 1e6 }, 1.0).unwrap();
        let mut a = substream(3, 0, 0, StreamRole::Arrivals);
        let mut s = substream(3, 0, 0, StreamRole::Services);
        let grid = vec![0.0, 0.5, 0.999, 1.0, 2.0];
        let path = run(
            &inter,
            &service,
            &[1.0],
            2.0,
            &grid,
            &mut a,
            &mut s,
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(path.z, vec![1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn mm1_time_average_queue_length() {
        // rho = 0.5: stationary mean queue length rho/(1-rho) = 1; PS and
        // FIFO share the queue-length law for exponential service.
        let (inter, service) = mm1(0.5);
        let mut a = substream(4, 0, 0, StreamRole::Arrivals);
        let mut s = substream(4, 0, 0, StreamRole::Services);
        let horizon = 10_000.0;
        let path = run(
            &inter,
            &service,
            &[],
            horizon,
            &[horizon],
            &mut a,
            &mut s,
            &RunOptions {
                keep_log: true,
                ..Default::default()
            },
        )
        .unwrap();
        let log = path.log.as_ref().unwrap();
        let mut acc = 0.0;
        for pair in log.segments.windows(2) {
            acc += f64::from(pair[0].z) * (pair[1].start - pair[0].start);
        }
        acc += f64::from(log.segments.last().unwrap().z)
            * (horizon - log.segments.last().unwrap().start);
        let avg = acc / horizon;
        // 3 standard errors of the time average at this horizon.
        assert!((avg - 1.0).abs() < 0.21, "time-average Z = {avg}");
    }

    #[test]
    fn replay_check_examples() {
        let (inter, service) = mm1(0.8);
        let mut a = substream(5, 0, 0, StreamRole::Arrivals);
        let mut s = substream(5, 0, 0, StreamRole::Services);
        let horizon = 500.0;
        let path = run(
            &inter,
            &service,
            &[],
            horizon,
            &[horizon],
            &mut a,
            &mut s,
            &RunOptions {
                keep_log: true,
                ..Default::default()
            },
        )
        .unwrap();
        let mut rng = substream(5, 0, 1, StreamRole::Initial);
        for _ in 0..100 {
            let t = rng.gen_range(0.0..horizon * 0.7);
            let h = rng.gen_range(0.0..horizon * 0.3);
            let unit = replay_check(&path, t, h, &|_x| 1.0).unwrap();
            let chi = replay_check(&path, t, h, &|x: f64| x).unwrap();
            assert!(unit <= 1e-9, "unit residual {unit}");
            assert!(chi <= 1e-9, "chi residual {chi}");
        }
        let no_log = SimPath { log: None, ..path.clone() };
        assert!(matches!(
            replay_check(&no_log, 0.0, 1.0, &|_| 1.0),
            Err(SimError::LogDisabled)
        ));
    }

    #[test]
    fn empty_system_replay_residual_is_zero() {
        let (inter, service) = mm1(1e-9);
        let mut a = substream(6, 0, 0, StreamRole::Arrivals);
        let mut s = substream(6, 0, 0, StreamRole::Services);
        let path = run(
            &inter,
            &service,
            &[],
            10.0,
            &[10.0],
            &mut a,
            &mut s,
            &RunOptions {
                keep_log: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(replay_check(&path, 1.0, 5.0, &|x: f64| x * x).unwrap(), 0.0);
    }

    #[test]
    fn queue_growth_bound_and_work_conservation() {
        let (inter, service) = mm1(0.9);
        let mut a = substream(7, 0, 0, StreamRole::Arrivals);
        let mut s = substream(7, 0, 0, StreamRole::Services);
        let horizon = 2000.0;
        let path = run(
            &inter,
            &service,
            &[1.0, 2.0],
            horizon,
            &[horizon],
            &mut a,
            &mut s,
            &RunOptions {
                keep_log: true,
                ..Default::default()
            },
        )
        .unwrap();
        let log = path.log.as_ref().unwrap();
        let mut rng = substream(7, 0, 1, StreamRole::Initial);
        use rand::Rng;
        for _ in 0..1000 {
            let t = rng.gen_range(0.0..horizon * 0.6);
            let h = rng.gen_range(0.0..horizon * 0.4);
            let z_t = log.measure_at(t).mass();
            let z_th = log.measure_at(t + h).mass();
            let growth = (log.arrivals_by(t + h) - log.arrivals_by(t)) as f64;
            assert!(z_th <= z_t + growth + 1e-12);
        }
        // Between consecutive events with the server busy, the workload
        // drains with slope exactly -1.
        let mut checked = 0;
        for pair in log.segments.windows(2) {
            let (s0, s1) = (&pair[0], &pair[1]);
            if s0.z == 0 {
                assert_eq!(s0.s, s1.s);
                continue;
            }
            let w0 = log.measure_at(s0.start).workload();
            let dt = s1.start - s0.start;
            // Just before the endpoint: same inter-event segment.
            let eps = dt * 1e-6;
            let w1 = log.measure_at(s1.start - eps).workload();
            let dw = w1 - w0;
            assert!(
                (dw + (dt - eps)).abs() <= 1e-9 * (1.0 + w0.abs()),
                "work conservation violated: dW = {dw}, dt = {dt}"
            );
            checked += 1;
            if checked > 400 {
                break;
            }
        }
        assert!(checked > 100);
        // S is nondecreasing, flat exactly on idle segments.
        for pair in log.segments.windows(2) {
            assert!(pair[1].s >= pair[0].s);
        }
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let fam = HeavyTrafficFamily::new(
            LawSpec::Exponential { rate: 1.0 },
            LawSpec::Exponential { rate: 1.0 },
            1.0,
            0.5,
        )
        .unwrap();
        let (inter, service) = fam.instantiate_r(10.0).unwrap();
        let grid: Vec<f64> = (0..=50).map(|i| f64::from(i) * 4.0).collect();
        let mk = || {
            let mut a = substream(8, 0, 0, StreamRole::Arrivals);
            let mut s = substream(8, 0, 0, StreamRole::Services);
            run(
                &inter,
                &service,
                &[1.0],
                200.0,
                &grid,
                &mut a,
                &mut s,
                &RunOptions::default(),
            )
            .unwrap()
        };
        let p1 = mk();
        let p2 = mk();
        assert_eq!(p1.z, p2.z);
        assert_eq!(p1.w, p2.w);
        assert_eq!(p1.s, p2.s);
        for (m1, m2) in p1.snapshots.iter().zip(&p2.snapshots) {
            assert_eq!(m1.atoms(), m2.atoms());
        }
    }

    #[test]
    fn scaling_identity_diffusion_equals_fluid_at_rt() {
        let (inter, service) = mm1(0.9);
        let r = 4.0;
        let scaled_times: Vec<f64> = (0..100).map(|i| f64::from(i) * 0.01).collect();
        let raw_grid: Vec<f64> = scaled_times.iter().map(|t| r * r * t).collect();
        let mut a = substream(9, 0, 0, StreamRole::Arrivals);
        let mut s = substream(9, 0, 0, StreamRole::Services);
        let path = run(
            &inter,
            &service,
            &[1.0, 0.5],
            r * r,
            &raw_grid,
            &mut a,
            &mut s,
            &RunOptions::default(),
        )
        .unwrap();
        let fluid_times: Vec<f64> = scaled_times.iter().map(|t| r * t).collect();
        let diff = scaled_view(&path, r, ScaleMode::Diffusion, &scaled_times).unwrap();
        let fluid = scaled_view(&path, r, ScaleMode::Fluid, &fluid_times).unwrap();
        for i in 0..scaled_times.len() {
            assert_eq!(diff.z[i], fluid.z[i]);
            assert_eq!(diff.snapshots[i].atoms(), fluid.snapshots[i].atoms());
        }
        // r = 1: all modes are the identity at time 0.
        let id = scaled_view(&path, 1.0, ScaleMode::Fluid, &[0.0]).unwrap();
        assert_eq!(id.snapshots[0].atoms(), path.snapshots[0].atoms());
        // Missing raw grid point is an error.
        assert!(scaled_view(&path, r, ScaleMode::Diffusion, &[0.0137]).is_err());
    }

    #[test]
    fn post_departure_measure_drops_the_departed_atom() {
        let mut st = QueueState::init(&[1.0, 2.0]).unwrap();
        st.advance().unwrap(); // first departure at t = 2
        let m = st.state_measure();
        assert_eq!(m.atoms().len(), 1);
        assert_relative_eq!(m.workload(), 0.5);
    }

    #[test]
    fn event_cap_aborts_with_diagnostic() {
        let (inter, service) = mm1(0.9);
        let mut a = substream(10, 0, 0, StreamRole::Arrivals);
        let mut s = substream(10, 0, 0, StreamRole::Services);
        let err = run(
            &inter,
            &service,
            &[],
            1000.0,
            &[1000.0],
            &mut a,
            &mut s,
            &RunOptions {
                event_cap: 10,
                keep_log: false,
            },
        )
        .unwrap_err();
        assert!(matches!(err, SimError::EventCapExceeded { cap: 10, .. }));
    }

    #[test]
    fn manifold_initial_condition_has_the_right_scale() {
        let nu = ServiceDistribution::new(LawSpec::Exponential { rate: 1.0 }).unwrap();
        let mut rng = substream(11, 0, 0, StreamRole::Initial);
        let jobs = InitialCondition::Manifold { workload: 1.0 }.resolve(40.0, &nu, &mut rng);
        assert_eq!(jobs.len(), 40); // ceil(1 * 40 / 1)
        let w: f64 = jobs.iter().sum::<f64>() / 40.0;
        assert!((w - 1.0).abs() < 0.5, "fluid-scaled workload {w}");
        assert!(jobs.iter().all(|v| *v > 0.0));
    }
}
