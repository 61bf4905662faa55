use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{AlphaSite, ReversalField};

/// Safety cap on forward steps before a sample is declared non-terminating.
pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

/// Which marker ends the forward leg.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnRule {
    /// First marker with t >= t_R.
    #[default]
    AtOrAfter,
    /// First marker with t > t_R.
    After,
}

impl ReturnRule {
    fn stops_at(self, t: u64, t_return: u64) -> bool {
        match self {
            ReturnRule::AtOrAfter => t >= t_return,
            ReturnRule::After => t > t_return,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkOptions {
    /// Requested return time t_R in steps.
    pub t_return: u64,
    pub rule: ReturnRule,
    pub max_steps: u64,
    pub alpha_site: AlphaSite,
    /// Site index of z = 0 in the reversal field's window.
    pub origin_site: i64,
}

impl WalkOptions {
    pub fn new(t_return: u64) -> Self {
        Self {
            t_return,
            rule: ReturnRule::AtOrAfter,
            max_steps: DEFAULT_MAX_STEPS,
            alpha_site: AlphaSite::Departure,
            origin_site: 0,
        }
    }
}

/// A lattice point (z in units of δ, t in units of ε).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub z: i64,
    pub t: u64,
}

/// A closed space-time loop: a stochastic forward leg and the deterministic
/// return leg through its markers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntwinedPath {
    /// Spatial step (±1) of each forward hop; time advances by one per hop.
    pub forward_leg: Vec<i8>,
    /// Markers in the order they were dropped. The last one is the turnaround.
    pub markers: Vec<Marker>,
    /// Spatial step of each return hop, in traversal order (time decreasing).
    pub return_leg: Vec<i8>,
    pub t_return: u64,
    pub t_stop: u64,
}

/// Which of the two outer envelopes a hop belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Index 0..4 of φ1..φ4 for a hop of envelope `side` in direction `step`.
pub fn component_index(side: Side, step: i8) -> usize {
    match (side, step < 0) {
        (Side::Left, true) => 0,
        (Side::Left, false) => 1,
        (Side::Right, true) => 2,
        (Side::Right, false) => 3,
    }
}

/// Receives signed unit charges keyed by (t, z, component).
pub trait ChargeSink {
    fn deposit(&mut self, t: u64, z: i64, component: usize, colour: i8);
}

/// One outer envelope as a forward-in-time walk from the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub side: Side,
    pub steps: Vec<i8>,
    /// Charge (+1 forward traversal, −1 reversed) of each hop.
    pub colours: Vec<i8>,
}

impl Envelope {
    /// Builds an envelope from its steps using the colouring rule alone: the
    /// left envelope starts at −1 and flips at every left turn (+z → −z),
    /// the right envelope starts at +1 and flips at every right turn.
    pub fn coloured_by_rule(side: Side, steps: Vec<i8>) -> Self {
        let (mut colour, flip_from) = match side {
            Side::Left => (-1i8, 1i8),
            Side::Right => (1i8, -1i8),
        };
        let mut colours = Vec::with_capacity(steps.len());
        for (i, &s) in steps.iter().enumerate() {
            if i > 0 && steps[i - 1] == flip_from && s == -flip_from {
                colour = -colour;
            }
            colours.push(colour);
        }
        Self { side, steps, colours }
    }

    pub fn track(&self) -> Vec<i64> {
        track_from_steps(&self.steps)
    }

    pub fn deposit<S: ChargeSink>(&self, sink: &mut S) {
        let mut z = 0i64;
        for (t, (&s, &c)) in self.steps.iter().zip(&self.colours).enumerate() {
            sink.deposit(t as u64, z, component_index(self.side, s), c);
            z += i64::from(s);
        }
    }
}

fn track_from_steps(steps: &[i8]) -> Vec<i64> {
    let mut track = Vec::with_capacity(steps.len() + 1);
    let mut z = 0i64;
    track.push(z);
    for &s in steps {
        z += i64::from(s);
        track.push(z);
    }
    track
}

/// Deposits the two hops leaving time slice `t`: the forward-leg hop (charge
/// +1) and the return-leg hop (charge −1, direction taken in increasing t).
/// The hop whose midpoint lies further left belongs to the left envelope.
pub(crate) fn deposit_hop_pair<S: ChargeSink>(
    sink: &mut S,
    t: u64,
    forward: (i64, i8),
    reverse: (i64, i8),
) {
    let mid_f = 2 * forward.0 + i64::from(forward.1);
    let mid_r = 2 * reverse.0 + i64::from(reverse.1);
    debug_assert_ne!(mid_f, mid_r, "forward and return legs share a hop");
    let (f_side, r_side) = if mid_f < mid_r {
        (Side::Left, Side::Right)
    } else {
        (Side::Right, Side::Left)
    };
    sink.deposit(t, forward.0, component_index(f_side, forward.1), 1);
    sink.deposit(t, reverse.0, component_index(r_side, reverse.1), -1);
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Toggle {
    Reverse,
    Marker,
}

/// Runs the stutter process from the origin and closes the loop.
///
/// Each forward hop is followed by an indication with probability α taken
/// from `alpha`; indications alternate between reversing direction (first)
/// and dropping a marker. The forward leg ends at the first marker selected
/// by `opts.rule`; the return leg then retraces, between consecutive markers,
/// the opposite sides of the rhombus spanned by the forward leg.
///
/// If the cap is hit, the returned [`Error::NonTerminating`] carries zero seed
/// and walker fields; [`run_ensemble`](super::run_ensemble) fills them in.
pub fn generate_entwined_pair<R: Rng + ?Sized>(
    rng: &mut R,
    alpha: &ReversalField,
    opts: &WalkOptions,
) -> Result<EntwinedPath> {
    if opts.t_return < 2 {
        return Err(invalid("t_return", "must be at least two steps"));
    }
    let mut forward = Vec::with_capacity(2 * opts.t_return as usize);
    let mut markers = Vec::new();
    let mut z = 0i64;
    let mut t = 0u64;
    let mut dir = 1i8;
    let mut toggle = Toggle::Reverse;

    forward.push(dir);
    z += 1;
    t += 1;
    loop {
        if t >= opts.max_steps {
            return Err(Error::NonTerminating {
                seed: 0,
                walker: 0,
                max_steps: opts.max_steps,
            });
        }
        let site = match opts.alpha_site {
            AlphaSite::Departure => z - i64::from(dir),
            AlphaSite::Arrival => z,
        };
        if rng.gen::<f64>() < alpha.at(opts.origin_site + site).alpha {
            match toggle {
                Toggle::Reverse => {
                    dir = -dir;
                    toggle = Toggle::Marker;
                }
                Toggle::Marker => {
                    markers.push(Marker { z, t });
                    toggle = Toggle::Reverse;
                    if opts.rule.stops_at(t, opts.t_return) {
                        break;
                    }
                }
            }
        }
        forward.push(dir);
        z += i64::from(dir);
        t += 1;
    }

    let return_leg = return_leg_through_markers(&forward, &markers);
    Ok(EntwinedPath {
        forward_leg: forward,
        markers,
        return_leg,
        t_return: opts.t_return,
        t_stop: t,
    })
}

// Between consecutive markers the return side takes the forward hops in
// reverse order; traversed backwards in time each hop flips its sign.
fn return_leg_through_markers(forward: &[i8], markers: &[Marker]) -> Vec<i8> {
    let mut increasing: Vec<i8> = Vec::with_capacity(forward.len());
    let mut start = 0usize;
    for m in markers {
        let end = m.t as usize;
        increasing.extend(forward[start..end].iter().rev());
        start = end;
    }
    increasing.iter().rev().map(|s| -s).collect()
}

impl EntwinedPath {
    /// Positions z(t) of the forward leg for t = 0..=t_stop.
    pub fn forward_track(&self) -> Vec<i64> {
        track_from_steps(&self.forward_leg)
    }

    /// Positions of the return leg for t = 0..=t_stop.
    pub fn return_track(&self) -> Vec<i64> {
        let n = self.return_leg.len();
        let mut track = vec![0i64; n + 1];
        let mut z = self.markers.last().map_or(0, |m| m.z);
        track[n] = z;
        for (j, &s) in self.return_leg.iter().enumerate() {
            z += i64::from(s);
            track[n - 1 - j] = z;
        }
        track
    }

    /// Return-leg hops re-expressed in increasing time.
    pub fn return_steps_increasing(&self) -> Vec<i8> {
        self.return_leg.iter().rev().map(|s| -s).collect()
    }

    /// Left and right envelopes coloured by the alternation rule.
    pub fn envelopes(&self) -> (Envelope, Envelope) {
        let (left, right) = self.envelope_steps();
        (
            Envelope::coloured_by_rule(Side::Left, left),
            Envelope::coloured_by_rule(Side::Right, right),
        )
    }

    /// Left and right envelopes coloured by which leg actually carries each
    /// hop. Agrees with [`EntwinedPath::envelopes`] for every valid loop.
    pub fn envelopes_from_loop(&self) -> (Envelope, Envelope) {
        let f = self.forward_track();
        let r = self.return_track();
        let (left_steps, right_steps) = self.envelope_steps();
        let mut left_colours = Vec::with_capacity(left_steps.len());
        let mut right_colours = Vec::with_capacity(right_steps.len());
        for t in 0..left_steps.len() {
            let mid_f = f[t] + f[t + 1];
            let mid_r = r[t] + r[t + 1];
            if mid_f < mid_r {
                left_colours.push(1);
                right_colours.push(-1);
            } else {
                left_colours.push(-1);
                right_colours.push(1);
            }
        }
        (
            Envelope {
                side: Side::Left,
                steps: left_steps,
                colours: left_colours,
            },
            Envelope {
                side: Side::Right,
                steps: right_steps,
                colours: right_colours,
            },
        )
    }

    fn envelope_steps(&self) -> (Vec<i8>, Vec<i8>) {
        let f = self.forward_track();
        let r = self.return_track();
        let lower: Vec<i64> = f.iter().zip(&r).map(|(a, b)| *a.min(b)).collect();
        let upper: Vec<i64> = f.iter().zip(&r).map(|(a, b)| *a.max(b)).collect();
        let steps = |track: &[i64]| track.windows(2).map(|w| (w[1] - w[0]) as i8).collect();
        (steps(&lower), steps(&upper))
    }

    /// Deposits the loop hop by hop: forward hops carry +1, return hops −1,
    /// and each is assigned to the envelope on its side.
    pub fn deposit_loop<S: ChargeSink>(&self, sink: &mut S) {
        let f = self.forward_track();
        let r_steps = self.return_steps_increasing();
        let r = self.return_track();
        for t in 0..self.forward_leg.len() {
            deposit_hop_pair(sink, t as u64, (f[t], self.forward_leg[t]), (r[t], r_steps[t]));
        }
    }

    /// Checks closure, marker placement, per-slice charge balance and the
    /// colour alternation of both envelopes. Integer arithmetic throughout.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.forward_leg.len();
        if n as u64 != self.t_stop || self.return_leg.len() != n {
            return Err(format!(
                "leg lengths {} / {} do not match t_stop {}",
                n,
                self.return_leg.len(),
                self.t_stop
            ));
        }
        if self.forward_leg.iter().chain(&self.return_leg).any(|s| s.abs() != 1) {
            return Err("hops must be diagonal".into());
        }
        let f = self.forward_track();
        let r = self.return_track();
        if f[0] != 0 || r[0] != 0 {
            return Err("loop does not start at the origin".into());
        }
        let total: i64 = self
            .forward_leg
            .iter()
            .chain(&self.return_leg)
            .map(|&s| i64::from(s))
            .sum();
        if total != 0 {
            return Err(format!("loop does not close: net displacement {total}"));
        }
        let last = self.markers.last().ok_or("no turnaround marker")?;
        if last.t != self.t_stop || last.z != f[n] {
            return Err("turnaround is not the last marker".into());
        }
        let mut prev_t = 0;
        for m in &self.markers {
            if m.t <= prev_t {
                return Err("markers out of time order".into());
            }
            prev_t = m.t;
            let t = m.t as usize;
            if f[t] != m.z {
                return Err(format!("marker ({}, {}) is off the forward leg", m.z, m.t));
            }
            if r[t] != m.z {
                return Err(format!("return leg misses marker ({}, {})", m.z, m.t));
            }
        }
        // one +1 and one −1 occupancy per slice on each leg traversal
        for (t, c) in crate::analysis::charge_slice_sums(self).iter().enumerate() {
            if *c != 0 {
                return Err(format!("net charge {c} at slice {t}"));
            }
        }
        let (left, right) = self.envelopes_from_loop();
        check_alternation(&left)?;
        check_alternation(&right)?;
        for t in 0..n {
            if left.colours[t] + right.colours[t] != 0 {
                return Err(format!("envelopes carry the same colour at slice {t}"));
            }
        }
        Ok(())
    }
}

// Colour changes exactly at left turns of the left envelope and at right
// turns of the right envelope.
fn check_alternation(env: &Envelope) -> std::result::Result<(), String> {
    let (start, flip_from) = match env.side {
        Side::Left => (-1, 1),
        Side::Right => (1, -1),
    };
    if env.colours.first() != Some(&start) {
        return Err(format!("{:?} envelope starts with the wrong colour", env.side));
    }
    for i in 1..env.steps.len() {
        let turn = env.steps[i - 1] == flip_from && env.steps[i] == -flip_from;
        let changed = env.colours[i] != env.colours[i - 1];
        if turn != changed {
            return Err(format!(
                "{:?} envelope colour {} at slice {i} without the matching corner",
                env.side,
                if changed { "changes" } else { "persists" }
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::StepProbabilities;
    use rand::rngs::mock::StepRng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform(alpha: f64) -> ReversalField {
        ReversalField::Uniform(StepProbabilities::new(alpha).unwrap())
    }

    #[test]
    fn indication_at_every_step_alternates() {
        // a zero stream makes every uniform draw 0.0 < α
        let mut rng = StepRng::new(0, 0);
        let path = generate_entwined_pair(&mut rng, &uniform(0.5), &WalkOptions::new(8)).unwrap();
        assert_eq!(path.forward_leg, vec![1, -1, -1, 1, 1, -1, -1, 1]);
        let marker_times: Vec<u64> = path.markers.iter().map(|m| m.t).collect();
        assert_eq!(marker_times, vec![2, 4, 6, 8]);
        assert!(path.markers.iter().all(|m| m.z == 0));
        assert_eq!(path.t_stop, 8);
        path.check_invariants().unwrap();
    }

    #[test]
    fn turnaround_rule_switch() {
        let mut rng = StepRng::new(0, 0);
        let mut opts = WalkOptions::new(8);
        opts.rule = ReturnRule::After;
        let path = generate_entwined_pair(&mut rng, &uniform(0.5), &opts).unwrap();
        assert_eq!(path.t_stop, 10);
    }

    #[test]
    fn silent_stream_hits_the_cap() {
        // u64::MAX maps to the largest uniform below 1.0: never an indication
        let mut rng = StepRng::new(u64::MAX, 0);
        let mut opts = WalkOptions::new(4);
        opts.max_steps = 1000;
        let err = generate_entwined_pair(&mut rng, &uniform(0.5), &opts).unwrap_err();
        assert!(matches!(err, Error::NonTerminating { max_steps: 1000, .. }));
    }

    #[test]
    fn rejects_short_return_time() {
        let mut rng = StepRng::new(0, 0);
        assert!(generate_entwined_pair(&mut rng, &uniform(0.5), &WalkOptions::new(1)).is_err());
    }

    #[test]
    fn hand_built_loop() {
        // forward: + + - | - - + + | ; markers at t=3 (z=1) and t=7 (z=1)
        let forward = vec![1, 1, -1, -1, -1, 1, 1];
        let markers = vec![Marker { z: 1, t: 3 }, Marker { z: 1, t: 7 }];
        let ret = return_leg_through_markers(&forward, &markers);
        let path = EntwinedPath {
            forward_leg: forward,
            markers,
            return_leg: ret,
            t_return: 7,
            t_stop: 7,
        };
        assert_eq!(path.return_steps_increasing(), vec![-1, 1, 1, 1, 1, -1, -1]);
        assert_eq!(path.return_track(), vec![0, -1, 0, 1, 2, 3, 2, 1]);
        path.check_invariants().unwrap();
        let (l, r) = path.envelopes();
        assert_eq!(l.steps, vec![-1, 1, 1, -1, -1, 1, 1]);
        assert_eq!(l.colours, vec![-1, -1, -1, 1, 1, 1, 1]);
        assert_eq!(r.steps, vec![1, 1, -1, 1, 1, -1, -1]);
        assert_eq!(r.colours, vec![1, 1, 1, -1, -1, -1, -1]);
        assert_eq!((l, r), path.envelopes_from_loop());
    }

    #[test]
    fn random_pairs_satisfy_invariants() {
        for (seed, alpha) in [(1u64, 0.1), (2, 0.5), (3, 0.9)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..300 {
                let path =
                    generate_entwined_pair(&mut rng, &uniform(alpha), &WalkOptions::new(12)).unwrap();
                path.check_invariants().unwrap();
                assert!(path.t_stop >= 12);
                assert_eq!(path.envelopes(), path.envelopes_from_loop());
            }
        }
    }

    #[test]
    fn corrupted_loop_is_detected() {
        let mut rng = StepRng::new(0, 0);
        let mut path = generate_entwined_pair(&mut rng, &uniform(0.5), &WalkOptions::new(6)).unwrap();
        path.return_leg[1] = -path.return_leg[1];
        assert!(path.check_invariants().is_err());
    }
}
