//! Flooding plan space under run-length constraints.
//!
//! A plan is a binary valve schedule over the horizon. Flood runs last between `min_flood`
//! and `max_flood` steps, consecutive floods are separated by at least `min_idle` idle
//! steps, and every run boundary sits on a grid of `quantum` steps. The run already in
//! progress at the start of the horizon is continued, not restarted: its elapsed steps count
//! toward its length. Enumeration walks run lengths directly instead of filtering `2^H`
//! strings.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConstraints {
    pub min_flood: usize,
    pub max_flood: usize,
    pub min_idle: usize,
    pub quantum: usize,
    pub horizon: usize,
    /// Upper bound on flood runs starting inside one horizon; continuing a flood already in
    /// progress does not count. `None` leaves it open.
    #[serde(default)]
    pub max_flood_runs: Option<usize>,
}

impl PlanConstraints {
    /// Five-day horizon on the ten-minute grid: 6–24 h floods, 24 h minimum idle, one-hour
    /// quantum and a single flood run per horizon.
    pub fn paper_scale() -> Self {
        Self {
            min_flood: 36,
            max_flood: 144,
            min_idle: 144,
            quantum: 6,
            horizon: 720,
            max_flood_runs: Some(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConstraints(m));
        if self.min_flood < 1 {
            return bad("min_flood must be >= 1".into());
        }
        if self.min_flood > self.max_flood {
            return bad(format!(
                "min_flood {} exceeds max_flood {}",
                self.min_flood, self.max_flood
            ));
        }
        if self.min_idle < 1 {
            return bad("min_idle must be >= 1".into());
        }
        if self.quantum < 1 {
            return bad("quantum must be >= 1".into());
        }
        for (name, x) in [
            ("min_flood", self.min_flood),
            ("max_flood", self.max_flood),
            ("min_idle", self.min_idle),
        ] {
            if x % self.quantum != 0 {
                return bad(format!("quantum {} does not divide {name} {x}", self.quantum));
            }
        }
        if self.max_flood_runs == Some(0) {
            return bad("max_flood_runs must be >= 1 when set".into());
        }
        Ok(())
    }
}

/// Valve state carried into the horizon from the executed past.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", content = "elapsed", rename_all = "snake_case")]
pub enum InitialRunState {
    Idle(usize),
    Flooding(usize),
}

impl InitialRunState {
    /// Idle for long enough that no idle minimum applies.
    pub const FRESH: InitialRunState = InitialRunState::Idle(usize::MAX);

    /// Derive the state from the executed flood column (1 = flooding).
    pub fn from_history(flood: &[f64]) -> Self {
        let Some(&last) = flood.last() else {
            return Self::FRESH;
        };
        let on = last >= 0.5;
        let run = flood.iter().rev().take_while(|&&f| (f >= 0.5) == on).count();
        match (on, run == flood.len()) {
            (true, _) => Self::Flooding(run),
            (false, true) => Self::FRESH,
            (false, false) => Self::Idle(run),
        }
    }

    pub fn is_flooding(&self) -> bool {
        matches!(self, Self::Flooding(_))
    }

    fn validate(&self, c: &PlanConstraints) -> Result<()> {
        match *self {
            Self::Flooding(e) if e >= c.max_flood => Err(Error::InvalidConstraints(format!(
                "in-progress flood already lasted {e} >= max_flood {}",
                c.max_flood
            ))),
            _ => Ok(()),
        }
    }

    /// Grid offset so that run boundaries fall on `(t + offset) % q == 0`.
    fn grid_offset(&self, q: usize) -> usize {
        match *self {
            Self::Flooding(e) => e % q,
            Self::Idle(_) => 0,
        }
    }
}

/// Binary flood schedule `f_i` over the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FloodingPlan {
    steps: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub flooding: bool,
    pub start: usize,
    pub len: usize,
}

impl FloodingPlan {
    pub fn new(steps: Vec<bool>) -> Result<Self> {
        Ok(Self { steps })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            steps: vec![false; n],
        }
    }

    pub fn steps(&self) -> &[bool] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.steps.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Maximal constant runs, in order.
    pub fn runs(&self) -> Vec<Run> {
        let mut out: Vec<Run> = Vec::new();
        for (i, &b) in self.steps.iter().enumerate() {
            match out.last_mut() {
                Some(r) if r.flooding == b => r.len += 1,
                _ => out.push(Run {
                    flooding: b,
                    start: i,
                    len: 1,
                }),
            }
        }
        out
    }

    pub fn flood_runs(&self) -> impl Iterator<Item = Run> {
        self.runs().into_iter().filter(|r| r.flooding)
    }

    pub fn first_flood_start(&self) -> Option<usize> {
        self.steps.iter().position(|&b| b)
    }

    pub fn flood_run_count(&self) -> usize {
        self.flood_runs().count()
    }

    pub fn flood_steps(&self) -> usize {
        self.steps.iter().filter(|&&b| b).count()
    }

    /// Parse one line of `0`/`1` characters.
    pub fn parse_line(s: &str, line: usize) -> Result<Self> {
        let steps = s
            .trim()
            .chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse {
                    line,
                    msg: format!("invalid plan character {other:?} at column {}", i + 1),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { steps })
    }
}

impl fmt::Display for FloodingPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.steps {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Parse a plan file: one plan per line, all of equal length. Blank lines are skipped.
pub fn parse_plans(text: &str) -> Result<Vec<FloodingPlan>> {
    let mut out: Vec<FloodingPlan> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let p = FloodingPlan::parse_line(raw, i + 1)?;
        if let Some(first) = out.first() {
            if first.len() != p.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("plan length {} differs from first plan ({})", p.len(), first.len()),
                });
            }
        }
        out.push(p);
    }
    Ok(out)
}

pub fn write_plans<W: Write>(plans: &[FloodingPlan], mut w: W) -> Result<()> {
    for p in plans {
        writeln!(w, "{p}")?;
    }
    Ok(())
}

/// Check a plan against the run-length constraints.
pub fn is_valid_plan(
    plan: &FloodingPlan,
    c: &PlanConstraints,
    init: InitialRunState,
) -> Result<bool> {
    if plan.len() != c.horizon {
        return Err(Error::LengthMismatch {
            what: "plan vs horizon",
            expected: c.horizon,
            actual: plan.len(),
        });
    }
    c.validate()?;
    init.validate(c)?;
    Ok(check(plan.steps(), c, init))
}

fn check(steps: &[bool], c: &PlanConstraints, init: InitialRunState) -> bool {
    let h = steps.len();
    let q = c.quantum;
    let off = init.grid_offset(q);

    let mut prev = init.is_flooding();
    for (t, &b) in steps.iter().enumerate() {
        if b != prev && (t + off) % q != 0 {
            return false;
        }
        prev = b;
    }

    let fits = |total: usize, complete: bool| {
        total >= c.min_flood && total <= c.max_flood && (!complete || total % q == 0)
    };

    let runs = FloodingPlan {
        steps: steps.to_vec(),
    }
    .runs();

    match init {
        InitialRunState::Flooding(e) if steps.first() != Some(&true) && !fits(e, true) => return false,
        // Flooding right away closes the idle run in progress.
        InitialRunState::Idle(e) if steps.first() == Some(&true) && e < c.min_idle => return false,
        _ => {}
    }

    let mut flood_runs = 0;
    for (k, r) in runs.iter().enumerate() {
        let end = r.start + r.len;
        if r.flooding {
            let carried = match init {
                InitialRunState::Flooding(e) if r.start == 0 => e,
                _ => 0,
            };
            if carried == 0 {
                flood_runs += 1;
            }
            if !fits(r.len + carried, end < h) {
                return false;
            }
        } else if end < h {
            // Idle run followed by a flood.
            let need_ok = if k > 0 {
                r.len >= c.min_idle
            } else {
                match init {
                    InitialRunState::Flooding(_) => r.len >= c.min_idle,
                    InitialRunState::Idle(e) => r.len.saturating_add(e) >= c.min_idle,
                }
            };
            if !need_ok {
                return false;
            }
        }
    }
    c.max_flood_runs.is_none_or(|m| flood_runs <= m)
}

/// Recursive run-length walker shared by enumeration and counting.
struct Walker<'a> {
    c: &'a PlanConstraints,
    offset: usize,
}

impl Walker<'_> {
    fn on_grid(&self, t: usize) -> bool {
        (t + self.offset) % self.c.quantum == 0
    }

    /// Flood lengths allowed for a run starting at `s` (with `carried` steps already done),
    /// ascending.
    fn lengths(&self, s: usize, carried: usize) -> impl Iterator<Item = usize> + '_ {
        let h = self.c.horizon;
        let q = self.c.quantum;
        let (lo, hi) = (self.c.min_flood, self.c.max_flood);
        let room = h - s;
        (0..=room).filter(move |&k| {
            let total = k + carried;
            if total < lo || total > hi {
                return false;
            }
            if k == room {
                true
            } else {
                total % q == 0 && (k > 0 || carried > 0)
            }
        })
    }

    fn runs_left(&self, used: usize) -> bool {
        self.c.max_flood_runs.is_none_or(|m| used < m)
    }

    /// Visit every completion of `buf[..pos]` where `buf[pos..]` starts idle and the next
    /// flood may begin no earlier than `pos + gap`.
    fn idle_from(
        &self,
        buf: &mut Vec<bool>,
        pos: usize,
        gap: usize,
        used: usize,
        visit: &mut dyn FnMut(&[bool]),
    ) {
        let h = self.c.horizon;
        if self.runs_left(used) {
            let first = pos.saturating_add(gap);
            for s in first..h {
                if !self.on_grid(s) {
                    continue;
                }
                let lens: Vec<usize> = self.lengths(s, 0).collect();
                for k in lens {
                    buf[s..s + k].iter_mut().for_each(|b| *b = true);
                    if s + k == h {
                        visit(buf);
                    } else {
                        self.idle_from(buf, s + k, self.c.min_idle, used + 1, visit);
                    }
                    buf[s..s + k].iter_mut().for_each(|b| *b = false);
                }
            }
        }
        visit(buf);
    }

    fn count_idle_from(
        &self,
        pos: usize,
        gap: usize,
        used: usize,
        memo: &mut HashMap<(usize, usize, usize), u128>,
    ) -> u128 {
        let key = (pos, gap, if self.c.max_flood_runs.is_some() { used } else { 0 });
        if let Some(&n) = memo.get(&key) {
            return n;
        }
        let h = self.c.horizon;
        let mut n: u128 = 1;
        if self.runs_left(used) {
            for s in pos.saturating_add(gap)..h {
                if !self.on_grid(s) {
                    continue;
                }
                let lens: Vec<usize> = self.lengths(s, 0).collect();
                for k in lens {
                    let sub = if s + k == h {
                        1
                    } else {
                        self.count_idle_from(s + k, self.c.min_idle, used + 1, memo)
                    };
                    n = n.saturating_add(sub);
                }
            }
        }
        memo.insert(key, n);
        n
    }
}

/// Visit every valid plan in enumeration order without materializing the full list.
///
/// Order: plans whose first flood starts earlier come first; among equal starts, shorter first
/// runs come first; the same rule applies recursively to later runs, and "no further flood"
/// comes after every continuation that floods again. With an idle start the all-zero plan is
/// therefore last.
pub fn for_each_plan(
    c: &PlanConstraints,
    init: InitialRunState,
    mut visit: impl FnMut(&[bool]),
) -> Result<()> {
    c.validate()?;
    init.validate(c)?;
    let w = Walker {
        c,
        offset: init.grid_offset(c.quantum),
    };
    let h = c.horizon;
    let mut buf = vec![false; h];
    match init {
        InitialRunState::Idle(e) => {
            w.idle_from(&mut buf, 0, c.min_idle.saturating_sub(e), 0, &mut visit);
        }
        InitialRunState::Flooding(e) => {
            let lens: Vec<usize> = w.lengths(0, e).collect();
            for k in lens {
                buf[..k].iter_mut().for_each(|b| *b = true);
                if k == h {
                    visit(&buf);
                } else {
                    w.idle_from(&mut buf, k, c.min_idle, 0, &mut visit);
                }
                buf[..k].iter_mut().for_each(|b| *b = false);
            }
        }
    }
    Ok(())
}

/// All plans accepted by [`is_valid_plan`], in enumeration order.
pub fn enumerate_plans(c: &PlanConstraints, init: InitialRunState) -> Result<Vec<FloodingPlan>> {
    let mut out = Vec::new();
    for_each_plan(c, init, |s| {
        out.push(FloodingPlan { steps: s.to_vec() })
    })?;
    Ok(out)
}

/// Size of the plan space, computed without materializing plans. Saturates at `u128::MAX`.
pub fn count_plans(c: &PlanConstraints, init: InitialRunState) -> Result<u128> {
    c.validate()?;
    init.validate(c)?;
    let w = Walker {
        c,
        offset: init.grid_offset(c.quantum),
    };
    let h = c.horizon;
    let mut memo = HashMap::new();
    Ok(match init {
        InitialRunState::Idle(e) => w.count_idle_from(0, c.min_idle.saturating_sub(e), 0, &mut memo),
        InitialRunState::Flooding(e) => {
            let lens: Vec<usize> = w.lengths(0, e).collect();
            lens.into_iter()
                .map(|k| {
                    if k == h {
                        1
                    } else {
                        w.count_idle_from(k, c.min_idle, 0, &mut memo)
                    }
                })
                .fold(0u128, u128::saturating_add)
        }
    })
}
