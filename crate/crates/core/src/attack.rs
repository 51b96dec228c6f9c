//! Adversarial delay schedules and the delivery calendar they induce.
//!
//! Rounds are numbered from 1. The feedback of round `k` reaches the learner
//! at round `k + d̃_k − 1` with `d̃_k = min{d_k, T − k + 1}`, so everything is
//! delivered by the horizon. `D_t` is the set of origin rounds delivered at
//! `t`; the learner only ever sees the sum of their latency vectors.

use std::fmt::Debug;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TrialRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelaySchedule {
    raw: Vec<u32>,
    effective: Vec<u32>,
}

impl DelaySchedule {
    pub fn new(raw: Vec<u32>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Schedule("horizon must be at least 1".into()));
        }
        if let Some(k) = raw.iter().position(|&d| d == 0) {
            return Err(Error::Schedule(format!(
                "delay at round {} must be >= 1",
                k + 1
            )));
        }
        let horizon = raw.len() as u32;
        let effective = raw
            .iter()
            .enumerate()
            .map(|(k, &d)| d.min(horizon - k as u32))
            .collect();
        Ok(DelaySchedule { raw, effective })
    }

    pub fn horizon(&self) -> usize {
        self.raw.len()
    }

    /// `d_t` for round `t` (1-based).
    pub fn raw(&self, t: usize) -> u32 {
        self.raw[t - 1]
    }

    /// `d̃_t` for round `t` (1-based).
    pub fn effective(&self, t: usize) -> u32 {
        self.effective[t - 1]
    }

    pub fn raw_delays(&self) -> &[u32] {
        &self.raw
    }

    pub fn effective_delays(&self) -> &[u32] {
        &self.effective
    }

    /// Per-iterate budget `d = max_t d_t`.
    pub fn budget(&self) -> u32 {
        self.raw.iter().copied().max().unwrap_or(1)
    }

    /// Total budget `D = Σ d̃_t`.
    pub fn total_budget(&self) -> u64 {
        self.effective.iter().map(|&d| d as u64).sum()
    }

    pub fn delivery_round(&self, k: usize) -> usize {
        k + self.effective(k) as usize - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryCalendar {
    deliveries: Vec<Vec<usize>>,
    delivered_at: Vec<usize>,
}

/// The split of `Q_τ` into origins at or after `τ` and origins before `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QCounts {
    pub total: usize,
    pub at_or_after: usize,
    pub before: usize,
}

impl DeliveryCalendar {
    pub fn build(schedule: &DelaySchedule) -> Self {
        let horizon = schedule.horizon();
        let mut deliveries = vec![Vec::new(); horizon];
        let delivered_at: Vec<usize> = (1..=horizon).map(|k| schedule.delivery_round(k)).collect();
        for (k, &t) in delivered_at.iter().enumerate() {
            deliveries[t - 1].push(k + 1);
        }
        DeliveryCalendar {
            deliveries,
            delivered_at,
        }
    }

    /// Delay-free calendar `D_t = {t}`.
    pub fn identity(horizon: usize) -> Self {
        DeliveryCalendar {
            deliveries: (1..=horizon).map(|t| vec![t]).collect(),
            delivered_at: (1..=horizon).collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.deliveries.len()
    }

    /// `D_t`, ascending.
    pub fn bundle(&self, t: usize) -> &[usize] {
        &self.deliveries[t - 1]
    }

    pub fn delivered_at(&self, k: usize) -> usize {
        self.delivered_at[k - 1]
    }

    /// `τ_t = min D_t`, or `t` when nothing arrives.
    pub fn first_origin(&self, t: usize) -> usize {
        self.bundle(t).first().copied().unwrap_or(t)
    }

    /// Origins in `∪_{s=τ_t}^{t} D_s`.
    pub fn window(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        (self.first_origin(t)..=t).flat_map(move |s| self.bundle(s).iter().copied())
    }

    pub fn max_bundle(&self) -> usize {
        self.deliveries.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `Q_τ = |D_{t,τ}| + Σ_{s=τ}^{t−1} |D_s|`, split by whether the counted
    /// origin is at/after `τ` or before it.
    pub fn q_tau_counts(&self, t: usize, tau: usize) -> Result<QCounts> {
        if t == 0 || t > self.horizon() || !self.bundle(t).contains(&tau) {
            return Err(Error::NotInBundle { t, tau });
        }
        let mut counts = QCounts {
            total: 0,
            at_or_after: 0,
            before: 0,
        };
        let mut count = |q: usize| {
            counts.total += 1;
            if q >= tau {
                counts.at_or_after += 1;
            } else {
                counts.before += 1;
            }
        };
        self.bundle(t).iter().filter(|&&r| r < tau).for_each(|&q| count(q));
        for s in tau..t {
            self.bundle(s).iter().for_each(|&q| count(q));
        }
        Ok(counts)
    }

    /// `Q_τ` together with the pigeonhole bounds `Q_τ1 ≤ d̃_τ` and `Q_τ2 ≤ d`.
    pub fn checked_q_tau_counts(
        &self,
        schedule: &DelaySchedule,
        t: usize,
        tau: usize,
    ) -> Result<QCounts> {
        let c = self.q_tau_counts(t, tau)?;
        let d_tau = schedule.effective(tau) as usize;
        let d = schedule.budget() as usize;
        if c.at_or_after > d_tau {
            return Err(Error::Pigeonhole {
                t,
                tau,
                detail: format!("Q_tau1 = {} > d_tau = {d_tau}", c.at_or_after),
            });
        }
        if c.before > d {
            return Err(Error::Pigeonhole {
                t,
                tau,
                detail: format!("Q_tau2 = {} > d = {d}", c.before),
            });
        }
        Ok(c)
    }
}

/// Everything the calendar must satisfy, checked exhaustively. Returns the
/// first failure as a message.
pub fn audit_calendar(schedule: &DelaySchedule, calendar: &DeliveryCalendar) -> Result<(), String> {
    let horizon = schedule.horizon();
    let d = schedule.budget() as usize;
    let mut seen = vec![0u32; horizon];
    for t in 1..=horizon {
        let bundle = calendar.bundle(t);
        if bundle.len() > d {
            return Err(format!("|D_{t}| = {} > d = {d}", bundle.len()));
        }
        for &k in bundle {
            if k > t {
                return Err(format!("origin {k} delivered early at {t}"));
            }
            seen[k - 1] += 1;
        }
        let window = calendar.window(t).count();
        if window > 2 * d {
            return Err(format!("window at t={t} has {window} > 2d = {} origins", 2 * d));
        }
        for &tau in bundle {
            calendar
                .checked_q_tau_counts(schedule, t, tau)
                .map_err(|e| e.to_string())?;
        }
    }
    if let Some(k) = seen.iter().position(|&c| c != 1) {
        return Err(format!("origin {} delivered {} times", k + 1, seen[k]));
    }
    let cap = horizon as u64 * (horizon as u64 + 1) / 2;
    if schedule.total_budget() > cap {
        return Err(format!("total budget {} exceeds T(T+1)/2", schedule.total_budget()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default = "AttackConfig::default_strategy")]
    pub strategy: String,
    /// Delay budget (`constant`: the delay; `uniform-random`/`burst`: the maximum).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub len: Option<usize>,
}

impl AttackConfig {
    fn default_strategy() -> String {
        "none".into()
    }

    pub fn none() -> Self {
        AttackConfig {
            strategy: "none".into(),
            d: None,
            start: None,
            len: None,
        }
    }

    pub fn constant(d: u32) -> Self {
        AttackConfig {
            strategy: "constant".into(),
            d: Some(d),
            ..Self::none()
        }
    }

    pub fn uniform_random(d: u32) -> Self {
        AttackConfig {
            strategy: "uniform-random".into(),
            d: Some(d),
            ..Self::none()
        }
    }

    pub fn burst(start: usize, len: usize, d: u32) -> Self {
        AttackConfig {
            strategy: "burst".into(),
            d: Some(d),
            start: Some(start),
            len: Some(len),
        }
    }

    /// The same strategy with budget `d`; `none` becomes `constant` when `d > 1`.
    pub fn with_budget(&self, d: u32) -> Self {
        if self.strategy == "none" {
            return if d == 1 { Self::none() } else { Self::constant(d) };
        }
        AttackConfig {
            d: Some(d),
            ..self.clone()
        }
    }

    pub(crate) fn require_d(&self) -> Result<u32> {
        match self.d {
            Some(d) if d >= 1 => Ok(d),
            Some(_) => Err(Error::config("/attack/d", "delay budget must be >= 1")),
            None => Err(Error::config(
                "/attack/d",
                format!("strategy `{}` needs a delay budget `d`", self.strategy),
            )),
        }
    }
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self::none()
    }
}

/// An adversary that fixes the delay vector before play starts.
pub trait DelayStrategy: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Requested per-iterate budget `‖d‖_∞`.
    fn budget(&self) -> u32;

    fn delays(&self, horizon: usize, rng: &mut TrialRng) -> Result<Vec<u32>>;
}

fn check_budget(d: u32, horizon: usize) -> Result<()> {
    if d as usize > horizon {
        return Err(Error::Schedule(format!(
            "delay budget {d} exceeds horizon {horizon}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct NoDelay;

impl DelayStrategy for NoDelay {
    fn name(&self) -> &'static str {
        "none"
    }

    fn budget(&self) -> u32 {
        1
    }

    fn delays(&self, horizon: usize, _: &mut TrialRng) -> Result<Vec<u32>> {
        Ok(vec![1; horizon])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantDelay {
    pub d: u32,
}

impl DelayStrategy for ConstantDelay {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn budget(&self) -> u32 {
        self.d
    }

    fn delays(&self, horizon: usize, _: &mut TrialRng) -> Result<Vec<u32>> {
        check_budget(self.d, horizon)?;
        Ok(vec![self.d; horizon])
    }
}

/// i.i.d. delays uniform on `1..=d_max`; one round is pinned to `d_max` so the
/// budget is met exactly.
#[derive(Debug, Clone, Copy)]
pub struct UniformRandomDelay {
    pub d_max: u32,
}

impl DelayStrategy for UniformRandomDelay {
    fn name(&self) -> &'static str {
        "uniform-random"
    }

    fn budget(&self) -> u32 {
        self.d_max
    }

    fn delays(&self, horizon: usize, rng: &mut TrialRng) -> Result<Vec<u32>> {
        check_budget(self.d_max, horizon)?;
        let mut d: Vec<u32> = (0..horizon).map(|_| rng.random_range(1..=self.d_max)).collect();
        if !d.contains(&self.d_max) {
            let pin = rng.random_range(0..horizon);
            d[pin] = self.d_max;
        }
        Ok(d)
    }
}

/// Delay `d_max` on rounds `start..start+len`, immediate feedback elsewhere.
#[derive(Debug, Clone, Copy)]
pub struct BurstDelay {
    pub start: usize,
    pub len: usize,
    pub d_max: u32,
}

impl DelayStrategy for BurstDelay {
    fn name(&self) -> &'static str {
        "burst"
    }

    fn budget(&self) -> u32 {
        self.d_max
    }

    fn delays(&self, horizon: usize, _: &mut TrialRng) -> Result<Vec<u32>> {
        check_budget(self.d_max, horizon)?;
        if self.start < 1 || self.len < 1 || self.start + self.len - 1 > horizon {
            return Err(Error::Schedule(format!(
                "burst rounds {}..{} do not fit in horizon {horizon}",
                self.start,
                self.start + self.len
            )));
        }
        let burst = self.start..self.start + self.len;
        Ok((1..=horizon)
            .map(|t| if burst.contains(&t) { self.d_max } else { 1 })
            .collect())
    }
}

pub fn make_schedule(
    strategy: &dyn DelayStrategy,
    horizon: usize,
    rng: &mut TrialRng,
) -> Result<DelaySchedule> {
    DelaySchedule::new(strategy.delays(horizon, rng)?)
}
