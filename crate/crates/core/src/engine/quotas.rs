use std::collections::BTreeSet;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::model::{AccountId, QuotaKind, Roster};
use crate::time::Interval;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaViolation {
    pub which: QuotaKind,
    pub limit: u32,
    pub would_be: u32,
    /// Set for the weekly minimum, which can never block an assignment.
    #[serde(default)]
    pub advisory: bool,
}

impl QuotaViolation {
    pub fn is_blocking(&self) -> bool {
        !self.advisory
    }
}

/// Evaluates the account's six limits against its assignments across all
/// schedules with `proposed` added. Days follow the display zone, keyed by
/// the start of each shift.
pub fn check_quotas(roster: &Roster, account: AccountId, proposed: &Interval) -> Vec<QuotaViolation> {
    let Some(acc) = roster.accounts.get(&account) else {
        return Vec::new();
    };
    let quotas = acc.quotas;
    if quotas.is_empty() {
        return Vec::new();
    }
    let zone = roster.settings.display_zone;
    let day_of = |i: &Interval| i.start.local_date(zone);
    let mut intervals: Vec<Interval> = roster.assignments_of(account).map(|s| s.interval).collect();
    intervals.push(*proposed);
    let pday = day_of(proposed);

    let sum_where = |pred: &dyn Fn(NaiveDate) -> bool| -> u32 {
        intervals.iter().filter(|i| pred(day_of(i))).map(|i| i.minutes() as u32).sum()
    };
    let mut out = Vec::new();
    let mut over = |which: QuotaKind, would_be: u32| {
        if let Some(limit) = quotas.get(which) {
            if would_be > limit {
                out.push(QuotaViolation { which, limit, would_be, advisory: false });
            }
        }
    };

    over(QuotaKind::MaxHoursPerDay, sum_where(&|d| d == pday));
    let week = pday.iso_week();
    let week_total = sum_where(&|d| d.iso_week() == week);
    over(QuotaKind::MaxHoursPerWeek, week_total);
    over(QuotaKind::MaxHoursPerMonth, sum_where(&|d| d.year() == pday.year() && d.month() == pday.month()));

    if quotas.max_consecutive_days.is_some() {
        let days: BTreeSet<NaiveDate> = intervals.iter().map(day_of).collect();
        let mut run = 1u32;
        let mut d = pday;
        while let Some(prev) = d.pred_opt().filter(|p| days.contains(p)) {
            run += 1;
            d = prev;
        }
        d = pday;
        while let Some(next) = d.succ_opt().filter(|n| days.contains(n)) {
            run += 1;
            d = next;
        }
        over(QuotaKind::MaxConsecutiveDays, run);
    }

    if quotas.max_consecutive_hours.is_some() {
        over(QuotaKind::MaxConsecutiveHours, consecutive_block_minutes(&intervals, proposed));
    }

    if let Some(min) = quotas.min_hours_per_week {
        if week_total < min {
            out.push(QuotaViolation { which: QuotaKind::MinHoursPerWeek, limit: min, would_be: week_total, advisory: true });
        }
    }
    out
}

/// Union length of the chain of touching or overlapping intervals that
/// contains `target`.
fn consecutive_block_minutes(intervals: &[Interval], target: &Interval) -> u32 {
    let mut sorted = intervals.to_vec();
    sorted.sort();
    let mut blocks: Vec<(Interval, bool)> = Vec::new();
    for i in sorted {
        let hit = i == *target;
        match blocks.last_mut() {
            Some((block, has)) if i.start <= block.end => {
                if i.end > block.end {
                    block.end = i.end;
                }
                *has |= hit;
            }
            _ => blocks.push((i, hit)),
        }
    }
    blocks.into_iter().find(|(_, has)| *has).map(|(b, _)| b.minutes() as u32).unwrap_or(0)
}
