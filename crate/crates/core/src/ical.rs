//! iCalendar export of personal schedules, and parsing of external feeds
//! for time-off import and conflict detection.

use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use chrono_tz::Tz;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{external_overlaps, ConflictReport};
use crate::model::{AccountId, ExternalEvent, Roster, TimeOff};
use crate::time::{DateRange, Interval, Timestamp};
use crate::workflow::record_time_off;

pub const PRODID: &str = "-//rosterd//rosterd 0.1//EN";

/// Recurrences are expanded at most this many days past their first instance.
pub const RRULE_HORIZON_DAYS: i64 = 366;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum IcalError {
    #[error("malformed calendar at line {line}: {detail}")]
    MalformedCalendar { line: usize, detail: String },
    #[error("unknown account {id}")]
    UnknownAccount { id: AccountId },
}

fn malformed(line: usize, detail: impl Into<String>) -> IcalError {
    IcalError::MalformedCalendar { line, detail: detail.into() }
}

// ---- writing ----

pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            ';' => out.push_str("\\;"),
            ',' => out.push_str("\\,"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out
}

/// Folds a content line at 75 octets without splitting a UTF-8 sequence.
fn push_folded(out: &mut String, line: &str) {
    let mut width = 0;
    for c in line.chars() {
        let len = c.len_utf8();
        if width + len > 75 {
            out.push_str("\r\n ");
            width = 1;
        }
        out.push(c);
        width += len;
    }
    out.push_str("\r\n");
}

/// One VEVENT per shift the account is assigned to that overlaps `range`.
pub fn export_ical(roster: &Roster, account: AccountId, range: &DateRange, stamp: Timestamp) -> Result<String, IcalError> {
    if !roster.accounts.contains_key(&account) {
        return Err(IcalError::UnknownAccount { id: account });
    }
    let window = range.to_interval(roster.settings.display_zone);
    let mut shifts: Vec<_> = roster.assignments_of(account).filter(|s| s.interval.overlaps(&window)).collect();
    shifts.sort_by_key(|s| (s.interval.start, s.id));
    let mut out = String::new();
    for line in ["BEGIN:VCALENDAR", "VERSION:2.0", &format!("PRODID:{PRODID}"), "CALSCALE:GREGORIAN"] {
        push_folded(&mut out, line);
    }
    for s in shifts {
        let schedule = roster.schedules.get(&s.schedule).map(|x| x.name.as_str()).unwrap_or("");
        push_folded(&mut out, "BEGIN:VEVENT");
        push_folded(&mut out, &format!("UID:shift-{}-{}@rosterd", s.id, account));
        push_folded(&mut out, &format!("DTSTAMP:{}", stamp.to_ical()));
        push_folded(&mut out, &format!("DTSTART:{}", s.interval.start.to_ical()));
        push_folded(&mut out, &format!("DTEND:{}", s.interval.end.to_ical()));
        push_folded(&mut out, &format!("SUMMARY:{}", escape_text(format!("{schedule} {}", s.title).trim())));
        if s.work_from_home {
            push_folded(&mut out, "CATEGORIES:WORK-FROM-HOME");
        }
        push_folded(&mut out, "END:VEVENT");
    }
    push_folded(&mut out, "END:VCALENDAR");
    Ok(out)
}

// ---- parsing ----

#[derive(Clone, Debug, PartialEq, Eq)]
struct ContentLine {
    number: usize,
    name: String,
    params: Vec<(String, String)>,
    value: String,
}

impl ContentLine {
    fn param(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k.eq_ignore_ascii_case(key)).map(|(_, v)| v.as_str())
    }
}

/// Joins folded lines; returns each logical line with its first physical line number.
fn unfold(text: &str) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if let Some(rest) = raw.strip_prefix([' ', '\t']) {
            if let Some(last) = out.last_mut() {
                last.1.push_str(rest);
                continue;
            }
        }
        if !raw.is_empty() {
            out.push((i + 1, raw.to_string()));
        }
    }
    out
}

fn parse_line(number: usize, line: &str) -> Result<ContentLine, IcalError> {
    // the value starts at the first colon outside a quoted parameter value
    let mut in_quotes = false;
    let mut colon = None;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            ':' if !in_quotes => {
                colon = Some(i);
                break;
            }
            _ => {}
        }
    }
    let colon = colon.ok_or_else(|| malformed(number, "missing ':'"))?;
    let (head, value) = (&line[..colon], &line[colon + 1..]);
    let mut parts = head.split(';');
    let name = parts.next().unwrap_or("").trim().to_ascii_uppercase();
    if name.is_empty() {
        return Err(malformed(number, "empty property name"));
    }
    let mut params = Vec::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| malformed(number, format!("bad parameter {p:?}")))?;
        params.push((k.trim().to_ascii_uppercase(), v.trim_matches('"').to_string()));
    }
    Ok(ContentLine { number, name, params, value: value.to_string() })
}

pub fn unescape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n' | 'N') => out.push('\n'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

/// A DTSTART/DTEND value: either a date or a resolved instant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum When {
    Date(NaiveDate),
    /// Local wall-clock time plus the zone it is read in.
    Local(NaiveDateTime, Tz),
    Utc(NaiveDateTime),
}

impl When {
    fn timestamp(&self) -> Timestamp {
        match *self {
            When::Date(d) => Timestamp::from_minutes(d.and_time(NaiveTime::MIN).and_utc().timestamp() / 60),
            When::Utc(dt) => Timestamp::from_minutes(dt.and_utc().timestamp().div_euclid(60)),
            When::Local(dt, zone) => local_timestamp(zone, dt),
        }
    }

    fn shift_days(&self, days: i64) -> When {
        let d = Duration::days(days);
        match *self {
            When::Date(x) => When::Date(x + d),
            When::Local(x, z) => When::Local(x + d, z),
            When::Utc(x) => When::Utc(x + d),
        }
    }

    fn date(&self) -> NaiveDate {
        match *self {
            When::Date(x) => x,
            When::Local(x, _) | When::Utc(x) => x.date(),
        }
    }
}

fn local_timestamp(zone: Tz, dt: NaiveDateTime) -> Timestamp {
    let time = NaiveTime::from_hms_opt(dt.hour(), dt.minute(), 0).expect("valid");
    Timestamp::from_local(zone, dt.date(), time)
}

fn parse_when(line: &ContentLine, default_zone: Tz) -> Result<When, IcalError> {
    let v = line.value.trim();
    let is_date = line.param("VALUE").is_some_and(|x| x.eq_ignore_ascii_case("DATE")) || (v.len() == 8 && !v.contains('T'));
    if is_date {
        let d = NaiveDate::parse_from_str(v, "%Y%m%d").map_err(|_| malformed(line.number, format!("bad date {v:?}")))?;
        return Ok(When::Date(d));
    }
    let (body, utc) = match v.strip_suffix(['Z', 'z']) {
        Some(b) => (b, true),
        None => (v, false),
    };
    let dt = NaiveDateTime::parse_from_str(body, "%Y%m%dT%H%M%S")
        .or_else(|_| NaiveDateTime::parse_from_str(body, "%Y%m%dT%H%M"))
        .map_err(|_| malformed(line.number, format!("bad date-time {v:?}")))?;
    if utc {
        return Ok(When::Utc(dt));
    }
    let zone = match line.param("TZID") {
        Some(name) => name.trim_start_matches('/').parse::<Tz>().map_err(|_| malformed(line.number, format!("unknown time zone {name:?}")))?,
        None => default_zone,
    };
    Ok(When::Local(dt, zone))
}

/// `PnW`, `PnDTnHnMnS` and their signed forms, in whole minutes.
fn parse_duration(number: usize, v: &str) -> Result<i64, IcalError> {
    let bad = || malformed(number, format!("bad duration {v:?}"));
    let (sign, rest) = match v.trim().strip_prefix('-') {
        Some(r) => (-1, r),
        None => (1, v.trim().trim_start_matches('+')),
    };
    let rest = rest.strip_prefix('P').ok_or_else(bad)?;
    let mut seconds = 0i64;
    let mut digits = String::new();
    let mut in_time = false;
    for c in rest.chars() {
        match c {
            '0'..='9' => digits.push(c),
            'T' => in_time = true,
            'W' | 'D' | 'H' | 'M' | 'S' => {
                let n: i64 = digits.parse().map_err(|_| bad())?;
                digits.clear();
                seconds += n * match (c, in_time) {
                    ('W', false) => 7 * 86400,
                    ('D', false) => 86400,
                    ('H', true) => 3600,
                    ('M', true) => 60,
                    ('S', true) => 1,
                    _ => return Err(bad()),
                };
            }
            _ => return Err(bad()),
        }
    }
    if !digits.is_empty() {
        return Err(bad());
    }
    Ok(sign * seconds.div_euclid(60))
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Rule {
    freq: Freq,
    interval: i64,
    count: Option<u32>,
    until: Option<When>,
    /// Indexed by days from Monday; all false means the start weekday.
    by_day: [bool; 7],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Freq {
    Daily,
    Weekly,
}

fn parse_weekday(s: &str) -> Option<Weekday> {
    Some(match s {
        "MO" => Weekday::Mon,
        "TU" => Weekday::Tue,
        "WE" => Weekday::Wed,
        "TH" => Weekday::Thu,
        "FR" => Weekday::Fri,
        "SA" => Weekday::Sat,
        "SU" => Weekday::Sun,
        _ => return None,
    })
}

fn parse_rule(line: &ContentLine, zone: Tz, warnings: &mut Vec<String>) -> Result<Option<Rule>, IcalError> {
    let mut freq = None;
    let mut rule = Rule { freq: Freq::Daily, interval: 1, count: None, until: None, by_day: [false; 7] };
    for part in line.value.split(';').filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| malformed(line.number, format!("bad RRULE part {part:?}")))?;
        match k.to_ascii_uppercase().as_str() {
            "FREQ" => freq = Some(v.to_ascii_uppercase()),
            "INTERVAL" => rule.interval = v.parse().ok().filter(|n: &i64| *n >= 1).ok_or_else(|| malformed(line.number, "bad INTERVAL"))?,
            "COUNT" => rule.count = Some(v.parse().map_err(|_| malformed(line.number, "bad COUNT"))?),
            "UNTIL" => {
                let fake = ContentLine { number: line.number, name: "UNTIL".into(), params: Vec::new(), value: v.to_string() };
                rule.until = Some(parse_when(&fake, zone)?);
            }
            "BYDAY" => {
                for d in v.split(',') {
                    let code = d.trim().trim_start_matches(|c: char| c == '+' || c == '-' || c.is_ascii_digit()).to_ascii_uppercase();
                    let day = parse_weekday(&code).ok_or_else(|| malformed(line.number, format!("bad BYDAY {d:?}")))?;
                    rule.by_day[day.num_days_from_monday() as usize] = true;
                }
            }
            "WKST" => {}
            other => warnings.push(format!("line {}: RRULE part {other} ignored", line.number)),
        }
    }
    match freq.as_deref() {
        Some("DAILY") => rule.freq = Freq::Daily,
        Some("WEEKLY") => rule.freq = Freq::Weekly,
        Some(other) => {
            warnings.push(format!("line {}: FREQ={other} not supported, only the first instance is kept", line.number));
            return Ok(None);
        }
        None => return Err(malformed(line.number, "RRULE without FREQ")),
    }
    Ok(Some(rule))
}

/// Instance starts of a rule, first one included, within the horizon.
fn expand(start: When, rule: &Rule, exdates: &BTreeSet<Timestamp>, uid: &str, warnings: &mut Vec<String>) -> Vec<When> {
    let first_date = start.date();
    let horizon = first_date + Duration::days(RRULE_HORIZON_DAYS);
    let until = rule.until.map(|u| u.timestamp());
    let mut out = Vec::new();
    let mut produced = 0u32;
    let limit = rule.count.unwrap_or(u32::MAX);
    let week_start = first_date - Duration::days(i64::from(first_date.weekday().num_days_from_monday()));
    let mut truncated = false;
    let mut day = 0i64;
    loop {
        let candidate = start.shift_days(day);
        let date = candidate.date();
        if date >= horizon {
            truncated = rule.count.is_none_or(|c| produced < c) && until.is_none_or(|u| u >= candidate.timestamp());
            break;
        }
        if produced >= limit || until.is_some_and(|u| candidate.timestamp() > u) {
            break;
        }
        let matches = match rule.freq {
            Freq::Daily => day % rule.interval == 0,
            Freq::Weekly => {
                let week = (date - week_start).num_days().div_euclid(7);
                let wd = date.weekday();
                let on_day = if rule.by_day.contains(&true) { rule.by_day[wd.num_days_from_monday() as usize] } else { wd == first_date.weekday() };
                week % rule.interval == 0 && on_day
            }
        };
        if matches {
            produced += 1;
            if !exdates.contains(&candidate.timestamp()) {
                out.push(candidate);
            }
        }
        day += 1;
    }
    if truncated {
        warnings.push(format!("event {uid}: recurrence truncated after {RRULE_HORIZON_DAYS} days"));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParsedEvent {
    /// For recurrence instances after the first: `<uid>#<start>`.
    pub uid: String,
    pub summary: String,
    pub interval: Interval,
    pub categories: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParsedCalendar {
    pub events: Vec<ParsedEvent>,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct RawEvent {
    line: usize,
    uid: Option<String>,
    summary: String,
    start: Option<When>,
    end: Option<When>,
    duration: Option<i64>,
    rule: Option<ContentLine>,
    exdates: Vec<ContentLine>,
    categories: Vec<String>,
}

/// Parses a VCALENDAR stream into events with UTC intervals. Floating times
/// are read in `zone`; all-day events cover whole local days.
pub fn parse_calendar(text: &str, zone: Tz) -> Result<ParsedCalendar, IcalError> {
    let lines = unfold(text.strip_prefix('\u{feff}').unwrap_or(text));
    let mut out = ParsedCalendar::default();
    let mut depth: Vec<String> = Vec::new();
    let mut current: Option<RawEvent> = None;
    let mut saw_calendar = false;
    for (number, raw) in &lines {
        let line = parse_line(*number, raw)?;
        match line.name.as_str() {
            "BEGIN" => {
                let what = line.value.trim().to_ascii_uppercase();
                if depth.is_empty() && what != "VCALENDAR" {
                    return Err(malformed(*number, "stream must start with BEGIN:VCALENDAR"));
                }
                if what == "VCALENDAR" {
                    saw_calendar = true;
                }
                if what == "VEVENT" && depth.len() == 1 {
                    current = Some(RawEvent { line: *number, ..Default::default() });
                }
                depth.push(what);
            }
            "END" => {
                let what = line.value.trim().to_ascii_uppercase();
                match depth.pop() {
                    Some(open) if open == what => {}
                    _ => return Err(malformed(*number, format!("unexpected END:{what}"))),
                }
                if what == "VEVENT" && depth.len() == 1 {
                    let ev = current.take().expect("opened above");
                    finish_event(ev, zone, &mut out)?;
                }
            }
            _ if depth.is_empty() => return Err(malformed(*number, "content outside VCALENDAR")),
            _ => {
                if let (Some(ev), 2) = (current.as_mut(), depth.len()) {
                    match line.name.as_str() {
                        "UID" => ev.uid = Some(line.value.trim().to_string()),
                        "SUMMARY" => ev.summary = unescape_text(&line.value),
                        "DTSTART" => ev.start = Some(parse_when(&line, zone)?),
                        "DTEND" => ev.end = Some(parse_when(&line, zone)?),
                        "DURATION" => ev.duration = Some(parse_duration(*number, &line.value)?),
                        "RRULE" => ev.rule = Some(line.clone()),
                        "EXDATE" => ev.exdates.push(line.clone()),
                        "CATEGORIES" => ev.categories.extend(line.value.split(',').map(|c| unescape_text(c.trim()))),
                        _ => {}
                    }
                }
            }
        }
    }
    if !saw_calendar {
        return Err(malformed(1, "no VCALENDAR found"));
    }
    if !depth.is_empty() {
        return Err(malformed(lines.last().map_or(1, |l| l.0), format!("unterminated {}", depth.last().expect("non-empty"))));
    }
    Ok(out)
}

fn finish_event(ev: RawEvent, zone: Tz, out: &mut ParsedCalendar) -> Result<(), IcalError> {
    let uid = ev.uid.clone().unwrap_or_else(|| format!("line-{}", ev.line));
    let start = ev.start.ok_or_else(|| malformed(ev.line, "VEVENT without DTSTART"))?;
    let length = match (ev.end, ev.duration, start) {
        (Some(end), _, _) => end.timestamp().minutes_since_epoch() - start.timestamp().minutes_since_epoch(),
        (None, Some(d), _) => d,
        (None, None, When::Date(_)) => 1440,
        (None, None, _) => 0,
    };
    if length <= 0 {
        out.warnings.push(format!("event {uid}: no positive duration, skipped"));
        return Ok(());
    }
    let starts = match &ev.rule {
        Some(line) => {
            let mut exdates = BTreeSet::new();
            for ex in &ev.exdates {
                for v in ex.value.split(',') {
                    let one = ContentLine { value: v.to_string(), ..ex.clone() };
                    exdates.insert(parse_when(&one, zone)?.timestamp());
                }
            }
            match parse_rule(line, zone, &mut out.warnings)? {
                Some(rule) => expand(start, &rule, &exdates, &uid, &mut out.warnings),
                None => vec![start],
            }
        }
        None => vec![start],
    };
    for (i, s) in starts.into_iter().enumerate() {
        let begin = match s {
            // all-day events follow local midnights
            When::Date(d) => Timestamp::from_local(zone, d, NaiveTime::MIN),
            other => other.timestamp(),
        };
        let finish = match s {
            When::Date(d) if length % 1440 == 0 => Timestamp::from_local(zone, d + Duration::days(length / 1440), NaiveTime::MIN),
            _ => begin.plus_minutes(length),
        };
        let Ok(interval) = Interval::new(begin, finish) else { continue };
        let instance_uid = if i == 0 { uid.clone() } else { format!("{uid}#{}", begin.to_ical()) };
        out.events.push(ParsedEvent { uid: instance_uid, summary: ev.summary.clone(), interval, categories: ev.categories.clone() });
    }
    Ok(())
}

// ---- roster operations ----

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ImportOutcome {
    pub time_off: Vec<TimeOff>,
    pub warnings: Vec<String>,
}

/// Turns each event into a time-off for `account`. Re-importing the same
/// events updates the existing records instead of duplicating them.
pub fn import_ical_time_off(roster: &mut Roster, account: AccountId, text: &str) -> Result<ImportOutcome, IcalError> {
    if !roster.accounts.contains_key(&account) {
        return Err(IcalError::UnknownAccount { id: account });
    }
    let parsed = parse_calendar(text, roster.settings.display_zone)?;
    let mut time_off = Vec::new();
    for ev in parsed.events {
        time_off.push(record_time_off(roster, account, ev.interval, &ev.summary, Some(ev.uid)));
    }
    Ok(ImportOutcome { time_off, warnings: parsed.warnings })
}

/// One report per event in `text` that overlaps `proposed`.
pub fn external_conflicts(text: &str, zone: Tz, proposed: &Interval) -> Result<Vec<ConflictReport>, IcalError> {
    let events = to_external_events(parse_calendar(text, zone)?);
    Ok(external_overlaps(&events, proposed))
}

fn to_external_events(parsed: ParsedCalendar) -> Vec<ExternalEvent> {
    parsed.events.into_iter().map(|e| ExternalEvent { uid: e.uid, summary: e.summary, interval: e.interval }).collect()
}

/// Replaces the busy blocks kept for an account's external calendar.
pub fn set_external_calendar(roster: &mut Roster, account: AccountId, text: &str) -> Result<ParsedCalendar, IcalError> {
    if !roster.accounts.contains_key(&account) {
        return Err(IcalError::UnknownAccount { id: account });
    }
    let parsed = parse_calendar(text, roster.settings.display_zone)?;
    let events = to_external_events(parsed.clone());
    if events.is_empty() {
        roster.external_events.remove(&account);
    } else {
        roster.external_events.insert(account, events);
    }
    Ok(parsed)
}
