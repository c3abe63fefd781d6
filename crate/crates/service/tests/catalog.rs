use std::collections::BTreeSet;

use rosterd_core::engine::EngineError;
use rosterd_core::ical::IcalError;
use rosterd_core::model::*;
use rosterd_core::report::{GroupBy, ReportError};
use rosterd_core::workflow::WorkflowError;
use rosterd_service::error::{status_of, ApiError};
use rosterd_service::i18n::{message, CATALOG};
use serde_json::Map;

fn domain() -> Vec<DomainError> {
    use DomainError::*;
    let all = vec![
        DuplicateEmail { email: "a@b.c".into() },
        MalformedColor { value: "red".into() },
        QuotaInconsistent { min: 2, max: 1 },
        QuotaNotPositive { which: "max_hours_per_day".into() },
        OverlappingAvailability { weekday: 0 },
        BadPayRates,
        EmptyField { field: "email".into() },
        UnknownAccount { id: AccountId(1) },
        UnknownPosition { id: PositionId(1) },
        UnknownDepartment { id: DepartmentId(1) },
        UnknownLocation { id: LocationId(1) },
        UnknownSchedule { id: ScheduleId(1) },
        AlreadyAnonymized { id: AccountId(1) },
        DuplicateName { kind: "position".into(), name: "Desk".into() },
        NotMember { account: AccountId(1), schedule: ScheduleId(1) },
        CascadeViolation,
        BadDashboardDays,
        BadOpeningHours { detail: "x".into() },
    ];
    for e in &all {
        match e {
            DuplicateEmail { .. } | MalformedColor { .. } | QuotaInconsistent { .. } | QuotaNotPositive { .. } | OverlappingAvailability { .. } => {}
            BadPayRates | EmptyField { .. } | UnknownAccount { .. } | UnknownPosition { .. } | UnknownDepartment { .. } | UnknownLocation { .. } => {}
            UnknownSchedule { .. } | AlreadyAnonymized { .. } | DuplicateName { .. } | NotMember { .. } | CascadeViolation | BadDashboardDays => {}
            BadOpeningHours { .. } => {}
        }
    }
    all
}

fn engine() -> Vec<EngineError> {
    use EngineError::*;
    let (sh, ac) = (ShiftId(2), AccountId(1));
    let all = vec![
        UnknownShift { id: sh },
        UnknownAccount { id: ac },
        UnknownSchedule { id: ScheduleId(3) },
        UnknownPosition { id: PositionId(4) },
        AccountAnonymized { id: ac },
        AlreadyAssigned { shift: sh, account: ac },
        NotMember { account: ac, schedule: ScheduleId(3) },
        NotEligiblePosition { shift: sh, account: ac },
        ConflictRefused { reports: vec![] },
        QuotaRefused { violations: vec![] },
        MaxStaffReached { shift: sh },
        ForbiddenForce,
        Forbidden,
        NotAssigned { shift: sh, account: ac },
        SplitOutOfRange,
        EmptyRange,
        SourceWeekEmpty,
        InvalidParams { detail: "x".into() },
    ];
    for e in &all {
        match e {
            UnknownShift { .. } | UnknownAccount { .. } | UnknownSchedule { .. } | UnknownPosition { .. } | AccountAnonymized { .. } => {}
            AlreadyAssigned { .. } | NotMember { .. } | NotEligiblePosition { .. } | ConflictRefused { .. } | QuotaRefused { .. } => {}
            MaxStaffReached { .. } | ForbiddenForce | Forbidden | NotAssigned { .. } | SplitOutOfRange | EmptyRange | SourceWeekEmpty => {}
            InvalidParams { .. } => {}
        }
    }
    all
}

fn workflow() -> Vec<WorkflowError> {
    use WorkflowError::*;
    let all = vec![
        SelfEntryDisabled,
        EmptyInterval,
        NotPending,
        Forbidden,
        ClaimingDisabled,
        NotUnderstaffed { shift: ShiftId(1) },
        GiveUpDisabled,
        DropDisabled,
        SwapDisabled,
        NotAssigned { shift: ShiftId(1), account: AccountId(2) },
        CounterpartyConflict { reports: vec![] },
        CrossSchedule,
        DuplicateRequest { kind: ExchangeKind::Swap },
        UnknownTimeOff { id: TimeOffId(1) },
        UnknownRequest { id: RequestId(1) },
        Engine(EngineError::SplitOutOfRange),
    ];
    for e in &all {
        match e {
            SelfEntryDisabled | EmptyInterval | NotPending | Forbidden | ClaimingDisabled | NotUnderstaffed { .. } | GiveUpDisabled => {}
            DropDisabled | SwapDisabled | NotAssigned { .. } | CounterpartyConflict { .. } | CrossSchedule | DuplicateRequest { .. } => {}
            UnknownTimeOff { .. } | UnknownRequest { .. } | Engine(_) => {}
        }
    }
    all
}

fn report() -> Vec<ReportError> {
    use ReportError::*;
    let all = vec![Forbidden, UnknownSchedule { id: ScheduleId(1) }, DuplicateGroupBy { key: GroupBy::Day }];
    for e in &all {
        match e {
            Forbidden | UnknownSchedule { .. } | DuplicateGroupBy { .. } => {}
        }
    }
    all
}

fn ical() -> Vec<IcalError> {
    use IcalError::*;
    let all = vec![MalformedCalendar { line: 3, detail: "x".into() }, UnknownAccount { id: AccountId(1) }];
    for e in &all {
        match e {
            MalformedCalendar { .. } | UnknownAccount { .. } => {}
        }
    }
    all
}

/// Codes the service constructs directly, read from its sources.
fn service_codes() -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![std::path::PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/src"))];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let text = std::fs::read_to_string(&path).unwrap();
            for piece in text.split("ApiError::new(\"").skip(1) {
                out.insert(piece.split('"').next().unwrap().to_string());
            }
        }
    }
    out
}

#[test]
fn every_emitted_code_has_both_translations() {
    let mut codes: BTreeSet<String> = service_codes();
    assert!(codes.contains("unauthenticated") && codes.contains("version_conflict"));
    let (d, e, w, r, i) = (domain(), engine(), workflow(), report(), ical());
    let tagged = d
        .iter()
        .map(ApiError::tagged)
        .chain(e.iter().map(ApiError::tagged))
        .chain(w.iter().map(ApiError::tagged))
        .chain(r.iter().map(ApiError::tagged))
        .chain(i.iter().map(ApiError::tagged));
    codes.extend(tagged.map(|e| e.code));
    codes.extend(["bad_request", "forbidden", "not_found"].map(String::from));
    let known: BTreeSet<&str> = CATALOG.iter().map(|(c, _, _)| *c).collect();
    for code in &codes {
        assert!(known.contains(code.as_str()), "{code} has no catalog entry");
        let en = message(Locale::En, code, &Map::new());
        let fr = message(Locale::Fr, code, &Map::new());
        assert_ne!(en, fr, "{code} is not translated");
    }
    let unused: Vec<&&str> = known.iter().filter(|c| !codes.contains(**c)).collect();
    assert!(unused.is_empty(), "catalog entries never emitted: {unused:?}");
}

#[test]
fn catalog_placeholders_match_between_locales() {
    let holes = |s: &str| s.split('{').skip(1).map(|p| p.split('}').next().unwrap().to_string()).collect::<BTreeSet<_>>();
    for (code, en, fr) in CATALOG {
        assert_eq!(holes(en), holes(fr), "{code}");
    }
}

#[test]
fn tagged_errors_fill_their_placeholders() {
    for e in engine() {
        let api = ApiError::tagged(&e);
        for locale in [Locale::En, Locale::Fr] {
            let text = message(locale, &api.code, &api.details);
            assert!(!text.contains('{'), "{}: {text}", api.code);
        }
    }
    assert_eq!(status_of("unknown_shift").as_u16(), 404);
    assert_eq!(status_of("version_conflict").as_u16(), 412);
    assert_eq!(status_of("not_pending").as_u16(), 409);
}
