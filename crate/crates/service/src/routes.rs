//! The rights table. Every endpoint is declared once here; the router, the
//! authentication gate and `docs/openapi.json` are all derived from it.

use axum::http::Method;
use axum::{middleware, Router};
use serde::Serialize;

use crate::handlers::{admin, exchange, schedules, session, shifts, views};
use crate::{auth, i18n, AppState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// No authentication.
    Public,
    /// Any signed-in account.
    Authenticated,
    Admin,
    /// The account named in the path, or an Admin.
    SelfOrAdmin,
    /// Member or manager of the target schedule.
    Member,
    /// `manage_shifts` on every target schedule.
    Manager,
    /// `view_stats` on every queried schedule.
    Stats,
    /// `approve_time_off` on a schedule holding the time-off's account.
    Approver,
    /// `manage_shifts` on at least one schedule.
    AnyManager,
    /// The counterparty named in the request.
    Counterparty,
    /// The request's initiator, or a manager of its schedule.
    InitiatorOrManager,
}

impl Rule {
    pub fn describe(&self) -> &'static str {
        match self {
            Rule::Public => "no authentication",
            Rule::Authenticated => "any signed-in account",
            Rule::Admin => "Admin role",
            Rule::SelfOrAdmin => "the account itself or an Admin",
            Rule::Member => "member or manager of the schedule",
            Rule::Manager => "manage_shifts on the schedule",
            Rule::Stats => "view_stats on every queried schedule",
            Rule::Approver => "approve_time_off over the account",
            Rule::AnyManager => "manage_shifts on some schedule",
            Rule::Counterparty => "the request's counterparty",
            Rule::InitiatorOrManager => "the request's initiator or a schedule manager",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RouteSpec {
    pub method: &'static str,
    pub path: &'static str,
    pub rule: Rule,
    pub summary: &'static str,
}

impl RouteSpec {
    pub fn is_mutating(&self) -> bool {
        self.method != "GET"
    }
}

macro_rules! table {
    ($( $m:ident $path:literal $rule:ident $handler:path, $summary:literal; )*) => {
        pub const ROUTES: &[RouteSpec] = &[
            $( RouteSpec { method: table!(@m $m), path: $path, rule: Rule::$rule, summary: $summary }, )*
        ];

        fn mount(router: Router<AppState>) -> Router<AppState> {
            router $( .route($path, axum::routing::$m($handler)) )*
        }
    };
    (@m get) => { "GET" };
    (@m post) => { "POST" };
    (@m put) => { "PUT" };
    (@m patch) => { "PATCH" };
    (@m delete) => { "DELETE" };
}

table! {
    get "/api/health" Public session::health, "Liveness probe";
    post "/api/auth/login" Public session::login, "Exchange email and password for a session token";
    post "/api/auth/logout" Authenticated session::logout, "End the current session";
    get "/api/me" Authenticated session::me, "The signed-in account";
    post "/api/tokens" Admin session::issue_token, "Issue a long-lived API token for an account";

    get "/api/settings" Authenticated admin::get_settings, "System settings";
    put "/api/settings" Admin admin::put_settings, "Replace system settings";
    get "/api/opening-hours" Authenticated admin::get_opening_hours, "Opening-hours calendar";
    put "/api/opening-hours" Admin admin::put_opening_hours, "Replace the opening-hours calendar";
    get "/api/opening-hours/total" Authenticated views::open_hours_total, "Open minutes over a date range, per period";

    get "/api/locations" Authenticated admin::list_locations, "List locations";
    post "/api/locations" Admin admin::add_location, "Create a location";
    get "/api/departments" Authenticated admin::list_departments, "List departments";
    post "/api/departments" Admin admin::add_department, "Create a department";
    get "/api/positions" Authenticated admin::list_positions, "List positions";
    post "/api/positions" Admin admin::add_position, "Create a position";
    put "/api/positions/{id}/color" Admin admin::position_color, "Apply a color to every holder of a position";

    get "/api/accounts" Authenticated admin::list_accounts, "List accounts";
    post "/api/accounts" Admin admin::create_account, "Create an account";
    get "/api/accounts/{id}" SelfOrAdmin admin::get_account, "Full account record";
    put "/api/accounts/{id}" Admin admin::update_account, "Replace an account";
    delete "/api/accounts/{id}" Admin admin::delete_account, "Delete an account, keeping past assignments under a token";
    post "/api/accounts/{id}/anonymize" Admin admin::anonymize_account, "Irreversibly anonymize an account";
    put "/api/accounts/{id}/password" SelfOrAdmin session::set_password, "Set the account's password";
    put "/api/accounts/{id}/availability" SelfOrAdmin admin::set_availability, "Replace the weekly availability grid";
    get "/api/accounts/{id}/calendar.ics" SelfOrAdmin views::export_ical, "Personal schedule as iCalendar";
    post "/api/accounts/{id}/time-off/import" SelfOrAdmin views::import_ical, "Import iCalendar events as time-off";
    put "/api/accounts/{id}/external-calendar" SelfOrAdmin views::set_external_calendar, "Store an external calendar used for conflict checks";
    post "/api/external-conflicts" Authenticated views::external_conflicts, "Conflicts between an iCalendar feed and a proposed interval";

    get "/api/schedules" Authenticated schedules::list, "Schedules visible to the caller";
    post "/api/schedules" Admin schedules::create, "Create a schedule";
    get "/api/schedules/{id}" Member schedules::get, "One schedule";
    put "/api/schedules/{id}/settings" Manager schedules::put_settings, "Replace the schedule's workflow settings";
    post "/api/schedules/{id}/members" Manager schedules::add_member, "Add a member";
    delete "/api/schedules/{id}/members/{account}" Manager schedules::remove_member, "Remove a member";
    put "/api/schedules/{id}/grants/{account}" Admin schedules::grant, "Set a member's elevated rights";
    post "/api/schedules/{id}/publish" Manager schedules::publish, "Publish or retract the public view";
    get "/api/schedules/{id}/setup" Manager schedules::setup, "Setup checklist";
    post "/api/schedules/{id}/copy-week" Manager schedules::copy_week, "Copy one week of shifts onto other weeks";
    get "/api/schedules/{id}/shifts" Member schedules::shifts, "Shifts of a schedule in a date range";
    get "/public/schedules/{id}" Public schedules::public_view, "Read-only public schedule";
    get "/public/schedules/{id}/embed" Public schedules::public_embed, "Embeddable HTML snippet";

    post "/api/shifts" Manager shifts::create, "Create a shift, optionally recurring";
    get "/api/shifts/{id}" Member shifts::get, "One shift";
    patch "/api/shifts/{id}" Manager shifts::update, "Change a shift";
    delete "/api/shifts/{id}" Manager shifts::delete, "Delete a shift";
    get "/api/shifts/{id}/eligible" Manager shifts::eligible, "Ordered candidates with their blocking reports";
    post "/api/shifts/{id}/assign" Manager shifts::assign, "Assign an account";
    post "/api/shifts/{id}/unassign" Manager shifts::unassign, "Remove an assignee";
    post "/api/shifts/{id}/split" Manager shifts::split, "Split a shift in two";
    post "/api/shifts/{id}/claim" Member exchange::claim, "Claim an understaffed shift";
    post "/api/shifts/{id}/give-up" Member exchange::give_up, "Offer a shift to colleagues";
    post "/api/shifts/{id}/drop" Member exchange::drop, "Drop a shift, optionally naming a replacement";
    post "/api/shifts/{id}/swap" Member exchange::swap, "Propose a swap to a colleague";
    post "/api/auto-schedule/preview" Manager shifts::autoschedule_preview, "Plan the auto-scheduler without applying it";
    post "/api/auto-schedule/apply" Manager shifts::autoschedule_apply, "Run the auto-scheduler";

    get "/api/requests" Authenticated exchange::list_requests, "Exchange requests involving the caller";
    post "/api/requests/{id}/accept" Member exchange::accept, "Accept a give-up";
    post "/api/requests/{id}/respond" Counterparty exchange::respond, "Accept or decline a swap";
    post "/api/requests/{id}/resolve" Manager exchange::resolve, "Approve or reject a swap awaiting approval";
    post "/api/requests/{id}/cancel" InitiatorOrManager exchange::cancel, "Cancel an open request";

    get "/api/time-off" Authenticated exchange::list_time_off, "Time-off the caller may see";
    post "/api/time-off" Authenticated exchange::request_time_off, "File time-off";
    post "/api/time-off/{id}/resolve" Approver exchange::resolve_time_off, "Approve or deny time-off";

    post "/api/reports" Stats views::report, "Run a report";
    post "/api/reports/csv" Stats views::report_csv, "Run a report as CSV";
    get "/api/advisory/overlaps" AnyManager views::advisory, "Assignments overlapping approved time-off";
    get "/api/dashboard" Authenticated views::dashboard, "Upcoming shifts, open requests and announcements";
    get "/api/timeline" Authenticated views::timeline, "Merged multi-schedule timeline";
    get "/api/announcements" Authenticated admin::list_announcements, "Announcements for the caller";
    post "/api/announcements" Admin admin::post_announcement, "Publish an announcement";
    get "/api/notifications" Authenticated views::notifications, "The caller's notifications";
    post "/api/outbox/deliver" Admin admin::deliver_outbox, "Deliver pending notifications";
}

pub fn lookup(method: &Method, path: &str) -> Option<&'static RouteSpec> {
    ROUTES.iter().find(|r| r.path == path && r.method == method.as_str())
}

pub fn router(state: AppState) -> Router {
    mount(Router::new())
        .route_layer(middleware::from_fn_with_state(state.clone(), auth::gate))
        .layer(middleware::from_fn_with_state(state.clone(), i18n::localize))
        .with_state(state)
}
