//! Error message catalogs and `Accept-Language` negotiation.

use axum::body::Body;
use axum::extract::{Request, State};
use axum::http::header::{ACCEPT_LANGUAGE, CONTENT_LANGUAGE, CONTENT_LENGTH, CONTENT_TYPE};
use axum::http::HeaderValue;
use axum::middleware::Next;
use axum::response::Response;
use rosterd_core::model::Locale;
use serde_json::{Map, Value};

use crate::error::ErrorInfo;
use crate::AppState;

/// `(code, en, fr)`; `{name}` is replaced by the detail field of that name.
pub const CATALOG: &[(&str, &str, &str)] = &[
    ("unauthenticated", "Authentication required.", "Authentification requise."),
    ("bad_credentials", "Unknown email or wrong password.", "Adresse email inconnue ou mot de passe incorrect."),
    ("ip_not_allowed", "Access from {ip} is not allowed.", "L'accès depuis {ip} n'est pas autorisé."),
    ("forbidden", "You do not have the right to do this.", "Vous n'avez pas le droit d'effectuer cette action."),
    ("forbidden_force", "Only a schedule manager may override a conflict.", "Seul un gestionnaire du planning peut outrepasser un conflit."),
    ("not_found", "Not found.", "Introuvable."),
    ("bad_request", "Invalid request: {detail}", "Requête invalide : {detail}"),
    ("validation", "The submitted record is invalid.", "L'enregistrement soumis est invalide."),
    ("version_conflict", "Schedule {schedule} changed meanwhile (version {actual}, expected {expected}).", "Le planning {schedule} a été modifié entre-temps (version {actual}, attendue {expected})."),
    ("storage", "Storage failure.", "Erreur de stockage."),
    ("internal", "Internal error.", "Erreur interne."),
    ("delivery_failed", "Notification delivery failed: {detail}", "L'envoi des notifications a échoué : {detail}"),
    ("duplicate_email", "The email {email} is already in use.", "L'adresse {email} est déjà utilisée."),
    ("malformed_color", "The color {value} is not a #RRGGBB code.", "La couleur {value} n'est pas un code #RRGGBB."),
    ("quota_inconsistent", "Minimum weekly hours ({min}) exceed the maximum ({max}).", "Le minimum d'heures hebdomadaires ({min}) dépasse le maximum ({max})."),
    ("quota_not_positive", "Quota {which} must be positive.", "Le quota {which} doit être positif."),
    ("overlapping_availability", "Availability ranges overlap on weekday {weekday}.", "Les plages de disponibilité se chevauchent le jour {weekday}."),
    ("bad_pay_rates", "Pay rates are invalid.", "Les taux horaires sont invalides."),
    ("empty_field", "The field {field} must not be empty.", "Le champ {field} ne peut pas être vide."),
    ("unknown_account", "Unknown account {id}.", "Compte {id} inconnu."),
    ("unknown_position", "Unknown position {id}.", "Poste {id} inconnu."),
    ("unknown_department", "Unknown department {id}.", "Département {id} inconnu."),
    ("unknown_location", "Unknown location {id}.", "Site {id} inconnu."),
    ("unknown_schedule", "Unknown schedule {id}.", "Planning {id} inconnu."),
    ("unknown_shift", "Unknown shift {id}.", "Quart {id} inconnu."),
    ("unknown_time_off", "Unknown time-off {id}.", "Absence {id} inconnue."),
    ("unknown_request", "Unknown request {id}.", "Demande {id} inconnue."),
    ("already_anonymized", "Account {id} is already anonymized.", "Le compte {id} est déjà anonymisé."),
    ("duplicate_name", "A {kind} named {name} already exists.", "Un(e) {kind} nommé(e) {name} existe déjà."),
    ("not_member", "Account {account} is not a member of schedule {schedule}.", "Le compte {account} n'est pas membre du planning {schedule}."),
    ("cascade_violation", "Statistics and time-off approval require the right to manage shifts.", "Les statistiques et la validation des absences exigent le droit de gérer les quarts."),
    ("bad_dashboard_days", "The dashboard horizon must be at least one day.", "L'horizon du tableau de bord doit être d'au moins un jour."),
    ("bad_opening_hours", "Opening hours are inconsistent: {detail}", "Les horaires d'ouverture sont incohérents : {detail}"),
    ("account_anonymized", "Account {id} is anonymized.", "Le compte {id} est anonymisé."),
    ("already_assigned", "Account {account} is already on shift {shift}.", "Le compte {account} est déjà assigné au quart {shift}."),
    ("not_eligible_position", "Account {account} holds none of the positions shift {shift} requires.", "Le compte {account} n'occupe aucun des postes requis par le quart {shift}."),
    ("conflict_refused", "The assignment conflicts with other commitments.", "L'assignation entre en conflit avec d'autres engagements."),
    ("quota_refused", "The assignment would break a quota.", "L'assignation dépasserait un quota."),
    ("max_staff_reached", "Shift {shift} is fully staffed.", "Le quart {shift} est complet."),
    ("not_assigned", "Account {account} is not on shift {shift}.", "Le compte {account} n'est pas assigné au quart {shift}."),
    ("split_out_of_range", "The split point must fall strictly inside the shift.", "Le point de découpe doit se situer strictement à l'intérieur du quart."),
    ("empty_range", "The date range is empty.", "La période est vide."),
    ("source_week_empty", "The source week has no shifts.", "La semaine source ne contient aucun quart."),
    ("invalid_params", "Invalid parameters: {detail}", "Paramètres invalides : {detail}"),
    ("self_entry_disabled", "Self-service time-off entry is disabled.", "La saisie des absences par les agents est désactivée."),
    ("empty_interval", "The interval is empty.", "L'intervalle est vide."),
    ("not_pending", "This request is no longer pending.", "Cette demande n'est plus en attente."),
    ("claiming_disabled", "Shift claiming is disabled for this schedule.", "La réclamation de quarts est désactivée pour ce planning."),
    ("not_understaffed", "Shift {shift} is not understaffed.", "Le quart {shift} n'est pas en sous-effectif."),
    ("give_up_disabled", "Giving up shifts is disabled for this schedule.", "L'abandon de quarts est désactivé pour ce planning."),
    ("drop_disabled", "Dropping shifts is disabled for this schedule.", "Le lâcher de quarts est désactivé pour ce planning."),
    ("swap_disabled", "Swapping shifts is disabled for this schedule.", "L'échange de quarts est désactivé pour ce planning."),
    ("counterparty_conflict", "The colleague cannot take this shift.", "Le ou la collègue ne peut pas prendre ce quart."),
    ("cross_schedule", "Swaps must stay within one schedule.", "Les échanges doivent rester au sein d'un même planning."),
    ("duplicate_request", "A similar request is already open.", "Une demande similaire est déjà ouverte."),
    ("duplicate_group_by", "The grouping key {key} is given twice.", "La clé de regroupement {key} est donnée deux fois."),
    ("malformed_calendar", "Malformed calendar at line {line}: {detail}", "Calendrier mal formé à la ligne {line} : {detail}"),
];

pub fn message(locale: Locale, code: &str, details: &Map<String, Value>) -> String {
    let Some((_, en, fr)) = CATALOG.iter().find(|(c, _, _)| *c == code) else {
        return code.to_string();
    };
    let mut text = match locale {
        Locale::En => en.to_string(),
        Locale::Fr => fr.to_string(),
    };
    for (key, value) in details {
        let needle = format!("{{{key}}}");
        if text.contains(&needle) {
            let shown = match value {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            text = text.replace(&needle, &shown);
        }
    }
    text
}

/// Picks en or fr from an `Accept-Language` header by quality, else `fallback`.
pub fn negotiate(header: Option<&str>, fallback: Locale) -> Locale {
    let Some(header) = header else { return fallback };
    let mut best: Option<(f32, Locale)> = None;
    for part in header.split(',') {
        let mut pieces = part.trim().split(';');
        let tag = pieces.next().unwrap_or("").trim();
        let q = pieces
            .filter_map(|p| p.trim().strip_prefix("q="))
            .find_map(|q| q.parse::<f32>().ok())
            .unwrap_or(1.0);
        let primary = tag.split('-').next().unwrap_or("");
        let Ok(locale) = primary.parse::<Locale>() else { continue };
        if q > 0.0 && best.is_none_or(|(bq, _)| q > bq) {
            best = Some((q, locale));
        }
    }
    best.map(|b| b.1).unwrap_or(fallback)
}

/// Re-renders error bodies in the negotiated locale.
pub async fn localize(State(app): State<AppState>, req: Request, next: Next) -> Response {
    let header = req.headers().get(ACCEPT_LANGUAGE).and_then(|v| v.to_str().ok()).map(String::from);
    let response = next.run(req).await;
    let Some(ErrorInfo(error)) = response.extensions().get::<ErrorInfo>().cloned() else {
        return response;
    };
    let locale = negotiate(header.as_deref(), app.default_locale());
    let (mut parts, _) = response.into_parts();
    let body = serde_json::to_vec(&error.body(locale)).unwrap_or_default();
    parts.headers.remove(CONTENT_LENGTH);
    parts.headers.insert(CONTENT_TYPE, HeaderValue::from_static("application/json"));
    parts.headers.insert(CONTENT_LANGUAGE, HeaderValue::from_static(locale.as_str()));
    Response::from_parts(parts, Body::from(body))
}
